"""Regime classification and long-time verification of the full model.

classify_regime evaluates the threshold eigenvalues and names the
attractor: EXTINCTION (all zero), DISEASE_FREE (only the vector total
survives), ENDEMIC (the infection persists on a periodic orbit), or
INDETERMINATE when an eigenvalue sits inside the decision band and the
sign cannot be trusted at solver resolution.

verify_trichotomy integrates the full model and measures per-period sup
distances to the classified attractor; sandwich_check watches the total
vector population enter the +/- eps*phi band around the carrying orbit.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import median

import numpy as np

from .coeffs import CoefficientSet, Expression, field_values
from .eigen import (DEFAULT_EIGEN_TOL, DEFAULT_MAX_ITERS, EigenResult,
                    PeriodicOrbit, lambda_V)
from .errors import InputError
from .grid import BoundarySpec, Grid
from .periodic import (DEFAULT_BAND, DEFAULT_MAX_PERIODS, DEFAULT_ORBIT_TOL,
                       EndemicPairResult, LogisticOrbitResult,
                       solve_endemic_pair, solve_logistic_orbit)
from .stepper import (DEFAULT_BLOWUP_CAP, NonlinearModel, StateField,
                      Trajectory, integrate_trajectory)

__all__ = [
    "SolverOptions", "RegimeReport", "ConvergenceReport", "SandwichReport",
    "classify_regime", "verify_trichotomy", "sandwich_check",
    "build_initial_state",
    "EXTINCTION", "DISEASE_FREE", "ENDEMIC", "INDETERMINATE",
]

EXTINCTION = "EXTINCTION"
DISEASE_FREE = "DISEASE_FREE"
ENDEMIC = "ENDEMIC"
INDETERMINATE = "INDETERMINATE"

_TINY_ERROR = 1e-12   # distances below this carry no ratio information


@dataclass(frozen=True)
class SolverOptions:
    """Numerical knobs shared by the classification pipeline."""

    eigen_tol: float = DEFAULT_EIGEN_TOL
    max_eigen_iters: int = DEFAULT_MAX_ITERS
    orbit_tol: float = DEFAULT_ORBIT_TOL
    max_periods: int = DEFAULT_MAX_PERIODS
    band: float = DEFAULT_BAND
    blowup_cap: float = DEFAULT_BLOWUP_CAP
    eps: float = 0.0
    n_periods: int = 40
    sample_stride: int = 8
    target: float = 1e-3


@dataclass(frozen=True)
class RegimeReport:
    """Threshold values, the named regime, and the attractor orbit.

    lambda_V is None whenever the carrying orbit is zero (no state to
    invade).  attractor is a three-component orbit (host infected, vector
    uninfected, vector infected) or None for INDETERMINATE; with eps > 0
    in the options the endemic attractor is the band envelope, not the
    orbit itself.
    """

    zeta: float
    lambda_V: float | None
    regime: str
    attractor: PeriodicOrbit | None
    attractor_kind: str
    band: float
    logistic: LogisticOrbitResult
    lambda_V_result: EigenResult | None = None
    pair: EndemicPairResult | None = None


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-period sup distances of a trajectory to the attractor."""

    regime: str
    errors: tuple
    ratios: tuple
    final_error: float
    median_ratio: float
    verdict: str
    n_periods: int
    target: float
    regime_report: RegimeReport


@dataclass(frozen=True)
class SandwichReport:
    """First period after which the total vector stays in the band."""

    eps: float
    entered_at: int | None
    status: str
    n_periods: int


# ─────────────────────────────────────────────────────── classification ──


def classify_regime(c: CoefficientSet, bcs, grid: Grid,
                    tols: SolverOptions | None = None) -> RegimeReport:
    """Name the long-time regime from the signs of zeta and lambda(V).

    Signs are only trusted outside +/- band; inside it the report says
    INDETERMINATE and carries no attractor.  Endemic attractors come from
    the two-sided pair construction (eps taken from the options).
    """
    o = tols if tols is not None else SolverOptions()
    bc1, bc2 = bcs
    g = grid
    m = g.steps_per_period
    n1, n2 = g.n_unknowns(bc1), g.n_unknowns(bc2)

    lr = solve_logistic_orbit(c, bc2, g, o.orbit_tol, o.max_periods, o.band,
                              o.eigen_tol, o.max_eigen_iters)
    z = lr.zeta
    if z >= o.band:
        return RegimeReport(
            zeta=z, lambda_V=None, regime=EXTINCTION,
            attractor=PeriodicOrbit.zeros([n1, n2, n2], m, g.dt, g.T),
            attractor_kind="(0, 0, 0)", band=o.band, logistic=lr)
    if z > -o.band:
        return RegimeReport(
            zeta=z, lambda_V=None, regime=INDETERMINATE, attractor=None,
            attractor_kind="undecided (zeta inside the band)", band=o.band,
            logistic=lr)

    lam = lambda_V(c, bcs, g, lr.orbit, o.eigen_tol, o.max_eigen_iters)
    zeros1 = np.zeros((m + 1, n1))
    zeros2 = np.zeros((m + 1, n2))
    if lam.value >= o.band:
        attractor = PeriodicOrbit((zeros1, lr.orbit.samples[0], zeros2),
                                  g.dt, g.T, lr.orbit.residual)
        return RegimeReport(
            zeta=z, lambda_V=lam.value, regime=DISEASE_FREE,
            attractor=attractor, attractor_kind="(0, V, 0)", band=o.band,
            logistic=lr, lambda_V_result=lam)
    if lam.value <= -o.band:
        pair = solve_endemic_pair(c, bcs, g, eps=o.eps, tol=o.orbit_tol,
                                  max_periods=o.max_periods, band=o.band,
                                  eigen_tol=o.eigen_tol,
                                  max_eigen_iters=o.max_eigen_iters,
                                  logistic=lr, lam=lam)
        attractor = PeriodicOrbit(
            (pair.H_orbit.samples[0],
             lr.orbit.samples[0] - pair.Vi_orbit.samples[0],
             pair.Vi_orbit.samples[0]),
            g.dt, g.T,
            max(lr.orbit.residual, pair.upper_residual))
        return RegimeReport(
            zeta=z, lambda_V=lam.value, regime=ENDEMIC, attractor=attractor,
            attractor_kind="(H_i, V - V_i, V_i)", band=o.band, logistic=lr,
            lambda_V_result=lam, pair=pair)
    return RegimeReport(
        zeta=z, lambda_V=lam.value, regime=INDETERMINATE, attractor=None,
        attractor_kind="undecided (lambda(V) inside the band)", band=o.band,
        logistic=lr, lambda_V_result=lam)


# ──────────────────────────────────────────────────────── verification ──


def build_initial_state(grid: Grid, bc1: BoundarySpec, bc2: BoundarySpec,
                        values) -> StateField:
    """StateField at t = 0 from three per-component values.

    Each entry may be a scalar, an array on the component's node layout,
    or an Expression evaluated there at t = 0.
    """
    if len(values) != 3:
        raise InputError("expected three initial components (H_i, V_u, V_i)")
    comps = []
    for bc, v in zip((bc1, bc2, bc2), values):
        nodes = grid.nodes_for(bc)
        if isinstance(v, Expression):
            arr = np.asarray(field_values(v, nodes, 0.0), dtype=float)
        else:
            arr = np.asarray(v, dtype=float)
            if arr.ndim == 0:
                arr = np.full(nodes.shape, float(arr))
        if arr.shape != nodes.shape:
            raise InputError(
                f"initial component has shape {arr.shape}, layout needs {nodes.shape}")
        comps.append(arr)
    return StateField(tuple(comps), 0.0, 0)


def _check_positive_interior(u: StateField, bcs) -> None:
    # Dirichlet layouts carry interior nodes only, so the slice is everything
    for i, (comp, bc) in enumerate(zip(u.components, (bcs[0], bcs[1], bcs[1]))):
        inner = comp[1:-1] if bc.flavor == "robin" else comp
        if inner.size and float(np.min(inner)) <= 0.0:
            raise InputError(
                f"initial component {i} must be strictly positive at interior "
                f"nodes (min {float(np.min(inner)):.3g})")


def _period_errors(traj: Trajectory, attractor: PeriodicOrbit,
                   n_periods: int) -> list:
    m = traj.grid.steps_per_period
    errors = [0.0] * n_periods
    for s in traj.states:
        n = min(s.step // m, n_periods - 1)
        d = max(float(np.max(np.abs(comp - attractor.level(i, s.step % m))))
                for i, comp in enumerate(s.components))
        if d > errors[n]:
            errors[n] = d
    return errors


def verify_trichotomy(c: CoefficientSet, bcs, grid: Grid,
                      initial=None, n_periods: int | None = None,
                      target: float | None = None,
                      tols: SolverOptions | None = None,
                      report: RegimeReport | None = None) -> ConvergenceReport:
    """Integrate the full model and measure convergence to the attractor.

    errors[n] is the sup distance over all components, nodes, and stored
    levels of period n; the verdict is PASS when the final error is at or
    below target and the median period-to-period ratio is below one.
    Initial data must be strictly positive at interior nodes.
    """
    o = tols if tols is not None else SolverOptions()
    n_periods = o.n_periods if n_periods is None else n_periods
    target = o.target if target is None else target
    if report is None:
        report = classify_regime(c, bcs, grid, o)
    if report.regime == INDETERMINATE:
        return ConvergenceReport(
            regime=INDETERMINATE, errors=(), ratios=(), final_error=float("nan"),
            median_ratio=float("nan"), verdict=INDETERMINATE,
            n_periods=n_periods, target=target, regime_report=report)

    bc1, bc2 = bcs
    if initial is None:
        initial = (1.0, 0.5, 0.1)
    u0 = initial if isinstance(initial, StateField) else \
        build_initial_state(grid, bc1, bc2, initial)
    _check_positive_interior(u0, bcs)

    model = NonlinearModel(kind="full", c=c, bc1=bc1, bc2=bc2, grid=grid,
                           cap=o.blowup_cap)
    traj = integrate_trajectory(model, u0, n_periods, o.sample_stride)

    errors = _period_errors(traj, report.attractor, n_periods)
    ratios = [errors[n + 1] / errors[n]
              for n in range(n_periods - 1) if errors[n] > _TINY_ERROR]
    med = float(median(ratios)) if ratios else 0.0
    final = errors[-1]
    verdict = "PASS" if (final <= target and med < 1.0) else "FAIL"
    return ConvergenceReport(
        regime=report.regime, errors=tuple(errors), ratios=tuple(ratios),
        final_error=final, median_ratio=med, verdict=verdict,
        n_periods=n_periods, target=target, regime_report=report)


def sandwich_check(c: CoefficientSet, bcs, grid: Grid, V: PeriodicOrbit,
                   phi: PeriodicOrbit, eps: float,
                   trajectory: Trajectory) -> SandwichReport:
    """Smallest period N after which the total vector stays inside
    [V - eps*phi, V + eps*phi] at every stored sample; NOT_REACHED when
    the band is never entered for good (or the carrying orbit is zero).
    """
    if eps <= 0.0:
        raise InputError("the sandwich band needs eps > 0")
    m = grid.steps_per_period
    n_total = trajectory.n_periods
    if V.sup_norm() == 0.0:
        return SandwichReport(eps=eps, entered_at=None, status="NOT_REACHED",
                              n_periods=n_total)
    scale = V.sup_norm() + eps * phi.sup_norm()
    slack = 1e-12 * max(1.0, scale)
    last_bad = -1
    for s in trajectory.states:
        k = s.step % m
        W = s.components[1] + s.components[2]
        lo = V.level(0, k) - eps * phi.level(0, k)
        hi = V.level(0, k) + eps * phi.level(0, k)
        if float(np.min(W - lo)) < -slack or float(np.max(W - hi)) > slack:
            last_bad = s.step
    N = 0 if last_bad < 0 else last_bad // m + 1
    if N > n_total:
        return SandwichReport(eps=eps, entered_at=None, status="NOT_REACHED",
                              n_periods=n_total)
    return SandwichReport(eps=eps, entered_at=N, status="ENTERED",
                          n_periods=n_total)
