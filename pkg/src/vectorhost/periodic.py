"""Construction of the periodic attractors by monotone period-map iteration.

solve_logistic_orbit squeezes the vector-total carrying orbit between a
constant supersolution and a small multiple of the growth eigenfunction;
when the growth threshold zeta is nonnegative (up to the decision band)
the zero orbit is returned instead.

solve_Hbar iterates the affine host equation driven by the band-shifted
carrying orbit; the host decay rate makes the period map a contraction.

solve_endemic_pair runs the classical two-sided scheme on the truncated
infection system: an upper seed built from the host profile and the
band-shifted carrying orbit, a lower seed proportional to the invasion
eigenfunction, both iterated until they meet.  The band width eps is
halved until admissible (positivity, the quadratic band inequality, a
strictly negative shifted invasion exponent, certified first-step
monotonicity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffs import CoefficientSet, field_values
from .eigen import (DEFAULT_EIGEN_TOL, DEFAULT_MAX_ITERS, EigenResult,
                    PeriodicOrbit, gamma_rho, lambda_V, lambda_V_eps, zeta)
from .errors import (GapError, InputError, InternalError, NoConvergence,
                     NonUniqueOrbit, RegimeError)
from .grid import BoundarySpec, Grid, map_between
from .stepper import (ComponentSpec, LinearPeriodicSystem, NonlinearModel,
                      StateField, integrate_over_period, prepare)

__all__ = [
    "LogisticOrbitResult", "EndemicPairResult",
    "solve_logistic_orbit", "solve_Hbar", "solve_endemic_pair",
    "DEFAULT_ORBIT_TOL", "DEFAULT_MAX_PERIODS", "DEFAULT_BAND",
]

DEFAULT_ORBIT_TOL = 1e-9
DEFAULT_MAX_PERIODS = 500
DEFAULT_BAND = 1e-3
AGREEMENT_FACTOR = 10.0   # two-seed limits of the same orbit
GAP_FACTOR = 100.0        # endemic upper/lower gap certifying uniqueness
_MAX_HALVINGS = 60
# relative bump turning the tol-accurate host profile into a strict
# discrete supersolution, so the recorded upper sequence decreases
# monotonically at roundoff slack
_SUPERSOLUTION_BUMP = 1e-6


@dataclass(frozen=True)
class LogisticOrbitResult:
    """Carrying orbit of the vector total plus its growth diagnostics.

    orbit is the upper-seed limit; agreement_gap is the sup distance to
    the lower-seed limit (a uniqueness witness)."""

    orbit: PeriodicOrbit
    zeta_result: EigenResult
    converged_in: int
    fixed_point_residual: float
    agreement_gap: float

    @property
    def zeta(self) -> float:
        return self.zeta_result.value


@dataclass(frozen=True)
class EndemicPairResult:
    """Upper/lower limits of the truncated infection system.

    H_orbit and Vi_orbit are the upper limit (the endemic orbit when
    eps_used == 0, an upper envelope otherwise); gap is the final sup
    distance between the two limits; the histories hold the period
    boundary snapshots (tuples of component arrays) of each sequence.
    """

    H_orbit: PeriodicOrbit
    Vi_orbit: PeriodicOrbit
    V: PeriodicOrbit
    eps_used: float
    upper_residual: float
    lower_residual: float
    gap: float
    converged_in: int
    zeta_result: EigenResult
    lambda_V_result: EigenResult
    lambda_V_eps_result: EigenResult
    upper_history: tuple
    lower_history: tuple


# ─────────────────────────────────────────────────────────────── helpers ──


def _field_extrema(grid: Grid, nodes: np.ndarray, fn) -> tuple:
    lo, hi = np.inf, -np.inf
    for j in range(grid.steps_per_period):
        v = np.asarray(fn(nodes, j * grid.dt), dtype=float)
        lo = min(lo, float(np.min(v)))
        hi = max(hi, float(np.max(v)))
    return lo, hi


def _layout_spec(orbit: PeriodicOrbit, grid: Grid, group: int) -> BoundarySpec:
    """Recover the node-layout flavor of a stored orbit from its width."""
    n = orbit.samples[0].shape[1]
    if n == grid.nx + 2:
        return BoundarySpec.neumann(group)
    if n == grid.nx:
        return BoundarySpec.dirichlet(group)
    raise InputError(f"orbit width {n} fits no layout of this grid (nx={grid.nx})")


def _iterate_to_fixed_point(model, prepared, state: StateField, tol: float,
                            max_periods: int, label: str,
                            history: list | None = None):
    """Period-map iteration until two successive boundaries agree within tol."""
    u = state
    if history is not None:
        history.append(tuple(comp.copy() for comp in u.components))
    for n in range(1, max_periods + 1):
        nxt = integrate_over_period(model, u, prepared=prepared)
        delta = max(float(np.max(np.abs(a - b)))
                    for a, b in zip(nxt.components, u.components))
        u = nxt
        if history is not None:
            history.append(tuple(comp.copy() for comp in u.components))
        if delta <= tol:
            return u, n
    raise NoConvergence(
        f"{label} iteration still moving after {max_periods} periods "
        f"(last change {delta:.3g}, tol {tol:g})", max_periods)


def _store_orbit(model, prepared, state: StateField) -> PeriodicOrbit:
    """One stored sweep from a converged boundary state."""
    g = model.grid
    levels = integrate_over_period(model, state, prepared=prepared, store=True)
    ncomp = len(state.components)
    samples = tuple(np.stack([lev.components[i] for lev in levels])
                    for i in range(ncomp))
    residual = max(float(np.max(np.abs(s[-1] - s[0]))) for s in samples)
    return PeriodicOrbit(samples, g.dt, g.T, residual)


# ─────────────────────────────────────────────── the vector total orbit ──


def solve_logistic_orbit(c: CoefficientSet, bc2: BoundarySpec, grid: Grid,
                         tol: float = DEFAULT_ORBIT_TOL,
                         max_periods: int = DEFAULT_MAX_PERIODS,
                         band: float = DEFAULT_BAND,
                         eigen_tol: float = DEFAULT_EIGEN_TOL,
                         max_eigen_iters: int = DEFAULT_MAX_ITERS) -> LogisticOrbitResult:
    """Periodic orbit of the vector total (logistic with seasonal rates).

    When zeta >= -band the zero orbit is returned (inside the band the
    positive orbit, if any, is below the solver's resolution).  Otherwise
    the upper seed is the constant K = 1 + max(beta-mu1)/min(mu2) and the
    lower seed a small multiple of the growth eigenfunction, halved until
    its first period map is nondecreasing.  Both are iterated to fixed
    points which must agree within 10*tol.

    Raises:
        NoConvergence: an iteration exhausted max_periods (or no growing
            lower seed was found).
        NonUniqueOrbit: the two limits disagree beyond 10*tol.
    """
    rz = zeta(c, bc2, grid, eigen_tol, max_eigen_iters)
    g = grid
    n2 = g.n_unknowns(bc2)
    if rz.value >= -band:
        return LogisticOrbitResult(
            orbit=PeriodicOrbit.zeros([n2], g.steps_per_period, g.dt, g.T),
            zeta_result=rz, converged_in=0, fixed_point_residual=0.0,
            agreement_gap=0.0)

    model = NonlinearModel(kind="logistic", c=c, bc1=BoundarySpec.neumann(1),
                           bc2=bc2, grid=g)
    P = prepare(model)
    xfull = g.full_nodes()
    growth = lambda x, t: field_values(c.beta, x, t) - field_values(c.mu1, x, t)
    _, bmax = _field_extrema(g, xfull, growth)
    mu2_lo, mu2_hi = _field_extrema(g, xfull, lambda x, t: field_values(c.mu2, x, t))
    K = 1.0 + max(bmax, 0.0) / max(mu2_lo, 1e-8)

    up0 = StateField((np.full(n2, K),), 0.0, 0)
    up, n_up = _iterate_to_fixed_point(model, P, up0, tol, max_periods,
                                       "vector orbit (upper seed)")

    phi0 = rz.eigenfunction.level(0, 0).copy()
    dl = 0.5 * abs(rz.value) / max(mu2_hi, 1e-8)
    low = None
    for _ in range(_MAX_HALVINGS):
        seed = dl * phi0
        nxt = integrate_over_period(model, StateField((seed,), 0.0, 0), prepared=P)
        if float(np.min(nxt.components[0] - seed)) >= -1e-12 * max(1.0, K):
            low = nxt
            break
        dl *= 0.5
    if low is None:
        raise NoConvergence(
            "no growing lower seed found for the vector orbit", _MAX_HALVINGS)
    low, n_low = _iterate_to_fixed_point(model, P, low, tol, max_periods,
                                         "vector orbit (lower seed)")

    agreement = float(np.max(np.abs(up.components[0] - low.components[0])))
    if agreement > AGREEMENT_FACTOR * tol:
        raise NonUniqueOrbit(
            f"upper and lower vector-orbit limits differ by {agreement:.3g} "
            f"(allowed {AGREEMENT_FACTOR * tol:g}); the orbit is not certified unique")

    orbit = _store_orbit(model, P, up)
    return LogisticOrbitResult(orbit=orbit, zeta_result=rz,
                               converged_in=max(n_up, n_low + 1),
                               fixed_point_residual=orbit.residual,
                               agreement_gap=agreement)


# ───────────────────────────────────────────────────── the host profile ──


def solve_Hbar(c: CoefficientSet, bc1: BoundarySpec, grid: Grid,
               V: PeriodicOrbit, eps: float = 0.0,
               phi: PeriodicOrbit | None = None,
               tol: float = DEFAULT_ORBIT_TOL,
               max_periods: int = DEFAULT_MAX_PERIODS) -> PeriodicOrbit:
    """Periodic host profile: the unique orbit with removal rho and source
    sigma1 * H_u * (V + eps*phi).

    The host decay rate is evaluated first as a contraction guard
    (InternalError from gamma_rho if it fails to be positive); the affine
    period map is then iterated from zero.
    """
    gamma_rho(c, bc1, grid)
    if V.ncomp != 1 or V.m != grid.steps_per_period:
        raise InputError("V must be a scalar orbit on this grid's lattice")
    if eps != 0.0:
        if phi is None:
            raise InputError("a band shift eps != 0 needs phi")
        drive = PeriodicOrbit.combine(V, phi, lambda v, p: v + eps * p)
    else:
        drive = V
    src_bc = _layout_spec(drive, grid, 2)
    dt = grid.dt

    def src(x, t):
        k = round(t / dt)
        lev = drive.level(0, k)
        return (field_values(c.sigma1, x, t) * field_values(c.H_u, x, t)
                * map_between(lev, src_bc, bc1))

    sys = LinearPeriodicSystem(
        grid=grid,
        comps=(ComponentSpec(d=c.d1, bc=bc1),),
        coupling=((lambda x, t: -field_values(c.rho, x, t),),),
        source=(src,))
    P = prepare(sys)
    u0 = StateField((np.zeros(grid.n_unknowns(bc1)),), 0.0, 0)
    u, _ = _iterate_to_fixed_point(sys, P, u0, tol, max_periods, "host profile")
    return _store_orbit(sys, P, u)


# ─────────────────────────────────────────────────── the endemic pair ──


def _band_inequality_holds(c: CoefficientSet, grid: Grid, bc2: BoundarySpec,
                           V: PeriodicOrbit, phi: PeriodicOrbit,
                           eps: float, zeta_value: float) -> bool:
    """Pointwise quadratic admissibility of the band shift:
    (eps*phi)^2 * mu2 - eps*phi*|beta + zeta| < beta*V on the lattice."""
    x2 = grid.nodes_for(bc2)
    for j in range(grid.steps_per_period):
        t = j * grid.dt
        ephi = eps * phi.level(0, j)
        beta = field_values(c.beta, x2, t)
        mu2 = field_values(c.mu2, x2, t)
        lhs = ephi ** 2 * mu2 - ephi * np.abs(beta + zeta_value)
        if not np.all(lhs < beta * V.level(0, j)):
            return False
    return True


def solve_endemic_pair(c: CoefficientSet, bcs, grid: Grid,
                       V: PeriodicOrbit | None = None,
                       eps: float | None = 0.0,
                       tol: float = DEFAULT_ORBIT_TOL,
                       max_periods: int = DEFAULT_MAX_PERIODS,
                       band: float = DEFAULT_BAND,
                       eigen_tol: float = DEFAULT_EIGEN_TOL,
                       max_eigen_iters: int = DEFAULT_MAX_ITERS,
                       logistic: LogisticOrbitResult | None = None,
                       lam: EigenResult | None = None) -> EndemicPairResult:
    """Two-sided construction of the endemic state of the truncated system.

    With eps == 0 the upper and lower limits bracket the endemic orbit
    itself; with eps > 0 they bracket the band-shifted envelope used by
    the sandwich argument.  eps is the initial rung of the halving ladder;
    eps = None starts at 0.1 * min(V) / max(phi).  V (and optionally the
    full logistic result or the invasion eigenvalue) may be passed to
    reuse earlier work; whatever is missing is computed here.

    Raises:
        RegimeError: zeta or the invasion exponent does not place the
            problem in the endemic regime, or no admissible band width
            exists.
        NoConvergence: a monotone sequence exhausted max_periods or no
            growing lower seed was found.
        GapError: the limits stay further apart than 100*tol.
    """
    bc1, bc2 = bcs
    if eps is not None and eps < 0.0:
        raise InputError("eps must be nonnegative (the band is applied as +/-)")
    if logistic is not None:
        rz, V = logistic.zeta_result, logistic.orbit
    elif V is not None:
        rz = zeta(c, bc2, grid, eigen_tol, max_eigen_iters)
    else:
        lr = solve_logistic_orbit(c, bc2, grid, tol, max_periods, band,
                                  eigen_tol, max_eigen_iters)
        rz, V = lr.zeta_result, lr.orbit
    if rz.value >= band:
        raise RegimeError(
            f"the vector population dies out (zeta = {rz.value:.6g} >= {band:g}); "
            "endemic orbit absent")
    if rz.value > -band:
        raise RegimeError(
            f"growth threshold {rz.value:.6g} lies inside the decision band "
            f"(+/-{band:g}); endemic state unresolved at this resolution",
            indeterminate=True)
    lamV = lam if lam is not None else lambda_V(c, (bc1, bc2), grid, V,
                                                eigen_tol, max_eigen_iters)
    if lamV.value >= band:
        raise RegimeError(
            f"the disease-free state resists invasion (lambda(V) = "
            f"{lamV.value:.6g} >= {band:g}); endemic orbit absent")
    if lamV.value >= -band:
        raise RegimeError(
            f"invasion exponent {lamV.value:.6g} lies inside the decision band "
            f"(+/-{band:g}); endemic state unresolved at this resolution",
            indeterminate=True)

    phi = rz.eigenfunction
    if eps is None:
        eps = 0.1 * float(np.min(V.samples[0][:-1])) / phi.sup_norm()
    slack = 10.0 * tol

    chosen = None
    e = eps
    for _ in range(_MAX_HALVINGS + 1):
        if e == 0.0:
            le = lamV
        else:
            if float(np.min(V.samples[0] - e * phi.samples[0])) <= 0.0:
                e *= 0.5
                continue
            if not _band_inequality_holds(c, grid, bc2, V, phi, e, rz.value):
                e *= 0.5
                continue
            le = lambda_V_eps(c, (bc1, bc2), grid, V, phi, e,
                              eigen_tol, max_eigen_iters)
            if le.value >= -band:
                e *= 0.5
                continue

        Hbar = solve_Hbar(c, bc1, grid, V, e, phi if e != 0.0 else None,
                          tol, max_periods)
        model = NonlinearModel(kind="truncated", c=c, bc1=bc1, bc2=bc2,
                               grid=grid, V=V, phi=phi if e != 0.0 else None,
                               eps=e)
        P = prepare(model)

        z_seed = (V.level(0, 0) + e * phi.level(0, 0) if e != 0.0
                  else V.level(0, 0).copy())
        up_seed = StateField(
            (Hbar.level(0, 0) * (1.0 + _SUPERSOLUTION_BUMP), z_seed), 0.0, 0)
        up1 = integrate_over_period(model, up_seed, prepared=P)
        up_ok = all(float(np.max(a - b)) <= slack * max(1.0, float(np.max(np.abs(b))))
                    for a, b in zip(up1.components, up_seed.components))
        if not up_ok:
            if e == 0.0:
                raise InternalError(
                    "upper seed failed to decrease with no band to shrink")
            e *= 0.5
            continue

        phi_pair = le.eigenfunction
        ratios = []
        for comp, seed_comp in zip(range(2), up_seed.components):
            pv = phi_pair.level(comp, 0)
            mask = pv > 1e-300
            ratios.append(float(np.min(0.5 * seed_comp[mask] / pv[mask])))
        dl = 2.0 ** np.floor(np.log2(min(ratios)))
        low1 = None
        for _ in range(_MAX_HALVINGS):
            seed = StateField((dl * phi_pair.level(0, 0), dl * phi_pair.level(1, 0)),
                              0.0, 0)
            nxt = integrate_over_period(model, seed, prepared=P)
            grow_ok = all(
                float(np.min(a - b)) >= -slack * max(1.0, float(np.max(np.abs(b))))
                for a, b in zip(nxt.components, seed.components))
            if grow_ok:
                low1 = nxt
                break
            dl *= 0.5
        if low1 is None:
            if e == 0.0:
                raise NoConvergence(
                    "no growing lower seed found for the endemic pair", _MAX_HALVINGS)
            e *= 0.5
            continue

        chosen = (e, le, model, P, up1, low1, up_seed)
        break
    if chosen is None:
        raise RegimeError(
            f"no admissible band width found below eps = {eps:g}; "
            "endemic construction abandoned")

    e, le, model, P, up1, low1, up_seed = chosen
    upper_history: list = [tuple(comp.copy() for comp in up_seed.components)]
    lower_history: list = []
    up, n_up = _iterate_to_fixed_point(model, P, up1, tol, max_periods,
                                       "endemic pair (upper)", upper_history)
    low, n_low = _iterate_to_fixed_point(model, P, low1, tol, max_periods,
                                         "endemic pair (lower)", lower_history)

    gap = max(float(np.max(np.abs(a - b)))
              for a, b in zip(up.components, low.components))
    if gap > GAP_FACTOR * tol:
        raise GapError(
            f"endemic upper/lower limits remain {gap:.3g} apart "
            f"(allowed {GAP_FACTOR * tol:g}); orbit not certified")

    upper_orbit = _store_orbit(model, P, up)
    lower_orbit = _store_orbit(model, P, low)
    H_orbit = upper_orbit.component(0)
    Vi_orbit = upper_orbit.component(1)

    envelope = V.samples[0] + e * phi.samples[0]
    overshoot = float(np.max(Vi_orbit.samples[0] - envelope))
    if overshoot > slack * max(1.0, float(np.max(envelope))):
        raise InternalError(
            f"infected-vector orbit exceeds the band envelope by {overshoot:.3g}")

    return EndemicPairResult(
        H_orbit=H_orbit, Vi_orbit=Vi_orbit, V=V, eps_used=e,
        upper_residual=upper_orbit.residual, lower_residual=lower_orbit.residual,
        gap=gap, converged_in=max(n_up + 1, n_low + 1),
        zeta_result=rz, lambda_V_result=lamV, lambda_V_eps_result=le,
        upper_history=tuple(upper_history), lower_history=tuple(lower_history))
