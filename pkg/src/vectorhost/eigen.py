"""Principal periodic eigenvalues via power iteration on the period map.

For a cooperative linear T-periodic system u_t = div(d grad u) + H(x,t) u
the principal eigenvalue lam is read off the spectral radius r of the
period (Poincare) map: lam = -ln(r)/T, and the space-time eigenfunction is
reconstructed as phi(x,t) = exp(lam*t) u(x,t) from the converged iterate.

The period map used here is a Crank-Nicolson propagator on the stacked
multi-component generator (coupling inside the implicit solve).  Being a
rational function of the frozen generator it reproduces autonomous
eigenvalues to O(dt^2 |lam|^3 / 12) instead of the O(dt) bias a first-order
split map would carry, which the oracle tolerances require; the evolution
stepper (stepper.py) intentionally stays first-order IMEX for its
positivity and ordering guarantees.  Eigenpairs returned here satisfy
apply_period_map(system, phi0) ~ r * phi0 for the map of this module.

Named eigenvalues: zeta (vector growth threshold), gamma_rho (host decay
rate), lambda_V (invasion exponent of the disease-free orbit), and
lambda_V_eps (its band-shifted perturbation).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .coeffs import CoefficientSet, field_values
from .errors import (EpsilonTooLarge, InputError, InternalError, NoConvergence,
                     ReducibleSystemWarning)
from .grid import BoundarySpec, Grid, assemble_diffusion
from .stepper import ComponentSpec, LinearPeriodicSystem, as_field_fn

__all__ = [
    "PeriodicOrbit", "EigenResult", "principal_eigenvalue", "apply_period_map",
    "zeta", "gamma_rho", "lambda_V", "lambda_V_eps",
    "DEFAULT_EIGEN_TOL", "DEFAULT_MAX_ITERS",
]

DEFAULT_EIGEN_TOL = 1e-10
DEFAULT_MAX_ITERS = 10000
# coupling entries below this are treated as cooperativity violations
_COOP_SLACK = -1e-12


# ═══════════════════════════════════════════════════════════════════════════
# periodic orbits (tabulated space-time fields)
# ═══════════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class PeriodicOrbit:
    """One period of a (possibly multi-component) field, sampled at every
    solver level: samples[c] has shape (m+1, n_c) with row k at t = k*dt.

    Level access wraps periodically (level m is stored only as a residual
    witness; arithmetic uses k mod m)."""

    samples: tuple
    dt: float
    T: float
    residual: float = 0.0

    @property
    def ncomp(self) -> int:
        return len(self.samples)

    @property
    def m(self) -> int:
        return self.samples[0].shape[0] - 1

    def level(self, comp: int, k: int) -> np.ndarray:
        return self.samples[comp][k % self.m]

    def initial(self) -> tuple:
        return tuple(s[0].copy() for s in self.samples)

    def sup_norm(self) -> float:
        return max(float(np.max(np.abs(s))) if s.size else 0.0 for s in self.samples)

    def min_value(self) -> float:
        return min(float(np.min(s[:-1])) for s in self.samples)

    def field(self, comp: int = 0):
        """A coefficient-field view (x, t) -> nodal values at the level t/dt.

        Only valid on the solver's time lattice; the spatial argument must
        already be this component's node set.
        """
        def fn(x, t):
            k = round(t / self.dt)
            if abs(t - k * self.dt) > 1e-6 * self.dt:
                raise InputError(f"time {t} is off the orbit lattice (dt={self.dt})")
            v = self.level(comp, k)
            if np.shape(x) != v.shape:
                raise InputError("node layout mismatch when sampling orbit")
            return v
        return fn

    def map_values(self, fn) -> "PeriodicOrbit":
        """New orbit with fn applied to each component's sample array."""
        return PeriodicOrbit(tuple(np.asarray(fn(s), dtype=float) for s in self.samples),
                             self.dt, self.T, self.residual)

    @staticmethod
    def combine(a: "PeriodicOrbit", b: "PeriodicOrbit", fn) -> "PeriodicOrbit":
        if a.samples[0].shape[0] != b.samples[0].shape[0] or a.dt != b.dt:
            raise InputError("orbit lattices do not match")
        return PeriodicOrbit(
            tuple(np.asarray(fn(x, y), dtype=float)
                  for x, y in zip(a.samples, b.samples)),
            a.dt, a.T, max(a.residual, b.residual))

    @staticmethod
    def zeros(sizes, m: int, dt: float, T: float) -> "PeriodicOrbit":
        return PeriodicOrbit(tuple(np.zeros((m + 1, n)) for n in sizes), dt, T, 0.0)

    def component(self, comp: int) -> "PeriodicOrbit":
        return PeriodicOrbit((self.samples[comp],), self.dt, self.T, self.residual)


@dataclass(frozen=True)
class EigenResult:
    """Principal eigenpair of a period map.

    value = -ln(multiplier)/T; eigenfunction is sup-normalised over the
    whole period (max sample = 1) and periodic up to `residual` in sup norm.
    r_history records the multiplier estimates per power iteration.
    """

    value: float
    multiplier: float
    eigenfunction: PeriodicOrbit
    residual: float
    iterations: int
    r_history: tuple = ()


# ═══════════════════════════════════════════════════════════════════════════
# the stacked Crank-Nicolson period map
# ═══════════════════════════════════════════════════════════════════════════


def _layout_map(n_rows: int, n_cols: int, row_bc: BoundarySpec, col_bc: BoundarySpec,
                weights: np.ndarray):
    """(rows, cols, data) of diag(weights) composed with the node-layout map."""
    if row_bc.flavor == col_bc.flavor:
        idx = np.arange(n_rows)
        return idx, idx, weights
    if row_bc.flavor == "dirichlet":      # rows interior, cols full
        idx = np.arange(n_rows)
        return idx, idx + 1, weights
    # rows full, cols interior: boundary rows receive nothing
    idx = np.arange(1, n_rows - 1)
    return idx, idx - 1, weights[1:-1]


class _PreparedEigen:
    """Cached CN factors of the stacked generator at every wrapped level."""

    def __init__(self, sys: LinearPeriodicSystem):
        if sys.source is not None:
            raise InputError("eigen solves take homogeneous systems (no source)")
        g = sys.grid
        self.grid = g
        m = g.steps_per_period
        dt = g.dt
        ncomp = len(sys.comps)
        self.sizes = [g.n_unknowns(c.bc) for c in sys.comps]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.total = int(self.offsets[-1])
        nodes = [g.nodes_for(c.bc) for c in sys.comps]
        coup = [[None if f is None else as_field_fn(f) for f in row]
                for row in sys.coupling]

        eye = sp.identity(self.total, format="csc")
        self.mplus = []
        self.lu = []
        for j in range(m):
            t = j * dt
            rows, cols, data = [], [], []
            for i, comp in enumerate(sys.comps):
                o = self.offsets[i]
                D = assemble_diffusion(g, comp.d, comp.bc, t)
                n = D.n
                idx = np.arange(n)
                rows += [o + idx, o + idx[1:], o + idx[:-1]]
                cols += [o + idx, o + idx[:-1], o + idx[1:]]
                data += [D.diag, D.lower, D.upper]
                for jc in range(ncomp):
                    fn = coup[i][jc]
                    if fn is None:
                        continue
                    w = np.asarray(fn(nodes[i], t), dtype=float)
                    if jc != i and np.min(w) < _COOP_SLACK:
                        raise InputError(
                            f"system not cooperative: coupling[{i}][{jc}] reaches "
                            f"{np.min(w):.3g} at t={t:.6g}")
                    r, c_, d_ = _layout_map(self.sizes[i], self.sizes[jc],
                                            comp.bc, sys.comps[jc].bc, w)
                    rows.append(o + r)
                    cols.append(self.offsets[jc] + c_)
                    data.append(d_)
            A = sp.coo_matrix(
                (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.total, self.total)).tocsc()
            self.mplus.append((eye + (dt / 2.0) * A).tocsr())
            self.lu.append(splu((eye - (dt / 2.0) * A).tocsc()))

    def period_map(self, u: np.ndarray, store: bool = False):
        m = self.grid.steps_per_period
        levels = [u.copy()] if store else None
        for k in range(m):
            u = self.lu[(k + 1) % m].solve(self.mplus[k] @ u)
            if store:
                levels.append(u.copy())
        return levels if store else u

    def split(self, u: np.ndarray) -> tuple:
        return tuple(u[self.offsets[i]:self.offsets[i + 1]]
                     for i in range(len(self.sizes)))


def apply_period_map(system: LinearPeriodicSystem, components) -> tuple:
    """Apply the eigen module's period map once to per-component vectors.

    This is the map whose eigenpairs principal_eigenvalue returns; tests
    use it to measure the eigen-relation residual directly.
    """
    P = _PreparedEigen(system)
    u = np.concatenate([np.asarray(c, dtype=float) for c in components])
    return P.split(P.period_map(u))


def _orbit_from_levels(P: _PreparedEigen, levels: list, dt: float, T: float,
                       residual: float) -> PeriodicOrbit:
    comps = []
    for i in range(len(P.sizes)):
        comps.append(np.stack([P.split(u)[i] for u in levels]))
    return PeriodicOrbit(tuple(comps), dt, T, residual)


def principal_eigenvalue(system: LinearPeriodicSystem,
                         tol: float = DEFAULT_EIGEN_TOL,
                         max_iters: int = DEFAULT_MAX_ITERS) -> EigenResult:
    """Dominant eigenpair of the period map of a cooperative linear system.

    Power iteration from a positive constant vector; the multiplier is the
    ratio at the normalisation (sup) node, converged when successive
    estimates differ by <= tol and the normalised iterate direction moves
    by <= tol in sup norm.

    Raises:
        NoConvergence: budget exhausted before both criteria held.
        InputError: non-cooperative coupling or a sourced system.
    Warns:
        ReducibleSystemWarning: the converged eigenfunction has interior
            zeros (Perron structure degenerate).
    """
    P = _PreparedEigen(system)
    g = system.grid
    u = np.ones(P.total)
    r_prev = None
    r_history = []
    converged = False
    iterations = 0
    r = np.nan
    for iterations in range(1, max_iters + 1):
        w = P.period_map(u)
        jmax = int(np.argmax(u))
        r = float(w[jmax] / u[jmax])
        r_history.append(r)
        denom = float(np.max(np.abs(w)))
        if denom == 0.0 or not np.isfinite(denom):
            raise NoConvergence("period map annihilated the iterate", iterations)
        s = w / denom
        if s[int(np.argmax(np.abs(s)))] < 0:
            s = -s
        if r_prev is not None and abs(r - r_prev) <= tol and \
                float(np.max(np.abs(s - u))) <= tol:
            u = s
            converged = True
            break
        u = s
        r_prev = r
    if not converged:
        raise NoConvergence(
            f"power iteration did not converge in {max_iters} iterations "
            f"(last multiplier {r!r})", iterations)
    if r <= 0:
        raise InternalError(f"nonpositive multiplier {r} on a cooperative system")

    value = -np.log(r) / g.T
    # reconstruct phi(x,t) = exp(value*t) u(x,t) over one final sweep
    levels = P.period_map(u, store=True)
    ts = np.arange(g.steps_per_period + 1) * g.dt
    phi_levels = [np.exp(value * t) * lev for t, lev in zip(ts, levels)]
    supval = max(float(np.max(np.abs(p))) for p in phi_levels)
    phi_levels = [p / supval for p in phi_levels]
    residual = float(np.max(np.abs(phi_levels[-1] - phi_levels[0])))
    orbit = _orbit_from_levels(P, phi_levels, g.dt, g.T, residual)

    interior_min = np.inf
    for i, comp in enumerate(system.comps):
        vals = orbit.samples[i]
        if comp.bc.flavor == "robin":
            vals = vals[:, 1:-1]
        interior_min = min(interior_min, float(np.min(vals)))
    # iterates stall near the tolerance floor, so zeros show up at O(tol)
    if interior_min <= max(1e-12, 100.0 * tol):
        warnings.warn(
            f"principal eigenfunction has interior zeros (min {interior_min:.3g}); "
            "the cooperative system is reducible", ReducibleSystemWarning)

    return EigenResult(value=float(value), multiplier=r, eigenfunction=orbit,
                       residual=residual, iterations=iterations,
                       r_history=tuple(r_history))


# ═══════════════════════════════════════════════════════════════════════════
# named eigenvalues of the model
# ═══════════════════════════════════════════════════════════════════════════


def _expr_diff(a, b):
    """Field a - b as a callable."""
    return lambda x, t: field_values(a, x, t) - field_values(b, x, t)


def zeta(c: CoefficientSet, bc2: BoundarySpec, grid: Grid,
         tol: float = DEFAULT_EIGEN_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> EigenResult:
    """Vector growth threshold: principal eigenvalue of the scalar problem
    with net growth beta - mu1 under the vector boundary operator."""
    sys = LinearPeriodicSystem(
        grid=grid,
        comps=(ComponentSpec(d=c.d2, bc=bc2),),
        coupling=((_expr_diff(c.beta, c.mu1),),))
    return principal_eigenvalue(sys, tol, max_iters)


def gamma_rho(c: CoefficientSet, bc1: BoundarySpec, grid: Grid,
              tol: float = DEFAULT_EIGEN_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> EigenResult:
    """Host decay rate: principal eigenvalue of the host operator with
    removal rho.  Positive whenever rho > 0; InternalError otherwise."""
    sys = LinearPeriodicSystem(
        grid=grid,
        comps=(ComponentSpec(d=c.d1, bc=bc1),),
        coupling=((lambda x, t: -field_values(c.rho, x, t),),))
    res = principal_eigenvalue(sys, tol, max_iters)
    if res.value <= 0:
        raise InternalError(
            f"host decay rate should be positive, got {res.value:.6g}; "
            "check that rho satisfies the standing hypothesis")
    return res


def _check_orbit_for_linearisation(V: PeriodicOrbit, grid: Grid) -> None:
    if V.ncomp != 1:
        raise InputError("expected a scalar periodic orbit")
    if V.m != grid.steps_per_period:
        raise InputError(
            f"orbit has {V.m} levels per period, grid has {grid.steps_per_period}")
    if V.sup_norm() == 0.0:
        raise InputError("the identically-zero orbit has no invasion eigenvalue")
    if V.min_value() < 0.0:
        raise InputError(f"orbit has negative entries (min {V.min_value():.3g})")


def _invasion_system(c: CoefficientSet, bcs, grid: Grid, coupling_field,
                     decay_field) -> LinearPeriodicSystem:
    bc1, bc2 = bcs
    s1hu = lambda x, t: field_values(c.sigma1, x, t) * field_values(c.H_u, x, t)
    f21 = lambda x, t: field_values(c.sigma2, x, t) * coupling_field(x, t)
    f22 = lambda x, t: -(field_values(c.mu1, x, t)
                         + field_values(c.mu2, x, t) * decay_field(x, t))
    return LinearPeriodicSystem(
        grid=grid,
        comps=(ComponentSpec(d=c.d1, bc=bc1), ComponentSpec(d=c.d2, bc=bc2)),
        coupling=((lambda x, t: -field_values(c.rho, x, t), s1hu),
                  (f21, f22)))


def lambda_V(c: CoefficientSet, bcs, grid: Grid, V: PeriodicOrbit,
             tol: float = DEFAULT_EIGEN_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> EigenResult:
    """Invasion exponent of the disease-free state carrying vector orbit V.

    Principal eigenvalue of the two-component linearisation (host removal
    rho with source sigma1*H_u; vector infection sigma2*V with decay
    mu1 + mu2*V).  Negative values mean the infection invades.
    """
    _check_orbit_for_linearisation(V, grid)
    sys = _invasion_system(c, bcs, grid, V.field(0), V.field(0))
    return principal_eigenvalue(sys, tol, max_iters)


def lambda_V_eps(c: CoefficientSet, bcs, grid: Grid, V: PeriodicOrbit,
                 phi: PeriodicOrbit, eps: float,
                 tol: float = DEFAULT_EIGEN_TOL,
                 max_iters: int = DEFAULT_MAX_ITERS) -> EigenResult:
    """Band-shifted invasion exponent: coupling sigma2*(V + eps*phi), decay
    mu1 + mu2*(V - eps*phi).

    Raises:
        EpsilonTooLarge: if V - |eps|*phi fails strict positivity anywhere
            on the stored lattice.
    """
    _check_orbit_for_linearisation(V, grid)
    if phi.ncomp != 1 or phi.m != V.m:
        raise InputError("phi must be a scalar orbit on the same lattice as V")
    margin = np.min(V.samples[0] - abs(eps) * phi.samples[0])
    if eps != 0.0 and margin <= 0.0:
        raise EpsilonTooLarge(
            f"V - |eps|*phi reaches {margin:.3g} (eps={eps:g}); "
            "the band leaves the positive cone")
    Vf, Pf = V.field(0), phi.field(0)
    up = lambda x, t: Vf(x, t) + eps * Pf(x, t)
    down = lambda x, t: Vf(x, t) - eps * Pf(x, t)
    sys = _invasion_system(c, bcs, grid, up, down)
    return principal_eigenvalue(sys, tol, max_iters)
