"""Time stepping: first-order IMEX schemes for the model and its variants.

One step advances every component by one backward-Euler solve of its own
tridiagonal implicit matrix (diffusion assembled at t+dt plus the linear
decay diagonal), with cross-component coupling and nonlinear terms taken
explicitly at time t.  Coefficients are always evaluated at times wrapped
into [0, T), so the period map is literally the same map every period and
long runs cannot drift off the coefficient lattice.

Structural properties the rest of the package leans on:

* the implicit matrices are M-matrices and explicit couplings enter with
  nonnegative weights, so nonnegative states stay nonnegative and ordered
  states stay ordered (discrete comparison principle);
* the infection exchange term is computed once and reused in both vector
  equations, and the uninfected vector component is updated as
  (total solve) - (infected solve) sharing one matrix, so the discrete
  total V_u + V_i satisfies the discrete logistic equation exactly;
* constant-coefficient equilibria are exact fixed points of the discrete
  period map at any dt (the implicit/explicit split balances
  algebraically), which the periodic-orbit and classification layers
  exploit.

Model selectors: "full" (host + two vector components), "logistic" (the
scalar total-vector equation), "truncated" (the two-component reduced
system with signed band-shift eps; eps < 0 gives the auxiliary
comparison variant).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded
from scipy.linalg import LinAlgError

from .coeffs import CoefficientSet, Expression, field_values
from .errors import BlowupError, DomainError, InputError, SolveError
from .grid import BoundarySpec, DiffusionMatrix, Grid, assemble_diffusion, map_between

__all__ = [
    "StateField", "ComponentSpec", "LinearPeriodicSystem", "NonlinearModel",
    "Trajectory", "step", "integrate_over_period", "integrate_trajectory",
]

DEFAULT_BLOWUP_CAP = 1e12


def as_field_fn(f) -> Callable[[np.ndarray, float], np.ndarray]:
    """Normalise Expression | float | callable(x, t) to a callable."""
    if isinstance(f, Expression) or np.isscalar(f):
        return lambda x, t: field_values(f, x, t)
    if callable(f):
        return f
    raise InputError(f"not a usable field: {f!r}")


@dataclass
class StateField:
    """Nodal values of every component at one time level.

    t is global time, step the global step index (t = step * dt).
    """

    components: tuple
    t: float = 0.0
    step: int = 0

    @property
    def m(self) -> int:
        return len(self.components)

    def copy(self) -> "StateField":
        return StateField(tuple(c.copy() for c in self.components), self.t, self.step)

    def sup_norm(self) -> float:
        return max(float(np.max(np.abs(c))) if c.size else 0.0 for c in self.components)


@dataclass(frozen=True)
class ComponentSpec:
    """Diffusion field and boundary flavor of one scalar component."""

    d: object           # Expression | float | callable
    bc: BoundarySpec


@dataclass
class LinearPeriodicSystem:
    """A cooperative linear system  u_t = div(d_i grad u_i) + sum_j h_ij u_j + f_i.

    coupling[i][j] is the coefficient field multiplying component j in
    equation i (None for zero); off-diagonal entries must be nonnegative.
    source, if present, is one field per component.
    """

    grid: Grid
    comps: tuple
    coupling: tuple
    source: tuple | None = None

    def __post_init__(self):
        n = len(self.comps)
        if len(self.coupling) != n or any(len(row) != n for row in self.coupling):
            raise InputError(f"coupling must be {n}x{n}")
        if self.source is not None and len(self.source) != n:
            raise InputError("source length must match component count")


@dataclass
class NonlinearModel:
    """Selector plus data for the nonlinear systems.

    kind "full": components (H_i, V_u, V_i).
    kind "logistic": single component V (the vector total).
    kind "truncated": components (H_i, V_i) of the reduced system, with the
        periodic orbit V, the growth-threshold eigenfunction phi, and the
        signed band shift eps; coupling uses (V + eps*phi - V_i)_+ and the
        decay uses mu1 + mu2*(V - eps*phi).
    """

    kind: str
    c: CoefficientSet
    bc1: BoundarySpec
    bc2: BoundarySpec
    grid: Grid
    V: object | None = None      # PeriodicOrbit
    phi: object | None = None    # PeriodicOrbit (scalar)
    eps: float = 0.0
    cap: float = DEFAULT_BLOWUP_CAP

    def __post_init__(self):
        if self.kind not in ("full", "logistic", "truncated"):
            raise InputError(f"unknown model kind {self.kind!r}")
        if self.kind == "truncated":
            if self.V is None:
                raise InputError("truncated model needs the periodic orbit V")
            if self.eps != 0.0 and self.phi is None:
                raise InputError("truncated model with eps != 0 needs phi")

    def layouts(self) -> tuple:
        if self.kind == "full":
            return (self.bc1, self.bc2, self.bc2)
        if self.kind == "logistic":
            return (self.bc2,)
        return (self.bc1, self.bc2)


@dataclass
class Trajectory:
    """Sampled states of a run; always contains every period boundary."""

    grid: Grid
    states: list
    sample_stride: int

    def boundary_state(self, n: int) -> StateField:
        k = n * self.grid.steps_per_period
        for s in self.states:
            if s.step == k:
                return s
        raise KeyError(f"period boundary {n} not stored")

    def period_states(self, n: int) -> list:
        m = self.grid.steps_per_period
        return [s for s in self.states if n * m <= s.step <= (n + 1) * m]

    @property
    def n_periods(self) -> int:
        return self.states[-1].step // self.grid.steps_per_period


# ═══════════════════════════════════════════════════════════════════════════
# prepared coefficient lattices
# ═══════════════════════════════════════════════════════════════════════════


def _banded_from(D: DiffusionMatrix, decay: np.ndarray, dt: float) -> np.ndarray:
    """Banded (1,1) form of I - dt*D + dt*diag(decay) for solve_banded."""
    n = D.n
    ab = np.zeros((3, n))
    ab[0, 1:] = -dt * D.upper
    ab[1, :] = 1.0 - dt * D.diag + dt * decay
    ab[2, :-1] = -dt * D.lower
    return ab


def _solve(ab: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return solve_banded((1, 1), ab, rhs, check_finite=False)
    except (LinAlgError, ValueError) as exc:  # defensive: singular implicit matrix
        raise SolveError(f"implicit solve failed: {exc}") from exc


class _PreparedLinear:
    """Per-level assembled diffusion + coupling/source arrays for one system."""

    def __init__(self, sys: LinearPeriodicSystem):
        g = sys.grid
        m = g.steps_per_period
        dt = g.dt
        n = len(sys.comps)
        self.sys = sys
        self.nodes = [g.nodes_for(c.bc) for c in sys.comps]
        coup_fns = [[None if f is None else as_field_fn(f) for f in row]
                    for row in sys.coupling]
        src_fns = (None if sys.source is None
                   else [None if f is None else as_field_fn(f) for f in sys.source])

        self.ab = []        # [j][i] implicit banded matrix at level j
        self.offdiag = []   # [j][i][jcomp] explicit coupling arrays (None if absent)
        self.src = []       # [j][i] source arrays or None
        for j in range(m):
            t = j * dt
            ab_row, off_row, src_row = [], [], []
            for i, comp in enumerate(sys.comps):
                D = assemble_diffusion(g, comp.d, comp.bc, t)
                diag_fn = coup_fns[i][i]
                decay = (np.zeros(D.n) if diag_fn is None
                         else -np.asarray(diag_fn(self.nodes[i], t), dtype=float))
                ab_row.append(_banded_from(D, decay, dt))
                off_row.append([
                    None if (jc == i or coup_fns[i][jc] is None)
                    else np.asarray(coup_fns[i][jc](self.nodes[i], t), dtype=float)
                    for jc in range(n)])
                src_row.append(None if src_fns is None or src_fns[i] is None
                               else np.asarray(src_fns[i](self.nodes[i], t), dtype=float))
            self.ab.append(ab_row)
            self.offdiag.append(off_row)
            self.src.append(src_row)

    def step(self, u: StateField) -> StateField:
        sys = self.sys
        g = sys.grid
        m = g.steps_per_period
        dt = g.dt
        j0 = u.step % m
        j1 = (u.step + 1) % m
        n = len(sys.comps)
        new = []
        for i in range(n):
            rhs = u.components[i].copy()
            for jc in range(n):
                w = self.offdiag[j0][i][jc]
                if w is not None:
                    rhs += dt * w * map_between(u.components[jc],
                                                sys.comps[jc].bc, sys.comps[i].bc)
            if self.src[j0][i] is not None:
                rhs += dt * self.src[j0][i]
            new.append(_solve(self.ab[j1][i], rhs))
        return StateField(tuple(new), u.t + dt, u.step + 1)


class _PreparedModel:
    """Per-level coefficient arrays for the nonlinear selectors."""

    def __init__(self, model: NonlinearModel):
        g = model.grid
        m = g.steps_per_period
        c = model.c
        self.model = model
        self.x1 = g.nodes_for(model.bc1)
        self.x2 = g.nodes_for(model.bc2)
        need1 = model.kind in ("full", "truncated")

        self.D1 = [assemble_diffusion(g, c.d1, model.bc1, j * g.dt) for j in range(m)] \
            if need1 else None
        self.D2 = [assemble_diffusion(g, c.d2, model.bc2, j * g.dt) for j in range(m)]

        def lattice(expr, x):
            return [field_values(expr, x, j * g.dt) for j in range(m)]

        self.rho = lattice(c.rho, self.x1) if need1 else None
        self.s1hu = [field_values(c.sigma1, self.x1, j * g.dt)
                     * field_values(c.H_u, self.x1, j * g.dt)
                     for j in range(m)] if need1 else None
        self.sigma2 = lattice(c.sigma2, self.x2)
        self.beta = lattice(c.beta, self.x2)
        self.mu1 = lattice(c.mu1, self.x2)
        self.mu2 = lattice(c.mu2, self.x2)

        if model.kind == "truncated":
            self.Vlev = [model.V.level(0, j) for j in range(m)]
            if model.eps != 0.0:
                self.philev = [model.phi.level(0, j) for j in range(m)]
            else:
                self.philev = None

    def _check_cap(self, arrays) -> None:
        cap = self.model.cap
        for a in arrays:
            if np.max(np.abs(a)) > cap:
                raise BlowupError(f"state exceeded blow-up cap {cap:g}")

    def step(self, u: StateField) -> StateField:
        model = self.model
        g = model.grid
        m = g.steps_per_period
        dt = g.dt
        j0 = u.step % m
        j1 = (u.step + 1) % m

        if model.kind == "logistic":
            (V,) = u.components
            ab = _banded_from(self.D2[j1], self.mu1[j1] + self.mu2[j1] * V, dt)
            Vn = _solve(ab, V + dt * self.beta[j0] * V)
            out = (Vn,)

        elif model.kind == "full":
            Hi, Vu, Vi = u.components
            Vsum = Vu + Vi
            trans = self.sigma2[j0] * Vu * map_between(Hi, model.bc1, model.bc2)
            ab_v = _banded_from(self.D2[j1], self.mu1[j1] + self.mu2[j1] * Vsum, dt)
            Vsum_n = _solve(ab_v, Vsum + dt * self.beta[j0] * Vsum)
            Vi_n = _solve(ab_v, Vi + dt * trans)
            Vu_n = Vsum_n - Vi_n
            ab_h = _banded_from(self.D1[j1], self.rho[j1], dt)
            Hi_n = _solve(ab_h, Hi + dt * self.s1hu[j0] * map_between(Vi, model.bc2, model.bc1))
            out = (Hi_n, Vu_n, Vi_n)

        else:  # truncated
            Hi, Z = u.components
            eps = model.eps
            V0 = self.Vlev[j0]
            V1 = self.Vlev[j1]
            if eps != 0.0:
                band0 = V0 + eps * self.philev[j0]
                shift1 = V1 - eps * self.philev[j1]
            else:
                band0 = V0
                shift1 = V1
            pos = np.maximum(band0 - Z, 0.0)
            trans = self.sigma2[j0] * pos * map_between(Hi, model.bc1, model.bc2)
            ab_z = _banded_from(self.D2[j1], self.mu1[j1] + self.mu2[j1] * shift1, dt)
            Z_n = _solve(ab_z, Z + dt * trans)
            ab_h = _banded_from(self.D1[j1], self.rho[j1], dt)
            Hi_n = _solve(ab_h, Hi + dt * self.s1hu[j0] * map_between(Z, model.bc2, model.bc1))
            out = (Hi_n, Z_n)

        self._check_cap(out)
        return StateField(out, u.t + dt, u.step + 1)


def prepare(system) -> object:
    """Precompute the per-level coefficient lattice for repeated stepping."""
    if isinstance(system, LinearPeriodicSystem):
        return _PreparedLinear(system)
    if isinstance(system, NonlinearModel):
        return _PreparedModel(system)
    raise InputError(f"cannot step {type(system).__name__}")


# ═══════════════════════════════════════════════════════════════════════════
# public stepping API
# ═══════════════════════════════════════════════════════════════════════════


def _check_state(system, u: StateField) -> None:
    g = system.grid
    if abs(u.t - u.step * g.dt) > 1e-9 * max(1.0, g.T):
        raise InputError(f"state time {u.t} not aligned with step {u.step}")
    layouts = (system.layouts() if isinstance(system, NonlinearModel)
               else tuple(c.bc for c in system.comps))
    if u.m != len(layouts):
        raise InputError(f"state has {u.m} components, system expects {len(layouts)}")
    for i, bc in enumerate(layouts):
        want = g.n_unknowns(bc)
        if u.components[i].shape != (want,):
            raise InputError(
                f"component {i} has shape {u.components[i].shape}, expected ({want},)")


def step(system, u: StateField, dt: float) -> StateField:
    """Advance one IMEX step.  dt must equal grid.dt (the step lattice)."""
    if abs(dt - system.grid.dt) > 1e-12 * max(1.0, system.grid.dt):
        raise InputError(f"dt {dt} must equal grid.dt {system.grid.dt}")
    _check_state(system, u)
    return prepare(system).step(u)


def integrate_over_period(system, u0: StateField, prepared=None,
                          store: bool = False):
    """Apply the period map once: steps_per_period IMEX steps from u0.

    With store=True returns the full list of m+1 levels (including u0),
    otherwise just the final state.
    """
    _check_state(system, u0)
    P = prepared if prepared is not None else prepare(system)
    u = u0
    levels = [u0] if store else None
    for _ in range(system.grid.steps_per_period):
        u = P.step(u)
        if store:
            levels.append(u)
    return levels if store else u


def integrate_trajectory(model, u0: StateField, n_periods: int,
                         sample_stride: int = 1) -> Trajectory:
    """Integrate n_periods periods, sampling every sample_stride steps.

    sample_stride must divide steps_per_period so that every period
    boundary is stored.  Raises BlowupError if any component passes the
    model's cap.
    """
    g = model.grid
    m = g.steps_per_period
    if sample_stride < 1 or m % sample_stride != 0:
        raise DomainError(
            f"sample_stride must divide steps_per_period ({sample_stride} vs {m})")
    _check_state(model, u0)
    P = prepare(model)
    u = u0
    states = [u0.copy()]
    for _ in range(n_periods * m):
        u = P.step(u)
        if u.step % sample_stride == 0:
            states.append(u)
    return Trajectory(grid=g, states=states, sample_stride=sample_stride)
