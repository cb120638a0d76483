"""Uniform 1D mesh and flux-form assembly of the diffusion operator.

The interval (x_left, x_right) carries nx interior nodes with spacing
h = (x_right - x_left)/(nx + 1).  Unknown layouts depend on the boundary
flavor: Dirichlet rows eliminate the (zero) endpoint values and the
operator acts on the nx interior nodes; Robin rows keep both endpoints
(nx + 2 unknowns) and close the stencil by second-order ghost-point
elimination consistent with  d_nu u + b u = 0.

The operator is div(d grad u) in flux form with face-averaged diffusion
d(x_{i +/- 1/2}, t), which keeps the assembled tridiagonal matrix
essentially nonnegative off the diagonal whenever d > 0 (the sign
structure all comparison arguments rest on).  At a Robin endpoint the
outside face value is mirrored from the inside face (even extension).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffs import field_values
from .errors import CoefficientError, DomainError

__all__ = ["Grid", "BoundarySpec", "DiffusionMatrix", "build_grid", "assemble_diffusion"]


@dataclass(frozen=True)
class Grid:
    """Mesh metadata: geometry, period, and solver step counts."""

    x_left: float
    x_right: float
    nx: int
    T: float
    steps_per_period: int

    @property
    def h(self) -> float:
        return (self.x_right - self.x_left) / (self.nx + 1)

    @property
    def dt(self) -> float:
        return self.T / self.steps_per_period

    def interior_nodes(self) -> np.ndarray:
        return self.x_left + self.h * np.arange(1, self.nx + 1)

    def full_nodes(self) -> np.ndarray:
        return self.x_left + self.h * np.arange(self.nx + 2)

    def faces(self) -> np.ndarray:
        """The nx+1 cell-face coordinates x_left + (k + 1/2) h."""
        return self.x_left + self.h * (np.arange(self.nx + 1) + 0.5)

    def nodes_for(self, bc: "BoundarySpec") -> np.ndarray:
        return self.full_nodes() if bc.flavor == "robin" else self.interior_nodes()

    def n_unknowns(self, bc: "BoundarySpec") -> int:
        return self.nx + 2 if bc.flavor == "robin" else self.nx


def build_grid(x_left: float, x_right: float, nx: int, T: float,
               steps_per_period: int) -> Grid:
    """Validate mesh parameters and return a Grid.

    Raises:
        DomainError: if x_left >= x_right, nx < 3, T <= 0, or
            steps_per_period < 8.
    """
    if not x_left < x_right:
        raise DomainError(f"need x_left < x_right, got ({x_left}, {x_right})")
    if nx < 3:
        raise DomainError(f"need nx >= 3, got {nx}")
    if not T > 0:
        raise DomainError(f"need T > 0, got {T}")
    if steps_per_period < 8:
        raise DomainError(f"need steps_per_period >= 8, got {steps_per_period}")
    return Grid(float(x_left), float(x_right), int(nx), float(T), int(steps_per_period))


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary operator for one equation group.

    group 1 is the host operator, group 2 the vector operator.  flavor
    "dirichlet" pins the endpoints to zero; "robin" imposes
    d_nu u + b u = 0 with nonnegative, T-periodic endpoint weights
    (b == 0 is the no-flux case).
    """

    group: int
    flavor: str  # "dirichlet" | "robin"
    b_left: object | None = None   # Expression | float | None
    b_right: object | None = None

    def __post_init__(self):
        if self.group not in (1, 2):
            raise DomainError(f"boundary group must be 1 or 2, got {self.group}")
        if self.flavor not in ("dirichlet", "robin"):
            raise DomainError(f"unknown boundary flavor {self.flavor!r}")

    @classmethod
    def dirichlet(cls, group: int) -> "BoundarySpec":
        return cls(group=group, flavor="dirichlet")

    @classmethod
    def robin(cls, group: int, b_left=0.0, b_right=0.0) -> "BoundarySpec":
        return cls(group=group, flavor="robin", b_left=b_left, b_right=b_right)

    @classmethod
    def neumann(cls, group: int) -> "BoundarySpec":
        return cls.robin(group, 0.0, 0.0)

    def b_at(self, grid: Grid, t: float) -> tuple[float, float]:
        """Endpoint weights (left, right) at time t."""
        bl = float(field_values(self.b_left, np.asarray(grid.x_left), t))
        br = float(field_values(self.b_right, np.asarray(grid.x_right), t))
        return bl, br


@dataclass(frozen=True)
class DiffusionMatrix:
    """Tridiagonal discretisation of div(d grad .) at a fixed time.

    Dimension nx (Dirichlet) or nx+2 (Robin); `lower`/`upper` hold the
    off-diagonals (length n-1).
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    t: float
    h: float

    @property
    def n(self) -> int:
        return self.diag.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.upper * v[1:]
        out[1:] += self.lower * v[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        return (np.diag(self.diag) + np.diag(self.upper, 1)
                + np.diag(self.lower, -1))


def assemble_diffusion(grid: Grid, d, bc: BoundarySpec, t: float) -> DiffusionMatrix:
    """Assemble div(d grad .) on the layout induced by `bc` at time t.

    Args:
        grid: the mesh.
        d: diffusion field (Expression, float, or callable of (x, t)).
        bc: boundary flavor; Robin weights are evaluated at time t.
        t: assembly time.

    Raises:
        CoefficientError: if d is not strictly positive at every face.
    """
    faces = grid.faces()
    if callable(d) and not hasattr(d, "eval"):
        dface = np.asarray(d(faces, t), dtype=float)
    else:
        dface = field_values(d, faces, t)
    if np.min(dface) <= 0.0:
        k = int(np.argmin(dface))
        raise CoefficientError(
            f"diffusion must be positive; got {dface[k]:.6g} at x={faces[k]:.6g}, t={t:.6g}")

    h2 = grid.h * grid.h
    if bc.flavor == "dirichlet":
        n = grid.nx
        # interior nodes only; eliminated boundary values are zero
        diag = -(dface[:-1] + dface[1:]) / h2
        lower = dface[1:-1] / h2
        upper = dface[1:-1] / h2
        return DiffusionMatrix(lower.copy(), diag, upper.copy(), float(t), grid.h)

    # Robin: endpoints are unknowns; ghost elimination with mirrored faces
    n = grid.nx + 2
    diag = np.empty(n)
    lower = np.empty(n - 1)
    upper = np.empty(n - 1)
    diag[1:-1] = -(dface[:-1] + dface[1:]) / h2
    lower[:-1] = dface[:-1] / h2   # rows 1..nx, column to the left
    upper[1:] = dface[1:] / h2     # rows 1..nx, column to the right
    bl, br = bc.b_at(grid, t)
    diag[0] = -2.0 * dface[0] / h2 - 2.0 * bl * dface[0] / grid.h
    upper[0] = 2.0 * dface[0] / h2
    diag[-1] = -2.0 * dface[-1] / h2 - 2.0 * br * dface[-1] / grid.h
    lower[-1] = 2.0 * dface[-1] / h2
    return DiffusionMatrix(lower, diag, upper, float(t), grid.h)


def map_between(values: np.ndarray, src: BoundarySpec, dst: BoundarySpec) -> np.ndarray:
    """Re-express a nodal vector from one layout on another.

    Dirichlet components carry zero endpoint values, so restriction drops
    them and prolongation pads them back; both directions are exact.
    """
    if src.flavor == dst.flavor:
        return values
    if src.flavor == "robin":       # full -> interior
        return values[1:-1]
    out = np.zeros(values.shape[0] + 2, dtype=values.dtype)
    out[1:-1] = values
    return out
