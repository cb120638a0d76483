"""Semi-implicit stepper: positivity, comparison, reduction, convergence.

The implicit side (diffusion and diagonal decay) produces an M-matrix, so
the step is order preserving and sign preserving by construction; these
tests pin that down along with the first-order accuracy in dt and the
exact agreement between the total vector of the full model and the
logistic scalar model.
"""

import numpy as np
import pytest

from vectorhost import (BlowupError, BoundarySpec, ComponentSpec, DomainError,
                        InputError, LinearPeriodicSystem, NonlinearModel,
                        StateField, build_grid, build_initial_state,
                        integrate_over_period, integrate_trajectory,
                        parse_expression, prepare)
from conftest import make_constants

NEUMANN = (BoundarySpec.neumann(1), BoundarySpec.neumann(2))


def random_cooperative_system(rng, grid, ncomp=2):
    """Cooperative linear system with random coefficients.

    Off-diagonal coupling is nonnegative; diagonals may have either sign;
    diffusion varies in space, coupling in space and time.
    """
    flavors = [BoundarySpec.dirichlet, BoundarySpec.neumann]
    comps = []
    for i in range(ncomp):
        a, b = rng.uniform(0.2, 2.0, size=2)
        d = parse_expression(f"{a:.6f} + {b:.6f}*x*x")
        comps.append(ComponentSpec(d=d, bc=flavors[rng.integers(2)](1 + (i % 2))))
    coupling = []
    for i in range(ncomp):
        row = []
        for j in range(ncomp):
            lo = -1.5 if i == j else 0.0  # off-diagonals must stay >= 0
            c0 = rng.uniform(lo, 1.5)
            c1 = rng.uniform(0.0, 0.5)
            row.append(parse_expression(
                f"{c0:.6f} + {c1:.6f}*(1 + sin(2*pi*t))*x" if c0 >= 0 else
                f"{c0:.6f} + {c1:.6f}*x"))
        coupling.append(tuple(row))
    return LinearPeriodicSystem(grid=grid, comps=tuple(comps),
                                coupling=tuple(coupling))


def check_comparison_principle(n_systems, seed, grid):
    """Shared with the acceptance gate: ordered states stay ordered."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_systems):
        sys_ = random_cooperative_system(rng, grid)
        los, his = [], []
        for comp in sys_.comps:
            n = grid.n_unknowns(comp.bc)
            lo = rng.uniform(0.0, 1.0, size=n)
            los.append(lo)
            his.append(lo + rng.uniform(0.0, 1.0, size=n))
        ulo = integrate_over_period(sys_, StateField(tuple(los), 0.0, 0))
        uhi = integrate_over_period(sys_, StateField(tuple(his), 0.0, 0))
        gap = min(float(np.min(b - a))
                  for a, b in zip(ulo.components, uhi.components))
        worst = min(worst, gap)
    return worst


@pytest.fixture(scope="module")
def grid():
    return build_grid(0.0, 1.0, 31, 1.0, 64)


def test_constant_equilibrium_is_exact(grid, endemic_c):
    # (3, 0.4, 0.6) solves the constant-coefficient system; the IMEX update
    # reproduces it to roundoff at any dt
    model = NonlinearModel(kind="full", c=endemic_c, bc1=NEUMANN[0],
                           bc2=NEUMANN[1], grid=grid)
    u0 = build_initial_state(grid, *NEUMANN, (3.0, 0.4, 0.6))
    u1 = integrate_over_period(model, u0)
    for a, b in zip(u1.components, u0.components):
        assert np.max(np.abs(a - b)) < 1e-13


def test_positivity_from_random_nonnegative_data(grid):
    c = make_constants(beta="2 + sin(2*pi*t)", H_u="5*(1 + 0.5*cos(pi*x))")
    model = NonlinearModel(kind="full", c=c, bc1=NEUMANN[0], bc2=NEUMANN[1],
                           grid=grid)
    rng = np.random.default_rng(42)
    for _ in range(5):
        u0 = StateField(tuple(rng.uniform(0.0, 3.0, size=33) for _ in range(3)),
                        0.0, 0)
        traj = integrate_trajectory(model, u0, 3, sample_stride=4)
        lowest = min(float(np.min(comp)) for s in traj.states
                     for comp in s.components)
        assert lowest >= -1e-12


def test_comparison_principle_on_random_cooperative_systems(grid):
    worst = check_comparison_principle(20, seed=1234, grid=grid)
    assert worst >= -1e-12


def test_total_vector_reduces_to_logistic_exactly(grid):
    c = make_constants(beta="2 + sin(2*pi*t)")
    full = NonlinearModel(kind="full", c=c, bc1=NEUMANN[0], bc2=NEUMANN[1],
                          grid=grid)
    logi = NonlinearModel(kind="logistic", c=c, bc1=NEUMANN[0],
                          bc2=NEUMANN[1], grid=grid)
    xs = grid.full_nodes()
    vu0 = 0.5 + 0.3 * np.cos(np.pi * xs)
    vi0 = 0.2 + 0.1 * np.sin(np.pi * xs) ** 2
    h0 = np.full(33, 1.0)
    t_full = integrate_trajectory(
        full, StateField((h0, vu0, vi0), 0.0, 0), 4, sample_stride=1)
    t_logi = integrate_trajectory(
        logi, StateField((vu0 + vi0,), 0.0, 0), 4, sample_stride=1)
    worst = max(float(np.max(np.abs(sf.components[1] + sf.components[2]
                                    - sl.components[0])))
                for sf, sl in zip(t_full.states, t_logi.states))
    assert worst <= 1e-12


def test_first_order_in_dt():
    # seasonal forcing so the time error is visible; halving dt should
    # roughly halve the error against a fine reference
    c = make_constants(beta="2 + sin(2*pi*t)")
    finals = {}
    for m in (64, 128, 1024):
        g = build_grid(0.0, 1.0, 15, 1.0, m)
        model = NonlinearModel(kind="full", c=c, bc1=NEUMANN[0],
                               bc2=NEUMANN[1], grid=g)
        u0 = build_initial_state(g, *NEUMANN, (1.0, 0.5, 0.1))
        u1 = integrate_over_period(model, u0)
        finals[m] = np.concatenate(u1.components)
    e64 = np.max(np.abs(finals[64] - finals[1024]))
    e128 = np.max(np.abs(finals[128] - finals[1024]))
    assert 1.6 <= e64 / e128 <= 2.4


def test_blowup_raises(grid):
    c = make_constants(beta="40")  # heads for carrying capacity 39
    model = NonlinearModel(kind="logistic", c=c, bc1=NEUMANN[0],
                           bc2=NEUMANN[1], grid=grid, cap=10.0)
    u0 = StateField((np.full(33, 1.0),), 0.0, 0)
    with pytest.raises(BlowupError):
        integrate_trajectory(model, u0, 5, sample_stride=8)


def test_affine_source_equilibrium(grid):
    # dH/dt = div(grad H) - H + 2 has the flat fixed point H = 2,
    # reproduced exactly by the implicit-decay/explicit-source split
    sys_ = LinearPeriodicSystem(
        grid=grid,
        comps=(ComponentSpec(d=1.0, bc=NEUMANN[0]),),
        coupling=((parse_expression("-1"),),),
        source=(parse_expression("2"),))
    u0 = StateField((np.full(33, 2.0),), 0.0, 0)
    u1 = integrate_over_period(sys_, u0)
    assert np.max(np.abs(u1.components[0] - 2.0)) < 1e-13


def test_store_returns_all_levels(grid, endemic_c):
    model = NonlinearModel(kind="logistic", c=endemic_c, bc1=NEUMANN[0],
                           bc2=NEUMANN[1], grid=grid)
    u0 = StateField((np.full(33, 1.0),), 0.0, 0)
    levels = integrate_over_period(model, u0, store=True)
    assert len(levels) == grid.steps_per_period + 1
    assert levels[0] is u0
    assert levels[-1].step == grid.steps_per_period


def test_trajectory_sampling_and_boundaries(grid, endemic_c):
    model = NonlinearModel(kind="full", c=endemic_c, bc1=NEUMANN[0],
                           bc2=NEUMANN[1], grid=grid)
    u0 = build_initial_state(grid, *NEUMANN, (1.0, 0.5, 0.1))
    traj = integrate_trajectory(model, u0, 3, sample_stride=16)
    assert traj.n_periods == 3
    assert len(traj.states) == 3 * 64 // 16 + 1
    b2 = traj.boundary_state(2)
    assert b2.step == 128
    assert b2.t == pytest.approx(2.0)
    assert len(traj.period_states(1)) == 64 // 16 + 1
    with pytest.raises(DomainError):
        integrate_trajectory(model, u0, 2, sample_stride=7)  # 7 does not divide 64


def test_state_shape_checks(grid, endemic_c):
    model = NonlinearModel(kind="full", c=endemic_c, bc1=NEUMANN[0],
                           bc2=NEUMANN[1], grid=grid)
    bad = StateField((np.ones(33), np.ones(10), np.ones(33)), 0.0, 0)
    with pytest.raises(InputError):
        integrate_over_period(model, bad)
    with pytest.raises(InputError):
        NonlinearModel(kind="sir", c=endemic_c, bc1=NEUMANN[0],
                       bc2=NEUMANN[1], grid=grid)
    with pytest.raises(InputError):
        NonlinearModel(kind="truncated", c=endemic_c, bc1=NEUMANN[0],
                       bc2=NEUMANN[1], grid=grid)  # missing V


def test_mixed_layouts_step_together(endemic_c):
    # host pinned at the ends, vectors no-flux: layouts differ per component
    g = build_grid(0.0, 1.0, 15, 1.0, 32)
    bc1 = BoundarySpec.dirichlet(1)
    bc2 = BoundarySpec.neumann(2)
    model = NonlinearModel(kind="full", c=endemic_c, bc1=bc1, bc2=bc2, grid=g)
    u0 = build_initial_state(g, bc1, bc2, (1.0, 0.5, 0.1))
    assert u0.components[0].shape == (15,)
    assert u0.components[1].shape == (17,)
    u1 = integrate_over_period(model, u0)
    assert all(float(np.min(comp)) >= 0.0 for comp in u1.components)
