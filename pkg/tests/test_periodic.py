"""Periodic orbits: the vector carrying orbit, the forced host profile,
and the endemic pair built by two-sided monotone iteration.

Constant-coefficient oracles:
  - logistic orbit V = (beta - mu1)/mu2;
  - forced profile Hbar = sigma1*H_u*(V + eps*phi)/rho;
  - endemic pair (H, V_i) = (3 + 6*eps, 0.6 + 1.2*eps) for the baseline
    family (solve the 2x2 algebraic system at the shifted vector level).
"""

import math

import numpy as np
import pytest

from vectorhost import (BoundarySpec, NonUniqueOrbit, PeriodicOrbit,
                        RegimeError, build_grid, solve_Hbar,
                        solve_endemic_pair, solve_logistic_orbit)
from conftest import make_constants

NEUMANN1 = BoundarySpec.neumann(1)
NEUMANN2 = BoundarySpec.neumann(2)
BCS = (NEUMANN1, NEUMANN2)


def flat_orbit(value, grid, bc):
    n = grid.n_unknowns(bc)
    return PeriodicOrbit(
        (np.full((grid.steps_per_period + 1, n), float(value)),),
        grid.dt, grid.T)


@pytest.fixture(scope="module")
def grid():
    return build_grid(0.0, 1.0, 31, 1.0, 128)


# ───────────────────────────────────────────────────── logistic orbit ──


def test_constants_orbit_hits_carrying_capacity(grid):
    lr = solve_logistic_orbit(make_constants(), NEUMANN2, grid)
    assert np.max(np.abs(lr.orbit.samples[0] - 1.0)) < 1e-6
    assert lr.zeta == pytest.approx(-1.0, abs=1e-4)
    assert lr.agreement_gap <= 1e-8
    assert lr.fixed_point_residual <= 1e-9
    assert lr.converged_in > 0


def test_supercritical_mortality_gives_zero_orbit(grid):
    lr = solve_logistic_orbit(make_constants(beta="1", mu1="2"), NEUMANN2, grid)
    assert lr.orbit.sup_norm() == 0.0
    assert lr.zeta == pytest.approx(1.0, abs=1e-4)


def test_seasonal_orbit_is_positive_and_periodic(grid):
    c = make_constants(beta="2 + sin(2*pi*t)")
    lr = solve_logistic_orbit(c, NEUMANN2, grid)
    V = lr.orbit.samples[0]
    assert lr.orbit.min_value() > 0.5
    assert np.max(np.abs(V[-1] - V[0])) <= 1e-9   # stored sweep is periodic
    assert np.max(V) > 1.05                        # forcing actually moves it


def test_dirichlet_orbit_matches_steady_state_oracle():
    # beta - mu1 = 2, mu2 = 1 on (0, pi): the orbit is the positive steady
    # state of V'' + 2V - V^2 = 0 with pinned ends
    g = build_grid(0.0, math.pi, 63, 1.0, 256)
    c = make_constants(beta="3", mu1="1")
    lr = solve_logistic_orbit(c, BoundarySpec.dirichlet(2), g)
    assert lr.zeta == pytest.approx(-1.0, abs=1e-3)
    mid = lr.orbit.samples[0][0][31]   # x = pi/2
    # frozen from this solver at nx=63, m=256; cross-checked below
    assert mid == pytest.approx(1.162743612285823, abs=1e-6)

    from scipy.integrate import solve_bvp
    xs = np.linspace(0.0, math.pi, 201)
    # start near the positive branch or Newton drops to the zero solution
    guess = np.vstack([1.2 * np.sin(xs), 1.2 * np.cos(xs)])
    sol = solve_bvp(lambda x, y: np.vstack([y[1], y[0] ** 2 - 2.0 * y[0]]),
                    lambda ya, yb: np.array([ya[0], yb[0]]),
                    xs, guess, tol=1e-8, max_nodes=20000)
    assert sol.status == 0
    # h^2 stencil bias at nx=63 keeps the two routes ~2e-4 apart
    assert abs(mid - sol.sol(math.pi / 2)[0]) < 5e-4


def test_two_seed_disagreement_near_criticality(grid):
    # zeta = -0.1 contracts so slowly that both limits stop ~9 tol away
    # from the fixed point; the certificate must refuse
    with pytest.raises(NonUniqueOrbit):
        solve_logistic_orbit(make_constants(beta="2", mu1="1.9"), NEUMANN2, grid)


# ─────────────────────────────────────────────────────── host profile ──


def test_hbar_constants(grid):
    V = flat_orbit(1.0, grid, NEUMANN2)
    hbar = solve_Hbar(make_constants(), NEUMANN1, grid, V)
    assert np.max(np.abs(hbar.samples[0] - 5.0)) < 1e-8


def test_hbar_with_band_shift(grid):
    V = flat_orbit(1.0, grid, NEUMANN2)
    phi = flat_orbit(1.0, grid, NEUMANN2)
    hbar = solve_Hbar(make_constants(), NEUMANN1, grid, V, eps=0.05, phi=phi)
    assert np.max(np.abs(hbar.samples[0] - 5.25)) < 1e-8


def test_hbar_zero_drive_is_zero(grid):
    V = flat_orbit(0.0, grid, NEUMANN2)
    hbar = solve_Hbar(make_constants(), NEUMANN1, grid, V)
    assert hbar.sup_norm() == 0.0


def test_hbar_space_varying_source(grid):
    # -H'' + H = 1 + 0.5 cos(pi x) with no flux: the cosine is an exact
    # discrete eigenvector, so H = 1 + 0.5 cos(pi x)/(1 + pi^2) up to h^2
    c = make_constants(H_u="1 + 0.5*cos(pi*x)")
    V = flat_orbit(1.0, grid, NEUMANN2)
    hbar = solve_Hbar(c, NEUMANN1, grid, V)
    xs = grid.full_nodes()
    expected = 1.0 + 0.5 * np.cos(np.pi * xs) / (1.0 + math.pi ** 2)
    assert np.max(np.abs(hbar.samples[0][0] - expected)) < 1e-4


# ─────────────────────────────────────────────────────── endemic pair ──


def test_endemic_pair_constants(grid):
    pair = solve_endemic_pair(make_constants(), BCS, grid)
    assert np.max(np.abs(pair.H_orbit.samples[0] - 3.0)) < 1e-6
    assert np.max(np.abs(pair.Vi_orbit.samples[0] - 0.6)) < 1e-6
    assert pair.eps_used == 0.0
    assert pair.gap <= 1e-7
    assert pair.upper_residual <= 1e-8
    assert pair.lower_residual <= 1e-8
    # strictly below the carrying orbit
    assert float(np.max(pair.Vi_orbit.samples[0] - pair.V.samples[0])) < 0.0


def test_endemic_pair_with_band(grid):
    pair = solve_endemic_pair(make_constants(), BCS, grid, eps=0.05)
    assert pair.eps_used == pytest.approx(0.05)
    assert np.max(np.abs(pair.H_orbit.samples[0] - 3.3)) < 1e-6
    assert np.max(np.abs(pair.Vi_orbit.samples[0] - 0.66)) < 1e-6


def test_endemic_pair_auto_band(grid):
    # default ladder start is a tenth of the orbit floor
    pair = solve_endemic_pair(make_constants(), BCS, grid, eps=None)
    assert pair.eps_used == pytest.approx(0.1, abs=1e-6)
    assert np.max(np.abs(pair.H_orbit.samples[0] - 3.6)) < 1e-6
    assert np.max(np.abs(pair.Vi_orbit.samples[0] - 0.72)) < 1e-6


def test_endemic_histories_are_monotone_and_ordered(grid):
    # history entries are (H, V_i) component tuples at period boundaries
    pair = solve_endemic_pair(make_constants(), BCS, grid, eps=0.05)
    ups, los = pair.upper_history, pair.lower_history
    assert len(ups) >= 2 and len(los) >= 2
    slack = 1e-12
    for a, b in zip(ups, ups[1:]):   # upper comes down
        for ca, cb in zip(a, b):
            assert float(np.max(cb - ca)) <= slack
    for a, b in zip(los, los[1:]):   # lower climbs
        for ca, cb in zip(a, b):
            assert float(np.min(cb - ca)) >= -slack
    for lo in los:                   # every lower sits under the last upper
        for cl, cu in zip(lo, ups[-1]):
            assert float(np.max(cl - cu)) <= slack


def test_pair_refused_outside_endemic_regime(grid):
    with pytest.raises(RegimeError) as err:
        solve_endemic_pair(make_constants(H_u="1"), BCS, grid)
    assert not err.value.indeterminate  # decisively disease-free
    with pytest.raises(RegimeError) as err2:
        solve_endemic_pair(make_constants(beta="1", mu1="2"), BCS, grid)
    assert not err2.value.indeterminate  # vector dies out, decisively
    with pytest.raises(RegimeError) as err3:
        solve_endemic_pair(make_constants(H_u="2"), BCS, grid)
    assert err3.value.indeterminate     # lambda(V) lands inside the band


def test_pair_reuses_precomputed_logistic(grid):
    lr = solve_logistic_orbit(make_constants(), NEUMANN2, grid)
    pair = solve_endemic_pair(make_constants(), BCS, grid, logistic=lr)
    assert pair.V is lr.orbit
    assert np.max(np.abs(pair.H_orbit.samples[0] - 3.0)) < 1e-6


def test_seasonal_endemic_pair(grid):
    c = make_constants(beta="2 + sin(2*pi*t)")
    pair = solve_endemic_pair(c, BCS, grid)
    assert pair.gap <= 1e-7
    assert pair.H_orbit.min_value() > 0.0
    assert pair.Vi_orbit.min_value() > 0.0
    assert float(np.max(pair.Vi_orbit.samples[0] - pair.V.samples[0])) < 0.0
