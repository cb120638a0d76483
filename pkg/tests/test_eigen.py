"""Principal eigenvalues of the period map.

Closed forms used as oracles (constant coefficients, Neumann):
  - scalar coupling a gives lambda = -a, so zeta = mu1 - beta and
    gamma(rho) = rho;
  - Dirichlet on (0, pi) adds the principal diffusion eigenvalue 1;
  - the 2x2 invasion matrix [[-rho, s1*Hu], [s2*V, -(mu1 + mu2*V)]] has
    lambda(V) = -max eig, computable from trace and determinant.
"""

import math
import warnings

import numpy as np
import pytest

from vectorhost import (BoundarySpec, ComponentSpec, EpsilonTooLarge,
                        InputError, InternalError, LinearPeriodicSystem,
                        NoConvergence, PeriodicOrbit, ReducibleSystemWarning,
                        apply_period_map, build_grid, gamma_rho, lambda_V,
                        lambda_V_eps, parse_expression, principal_eigenvalue,
                        solve_logistic_orbit, zeta)
from conftest import make_constants

NEUMANN1 = BoundarySpec.neumann(1)
NEUMANN2 = BoundarySpec.neumann(2)


def flat_orbit(value, grid, bc):
    n = grid.n_unknowns(bc)
    samples = (np.full((grid.steps_per_period + 1, n), float(value)),)
    return PeriodicOrbit(samples, grid.dt, grid.T)


def two_by_two_lambda(rho, s1hu, s2V, mu1, mu2V):
    tr = -rho - (mu1 + mu2V)
    det = rho * (mu1 + mu2V) - s1hu * s2V
    return -(tr + math.sqrt(tr * tr - 4.0 * det)) / 2.0


@pytest.fixture(scope="module")
def grid():
    return build_grid(0.0, 1.0, 15, 1.0, 128)


def test_constant_zeta_and_gamma(grid):
    c = make_constants(beta="1", mu1="2")
    r = zeta(c, NEUMANN2, grid)
    assert r.value == pytest.approx(1.0, abs=1e-4)
    g = gamma_rho(make_constants(rho="0.5"), NEUMANN1, grid)
    assert g.value == pytest.approx(0.5, abs=1e-4)
    # the eigenfunction of a flat problem is flat and sup-normalised
    assert np.max(np.abs(r.eigenfunction.samples[0] - 1.0)) < 1e-9


def test_multiplier_matches_value(grid):
    r = zeta(make_constants(), NEUMANN2, grid)
    assert r.value == pytest.approx(-math.log(r.multiplier) / grid.T)
    assert r.value == pytest.approx(-1.0, abs=1e-4)


def test_seasonal_zeta_averages_the_coupling(grid):
    # mean(mu1 - beta) survives; the oscillating part only contributes
    # at second order in dt
    c = make_constants(beta="1 + sin(2*pi*t)", mu1="2")
    r = zeta(c, NEUMANN2, grid)
    assert r.value == pytest.approx(1.0, abs=1e-4)


def test_dirichlet_adds_principal_diffusion_eigenvalue():
    g = build_grid(0.0, math.pi, 31, 1.0, 64)
    c = make_constants(beta="0.5", mu1="1")
    r = zeta(c, BoundarySpec.dirichlet(2), g)
    # mu1 - beta + 1, up to the h^2 stencil bias
    assert r.value == pytest.approx(1.5, abs=2e-3)
    # interior eigenfunction is the discrete sine mode, positive inside
    phi0 = r.eigenfunction.level(0, 0)
    assert np.min(phi0) > 0
    assert np.argmax(phi0) == 15


def test_robin_absorption_raises_zeta(grid):
    c = make_constants()
    base = zeta(c, NEUMANN2, grid).value
    absorbing = zeta(c, BoundarySpec.robin(2, 1.0, 1.0), grid).value
    assert absorbing > base + 0.01


def test_zeta_decreases_in_beta(grid):
    rng = np.random.default_rng(7)
    for _ in range(5):
        b = rng.uniform(0.5, 3.0)
        mu = rng.uniform(0.5, 3.0)
        c_lo = make_constants(beta=f"{b:.6f}", mu1=f"{mu:.6f}")
        c_hi = make_constants(beta=f"{b + 0.5:.6f}", mu1=f"{mu:.6f}")
        assert zeta(c_hi, NEUMANN2, grid).value < zeta(c_lo, NEUMANN2, grid).value


def test_lambda_V_closed_forms(grid):
    V = flat_orbit(1.0, grid, NEUMANN2)
    lam = lambda_V(make_constants(), (NEUMANN1, NEUMANN2), grid, V)
    assert lam.value == pytest.approx((3.0 - math.sqrt(21.0)) / 2.0, abs=1e-4)
    lam_df = lambda_V(make_constants(H_u="1"), (NEUMANN1, NEUMANN2), grid, V)
    assert lam_df.value == pytest.approx((3.0 - math.sqrt(5.0)) / 2.0, abs=1e-4)
    # both eigenfunctions live strictly inside the positive cone
    for r in (lam, lam_df):
        assert r.eigenfunction.min_value() > 0


def test_lambda_V_eps_shifts_the_band(grid):
    c = make_constants()
    V = flat_orbit(1.0, grid, NEUMANN2)
    phi = flat_orbit(1.0, grid, NEUMANN2)
    le = lambda_V_eps(c, (NEUMANN1, NEUMANN2), grid, V, phi, 0.05)
    assert le.value == pytest.approx(
        two_by_two_lambda(1.0, 5.0, 1.05, 1.0, 0.95), abs=1e-4)
    # widening the band strengthens the coupling, so lambda drops
    l0 = lambda_V(c, (NEUMANN1, NEUMANN2), grid, V).value
    l1 = lambda_V_eps(c, (NEUMANN1, NEUMANN2), grid, V, phi, 0.02).value
    l2 = lambda_V_eps(c, (NEUMANN1, NEUMANN2), grid, V, phi, 0.05).value
    assert l2 < l1 < l0
    with pytest.raises(EpsilonTooLarge):
        lambda_V_eps(c, (NEUMANN1, NEUMANN2), grid, V, phi, 2.0)


def test_lambda_V_input_checks(grid):
    c = make_constants()
    zero = flat_orbit(0.0, grid, NEUMANN2)
    with pytest.raises(InputError):
        lambda_V(c, (NEUMANN1, NEUMANN2), grid, zero)
    other = build_grid(0.0, 1.0, 15, 1.0, 64)
    with pytest.raises(InputError):
        lambda_V(c, (NEUMANN1, NEUMANN2), grid, flat_orbit(1.0, other, NEUMANN2))


def test_gamma_rho_guards_against_nonpositive_value(grid):
    # hypothesis validation runs upstream; the solver still refuses to
    # hand back a nonpositive decay rate if fed a bad removal field
    with pytest.raises(InternalError):
        gamma_rho(make_constants(rho="-0.5"), NEUMANN1, grid)


def test_period_map_residual_directly(grid):
    # independent application of the period map to the returned phi(., 0)
    sys_ = LinearPeriodicSystem(
        grid=grid,
        comps=(ComponentSpec(d=1.0, bc=NEUMANN2),),
        coupling=((parse_expression("1 - 2*x + sin(2*pi*t)"),),))
    r = principal_eigenvalue(sys_, tol=1e-12, max_iters=5000)
    phi0 = r.eigenfunction.level(0, 0)
    (mapped,) = apply_period_map(sys_, (phi0,))
    assert np.max(np.abs(mapped - r.multiplier * phi0)) <= 1e-10
    assert r.residual <= 1e-10


def test_source_terms_are_rejected(grid):
    sys_ = LinearPeriodicSystem(
        grid=grid,
        comps=(ComponentSpec(d=1.0, bc=NEUMANN2),),
        coupling=((parse_expression("1"),),),
        source=(parse_expression("1"),))
    with pytest.raises(InputError):
        principal_eigenvalue(sys_)


def test_negative_offdiagonal_coupling_rejected(grid):
    sys_ = LinearPeriodicSystem(
        grid=grid,
        comps=(ComponentSpec(d=1.0, bc=NEUMANN1),
               ComponentSpec(d=1.0, bc=NEUMANN2)),
        coupling=((parse_expression("-1"), parse_expression("0 - x")),
                  (parse_expression("1"), parse_expression("-1"))))
    with pytest.raises(InputError):
        principal_eigenvalue(sys_)


def test_no_convergence_raises(grid):
    with pytest.raises(NoConvergence):
        zeta(make_constants(beta="2 + sin(2*pi*t)"), NEUMANN2, grid,
             max_iters=1)


def test_reducible_system_warns(grid):
    # H_u = 0 decouples the host equation; the dominant mode lives only in
    # the vector component, so the returned "eigenfunction" has a dead block
    c = make_constants(rho="2", H_u="0", mu1="1", mu2="0", beta="0.5")
    V = flat_orbit(1.0, grid, NEUMANN2)
    with pytest.warns(ReducibleSystemWarning):
        r = lambda_V(c, (NEUMANN1, NEUMANN2), grid, V)
    assert r.value == pytest.approx(1.0, abs=1e-4)


def test_full_coupling_does_not_warn(grid):
    V = flat_orbit(1.0, grid, NEUMANN2)
    with warnings.catch_warnings():
        warnings.simplefilter("error", ReducibleSystemWarning)
        lambda_V(make_constants(), (NEUMANN1, NEUMANN2), grid, V)


def test_zeta_sign_agrees_with_logistic_orbit(grid):
    # dual route: eigenvalue sign versus the nonlinear fixed point.  The
    # draw stays clear of the critical band, where the contraction rate
    # degenerates and the two-seed agreement check is allowed to fail.
    rng = np.random.default_rng(99)
    seen_zero, seen_positive = 0, 0
    for k in range(10):
        mu = rng.uniform(0.5, 2.5)
        gap = rng.uniform(0.3, 1.5)
        b = mu - gap if (k % 2 == 0 and mu - gap > 0.1) else mu + gap
        c = make_constants(beta=f"{b:.6f}", mu1=f"{mu:.6f}")
        lr = solve_logistic_orbit(c, NEUMANN2, grid)
        if lr.zeta > 0:
            assert lr.orbit.sup_norm() == 0.0
            seen_zero += 1
        else:
            assert lr.orbit.min_value() > 0.0
            seen_positive += 1
    assert seen_zero and seen_positive  # the draw covers both regimes


def test_periodic_orbit_field_lattice_checks(grid):
    V = flat_orbit(2.0, grid, NEUMANN2)
    f = V.field(0)
    xs = grid.full_nodes()
    assert np.all(f(xs, 0.0) == 2.0)
    assert np.all(f(xs, grid.T + grid.dt) == 2.0)  # wraps periodically
    with pytest.raises(InputError):
        f(xs, 0.4999 * grid.dt)  # off the time lattice
    with pytest.raises(InputError):
        f(xs[:-1], 0.0)


def test_periodic_orbit_combine_and_component(grid):
    a = flat_orbit(2.0, grid, NEUMANN2)
    b = flat_orbit(0.5, grid, NEUMANN2)
    s = PeriodicOrbit.combine(a, b, lambda u, v: u + 3.0 * v)
    assert s.sup_norm() == pytest.approx(3.5)
    doubled = a.map_values(lambda u: 2.0 * u)
    assert doubled.sup_norm() == 4.0
    z = PeriodicOrbit.zeros([15, 17], grid.steps_per_period, grid.dt, grid.T)
    assert z.ncomp == 2
    assert z.component(1).samples[0].shape == (grid.steps_per_period + 1, 17)
