import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from maxstab.errors import DegenerateDelta, GridMismatch, WeightOverflow, X0InsideDomain
from maxstab.fields import Grid3
from maxstab.phantoms import CoefficientPair, Constant, GaussianBump
from maxstab.reconstruction import (
    RL_CONSTANT,
    CarlemanParams,
    Modulus,
    box_mask,
    carleman,
    cylindrical_integral,
    fg_fields,
    fit_slope,
    h1_difference,
    modulus_of_continuity,
    modulus_slope,
    parameter_schedule,
    rl_bound,
)
from maxstab.reduction import SampledCoefficients

from helpers import smooth_bump

BUMPY = CoefficientPair(GaussianBump(1.0, 0.2, (0.1, 0, 0), 0.3), GaussianBump(1.0, 0.3, (0, 0.1, 0), 0.3), 1.2)


def _sampled(pair, n=12, centering="cell"):
    return SampledCoefficients.from_pair(pair, Grid3.cube(n, 1.0, centering))


# reduced potentials


def test_identical_pairs_have_zero_potentials():
    c = _sampled(BUMPY)
    red = fg_fields(c, c)
    assert not np.any(red.f) and not np.any(red.g)
    assert red.fourier((1.0, 0.5, 0.3)) == (0, 0)


def test_constant_pairs_give_constant_potentials():
    omega = 1.2
    c1 = _sampled(CoefficientPair(Constant(1.5), Constant(2.0), omega))
    c2 = _sampled(CoefficientPair(Constant(1.0), Constant(1.2), omega))
    red = fg_fields(c1, c2)
    expect = omega**2 * (1.0 * 1.2 - 1.5 * 2.0)
    assert np.allclose(red.f, expect) and np.allclose(red.g, expect)


def test_potentials_vanish_outside_mask():
    c1, c2 = _sampled(BUMPY), _sampled(CoefficientPair(Constant(1.0), Constant(1.0), 1.2))
    mask = box_mask(c1.grid, (-0.5, -0.5, -0.5), (0.5, 0.5, 0.0))
    red = fg_fields(c1, c2, mask)
    assert not np.any(red.f[~mask]) and np.any(red.f[mask])
    with pytest.raises(GridMismatch):
        fg_fields(c1, _sampled(BUMPY, 8))


# moduli of continuity and the Riemann-Lebesgue bound


def test_lipschitz_field_has_unit_modulus_slope():
    g = Grid3.cube(24, 1.5)
    q = smooth_bump(g.mesh(), width=0.4)
    assert abs(modulus_slope(q, g, [0.02, 0.04, 0.08]) - 1.0) < 0.15


def test_modulus_is_zero_for_constants():
    g = Grid3.cube(8)
    assert modulus_of_continuity(lambda x: np.ones(np.shape(x)[1:]), g, 0.1) == 0


@pytest.mark.parametrize("d", [0.05, 0.1, 0.2])
def test_rl_bound_with_zero_phase(d):
    g = Grid3.cube(16, 1.5)
    q = smooth_bump(g.mesh(), width=0.4)
    x = g.mesh()
    res = rl_bound(q, (np.zeros(g.shape), np.zeros_like(x)), g, d)
    assert res.holds
    assert np.isclose(res.lhs, abs(np.sum(q * g.quadrature_weights())), rtol=1e-10)
    assert RL_CONSTANT == pytest.approx(3 * np.sqrt(3))


# parameter schedule


@settings(max_examples=200)
@given(st.floats(0.01, 0.49), st.floats(-5000, -3), st.floats(0.1, 1.0))
def test_schedule_identities(s, log_delta, c):
    sched = parameter_schedule(s, None, c=c, log_delta=log_delta * c)
    sched.check()
    assert sched.theta == pytest.approx(s / (1 + s), abs=1e-12)
    assert sched.lam == pytest.approx(s**2 / (3 * (1 + s) ** 2), abs=1e-12)
    assert sched.tau == pytest.approx(sched.d ** (-2 * (1 + s)), rel=1e-12)
    assert sched.d < 1


def test_schedule_lambda_for_quarter_smoothness():
    sched = parameter_schedule(0.25, 1e-3)
    assert sched.lam == pytest.approx(1 / 75)
    assert sched.theta == pytest.approx(0.2)


def test_schedule_accepts_underflowing_distances():
    sched = parameter_schedule(0.25, None, log_delta=-2048.0)
    assert np.isfinite(sched.tau) and sched.B_value == 0.0


@pytest.mark.parametrize("delta", [0.0, 1.0, 2.0])
def test_schedule_rejects_degenerate_distance(delta):
    with pytest.raises(DegenerateDelta):
        parameter_schedule(0.25, delta)


def test_moduli_dominate_identity():
    for m in (Modulus(), Modulus("power", 0.5), Modulus("log-power", 1.0)):
        for r in (1e-6, 1e-3, 0.3):
            assert m(r) >= r * (1 - 1e-12)
    with pytest.raises(ValueError):
        Modulus("power", 2.0)


def test_ball_integral_matches_cartesian_quadrature():
    R, tau, k2 = 1.5, 2.0, 1.0
    K = 4 * (tau**2 + k2)

    def integrand(phi, th, r):
        p2 = (r * np.sin(th)) ** 2
        return r**2 * np.sin(th) / (1 + r * r) * r * r / (r * r + r * r * p2 + K * p2)

    direct = integrate.tplquad(integrand, 0, R, 0, np.pi, 0, 2 * np.pi, epsabs=1e-10, epsrel=1e-8)[0]
    assert cylindrical_integral(R, tau, k2) == pytest.approx(direct, rel=1e-7)
    assert cylindrical_integral(R, tau, k2, d=0.5) == pytest.approx(4 * direct, rel=1e-7)


@pytest.mark.parametrize("R,tau", [(1.0, 16.0), (2.0, 64.0), (4.0, 256.0)])
def test_majorant_dominates_cylinder_integral(R, tau):
    assert cylindrical_integral(R, tau, form="cylinder") <= cylindrical_integral(R, tau, form="majorant")


# Carleman


def test_carleman_params_guard_the_weight():
    with pytest.raises(X0InsideDomain):
        CarlemanParams((0, 0, 0), 0.1, (-1, -1, -1), (1, 1, 1))
    with pytest.raises(WeightOverflow):
        CarlemanParams((0, 0, -2), 1e-3, (-1, -1, -1), (1, 1, 1))
    p = CarlemanParams((0, 0, -2), 0.5, (-1, -1, -1), (1, 1, 1))
    assert 0 < p.d1 < p.d2


def test_carleman_check_of_zero_field():
    g = Grid3.cube(8)
    res = carleman("check", np.zeros(g.shape), g, CarlemanParams((0, 0, -2), 0.5, g.lo, g.hi))
    assert res.lhs == 0 and res.rhs == 0


def test_transfer_of_identical_pair_is_zero():
    c = _sampled(BUMPY, 12, "node")
    rep = carleman("transfer", c, c)
    assert all(np.abs(r).max() == 0 for r in rep.recovered)
    assert rep.relative_h1_error == (0.0, 0.0)


def test_h1_difference():
    g = Grid3.cube(12)
    assert h1_difference(BUMPY, BUMPY, g) == 0
    other = BUMPY.with_coefficients(gamma=Constant(1.0))
    assert h1_difference(BUMPY, other, g) > 0


def test_fit_slope_recovers_power():
    x = np.array([1.0, 2.0, 4.0])
    assert fit_slope(x, 3 * x**-2) == pytest.approx(-2)
