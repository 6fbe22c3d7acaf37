import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxstab.errors import NeumannViolation, NonzeroScalarSlots, NotASolution, NotFlat
from maxstab.fields import AugmentedField, Grid3
from maxstab.phantoms import CoefficientPair, CompactBump, Constant, GaussianBump
from maxstab.reduction import (
    VARIANTS,
    PotentialMatrices,
    SampledCoefficients,
    apply_P,
    assemble_potentials,
    extend_coefficients,
    factorization_residual,
    generic_potential,
    lift_and_rescale,
    reflect_augmented,
    reflect_solutions,
    symbol_pattern,
)

component = st.floats(-3, 3, allow_nan=False)
complex_vec = st.tuples(*[st.builds(complex, component, component)] * 3)


@given(complex_vec)
def test_symbol_squares_to_scalar(A):
    """The first-order symbol squares to ``A.A`` times the identity."""
    A = np.array(A).reshape(3, 1)
    S = symbol_pattern(A).dense()[..., 0]
    assert np.allclose(S @ S, (A[:, 0] @ A[:, 0]) * np.eye(8), atol=1e-10)


def test_P_on_plane_wave_matches_symbol():
    g = Grid3.cube(16, np.pi)
    x = g.mesh()
    k = np.array([1.0, -2.0, 3.0])
    rng = np.random.default_rng(3)
    c = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    Y = c.reshape(8, 1, 1, 1) * np.exp(1j * np.tensordot(k, x, axes=(0, 0)))
    assert np.allclose(apply_P(Y, g, "spectral"), symbol_pattern(k.reshape(3, 1, 1, 1)).apply(Y), atol=1e-9)


def _sampled(pair, n=16, hw=1.5, centering="cell"):
    return SampledCoefficients.from_pair(pair, Grid3.cube(n, hw, centering))


def test_constant_coefficients_give_scalar_potentials():
    c = _sampled(CoefficientPair(Constant(2.0), Constant(1.5 + 0.2j), 1.3), 8)
    kappa2 = c.kappa**2
    for which in ("Q", "Qprime"):
        Q = assemble_potentials(c, which)
        assert np.allclose(Q, -kappa2 * np.eye(8)[:, :, None, None, None])
    Qhat = assemble_potentials(c, "Qhat")
    assert np.allclose(Qhat, -np.conj(kappa2) * np.eye(8)[:, :, None, None, None])


BUMPY = CoefficientPair(
    GaussianBump(1.0, 0.3, (0.1, 0, 0), 0.3), GaussianBump(1.2, 0.2 + 0.05j, (0, -0.1, 0.1), 0.35), 1.0
)


def _potential_mismatch(which, n, scheme):
    c = _sampled(BUMPY, n)
    closed = assemble_potentials(c, which, scheme)
    generic = generic_potential(c, which, scheme)
    return np.abs(closed - generic).max() / np.abs(closed).max()


@pytest.mark.parametrize("which", VARIANTS)
def test_closed_form_potentials_match_generic_product(which):
    """Block formulas agree with ``-P(W^t) - W W^t`` up to discrete product-rule error."""
    assert _potential_mismatch(which, 24, "spectral") < 1e-5
    coarse, fine = _potential_mismatch(which, 16, "fd2"), _potential_mismatch(which, 32, "fd2")
    assert np.log2(coarse / fine) > 1.5


def test_factorization_residual_vanishes_for_constant_coefficients():
    c = _sampled(CoefficientPair(Constant(1.0), Constant(2.0), 1.0), 12, 1.0, "node")
    x = c.grid.mesh()
    Z = np.stack([np.sin(x[0] + j * x[1]) * np.cos(x[2]) for j in range(8)]).astype(complex)
    for v in VARIANTS:
        assert factorization_residual(Z, c, v, potentials=PotentialMatrices(c)) < 1e-10


def test_lift_round_trip_and_scalar_slot_guard():
    c = _sampled(CoefficientPair(Constant(2.0), GaussianBump(1.0, 0.2, (0, 0, 0), 0.4), 1.0), 8)
    rng = np.random.default_rng(0)
    E = rng.standard_normal((3, *c.grid.shape)) + 0j
    H = rng.standard_normal((3, *c.grid.shape)) + 0j
    Y = lift_and_rescale(E, H, c)
    assert np.all(Y.f1 == 0) and np.all(Y.f2 == 0)
    E2, H2 = lift_and_rescale(coeffs=c, Y=Y, direction="backward")
    assert np.allclose(E2, E) and np.allclose(H2, H)
    bad = AugmentedField(Y.data.copy(), c.grid)
    bad.data[0] += 1e-3
    with pytest.raises(NonzeroScalarSlots):
        lift_and_rescale(coeffs=c, Y=bad, direction="backward")


def test_reflected_differences():
    g = Grid3.cube(8)
    x = g.mesh()
    E_sym = np.stack([x[0] ** 2, x[1], np.zeros_like(x[2])]) + 0j  # R_* E o R = E
    H_anti = np.stack([np.zeros_like(x[0]), np.zeros_like(x[0]), np.ones_like(x[0])]) + 0j  # -R_* H o R = H
    dE, dH = reflect_solutions(E_sym, H_anti)
    assert np.allclose(dE, 0) and np.allclose(dH, 0)
    E_odd = np.stack([x[2], 0 * x[2], 0 * x[2]]) + 0j
    dE, _ = reflect_solutions(E_odd, H_anti)
    assert np.allclose(dE, 2 * E_odd)
    with pytest.raises(NotASolution):
        reflect_solutions(E_odd, H_anti, residual=1.0, tol=1e-6)


def test_augmented_reflection_is_an_involution():
    rng = np.random.default_rng(5)
    Y = rng.standard_normal((8, 6, 6, 6))
    assert np.array_equal(reflect_augmented(reflect_augmented(Y)), Y)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 0.4), st.floats(0.3, 0.6))
def test_extension_preserves_values_and_ellipticity(flat_domain, amp, width):
    pair = CoefficientPair(Constant(1.0), GaussianBump(1.0, amp, (0, 0, 0), width), 1.0, M=10.0)
    ext = extend_coefficients(pair, flat_domain)
    ge, _ = flat_domain.extended_grid()
    x = ge.mesh()
    below = x[2] < 0
    assert np.allclose(ext.gamma(x)[below], pair.gamma(x)[below])
    mirrored = x.copy()
    mirrored[2] *= -1
    assert np.allclose(ext.gamma(x), ext.gamma(mirrored))
    far = np.linspace(-6, 6, 25)
    X = np.stack(np.meshgrid(far, far, far, indexing="ij"))
    assert ext.gamma(X).real.min() >= min(1 / pair.M, pair.eps0) * (1 - 1e-6)


def test_extension_requires_neumann_condition(flat_domain):
    pair = CoefficientPair(Constant(1.0), CompactBump(1.0, 0.2, (0, 0, -0.2), 0.4), 1.0)
    with pytest.raises(NeumannViolation):
        extend_coefficients(pair, flat_domain)


def test_extension_requires_flat_domain():
    class Sphere:
        kind = "spherical"

    with pytest.raises(NotFlat):
        extend_coefficients(CoefficientPair(Constant(1.0), Constant(1.0), 1.0), Sphere())
