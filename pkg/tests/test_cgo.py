import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxstab.cgo import CgoBox, build_cgo, choose_zetas
from maxstab.errors import DegenerateXi, NoConvergence
from maxstab.phantoms import CoefficientPair, Constant, GaussianBump
from maxstab.reconstruction import fit_slope

coord = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=100)
@given(st.tuples(coord, coord, coord), st.floats(1, 1000), st.floats(0, 10))
def test_zeta_invariants(xi, tau, k2):
    xi = np.array(xi)
    nxi = np.linalg.norm(xi)
    if nxi == 0 or np.hypot(xi[0], xi[1]) < 1e-12 * nxi:
        with pytest.raises(DegenerateXi):
            choose_zetas(xi, tau, k2)
        return
    zp = choose_zetas(xi, tau, k2)
    zp.check()
    A1, A2 = zp.fourier_amplitudes()
    w = (1j * zp.eta1 + zp.eta2) / np.sqrt(2)
    assert np.isclose(w @ A1, 1) and np.isclose(w @ np.conj(A2), 1)
    f1, f2, f3 = zp.frame
    assert np.allclose(np.cross(f2, f3), f1) and np.isclose(f2 @ f3, 0)


def test_xi_along_normal_is_degenerate():
    with pytest.raises(DegenerateXi):
        choose_zetas((0.0, 0.0, 2.0), 10.0, 1.0)


def test_direction_gap_decays_like_inverse_tau():
    taus = np.array([4.0, 8.0, 16.0, 32.0, 64.0])
    gaps = [choose_zetas((1.0, 0.5, 0.3), t, 1.0).direction_gap for t in taus]
    assert fit_slope(taus, gaps) <= -0.8


BACKGROUND = CoefficientPair(Constant(1.0), Constant(1.0), 1.0)
WEAK = CoefficientPair(Constant(1.0), GaussianBump(1.0, 0.01, (0, 0, 0), 0.35), 1.0)


def test_constant_coefficients_have_no_remainder():
    zp = choose_zetas((1.0, 0.5, 0.3), 8.0, BACKGROUND.k2)
    A1, _ = zp.fourier_amplitudes()
    sol = build_cgo(BACKGROUND, zp.zeta1, A1, None, box=CgoBox(16, 2.0))
    assert np.all(sol.R == 0)
    x = sol.grid.mesh()
    Z = sol.Z()
    assert np.allclose(Z, sol.seed.reshape(8, 1, 1, 1) * np.exp(1j * np.tensordot(zp.zeta1, x, axes=(0, 0))))


def test_zero_amplitude_gives_zero_solution():
    zp = choose_zetas((1.0, 0.5, 0.3), 8.0, WEAK.k2)
    sol = build_cgo(WEAK, zp.zeta1, None, None, box=CgoBox(16, 2.0))
    assert not np.any(sol.Z_tilde) and not np.any(sol.Y_tilde)


def test_zeta_must_match_wavenumber():
    with pytest.raises(ValueError):
        build_cgo(WEAK, np.array([2.0, 0, 0]), np.ones(3), box=CgoBox(16, 2.0))


@pytest.mark.parametrize("variant", ["schrodinger", "adjoint"])
def test_weak_bump_contracts(variant):
    zp = choose_zetas((1.0, 0.5, 0.3), 16.0, WEAK.k2)
    A1, A2 = zp.fourier_amplitudes()
    zeta, A = (zp.zeta1, A1) if variant == "schrodinger" else (zp.zeta2, A2)
    sol = build_cgo(WEAK, zeta, A, None, variant, CgoBox(32, 2.0))
    rep = sol.report
    assert rep.q_rel < 1 and rep.residual < 1e-8
    assert all(r <= rep.q_rel for r in rep.update_ratios)
    assert sol.first_order_residual < 1e-6


def test_strong_potential_refuses_to_iterate():
    strong = CoefficientPair(Constant(1.0), GaussianBump(1.0, 3.0, (0, 0, 0), 0.2), 1.0)
    zp = choose_zetas((1.0, 0.5, 0.3), 1.0, strong.k2)
    A1, _ = zp.fourier_amplitudes()
    with pytest.raises(NoConvergence):
        build_cgo(strong, zp.zeta1, A1, box=CgoBox(16, 2.0))
