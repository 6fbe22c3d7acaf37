import numpy as np
import pytest

from maxstab.errors import EmptySet, NearResonance, NonTangentialData
from maxstab.fields import BoundaryTrace
from maxstab.forward import (
    CauchyDataSet,
    Dictionary,
    MaxwellSolver,
    cauchy_data_set,
    cauchy_distance,
    save_cauchy_set,
    topology_from_domain,
)
from maxstab.io import read_raw
from maxstab.phantoms import CoefficientPair, CompactBump, Constant

BACKGROUND = CoefficientPair(Constant(1.0), Constant(1.0), 1.0, name="bg")
BUMP = CoefficientPair(Constant(1.0), CompactBump(1.0, 0.5, (0, 0, -0.5), 0.3), 1.0, name="bump")


@pytest.fixture(scope="module")
def setup(flat_domain):
    topo = topology_from_domain(flat_domain)
    inputs = Dictionary(count=6, seed=2).inputs(flat_domain.faces)
    s0 = MaxwellSolver(topo, BACKGROUND, method="direct")
    s1 = MaxwellSolver(topo, BUMP, method="direct")
    return topo, inputs, s0, s1, cauchy_data_set(s0, inputs, "bg"), cauchy_data_set(s1, inputs, "bump")


def test_data_vanish_on_gamma0(setup):
    _, _, _, _, C0, _ = setup
    for d in C0.data:
        g0 = d.T.faces.gamma0
        assert np.all(d.T.tangential[g0] == 0)
        assert np.all(d.S.tangential[g0] == 0)


def test_solver_is_linear(setup):
    _, inputs, s0, _, _, _ = setup
    a = s0.solve(inputs[0])
    b = s0.solve(lambda x: (2 - 1j) * inputs[0](x))
    assert np.allclose(b.E_edges, (2 - 1j) * a.E_edges, atol=1e-10 * np.abs(a.E_edges).max())


def test_zero_data_gives_zero_field(setup):
    _, inputs, s0, _, _, _ = setup
    ref = np.mean([np.linalg.norm(s0.solve(g).E_edges) for g in inputs[:3]])
    zero = s0.solve(lambda x: np.zeros((3, *np.shape(x)[1:]), complex))
    assert np.linalg.norm(zero.E_edges) <= 1e-8 * ref


def test_distance_of_a_set_to_itself_is_zero(setup):
    *_, C0, C1 = setup
    assert cauchy_distance(C0, C0) < 1e-8
    assert np.isclose(cauchy_distance(C0, C1), cauchy_distance(C1, C0))
    assert cauchy_distance(C0, C1) > 1e-6


def test_distance_is_scale_invariant(setup):
    _, inputs, s0, s1, C0, C1 = setup
    scaled = cauchy_data_set(s1, [lambda x, g=g: 3.0 * g(x) for g in inputs], "bump3")
    assert np.isclose(cauchy_distance(C0, scaled), cauchy_distance(C0, C1), rtol=1e-6)


def test_enlarging_the_opposing_set_never_increases_distance(setup):
    _, inputs, s0, s1, C0, C1 = setup
    more = Dictionary(count=4, seed=9).inputs(s0.topo.faces)
    C1_big = CauchyDataSet(C1.data + cauchy_data_set(s1, more).data)
    from maxstab.forward import _one_sided

    assert _one_sided(C0, C1_big) <= _one_sided(C0, C1) * (1 + 1e-9)


def test_empty_set_rejected(setup):
    *_, C0, _ = setup
    with pytest.raises(EmptySet):
        cauchy_distance(C0, CauchyDataSet([]))


def test_trace_supported_on_gamma0_rejected(setup):
    topo, _, s0, *_ = setup
    f = topo.faces
    t = np.zeros((len(f), 2), complex)
    t[f.gamma0, 0] = 1.0
    with pytest.raises(NonTangentialData):
        s0.solve(BoundaryTrace(f, t, region="gamma"))


def test_resonant_frequency_detected(flat_domain):
    # lowest cavity mode of the unit cube on the 8-cell Yee grid
    h = 1 / 8
    omega = np.sqrt(2) * 2 / h * np.sin(np.pi * h / 2)
    with pytest.raises(NearResonance):
        MaxwellSolver(topology_from_domain(flat_domain), BACKGROUND, omega, method="direct")


def test_archive_round_trip(setup, tmp_path):
    *_, C0, _ = setup
    save_cauchy_set(C0, tmp_path)
    arr, h = read_raw(tmp_path / "datum000_T.raw")
    assert np.allclose(arr[:2, :, 0, 0].T, C0.data[0].T.tangential)
    assert (tmp_path / "manifest.json").exists()


def _residual_from_span(x, Y):
    Q, _ = np.linalg.qr(Y)
    return np.linalg.norm(x - Q @ (Q.conj().T @ x))


def test_singleton_distance_matches_projection(setup):
    *_, C0, C1 = setup
    a, b = C0.data[0], C1.data[0]
    xa = a.features / np.linalg.norm(a.features_T)
    xb = b.features / np.linalg.norm(b.features_T)
    expect = max(_residual_from_span(xa, b.features[:, None]), _residual_from_span(xb, a.features[:, None]))
    got = cauchy_distance(CauchyDataSet([a]), CauchyDataSet([b]))
    assert np.isclose(got, expect, rtol=1e-8)


@pytest.mark.parametrize("delta", [1e-4, 1e-2])
def test_perturbed_neumann_data_stay_close(setup, delta):
    from maxstab.forward import CauchyDatum
    from maxstab.fields import th_norm

    *_, C0, _ = setup
    rng = np.random.default_rng(7)
    pert = []
    for d in C0.data:
        w = BoundaryTrace(d.S.faces, rng.standard_normal(d.S.tangential.shape) + 0j).restrict("gamma")
        w = w.scale(delta * np.linalg.norm(d.features_T) / th_norm(w))
        pert.append(CauchyDatum(d.T, d.S + w))
    dist = cauchy_distance(C0, CauchyDataSet(pert))
    Tk = np.stack([d.features_T for d in C0.data], axis=1)
    # each unit-T combination moves by at most delta times the conditioning of the T-Gram matrix
    smin = np.linalg.svd(Tk / np.linalg.norm(Tk, axis=0), compute_uv=False).min()
    assert dist <= delta * np.sqrt(len(C0)) / smin
