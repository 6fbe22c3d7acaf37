import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxstab import fields as F
from maxstab.errors import GridMismatch, NonCompactSupport, UnsupportedSpace
from maxstab.fields import AugmentedField, BoundaryFaces, BoundaryTrace, Grid3, sbp_operator
from maxstab.reconstruction import fit_slope

from helpers import smooth_bump


def test_grid_geometry():
    g = Grid3((0, 0, 0), (1, 2, 4), (4, 4, 4))
    assert g.spacing == (0.25, 0.5, 1.0)
    assert g.h == 1.0
    assert g.shape == (4, 4, 4)
    assert Grid3((0, 0, 0), (1, 1, 1), 4, "node").shape == (5, 5, 5)
    assert np.isclose(g.quadrature_weights().sum(), 8.0)
    assert np.isclose(Grid3((0, 0, 0), (1, 1, 1), 4, "node").quadrature_weights().sum(), 1.0)


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        Grid3((0, 0, 0), (1, 1, 1), 4, "edge")
    with pytest.raises(ValueError):
        Grid3((0, 0, 0), (0, 1, 1), 4)


def test_mismatched_grids():
    a, b = Grid3.cube(8), Grid3.cube(16)
    with pytest.raises(GridMismatch):
        a.check_same(b)
    with pytest.raises(GridMismatch):
        F.partial(np.zeros(b.shape), 0, a)


@pytest.mark.parametrize("n", [9, 13, 20])
def test_sbp_property(n):
    D, w = sbp_operator(n, 0.1)
    B = np.zeros((n, n))
    B[0, 0], B[-1, -1] = -1, 1
    assert np.allclose(np.diag(w) @ D + D.T @ np.diag(w), B, atol=1e-13)


@pytest.mark.parametrize("scheme", ["fd2", "sbp"])
def test_derivatives_of_quadratics_are_exact(scheme):
    g = Grid3.cube(12, 1.0, "node")
    x = g.mesh()
    f = x[0] ** 2 + x[1] * x[2]
    assert np.allclose(F.partial(f, 0, g, scheme), 2 * x[0], atol=1e-11)
    assert np.allclose(F.partial(f, 2, g, scheme), x[1], atol=1e-11)


def test_curl_of_gradient_vanishes():
    g = Grid3.cube(16)
    f = smooth_bump(g.mesh())
    assert np.abs(F.curl(F.grad(f, g), g)).max() < 1e-12


def test_curl_integration_by_parts_is_second_order():
    errs = []
    ns = (16, 32, 64)
    for n in ns:
        g = Grid3.cube(n, 1.5)
        x = g.mesh()
        b = smooth_bump(x, width=0.25)
        u = np.stack([b * x[1], b * np.sin(x[0]), b])
        v = np.stack([b, b * x[2], b * np.cos(x[1])])
        errs.append(abs(F.inner(F.curl(u, g), v, g) - F.inner(u, F.curl(v, g), g)))
    assert fit_slope([1 / n for n in ns], errs) > 1.8


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_sobolev_norms_are_monotone_in_s(s1, s2):
    g = Grid3.cube(16, 2.0)
    f = smooth_bump(g.mesh(), width=0.3)
    lo, hi = sorted((s1, s2))
    assert F.sobolev_norm(f, g, lo) <= F.sobolev_norm(f, g, hi) * (1 + 1e-12)


def test_sobolev_zero_is_l2():
    g = Grid3.cube(16, 2.0)
    f = smooth_bump(g.mesh(), width=0.3)
    assert np.isclose(F.sobolev_norm(f, g, 0.0), F.l2_norm(f, g), rtol=1e-10)


def test_sobolev_needs_compact_support():
    g = Grid3.cube(8)
    with pytest.raises(NonCompactSupport):
        F.sobolev_norm(np.ones(g.shape), g, 0.5)


def test_norm_dispatch():
    g = Grid3.cube(8)
    f = np.ones(g.shape)
    assert np.isclose(F.norm(f, "L2", g), np.sqrt(8.0))
    with pytest.raises(UnsupportedSpace):
        F.norm(f, "W1p", g)


def test_weighted_norm_reduces_to_l2():
    g = Grid3.cube(8)
    f = np.ones(g.shape)
    assert np.isclose(F.weighted_l2_norm(f, g, 0.0), F.l2_norm(f, g))


def _top_faces(n=16):
    g = Grid3((-0.5, -0.5, -1.0), (0.5, 0.5, 0.0), n)
    inside = np.ones(g.n, bool)
    faces = BoundaryFaces.from_mask(g, inside, lambda c, a, s: (a == 2) & (s > 0))
    return g, faces


def test_face_count_of_a_box():
    g, faces = _top_faces(8)
    assert len(faces) == 6 * 64
    assert faces.gamma0.sum() == 64
    N = faces.normal
    assert np.allclose(np.abs(N).sum(axis=1), 1)


def test_tangential_trace_of_normal_field_vanishes():
    g, faces = _top_faces(8)
    u = np.zeros((3, *g.shape))
    u[2] = 1
    t = F.trace(u, faces)
    top = faces.gamma0
    assert np.allclose(t.tangential[top], 0)


def test_plane_wave_tangential_trace():
    g, faces = _top_faces(8)
    k, d, p = 1.3, np.array([0.6, 0.0, 0.8]), np.array([0.0, 1.0, 0.0])
    x = g.mesh()
    phase = lambda y: np.exp(1j * k * np.tensordot(d, y, axes=(0, 0)))  # noqa: E731
    # linear in x3 along the normal, so face extrapolation is exact up to the phase curvature
    u = p.reshape(3, 1, 1, 1) * phase(x)
    t = F.trace(u, faces)
    c = faces.center[faces.gamma0].T
    expect = np.cross(faces.normal[faces.gamma0], (p[:, None] * phase(c)).T)
    got = t.ambient()[faces.gamma0]
    assert np.abs(got - expect).max() < 5 * (k * g.h) ** 2


def test_trace_restriction_and_th_norm():
    g, faces = _top_faces(8)
    rng = np.random.default_rng(0)
    t = BoundaryTrace(faces, rng.standard_normal((len(faces), 2)) + 0j)
    zero = t.restrict("gamma").restrict("gamma0")
    assert F.th_norm(zero) == 0
    assert np.isclose(F.th_norm(t.scale(2.0)), 2 * F.th_norm(t))
    assert F.th_norm(t) > 0


def test_surface_divergence_of_gradient_trace_converges():
    errs, ns = [], (16, 32, 64)
    for n in ns:
        g = Grid3((-0.5, -0.5, -1.0), (0.5, 0.5, 0.0), n)
        faces = BoundaryFaces.from_mask(g, np.ones(g.n, bool))
        f = smooth_bump(g.mesh(), center=(0.05, -0.1, -0.5), width=0.15)
        sd = F.trace(F.grad(f, g), faces, "surface_divergence")
        errs.append(np.abs(sd).max())
    assert max(errs) < 1e-10 or fit_slope([1 / n for n in ns], errs) > 1.8


def test_augmented_field_slots():
    g = Grid3.cube(4)
    Y = AugmentedField.from_parts(1.0, np.ones(3), 2.0, np.zeros(3), g)
    assert Y.data.shape == (8, 4, 4, 4)
    assert np.all(Y.f2 == 2.0) and np.all((Y + Y).f1 == 2.0) and np.all((2 * Y - Y).u1 == 1.0)
    with pytest.raises(GridMismatch):
        AugmentedField(np.zeros((7, 4, 4, 4)), g)


def test_sbp_needs_enough_nodes():
    with pytest.raises(ValueError):
        sbp_operator(8, 0.1)
