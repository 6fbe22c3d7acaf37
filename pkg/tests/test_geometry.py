import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxstab import fields as F
from maxstab.errors import ConfigInvalid, EmptyGamma0, NotFlat, NotSuitable, OriginInClosure, SingularPoint
from maxstab.fields import Grid3
from maxstab.geometry import (
    DomainSpec,
    KelvinMap,
    build_domain,
    conformal_factor,
    kelvin,
    kelvin_point,
    pullback_metric,
    reflect,
    reflect_point,
)

finite = st.floats(-5, 5, allow_nan=False)
points = st.tuples(finite, finite, finite)


def test_flat_half_cube_extends_to_symmetric_box():
    dom = build_domain(DomainSpec("flat", (0, 0, -1), (1, 1, 0), resolution=8))
    ext, mask = dom.extended_grid()
    assert ext.lo == (0, 0, -1) and ext.hi == (1, 1, 1)
    assert mask.all()
    assert dom.faces.gamma0.sum() == 64


def test_empty_gamma0_rejected():
    spec = DomainSpec("flat", (0, 0, -1), (1, 1, 0), resolution=8, gamma0_rects=((5, 6, 5, 6),))
    with pytest.raises(EmptyGamma0):
        build_domain(spec)


def test_domain_above_plane_rejected():
    with pytest.raises(NotSuitable):
        build_domain(DomainSpec("flat", (0, 0, -1), (1, 1, 0.5), resolution=8))


def test_coarse_resolution_rejected():
    with pytest.raises(ConfigInvalid):
        build_domain(DomainSpec("flat", (0, 0, -1), (1, 1, 0), resolution=4))


def test_spherical_origin_in_closure():
    r0 = 1.0
    spec = DomainSpec("spherical", (-0.5, -0.5, -0.5), (0.5, 0.5, 0.5), 8, center=(0, 0, -r0), radius=r0)
    with pytest.raises(OriginInClosure):
        build_domain(spec)


def test_spherical_domain_has_flat_image():
    spec = DomainSpec("spherical", (-0.5, -0.5, -2.05), (0.5, 0.5, -1.2), 12, center=(0, 0, -1), radius=1.0,
                      image_resolution=12)
    dom = build_domain(spec)
    assert dom.image.kind == "flat"
    assert dom.image.faces.gamma0.any()
    assert np.isclose(dom.image.plane, -dom.r1**2 / 2)


def test_reflection_examples(flat_domain):
    g = Grid3((-1, -1, -1), (1, 1, 1), 8)
    u = np.zeros((3, *g.shape))
    u[2] = 1.0
    v = reflect(u, flat_domain, "vector")
    assert np.allclose(v[2], -1.0) and np.allclose(v[:2], 0)
    x3 = g.mesh()[2]
    assert np.allclose(reflect(x3, flat_domain, "scalar"), -x3)


def test_reflect_rejects_spherical():
    class Fake:
        kind = "spherical"

    with pytest.raises(NotFlat):
        reflect(np.zeros(3), Fake(), "point")


@given(points)
def test_reflection_is_an_involution(p):
    x = np.array(p)
    assert np.array_equal(reflect_point(reflect_point(x)), x)


@given(points, st.floats(-2, 2))
def test_reflection_about_offset_plane(p, plane):
    x = np.array(p)
    assert np.allclose(reflect_point(reflect_point(x, plane), plane), x, atol=1e-14)


@given(points, st.floats(0.5, 4))
def test_kelvin_is_an_involution(p, r1):
    y = np.array(p)
    if np.linalg.norm(y) < 1e-2:
        return
    back = kelvin_point(kelvin_point(y, r1), r1)
    assert np.linalg.norm(back - y) <= 1e-12 * max(1.0, np.linalg.norm(y))


@given(st.floats(0.5, 4), st.floats(0, 2 * np.pi), st.floats(0, np.pi))
def test_kelvin_fixes_its_sphere(r1, phi, theta):
    y = r1 * np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    assert np.allclose(kelvin_point(y, r1), y, atol=1e-12)
    assert np.isclose(conformal_factor(y, r1), 1.0)


def test_pullback_metric_is_conformal(rng):
    r1 = 2.0
    x = rng.uniform(-3, 3, (3, 200))
    x = x[:, np.linalg.norm(x, axis=0) > 0.1]
    G = pullback_metric(x, r1)
    expect = (r1**4 / np.sum(x**2, axis=0) ** 2) * np.eye(3)[:, :, None]
    assert np.max(np.abs(G - expect) / np.abs(expect).max(axis=(0, 1))) < 1e-10


def test_kelvin_singular_point():
    with pytest.raises(SingularPoint):
        kelvin_point(np.zeros(3), 2.0)


def test_constant_coefficient_on_fixed_sphere():
    K = KelvinMap(2.0)
    coef = K.coefficient(lambda x: np.full(np.shape(x)[1:], 2.0))
    y = np.array([[0.0], [0.0], [2.0]])
    assert np.allclose(coef(y), 2.0)


def test_kelvin_rejects_flat(flat_domain):
    with pytest.raises(NotFlat):
        kelvin(np.ones(3), flat_domain)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(-1, 1), st.floats(-1, 1))
def test_reflection_commutes_with_divergence(k, a, b):
    """Divergence of the reflected field equals the reflected divergence."""
    errs = []
    for n in (16, 32):
        g = Grid3.cube(n)
        x = g.mesh()
        u = np.stack([np.sin(k * x[0] + a * x[2]), np.cos(k * x[1]) * x[2], np.sin(k * x[2] + b)])
        lhs = F.div(reflect(u, kind="vector"), g)
        rhs = reflect(F.div(u, g), kind="scalar")
        errs.append(np.abs(lhs - rhs).max())
    # the two sides agree to rounding: fd2 stencils are themselves mirror symmetric
    assert max(errs) < 1e-10
