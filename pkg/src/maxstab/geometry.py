"""Partially flat and partially spherical domains, reflection and Kelvin maps.

Domains are rasterized on uniform cell grids: the domain ``U`` is a boolean
cell mask and its boundary is a union of cell faces, each tagged as lying
in the inaccessible part Γ₀ or the accessible part Γ.

* Flat: ``U`` is the grid box, lying below the plane ``x3 = plane``; Γ₀ is
  the part of the top face covered by the given rectangles.
* Spherical: ``U`` is the intersection of the ball ``B(y0, r0)`` with the
  grid box; the origin must lie on the sphere and outside ``closure(U)``.
  Γ₀ consists of faces cut by the sphere.  The Kelvin map
  ``y -> r1^2 y / |y|^2`` with ``r1 = 2 r0`` sends the sphere to the plane
  ``x3 = -r1^2 / (2 r0)`` and ``U`` to a flat domain, which is rasterized on
  its own grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConfigInvalid, EmptyGamma0, NotFlat, NotSuitable, OriginInClosure, SingularPoint
from .fields import BoundaryFaces, Grid3

R_STAR = np.diag([1.0, 1.0, -1.0])


@dataclass(frozen=True)
class DomainSpec:
    """User-facing description of a suitable domain.

    ``gamma0_rects`` lists ``(x1_min, x1_max, x2_min, x2_max)`` rectangles
    in the flat plane (``None`` means the whole top face).  For the
    spherical kind, ``center`` and ``radius`` describe the sphere carrying
    Γ₀ and ``image_resolution`` the grid of the flat Kelvin image.
    """

    kind: str
    box_lo: tuple[float, float, float]
    box_hi: tuple[float, float, float]
    resolution: int | tuple[int, int, int] = 16
    plane: float = 0.0
    gamma0_rects: tuple | None = None
    center: tuple[float, float, float] | None = None
    radius: float | None = None
    image_resolution: int | tuple[int, int, int] | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        try:
            rects = d.get("gamma0_rects")
            return cls(
                kind=d["kind"],
                box_lo=tuple(d["box_lo"]),
                box_hi=tuple(d["box_hi"]),
                resolution=d.get("resolution", 16),
                plane=float(d.get("plane", 0.0)),
                gamma0_rects=None if rects is None else tuple(tuple(r) for r in rects),
                center=None if d.get("center") is None else tuple(d["center"]),
                radius=d.get("radius"),
                image_resolution=d.get("image_resolution"),
            )
        except KeyError as exc:
            raise ConfigInvalid(f"domain file misses key {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "DomainSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class ValidatedDomain:
    """Rasterized domain with boundary faces and Γ₀ tags.

    ``image`` holds the flat Kelvin image of a spherical domain.
    """

    kind: str
    grid: Grid3
    inside: np.ndarray
    faces: BoundaryFaces
    plane: float = 0.0
    center: np.ndarray | None = None
    radius: float | None = None
    image: "ValidatedDomain | None" = field(default=None, repr=False)

    @property
    def r1(self) -> float:
        return 2.0 * self.radius

    def gamma0_points(self) -> np.ndarray:
        """Centres of the Γ₀ faces, shape ``(3, m)``."""
        return self.faces.center[self.faces.gamma0].T

    def extension_radius(self, shell: float = 0.25) -> float:
        """Radius whose inner ball ``(1 - shell) rho`` contains the reflected box."""
        lo, hi = np.array(self.grid.lo), np.array(self.grid.hi)
        hi3 = 2 * self.plane - lo[2]
        corners = np.array([[a, b, c] for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi3)])
        return float(np.max(np.linalg.norm(corners, axis=1)) * 1.02 / (1 - shell))

    def extended_grid(self, refine: int = 1) -> tuple[Grid3, np.ndarray]:
        """Grid and cell mask of ``Omega = U u Γ₀ u R(U)`` (flat kind)."""
        if self.kind != "flat":
            raise NotFlat("symmetric extension needs a flat domain")
        g = self.grid
        n = np.array(g.n) * refine
        lo = g.lo
        hi = (g.hi[0], g.hi[1], 2 * self.plane - g.lo[2])
        ext = Grid3(lo, hi, (n[0], n[1], 2 * n[2]))
        mask = np.concatenate([self.inside, self.inside[:, :, ::-1]], axis=2)
        if refine > 1:
            mask = np.repeat(np.repeat(np.repeat(mask, refine, 0), refine, 1), refine, 2)
        return ext, mask

    def slit_faces(self) -> np.ndarray:
        """Indices of top faces on the plane that are not in Γ₀."""
        f = self.faces
        on_plane = (f.axis == 2) & (f.side > 0) & np.isclose(f.center[:, 2], self.plane)
        return np.flatnonzero(on_plane & ~f.gamma0)


# ---------------------------------------------------------------------------
# build


def _in_rects(points: np.ndarray, rects) -> np.ndarray:
    if rects is None:
        return np.ones(len(points), bool)
    ok = np.zeros(len(points), bool)
    for a0, a1, b0, b1 in rects:
        ok |= (points[:, 0] > a0) & (points[:, 0] < a1) & (points[:, 1] > b0) & (points[:, 1] < b1)
    return ok


def _check_connected(inside: np.ndarray, blocked_axis2_cells: set | None = None) -> bool:
    """Face connectivity of the cell mask (optionally cutting vertical links)."""
    idx = -np.ones(inside.shape, int)
    cells = np.argwhere(inside)
    idx[tuple(cells.T)] = np.arange(len(cells))
    rows, cols = [], []
    for ax in range(3):
        a = [slice(None)] * 3
        b = [slice(None)] * 3
        a[ax], b[ax] = slice(None, -1), slice(1, None)
        both = inside[tuple(a)] & inside[tuple(b)]
        i0 = idx[tuple(a)][both]
        i1 = idx[tuple(b)][both]
        if ax == 2 and blocked_axis2_cells:
            lower = np.argwhere(both)
            keep = np.array([tuple(c) not in blocked_axis2_cells for c in lower], bool)
            i0, i1 = i0[keep], i1[keep]
        rows.append(i0)
        cols.append(i1)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    G = sp.coo_matrix((np.ones(len(r)), (r, c)), shape=(len(cells), len(cells)))
    ncomp, _ = connected_components(G, directed=False)
    return ncomp == 1


def build_domain(spec: DomainSpec) -> ValidatedDomain:
    """Rasterize, tag Γ₀ and validate a domain description."""
    res = spec.resolution
    n = (res,) * 3 if np.ndim(res) == 0 else tuple(res)
    if min(n) < 8:
        raise ConfigInvalid("resolution must be at least 8 cells per axis")
    grid = Grid3(spec.box_lo, spec.box_hi, n)
    if spec.kind == "flat":
        return _build_flat(spec, grid)
    if spec.kind == "spherical":
        return _build_spherical(spec, grid)
    raise ConfigInvalid(f"unknown domain kind {spec.kind!r}")


def _build_flat(spec: DomainSpec, grid: Grid3, inside=None, gamma0_test=None) -> ValidatedDomain:
    plane = spec.plane
    if grid.hi[2] > plane + 1e-12:
        raise NotSuitable("a flat domain must lie below its plane")
    inside = np.ones(grid.n, bool) if inside is None else inside

    def default_test(centers, axis, side):
        top = (axis == 2) & (side > 0) & np.isclose(centers[:, 2], plane, atol=1e-9 * grid.h)
        return top & _in_rects(centers, spec.gamma0_rects)

    faces = BoundaryFaces.from_mask(grid, inside, gamma0_test or default_test)
    if not faces.gamma0.any():
        raise EmptyGamma0("Γ₀ rasterizes to zero faces")
    dom = ValidatedDomain("flat", grid, inside, faces, plane)
    # Omega = U u Γ₀ u R(U): the two halves connect only through Γ₀ faces
    _, mask = dom.extended_grid()
    nz = grid.n[2]
    blocked = set()
    for i in dom.slit_faces():
        c = faces.cell[i]
        blocked.add((int(c[0]), int(c[1]), nz - 1))
    if not _check_connected(mask, blocked):
        raise NotSuitable("symmetric extension is not connected")
    return dom


def kelvin_point(y: np.ndarray, r1: float, eps: float | None = None) -> np.ndarray:
    """``r1^2 y / |y|^2`` for points of shape ``(3, ...)``."""
    y = np.asarray(y, float)
    r2 = np.sum(y**2, axis=0)
    eps = 1e-6 * r1 if eps is None else eps
    if np.any(r2 < eps**2):
        raise SingularPoint(f"point within {eps:.1e} of the origin")
    return r1**2 * y / r2


def _build_spherical(spec: DomainSpec, grid: Grid3) -> ValidatedDomain:
    y0 = np.asarray(spec.center, float)
    r0 = float(spec.radius)
    if not np.isclose(np.linalg.norm(y0), r0, rtol=1e-12):
        raise NotSuitable("the origin must lie on the sphere carrying Γ₀")
    if not (np.isclose(y0[0], 0) and np.isclose(y0[1], 0) and y0[2] < 0):
        raise NotSuitable("sphere centre must be (0, 0, -r0) so the image plane is x3 = const")
    x = grid.mesh()
    in_ball = np.sum((x - y0[:, None, None, None]) ** 2, axis=0) < r0**2
    inside = in_ball
    lo, hi = np.array(grid.lo), np.array(grid.hi)
    if np.all(lo <= 0) and np.all(hi >= 0):
        # origin in the box and on the sphere, hence in closure(U)
        raise OriginInClosure("0 lies in the closure of U")
    dist = _distance_to_cells(np.zeros(3), grid, inside)
    if dist <= 1e-12:
        raise OriginInClosure("0 lies in the closure of U")
    if not inside.any():
        raise NotSuitable("U is empty on this grid")

    def sphere_test(centers, axis, side):
        out = centers.copy()
        out[np.arange(len(centers)), axis] += 0.5 * side * np.array(grid.spacing)[axis]
        in_box = np.all((out > lo) & (out < hi), axis=1)
        outside_ball = np.sum((out - y0) ** 2, axis=1) >= r0**2
        return in_box & outside_ball

    faces = BoundaryFaces.from_mask(grid, inside, sphere_test)
    if not faces.gamma0.any():
        raise EmptyGamma0("Γ₀ rasterizes to zero faces")
    dom = ValidatedDomain("spherical", grid, inside, faces, 0.0, y0, r0)
    image = _build_kelvin_image(spec, dom)
    return ValidatedDomain("spherical", grid, inside, faces, 0.0, y0, r0, image)


def _distance_to_cells(p: np.ndarray, grid: Grid3, inside: np.ndarray) -> float:
    h = np.array(grid.spacing)
    c = np.array(grid.lo) + (np.argwhere(inside) + 0.5) * h
    d = np.maximum(np.abs(c - p) - 0.5 * h, 0.0)
    return float(np.min(np.linalg.norm(d, axis=1)))


def _build_kelvin_image(spec: DomainSpec, dom: ValidatedDomain) -> ValidatedDomain:
    """Rasterize ``K(U)`` on a grid whose top plane is the image of the sphere."""
    r1 = dom.r1
    r0 = dom.radius
    plane = -(r1**2) / (2 * r0)
    g = dom.grid
    lo, hi = np.array(g.lo), np.array(g.hi)
    # image of U: sample densely and take the bounding box
    pts = g.mesh()[:, dom.inside]
    img = kelvin_point(pts, r1)
    ilo = img.min(axis=1) - np.array(g.spacing)
    ihi = img.max(axis=1) + np.array(g.spacing)
    ihi[2] = plane
    res = spec.image_resolution or spec.resolution
    n = (res,) * 3 if np.ndim(res) == 0 else tuple(res)
    ig = Grid3(tuple(ilo), tuple(ihi), n)
    xc = ig.mesh()
    y = kelvin_point(xc, r1)
    in_box = np.all((y > lo[:, None, None, None]) & (y < hi[:, None, None, None]), axis=0)
    inside = in_box & (xc[2] < plane)

    def plane_test(centers, axis, side):
        top = (axis == 2) & (side > 0) & np.isclose(centers[:, 2], plane, atol=1e-9 * ig.h)
        yc = kelvin_point(centers.T, r1).T
        return top & np.all((yc > lo) & (yc < hi), axis=1)

    image_spec = DomainSpec("flat", tuple(ilo), tuple(ihi), n, plane)
    return _build_flat(image_spec, ig, inside, plane_test)


# ---------------------------------------------------------------------------
# reflection


def reflect_point(x: np.ndarray, plane: float = 0.0) -> np.ndarray:
    y = np.array(x, float)
    y[2] = 2 * plane - y[2]
    return y


def reflect(obj: np.ndarray, domain: ValidatedDomain | None = None, kind: str = "point"):
    """Apply the reflection to a point, a scalar field or a vector field.

    Fields must be sampled on a grid symmetric about the plane; scalars
    become ``f o R`` and vectors ``R_* u o R``.
    """
    if domain is not None and domain.kind != "flat":
        raise NotFlat("reflection needs a flat domain")
    plane = 0.0 if domain is None else domain.plane
    if kind == "point":
        return reflect_point(obj, plane)
    if kind == "scalar":
        return obj[..., ::-1]
    if kind == "vector":
        v = obj[..., ::-1].copy()
        v[..., 2, :, :, :] *= -1
        return v
    raise ValueError(f"unknown object kind {kind!r}")


# ---------------------------------------------------------------------------
# Kelvin transform


def kelvin_jacobian(x: np.ndarray, r1: float) -> np.ndarray:
    """Jacobian of the Kelvin map, shape ``(3, 3, ...)``: ``c (I - 2 xhat xhat^T)``."""
    x = np.asarray(x, float)
    r2 = np.sum(x**2, axis=0)
    eye = np.eye(3).reshape((3, 3) + (1,) * (x.ndim - 1))
    return (r1**2 / r2) * (eye - 2 * x[:, None] * x[None, :] / r2)


def conformal_factor(x: np.ndarray, r1: float) -> np.ndarray:
    return r1**2 / np.sum(np.asarray(x, float) ** 2, axis=0)


def pullback_metric(x: np.ndarray, r1: float) -> np.ndarray:
    """``J^T J``, which equals ``(r1^4 / |x|^4) I`` for the Kelvin map."""
    J = kelvin_jacobian(x, r1)
    return np.einsum("ki...,kj...->ij...", J, J)


@dataclass(frozen=True)
class KelvinMap:
    """The inversion ``K`` with radius ``r1`` and its action on fields."""

    r1: float
    eps: float | None = None

    def point(self, x: np.ndarray) -> np.ndarray:
        return kelvin_point(x, self.r1, self.eps if self.eps is not None else 1e-6 * self.r1)

    def factor(self, x: np.ndarray) -> np.ndarray:
        return conformal_factor(x, self.r1)

    def pullback_form(self, field: Callable) -> Callable:
        """1-form pull-back: ``x -> J(x)^T field(K x)``."""

        def pulled(x):
            J = kelvin_jacobian(x, self.r1)
            return np.einsum("ji...,j...->i...", J, field(self.point(x)))

        return pulled

    def coefficient(self, coef: Callable, effective: bool = True) -> Callable:
        """``coef o K``, multiplied by the conformal factor if ``effective``."""
        from .phantoms import Composed

        return Composed(coef, self.point, self.factor if effective else None)

    def solution(self, E: Callable, H: Callable) -> tuple[Callable, Callable]:
        """Transformed pair ``(J^T E o K, -J^T H o K)``.

        The map reverses orientation, so the magnetic form changes sign to
        keep ``curl E = i omega mu H`` with the effective coefficients.
        """
        Et = self.pullback_form(E)
        Hp = self.pullback_form(H)
        return Et, (lambda x: -Hp(x))


def kelvin(obj, domain: ValidatedDomain, kind: str = "point"):
    """Kelvin action for a spherical domain: ``point``, ``form``, ``coefficient`` or ``solution``."""
    if domain.kind != "spherical":
        raise NotFlat("Kelvin transform needs a spherical domain")
    K = KelvinMap(domain.r1)
    if kind == "point":
        return K.point(obj)
    if kind == "form":
        return K.pullback_form(obj)
    if kind == "coefficient":
        return K.coefficient(obj)
    if kind == "solution":
        return K.solution(*obj)
    raise ValueError(f"unknown object kind {kind!r}")
