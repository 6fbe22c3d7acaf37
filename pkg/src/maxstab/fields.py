"""Grids, discrete differential operators, norms and boundary traces.

Fields are plain complex numpy arrays whose trailing three axes are spatial;
leading axes index components.  A :class:`Grid3` travels alongside and fixes
the sample positions.  Two centerings are supported:

* ``"cell"``: samples at cell centres ``lo + (i + 1/2) h``, ``n`` per axis.
  Used by the forward solver, the periodic Fourier boxes and anything that
  must be mirror-symmetric about a grid plane.
* ``"node"``: samples at ``lo + i h`` for ``i = 0..n``, so the boundary is
  sampled.  Used where boundary integrals are needed (summation by parts).

Three derivative schemes are available: ``"fd2"`` (second-order centred,
second-order one-sided at the edges), ``"sbp"`` (a diagonal-norm
summation-by-parts operator, fourth order inside and second order at the
boundary, node grids only) and ``"spectral"`` (periodic Fourier).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import GridMismatch, NonCompactSupport, UnsupportedSpace

SCHEMES = ("fd2", "sbp", "spectral")


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class Grid3:
    """Uniform axis-aligned grid on the box ``[lo, hi]``.

    ``n`` is the number of cells per axis; spacing is ``(hi - lo) / n``.
    """

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    n: tuple[int, int, int]
    centering: str = "cell"

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        n = self.n if np.ndim(self.n) else (self.n,) * 3
        object.__setattr__(self, "n", tuple(int(v) for v in n))
        if self.centering not in ("cell", "node"):
            raise ValueError(f"unknown centering {self.centering!r}")
        if any(b <= a for a, b in zip(self.lo, self.hi)) or min(self.n) < 1:
            raise ValueError("grid box must have positive extent and cells")

    @classmethod
    def cube(cls, n: int, half_width: float = 1.0, centering: str = "cell") -> "Grid3":
        return cls((-half_width,) * 3, (half_width,) * 3, (n,) * 3, centering)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple((b - a) / m for a, b, m in zip(self.lo, self.hi, self.n))

    @property
    def h(self) -> float:
        return max(self.spacing)

    @property
    def extent(self) -> np.ndarray:
        return np.subtract(self.hi, self.lo)

    @property
    def shape(self) -> tuple[int, int, int]:
        if self.centering == "cell":
            return self.n
        return tuple(m + 1 for m in self.n)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis(self, i: int) -> np.ndarray:
        h = self.spacing[i]
        if self.centering == "cell":
            return self.lo[i] + (np.arange(self.n[i]) + 0.5) * h
        return self.lo[i] + np.arange(self.n[i] + 1) * h

    def axes(self) -> list[np.ndarray]:
        return [self.axis(i) for i in range(3)]

    def mesh(self) -> np.ndarray:
        """Coordinates as an array of shape ``(3, *shape)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"))

    def quadrature_weights(self) -> np.ndarray:
        """Midpoint weights (cell) or trapezoid weights (node)."""
        ws = []
        for i in range(3):
            w = np.full(self.shape[i], self.spacing[i])
            if self.centering == "node":
                w[0] *= 0.5
                w[-1] *= 0.5
            ws.append(w)
        return ws[0][:, None, None] * ws[1][None, :, None] * ws[2][None, None, :]

    def check_same(self, other: "Grid3") -> None:
        if self != other:
            raise GridMismatch(f"grids differ: {self} vs {other}")

    def check_array(self, a: np.ndarray) -> None:
        if tuple(a.shape[-3:]) != self.shape:
            raise GridMismatch(f"array shape {a.shape} does not match grid {self.shape}")


# ---------------------------------------------------------------------------
# summation-by-parts first derivative


_SBP_BLOCK = np.array(
    [
        [-24 / 17, 59 / 34, -4 / 17, -3 / 34, 0, 0],
        [-1 / 2, 0, 1 / 2, 0, 0, 0],
        [4 / 43, -59 / 86, 0, 59 / 86, -4 / 43, 0],
        [3 / 98, 0, -59 / 98, 0, 32 / 49, -4 / 49],
    ]
)
_SBP_NORM = np.array([17 / 48, 59 / 48, 43 / 48, 49 / 48])


@lru_cache(maxsize=32)
def sbp_operator(npts: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal-norm SBP first derivative on ``npts`` equispaced nodes.

    Returns ``(D, w)`` with ``diag(w) D + D^T diag(w) = diag(-1, 0, ..., 0, 1)``.
    """
    if npts < 9:
        raise ValueError("SBP operator needs at least 9 nodes")
    D = np.zeros((npts, npts))
    for i in range(4, npts - 4):
        D[i, i - 2 : i + 3] = [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12]
    D[:4, :6] = _SBP_BLOCK
    D[-4:, -6:] = -_SBP_BLOCK[::-1, ::-1]
    w = np.ones(npts)
    w[:4] = _SBP_NORM
    w[-4:] = _SBP_NORM[::-1]
    D.setflags(write=False)
    w.setflags(write=False)
    return D / h, w * h


def _apply_along(mat: np.ndarray, a: np.ndarray, ax: int) -> np.ndarray:
    a = np.moveaxis(a, ax, -1)
    return np.moveaxis(a @ mat.T, -1, ax)


# ---------------------------------------------------------------------------
# differential operators


def wavenumbers(grid: Grid3, axis: int, shift: float = 0.0) -> np.ndarray:
    """Angular FFT wavenumbers along ``axis`` (optionally Bloch-shifted)."""
    n = grid.shape[axis]
    k = 2 * np.pi * np.fft.fftfreq(n, d=grid.spacing[axis])
    return k + shift * 2 * np.pi / grid.extent[axis]


def partial(a: np.ndarray, axis: int, grid: Grid3, scheme: str = "fd2") -> np.ndarray:
    """Derivative along spatial ``axis`` (0, 1 or 2) of an array on ``grid``."""
    grid.check_array(a)
    ax = a.ndim - 3 + axis
    h = grid.spacing[axis]
    if scheme == "fd2":
        return np.gradient(a, h, axis=ax, edge_order=2)
    if scheme == "sbp":
        if grid.centering != "node":
            raise ValueError("SBP derivatives need a node-centred grid")
        D, _ = sbp_operator(grid.shape[axis], h)
        return _apply_along(D, a, ax)
    if scheme == "spectral":
        k = wavenumbers(grid, axis)
        n = grid.shape[axis]
        if n % 2 == 0:
            k[n // 2] = 0.0
        shape = [1] * a.ndim
        shape[ax] = n
        return np.fft.ifft(np.fft.fft(a, axis=ax) * (1j * k).reshape(shape), axis=ax)
    raise ValueError(f"unknown scheme {scheme!r}")


def grad(f: np.ndarray, grid: Grid3, scheme: str = "fd2") -> np.ndarray:
    return np.stack([partial(f, i, grid, scheme) for i in range(3)], axis=-4)


def div(u: np.ndarray, grid: Grid3, scheme: str = "fd2") -> np.ndarray:
    _check_vector(u)
    return sum(partial(u[..., i, :, :, :], i, grid, scheme) for i in range(3))


def curl(u: np.ndarray, grid: Grid3, scheme: str = "fd2") -> np.ndarray:
    _check_vector(u)
    c = lambda i: u[..., i, :, :, :]  # noqa: E731
    d = lambda f, j: partial(f, j, grid, scheme)  # noqa: E731
    return np.stack(
        [d(c(2), 1) - d(c(1), 2), d(c(0), 2) - d(c(2), 0), d(c(1), 0) - d(c(0), 1)],
        axis=-4,
    )


def _second_difference(a: np.ndarray, ax: int, h: float) -> np.ndarray:
    out = np.empty_like(a)
    a0 = np.moveaxis(a, ax, 0)
    o0 = np.moveaxis(out, ax, 0)
    o0[1:-1] = a0[2:] - 2 * a0[1:-1] + a0[:-2]
    o0[0] = 2 * a0[0] - 5 * a0[1] + 4 * a0[2] - a0[3]
    o0[-1] = 2 * a0[-1] - 5 * a0[-2] + 4 * a0[-3] - a0[-4]
    return out / h**2


def laplacian(f: np.ndarray, grid: Grid3, scheme: str = "fd2") -> np.ndarray:
    """Laplacian; ``fd2`` uses the compact 3-point stencil per axis."""
    grid.check_array(f)
    if scheme == "fd2":
        return sum(_second_difference(f, f.ndim - 3 + i, grid.spacing[i]) for i in range(3))
    if scheme == "spectral":
        fh = np.fft.fftn(f, axes=(-3, -2, -1))
        k2 = sum(
            wavenumbers(grid, i).reshape([-1 if j == i else 1 for j in range(3)]) ** 2
            for i in range(3)
        )
        return np.fft.ifftn(-k2 * fh, axes=(-3, -2, -1))
    return sum(partial(partial(f, i, grid, scheme), i, grid, scheme) for i in range(3))


def hessian(f: np.ndarray, grid: Grid3, scheme: str = "fd2") -> np.ndarray:
    """Matrix of second derivatives, shape ``(3, 3, *shape)``."""
    g = grad(f, grid, scheme)
    H = np.stack([grad(g[i], grid, scheme) for i in range(3)])
    if scheme == "fd2":
        for i in range(3):
            H[i, i] = _second_difference(f, f.ndim - 3 + i, grid.spacing[i])
    return 0.5 * (H + np.swapaxes(H, 0, 1))


def diff_op(f: np.ndarray, which: str, grid: Grid3, scheme: str = "fd2") -> np.ndarray:
    ops = {"grad": grad, "div": div, "curl": curl, "laplacian": laplacian}
    if which not in ops:
        raise ValueError(f"unknown operator {which!r}")
    return ops[which](f, grid, scheme)


def _check_vector(u: np.ndarray) -> None:
    if u.ndim < 4 or u.shape[-4] != 3:
        raise GridMismatch(f"expected a vector field, got shape {u.shape}")


# ---------------------------------------------------------------------------
# augmented 8-component field


@dataclass(frozen=True)
class AugmentedField:
    """The 8-component state ``(f1, u1, f2, u2)`` stored as one array.

    Slot order is ``h, H, e, E``: scalar, vector, scalar, vector.
    """

    data: np.ndarray
    grid: Grid3

    def __post_init__(self):
        if self.data.shape[0] != 8:
            raise GridMismatch(f"augmented field needs 8 components, got {self.data.shape}")
        self.grid.check_array(self.data)

    @classmethod
    def from_parts(cls, f1, u1, f2, u2, grid: Grid3) -> "AugmentedField":
        shape = grid.shape
        vec = lambda u: np.reshape(u, (3, 1, 1, 1)) if np.ndim(u) == 1 else u  # noqa: E731
        parts = [
            np.broadcast_to(f1, shape)[None],
            np.broadcast_to(vec(u1), (3, *shape)),
            np.broadcast_to(f2, shape)[None],
            np.broadcast_to(vec(u2), (3, *shape)),
        ]
        return cls(np.concatenate(parts).astype(complex), grid)

    @classmethod
    def zeros(cls, grid: Grid3) -> "AugmentedField":
        return cls(np.zeros((8, *grid.shape), complex), grid)

    f1 = property(lambda self: self.data[0])
    u1 = property(lambda self: self.data[1:4])
    f2 = property(lambda self: self.data[4])
    u2 = property(lambda self: self.data[5:8])

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, AugmentedField):
            self.grid.check_same(other.grid)
            return other.data
        return other

    def __add__(self, other):
        return AugmentedField(self.data + self._coerce(other), self.grid)

    def __sub__(self, other):
        return AugmentedField(self.data - self._coerce(other), self.grid)

    def __mul__(self, c):
        return AugmentedField(self.data * c, self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return AugmentedField(-self.data, self.grid)


# ---------------------------------------------------------------------------
# volume norms


def inner(a: np.ndarray, b: np.ndarray, grid: Grid3, weights: np.ndarray | None = None) -> complex:
    """Quadrature of ``sum_components a * conj(b)``."""
    w = grid.quadrature_weights() if weights is None else weights
    return complex(np.sum(w * np.sum(np.reshape(a * np.conj(b), (-1, *grid.shape)), axis=0)))


def l2_norm(a: np.ndarray, grid: Grid3) -> float:
    return float(np.sqrt(max(inner(a, a, grid).real, 0.0)))


def weighted_l2_norm(a: np.ndarray, grid: Grid3, delta: float) -> float:
    """``(int (1 + |x|^2)^delta |a|^2)^{1/2}``."""
    x = grid.mesh()
    w = grid.quadrature_weights() * (1 + np.sum(x**2, axis=0)) ** delta
    return float(np.sqrt(inner(a, a, grid, w).real))


def sobolev_norm(a: np.ndarray, grid: Grid3, s: float, periodic: bool = False) -> float:
    """``H^s`` norm with symbol ``(1 + |xi|^2)^{s/2}``.

    Non-periodic fields are zero-padded to twice the box, which requires
    them to vanish near the box boundary.
    """
    grid.check_array(a)
    a = np.reshape(a, (-1, *grid.shape))
    if not periodic:
        edge = max(
            np.abs(np.take(a, idx, axis=ax)).max()
            for ax in (1, 2, 3)
            for idx in (0, -1)
        )
        scale = np.abs(a).max()
        if scale > 0 and edge > 1e-6 * scale:
            raise NonCompactSupport(f"field is {edge / scale:.2e} of its max at the box edge")
        a = np.pad(a, [(0, 0)] + [(0, m) for m in grid.shape])
    shape = a.shape[1:]
    k2 = 0.0
    for i in range(3):
        k = 2 * np.pi * np.fft.fftfreq(shape[i], d=grid.spacing[i])
        k2 = k2 + k.reshape([-1 if j == i else 1 for j in range(3)]) ** 2
    F = np.fft.fftn(a, axes=(1, 2, 3))
    total = np.sum((1 + k2) ** s * np.sum(np.abs(F) ** 2, axis=0))
    return float(np.sqrt(grid.cell_volume * total / np.prod(shape)))


def besov_plane_norm(values: np.ndarray, spacing: tuple[float, float], s: float) -> float:
    """Boundary norm of samples on a flat facet, zero-padded 2-D Fourier symbol."""
    return float(np.linalg.norm(_plane_features(values, spacing, s)))


def _plane_features(values: np.ndarray, spacing, s: float) -> np.ndarray:
    """Weighted Fourier coefficients whose Euclidean norm is the facet norm.

    ``values`` has shape ``(..., n_a, n_b)``; leading axes are components.
    """
    na, nb = values.shape[-2:]
    padded = np.zeros((*values.shape[:-2], 2 * na, 2 * nb), complex)
    padded[..., :na, :nb] = values
    ka = 2 * np.pi * np.fft.fftfreq(2 * na, d=spacing[0])
    kb = 2 * np.pi * np.fft.fftfreq(2 * nb, d=spacing[1])
    symbol = (1 + ka[:, None] ** 2 + kb[None, :] ** 2) ** (s / 2)
    scale = np.sqrt(spacing[0] * spacing[1] / (4 * na * nb))
    return (np.fft.fft2(padded) * symbol * scale).ravel()


# ---------------------------------------------------------------------------
# boundary faces and traces


def tangential_axes(axis: int) -> tuple[int, int]:
    return tuple(j for j in range(3) if j != axis)


@dataclass(frozen=True)
class BoundaryFaces:
    """Faces separating inside cells of a mask from outside cells.

    Arrays are indexed by face: ``cell`` is the inside cell, ``axis`` the
    normal axis and ``side`` the sign of the outward normal.
    """

    grid: Grid3
    cell: np.ndarray
    axis: np.ndarray
    side: np.ndarray
    gamma0: np.ndarray
    inside: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_mask(cls, grid: Grid3, inside: np.ndarray, gamma0_test=None) -> "BoundaryFaces":
        """Collect boundary faces; ``gamma0_test(centers, axis, side)`` tags Γ₀ faces."""
        if grid.centering != "cell":
            raise GridMismatch("boundary faces need a cell-centred grid")
        cells, axes, sides = [], [], []
        for ax in range(3):
            for sd in (-1, 1):
                nb = np.zeros_like(inside)
                src = [slice(None)] * 3
                dst = [slice(None)] * 3
                if sd > 0:
                    src[ax], dst[ax] = slice(1, None), slice(None, -1)
                else:
                    src[ax], dst[ax] = slice(None, -1), slice(1, None)
                nb[tuple(dst)] = inside[tuple(src)]
                idx = np.argwhere(inside & ~nb)
                cells.append(idx)
                axes.append(np.full(len(idx), ax))
                sides.append(np.full(len(idx), sd))
        cell = np.concatenate(cells)
        axis = np.concatenate(axes)
        side = np.concatenate(sides)
        faces = cls(grid, cell, axis, side, np.zeros(len(cell), bool), inside)
        if gamma0_test is not None:
            tag = np.asarray(gamma0_test(faces.center, axis, side), bool)
            faces = cls(grid, cell, axis, side, tag, inside)
        return faces

    def __len__(self) -> int:
        return len(self.axis)

    @property
    def normal(self) -> np.ndarray:
        N = np.zeros((len(self), 3))
        N[np.arange(len(self)), self.axis] = self.side
        return N

    @property
    def center(self) -> np.ndarray:
        h = np.array(self.grid.spacing)
        c = np.array(self.grid.lo) + (self.cell + 0.5) * h
        c[np.arange(len(self)), self.axis] += 0.5 * self.side * h[self.axis]
        return c

    @property
    def area(self) -> np.ndarray:
        h = np.array(self.grid.spacing)
        return np.prod(h) / h[self.axis]

    def facets(self) -> dict[tuple[int, int, int], np.ndarray]:
        """Face indices grouped by ``(axis, side, plane index)``."""
        plane = self.cell[np.arange(len(self)), self.axis] + (self.side > 0)
        keys = np.stack([self.axis, self.side, plane], axis=1)
        out: dict = {}
        for key in np.unique(keys, axis=0):
            sel = np.flatnonzero(np.all(keys == key, axis=1))
            out[tuple(int(v) for v in key)] = sel
        return out

    def select(self, mask: np.ndarray) -> "BoundaryFaces":
        return BoundaryFaces(
            self.grid, self.cell[mask], self.axis[mask], self.side[mask], self.gamma0[mask], self.inside
        )


@dataclass(frozen=True)
class BoundaryTrace:
    """Tangential vector samples on boundary faces.

    ``tangential[m]`` holds the two components along ``tangential_axes``
    of face ``m``'s normal axis; ``div`` optionally holds the surface
    divergence.  ``region`` is ``"all"``, ``"gamma"`` or ``"gamma0"``.
    """

    faces: BoundaryFaces
    tangential: np.ndarray
    div: np.ndarray | None = None
    region: str = "all"

    def __post_init__(self):
        if self.tangential.shape != (len(self.faces), 2):
            raise GridMismatch("trace samples do not match the face set")

    @classmethod
    def from_ambient(cls, faces: BoundaryFaces, vec: np.ndarray, div=None, region="all"):
        """Build from ambient 3-vectors, discarding the normal component."""
        t = np.empty((len(faces), 2), complex)
        for ax in range(3):
            sel = faces.axis == ax
            t[sel] = vec[sel][:, list(tangential_axes(ax))]
        return cls(faces, t, div, region)

    def ambient(self) -> np.ndarray:
        v = np.zeros((len(self.faces), 3), complex)
        for ax in range(3):
            sel = self.faces.axis == ax
            v[np.ix_(sel, list(tangential_axes(ax)))] = self.tangential[sel]
        return v

    def restrict(self, region: str) -> "BoundaryTrace":
        """Zero the samples outside ``region`` (``"gamma"`` or ``"gamma0"``)."""
        keep = ~self.faces.gamma0 if region == "gamma" else self.faces.gamma0
        t = np.where(keep[:, None], self.tangential, 0)
        d = None if self.div is None else np.where(keep, self.div, 0)
        return BoundaryTrace(self.faces, t, d, region)

    def __add__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        d = None if self.div is None or other.div is None else self.div + other.div
        return BoundaryTrace(self.faces, self.tangential + other.tangential, d, self.region)

    def scale(self, c: complex) -> "BoundaryTrace":
        d = None if self.div is None else c * self.div
        return BoundaryTrace(self.faces, c * self.tangential, d, self.region)


def _facet_arrays(faces: BoundaryFaces, key, sel, values: np.ndarray) -> np.ndarray:
    """Scatter per-face ``values`` (shape ``(m, c)``) onto the facet plane."""
    ax = key[0]
    a, b = tangential_axes(ax)
    n = faces.grid.n
    out = np.zeros((values.shape[1], n[a], n[b]), complex)
    out[:, faces.cell[sel, a], faces.cell[sel, b]] = values[sel].T
    return out


def facet_surface_divergence(trace: BoundaryTrace) -> np.ndarray:
    """Surface divergence by 2-D finite differences within each facet.

    Samples outside a facet count as zero, so faces on a facet rim see the
    jump of the zero extension.
    """
    faces = trace.faces
    out = np.zeros(len(faces), complex)
    h = faces.grid.spacing
    for key, sel in faces.facets().items():
        a, b = tangential_axes(key[0])
        arr = _facet_arrays(faces, key, sel, trace.tangential)
        d = np.zeros(arr.shape[1:], complex)
        for comp, (axis2d, hh) in enumerate(((0, h[a]), (1, h[b]))):
            if arr.shape[1 + axis2d] >= 3:
                d += np.gradient(arr[comp], hh, axis=axis2d, edge_order=2)
        out[sel] = d[faces.cell[sel, a], faces.cell[sel, b]]
    return out


def th_features(trace: BoundaryTrace, s: float = -0.5) -> np.ndarray:
    """Feature vector whose Euclidean inner product is the TH inner product.

    Per flat facet the squared norm is the ``B^s`` norm squared of the
    tangential samples plus that of the surface divergence.  Facet
    contributions are summed.
    """
    faces = trace.faces
    div = trace.div if trace.div is not None else facet_surface_divergence(trace)
    vals = np.concatenate([trace.tangential, div[:, None]], axis=1)
    h = faces.grid.spacing
    parts = []
    for key, sel in faces.facets().items():
        a, b = tangential_axes(key[0])
        parts.append(_plane_features(_facet_arrays(faces, key, sel, vals), (h[a], h[b]), s))
    return np.concatenate(parts) if parts else np.zeros(0, complex)


def th_norm(trace: BoundaryTrace) -> float:
    return float(np.linalg.norm(th_features(trace)))


def norm(a, space: str, grid: Grid3 | None = None, **kw) -> float:
    """Dispatch to the norm named by ``space``.

    ``space`` is one of ``L2``, ``Hs`` (needs ``s``), ``H-1``, ``L2_delta``
    (needs ``delta``), ``Bs`` (facet array, needs ``spacing`` and ``s``)
    or ``TH`` (a :class:`BoundaryTrace`).
    """
    if space == "L2":
        return l2_norm(a, grid)
    if space == "Hs":
        return sobolev_norm(a, grid, kw["s"], kw.get("periodic", False))
    if space == "H-1":
        return sobolev_norm(a, grid, -1.0, kw.get("periodic", False))
    if space == "L2_delta":
        return weighted_l2_norm(a, grid, kw["delta"])
    if space == "Bs":
        return besov_plane_norm(a, kw["spacing"], kw["s"])
    if space == "TH":
        return th_norm(a)
    raise UnsupportedSpace(f"unsupported space {space!r}")


def _face_extrapolate(u: np.ndarray, faces: BoundaryFaces) -> np.ndarray:
    """Linear extrapolation of cell samples ``u`` (``(c, *shape)``) to faces."""
    c = faces.cell
    inner_cell = c.copy()
    inner_cell[np.arange(len(faces)), faces.axis] -= faces.side
    n = np.array(faces.grid.n)
    ok = np.all((inner_cell >= 0) & (inner_cell < n), axis=1)
    ok &= _inside_at(faces, inner_cell)
    v0 = u[:, c[:, 0], c[:, 1], c[:, 2]].T
    ic = np.where(ok[:, None], inner_cell, c)
    v1 = u[:, ic[:, 0], ic[:, 1], ic[:, 2]].T
    return np.where(ok[:, None], 1.5 * v0 - 0.5 * v1, v0)


def _inside_at(faces: BoundaryFaces, cells: np.ndarray) -> np.ndarray:
    inside = faces.inside
    if inside is None:
        return np.ones(len(cells), bool)
    n = np.array(faces.grid.n)
    cl = np.clip(cells, 0, n - 1)
    return inside[cl[:, 0], cl[:, 1], cl[:, 2]]


def trace(u: np.ndarray, faces: BoundaryFaces, which: str = "tangential", scheme: str = "fd2"):
    """Tangential trace ``N x u`` or surface divergence ``-N . curl u``.

    ``u`` is a cell-centred vector field on ``faces.grid``; face values are
    extrapolated linearly from the two nearest inside cells.
    """
    grid = faces.grid
    grid.check_array(u)
    N = faces.normal
    if which == "tangential":
        ub = _face_extrapolate(u, faces)
        return BoundaryTrace.from_ambient(faces, np.cross(N, ub))
    if which == "surface_divergence":
        cb = _face_extrapolate(curl(u, grid, scheme), faces)
        return -np.sum(N * cb, axis=1)
    raise ValueError(f"unknown trace {which!r}")
