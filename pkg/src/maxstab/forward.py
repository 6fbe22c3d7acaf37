"""Time-harmonic Maxwell solver, Cauchy data and the pseudo-distance δ̂_C.

Discretization: Yee / finite integration on a cell mask.  ``E`` lives on
cell edges (tangential component at the edge midpoint), ``H`` on faces.
With edge incidence ``C`` (faces x edges, scaled by 1/h) the curl-curl
equation ``curl(mu^-1 curl E) - omega^2 gamma E = 0`` becomes

    (C^T diag(1/mu_f) C - omega^2 diag(gamma_e)) E = 0

at interior edges, with ``E`` prescribed on boundary edges (tangential
data).  ``H = C E / (i omega mu_f)`` on faces.

Large systems use GMRES with a smoothed-aggregation AMG preconditioner on a
grad-div regularized operator.  The regularization adds
``diag(gamma) G S G^T diag(gamma)`` restricted to interior nodes, which
vanishes on the exact solution because ``G^T diag(gamma) E`` (discrete
``div(gamma E)``) is zero at interior nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.spatial import cKDTree

from .errors import (
    EmptySet,
    IdentityViolation,
    NearResonance,
    NonTangentialData,
    NormDegenerate,
)
from .fields import BoundaryFaces, BoundaryTrace, Grid3, facet_surface_divergence, tangential_axes, th_features
from .phantoms import CoefficientPair, quintic_ramp

RESONANCE_LIMIT = 1e12


# ---------------------------------------------------------------------------
# Yee operators


def _diff(m: int, h: float) -> sp.csr_matrix:
    return (sp.diags([-np.ones(m), np.ones(m)], [0, 1], shape=(m, m + 1)) / h).tocsr()


def _kron3(a, b, c) -> sp.csr_matrix:
    return sp.kron(a, sp.kron(b, c)).tocsr()


@dataclass(frozen=True)
class YeeGrid:
    """Edge, face and node bookkeeping for a cell grid."""

    grid: Grid3

    @property
    def n(self):
        return self.grid.n

    def edge_shape(self, a: int) -> tuple[int, int, int]:
        return tuple(m if i == a else m + 1 for i, m in enumerate(self.n))

    def face_shape(self, a: int) -> tuple[int, int, int]:
        return tuple(m + 1 if i == a else m for i, m in enumerate(self.n))

    @property
    def node_shape(self):
        return tuple(m + 1 for m in self.n)

    @cached_property
    def edge_offsets(self) -> np.ndarray:
        sizes = [int(np.prod(self.edge_shape(a))) for a in range(3)]
        return np.concatenate([[0], np.cumsum(sizes)])

    @cached_property
    def face_offsets(self) -> np.ndarray:
        sizes = [int(np.prod(self.face_shape(a))) for a in range(3)]
        return np.concatenate([[0], np.cumsum(sizes)])

    @property
    def n_edges(self) -> int:
        return int(self.edge_offsets[-1])

    @property
    def n_faces(self) -> int:
        return int(self.face_offsets[-1])

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.node_shape))

    def edge_index(self, a: int, idx: np.ndarray) -> np.ndarray:
        return self.edge_offsets[a] + np.ravel_multi_index(tuple(np.asarray(idx).T), self.edge_shape(a))

    def face_index(self, a: int, idx: np.ndarray) -> np.ndarray:
        return self.face_offsets[a] + np.ravel_multi_index(tuple(np.asarray(idx).T), self.face_shape(a))

    def _positions(self, shape, a, staggered: bool) -> np.ndarray:
        g = self.grid
        axes = []
        for i in range(3):
            h = g.spacing[i]
            if (i == a) == staggered:
                axes.append(g.lo[i] + (np.arange(shape[i]) + 0.5) * h)
            else:
                axes.append(g.lo[i] + np.arange(shape[i]) * h)
        return np.stack(np.meshgrid(*axes, indexing="ij")).reshape(3, -1)

    @cached_property
    def edge_positions(self) -> np.ndarray:
        return np.concatenate([self._positions(self.edge_shape(a), a, True) for a in range(3)], axis=1)

    @cached_property
    def edge_axis(self) -> np.ndarray:
        return np.concatenate([np.full(int(np.prod(self.edge_shape(a))), a) for a in range(3)])

    @cached_property
    def face_positions(self) -> np.ndarray:
        return np.concatenate([self._positions(self.face_shape(a), a, False) for a in range(3)], axis=1)

    @cached_property
    def node_positions(self) -> np.ndarray:
        g = self.grid
        axes = [g.lo[i] + np.arange(self.node_shape[i]) * g.spacing[i] for i in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij")).reshape(3, -1)

    @cached_property
    def curl(self) -> sp.csr_matrix:
        n0, n1, n2 = self.n
        h0, h1, h2 = self.grid.spacing
        I = sp.identity
        ex, ey, ez = (int(np.prod(self.edge_shape(a))) for a in range(3))
        Z = lambda r, c: sp.csr_matrix((r, c))  # noqa: E731
        fx, fy, fz = (int(np.prod(self.face_shape(a))) for a in range(3))
        Cx = sp.hstack([Z(fx, ex), -_kron3(I(n0 + 1), I(n1), _diff(n2, h2)), _kron3(I(n0 + 1), _diff(n1, h1), I(n2))])
        Cy = sp.hstack([_kron3(I(n0), I(n1 + 1), _diff(n2, h2)), Z(fy, ey), -_kron3(_diff(n0, h0), I(n1 + 1), I(n2))])
        Cz = sp.hstack([-_kron3(I(n0), _diff(n1, h1), I(n2 + 1)), _kron3(_diff(n0, h0), I(n1), I(n2 + 1)), Z(fz, ez)])
        return sp.vstack([Cx, Cy, Cz]).tocsr()

    @cached_property
    def grad(self) -> sp.csr_matrix:
        n0, n1, n2 = self.n
        h0, h1, h2 = self.grid.spacing
        I = sp.identity
        return sp.vstack(
            [
                _kron3(_diff(n0, h0), I(n1 + 1), I(n2 + 1)),
                _kron3(I(n0 + 1), _diff(n1, h1), I(n2 + 1)),
                _kron3(I(n0 + 1), I(n1 + 1), _diff(n2, h2)),
            ]
        ).tocsr()

    def face_edges(self, a: int, fidx: np.ndarray) -> dict[int, np.ndarray]:
        """Global edge indices bounding faces normal to ``a``; two per tangential axis."""
        fidx = np.asarray(fidx)
        out = {}
        for b in tangential_axes(a):
            c = [x for x in tangential_axes(a) if x != b][0]
            e0 = fidx.copy()
            e1 = fidx.copy()
            e1[:, c] += 1
            out[b] = np.stack([self.edge_index(b, e0), self.edge_index(b, e1)], axis=1)
        return out


# ---------------------------------------------------------------------------
# domain topology


@dataclass
class Topology:
    """Interior/boundary classification of edges and nodes for a cell mask."""

    yee: YeeGrid
    inside: np.ndarray
    faces: BoundaryFaces
    blocked_faces: np.ndarray | None = None  # (m, 4): axis, i, j, k of internal slit faces

    def __post_init__(self):
        y = self.yee
        pad = np.pad(self.inside, 1)
        interior_edge = []
        active_edge = []
        for a in range(3):
            shp = y.edge_shape(a)
            cnt = np.zeros(shp, int)
            others = tangential_axes(a)
            for da in (0, 1):
                for db in (0, 1):
                    sl = [None] * 3
                    sl[a] = slice(1, shp[a] + 1)
                    sl[others[0]] = slice(da, da + shp[others[0]])
                    sl[others[1]] = slice(db, db + shp[others[1]])
                    cnt += pad[tuple(sl)]
            interior_edge.append((cnt == 4).ravel())
            active_edge.append((cnt > 0).ravel())
        interior = np.concatenate(interior_edge)
        active = np.concatenate(active_edge)
        cnt = np.zeros(y.node_shape, int)
        for d0 in (0, 1):
            for d1 in (0, 1):
                for d2 in (0, 1):
                    cnt += pad[d0 : d0 + y.node_shape[0], d1 : d1 + y.node_shape[1], d2 : d2 + y.node_shape[2]]
        inode = (cnt == 8).ravel()
        if self.blocked_faces is not None and len(self.blocked_faces):
            for row in self.blocked_faces:
                a, idx = int(row[0]), row[1:]
                for b, es in y.face_edges(a, idx[None]).items():
                    interior[es.ravel()] = False
                corners = []
                t0, t1 = tangential_axes(a)
                for d0 in (0, 1):
                    for d1 in (0, 1):
                        c = np.array(idx)
                        c[t0] += d0
                        c[t1] += d1
                        corners.append(np.ravel_multi_index(tuple(c), y.node_shape))
                inode[corners] = False
        self.interior_edges = np.flatnonzero(interior)
        self.boundary_edges = np.flatnonzero(active & ~interior)
        self.interior_nodes = np.flatnonzero(inode)

    @cached_property
    def gamma0_edges(self) -> np.ndarray:
        """Boundary edges that touch a Γ₀ face."""
        f = self.faces
        sel = np.flatnonzero(f.gamma0)
        out = []
        for i in sel:
            a = int(f.axis[i])
            idx = f.cell[i].copy()
            idx[a] += f.side[i] > 0
            for es in self.yee.face_edges(a, idx[None]).values():
                out.append(es.ravel())
        if self.blocked_faces is not None:
            for row in self.blocked_faces:
                for es in self.yee.face_edges(int(row[0]), row[1:][None]).values():
                    out.append(es.ravel())
        return np.unique(np.concatenate(out)) if out else np.zeros(0, int)

    def face_global(self) -> np.ndarray:
        """Global face index of each boundary face."""
        f = self.faces
        out = np.empty(len(f), int)
        for a in range(3):
            sel = f.axis == a
            idx = f.cell[sel].copy()
            idx[:, a] += f.side[sel] > 0
            out[sel] = self.yee.face_index(a, idx)
        return out


def domain_topology(grid: Grid3, inside: np.ndarray, faces: BoundaryFaces, blocked=None) -> Topology:
    return Topology(YeeGrid(grid), inside, faces, blocked)


def topology_from_domain(domain) -> Topology:
    """Topology of a :class:`~maxstab.geometry.ValidatedDomain` (the domain ``U`` itself)."""
    return domain_topology(domain.grid, domain.inside, domain.faces)


# ---------------------------------------------------------------------------
# solver


@dataclass
class MaxwellSolution:
    """Edge electric field and derived quantities."""

    topo: Topology
    E_edges: np.ndarray
    omega: float
    mu_faces: np.ndarray
    gamma_edges: np.ndarray
    residual: float
    condition: float | None
    pair: CoefficientPair | None = None

    @property
    def yee(self) -> YeeGrid:
        return self.topo.yee

    @cached_property
    def curlE(self) -> np.ndarray:
        return self.yee.curl @ self.E_edges

    @cached_property
    def H_faces(self) -> np.ndarray:
        return self.curlE / (1j * self.omega * self.mu_faces)

    def E_cells(self) -> np.ndarray:
        """Cell-centred ``E``: average of the four parallel edges of each cell."""
        y = self.yee
        out = np.zeros((3, *y.n), complex)
        for a in range(3):
            Ea = self.E_edges[y.edge_offsets[a] : y.edge_offsets[a + 1]].reshape(y.edge_shape(a))
            b, c = tangential_axes(a)
            acc = 0
            for db in (0, 1):
                for dc in (0, 1):
                    sl = [slice(None)] * 3
                    sl[b] = slice(db, db + y.n[b])
                    sl[c] = slice(dc, dc + y.n[c])
                    acc = acc + Ea[tuple(sl)]
            out[a] = acc / 4
        return np.where(self.topo.inside, out, 0)

    def H_cells(self) -> np.ndarray:
        y = self.yee
        out = np.zeros((3, *y.n), complex)
        for a in range(3):
            Ha = self.H_faces[y.face_offsets[a] : y.face_offsets[a + 1]].reshape(y.face_shape(a))
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[a] = slice(0, -1)
            hi[a] = slice(1, None)
            out[a] = 0.5 * (Ha[tuple(lo)] + Ha[tuple(hi)])
        return np.where(self.topo.inside, out, 0)


def _amg_preconditioner(A_spd: sp.csr_matrix):
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(A_spd, symmetry="symmetric", max_coarse=500)
    M = ml.aspreconditioner()
    return sla.LinearOperator(A_spd.shape, matvec=lambda v: M @ v.real + 1j * (M @ v.imag), dtype=complex)


class MaxwellSolver:
    """Assembles and factors the system for one coefficient pair and frequency.

    ``method`` is ``"direct"``, ``"iterative"`` or ``"auto"`` (direct below
    ``direct_limit`` unknowns).  The factorization or preconditioner is
    reused for every right-hand side.
    """

    def __init__(
        self, topo: Topology, pair: CoefficientPair, omega: float | None = None, method: str = "auto",
        direct_limit: int = 8000, rtol: float = 1e-10, check_condition: bool = True,
    ):
        self.topo = topo
        self.pair = pair
        self.omega = pair.omega if omega is None else omega
        y = topo.yee
        self.mu_f = np.asarray(pair.mu(y.face_positions), complex)
        self.gamma_e = np.asarray(pair.gamma(y.edge_positions), complex)
        C = y.curl
        K = (C.T @ sp.diags(1 / self.mu_f) @ C - self.omega**2 * sp.diags(self.gamma_e)).tocsr()
        I, B = topo.interior_edges, topo.boundary_edges
        self.method = method
        if method == "auto":
            self.method = "direct" if len(I) <= direct_limit else "iterative"
        self.rtol = rtol
        self.condition = None
        if self.method == "direct":
            KI = K[I]
            self.K_II = KI[:, I].tocsc()
            self.K_IB = KI[:, B].tocsr()
            self.lu = sla.splu(self.K_II)
            if check_condition:
                self.condition = self._condition_indicator()
                if self.condition > RESONANCE_LIMIT:
                    raise NearResonance(f"condition indicator {self.condition:.3e}", condition=self.condition)
        else:
            G = y.grad[:, topo.interior_nodes]
            xn = y.node_positions[:, topo.interior_nodes]
            mu_n = np.asarray(pair.mu(xn), complex)
            ga_n = np.asarray(pair.gamma(xn), complex)
            Dg = sp.diags(self.gamma_e)
            R = Dg @ G @ sp.diags(1 / (mu_n * ga_n**2)) @ G.T @ Dg
            Kr = (K + R).tocsr()[I]
            self.K_II = Kr[:, I].tocsr()
            self.K_IB = Kr[:, B].tocsr()
            Dga = sp.diags(np.abs(self.gamma_e))
            Rs = Dga @ G @ sp.diags(1 / np.abs(mu_n * ga_n**2)) @ G.T @ Dga
            A = (C.T @ sp.diags(1 / np.abs(self.mu_f)) @ C + Rs + self.omega**2 * Dga).tocsr()[I][:, I].tocsr()
            self.M = _amg_preconditioner(A)
        self.K_full = K

    def _condition_indicator(self, iters: int = 30) -> float:
        """Ratio of largest to smallest singular value by power iterations."""
        A = self.K_II
        rng = np.random.default_rng(0)
        v = rng.standard_normal(A.shape[0]) + 0j
        smax = 0.0
        for _ in range(iters):
            w = A.conj().T @ (A @ v)
            smax = np.sqrt(np.linalg.norm(w) / np.linalg.norm(v))
            v = w / np.linalg.norm(w)
        v = rng.standard_normal(A.shape[0]) + 0j
        smin_inv = 0.0
        for _ in range(iters):
            w = self.lu.solve(self.lu.solve(v), trans="H")
            nw = np.linalg.norm(w)
            if not np.isfinite(nw):
                return np.inf
            smin_inv = np.sqrt(nw / np.linalg.norm(v))
            v = w / nw
        return float(smax * smin_inv)

    def boundary_values(self, data, region: str = "gamma") -> np.ndarray:
        """Tangential edge values on boundary edges.

        ``data`` is a callable ambient field ``g`` (then ``E_t = g . t_e``) or
        a :class:`BoundaryTrace` holding ``N x E``.  With ``region="gamma"``
        edges touching Γ₀ are set to zero.
        """
        y = self.topo.yee
        B = self.topo.boundary_edges
        if isinstance(data, BoundaryTrace):
            vals = _edges_from_trace(self.topo, data)
        else:
            x = y.edge_positions[:, B]
            g = np.asarray(data(x), complex)
            vals = g[y.edge_axis[B], np.arange(len(B))]
        if region == "gamma":
            vals = np.where(np.isin(B, self.topo.gamma0_edges), 0, vals)
        return vals

    def solve(self, data, region: str = "gamma") -> MaxwellSolution:
        bvals = self.boundary_values(data, region)
        rhs = -(self.K_IB @ bvals)
        if self.method == "direct":
            xI = self.lu.solve(rhs)
        else:
            if np.linalg.norm(rhs) == 0:
                xI = np.zeros(len(rhs), complex)
            else:
                xI, info = sla.gmres(self.K_II, rhs, M=self.M, rtol=self.rtol, restart=60, maxiter=40)
        E = np.zeros(self.topo.yee.n_edges, complex)
        E[self.topo.interior_edges] = xI
        E[self.topo.boundary_edges] = bvals
        r = self.K_full[self.topo.interior_edges] @ E
        scale = max(np.linalg.norm(self.K_IB @ bvals), 1e-300)
        res = float(np.linalg.norm(r) / scale) if np.any(bvals) else float(np.linalg.norm(r))
        return MaxwellSolution(self.topo, E, self.omega, self.mu_f, self.gamma_e, res, self.condition, self.pair)


def _edges_from_trace(topo: Topology, trace: BoundaryTrace) -> np.ndarray:
    """Edge values from face samples of ``T = N x E`` (``E_t = T x N``)."""
    f = trace.faces
    amb = trace.ambient()
    N = f.normal
    if np.any(np.abs(np.sum(amb * N, axis=1)) > 1e-12 * (np.abs(amb).max() + 1e-300)):
        raise NonTangentialData("trace has a normal component")
    if trace.region == "gamma" and np.any(np.abs(amb[f.gamma0]) > 0):
        raise NonTangentialData("trace is not supported in the closure of Γ")
    Et = np.cross(amb, N)
    y = topo.yee
    acc = np.zeros(y.n_edges, complex)
    cnt = np.zeros(y.n_edges)
    for a in range(3):
        sel = np.flatnonzero(f.axis == a)
        idx = f.cell[sel].copy()
        idx[:, a] += f.side[sel] > 0
        for b, es in y.face_edges(a, idx).items():
            for col in range(2):
                np.add.at(acc, es[:, col], Et[sel, b])
                np.add.at(cnt, es[:, col], 1)
    B = topo.boundary_edges
    return np.where(cnt[B] > 0, acc[B] / np.maximum(cnt[B], 1), 0)


def maxwell_forward_solve(topo: Topology, pair: CoefficientPair, omega: float | None, T, **kw) -> MaxwellSolution:
    """One-shot solve with tangential data ``T`` supported in the closure of Γ."""
    region = kw.pop("region", "gamma")
    return MaxwellSolver(topo, pair, omega, **kw).solve(T, region)


# ---------------------------------------------------------------------------
# Cauchy data


@dataclass(frozen=True)
class CauchyDatum:
    """``T = N x E`` on the whole boundary (zero on Γ₀) and ``S = N x H`` on Γ."""

    T: BoundaryTrace
    S: BoundaryTrace
    input_id: str = ""

    @cached_property
    def features_T(self) -> np.ndarray:
        return th_features(self.T)

    @cached_property
    def features(self) -> np.ndarray:
        return np.concatenate([self.features_T, th_features(self.S)])


@dataclass
class CauchyDataSet:
    data: list[CauchyDatum]
    coeff_id: str = ""
    omega: float = 1.0

    def __len__(self):
        return len(self.data)


def _cell_to_face(v: np.ndarray, f: BoundaryFaces) -> np.ndarray:
    c = f.cell
    v0 = v[:, c[:, 0], c[:, 1], c[:, 2]].T
    inner = c.copy()
    inner[np.arange(len(f)), f.axis] -= f.side
    n = np.array(f.grid.n)
    ok = np.all((inner >= 0) & (inner < n), axis=1)
    cl = np.clip(inner, 0, n - 1)
    if f.inside is not None:
        ok &= f.inside[cl[:, 0], cl[:, 1], cl[:, 2]]
    v1 = v[:, cl[:, 0], cl[:, 1], cl[:, 2]].T
    return np.where(ok[:, None], 1.5 * v0 - 0.5 * v1, v0)


def extract_cauchy(
    sol: MaxwellSolution, faces: BoundaryFaces | None = None, input_id: str = "", check: bool = True,
    tol_factor: float = 10.0,
) -> CauchyDatum:
    """Tangential traces and surface divergences on the boundary faces.

    ``Div T = -N . curl E`` is taken from the discrete face curl, so
    ``<N, mu H> = -(1/i omega) Div T`` holds exactly.  ``Div S`` uses 2-D
    differences on each facet and is checked against ``i omega <N, gamma E>``
    on faces away from facet rims.
    """
    topo = sol.topo
    f = faces or topo.faces
    y = topo.yee
    fg = topo.face_global()
    Et = np.zeros((len(f), 3), complex)
    for a in range(3):
        sel = np.flatnonzero(f.axis == a)
        idx = f.cell[sel].copy()
        idx[:, a] += f.side[sel] > 0
        for b, es in y.face_edges(a, idx).items():
            Et[sel, b] = sol.E_edges[es].mean(axis=1)
    N = f.normal
    T = BoundaryTrace.from_ambient(f, np.cross(N, Et))
    divT = -f.side * sol.curlE[fg]
    T = BoundaryTrace(f, T.tangential, divT)
    Hc = sol.H_cells()
    Hb = _cell_to_face(Hc, f)
    Hb[np.arange(len(f)), f.axis] = sol.H_faces[fg]
    S_full = BoundaryTrace.from_ambient(f, np.cross(N, Hb))
    divS = facet_surface_divergence(S_full)
    S_full = BoundaryTrace(f, S_full.tangential, divS)
    if check:
        _check_identities(sol, f, fg, T, S_full, tol_factor)
    S = S_full.restrict("gamma")
    return CauchyDatum(T, S, input_id)


def _rim_distance(f: BoundaryFaces) -> np.ndarray:
    """Number of faces to the nearest facet rim (0 on the rim)."""
    out = np.zeros(len(f), int)
    for key, sel in f.facets().items():
        a, b = tangential_axes(key[0])
        ca, cb = f.cell[sel, a], f.cell[sel, b]
        occ = np.zeros((f.grid.n[a] + 2, f.grid.n[b] + 2), bool)
        occ[ca + 1, cb + 1] = True
        from scipy.ndimage import distance_transform_cdt

        d = distance_transform_cdt(occ, metric="chessboard")
        out[sel] = d[ca + 1, cb + 1] - 1
    return out


def _check_identities(sol, f, fg, T, S, tol_factor):
    w = sol.omega
    lhs_m = f.side * sol.mu_faces[fg] * sol.H_faces[fg]
    rhs_m = -T.div / (1j * w)
    scale_m = np.abs(rhs_m).max() + 1e-300
    if np.abs(lhs_m - rhs_m).max() > 1e-9 * scale_m:
        raise IdentityViolation("magnetic normal-component identity fails")
    Ec = sol.E_cells()
    Eb = _cell_to_face(Ec, f)
    gamma_f = np.asarray(sol.pair.gamma(f.center.T), complex) if sol.pair is not None else 1.0
    En = np.sum(Eb * f.normal, axis=1) * gamma_f
    rhs_e = S.div / (1j * w)
    interior = _rim_distance(f) >= 2
    if not interior.any():
        return
    err = np.abs(En - rhs_e)[interior].max()
    scale = np.abs(rhs_e[interior]).max() + np.abs(En[interior]).max() + 1e-300
    L = float(np.min(f.grid.extent))
    if err > tol_factor * (f.grid.h / L) ** 2 * scale:
        raise IdentityViolation(f"electric normal-component identity off by {err / scale:.3e}")


# ---------------------------------------------------------------------------
# dictionary of boundary inputs


@dataclass(frozen=True)
class Dictionary:
    """Family of tangential boundary inputs (ambient vector fields).

    ``family`` is ``"bump"``, ``"planewave"`` or ``"mixed"``.  Inputs are
    tapered to vanish near Γ₀; ``patches`` optionally restricts bump centres
    to boxes ``(lo, hi)``.
    """

    family: str = "mixed"
    count: int = 24
    seed: int = 0
    width: float = 0.25
    wavenumber: float = 2.0
    taper: float = 0.2
    patches: tuple | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "Dictionary":
        return cls(
            d.get("family", "mixed"), int(d.get("count", 24)), int(d.get("seed", 0)),
            float(d.get("width", 0.25)), float(d.get("wavenumber", 2.0)), float(d.get("taper", 0.2)),
            None if d.get("patches") is None else tuple(tuple(map(tuple, p)) for p in d["patches"]),
        )

    def inputs(self, faces: BoundaryFaces) -> list[Callable]:
        rng = np.random.default_rng(self.seed)
        gamma_pts = faces.center[~faces.gamma0]
        if self.patches:
            keep = np.zeros(len(gamma_pts), bool)
            for lo, hi in self.patches:
                keep |= np.all((gamma_pts >= lo) & (gamma_pts <= hi), axis=1)
            gamma_pts = gamma_pts[keep]
        g0 = faces.center[faces.gamma0]
        tree = cKDTree(g0) if len(g0) else None
        ell = self.taper

        def taper(x):
            if tree is None:
                return 1.0
            d, _ = tree.query(np.reshape(x, (3, -1)).T)
            return (1 - quintic_ramp(d / ell)).reshape(np.shape(x)[1:])

        out = []
        for i in range(self.count):
            kind = self.family if self.family != "mixed" else ("bump" if i % 2 == 0 else "planewave")
            if kind == "bump":
                c = gamma_pts[rng.integers(len(gamma_pts))]
                p = rng.standard_normal(3) + 1j * rng.standard_normal(3)
                out.append(_Bump(c, p, self.width, taper))
            else:
                d = rng.standard_normal(3)
                d /= np.linalg.norm(d)
                p = rng.standard_normal(3)
                p -= d * (p @ d)
                p /= np.linalg.norm(p)
                out.append(_PlaneWave(d * self.wavenumber * rng.uniform(0.5, 1.5), p + 0j, taper))
        return out


@dataclass(frozen=True)
class _Bump:
    center: np.ndarray
    pol: np.ndarray
    width: float
    taper: Callable

    def __call__(self, x):
        r2 = np.sum((x - self.center.reshape((3,) + (1,) * (x.ndim - 1))) ** 2, axis=0)
        return self.pol.reshape((3,) + (1,) * (x.ndim - 1)) * (np.exp(-r2 / (2 * self.width**2)) * self.taper(x))


@dataclass(frozen=True)
class _PlaneWave:
    k: np.ndarray
    pol: np.ndarray
    taper: Callable

    def __call__(self, x):
        ph = np.exp(1j * np.tensordot(self.k, x, axes=(0, 0)))
        return self.pol.reshape((3,) + (1,) * (x.ndim - 1)) * (ph * self.taper(x))


def cauchy_data_set(
    solver: MaxwellSolver, inputs: Sequence[Callable], coeff_id: str = "", check: bool = True
) -> CauchyDataSet:
    data = []
    for i, g in enumerate(inputs):
        sol = solver.solve(g, "gamma")
        data.append(extract_cauchy(sol, input_id=f"{coeff_id}:{i}", check=check))
    return CauchyDataSet(data, coeff_id, solver.omega)


# ---------------------------------------------------------------------------
# pseudo-distance


def _one_sided(Ck: CauchyDataSet, Cj: CauchyDataSet, rel_drop: float = 1e-10) -> float:
    Tk = np.stack([d.features_T for d in Ck.data], axis=1)
    Xk = np.stack([d.features for d in Ck.data], axis=1)
    Xj = np.stack([d.features for d in Cj.data], axis=1)
    norms = np.linalg.norm(Tk, axis=0)
    if np.any(norms < 1e-14):
        raise NormDegenerate("a datum has vanishing T norm")
    G = Tk.conj().T @ Tk
    lam, V = np.linalg.eigh(G)
    keep = lam > rel_drop * lam.max()
    B = V[:, keep] / np.sqrt(lam[keep])
    Qj, _ = np.linalg.qr(Xj)
    Y = Xk @ B
    R = Y - Qj @ (Qj.conj().T @ Y)
    return float(np.linalg.svd(R, compute_uv=False)[0])


def cauchy_distance(C1: CauchyDataSet, C2: CauchyDataSet) -> float:
    """Max over both orderings of ``sup_{|T_k|=1} inf_{span C_j}`` product-norm distance."""
    if len(C1) == 0 or len(C2) == 0:
        raise EmptySet("Cauchy data sets must be non-empty")
    return max(_one_sided(C1, C2), _one_sided(C2, C1))


def save_cauchy_set(cs: CauchyDataSet, directory) -> None:
    """Archive: one raw snapshot per trace (tangential pair and divergence) plus a JSON manifest."""
    from pathlib import Path

    from .io import write_raw

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    manifest = {"coeff_id": cs.coeff_id, "omega": cs.omega, "data": []}
    for i, datum in enumerate(cs.data):
        entry = {"input_id": datum.input_id}
        for name, tr in (("T", datum.T), ("S", datum.S)):
            div = tr.div if tr.div is not None else facet_surface_divergence(tr)
            arr = np.concatenate([tr.tangential, div[:, None]], axis=1).T
            path = d / f"datum{i:03d}_{name}.raw"
            write_raw(path, arr.reshape(3, len(tr.faces), 1, 1), h=tr.faces.grid.h)
            entry[name] = path.name
        manifest["data"].append(entry)
    with open(d / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
