"""Reduced potentials, the boundary pairing identity, Fourier recovery,
the parameter schedule, Carleman estimates and the stability experiment.

The reduced potentials are

    f = 1_Omega (1/2 Lap(a1 - a2) + 1/4 (grad a1.grad a1 - grad a2.grad a2) + k2^2 - k1^2)

with ``a = log gamma`` (and ``g`` with ``b = log mu``), ``k^2 = omega^2 mu gamma``.
Dot products are bilinear (no conjugation) throughout.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy import integrate, ndimage

from . import fields as F
from .cgo import CgoBox, ZetaPair, build_cgo, choose_zetas
from .errors import (
    DegenerateDelta,
    GridMismatch,
    SolutionResidualTooLarge,
    WeightOverflow,
    X0InsideDomain,
)
from .fields import Grid3
from .phantoms import CoefficientPair
from .reduction import P_A, PotentialMatrices, SampledCoefficients, apply_P, apply_dense

RL_CONSTANT = 3 * np.sqrt(3)
SHIFT_DIRECTIONS = np.array(
    [(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1) if (i, j, k) != (0, 0, 0)], float
)
SHIFT_DIRECTIONS /= np.linalg.norm(SHIFT_DIRECTIONS, axis=1, keepdims=True)


def fit_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def box_mask(grid: Grid3, lo, hi) -> np.ndarray:
    """Grid points strictly inside the box ``[lo, hi]`` (up to a tiny tolerance)."""
    x = grid.mesh()
    tol = 1e-9 * grid.h
    m = np.ones(grid.shape, bool)
    for i in range(3):
        m &= (x[i] > lo[i] - tol) & (x[i] < hi[i] + tol)
    return m


# ---------------------------------------------------------------------------
# reduced potentials


@dataclass(frozen=True)
class ReducedPotentials:
    f: np.ndarray
    g: np.ndarray
    grid: Grid3
    mask: np.ndarray

    def l2(self) -> tuple[float, float]:
        return F.l2_norm(self.f, self.grid), F.l2_norm(self.g, self.grid)

    def fourier(self, xi) -> tuple[complex, complex]:
        """``int e^{-i xi.x} (f, g) dV`` by the grid quadrature."""
        ph = np.exp(-1j * np.tensordot(np.asarray(xi, float), self.grid.mesh(), axes=(0, 0)))
        w = self.grid.quadrature_weights()
        return complex(np.sum(w * ph * self.f)), complex(np.sum(w * ph * self.g))


def _reduced(log1, log2, k1sq, k2sq, grid, scheme):
    g1 = F.grad(log1, grid, scheme)
    g2 = F.grad(log2, grid, scheme)
    lap = F.laplacian(log1 - log2, grid, scheme)
    dot = lambda a: a[0] * a[0] + a[1] * a[1] + a[2] * a[2]  # noqa: E731
    return 0.5 * lap + 0.25 * (dot(g1) - dot(g2)) + (k2sq - k1sq)


def fg_fields(
    c1: SampledCoefficients, c2: SampledCoefficients, mask: np.ndarray | None = None, scheme: str = "fd2"
) -> ReducedPotentials:
    """``f`` and ``g`` from two sampled pairs on a shared grid, zero outside ``mask``."""
    c1.grid.check_same(c2.grid)
    grid = c1.grid
    mask = np.ones(grid.shape, bool) if mask is None else mask
    if mask.shape != grid.shape:
        raise GridMismatch("mask does not match the grid")
    k1sq, k2sq = c1.kappa**2, c2.kappa**2
    f = _reduced(c1.alpha, c2.alpha, k1sq, k2sq, grid, scheme)
    g = _reduced(c1.beta, c2.beta, k1sq, k2sq, grid, scheme)
    return ReducedPotentials(np.where(mask, f, 0), np.where(mask, g, 0), grid, mask)


# ---------------------------------------------------------------------------
# pairing identity


@dataclass
class PairingResult:
    interior_value: complex
    boundary_value: complex
    gap: float
    boundary_gamma: complex
    boundary_gamma0: complex
    residual_terms: tuple[complex, complex]
    norm_Z: float
    norm_Y: float

    @property
    def relative_gap(self) -> float:
        return self.gap / max(self.norm_Z * self.norm_Y, 1e-300)


def sbp_weights(grid: Grid3) -> np.ndarray:
    """Tensor SBP quadrature weights on a node grid."""
    ws = [F.sbp_operator(grid.shape[i], grid.spacing[i])[1] for i in range(3)]
    ws = [np.diag(w) if np.ndim(w) == 2 else np.asarray(w) for w in ws]
    return ws[0][:, None, None] * ws[1][None, :, None] * ws[2][None, None, :]


def _face_pairing(U: np.ndarray, V: np.ndarray, grid: Grid3, axis: int, side: int) -> complex:
    """``<U, P_N V>`` over one face of the box, SBP tangential weights."""
    ws = [F.sbp_operator(grid.shape[i], grid.spacing[i])[1] for i in range(3)]
    ws = [np.diag(w) if np.ndim(w) == 2 else np.asarray(w) for w in ws]
    a, b = F.tangential_axes(axis)
    wt = ws[a][:, None] * ws[b][None, :]
    idx = -1 if side > 0 else 0
    Uf = np.take(U, idx, axis=1 + axis)
    Vf = np.take(V, idx, axis=1 + axis)
    N = np.zeros((3, 1, 1))
    N[axis] = side
    PNV = P_A(N).apply(Vf)
    return complex(np.sum(wt * np.sum(Uf * np.conj(PNV), axis=0)))


def pairing_identity(
    Z1: np.ndarray, Ycal2: np.ndarray, c1: SampledCoefficients, c2: SampledCoefficients,
    gamma0: Sequence[tuple[int, int]] = ((2, 1),), scheme: str = "sbp", solution_tol: float | None = None,
) -> PairingResult:
    """Both sides of ``<(Q1 - Q2) Z1, Ycal2> = <(W1^t - W2^t) Z1 + Y1, P_N Ycal2>_bdry + ...``.

    The SBP discretization integrates by parts exactly, so the discrete
    identity holds up to the commutation error of the closed-form
    potentials.  Residuals ``F1 = (P + W1) Y1`` and ``G2 = (P + W2*) Ycal2``
    enter the boundary side explicitly; with ``solution_tol`` set, they must
    be small relative to the fields.  ``gamma0`` lists the ``(axis, side)``
    faces forming Γ₀.
    """
    c1.grid.check_same(c2.grid)
    g = c1.grid
    if g.centering != "node":
        raise GridMismatch("the pairing identity needs a node-centred grid")
    w = sbp_weights(g)
    ip = lambda a, b: complex(np.sum(w * np.sum(a * np.conj(b), axis=0)))  # noqa: E731
    p1, p2 = PotentialMatrices(c1, scheme), PotentialMatrices(c2, scheme)
    W1, W2 = p1.W, p2.W
    P = lambda Y: apply_P(Y, g, scheme)  # noqa: E731
    Y1 = P(Z1) - W1.T.apply(Z1)
    F1 = P(Y1) + W1.apply(Y1)
    dZ = W1.T.apply(Z1) - W2.T.apply(Z1)
    Y1p = Y1 + dZ
    G2 = P(Ycal2) + W2.H.apply(Ycal2)
    if solution_tol is not None:
        nF = np.sqrt(abs(ip(F1, F1)) / max(abs(ip(Y1, Y1)), 1e-300))
        nG = np.sqrt(abs(ip(G2, G2)) / max(abs(ip(Ycal2, Ycal2)), 1e-300))
        if max(nF, nG) > solution_tol:
            raise SolutionResidualTooLarge(f"solution residuals {nF:.2e}, {nG:.2e} exceed {solution_tol:.1e}")
    interior = ip(apply_dense(p1["Q"], Z1) - apply_dense(p2["Q"], Z1), Ycal2)
    b_g, b_g0 = 0j, 0j
    g0 = {tuple(x) for x in gamma0}
    for axis in range(3):
        for side in (-1, 1):
            val = _face_pairing(Y1p, Ycal2, g, axis, side)
            if (axis, side) in g0:
                b_g0 += val
            else:
                b_g += val
    rF, rG = ip(F1, Ycal2), ip(Y1p, G2)
    boundary = b_g + b_g0 + rF - rG

    def h1(a):
        grads = sum(np.sum(np.abs(F.partial(a, i, g, scheme)) ** 2, axis=0) for i in range(3))
        return float(np.sqrt(np.sum(w * (np.sum(np.abs(a) ** 2, axis=0) + grads))))

    return PairingResult(interior, boundary, float(abs(interior - boundary)), b_g, b_g0, (rF, rG), h1(Z1), h1(Ycal2))


# ---------------------------------------------------------------------------
# Riemann-Lebesgue bound and moduli of continuity


def _shift_array(q: np.ndarray, shift_cells: np.ndarray) -> np.ndarray:
    pad = int(np.ceil(np.abs(shift_cells).max())) + 2
    qp = np.pad(q, pad)
    re = ndimage.shift(qp.real, shift_cells, order=1, mode="constant")
    im = ndimage.shift(qp.imag, shift_cells, order=1, mode="constant") if np.iscomplexobj(q) else 0.0
    return qp, re + 1j * im


def modulus_of_continuity(q, grid: Grid3, r: float, directions: np.ndarray = SHIFT_DIRECTIONS) -> float:
    """``max_y ||q - q(. - y)||_L1`` over ``|y| = r`` along the sampled directions.

    ``q`` is a callable (shifted exactly) or an array on ``grid`` (shifted
    by linear interpolation, zero outside).  A lower estimate of the sup.
    """
    w = grid.cell_volume
    best = 0.0
    if callable(q):
        x = grid.mesh()
        q0 = q(x)
        for d in directions:
            qs = q(x - (r * d).reshape(3, 1, 1, 1))
            best = max(best, float(w * np.sum(np.abs(q0 - qs))))
        return best
    h = np.asarray(grid.spacing)
    for d in directions:
        qp, qs = _shift_array(np.asarray(q), r * d / h)
        best = max(best, float(w * np.sum(np.abs(qp - qs))))
    return best


def modulus_slope(q, grid: Grid3, radii: Sequence[float]) -> float:
    return fit_slope(radii, [modulus_of_continuity(q, grid, r) for r in radii])


@dataclass(frozen=True)
class RLBound:
    lhs: float
    rhs: float
    omega_q: float
    decay_term: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def rl_bound(q, phase, grid: Grid3, d: float, C: float = RL_CONSTANT, fractions=(0.25, 0.5, 1.0)) -> RLBound:
    """``|int e^{i phi} q| <= omega_q(d) + C d^-1 sup (1+|grad phi|)/(1+|grad phi|^2) ||q||_L1``.

    ``phase`` is a callable ``x -> (phi, grad phi)`` or a tuple of arrays.
    """
    if not 0 < d < 1:
        raise ValueError("d must lie in (0, 1)")
    x = grid.mesh()
    qv = q(x) if callable(q) else np.asarray(q)
    phi, gphi = phase(x) if callable(phase) else phase
    w = grid.cell_volume
    lhs = float(abs(w * np.sum(np.exp(1j * phi) * qv)))
    om = max(modulus_of_continuity(q, grid, d * fr) for fr in fractions)
    ng = np.sqrt(np.sum(np.abs(gphi) ** 2, axis=0)) * np.ones(grid.shape)
    sup = float(np.max(((1 + ng) / (1 + ng**2))[np.abs(qv) > 0])) if np.any(qv) else 0.0
    decay = C / d * sup * float(w * np.sum(np.abs(qv)))
    return RLBound(lhs, om + decay, om, decay)


# ---------------------------------------------------------------------------
# Fourier recovery


@dataclass
class FourierSample:
    xi: np.ndarray
    tau: float
    channel: str
    cgo_estimate: complex
    direct_value: complex
    error_terms: dict

    @property
    def error(self) -> float:
        return float(abs(self.cgo_estimate - self.direct_value))


def _region_mask(grid: Grid3, region) -> np.ndarray:
    if callable(region):
        return np.asarray(region(grid.mesh()), bool)
    lo, hi = region
    return box_mask(grid, lo, hi)


def fourier_sample_fg(
    ext1: CoefficientPair, ext2: CoefficientPair, zetas: ZetaPair, channel: str, region,
    box: CgoBox = CgoBox(), cache: dict | None = None, d: float = 0.1, s: float = 0.25,
    reflect: bool = True,
) -> FourierSample:
    """CGO estimate of ``int_Omega e^{-i xi.x} f`` (or ``g``) against the direct transform.

    ``region`` is ``(lo, hi)`` of Omega or a callable mask; ``reflect``
    also evaluates the pairing with the reflected adjoint solution (plane
    ``x3 = 0``, which must be a symmetry plane of the box).
    """
    cache = {} if cache is None else cache
    A1, A2 = zetas.fourier_amplitudes()
    if channel == "f":
        kw1, kw2 = {"A": A1}, {"A": A2}
    elif channel == "g":
        kw1, kw2 = {"B": A1}, {"B": A2}
    else:
        raise ValueError(f"unknown channel {channel!r}")
    Z1 = build_cgo(ext1, zetas.zeta1, variant="schrodinger", box=box, cache=cache, **kw1)
    Y2 = build_cgo(ext2, zetas.zeta2, variant="adjoint", box=box, cache=cache, **kw2)
    grid = Z1.grid
    grid.check_same(Y2.grid)
    mask = _region_mask(grid, region)
    w = grid.cell_volume
    q1 = _cached_Qk(cache, ext1, grid, "Q")
    q2 = _cached_Qk(cache, ext2, grid, "Q")
    dQZ = q1.apply(Z1.Z_tilde) - q2.apply(Z1.Z_tilde)
    x = grid.mesh()
    ph = np.exp(1j * np.tensordot(Z1.zeta - np.conj(Y2.zeta), x, axes=(0, 0)))
    est = complex(w * np.sum((ph * np.sum(dQZ * np.conj(Y2.Y_tilde), axis=0))[mask]))
    red = fg_fields(Z1.coeffs, Y2.coeffs, mask, scheme="spectral")
    direct = red.fourier(zetas.xi)[0 if channel == "f" else 1]
    xi = zetas.xi
    nxi = np.linalg.norm(xi)
    nperp = np.hypot(xi[0], xi[1])
    k2 = zetas.k2
    denom = np.sqrt(nxi**2 + nxi**2 * nperp**2 + 4 * (zetas.tau**2 + k2) * nperp**2)
    terms = {
        "remainder_scale": float((zetas.tau**2 + nxi**2) ** -0.5),
        "reflected_bound": float(d**s + nxi / (d * denom)),
    }
    if reflect:
        from .reduction import J_DOT

        Yr = J_DOT.reshape(8, 1, 1, 1) * Y2.Y_tilde[..., ::-1]
        zr = np.conj(Y2.zeta) * np.array([1, 1, -1])
        phr = np.exp(1j * np.tensordot(Z1.zeta - zr, x, axes=(0, 0)))
        terms["reflected_value"] = complex(w * np.sum((phr * np.sum(dQZ * np.conj(Yr), axis=0))[mask]))
    terms["q_rel"] = (Z1.report.q_rel, Y2.report.q_rel)
    return FourierSample(np.asarray(xi), zetas.tau, channel, est, direct, terms)


def _cached_Qk(cache: dict, pair, grid, which):
    for key, val in cache.items():
        if key[0] == id(pair) and key[1] == grid and key[2] == which:
            return val[3]
    from .cgo import _potential_setup

    coeffs, pots, Qk = _potential_setup(pair, grid, which)
    cache[(id(pair), grid, which)] = (pair, coeffs, pots, Qk)
    return Qk


# ---------------------------------------------------------------------------
# parameter schedule


@dataclass(frozen=True)
class Modulus:
    """Modulus ``B`` with ``B(r) >= r``: ``linear``, ``power`` (``r^p``, ``0 < p <= 1``) or ``log-power``
    (``|log r|^-p``)."""

    kind: str = "linear"
    power: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "power", "log-power"):
            raise ValueError(f"unknown modulus {self.kind!r}")
        if self.kind == "power" and not 0 < self.power <= 1:
            raise ValueError("power modulus needs 0 < p <= 1")

    def log(self, log_r: float) -> float:
        """``log B(r)`` from ``log r`` (usable when ``r`` itself underflows)."""
        if self.kind == "linear":
            return float(log_r)
        if self.kind == "power":
            return float(self.power * log_r)
        return float(-self.power * np.log(abs(log_r))) if log_r < 0 else np.inf

    def __call__(self, r: float) -> float:
        return float(np.exp(self.log(np.log(r)))) if r > 0 else 0.0


@dataclass(frozen=True)
class ParameterSchedule:
    s: float
    d: float
    tau: float
    R: float
    theta: float
    lam: float
    c: float
    B_value: float
    cylinder_ratio: float | None = None

    def check(self, tol: float = 1e-12) -> None:
        s, d, tau = self.s, self.d, self.tau
        R = d ** (2 / 3) * tau ** (1 / 3) / (1 + d ** (1 + s) * tau**0.5) ** (2 / 3)
        assert abs(self.R - R) <= tol * max(1.0, R)
        assert abs(tau - d ** (-2 * (1 + s))) <= tol * max(1.0, tau)
        assert abs(-self.theta + (1 - self.theta) * s) <= tol
        assert 0 < self.lam < s**2 / 3


def parameter_schedule(
    s: float, delta: float | None, modulus: Modulus = Modulus(), c: float = 1.0, log_delta: float | None = None,
    k2: float | None = None,
) -> ParameterSchedule:
    """Scales from the log rule ``d^{-2(1+s)} = -(1/(2c)) log B(delta)``.

    Pass ``log_delta`` instead of ``delta`` for distances below the float
    range.  With ``k2`` set, the cylindrical-integral ratio
    ``I d^2 tau / R`` is evaluated and stored.
    """
    if not 0 < s < 0.5:
        raise ValueError("s must lie in (0, 1/2)")
    if log_delta is None:
        if delta is None or not 0 < delta < 1:
            raise DegenerateDelta(f"delta = {delta} must lie in (0, 1)")
        log_delta = float(np.log(delta))
    elif log_delta >= 0:
        raise DegenerateDelta("log delta must be negative")
    log_B = modulus.log(log_delta)
    if not log_B < 0:
        raise DegenerateDelta(f"B(delta) = exp({log_B}) must lie in (0, 1)")
    rhs = -log_B / (2 * c)
    d = rhs ** (-1 / (2 * (1 + s)))
    if d >= 1:
        raise DegenerateDelta(f"log rule gives d = {d:.3f} >= 1")
    tau = d ** (-2 * (1 + s))
    R = d ** (2 / 3) * tau ** (1 / 3) / (1 + d ** (1 + s) * tau**0.5) ** (2 / 3)
    ratio = None
    if k2 is not None:
        ratio = cylindrical_integral(R, tau, k2, d) * d**2 * tau / R
    out = ParameterSchedule(s, d, tau, R, s / (1 + s), s**2 / (3 * (1 + s) ** 2), c, float(np.exp(log_B)), ratio)
    out.check()
    return out


def cylindrical_integral(R: float, tau: float, k2: float = 1.0, d: float = 1.0, form: str = "ball") -> float:
    """Quadrature of the frequency-ball integral and its bounds.

    ``form="ball"``: the integral over ``|xi| < R`` (polar angle integrated in
    closed form); ``"cylinder"``: the ``(r, t)`` square integral ``I(R, tau)``;
    ``"majorant"``: the final one-dimensional majorant.  All scale with ``d^-2``.
    """
    K = 4 * (tau**2 + k2)
    if form == "ball":

        def angular(r):
            a = r * r + K
            sa, sb = np.sqrt(a), np.sqrt(1 + a)
            return 2 * np.log((sb + sa) / (sb - sa)) / (sa * sb) if r > 0 else 0.0

        # integrand in spherical coordinates: r^2 (1+r^2)^-1 * int over the polar angle
        val = 2 * np.pi * integrate.quad(lambda r: r * r / (1 + r * r) * angular(r) / 2, 0, R, limit=200)[0]
    elif form == "cylinder":
        f = lambda t, r: r * (r * r + t * t) / ((1 + r * r + t * t) * (r * r + t * t + (r * r + t * t) * r * r + K * r * r))  # noqa: E731
        val = integrate.dblquad(f, 0, R, 0, R)[0]
    elif form == "majorant":
        f = lambda t: t / np.sqrt(t * t + K) / np.sqrt(1 + t * t) * np.arctan(t / np.sqrt(1 + t * t))  # noqa: E731
        val = 2 * np.sqrt(2) * integrate.quad(f, 0, R)[0]
    else:
        raise ValueError(f"unknown form {form!r}")
    return float(val / d**2)


# ---------------------------------------------------------------------------
# Carleman estimate


@dataclass(frozen=True)
class CarlemanParams:
    """Weight ``phi = |x - x0|^2 / 2`` with ``x0`` outside the closed box ``[lo, hi]``."""

    x0: tuple[float, float, float]
    h: float
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        x0, lo, hi = (np.asarray(v, float) for v in (self.x0, self.lo, self.hi))
        if np.all((x0 >= lo) & (x0 <= hi)):
            raise X0InsideDomain("x0 must lie outside the closure of the domain")
        if not 0 < self.h <= 1:
            raise ValueError("h must lie in (0, 1]")
        if self.d2 / self.h > np.log(np.finfo(float).max):
            raise WeightOverflow(f"e^(d2/h) overflows for d2 = {self.d2:.3f}, h = {self.h}")

    @property
    def d1(self) -> float:
        x0, lo, hi = (np.asarray(v, float) for v in (self.x0, self.lo, self.hi))
        return float(np.sum((x0 - np.clip(x0, lo, hi)) ** 2))

    @property
    def d2(self) -> float:
        x0, lo, hi = (np.asarray(v, float) for v in (self.x0, self.lo, self.hi))
        far = np.where(np.abs(x0 - lo) > np.abs(x0 - hi), lo, hi)
        return float(np.sum((x0 - far) ** 2))

    def weight_exponent(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * np.sum((x - np.reshape(self.x0, (3,) + (1,) * (x.ndim - 1))) ** 2, axis=0) / self.h


@dataclass(frozen=True)
class CarlemanCheck:
    lhs: float
    rhs: float
    log_scale: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else np.inf)


def carleman_check(u: np.ndarray, grid: Grid3, params: CarlemanParams, grad_u=None, lap_u=None) -> CarlemanCheck:
    """Both sides of the interior Carleman estimate (boundary terms included on the rhs).

    Weights are shifted by their maximum; ``log_scale`` records the shift
    so ``lhs * exp(log_scale)`` is the unshifted value.
    """
    x = grid.mesh()
    h = params.h
    grad_u = F.grad(u, grid) if grad_u is None else grad_u
    lap_u = F.laplacian(u, grid) if lap_u is None else lap_u
    e = 2 * params.weight_exponent(x)
    shift = float(e.max())
    wt = np.exp(e - shift) * grid.quadrature_weights()
    lhs = h * np.sum(wt * np.abs(u) ** 2) + h**3 * np.sum(wt * np.sum(np.abs(grad_u) ** 2, axis=0))
    rhs = h**4 * np.sum(wt * np.abs(lap_u) ** 2)
    # boundary layer: outermost grid points with face-area weights
    for ax in range(3):
        for idx in (0, -1):
            sl = [slice(None)] * 3
            sl[ax] = idx
            sl = tuple(sl)
            area = grid.cell_volume / grid.spacing[ax]
            wb = np.exp(e[sl] - shift) * area
            rhs += h * np.sum(wb * np.abs(u[sl]) ** 2) + h**3 * np.sum(wb * np.sum(np.abs(grad_u[(slice(None),) + sl]) ** 2, axis=0))
    return CarlemanCheck(float(lhs), float(rhs), shift)


def carleman(mode: str, *args, **kwargs):
    """``carleman("check", u, grid, params)`` or ``carleman("transfer", c1, c2, params)``."""
    if mode == "check":
        return carleman_check(*args, **kwargs)
    if mode == "transfer":
        return carleman_transfer(*args, **kwargs)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class TransferReport:
    q_f: np.ndarray
    p_f: np.ndarray
    q_g: np.ndarray
    p_g: np.ndarray
    inequality_constants: tuple[float, float]
    chain_bound: float
    recovered: tuple[np.ndarray, np.ndarray]
    true: tuple[np.ndarray, np.ndarray]
    relative_h1_error: tuple[float, float]


def transfer_factors(mu1, gamma1, mu2, gamma2, omega, grid: Grid3):
    """``q_f, p_f, q_g, p_g`` with ``f = gamma1^{-1/2} (Lap phi1 + q_f phi1 + p_f phi2)``."""
    sg1, sg2, sm1, sm2 = np.sqrt(gamma1), np.sqrt(gamma2), np.sqrt(mu1), np.sqrt(mu2)
    w2 = omega**2
    q_f = -(F.laplacian(sg2, grid) / sg2 + w2 * sg1 * (sg1 * mu1 + sg2 * mu2))
    p_f = -w2 * gamma1 * sg2 * (sm1 + sm2)
    q_g = -(F.laplacian(sm2, grid) / sm2 + w2 * sm1 * (sm1 * gamma1 + sm2 * gamma2))
    p_g = -w2 * mu1 * sm2 * (sg1 + sg2)
    return q_f, p_f, q_g, p_g


def _dirichlet_laplacian(shape, spacing) -> sp.csr_matrix:
    ops = []
    for i, (m, h) in enumerate(zip(shape, spacing)):
        d = sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / h**2
        mats = [sp.identity(shape[j]) for j in range(3)]
        mats[i] = d
        ops.append(sp.kron(mats[0], sp.kron(mats[1], mats[2])))
    return sum(ops).tocsr()


def carleman_transfer(
    c1: SampledCoefficients, c2: SampledCoefficients, params: CarlemanParams | None = None,
    red: ReducedPotentials | None = None,
) -> TransferReport:
    """Transfer from ``(f, g)`` to ``phi1 = gamma1^{1/2} - gamma2^{1/2}``, ``phi2 = mu1^{1/2} - mu2^{1/2}``.

    On a node grid covering the box: assembles the factors, measures the
    pointwise constants in ``|Lap phi_j| <= C (|f or g| + |phi1| + |phi2|)``,
    evaluates the weighted chain bound (unit constants) and solves the
    coupled Dirichlet problem as a quantitative oracle.
    """
    c1.grid.check_same(c2.grid)
    g = c1.grid
    if g.centering != "node":
        raise GridMismatch("the transfer oracle needs a node-centred grid")
    red = red or fg_fields(c1, c2)
    f, gg = red.f, red.g
    q_f, p_f, q_g, p_g = transfer_factors(c1.mu, c1.gamma, c2.mu, c2.gamma, c1.omega, g)
    phi1 = np.sqrt(c1.gamma) - np.sqrt(c2.gamma)
    phi2 = np.sqrt(c1.mu) - np.sqrt(c2.mu)
    lap1, lap2 = F.laplacian(phi1, g), F.laplacian(phi2, g)
    inner = (slice(1, -1),) * 3
    denom1 = (np.abs(f) + np.abs(phi1) + np.abs(phi2))[inner]
    denom2 = (np.abs(gg) + np.abs(phi1) + np.abs(phi2))[inner]
    C1 = float(np.max(np.abs(lap1[inner]) / np.maximum(denom1, 1e-300), initial=0.0))
    C2 = float(np.max(np.abs(lap2[inner]) / np.maximum(denom2, 1e-300), initial=0.0))
    chain = 0.0
    if params is not None:
        w = g.quadrature_weights()
        amp = np.exp((params.d2 - params.d1) / (2 * params.h))
        chain = float(amp * np.sqrt(np.sum(w * (np.abs(f) ** 2 + np.abs(gg) ** 2))))
    # coupled Dirichlet solve on interior nodes
    shp = tuple(m - 2 for m in g.shape)
    Lap = _dirichlet_laplacian(shp, g.spacing)
    n = int(np.prod(shp))

    def bc_rhs(phi):
        full = np.zeros(g.shape, complex)
        full[inner] = 0
        border = phi.copy()
        border[inner] = 0
        lap_b = np.zeros(g.shape, complex)
        for ax in range(3):
            h = g.spacing[ax]
            lap_b += (np.roll(border, 1, ax) + np.roll(border, -1, ax)) / h**2
        return lap_b[inner].ravel()

    d = lambda a: sp.diags(a[inner].ravel())  # noqa: E731
    A = sp.bmat([[Lap + d(q_f), d(p_f)], [d(p_g), Lap + d(q_g)]]).tocsc()
    rhs = np.concatenate(
        [(np.sqrt(c1.gamma) * f)[inner].ravel() - bc_rhs(phi1), (np.sqrt(c1.mu) * gg)[inner].ravel() - bc_rhs(phi2)]
    )
    sol = sla.spsolve(A, rhs)
    r1, r2 = phi1.copy(), phi2.copy()
    r1[inner] = sol[:n].reshape(shp)
    r2[inner] = sol[n:].reshape(shp)

    def h1(a):
        w = g.quadrature_weights()
        return np.sqrt(np.sum(w * (np.abs(a) ** 2 + np.sum(np.abs(F.grad(a, g)) ** 2, axis=0))))

    errs = tuple(float(h1(r - t) / h1(t)) if h1(t) > 0 else float(h1(r - t)) for r, t in ((r1, phi1), (r2, phi2)))
    return TransferReport(q_f, p_f, q_g, p_g, (C1, C2), chain, (r1, r2), (phi1, phi2), errs)


# ---------------------------------------------------------------------------
# stability experiment


@dataclass
class StabilityCurve:
    amplitudes: np.ndarray
    deltas: np.ndarray
    h1_errors: np.ndarray
    lambda_hat: float
    lambda_bound: float
    monotone: bool
    stages: dict = field(default_factory=dict)
    pipeline: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [
            {"amplitude": float(a), "delta_C": float(d), "h1_error": float(e)}
            for a, d, e in zip(self.amplitudes, self.deltas, self.h1_errors)
        ]


def h1_difference(pair1: CoefficientPair, pair2: CoefficientPair, grid: Grid3, mask: np.ndarray | None = None) -> float:
    """``||gamma1 - gamma2||_H1(U) + ||mu1 - mu2||_H1(U)`` on grid cells inside ``mask``."""
    x = grid.mesh()
    w = grid.quadrature_weights()
    mask = np.ones(grid.shape, bool) if mask is None else mask
    total = 0.0
    for a, b in ((pair1.gamma, pair2.gamma), (pair1.mu, pair2.mu)):
        d = np.asarray(a(x) - b(x), complex)
        gd = F.grad(d, grid)
        val = np.abs(d) ** 2 + np.sum(np.abs(gd) ** 2, axis=0)
        total += float(np.sqrt(np.sum((w * val)[mask])))
    return total


def stability_experiment(
    domain, base: CoefficientPair, family: Callable[[float], CoefficientPair], amplitudes: Sequence[float],
    dictionary, s: float = 0.25, c: float = 1.0, modulus: Modulus = Modulus(), pipeline: dict | None = None,
    solver_kw: dict | None = None,
) -> StabilityCurve:
    """Stability curve ``(delta_C, H1 error)`` over a perturbation family.

    ``family(a)`` returns the coefficient pair at amplitude ``a``.  With a
    ``pipeline`` dict (keys ``amplitude``, ``xis``, ``tau``, ``box``), the
    reconstruction chain is also run once and each stage's numbers are
    reported.
    """
    from .forward import MaxwellSolver, cauchy_data_set, cauchy_distance, topology_from_domain

    stages: dict = {}
    t0 = time.perf_counter()
    topo = topology_from_domain(domain)
    inputs = dictionary.inputs(domain.faces)
    kw = solver_kw or {}
    base_set = cauchy_data_set(MaxwellSolver(topo, base, **kw), inputs, base.name or "base")
    stages["forward_base_s"] = time.perf_counter() - t0
    deltas, errs = [], []
    for a in amplitudes:
        t1 = time.perf_counter()
        pair = family(a)
        cs = cauchy_data_set(MaxwellSolver(topo, pair, **kw), inputs, f"a={a}")
        deltas.append(cauchy_distance(base_set, cs))
        errs.append(h1_difference(pair, base, domain.grid, domain.inside))
        stages[f"member_{a:.3g}_s"] = time.perf_counter() - t1
    amps = np.asarray(amplitudes, float)
    deltas, errs = np.asarray(deltas), np.asarray(errs)
    order = np.argsort(amps)
    monotone = bool(np.all(np.diff(deltas[order]) > 0))
    pos = (deltas > 0) & (deltas < 1) & (errs > 0)
    lam = -fit_slope(np.abs(np.log(deltas[pos])), errs[pos]) if pos.sum() >= 2 else float("nan")
    curve = StabilityCurve(amps, deltas, errs, lam, s**2 / 3, monotone, stages)
    if pipeline:
        curve.pipeline = run_pipeline(domain, base, family, deltas, amps, s=s, c=c, modulus=modulus, **pipeline)
    return curve


def run_pipeline(
    domain, base, family, deltas, amps, amplitude: float | None = None, xis=((1.0, 0.5, 0.3),), tau: float = 8.0,
    box: CgoBox = CgoBox(48, 1.6), s: float = 0.25, c: float = 1.0, modulus: Modulus = Modulus(),
    transfer_n: int = 24,
) -> dict:
    """One pass of the reconstruction chain at a single amplitude, with per-stage numbers."""
    from .reduction import extend_coefficients

    a = float(amps[0] if amplitude is None else amplitude)
    delta = float(deltas[list(amps).index(a)]) if a in list(amps) else float(deltas[0])
    out: dict = {"amplitude": a, "delta_C": delta}
    t = time.perf_counter()
    ext1 = extend_coefficients(family(a), domain)
    ext2 = extend_coefficients(base, domain)
    ext_grid, _ = domain.extended_grid()
    region = (ext_grid.lo, ext_grid.hi)
    cache: dict = {}
    samples = []
    for xi in xis:
        zp = choose_zetas(xi, tau, base.k2)
        for ch in ("f", "g"):
            fs = fourier_sample_fg(ext1, ext2, zp, ch, region, box=box, cache=cache, s=s)
            samples.append({"xi": list(map(float, xi)), "channel": ch, "cgo": fs.cgo_estimate, "direct": fs.direct_value,
                            "error": fs.error, "reflected": fs.error_terms.get("reflected_value")})
    out["fourier"] = samples
    out["fourier_s"] = time.perf_counter() - t
    # fields on the CGO box for norms
    grid = box.grid()
    c1 = SampledCoefficients.from_pair(ext1, grid)
    c2 = SampledCoefficients.from_pair(ext2, grid)
    red = fg_fields(c1, c2, _region_mask(grid, region), scheme="spectral")
    l2f, l2g = red.l2()
    hm1 = F.sobolev_norm(red.f, grid, -1.0, periodic=True) + F.sobolev_norm(red.g, grid, -1.0, periodic=True)
    hs = F.sobolev_norm(red.f, grid, s, periodic=True) + F.sobolev_norm(red.g, grid, s, periodic=True)
    theta = s / (1 + s)
    out["norms"] = {"L2": l2f + l2g, "H-1": hm1, "Hs": hs, "interpolation_bound": hm1**theta * hs ** (1 - theta)}
    try:
        sched = parameter_schedule(s, delta, modulus, c)
        R, d, tau_s = sched.R, sched.d, sched.tau
        out["schedule"] = {"d": d, "tau": tau_s, "R": R, "theta": sched.theta, "lambda": sched.lam}
        out["budget"] = {
            "data_term": sched.B_value * np.exp(c * (R + tau_s)),
            "cgo_term": R**0.5 / tau_s,
            "smoothing_term": d**s * R**0.5,
            "reflection_term": R**0.5 / (d * tau_s**0.5),
            "tail_term": 1 / R,
        }
    except DegenerateDelta as exc:
        out["schedule"] = {"error": str(exc)}
    # transfer oracle on U
    ng = Grid3(domain.grid.lo, domain.grid.hi, (transfer_n,) * 3, centering="node")
    p1 = SampledCoefficients.from_pair(family(a), ng)
    p2 = SampledCoefficients.from_pair(base, ng)
    lo, hi = np.array(ng.lo), np.array(ng.hi)
    x0 = tuple(0.5 * (lo + hi) - np.array([0, 0, 1.0]) * (hi[2] - lo[2]) * 1.5)
    tr = carleman_transfer(p1, p2, CarlemanParams(x0, 0.5, tuple(lo), tuple(hi)))
    out["transfer"] = {"inequality_constants": tr.inequality_constants, "chain_bound": tr.chain_bound,
                       "relative_h1_error": tr.relative_h1_error}
    out["total_s"] = time.perf_counter() - t
    return out
