"""Complex geometrical optics (CGO) solutions on a padded periodic box.

A Schrödinger CGO solution is ``Z = exp(i zeta.x) (L + R)`` with
``zeta.zeta = k^2``.  The remainder solves

    (-Delta - 2 i zeta.grad) R = -(Q + k^2 I)(L + R)

and is found by fixed-point iteration with the Faddeev-type inverse of the
left-hand side, applied as a Fourier multiplier on a Bloch lattice
(frequencies shifted by half a lattice step, so that ``xi = 0`` is never
sampled).

Everything is stored in conjugated form (the factor ``exp(i zeta.x)``
removed).  Conjugated fields split into a periodic part (built from the
constant amplitude and the periodic coefficients) and a Bloch part (built
from ``R``); derivatives of each part are exact Fourier multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateXi, NoConvergence, ResidualTooLarge, SymbolSingular
from .fields import Grid3
from .phantoms import CoefficientPair
from .reduction import PotentialMatrices, SampledCoefficients, symbol_pattern

REPAD = 1 + 1 / 127
SYMBOL_FLOOR = 1e-8


# ---------------------------------------------------------------------------
# frequency algebra


@dataclass(frozen=True)
class ZetaPair:
    """Complex frequencies ``zeta1, zeta2`` with ``zeta1 - conj(zeta2) = -xi``."""

    xi: np.ndarray
    tau: float
    k2: float
    zeta1: np.ndarray
    zeta2: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    frame: np.ndarray  # rows f1, f2, f3

    def check(self, tol: float = 1e-12) -> None:
        scale = 1 + abs(self.k2) + self.tau**2 + float(self.xi @ self.xi)
        for z in (self.zeta1, self.zeta2):
            assert abs(z @ z - self.k2) <= tol * scale, "zeta.zeta != k^2"
        assert np.allclose(self.zeta1 - np.conj(self.zeta2), -self.xi, atol=tol * np.sqrt(scale))
        for e in (self.eta1, self.eta2):
            assert abs(np.linalg.norm(e) - 1) <= tol and abs(e @ self.xi) <= tol * (1 + np.linalg.norm(self.xi))
        assert abs(self.eta1 @ self.eta2) <= tol

    @property
    def direction_gap(self) -> float:
        """``|zeta1/|zeta1| - (i eta1 + eta2)/sqrt 2|``, which is ``O(1/tau)``."""
        z = self.zeta1 / np.linalg.norm(self.zeta1)
        return float(np.linalg.norm(z - (1j * self.eta1 + self.eta2) / np.sqrt(2)))

    def fourier_amplitudes(self) -> tuple[np.ndarray, np.ndarray]:
        """``A1``, ``A2`` with ``(i eta1 + eta2)/sqrt2 . A1 = (i eta1 + eta2)/sqrt2 . conj(A2) = 1``."""
        A1 = (-1j * self.eta1 + self.eta2) / np.sqrt(2)
        A2 = (1j * self.eta1 + self.eta2) / np.sqrt(2)
        return A1, A2


def choose_zetas(xi, tau: float, k2: float) -> ZetaPair:
    xi = np.asarray(xi, float)
    nxi = np.linalg.norm(xi)
    nperp = np.hypot(xi[0], xi[1])
    if nxi == 0 or nperp < 1e-12 * nxi:
        raise DegenerateXi("xi must not be parallel to e3")
    if tau < 1:
        raise ValueError("tau must be >= 1")
    eta1 = np.array([xi[1], -xi[0], 0.0]) / nperp
    eta2 = np.cross(eta1, xi / nxi)
    a = np.sqrt(tau**2 + nxi**2 / 4)
    b = np.sqrt(tau**2 + k2)
    zeta1 = -0.5 * xi + 1j * a * eta1 + b * eta2
    zeta2 = 0.5 * xi - 1j * a * eta1 + b * eta2
    f2 = np.array([xi[0], xi[1], 0.0]) / nperp
    f3 = np.array([0.0, 0.0, 1.0])
    out = ZetaPair(xi, float(tau), float(k2), zeta1, zeta2, eta1, eta2, np.stack([np.cross(f2, f3), f2, f3]))
    out.check()
    return out


def schrodinger_amplitude(zeta, A, B, k: float) -> np.ndarray:
    """``L = (zeta.A, k B, zeta.B, k A) / |zeta|`` with ``k = omega (eps0 mu0)^{1/2}``."""
    zeta, A, B = (np.asarray(v, complex) for v in (zeta, A, B))
    return np.concatenate([[zeta @ A], k * B, [zeta @ B], k * A]) / np.linalg.norm(zeta)


def adjoint_seed(zeta, Ahat, Bhat) -> np.ndarray:
    """Amplitude ``(0, Bhat, 0, Ahat)/|zeta|`` of the auxiliary Schrödinger solution."""
    Ahat, Bhat = np.asarray(Ahat, complex), np.asarray(Bhat, complex)
    return np.concatenate([[0], Bhat, [0], Ahat]) / np.linalg.norm(zeta)


def adjoint_amplitude(zeta, Ahat, Bhat) -> np.ndarray:
    """``M = (<zeta,Ahat>, -zeta x Ahat, <zeta,Bhat>, zeta x Bhat) / |zeta|``."""
    zeta, Ahat, Bhat = (np.asarray(v, complex) for v in (zeta, Ahat, Bhat))
    return np.concatenate([[zeta @ Ahat], -np.cross(zeta, Ahat), [zeta @ Bhat], np.cross(zeta, Bhat)]) / np.linalg.norm(
        zeta
    )


# ---------------------------------------------------------------------------
# spectral machinery


@dataclass
class SpectralBox:
    """FFT transforms on a periodic cell grid, optionally on the Bloch lattice."""

    grid: Grid3
    bloch: bool = False

    @cached_property
    def xi(self) -> list[np.ndarray]:
        from .fields import wavenumbers

        shift = 0.5 if self.bloch else 0.0
        out = []
        for i in range(3):
            k = wavenumbers(self.grid, i, shift)
            if not self.bloch and self.grid.shape[i] % 2 == 0:
                k[self.grid.shape[i] // 2] = 0.0
            out.append(k.reshape([-1 if j == i else 1 for j in range(3)]))
        return out

    @cached_property
    def _phase(self) -> np.ndarray | None:
        if not self.bloch:
            return None
        x = self.grid.mesh() - np.reshape(self.grid.lo, (3, 1, 1, 1))
        s = np.pi / np.asarray(self.grid.extent).reshape(3, 1, 1, 1)
        return np.exp(1j * np.sum(s * x, axis=0))

    def forward(self, v: np.ndarray) -> np.ndarray:
        if self.bloch:
            v = v * np.conj(self._phase)
        return np.fft.fftn(v, axes=(-3, -2, -1))

    def inverse(self, c: np.ndarray) -> np.ndarray:
        v = np.fft.ifftn(c, axes=(-3, -2, -1))
        return v * self._phase if self.bloch else v

    def partial(self, v: np.ndarray, axis: int) -> np.ndarray:
        return self.inverse(1j * self.xi[axis] * self.forward(v))

    def apply_P(self, Y: np.ndarray) -> np.ndarray:
        """``P Y`` with ``D = (1/i) grad`` as an exact multiplier."""
        c = self.forward(Y)
        xi = self.xi
        dot = lambda u: xi[0] * u[0] + xi[1] * u[1] + xi[2] * u[2]  # noqa: E731
        cross = lambda u: np.stack(  # noqa: E731
            [xi[1] * u[2] - xi[2] * u[1], xi[2] * u[0] - xi[0] * u[2], xi[0] * u[1] - xi[1] * u[0]]
        )
        f1, u1, f2, u2 = c[0], c[1:4], c[4], c[5:8]
        out = np.empty_like(c)
        out[0] = dot(u2)
        out[1:4] = np.stack([x * f2 for x in xi]) - cross(u2)
        out[4] = dot(u1)
        out[5:8] = np.stack([x * f1 for x in xi]) + cross(u1)
        return self.inverse(out)


@dataclass
class SparseMatrixField:
    """8x8 matrix field stored as its nonzero entries."""

    entries: dict[tuple[int, int], np.ndarray]
    shape: tuple[int, int, int]

    @classmethod
    def from_dense(cls, Q: np.ndarray, rel_tol: float = 1e-14) -> "SparseMatrixField":
        peak = np.abs(Q).max()
        entries = {}
        for i in range(8):
            for j in range(8):
                if np.abs(Q[i, j]).max() > rel_tol * peak:
                    entries[(i, j)] = Q[i, j].copy()
        return cls(entries, Q.shape[2:])

    def apply(self, Y: np.ndarray) -> np.ndarray:
        out = np.zeros((8, *self.shape), complex)
        for (i, j), q in self.entries.items():
            out[i] += q * Y[j]
        return out

    def sup_sum(self) -> float:
        """``sum_jk ||Q_jk||_inf``."""
        return float(sum(np.abs(q).max() for q in self.entries.values()))


def faddeev_symbol(box: SpectralBox, zeta) -> np.ndarray:
    xi = box.xi
    return sum(x**2 for x in xi) + 2 * sum(z * x for z, x in zip(zeta, xi))


@dataclass
class FaddeevReport:
    iterations: int
    final_update: float
    residual: float
    q_rel: float
    min_symbol: float
    update_ratios: list = field(default_factory=list)
    repadded: bool = False

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations, "final_update": self.final_update, "residual": self.residual,
            "q_rel": self.q_rel, "min_symbol": self.min_symbol, "repadded": self.repadded,
            "max_update_ratio": max(self.update_ratios, default=0.0),
        }


def faddeev_solve(
    Qk: SparseMatrixField, grid: Grid3, zeta, amplitude, tol: float = 1e-10, maxiter: int = 200,
    grid_constant: float = 4.0,
) -> tuple[np.ndarray, FaddeevReport]:
    """Remainder ``R`` of the Schrödinger CGO solution on the Bloch lattice of ``grid``.

    ``Qk`` is ``Q + k^2 I`` (compactly supported in the box).  Raises
    :class:`SymbolSingular` when a lattice frequency lies on the zero set of
    the symbol and :class:`NoConvergence` when ``q_rel >= 1`` or the
    iteration stalls.
    """
    zeta = np.asarray(zeta, complex)
    amplitude = np.asarray(amplitude, complex).reshape(8, 1, 1, 1)
    box = SpectralBox(grid, bloch=True)
    sym = faddeev_symbol(box, zeta)
    smin = float(np.abs(sym).min())
    if smin < SYMBOL_FLOOR:
        raise SymbolSingular(f"lattice frequency on the characteristic set (|symbol| = {smin:.2e})", min_symbol=smin)
    sup = Qk.sup_sum()
    q_rel = grid_constant * sup / float(np.sqrt(np.vdot(zeta, zeta).real))
    L = np.broadcast_to(amplitude, (8, *grid.shape))
    if sup == 0 or not np.any(amplitude):
        return np.zeros((8, *grid.shape), complex), FaddeevReport(0, 0.0, 0.0, q_rel, smin)
    if q_rel >= 1:
        raise NoConvergence(f"q_rel = {q_rel:.3f} >= 1; increase tau or weaken the potential", q_rel=q_rel)
    G = lambda v: box.inverse(box.forward(v) / sym)  # noqa: E731
    R = np.zeros((8, *grid.shape), complex)
    ratios = []
    prev = None
    upd = np.inf
    it = 0
    for it in range(1, maxiter + 1):
        Rn = -G(Qk.apply(L + R))
        upd_abs = np.linalg.norm(Rn - R)
        upd = upd_abs / max(np.linalg.norm(Rn), 1e-300)
        if prev is not None and prev > 0:
            ratios.append(upd_abs / prev)
        prev = upd_abs
        R = Rn
        if upd < tol:
            break
        if len(ratios) >= 3 and all(r >= 1 for r in ratios[-3:]):
            raise NoConvergence("fixed-point iteration stalls", update=upd)
    else:
        raise NoConvergence(f"no convergence in {maxiter} iterations (update {upd:.2e})", update=upd)
    res = box.inverse(box.forward(R) * sym) + Qk.apply(L + R)
    rel = float(np.linalg.norm(res) / max(np.linalg.norm(L + R), 1e-300))
    return R, FaddeevReport(it, float(upd), rel, q_rel, smin, ratios)


# ---------------------------------------------------------------------------
# assembled solutions


@dataclass
class CgoSolution:
    """A CGO solution in conjugated form on a padded periodic box.

    ``seed`` is the Schrödinger amplitude (``L``, or ``(0, Bhat, 0, Ahat)/|zeta|``
    in the adjoint case), ``R`` its remainder.  The lifted first-order field
    is ``exp(i zeta.x) (Y_per + Y_bloch)``; ``amplitude`` is ``L`` or ``M``.
    """

    zeta: np.ndarray
    variant: str
    grid: Grid3
    seed: np.ndarray
    R: np.ndarray
    Y_per: np.ndarray
    Y_bloch: np.ndarray
    amplitude: np.ndarray
    coeffs: SampledCoefficients
    report: FaddeevReport
    first_order_residual: float

    @property
    def Z_tilde(self) -> np.ndarray:
        return self.seed.reshape(8, 1, 1, 1) + self.R

    @property
    def Y_tilde(self) -> np.ndarray:
        return self.Y_per + self.Y_bloch

    @property
    def remainder(self) -> np.ndarray:
        """``R`` (Schrödinger) or ``S = Y_tilde - M`` (adjoint)."""
        if self.variant == "schrodinger":
            return self.R
        return self.Y_tilde - self.amplitude.reshape(8, 1, 1, 1)

    def phase(self) -> np.ndarray:
        return np.exp(1j * np.tensordot(self.zeta, self.grid.mesh(), axes=(0, 0)))

    def Z(self) -> np.ndarray:
        return self.phase() * self.Z_tilde

    def Y(self) -> np.ndarray:
        return self.phase() * self.Y_tilde

    def maxwell_fields(self) -> tuple[np.ndarray, np.ndarray]:
        """Unscaled ``(E, H)`` from ``Y = (0, mu^{1/2} H, 0, gamma^{1/2} E)``."""
        Y = self.Y()
        return Y[5:8] / np.sqrt(self.coeffs.gamma), Y[1:4] / np.sqrt(self.coeffs.mu)

    def remainder_norm(self, mask: np.ndarray | None = None) -> float:
        r = self.remainder
        w = self.grid.cell_volume
        if mask is not None:
            r = r[:, mask]
        return float(np.sqrt(w * np.sum(np.abs(r) ** 2)))


@dataclass(frozen=True)
class CgoBox:
    """Padded periodic box for CGO solves: ``n`` cells on ``[-half_width, half_width]^3``."""

    n: int = 64
    half_width: float = 2.0

    def grid(self, stretch: float = 1.0) -> Grid3:
        L = self.half_width * REPAD * stretch
        return Grid3((-L,) * 3, (L,) * 3, (self.n,) * 3)


def _potential_setup(pair: CoefficientPair, grid: Grid3, which: str):
    coeffs = SampledCoefficients.from_pair(pair, grid)
    pots = PotentialMatrices(coeffs, "spectral")
    Q = pots[which]
    for i in range(8):
        Q[i, i] += coeffs.k2
    return coeffs, pots, SparseMatrixField.from_dense(Q)


def build_cgo(
    pair: CoefficientPair, zeta, A=None, B=None, variant: str = "schrodinger", box: CgoBox = CgoBox(),
    tol: float = 1e-10, residual_tol: float = 1e-6, maxiter: int = 200, cache: dict | None = None,
) -> CgoSolution:
    """Schrödinger (``Y = (P - W^t) Z``) or adjoint (``(P + W*) Y = 0``) CGO solution.

    ``pair`` must already be extended to the whole space (constant outside a
    ball inside the box).  ``A, B`` are the constant amplitude vectors
    (``Ahat, Bhat`` for the adjoint variant).  ``cache`` (any dict) keeps
    sampled potentials between calls with the same pair and box.
    """
    zeta = np.asarray(zeta, complex)
    A = np.zeros(3, complex) if A is None else np.asarray(A, complex)
    B = np.zeros(3, complex) if B is None else np.asarray(B, complex)
    k = pair.omega * np.sqrt(pair.eps0 * pair.mu0)
    if abs(zeta @ zeta - k**2) > 1e-10 * (1 + np.vdot(zeta, zeta).real):
        raise ValueError("zeta.zeta must equal omega^2 eps0 mu0")
    if variant == "schrodinger":
        seed, which = schrodinger_amplitude(zeta, A, B, k), "Q"
        amplitude = seed
    elif variant == "adjoint":
        seed, which = adjoint_seed(zeta, A, B), "Qhat"
        amplitude = adjoint_amplitude(zeta, A, B)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    for attempt in range(2):
        grid = box.grid(REPAD**attempt)
        key = (id(pair), grid, which)
        if cache is not None and key in cache:
            coeffs, pots, Qk = cache[key][1:]
        else:
            coeffs, pots, Qk = _potential_setup(pair, grid, which)
            if cache is not None:
                cache[key] = (pair, coeffs, pots, Qk)
        try:
            R, report = faddeev_solve(Qk, grid, zeta, seed, tol, maxiter)
            break
        except SymbolSingular:
            if attempt == 1:
                raise
    report.repadded = attempt == 1
    W = pots.W
    lower = W.T if variant == "schrodinger" else W.conj()
    upper = W if variant == "schrodinger" else W.H
    sym = symbol_pattern(zeta.reshape(3, 1, 1, 1))
    Lb = np.broadcast_to(seed.reshape(8, 1, 1, 1), (8, *grid.shape)).astype(complex)
    per = SpectralBox(grid, bloch=False)
    blo = SpectralBox(grid, bloch=True)
    Y_per = sym.apply(Lb) - lower.apply(Lb)
    Y_bloch = sym.apply(R) + blo.apply_P(R) - lower.apply(R)
    r = sym.apply(Y_per + Y_bloch) + per.apply_P(Y_per) + blo.apply_P(Y_bloch) + upper.apply(Y_per + Y_bloch)
    first_res = float(np.linalg.norm(r) / max(np.linalg.norm(Y_per + Y_bloch), 1e-300))
    sol = CgoSolution(zeta, variant, grid, seed, R, Y_per, Y_bloch, amplitude, coeffs, report, first_res)
    worst = max(report.residual, first_res)
    if np.any(seed) and worst > residual_tol:
        raise ResidualTooLarge(f"CGO residual {worst:.3e} exceeds {residual_tol:.1e}", residual=worst)
    return sol
