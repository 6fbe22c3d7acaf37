"""Reduction of the Maxwell system to Schrödinger-type systems.

The augmented state is ``Y = (f1, u1, f2, u2)`` (slots ``h, H, e, E``).
Every first-order 8x8 block operator used here has the sparsity pattern

    [[0,        0,          0,      a_dot . ],
     [0,        0,          a_dot,  a_cross x],
     [0,        b_dot .,    0,      0       ],
     [b_dot,    b_cross x,  0,      0       ]]

so it is stored as four vector fields (:class:`BlockPattern`).  The
operator ``P`` is this pattern with ``D = (1/i) grad`` and cross signs
``(-, +)``; the first-order part of ``W`` uses ``D alpha`` on top and
``D beta`` below with signs ``(+, -)``.

Conventions: ``alpha = log gamma``, ``beta = log mu``,
``kappa = omega mu^{1/2} gamma^{1/2}`` (principal branches), and Maxwell's
equations read ``curl E = i omega mu H``, ``curl H = -i omega gamma E``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import fields as F
from .errors import NonzeroScalarSlots, NotASolution, NeumannViolation, NotFlat
from .fields import AugmentedField, Grid3
from .phantoms import CoefficientPair, ExtendedCoefficient

VARIANTS = ("Q", "Qprime", "Qhat")


# ---------------------------------------------------------------------------
# block patterns


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack(
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    )


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@dataclass(frozen=True)
class BlockPattern:
    """Pointwise 8x8 matrix field with the first-order sparsity pattern.

    Any entry may be ``None`` (zero).  Vectors broadcast against the grid.
    """

    top_dot: np.ndarray | None
    top_cross: np.ndarray | None
    bot_dot: np.ndarray | None
    bot_cross: np.ndarray | None

    def apply(self, Y: np.ndarray) -> np.ndarray:
        f1, u1, f2, u2 = Y[0], Y[1:4], Y[4], Y[5:8]
        out = np.zeros(np.broadcast_shapes(Y.shape, (8,) + np.shape(self._any())[1:]), complex)
        if self.top_dot is not None:
            out[0] += _dot(self.top_dot, u2)
            out[1:4] += self.top_dot * f2
        if self.top_cross is not None:
            out[1:4] += _cross(self.top_cross, u2)
        if self.bot_dot is not None:
            out[4] += _dot(self.bot_dot, u1)
            out[5:8] += self.bot_dot * f1
        if self.bot_cross is not None:
            out[5:8] += _cross(self.bot_cross, u1)
        return out

    def _any(self):
        for v in (self.top_dot, self.top_cross, self.bot_dot, self.bot_cross):
            if v is not None:
                return np.asarray(v)
        return np.zeros(3)

    def transpose(self) -> "BlockPattern":
        neg = lambda v: None if v is None else -v  # noqa: E731
        return BlockPattern(self.bot_dot, neg(self.bot_cross), self.top_dot, neg(self.top_cross))

    def conj(self) -> "BlockPattern":
        c = lambda v: None if v is None else np.conj(v)  # noqa: E731
        return BlockPattern(c(self.top_dot), c(self.top_cross), c(self.bot_dot), c(self.bot_cross))

    def scaled(self, s: complex) -> "BlockPattern":
        m = lambda v: None if v is None else s * v  # noqa: E731
        return BlockPattern(m(self.top_dot), m(self.top_cross), m(self.bot_dot), m(self.bot_cross))

    def dense(self) -> np.ndarray:
        """Explicit ``(8, 8, ...)`` matrix field."""
        shape = np.shape(self._any())[1:]
        out = np.zeros((8, 8, *shape), complex)
        for j in range(8):
            e = np.zeros((8, *shape), complex)
            e[j] = 1
            out[:, j] = self.apply(e)
        return out


def cross_matrix(v: np.ndarray) -> np.ndarray:
    z = np.zeros_like(v[0])
    return np.array([[z, -v[2], v[1]], [v[2], z, -v[0]], [-v[1], v[0], z]])


def symbol_pattern(A: np.ndarray) -> BlockPattern:
    """Pattern of ``P`` with ``D`` replaced by the vector ``A`` (no 1/i factor)."""
    A = np.asarray(A, complex)
    return BlockPattern(A, -A, A, A)


def P_A(A: np.ndarray) -> BlockPattern:
    """Boundary/symbol operator ``P_A = (1/i) * pattern(A)``."""
    return symbol_pattern(A).scaled(-1j)


def apply_P(Y: np.ndarray, grid: Grid3, scheme: str = "fd2") -> np.ndarray:
    """Apply ``P = sum_j A_j (1/i) d_j`` to an 8-component array."""
    D = lambda f: -1j * F.grad(f, grid, scheme)  # noqa: E731
    dv = lambda u: -1j * F.div(u, grid, scheme)  # noqa: E731
    cu = lambda u: -1j * F.curl(u, grid, scheme)  # noqa: E731
    f1, u1, f2, u2 = Y[0], Y[1:4], Y[4], Y[5:8]
    out = np.empty(Y.shape, complex)
    out[0] = dv(u2)
    out[1:4] = D(f2) - cu(u2)
    out[4] = dv(u1)
    out[5:8] = D(f1) + cu(u1)
    return out


def apply_first_order(Y: AugmentedField, mode: str = "P", A=None, scheme: str = "fd2") -> AugmentedField:
    """``P Y`` or ``P_A Y`` for a (possibly complex) vector field ``A``."""
    if mode == "P":
        return AugmentedField(apply_P(Y.data, Y.grid, scheme), Y.grid)
    if mode == "P_A":
        A = np.asarray(A, complex)
        if A.ndim > 1:
            Y.grid.check_array(A)
        else:
            A = A.reshape(3, 1, 1, 1)
        return AugmentedField(P_A(A).apply(Y.data), Y.grid)
    raise ValueError(f"unknown mode {mode!r}")


def apply_P_matrix(Mf: np.ndarray, grid: Grid3, scheme: str = "fd2") -> np.ndarray:
    """``sum_j A_j (1/i) d_j M`` for a matrix field ``M`` of shape ``(8, 8, ...)``."""
    return np.stack([apply_P(Mf[:, j], grid, scheme) for j in range(8)], axis=1)


# ---------------------------------------------------------------------------
# coefficients on a grid


@dataclass(frozen=True)
class SampledCoefficients:
    """A coefficient pair sampled on a grid, with derived logs and ``kappa``."""

    grid: Grid3
    mu: np.ndarray
    gamma: np.ndarray
    omega: float
    eps0: float = 1.0
    mu0: float = 1.0

    @classmethod
    def from_pair(cls, pair: CoefficientPair, grid: Grid3, check: bool = True) -> "SampledCoefficients":
        x = grid.mesh()
        if check:
            pair.check_admissible(x)
        mu, gamma = pair.sample(x)
        return cls(grid, mu, gamma, pair.omega, pair.eps0, pair.mu0)

    @property
    def alpha(self) -> np.ndarray:
        return np.log(self.gamma)

    @property
    def beta(self) -> np.ndarray:
        return np.log(self.mu)

    @property
    def kappa(self) -> np.ndarray:
        return self.omega * np.sqrt(self.mu) * np.sqrt(self.gamma)

    @property
    def k2(self) -> float:
        return self.omega**2 * self.eps0 * self.mu0


@dataclass(frozen=True)
class FirstOrderPotential:
    """``kappa I_8 + 1/2 pattern``: the matrix ``W`` and its transposes/conjugates."""

    kappa: np.ndarray
    pattern: BlockPattern

    def apply(self, Y: np.ndarray) -> np.ndarray:
        return self.kappa * Y + 0.5 * self.pattern.apply(Y)

    @property
    def T(self) -> "FirstOrderPotential":
        return FirstOrderPotential(self.kappa, self.pattern.transpose())

    def conj(self) -> "FirstOrderPotential":
        return FirstOrderPotential(np.conj(self.kappa), self.pattern.conj())

    @property
    def H(self) -> "FirstOrderPotential":
        """Conjugate transpose ``W*``."""
        return self.T.conj()

    def dense(self) -> np.ndarray:
        out = 0.5 * self.pattern.dense()
        for i in range(8):
            out[i, i] += self.kappa
        return out


def _log_gradients(c: SampledCoefficients, scheme: str):
    Dalpha = -1j * F.grad(c.alpha, c.grid, scheme)
    Dbeta = -1j * F.grad(c.beta, c.grid, scheme)
    return Dalpha, Dbeta


def assemble_W(c: SampledCoefficients, scheme: str = "fd2") -> FirstOrderPotential:
    Dalpha, Dbeta = _log_gradients(c, scheme)
    return FirstOrderPotential(c.kappa, BlockPattern(Dalpha, Dalpha, Dbeta, -Dbeta))


def _hessian_block(f: np.ndarray, grid: Grid3, scheme: str) -> tuple[np.ndarray, np.ndarray]:
    """``(Delta f, 2 Hess f - Delta f I_3)``."""
    H = F.hessian(f, grid, scheme)
    lap = H[0, 0] + H[1, 1] + H[2, 2]
    B = 2 * H
    for i in range(3):
        B[i, i] -= lap
    return lap, B


def _zeroth_order(grid, top_log, bot_log, sign, kappa, offdiag: BlockPattern, scheme):
    """Assemble ``sign/2 diag-blocks - (kappa^2 + 1/4 D.D) I - offdiag``."""
    shape = grid.shape
    Q = np.zeros((8, 8, *shape), complex)
    for off, f in ((0, top_log), (4, bot_log)):
        lap, B = _hessian_block(f, grid, scheme)
        Dlog = -1j * F.grad(f, grid, scheme)
        Q[off, off] = 0.5 * sign * lap
        Q[off + 1 : off + 4, off + 1 : off + 4] = 0.5 * sign * B
        diag = kappa**2 + 0.25 * _dot(Dlog, Dlog)
        for i in range(off, off + 4):
            Q[i, i] -= diag
    return Q - offdiag.dense()


def assemble_potentials(c: SampledCoefficients, which: str, scheme: str = "fd2"):
    """Return ``W`` (a :class:`FirstOrderPotential`) or a dense ``Q``-type matrix field.

    ``which`` is ``"W"``, ``"Q"``, ``"Qprime"`` or ``"Qhat"``; the dense
    matrices are the closed-form zeroth-order terms of

    * ``(P + W)(P - W^t)  = -Delta + Q``
    * ``(P - W^t)(P + W)  = -Delta + Q'``
    * ``(P + W*)(P - conj W) = -Delta + Qhat``.
    """
    if which == "W":
        return assemble_W(c, scheme)
    g = c.grid
    kappa = c.kappa
    Dk = -1j * F.grad(kappa, g, scheme)
    if which == "Q":
        off = BlockPattern(2 * Dk, None, 2 * Dk, None)
        return _zeroth_order(g, c.alpha, c.beta, 1.0, kappa, off, scheme)
    if which == "Qprime":
        off = BlockPattern(None, 2 * Dk, None, -2 * Dk)
        return _zeroth_order(g, c.beta, c.alpha, -1.0, kappa, off, scheme)
    if which == "Qhat":
        kb = np.conj(kappa)
        Dkb = -1j * F.grad(kb, g, scheme)
        off = BlockPattern(None, -2 * Dkb, None, 2 * Dkb)
        return _zeroth_order(g, c.beta, np.conj(c.alpha), -1.0, kb, off, scheme)
    raise ValueError(f"unknown potential {which!r}")


def generic_potential(c: SampledCoefficients, which: str, scheme: str = "fd2") -> np.ndarray:
    """Zeroth-order term computed directly from ``W`` (independent of the block formulas)."""
    W = assemble_W(c, scheme)
    Wd = W.dense()
    mm = lambda A, B: np.einsum("ij...,jk...->ik...", A, B)  # noqa: E731
    if which == "Q":
        Wt = np.swapaxes(Wd, 0, 1)
        return -apply_P_matrix(Wt, c.grid, scheme) - mm(Wd, Wt)
    if which == "Qprime":
        Wt = np.swapaxes(Wd, 0, 1)
        return apply_P_matrix(Wd, c.grid, scheme) - mm(Wt, Wd)
    if which == "Qhat":
        Wb = np.conj(Wd)
        Ws = np.swapaxes(Wb, 0, 1)
        return -apply_P_matrix(Wb, c.grid, scheme) - mm(Ws, Wb)
    raise ValueError(f"unknown potential {which!r}")


def apply_dense(Q: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.einsum("ij...,j...->i...", Q, Y)


@dataclass
class PotentialMatrices:
    """Lazily assembled ``W, Q, Q', Qhat`` for one sampled coefficient pair."""

    coeffs: SampledCoefficients
    scheme: str = "fd2"
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def k2(self) -> float:
        return self.coeffs.k2

    def __getitem__(self, which: str):
        if which not in self._cache:
            self._cache[which] = assemble_potentials(self.coeffs, which, self.scheme)
        return self._cache[which]

    @property
    def W(self) -> FirstOrderPotential:
        return self["W"]


# ---------------------------------------------------------------------------
# lifting and factorization


def lift_and_rescale(
    E=None, H=None, coeffs: SampledCoefficients | None = None, Y: AugmentedField | None = None,
    direction: str = "forward", tol: float = 1e-8,
):
    """Map ``(E, H)`` to ``Y = (0, mu^{1/2} H, 0, gamma^{1/2} E)`` or back.

    The backward direction raises :class:`NonzeroScalarSlots` when the
    scalar slots exceed ``tol`` relative to the vector slots.
    """
    c = coeffs
    if direction == "forward":
        z = np.zeros(c.grid.shape, complex)
        return AugmentedField.from_parts(z, np.sqrt(c.mu) * H, z, np.sqrt(c.gamma) * E, c.grid)
    if direction == "backward":
        scale = max(np.abs(Y.u1).max(), np.abs(Y.u2).max(), 1.0)
        worst = max(np.abs(Y.f1).max(), np.abs(Y.f2).max())
        if worst > tol * scale:
            raise NonzeroScalarSlots(f"scalar slots reach {worst:.3e} (tol {tol * scale:.3e})")
        return Y.u2 / np.sqrt(c.gamma), Y.u1 / np.sqrt(c.mu)
    raise ValueError(f"unknown direction {direction!r}")


def interior_slice(grid: Grid3, layer: int = 2):
    return tuple(slice(layer, m - layer) for m in grid.shape)


def factorization_residual(
    Z: np.ndarray, coeffs: SampledCoefficients, variant: str = "Q", scheme: str = "fd2",
    layer: int = 2, potentials: PotentialMatrices | None = None, laplacian: str = "consistent",
) -> float:
    """L² norm over interior nodes of ``first(second Z) - (-Delta + Q_variant) Z``.

    ``laplacian="consistent"`` discretizes ``Delta`` as ``sum_j D_j D_j`` with
    the same first-derivative operator as ``P``, so ``P^2 = -Delta`` holds
    exactly on the grid and the residual measures only the potential terms;
    ``"compact"`` uses the 3-point stencil.
    """
    g = coeffs.grid
    pots = potentials or PotentialMatrices(coeffs, scheme)
    W = pots.W
    P = lambda Y: apply_P(Y, g, scheme)  # noqa: E731
    if variant == "Q":
        lhs = (lambda Y: P(Y) + W.apply(Y))(P(Z) - W.T.apply(Z))
    elif variant == "Qprime":
        lhs = (lambda Y: P(Y) - W.T.apply(Y))(P(Z) + W.apply(Z))
    elif variant == "Qhat":
        lhs = (lambda Y: P(Y) + W.H.apply(Y))(P(Z) - W.conj().apply(Z))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if laplacian == "consistent":
        lap = sum(F.partial(F.partial(Z, j, g, scheme), j, g, scheme) for j in range(3))
    else:
        lap = F.laplacian(Z, g, scheme)
    rhs = -lap + apply_dense(pots[variant], Z)
    sl = (slice(None),) + interior_slice(g, layer)
    r = (lhs - rhs)[sl]
    w = g.quadrature_weights()[sl[1:]]
    return float(np.sqrt(np.sum(w * np.sum(np.abs(r) ** 2, axis=0))))


# ---------------------------------------------------------------------------
# extension and reflection of solutions


def extend_coefficients(
    pair: CoefficientPair, domain, radius: float | None = None, check: bool = True
) -> CoefficientPair:
    """Even reflection across the flat plane, then blend to ``(mu0, eps0)``.

    ``radius`` (default: smallest ball containing the extended box, over
    ``1 - shell``) sets the cutoff support.  Raises
    :class:`NeumannViolation` if the normal derivative on Γ₀ is nonzero.
    """
    if domain.kind != "flat":
        raise NotFlat("extension needs a flat domain; map spherical domains first")
    if check:
        pair.check_neumann(domain.gamma0_points(), normal_axis=2)
    if radius is None:
        radius = domain.extension_radius()
    plane = domain.plane
    mu = ExtendedCoefficient(pair.mu, pair.mu0, radius, plane)
    gamma = ExtendedCoefficient(pair.gamma, pair.eps0, radius, plane)
    return replace(pair, mu=mu, gamma=gamma, name=(pair.name + "+ext") if pair.name else "ext")


J_DOT = np.array([1, -1, -1, 1, -1, 1, 1, -1], float)


def reflect_augmented(Y: np.ndarray) -> np.ndarray:
    """``Ydot(x) = Jdot Y(R x)`` on a grid mirror-symmetric in x3.

    ``Jdot = diag(1, -R_*, -1, R_*)`` with ``R_* = diag(1, 1, -1)``.
    """
    return J_DOT.reshape((8,) + (1,) * (Y.ndim - 1)) * Y[..., ::-1]


def reflect_vector(u: np.ndarray, sign: float = 1.0) -> np.ndarray:
    """``sign * R_* u(R x)`` for a vector field on an x3-symmetric grid."""
    v = u[..., ::-1].copy()
    v[..., 2, :, :, :] *= -1
    return sign * v


def reflect_solutions(
    E: np.ndarray | None = None, H: np.ndarray | None = None, Y: np.ndarray | None = None,
    residual: float = 0.0, tol: float = np.inf,
):
    """Differences ``(E - Edot, H - Hdot)`` or ``Y - Ydot``.

    ``Edot = R_* E o R`` and ``Hdot = -R_* H o R``; inputs must live on a grid
    symmetric about the reflection plane.  ``residual`` is the caller's
    measured residual of the input, checked against ``tol``.
    """
    if residual > tol:
        raise NotASolution(f"input residual {residual:.3e} exceeds {tol:.3e}")
    if Y is not None:
        return Y - reflect_augmented(Y)
    return E - reflect_vector(E, 1.0), H - reflect_vector(H, -1.0)

