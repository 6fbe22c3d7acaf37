"""Closed-form scalar coefficients and coefficient pairs.

A phantom is a callable ``x -> values`` taking coordinates of shape
``(3, ...)``.  Being callables rather than arrays lets the same coefficient
be sampled at nodes, Yee edges or faces, and mapped through the reflection
or the Kelvin transform by composition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigInvalid, LogBranch, NeumannViolation, NonElliptic

Coefficient = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Constant:
    value: complex

    def __call__(self, x):
        return np.full(np.shape(x)[1:], self.value, dtype=complex)


@dataclass(frozen=True)
class Polynomial:
    """``sum coef * x1^p1 x2^p2 x3^p3`` over ``terms = ((coef, (p1, p2, p3)), ...)``."""

    terms: tuple

    def __call__(self, x):
        out = np.zeros(np.shape(x)[1:], complex)
        for coef, powers in self.terms:
            out = out + coef * np.prod([x[i] ** p for i, p in enumerate(powers)], axis=0)
        return out


@dataclass(frozen=True)
class GaussianBump:
    """``background + amplitude * exp(-|x - center|^2 / (2 width^2))``."""

    background: complex
    amplitude: complex
    center: tuple[float, float, float]
    width: float

    def __call__(self, x):
        c = np.reshape(self.center, (3,) + (1,) * (np.ndim(x) - 1))
        r2 = np.sum((np.asarray(x) - c) ** 2, axis=0)
        return self.background + self.amplitude * np.exp(-r2 / (2 * self.width**2))


@dataclass(frozen=True)
class CompactBump:
    """``background + amplitude * (1 - |x - center|^2 / radius^2)^3`` inside the ball, C² overall."""

    background: complex
    amplitude: complex
    center: tuple[float, float, float]
    radius: float

    def __call__(self, x):
        c = np.reshape(self.center, (3,) + (1,) * (np.ndim(x) - 1))
        t = np.sum((np.asarray(x) - c) ** 2, axis=0) / self.radius**2
        return self.background + self.amplitude * np.clip(1 - t, 0, None) ** 3


@dataclass(frozen=True)
class Composed:
    """``base(point_map(x)) * factor(x)``; used for reflected and Kelvin-mapped data."""

    base: Coefficient
    point_map: Callable[[np.ndarray], np.ndarray]
    factor: Coefficient | None = None

    def __call__(self, x):
        v = self.base(self.point_map(np.asarray(x, float)))
        return v if self.factor is None else v * self.factor(x)


def quintic_ramp(t: np.ndarray) -> np.ndarray:
    """C² step from 1 (t <= 0) to 0 (t >= 1)."""
    t = np.clip(t, 0.0, 1.0)
    return 1 - t**3 * (10 - 15 * t + 6 * t**2)


def phantom_from_dict(d: dict) -> Coefficient:
    kind = d.get("type")
    if kind == "constant":
        return Constant(complex(d["value"]))
    if kind == "polynomial":
        return Polynomial(tuple((complex(t["coef"]), tuple(t["powers"])) for t in d["terms"]))
    if kind == "gaussian":
        return GaussianBump(
            complex(d.get("background", 1.0)),
            complex(d["amplitude"]),
            tuple(d["center"]),
            float(d["width"]),
        )
    if kind == "compact_bump":
        return CompactBump(
            complex(d.get("background", 1.0)),
            complex(d["amplitude"]),
            tuple(d["center"]),
            float(d["radius"]),
        )
    raise ConfigInvalid(f"unknown phantom type {kind!r}")


@dataclass(frozen=True)
class CoefficientPair:
    """Permeability ``mu`` and complex permittivity ``gamma = eps + i sigma/omega``.

    ``M`` is the ellipticity/a-priori bound and ``s`` the smoothness index.
    Background constants ``eps0``, ``mu0`` default to 1 (dimensionless units).
    """

    mu: Coefficient
    gamma: Coefficient
    omega: float
    M: float = 10.0
    s: float = 0.25
    eps0: float = 1.0
    mu0: float = 1.0
    name: str = ""

    @property
    def k2(self) -> float:
        return self.omega**2 * self.eps0 * self.mu0

    def sample(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.mu(x), complex), np.asarray(self.gamma(x), complex)

    def check_admissible(self, x: np.ndarray) -> None:
        """Uniform ellipticity at the sample points ``x``."""
        mu, gamma = self.sample(x)
        if np.any(gamma.real <= 0):
            raise LogBranch("Re gamma must be positive for the principal logarithm")
        if np.any(gamma.real < 1 / self.M) or np.any(mu.real < 1 / self.M):
            raise NonElliptic(f"ellipticity bound 1/M = {1 / self.M} violated")
        if np.any(np.abs(mu.imag) > 1e-12 * np.abs(mu)):
            raise NonElliptic("permeability must be real and positive")

    def check_neumann(self, points: np.ndarray, normal_axis: int = 2, step: float = 1e-5) -> None:
        """``d mu / dN = d gamma / dN = 0`` at ``points`` (shape ``(3, m)``)."""
        e = np.zeros((3, 1))
        e[normal_axis] = step
        for name, coef in (("mu", self.mu), ("gamma", self.gamma)):
            d = (coef(points + e) - coef(points - e)) / (2 * step)
            if np.max(np.abs(d), initial=0.0) > 1e-8 * self.M:
                raise NeumannViolation(f"normal derivative of {name} is {np.abs(d).max():.3e} on the plane")

    def with_coefficients(self, mu=None, gamma=None, name=None) -> "CoefficientPair":
        return CoefficientPair(
            mu or self.mu, gamma or self.gamma, self.omega, self.M, self.s, self.eps0, self.mu0,
            self.name if name is None else name,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientPair":
        try:
            return cls(
                phantom_from_dict(d["mu"]),
                phantom_from_dict(d["gamma"]),
                float(d["omega"]),
                float(d.get("M", 10.0)),
                float(d.get("s", 0.25)),
                float(d.get("eps0", 1.0)),
                float(d.get("mu0", 1.0)),
                d.get("name", ""),
            )
        except KeyError as exc:
            raise ConfigInvalid(f"phantom file misses key {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "CoefficientPair":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class ExtendedCoefficient:
    """Even reflection across ``x3 = plane`` then a C² blend to ``background``.

    Inside ``|x| <= inner`` the reflected coefficient is kept exactly; the
    quintic blend runs over the shell ``inner <= |x| <= radius``.
    """

    base: Coefficient
    background: complex
    radius: float
    plane: float = 0.0
    shell: float = field(default=0.25)

    @property
    def inner(self) -> float:
        return self.radius * (1 - self.shell)

    def __call__(self, x):
        x = np.asarray(x, float)
        y = x.copy()
        y[2] = self.plane - np.abs(x[2] - self.plane)
        r = np.sqrt(np.sum(x**2, axis=0))
        chi = quintic_ramp((r - self.inner) / (self.radius - self.inner))
        return self.background + chi * (self.base(y) - self.background)
