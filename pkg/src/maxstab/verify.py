"""Acceptance checks shared by the test suite and ``maxstab verify``.

Each ``check_*`` function runs one experiment, compares against its
tolerance and returns a :class:`CheckResult`.  ``size`` selects the grid
scale: ``"default"`` is the full acceptance configuration, ``"quick"`` a
reduced one for smoke runs.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import fields as F
from .cgo import CgoBox, build_cgo, choose_zetas
from .fields import BoundaryFaces, Grid3
from .forward import (
    Dictionary,
    MaxwellSolver,
    cauchy_data_set,
    cauchy_distance,
    domain_topology,
    topology_from_domain,
)
from .geometry import DomainSpec, KelvinMap, build_domain
from .io import to_jsonable
from .phantoms import CoefficientPair, CompactBump, Constant, GaussianBump
from .reconstruction import (
    RL_CONSTANT,
    CarlemanParams,
    box_mask,
    carleman_check,
    cylindrical_integral,
    fit_slope,
    fourier_sample_fg,
    pairing_identity,
    rl_bound,
    stability_experiment,
)
from .reduction import PotentialMatrices, SampledCoefficients, extend_coefficients, factorization_residual


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d} {self.name} ({self.seconds:.1f} s)"

    def as_dict(self) -> dict:
        return to_jsonable(asdict(self))


def _timed(number: int, name: str, fn: Callable[[], tuple[bool, dict]]) -> CheckResult:
    t = time.perf_counter()
    ok, metrics = fn()
    return CheckResult(number, name, bool(ok), metrics, time.perf_counter() - t)


def _all_faces_gamma(grid: Grid3, inside: np.ndarray) -> BoundaryFaces:
    return BoundaryFaces.from_mask(grid, inside, lambda c, a, s: np.zeros(len(c), bool))


def random_bump_pair(rng: np.random.Generator, omega: float = 1.0, half_width: float = 1.0) -> CoefficientPair:
    """Smooth admissible pair: one Gaussian bump in each coefficient."""

    def bump(loss):
        return GaussianBump(
            1.0, rng.uniform(0.1, 0.4) * rng.choice([-1, 1]) + loss * 1j * rng.uniform(),
            tuple(rng.uniform(-0.4, 0.4, 3) * half_width), rng.uniform(0.3, 0.5) * half_width,
        )

    # permeability is real; the permittivity may carry a small conductivity
    return CoefficientPair(bump(0.0), bump(0.05), omega)


def random_smooth_field(rng: np.random.Generator, grid: Grid3, modes: int = 3) -> np.ndarray:
    """Eight-component field, a sum of a few low-frequency complex exponentials."""
    x = grid.mesh()
    out = np.zeros((8, *grid.shape), complex)
    for _ in range(modes):
        k = rng.uniform(-2, 2, 3)
        amp = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        out += amp.reshape(8, 1, 1, 1) * np.exp(1j * np.tensordot(k, x, axes=(0, 0)))
    return out


# ---------------------------------------------------------------------------
# 1. factorization


def check_factorization(size: str = "default", draws: int = 10, seed: int = 0) -> CheckResult:
    ns = (16, 32, 64) if size == "default" else (12, 24, 48)

    def run():
        rng = np.random.default_rng(seed)
        orders = {v: [] for v in ("Q", "Qprime", "Qhat")}
        for _ in range(draws):
            pair = random_bump_pair(rng)
            zs = rng.integers(0, 2**31)
            res = {v: [] for v in orders}
            for n in ns:
                g = Grid3.cube(n, 1.0, "node")
                c = SampledCoefficients.from_pair(pair, g)
                pots = PotentialMatrices(c, "fd2")
                Z = random_smooth_field(np.random.default_rng(zs), g)
                for v in orders:
                    res[v].append(factorization_residual(Z, c, v, potentials=pots))
            hs = [2.0 / n for n in ns]
            for v in orders:
                orders[v].append(fit_slope(hs, res[v]))
        worst = min(min(o) for o in orders.values())
        return worst >= 1.8, {"orders": orders, "min_order": worst, "grids": ns}

    return _timed(1, "factorization identity order", run)


# ---------------------------------------------------------------------------
# 2. zeta algebra


def check_zeta_algebra(seed: int = 0, draws: int = 100) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(draws):
            xi = rng.uniform(-5, 5, 3)
            tau = 10 ** rng.uniform(0, 3)
            k2 = rng.uniform(0.1, 4)
            zp = choose_zetas(xi, tau, k2)
            # relative to |zeta|^2: the bilinear square cancels terms of that size
            for z in (zp.zeta1, zp.zeta2):
                worst = max(worst, abs(z @ z - k2) / np.vdot(z, z).real)
            scale = np.linalg.norm(zp.zeta1) + np.linalg.norm(zp.zeta2)
            worst = max(worst, np.abs(zp.zeta1 - np.conj(zp.zeta2) + xi).max() / scale)
        taus = np.array([10.0, 100.0, 1000.0, 10000.0])
        xi = np.array([1.0, 0.5, 0.3])
        gaps = [choose_zetas(xi, t, 1.0).direction_gap for t in taus]
        slope = fit_slope(taus, gaps)
        return worst <= 1e-12 and slope <= -0.8, {"max_identity_error": worst, "direction_gap_slope": slope}

    return _timed(2, "zeta algebra", run)


# ---------------------------------------------------------------------------
# 3. CGO remainder decay

FLAT_U = DomainSpec("flat", (-0.5, -0.5, -1.0), (0.5, 0.5, 0.0), resolution=16)
WEAK_BUMP = dict(background=1.0, amplitude=0.008, center=(0.0, 0.0, 0.0), width=0.35)


def check_cgo_decay(size: str = "default") -> CheckResult:
    box = CgoBox(64 if size == "default" else 48, 2.0)

    def run():
        dom = build_domain(FLAT_U)
        pair = extend_coefficients(CoefficientPair(Constant(1.0), GaussianBump(**WEAK_BUMP), 1.0), dom)
        cache: dict = {}
        taus = (4.0, 8.0, 16.0, 32.0)
        norms, zn, adj, qrel = [], [], [], []
        for tau in taus:
            zp = choose_zetas([1.0, 0.5, 0.3], tau, pair.k2)
            A1, A2 = zp.fourier_amplitudes()
            s = build_cgo(pair, zp.zeta1, A1, None, "schrodinger", box, cache=cache)
            mask = box_mask(s.grid, FLAT_U.box_lo, FLAT_U.box_hi)
            norms.append(s.remainder_norm(mask))
            zn.append(np.linalg.norm(zp.zeta1))
            qrel.append(s.report.q_rel)
            a = build_cgo(pair, zp.zeta2, A2, None, "adjoint", box, cache=cache)
            adj.append(a.remainder_norm(mask))
        slope = fit_slope(zn, norms)
        return slope <= -0.8, {"taus": taus, "remainder_norms": norms, "zeta_norms": zn, "slope": slope,
                               "adjoint_slope": fit_slope(zn, adj), "q_rel": qrel}

    return _timed(3, "CGO remainder decay", run)


# ---------------------------------------------------------------------------
# 4. reflection lemma


def reflection_mismatch(n: int) -> dict:
    """Forward solve on the mirrored box with reflected coefficients; one-sided tangential traces on the plane."""
    U = build_domain(DomainSpec("flat", (-0.5, -0.5, -0.5), (0.5, 0.5, 0.0), resolution=(16, 16, 8)))
    pair = CoefficientPair(
        CompactBump(1.0, 0.2, (0.1, 0.0, -0.25), 0.2), CompactBump(1.0, 0.3, (0.0, -0.1, -0.25), 0.2), 1.0
    )
    ext = extend_coefficients(pair, U)
    g = Grid3((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5), n)
    inside = np.ones(g.shape, bool)
    topo = domain_topology(g, inside, _all_faces_gamma(g, inside))

    def data(x):
        return np.stack([np.cos(2 * x[1] + x[2]), np.sin(x[0] - 1.5 * x[2]), np.cos(x[0] + x[1] + 0.5 * x[2])])

    sol = MaxwellSolver(topo, ext, check_condition=False).solve(data, region="all")
    E = sol.E_cells()
    k = n // 2
    # (E - Edot) tangential on the plane = trace from below minus trace from above
    below = 1.5 * E[:2, :, :, k - 1] - 0.5 * E[:2, :, :, k - 2]
    above = 1.5 * E[:2, :, :, k] - 0.5 * E[:2, :, :, k + 1]
    mism = float(np.abs(below - above).max())
    scale = float(np.abs(E).max())
    return {"n": n, "h": g.h, "mismatch": mism, "scale": scale, "ratio_to_h2": mism / (g.h**2 * scale),
            "residual": sol.residual}


def check_reflection(size: str = "default") -> CheckResult:
    ns = (32, 64) if size == "default" else (16, 32)

    def run():
        rows = [reflection_mismatch(n) for n in ns]
        order = fit_slope([r["h"] for r in rows], [r["mismatch"] for r in rows])
        ok = all(r["ratio_to_h2"] <= 10 for r in rows) and order >= 1.8
        return ok, {"rows": rows, "order": order}

    return _timed(4, "reflection lemma", run)


# ---------------------------------------------------------------------------
# 5. pairing identity

PAIRING_PAIRS = (
    CoefficientPair(GaussianBump(1.0, 0.2, (0.1, 0, -0.4), 0.25), GaussianBump(1.0, 0.3, (0, 0.1, -0.5), 0.3), 1.0),
    CoefficientPair(Constant(1.0), GaussianBump(1.0, 0.1, (0, 0, -0.5), 0.3), 1.0),
)


def manufactured_fields(grid: Grid3) -> tuple[np.ndarray, np.ndarray]:
    x = grid.mesh()
    Z = np.stack([np.exp(1j * (k + 1) * x[0] + 0.3 * k * x[2]) * np.cos(x[1]) for k in range(8)])
    Y = np.stack([np.exp(-1j * (k - 2) * x[1] + 0.2 * x[0]) * np.sin(x[2] + k) for k in range(8)])
    return Z, Y


def check_pairing(size: str = "default") -> CheckResult:
    ns = (16, 24, 32) if size == "default" else (12, 16, 24)

    def run():
        p1, p2 = PAIRING_PAIRS
        gaps, hs, same, ablation = [], [], [], []
        for n in ns:
            g = Grid3((-0.5, -0.5, -1), (0.5, 0.5, 0), n, "node")
            c1, c2 = SampledCoefficients.from_pair(p1, g), SampledCoefficients.from_pair(p2, g)
            Z, Y = manufactured_fields(g)
            r = pairing_identity(Z, Y, c1, c2)
            r0 = pairing_identity(Z, Y, c1, c1)
            gaps.append(r.gap)
            hs.append(g.h)
            same.append(max(abs(r0.interior_value), r0.gap) / (r0.norm_Z * r0.norm_Y))
            ablation.append(abs(r.boundary_gamma0))
        order = fit_slope(hs, gaps)
        ok = order >= 1.8 and max(same) <= 1e-12
        return ok, {"gaps": gaps, "order": order, "identical_pair_relative": same, "gamma0_term": ablation}

    return _timed(5, "pairing identity", run)


# ---------------------------------------------------------------------------
# 6. Riemann-Lebesgue bound


def check_rl(seed: int = 0, draws: int = 20) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        g = Grid3.cube(48, 1.0)
        fails = 0
        margins = []
        for i in range(draws):
            d = (0.05, 0.1, 0.2)[i % 3]
            q = CompactBump(0.0, rng.uniform(0.5, 2) + 1j * rng.uniform(-1, 1), tuple(rng.uniform(-0.3, 0.3, 3)),
                            rng.uniform(0.3, 0.6))
            k = rng.uniform(-20, 20, 3)
            b = rng.uniform(-5, 5)

            def phase(y, k=k, b=b):
                r2 = np.sum(y**2, axis=0)
                return np.tensordot(k, y, axes=(0, 0)) + b * r2, k.reshape(3, 1, 1, 1) + 2 * b * y

            res = rl_bound(q, phase, g, d)
            fails += not res.holds
            margins.append(res.rhs - res.lhs)
        # unit cube, linear phase: analytic lhs
        cube_fail = 0
        gc = Grid3((-0.25,) * 3, (1.25,) * 3, 48)

        def cube(y):
            return np.all((y >= 0) & (y <= 1), axis=0).astype(float)

        taus = np.unique(np.round(np.logspace(0, 3, 13)))
        for tau in taus:
            lhs = abs(np.exp(1j * tau) - 1) / tau
            res = rl_bound(cube, lambda y, t=tau: (t * y[0], np.array([t, 0, 0]).reshape(3, 1, 1, 1)), gc, 0.1)
            cube_fail += not lhs <= res.rhs
        ok = fails == 0 and cube_fail == 0
        return ok, {"random_failures": fails, "min_margin": min(margins), "cube_failures": cube_fail,
                    "constant": RL_CONSTANT}

    return _timed(6, "Riemann-Lebesgue bound", run)


# ---------------------------------------------------------------------------
# 7. cylindrical integral

CYL_GRID = ((1.0, 2.0, 4.0), (16.0, 64.0, 256.0))


def cylinder_constants(form: str = "ball", k2: float = 1.0) -> np.ndarray:
    Rs, taus = CYL_GRID
    return np.array([[cylindrical_integral(R, t, k2, 1.0, form) * t / R for t in taus] for R in Rs])


def check_cylinder() -> CheckResult:
    def run():
        C = cylinder_constants("ball")
        spread = float(C.max() / C.min())
        maj = cylinder_constants("majorant")
        return spread <= 3, {"constants": C, "spread": spread, "majorant_spread": float(maj.max() / maj.min()),
                             "cylinder_spread": float((lambda c: c.max() / c.min())(cylinder_constants("cylinder")))}

    return _timed(7, "cylindrical integral", run)


# ---------------------------------------------------------------------------
# 8. Carleman check


def gaussian_corpus():
    return [((0.0, 0.0, 0.0), 0.2), ((0.3, -0.2, 0.1), 0.15), ((-0.2, 0.3, -0.3), 0.25)]


def check_carleman(n: int = 96) -> CheckResult:
    def run():
        g = Grid3.cube(n, 1.0)
        x = g.mesh()
        hs = (0.2, 0.1, 0.05)
        slopes, ratios = [], []
        for c, s in gaussian_corpus():
            dx = x - np.reshape(c, (3, 1, 1, 1))
            r2 = np.sum(dx**2, axis=0)
            u = np.exp(-r2 / (2 * s * s))
            gu = -dx / s**2 * u
            lu = (r2 / s**4 - 3 / s**2) * u
            row = []
            for h in hs:
                p = CarlemanParams((0.0, 0.0, -2.0), h, g.lo, g.hi)
                row.append(carleman_check(u, g, p, gu, lu).ratio)
            ratios.append(row)
            slopes.append(float(np.polyfit(1 / np.array(hs), row, 1)[0]))
        ok = all(abs(s) <= 0.1 for s in slopes)
        return ok, {"ratios": ratios, "slopes_vs_inverse_h": slopes}

    return _timed(8, "Carleman ratio", run)


# ---------------------------------------------------------------------------
# 9. Fourier recovery

FOURIER_XIS = ((1.0, 0.5, 0.3), (0.5, -1.0, 0.2), (2.0, 0.0, 1.0), (-1.0, 1.0, -0.5), (0.3, 0.8, 1.5))


def check_fourier(size: str = "default") -> CheckResult:
    box = CgoBox(64 if size == "default" else 48, 2.0)
    taus = (8.0, 16.0, 32.0, 64.0)

    def run():
        dom = build_domain(FLAT_U)
        region = (FLAT_U.box_lo, (0.5, 0.5, 1.0))
        bump = CoefficientPair(Constant(1.0), GaussianBump(1.0, 0.01, (0.0, 0.0, 0.0), 0.35), 1.0)
        const = CoefficientPair(Constant(1.0), Constant(1.0), 1.0)
        e1, e2 = extend_coefficients(bump, dom), extend_coefficients(const, dom)
        cache: dict = {}
        slopes, errors = [], []
        for xi in FOURIER_XIS:
            errs = []
            for tau in taus:
                zp = choose_zetas(xi, tau, e1.k2)
                errs.append(fourier_sample_fg(e1, e2, zp, "f", region, box, cache, reflect=False).error)
            errors.append(errs)
            slopes.append(fit_slope(taus, errs))
        zp = choose_zetas(FOURIER_XIS[0], taus[0], e1.k2)
        same = fourier_sample_fg(e1, e1, zp, "f", region, box, cache, reflect=False)
        zero = max(abs(same.cgo_estimate), abs(same.direct_value))
        ok = max(slopes) <= -0.8 and zero <= 1e-12
        return ok, {"errors": errors, "slopes": slopes, "identical_pair": zero}

    return _timed(9, "Fourier recovery", run)


# ---------------------------------------------------------------------------
# 10. Kelvin reduction

SPHERICAL_U = DomainSpec("spherical", (-0.5, -0.5, -2.05), (0.5, 0.5, -1.2), 16, center=(0, 0, -1), radius=1.0,
                         image_resolution=16)
KELVIN_PERTURBATIONS = ((0.05, -1.6), (0.1, -1.6), (0.2, -1.5), (0.1, -1.7), (0.3, -1.6))


def kelvin_plane_wave_residuals(ns=(32, 64, 128), omega: float = 1.0, mu: float = 1.3, gamma: float = 0.8):
    """Relative L² residual of the transformed system for a pulled-back plane wave."""
    sd = build_domain(SPHERICAL_U)
    K = KelvinMap(sd.r1)
    k = omega * np.sqrt(mu * gamma)
    d = np.array([0.3, 0.5, 0.8]) / np.linalg.norm([0.3, 0.5, 0.8])
    A = np.array([1.0, 0, 0]) - d * d[0]
    A /= np.linalg.norm(A)

    def wave(vec):
        return lambda y: vec.reshape(3, *(1,) * (y.ndim - 1)) * np.exp(1j * k * np.tensordot(d, y, axes=(0, 0)))

    Et, Ht = K.solution(wave(A), wave(k / (omega * mu) * np.cross(d, A)))
    res, hs = [], []
    for n in ns:
        g = Grid3(sd.image.grid.lo, sd.image.grid.hi, n)
        x = g.mesh()
        c = K.factor(x)
        e, hh = Et(x), Ht(x)
        r1 = F.curl(e, g) - 1j * omega * (c * mu) * hh
        r2 = F.curl(hh, g) + 1j * omega * (c * gamma) * e
        sl = (slice(None),) + (slice(1, -1),) * 3
        num = np.sum(np.abs(r1[sl]) ** 2) + np.sum(np.abs(r2[sl]) ** 2)
        den = np.sum(np.abs(e) ** 2) + np.sum(np.abs(hh) ** 2)
        res.append(float(np.sqrt(num / den)))
        hs.append(g.h)
    return hs, res


def kelvin_distance_pairs(count: int = 12):
    sd = build_domain(SPHERICAL_U)
    img = sd.image
    K = KelvinMap(sd.r1)
    base = CoefficientPair(Constant(1.0), Constant(1.0), 1.0)
    inU = Dictionary(count=count, width=0.2).inputs(sd.faces)
    inV = [K.pullback_form(f) for f in inU]
    topoU, topoV = topology_from_domain(sd), topology_from_domain(img)

    def eff(p):
        return p.with_coefficients(K.coefficient(p.mu), K.coefficient(p.gamma))

    CU0 = cauchy_data_set(MaxwellSolver(topoU, base), inU, "base")
    CV0 = cauchy_data_set(MaxwellSolver(topoV, eff(base)), inV, "base")
    rows = []
    for a, cz in KELVIN_PERTURBATIONS:
        p = CoefficientPair(Constant(1.0), CompactBump(1.0, a, (0.0, 0.0, cz), 0.25), 1.0)
        dU = cauchy_distance(CU0, cauchy_data_set(MaxwellSolver(topoU, p), inU, "p"))
        dV = cauchy_distance(CV0, cauchy_data_set(MaxwellSolver(topoV, eff(p)), inV, "p"))
        rows.append({"amplitude": a, "center_x3": cz, "delta_original": dU, "delta_mapped": dV})
    return rows


def check_kelvin(size: str = "default", stability_factor: float = 2.0) -> CheckResult:
    ns = (32, 64, 128) if size == "default" else (16, 32, 64)

    def run():
        hs, res = kelvin_plane_wave_residuals(ns)
        order = fit_slope(hs, res)
        rows = kelvin_distance_pairs(12 if size == "default" else 6)
        ratios = np.array([r["delta_mapped"] / r["delta_original"] for r in rows])
        C = float(np.exp(np.mean(np.log(ratios))))
        ok = order >= 1.8 and bool(np.all(ratios <= stability_factor * C))
        return ok, {"residuals": res, "order": order, "rows": rows, "fitted_C": C, "ratios": ratios}

    return _timed(10, "Kelvin reduction", run)


# ---------------------------------------------------------------------------
# 11. stability curve

STABILITY_U = DomainSpec("flat", (-0.5, -0.5, -0.5), (0.5, 0.5, 0.0), resolution=(32, 32, 16))
STABILITY_AMPLITUDES = (1e-3, 3e-3, 1e-2, 3e-2, 1e-1)


def bump_family(a: float) -> CoefficientPair:
    """Permittivity bump supported away from the boundary, so traces and normal derivatives agree on it."""
    return CoefficientPair(Constant(1.0), CompactBump(1.0, a, (0.0, 0.0, -0.25), 0.2), 1.0, name=f"bump{a:g}")


def check_stability(size: str = "default", pipeline: bool = True) -> CheckResult:
    spec = STABILITY_U if size == "default" else DomainSpec("flat", STABILITY_U.box_lo, STABILITY_U.box_hi,
                                                             resolution=(16, 16, 8))
    count = 24 if size == "default" else 8

    def run():
        dom = build_domain(spec)
        base = CoefficientPair(Constant(1.0), Constant(1.0), 1.0, name="base")
        curve = stability_experiment(
            dom, base, bump_family, STABILITY_AMPLITUDES, Dictionary(count=count),
            pipeline={"amplitude": STABILITY_AMPLITUDES[0]} if pipeline else None,
        )
        ok = curve.monotone and curve.lambda_hat > 0
        return ok, {"rows": curve.rows(), "lambda_hat": curve.lambda_hat, "lambda_bound": curve.lambda_bound,
                    "monotone": curve.monotone, "pipeline": curve.pipeline}

    return _timed(11, "stability curve", run)


CHECKS: dict[int, Callable[..., CheckResult]] = {
    1: check_factorization,
    2: check_zeta_algebra,
    3: check_cgo_decay,
    4: check_reflection,
    5: check_pairing,
    6: check_rl,
    7: check_cylinder,
    8: check_carleman,
    9: check_fourier,
    10: check_kelvin,
    11: check_stability,
}

SIZED = {1, 3, 4, 5, 9, 10, 11}


def run_all(size: str = "default", only: list[int] | None = None, log: Callable[[str], None] | None = None):
    out = []
    for num, fn in CHECKS.items():
        if only and num not in only:
            continue
        res = fn(size) if num in SIZED else fn()
        if log:
            log(res.line())
        out.append(res)
    return out
