"""``maxstab`` command line: config-driven batch runs of each pipeline stage.

Every run writes its artifacts plus ``manifest.json`` (config hash, seed,
stage timings, artifact hashes) into ``--out``.  Timings live only in the
manifest so that the artifacts themselves are reproducible bit for bit.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import io
from .errors import ConfigInvalid, MaxstabError

SUBCOMMANDS = ("phantom", "forward", "cgo", "recover", "stability", "verify")

_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_pair = {"type": "object", "required": ["mu", "gamma", "omega"]}
_domain = {"type": "object", "required": ["kind", "box_lo", "box_hi"]}
_box = {"type": "object", "properties": {"n": {"type": "integer", "minimum": 8}, "half_width": {"type": "number"}}}

SCHEMAS = {
    "phantom": {
        "type": "object", "required": ["pair", "grid"],
        "properties": {"pair": _pair, "grid": {"type": "object", "required": ["lo", "hi", "n"]}},
    },
    "forward": {
        "type": "object", "required": ["domain", "pair"],
        "properties": {"domain": _domain, "pair": _pair, "dictionary": {"type": "object"},
                       "omega": {"type": "number"},
                       "method": {"enum": ["auto", "direct", "iterative"]}},
    },
    "cgo": {
        "type": "object", "required": ["domain", "pair", "xi", "taus"],
        "properties": {"domain": _domain, "pair": _pair, "xi": _vec3,
                       "taus": {"type": "array", "items": {"type": "number", "minimum": 1}}, "box": _box,
                       "variant": {"enum": ["schrodinger", "adjoint"]}},
    },
    "recover": {
        "type": "object", "required": ["domain", "pair1", "pair2", "tau"],
        "properties": {"domain": _domain, "pair1": _pair, "pair2": _pair, "tau": {"type": "number", "minimum": 1},
                       "xis": {"type": "array", "items": _vec3},
                       "xi_ball": {"type": "object", "required": ["radius", "lattice"]},
                       "channels": {"type": "array", "items": {"enum": ["f", "g"]}}, "box": _box},
    },
    "stability": {
        "type": "object", "required": ["domain", "base", "family", "amplitudes"],
        "properties": {"domain": _domain, "base": _pair,
                       "family": {"type": "object", "required": ["center", "radius"]},
                       "amplitudes": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                                      "minItems": 2},
                       "dictionary": {"type": "object"}, "s": {"type": "number"}, "pipeline": {"type": "boolean"}},
    },
    "verify": {
        "type": "object",
        "properties": {"size": {"enum": ["default", "quick"]}, "only": {"type": "array", "items": {"type": "integer"}}},
    },
}


@dataclass
class RunManifest:
    subcommand: str
    config_hash: str
    seed: int
    stages: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    status: str = "ok"
    error: dict | None = None

    def stage(self, name: str):
        return _StageTimer(self, name)


class _StageTimer:
    def __init__(self, manifest: RunManifest, name: str):
        self.m, self.name = manifest, name

    def __enter__(self):
        self.m.stages.append(self.name)
        self.t = time.perf_counter()
        return self

    def __exit__(self, typ, exc, tb):
        self.m.timings[self.name] = time.perf_counter() - self.t
        if isinstance(exc, MaxstabError) and exc.stage is None:
            exc.with_stage(self.name)
        return False


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def load_config(path: str | None, sub: str) -> dict:
    if path is None:
        cfg: dict = {}
    else:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}", stage="config") from exc
    try:
        jsonschema.validate(cfg, SCHEMAS[sub])
    except jsonschema.ValidationError as exc:
        raise ConfigInvalid(f"{sub} config: {exc.message}", stage="config") from exc
    return cfg


def _domain(cfg: dict, grid: int | None):
    from .geometry import DomainSpec, build_domain

    d = dict(cfg)
    if grid is not None:
        d["resolution"] = grid
    return build_domain(DomainSpec.from_dict(d))


def _pair(d: dict):
    from .phantoms import CoefficientPair

    return CoefficientPair.from_dict(d)


def _dictionary(cfg: dict | None, seed: int):
    from .forward import Dictionary

    d = dict(cfg or {})
    d["seed"] = seed
    return Dictionary.from_dict(d)


# ---------------------------------------------------------------------------
# subcommands


def run_phantom(cfg, args, man: RunManifest, out: Path):
    from .fields import Grid3

    with man.stage("sample"):
        pair = _pair(cfg["pair"])
        g = cfg["grid"]
        n = args.grid or g["n"]
        grid = Grid3(tuple(g["lo"]), tuple(g["hi"]), n)
        x = grid.mesh()
        pair.check_admissible(x)
        mu, gamma = pair.sample(x)
    with man.stage("write"):
        for name, arr in (("mu", mu), ("gamma", gamma)):
            p = out / f"{name}.raw"
            io.write_raw(p, np.broadcast_to(arr, grid.shape), grid.h)
            man.artifacts[p.name] = io.file_hash(p)
        summary = {"grid": list(grid.shape), "h": grid.h, "k2": pair.k2,
                   "mu_range": [float(np.min(np.real(mu))), float(np.max(np.real(mu)))],
                   "gamma_range": [float(np.min(np.real(gamma))), float(np.max(np.real(gamma)))]}
        _emit_json(out / "phantom.json", summary, man)


def run_forward(cfg, args, man, out):
    from .forward import MaxwellSolver, cauchy_data_set, save_cauchy_set, topology_from_domain

    with man.stage("domain"):
        dom = _domain(cfg["domain"], args.grid)
        pair = _pair(cfg["pair"])
        inputs = _dictionary(cfg.get("dictionary"), args.seed).inputs(dom.faces)
    with man.stage("forward"):
        solver = MaxwellSolver(topology_from_domain(dom), pair, cfg.get("omega"), cfg.get("method", "auto"))
        cs = cauchy_data_set(solver, inputs, pair.name or "pair")
    with man.stage("write"):
        save_cauchy_set(cs, out / "cauchy")
        for p in sorted((out / "cauchy").iterdir()):
            man.artifacts[f"cauchy/{p.name}"] = io.file_hash(p)
        _emit_json(out / "forward.json", {"inputs": len(inputs), "condition": solver.condition,
                                          "method": solver.method}, man)


def run_cgo(cfg, args, man, out):
    from .cgo import CgoBox, build_cgo, choose_zetas
    from .reduction import extend_coefficients

    with man.stage("setup"):
        dom = _domain(cfg["domain"], None)
        pair = extend_coefficients(_pair(cfg["pair"]), dom)
        b = cfg.get("box", {})
        box = CgoBox(args.grid or b.get("n", 64), b.get("half_width", 2.0))
    rows = []
    cache: dict = {}
    variant = cfg.get("variant", "schrodinger")
    with man.stage("cgo"):
        for tau in cfg["taus"]:
            zp = choose_zetas(cfg["xi"], tau, pair.k2)
            A1, A2 = zp.fourier_amplitudes()
            z, A = (zp.zeta1, A1) if variant == "schrodinger" else (zp.zeta2, A2)
            sol = build_cgo(pair, z, A, None, variant, box, cache=cache)
            rows.append({"tau": tau, "zeta_norm": float(np.linalg.norm(z)),
                         "remainder_norm": sol.remainder_norm(), "first_order_residual": sol.first_order_residual,
                         **sol.report.as_dict()})
    with man.stage("write"):
        _emit_csv(out / "cgo.csv", rows, man)


def _xi_list(cfg) -> list[tuple[float, float, float]]:
    if "xis" in cfg:
        return [tuple(map(float, x)) for x in cfg["xis"]]
    ball = cfg["xi_ball"]
    R, m = float(ball["radius"]), int(ball["lattice"])
    ax = np.linspace(-R, R, m)
    pts = [(a, b, c) for a in ax for b in ax for c in ax if a * a + b * b + c * c <= R * R and np.hypot(a, b) > 1e-9]
    return sorted(pts)


def run_recover(cfg, args, man, out):
    from .cgo import CgoBox, choose_zetas
    from .reconstruction import fourier_sample_fg
    from .reduction import extend_coefficients

    with man.stage("setup"):
        dom = _domain(cfg["domain"], None)
        e1 = extend_coefficients(_pair(cfg["pair1"]), dom)
        e2 = extend_coefficients(_pair(cfg["pair2"]), dom)
        ext_grid, _ = dom.extended_grid()
        region = (ext_grid.lo, ext_grid.hi)
        b = cfg.get("box", {})
        box = CgoBox(args.grid or b.get("n", 64), b.get("half_width", 2.0))
        xis = _xi_list(cfg)
        channels = cfg.get("channels", ["f", "g"])

    def task(xi):
        cache: dict = {}
        zp = choose_zetas(xi, cfg["tau"], e1.k2)
        out_rows = []
        for ch in channels:
            fs = fourier_sample_fg(e1, e2, zp, ch, region, box, cache)
            out_rows.append({"xi1": xi[0], "xi2": xi[1], "xi3": xi[2], "channel": ch,
                             "cgo_re": fs.cgo_estimate.real, "cgo_im": fs.cgo_estimate.imag,
                             "direct_re": fs.direct_value.real, "direct_im": fs.direct_value.imag,
                             "error": fs.error, "reflected_abs": abs(fs.error_terms["reflected_value"]),
                             "reflected_bound": fs.error_terms["reflected_bound"]})
        return out_rows

    with man.stage("fourier"):
        with ThreadPoolExecutor(max_workers=max(1, args.workers)) as ex:
            results = list(ex.map(task, xis))
    rows = sorted((r for rs in results for r in rs), key=lambda r: (r["xi1"], r["xi2"], r["xi3"], r["channel"]))
    with man.stage("write"):
        _emit_csv(out / "recover.csv", rows, man)


def _family(cfg: dict, base):
    from .phantoms import CompactBump, Constant

    fam = cfg["family"]
    target = fam.get("target", "gamma")
    if not all(isinstance(c, Constant) for c in (base.mu, base.gamma)):
        raise ConfigInvalid("the bump family needs constant base coefficients", stage="config")

    def member(a):
        def bump(bg):
            return CompactBump(bg.value, a, tuple(fam["center"]), float(fam["radius"]))

        mu = bump(base.mu) if target in ("mu", "both") else None
        gamma = bump(base.gamma) if target in ("gamma", "both") else None
        return base.with_coefficients(mu, gamma, name=f"a={a:g}")

    return member


def run_stability(cfg, args, man, out):
    from .reconstruction import stability_experiment

    with man.stage("setup"):
        dom = _domain(cfg["domain"], args.grid)
        base = _pair(cfg["base"])
        dic = _dictionary(cfg.get("dictionary"), args.seed)
    with man.stage("stability"):
        pipeline = {"amplitude": cfg["amplitudes"][0]} if cfg.get("pipeline", False) else None
        curve = stability_experiment(dom, base, _family(cfg, base), cfg["amplitudes"], dic,
                                     s=cfg.get("s", 0.25), pipeline=pipeline)
    for k, v in curve.stages.items():
        man.timings[f"stability/{k}"] = v
    with man.stage("write"):
        _emit_csv(out / "stability_curve.csv", curve.rows(), man)
        pipe = {k: v for k, v in curve.pipeline.items() if not k.endswith("_s")}
        man.timings.update({f"pipeline/{k}": v for k, v in curve.pipeline.items() if k.endswith("_s")})
        if "budget" in pipe:
            _emit_csv(out / "stage_budget.csv", [{"term": k, "value": float(v)} for k, v in pipe["budget"].items()], man)
        _emit_json(out / "stability.json", {"lambda_hat": curve.lambda_hat, "lambda_bound": curve.lambda_bound,
                                            "monotone": curve.monotone, "pipeline": pipe}, man)


def run_verify(cfg, args, man, out):
    from .verify import run_all

    with man.stage("verify"):
        results = run_all(cfg.get("size", "default"), cfg.get("only"), log=print)
    for r in results:
        man.timings[f"criterion_{r.number}"] = r.seconds
    report = {"all_passed": all(r.passed for r in results),
              "criteria": [{k: v for k, v in r.as_dict().items() if k != "seconds"} for r in results]}
    _emit_json(out / "verify.json", report, man)
    if not report["all_passed"]:
        man.status = "failed"


RUNNERS = {"phantom": run_phantom, "forward": run_forward, "cgo": run_cgo, "recover": run_recover,
           "stability": run_stability, "verify": run_verify}


def _emit_json(path: Path, obj, man: RunManifest):
    io.write_json(path, obj)
    man.artifacts[path.name] = io.file_hash(path)


def _emit_csv(path: Path, rows, man: RunManifest):
    io.write_csv(path, rows)
    man.artifacts[path.name] = io.file_hash(path)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxstab", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, default=0, help="seed for every random draw")
    p.add_argument("--workers", type=int, default=1, help="worker threads for parallel sweeps")
    p.add_argument("--out", default="maxstab_out", help="output directory")
    p.add_argument("--grid", type=int, default=None, help="override the grid resolution")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(args.subcommand, "", args.seed)
    code = 0
    try:
        cfg = load_config(args.config, args.subcommand)
        man.config_hash = config_hash({"config": cfg, "grid": args.grid})
        RUNNERS[args.subcommand](cfg, args, man, out)
        if man.status != "ok":
            code = 1
    except MaxstabError as exc:
        man.status = "error"
        man.error = {"type": type(exc).__name__, "stage": exc.stage, "message": str(exc),
                     "info": io.to_jsonable(exc.info)}
        print(f"maxstab {args.subcommand}: {type(exc).__name__} in stage {exc.stage}: {exc}", file=sys.stderr)
        code = 2
    except Exception as exc:  # report unexpected failures with the stage they happened in
        man.status = "error"
        stage = man.stages[-1] if man.stages else "config"
        man.error = {"type": type(exc).__name__, "stage": stage, "message": str(exc), "info": {}}
        print(f"maxstab {args.subcommand}: unexpected {type(exc).__name__} in stage {stage}: {exc}", file=sys.stderr)
        code = 3
    io.write_json(out / "manifest.json", man.__dict__)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
