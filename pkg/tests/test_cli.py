import json

import numpy as np
import pytest

from maxstab.cli import main

FLAT = {"kind": "flat", "box_lo": [-0.5, -0.5, -1.0], "box_hi": [0.5, 0.5, 0.0], "resolution": 8}
WEAK = {
    "mu": {"type": "constant", "value": 1.0},
    "gamma": {"type": "gaussian", "background": 1.0, "amplitude": 0.01, "center": [0, 0, 0], "width": 0.35},
    "omega": 1.0,
}
BACKGROUND = {"mu": {"type": "constant", "value": 1.0}, "gamma": {"type": "constant", "value": 1.0}, "omega": 1.0}


def run(tmp_path, sub, cfg, *extra, name="out"):
    path = tmp_path / f"{sub}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = main([sub, "--config", str(path), "--out", str(out), *extra])
    return code, out, json.loads((out / "manifest.json").read_text())


def test_phantom(tmp_path):
    cfg = {"pair": WEAK, "grid": {"lo": [-1, -1, -1], "hi": [1, 1, 1], "n": 8}}
    code, out, man = run(tmp_path, "phantom", cfg, "--grid", "10")
    assert code == 0 and man["status"] == "ok"
    from maxstab.io import read_raw

    gamma, _ = read_raw(out / "gamma.raw")
    assert gamma.shape == (1, 10, 10, 10)
    assert set(man["artifacts"]) == {"mu.raw", "gamma.raw", "phantom.json"}


def test_forward_and_determinism(tmp_path):
    cfg = {"domain": FLAT, "pair": WEAK, "dictionary": {"count": 3}, "method": "direct"}
    code, _, m1 = run(tmp_path, "forward", cfg, "--seed", "4", name="a")
    _, _, m2 = run(tmp_path, "forward", cfg, "--seed", "4", name="b")
    _, _, m3 = run(tmp_path, "forward", cfg, "--seed", "5", name="c")
    assert code == 0
    assert m1["artifacts"] == m2["artifacts"] and m1["config_hash"] == m2["config_hash"]
    assert m1["artifacts"] != m3["artifacts"]
    assert m1["stages"] == ["domain", "forward", "write"]


def test_forward_at_resonance_fails_with_stage_tag(tmp_path):
    h = 1 / 8
    pair = dict(BACKGROUND, omega=float(np.sqrt(2) * 2 / h * np.sin(np.pi * h / 2)))
    code, _, man = run(tmp_path, "forward", {"domain": FLAT, "pair": pair, "method": "direct"})
    assert code != 0
    assert man["error"]["type"] == "NearResonance" and man["error"]["stage"] == "forward"


def test_cgo_report(tmp_path):
    cfg = {"domain": FLAT, "pair": WEAK, "xi": [1.0, 0.5, 0.3], "taus": [8, 16], "box": {"n": 16}}
    code, out, _ = run(tmp_path, "cgo", cfg)
    rows = (out / "cgo.csv").read_text().splitlines()
    assert code == 0 and len(rows) == 3 and rows[0].startswith("tau,")


def test_recover_identical_pairs_gives_zero_table(tmp_path):
    cfg = {"domain": FLAT, "pair1": WEAK, "pair2": WEAK, "tau": 8, "xis": [[1.0, 0.5, 0.3]], "box": {"n": 16}}
    code, out, _ = run(tmp_path, "recover", cfg, "--workers", "2")
    import csv

    rows = list(csv.DictReader((out / "recover.csv").open()))
    assert code == 0 and len(rows) == 2
    for r in rows:
        assert all(float(r[k]) == 0 for k in ("cgo_re", "cgo_im", "direct_re", "direct_im", "error"))


def test_stability_small(tmp_path):
    cfg = {
        "domain": {"kind": "flat", "box_lo": [-0.5, -0.5, -0.5], "box_hi": [0.5, 0.5, 0.0], "resolution": 8},
        "base": BACKGROUND,
        "family": {"target": "gamma", "center": [0, 0, -0.25], "radius": 0.2},
        "amplitudes": [0.01, 0.1],
        "dictionary": {"count": 4},
    }
    code, out, man = run(tmp_path, "stability", cfg)
    assert code == 0
    summary = json.loads((out / "stability.json").read_text())
    assert summary["monotone"] and summary["lambda_hat"] > 0
    assert any(k.startswith("stability/") for k in man["timings"])


def test_verify_writes_report(tmp_path):
    code, out, man = run(tmp_path, "verify", {"only": [2]})
    report = json.loads((out / "verify.json").read_text())
    assert code == 0 and report["all_passed"]
    assert report["criteria"][0]["number"] == 2


@pytest.mark.parametrize(
    "sub,cfg",
    [
        ("cgo", {"domain": FLAT}),
        ("stability", {"domain": FLAT, "base": BACKGROUND, "family": {"center": [0, 0, 0], "radius": 1},
                       "amplitudes": [0.1]}),
        ("verify", {"size": "huge"}),
    ],
)
def test_invalid_config(tmp_path, sub, cfg):
    code, _, man = run(tmp_path, sub, cfg)
    assert code != 0 and man["error"]["type"] == "ConfigInvalid" and man["error"]["stage"] == "config"


def test_nonconstant_base_rejected(tmp_path):
    cfg = {"domain": FLAT, "base": WEAK, "family": {"center": [0, 0, -0.5], "radius": 0.2}, "amplitudes": [0.1, 0.2]}
    code, _, man = run(tmp_path, "stability", cfg)
    assert code != 0 and man["error"]["type"] == "ConfigInvalid"
