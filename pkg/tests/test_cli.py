import csv
import json
import re

import numpy as np
import pytest

from xicont.cli import ConfigError, load_config, main

SOFTPLUS_III = {"family": "softplus", "gamma1": -1, "gamma2": 1.5, "xi_min": -15, "xi_max": 15, "n": 120}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, command, cfg=None, out="out", extra=()):
    args = [command, "--out", str(tmp_path / out), *extra]
    if cfg is not None:
        args += ["--config", write(tmp_path, cfg)]
    return main(args), tmp_path / out


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_pi_multiples_parse(tmp_path):
    cfg = load_config(write(tmp_path, {"length": "2*pi", "lx": "0.5pi", "ly": "pi"}))
    assert cfg["length"] == pytest.approx(2 * np.pi)
    assert cfg["lx"] == pytest.approx(0.5 * np.pi)
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, {"length": "tau"}))


def test_unknown_key_rejected(tmp_path, capsys):
    code, _ = run(tmp_path, "spectrum", {"n": 50, "colour": "red"})
    assert code == 2
    assert "colour" in capsys.readouterr().err


@pytest.mark.parametrize(
    "cfg",
    [{"n": 2}, {"n": 50.5}, {"dimension": 3}, {"weight": "phi2"}, {"weight": "custom"}, {"seed": -1}],
)
def test_invalid_values(tmp_path, cfg):
    assert run(tmp_path, "spectrum", cfg)[0] == 2


def test_spectrum(tmp_path, capsys):
    code, out = run(tmp_path, "spectrum", {"n": 200})
    assert code == 0
    rows = read_csv(out / "spectrum.csv")
    assert rows[0] == ["lam1", "lam2", "nu", "f1", "norm_sq"]
    lam1, lam2, nu = (float(x) for x in rows[1][:3])
    h = np.pi / 201
    assert lam1 == pytest.approx((2 / h**2) * (1 - np.cos(np.pi / 201)), rel=1e-10)
    assert lam1 < nu < lam2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1
    assert summary["command"] == "spectrum"
    assert summary["config"]["n"] == 200
    assert summary["checks"]["poincare_violations"] == 0
    assert summary["passed"] is True


def test_seventeen_digits(tmp_path):
    _, out = run(tmp_path, "spectrum", {"n": 200})
    for cell in read_csv(out / "spectrum.csv")[1]:
        digits = re.sub(r"e.*$", "", cell).replace(".", "").replace("-", "").lstrip("0")
        assert len(digits) <= 17
        assert float(format(float(cell), ".17g")) == float(cell)


def test_seed_controls_random_check(tmp_path):
    _, a = run(tmp_path, "spectrum", {"n": 60}, out="a", extra=("--seed", "5"))
    _, b = run(tmp_path, "spectrum", {"n": 60}, out="b", extra=("--seed", "5"))
    _, c = run(tmp_path, "spectrum", {"n": 60}, out="c", extra=("--seed", "6"))
    ja, jb, jc = (json.loads((d / "summary.json").read_text()) for d in (a, b, c))
    assert ja == jb
    assert ja["config"]["seed"] == 5
    assert ja["checks"]["poincare_min_relative_margin"] != jc["checks"]["poincare_min_relative_margin"]


def test_curve_parabola_min(tmp_path):
    code, out = run(tmp_path, "curve", SOFTPLUS_III)
    assert code == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["headline"]["label"] == "parabola-min"
    assert isinstance(s["headline"]["mu0"], float)
    assert s["checks"]["trace_consistent_with_label"]
    rows = read_csv(out / "curve.csv")
    assert rows[0][:2] == ["xi", "mu"]
    assert float(rows[1][0]) == -15 and float(rows[-1][0]) == 15


def test_curve_is_byte_deterministic(tmp_path):
    _, a = run(tmp_path, "curve", SOFTPLUS_III, out="a")
    _, b = run(tmp_path, "curve", SOFTPLUS_III, out="b")
    assert (a / "curve.csv").read_bytes() == (b / "curve.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()


def test_slope_cap_violation_exits_2(tmp_path, capsys):
    code, out = run(tmp_path, "curve", {**SOFTPLUS_III, "gamma2": 5.0})
    assert code == 2
    assert "g'(u) <= nu1 < nu" in capsys.readouterr().err
    assert not (out / "curve.csv").exists()


def test_missing_family_exits_2(tmp_path):
    assert run(tmp_path, "curve", {"n": 50})[0] == 2
    assert run(tmp_path, "count", {**SOFTPLUS_III})[0] == 2  # empty mu list
    assert run(tmp_path, "fishing", {"family": "linear", "gamma": 0.5})[0] == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    code, _ = run(tmp_path, "curve", {**SOFTPLUS_III, "tol": 1e-17, "max_newton": 2})
    assert code == 3
    assert "truncated" in capsys.readouterr().err


def test_custom_weight_file(tmp_path):
    n = 80
    np.savetxt(tmp_path / "w.txt", 1 + np.linspace(0, 1, n))
    code, out = run(tmp_path, "spectrum", {"n": n, "weight": "custom", "weight_file": "w.txt"})
    assert code == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["headline"]["norm_sq"] > 0
    np.savetxt(tmp_path / "short.txt", np.ones(n - 1))
    assert run(tmp_path, "spectrum", {"n": n, "weight": "custom", "weight_file": "short.txt"})[0] == 2


def test_antimax(tmp_path, capsys):
    code, out = run(tmp_path, "antimax", {"n": 100, "scan_steps": 20})
    assert code == 0
    assert "delta_f=" in capsys.readouterr().out
    rows = read_csv(out / "antimax.csv")
    assert rows[0] == ["lambda", "minU", "maxU", "verdict"]
    assert {r[3] for r in rows[1:]} == {"strictly-positive"}


def test_fishing(tmp_path, capsys):
    code, out = run(tmp_path, "fishing", {"n": 100})
    assert code == 0
    assert "mu_bar=" in capsys.readouterr().out
    rows = read_csv(out / "fishing_curve.csv")
    assert rows[0][-3:] == ["xibar", "norm_u", "min_u"]
    s = json.loads((out / "summary.json").read_text())
    assert s["passed"], s["checks"]
    assert s["headline"]["counts"] == {"half_mu_bar": 2, "one_and_half_mu_bar": 0}


def test_count(tmp_path):
    cfg = {**SOFTPLUS_III, "n": 80, "mu": [-5.0, 10.0], "starts": 20}
    code, out = run(tmp_path, "count", cfg)
    assert code == 0
    rows = read_csv(out / "counts.csv")
    assert rows[0] == ["mu", "count"]
    assert [int(float(r[1])) for r in rows[1:]] == [0, 2]
