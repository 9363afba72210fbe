"""Command-line front end.

    xicont {spectrum,curve,antimax,fishing,count} [--config FILE] [--out DIR] [--seed N]

The config is a flat JSON object; unknown keys are rejected.  Every command
writes CSV artifacts plus ``summary.json`` into ``--out``.  Exit status is 0
on success, 2 for invalid input (including violated solvability
hypotheses) and 3 for numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    AnalysisError,
    asymptotic_slopes,
    classify,
    find_solutions,
    find_turning_point,
    second_derivative_identity,
)
from .antimax import NearSingularError, estimate_delta
from .continuation import (
    BorderedSolveError,
    HomotopyError,
    HypothesisViolation,
    Problem,
    StepControl,
    trace_curve,
    write_curve_csv,
)
from .fishing import FishingError, FishingScenario, trace_fishing_curve
from .grid import GridError, GridSpec, build_grid, build_laplacian, laplacian_1d_eigenvalues
from .nonlinearity import (
    NonlinearityError,
    make_fishing_family,
    make_linear,
    make_softplus_family,
    validate,
)
from .spectral import EigensolverError, compute_eigenpairs, compute_nu, verify_poincare

log = logging.getLogger("xicont")

SCHEMA_VERSION = 1
COMMANDS = ("spectrum", "curve", "antimax", "fishing", "count")
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3

# key -> (default, kind)
DEFAULTS = {
    "dimension": (1, "int"),
    "length": ("pi", "float"),
    "n": (200, "int"),
    "lx": (1.0, "float"),
    "ly": (1.0, "float"),
    "nx": (20, "int"),
    "ny": (20, "int"),
    "weight": ("constant", "str"),
    "weight_value": (1.0, "float"),
    "weight_file": (None, "path"),
    "family": (None, "str"),
    "gamma1": (None, "float"),
    "gamma2": (None, "float"),
    "gamma": (None, "float"),
    "a": (None, "float"),
    "b": (1.0, "float"),
    "c": (None, "float"),
    "xi_min": (-20.0, "float"),
    "xi_max": (20.0, "float"),
    "anchor": (0.0, "float"),
    "step_initial": (0.05, "float"),
    "step_max_relative": (0.1, "float"),
    "step_max": (None, "float"),
    "tol": (1e-10, "float"),
    "max_newton": (25, "int"),
    "slope_threshold": (50.0, "float"),
    "resolution": (None, "float"),
    "scan_steps": (100, "int"),
    "xi_max_factor": (2.0, "float"),
    "mu": ([], "floats"),
    "starts": (40, "int"),
    "poincare_samples": (1000, "int"),
    "seed": (0, "int"),
}


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


_PI = re.compile(r"^\s*([-+]?\d*\.?\d*(?:[eE][-+]?\d+)?)\s*\*?\s*pi\s*$")


def _number(key, value):
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI.match(value)
        if m:
            coef = m.group(1)
            return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
    raise ConfigError(f"{key}: expected a number or a multiple of 'pi', got {value!r}")


def load_config(path: str | None, seed: int | None = None) -> dict:
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {}
    for key, (default, kind) in DEFAULTS.items():
        value = raw.get(key, default)
        if value is None:
            cfg[key] = None
        elif kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{key}: expected an integer, got {value!r}")
            cfg[key] = value
        elif kind == "float":
            cfg[key] = _number(key, value)
        elif kind == "floats":
            if not isinstance(value, list):
                raise ConfigError(f"{key}: expected a list of numbers")
            cfg[key] = [_number(key, v) for v in value]
        else:
            if not isinstance(value, str):
                raise ConfigError(f"{key}: expected a string, got {value!r}")
            cfg[key] = value
    if seed is not None:
        cfg["seed"] = seed
    if path is not None and cfg["weight_file"] is not None:
        wf = Path(cfg["weight_file"])
        cfg["weight_file"] = str(wf if wf.is_absolute() else Path(path).parent / wf)
    _check_static(cfg)
    return cfg


def _check_static(cfg):
    if cfg["dimension"] not in (1, 2):
        raise ConfigError("dimension must be 1 or 2")
    if cfg["weight"] not in ("constant", "phi1", "custom"):
        raise ConfigError(f"weight must be constant, phi1 or custom, got {cfg['weight']!r}")
    if cfg["weight"] == "custom" and not cfg["weight_file"]:
        raise ConfigError("weight 'custom' needs weight_file")
    if cfg["family"] not in (None, "softplus", "fishing", "linear"):
        raise ConfigError(f"unknown nonlinearity family {cfg['family']!r}")
    if not cfg["xi_min"] < cfg["xi_max"]:
        raise ConfigError("need xi_min < xi_max")
    for key in ("starts", "poincare_samples", "max_newton", "scan_steps"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be positive")
    for key in ("tol", "step_initial", "step_max_relative", "xi_max_factor"):
        if not cfg[key] > 0:
            raise ConfigError(f"{key} must be positive")
    if cfg["seed"] < 0 or cfg["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")


def check_family(cfg, command):
    """Parameter presence checks for commands that need a nonlinearity."""
    fam = cfg["family"]
    if command == "fishing":
        if fam not in (None, "fishing"):
            raise ConfigError(f"the fishing command uses the fishing family, got {fam!r}")
        cfg["family"] = fam = "fishing"
    if fam is None:
        raise ConfigError(f"command {command!r} needs a nonlinearity 'family'")
    if fam == "softplus" and (cfg["gamma1"] is None or cfg["gamma2"] is None):
        raise ConfigError("softplus family needs gamma1 and gamma2")
    if fam == "linear" and cfg["gamma"] is None:
        raise ConfigError("linear family needs gamma")
    if fam == "fishing" and not cfg["b"] > 0:
        raise ConfigError("fishing family needs b > 0")


def build_problem(cfg) -> Problem:
    if cfg["dimension"] == 1:
        spec = GridSpec.interval(cfg["length"], cfg["n"])
    else:
        spec = GridSpec.rectangle(cfg["lx"], cfg["ly"], cfg["nx"], cfg["ny"])
    grid = build_grid(spec)
    lap = build_laplacian(grid)
    spectral = compute_eigenpairs(lap, 2)
    if cfg["weight"] == "constant":
        f = grid.constant(cfg["weight_value"])
    elif cfg["weight"] == "phi1":
        f = np.array(spectral.phi1)
    else:
        try:
            f = np.loadtxt(cfg["weight_file"], dtype=float).ravel()
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read weight_file: {exc}") from exc
        if f.size != grid.size:
            raise ConfigError(f"weight_file has {f.size} values, grid has {grid.size} nodes")
    if not np.any(f != 0):
        raise ConfigError("weight f is identically zero")
    return Problem(grid, lap, spectral, compute_nu(spectral, f))


def build_nonlinearity(cfg, problem: Problem):
    fam = cfg["family"]
    if fam == "softplus":
        g = make_softplus_family(cfg["gamma1"], cfg["gamma2"])
    elif fam == "linear":
        g = make_linear(cfg["gamma"])
    else:
        a = problem.lam1 + 0.3 if cfg["a"] is None else cfg["a"]
        c = 0.5 * (a + problem.nu) if cfg["c"] is None else cfg["c"]
        g = make_fishing_family(a, cfg["b"], c)
    report = validate(g, problem.weight)
    if not report.ok:
        raise ConfigError("nonlinearity rejected: " + "; ".join(report.failures))
    return g


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _step_control(cfg) -> StepControl:
    return StepControl(
        initial=cfg["step_initial"],
        s_max=max(cfg["step_max_relative"], cfg["step_initial"]),
        max_step=np.inf if cfg["step_max"] is None else cfg["step_max"],
        tol=cfg["tol"],
        maxiter=cfg["max_newton"],
    )


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(cfg, out: Path):
    p = build_problem(cfg)
    rng = np.random.default_rng(cfg["seed"])
    violations = 0
    worst = np.inf
    for _ in range(cfg["poincare_samples"]):
        u = rng.standard_normal(p.grid.size)
        u -= p.inner(u, p.f) / p.weight.norm_sq * p.f
        lhs, rhs = verify_poincare(u, p.weight, p.spectral, p.lap)
        worst = min(worst, (lhs - rhs) / lhs)
        violations += lhs < rhs - 1e-9 * lhs
    headline = {"lam1": p.lam1, "lam2": p.lam2, "nu": p.nu, "f1": p.weight.f1, "norm_sq": p.weight.norm_sq}
    checks = {
        "nu_between_eigenvalues": bool(p.lam1 < p.nu <= p.lam2 * (1 + 1e-12)) if np.all(p.f > 0) else None,
        "poincare_violations": int(violations),
        "poincare_min_relative_margin": worst,
    }
    if p.grid.dimension == 1:
        ref = laplacian_1d_eigenvalues(p.grid.shape[0], p.grid.spec.extent[0])
        checks["closed_form_rel_error"] = float(
            max(abs(p.lam1 / ref[0] - 1), abs(p.lam2 / ref[1] - 1))
        )
    _write_csv(out / "spectrum.csv", list(headline), [list(headline.values())])
    print(",".join(headline))
    print(",".join(_fmt(v) for v in headline.values()))
    ok = checks["poincare_violations"] == 0 and checks.get("closed_form_rel_error", 0.0) < 1e-10
    return headline, checks, ok


def cmd_curve(cfg, out: Path):
    p = build_problem(cfg)
    g = build_nonlinearity(cfg, p)
    curve = trace_curve(p, g, cfg["xi_min"], cfg["xi_max"], anchor=cfg["anchor"], step=_step_control(cfg))
    write_curve_csv(curve, out / "curve.csv")
    if curve.truncated:
        raise NumericalFailure("curve truncated: " + "; ".join(curve.messages))
    headline = {"points": len(curve), "truncated": curve.truncated, "messages": curve.messages}
    checks = {}
    try:
        cls = classify(curve)
    except AnalysisError as exc:
        if "hypothesis" in str(exc):
            raise ConfigError(str(exc)) from exc
        headline["classification_error"] = str(exc)
        cls = None
    if cls is not None:
        headline.update(label=cls.label, case=cls.case, mu0=cls.mu0, predicted_counts=cls.predicted_counts)
        checks["trace_consistent_with_label"] = cls.consistent
    tp = find_turning_point(curve)
    if tp is not None:
        sign, mu2 = second_derivative_identity(tp, p, g)
        headline["turning_point"] = {"xi0": tp.xi0, "mu0": tp.mu0, "mu2_identity": mu2}
        checks["w_positive"] = bool(np.all(tp.w > 0))
        want = {"convex": "positive", "concave": "negative"}.get(g.convexity)
        checks["curvature_sign_matches_convexity"] = want is None or sign == want
    if min(-cfg["xi_min"], cfg["xi_max"]) >= cfg["slope_threshold"]:
        headline["slopes"] = asymptotic_slopes(curve, cfg["slope_threshold"])
    headline["growth_bound"] = curve.diagnostics.get("growth_bound")
    checks["growth_bound_holds"] = headline["growth_bound"]["slack"] >= -1e-6
    ok = not curve.truncated and all(v is not False for v in checks.values())
    return headline, checks, ok


def cmd_antimax(cfg, out: Path):
    p = build_problem(cfg)
    rep = estimate_delta(p, resolution=cfg["resolution"], scan_steps=cfg["scan_steps"])
    _write_csv(out / "antimax.csv", ["lambda", "minU", "maxU", "verdict"], [list(r) for r in rep.scan])
    print(f"delta_f={_fmt(rep.delta_f)} capped={str(rep.capped).lower()}")
    headline = {
        "delta_f": rep.delta_f,
        "capped": rep.capped,
        "bracket": list(rep.bracket),
        "lam1": rep.lam1,
        "lam2": rep.lam2,
        "h": list(rep.h),
    }
    checks = {"delta_positive": rep.delta_f > 0}
    return headline, checks, rep.delta_f > 0


def cmd_fishing(cfg, out: Path):
    p = build_problem(cfg)
    g = build_nonlinearity(cfg, p)
    sc = FishingScenario(g.params["a"], g.params["b"], g.params["c"], p)
    try:
        sc.check()
    except FishingError as exc:
        raise ConfigError(str(exc)) from exc
    res = trace_fishing_curve(sc, cfg["xi_max_factor"])
    phi1 = p.spectral.phi1
    write_curve_csv(
        res.curve,
        out / "fishing_curve.csv",
        extra={
            "xibar": lambda q: p.inner(q.u, phi1),
            "norm_u": lambda q: p.norm(q.u),
            "min_u": lambda q: q.min_u,
        },
    )
    counts = {}
    for label, m in (("half_mu_bar", 0.5 * sc.mu_bar), ("one_and_half_mu_bar", 1.5 * sc.mu_bar)):
        counts[label] = len(find_solutions(p, g, m, cfg["starts"]))
    print(f"xi0={_fmt(sc.xi0)} xi_turn={_fmt(sc.xi_turn)} mu_bar={_fmt(sc.mu_bar)}")
    headline = {"a": sc.a, "b": sc.b, "c": sc.c, "xi0": sc.xi0, "xi_turn": sc.xi_turn, "mu_bar": sc.mu_bar}
    c = res.checks
    checks = {
        "endpoint_zero": abs(c["mu_at_zero"]) < 1e-8,
        "endpoint_xi0": abs(c["mu_at_xi0"]) < 1e-8,
        "single_maximum": c["turn_is_maximum"] and c["turn_inside"],
        "stocking_mu_negative": c["stocking_mu_negative"],
        "stocking_u_positive": c["stocking_u_positive"],
        "count_half_mu_bar_is_2": counts["half_mu_bar"] == 2,
        "count_one_and_half_mu_bar_is_0": counts["one_and_half_mu_bar"] == 0,
    }
    headline["counts"] = counts
    return headline, checks, all(checks.values())


def cmd_count(cfg, out: Path):
    p = build_problem(cfg)
    g = build_nonlinearity(cfg, p)
    if not cfg["mu"]:
        raise ConfigError("count needs a non-empty 'mu' list")
    rows = [(m, len(find_solutions(p, g, m, cfg["starts"]))) for m in cfg["mu"]]
    _write_csv(out / "counts.csv", ["mu", "count"], rows)
    return {"counts": [{"mu": m, "count": n} for m, n in rows]}, {}, True


HANDLERS = {
    "spectrum": cmd_spectrum,
    "curve": cmd_curve,
    "antimax": cmd_antimax,
    "fishing": cmd_fishing,
    "count": cmd_count,
}


def run(command: str, cfg: dict, out: Path) -> int:
    try:
        if command in ("curve", "fishing", "count"):
            check_family(cfg, command)
        if command == "count" and not cfg["mu"]:
            raise ConfigError("count needs a non-empty 'mu' list")
        out.mkdir(parents=True, exist_ok=True)
        headline, checks, ok = HANDLERS[command](cfg, out)
    except (ConfigError, GridError, NonlinearityError, HypothesisViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (
        EigensolverError,
        HomotopyError,
        BorderedSolveError,
        AnalysisError,
        FishingError,
        NearSingularError,
        NumericalFailure,
        RuntimeError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    summary = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "command": command,
        "config": cfg,
        "headline": headline,
        "checks": checks,
        "passed": bool(ok),
    }
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="xicont", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat JSON scenario file")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--seed", type=int, help="random seed (overrides config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(args.command, cfg, Path(args.out))


if __name__ == "__main__":
    sys.exit(main())
