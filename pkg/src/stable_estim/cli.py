"""Command-line front end.

Subcommands: sample, density, slopes, optimize, validate, sweep. Output is
CSV (header row, LF line endings) or JSON (UTF-8, fixed key order). Exit
codes: 0 success, 1 validation report failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import linear_mix as lm
from . import subgaussian as sg
from .stable_core import StableParams, sas_cf, sas_pdf
from .validation import RECORD_KEYS, ValidationConfig, draw_pairs, run_validation

SUBCOMMANDS = ("sample", "density", "slopes", "optimize", "validate", "sweep")
SEED_ENV = "STABLE_ESTIM_SEED"
DEFAULT_SWEEP = (0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 1.95)
DEFAULT_N = {"sample": 10_000, "validate": 1_000_000}
# keys a --config file may set; each mirrors the flag of the same name
CONFIG_KEYS = ("model", "a", "gammas", "alpha", "sigmas", "rho", "n", "seed", "format", "output", "alphas", "trim",
               "bandwidth", "variable", "kind", "lo", "hi", "points", "residual_check")


class InputError(ValueError):
    """Invalid command-line or config input; maps to exit code 2."""


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    model: object
    output_format: str
    output_path: str | None
    seed: int
    n: int | None
    sweep_alphas: tuple[float, ...] | None
    extra: dict


def _floats(text, count: int | None, name: str) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = [p for p in str(text).split(",") if p.strip()]
    try:
        vals = tuple(float(p) for p in parts)
    except (TypeError, ValueError):
        raise InputError(f"--{name} expects comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise InputError(f"--{name} expects {count} values, got {len(vals)}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys mirror the flags; flags win")
    common.add_argument("--model", choices=("linear-mix", "sub-gaussian"))
    common.add_argument("--a", help="mixing matrix, row-major: a11,a12,a21,a22")
    common.add_argument("--gammas", help="component dispersions gammaZ1,gammaZ2")
    common.add_argument("--alpha", type=float)
    common.add_argument("--sigmas", help="Gaussian standard deviations sigma1,sigma2")
    common.add_argument("--rho", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--seed", type=int, help=f"random seed (fallback: ${SEED_ENV}, then 0)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--output", help="output file (default: stdout)")

    p = argparse.ArgumentParser(prog="stable-estim", description="Linear estimators for bivariate SaS models.")
    sub = p.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("sample", parents=[common], help="draw (x, y) pairs")
    d = sub.add_parser("density", parents=[common], help="tabulate a marginal density or CF")
    d.add_argument("--variable", choices=("x", "y"))
    d.add_argument("--kind", choices=("pdf", "cf"))
    d.add_argument("--lo", type=float)
    d.add_argument("--hi", type=float)
    d.add_argument("--points", type=int)
    sub.add_parser("slopes", parents=[common], help="conditional-mean and dispersion-optimal slopes")
    sub.add_parser("optimize", parents=[common], help="numeric minimization of the error dispersion")
    v = sub.add_parser("validate", parents=[common], help="run the Monte Carlo and oracle battery")
    v.add_argument("--trim", type=float)
    v.add_argument("--bandwidth", type=float)
    v.add_argument("--residual-check", dest="residual_check", action="store_true", default=None)
    s = sub.add_parser("sweep", parents=[common], help="slopes over a grid of alpha values")
    s.add_argument("--alphas", help="comma-separated alpha grid")
    return p


def _merge(ns: argparse.Namespace) -> dict:
    opts = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                opts = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config file {ns.config}: {exc}") from None
        if not isinstance(opts, dict):
            raise InputError("config file must hold a JSON object")
        unknown = sorted(set(opts) - set(CONFIG_KEYS))
        if unknown:
            raise InputError(f"unknown config keys: {unknown}")
    for key in CONFIG_KEYS:
        val = getattr(ns, key, None)
        if val is not None:
            opts[key] = val
    return opts


def _need(opts: dict, kind: str, *keys: str) -> None:
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise InputError(f"{kind} model needs " + ", ".join(f"--{k}" for k in missing))


def model_from_options(opts: dict):
    kind = opts.get("model") or "linear-mix"
    if kind == "linear-mix":
        _need(opts, kind, "a", "gammas", "alpha")
        a = _floats(opts["a"], 4, "a")
        g = _floats(opts["gammas"], 2, "gammas")
        return lm.build_model(*a, *g, float(opts["alpha"]))
    if kind == "sub-gaussian":
        _need(opts, kind, "sigmas", "rho", "alpha")
        s = _floats(opts["sigmas"], 2, "sigmas")
        return sg.build_subgaussian(float(opts["alpha"]), s[0], s[1], float(opts["rho"]))
    raise InputError(f"--model must be linear-mix or sub-gaussian, got {kind!r}")


def resolve_seed(opts: dict) -> int:
    if opts.get("seed") is not None:
        return int(opts["seed"])
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"${SEED_ENV} must be an integer, got {env!r}") from None


def parse_config(argv) -> CliConfig:
    ns = build_parser().parse_args(argv)
    opts = _merge(ns)
    seed = resolve_seed(opts)
    if seed < 0:
        raise InputError(f"--seed must be >= 0, got {seed}")
    n = opts.get("n", DEFAULT_N.get(ns.subcommand))
    if n is not None and int(n) < 1:
        raise InputError(f"--n must be a positive integer, got {n}")
    alphas = _floats(opts["alphas"], None, "alphas") if opts.get("alphas") is not None else None
    fmt = opts.get("format") or ("json" if ns.subcommand in ("validate", "slopes", "optimize") else "csv")
    if fmt not in ("csv", "json"):
        raise InputError(f"--format must be csv or json, got {fmt!r}")
    if ns.subcommand == "sweep":
        # alpha comes from the grid, any single value only needs to be valid
        opts = {**opts, "alpha": opts.get("alpha", 1.5)}
    model = model_from_options(opts)
    extra = {k: opts[k] for k in ("trim", "bandwidth", "variable", "kind", "lo", "hi", "points", "residual_check")
             if opts.get(k) is not None}
    return CliConfig(ns.subcommand, model, fmt, opts.get("output"), seed, None if n is None else int(n), alphas, extra)


# -- output -------------------------------------------------------------------------


def _table(columns, rows, fmt: str, meta: dict | None = None) -> str:
    if fmt == "json":
        return json.dumps({**(meta or {}), "columns": list(columns), "rows": [list(r) for r in rows]}, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows([_fmt_value(v) for v in r] for r in rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt_value(v):
    # CSV cell: ties print both candidates separated by a space, None prints empty
    if v is None:
        return ""
    return " ".join(repr(float(u)) for u in v) if isinstance(v, (tuple, list)) else v


# -- subcommands ----------------------------------------------------------------------


def _slopes(model) -> dict:
    if isinstance(model, lm.LinearMixModel):
        cond = lm.conditional_mean_slope(model)
        opt = lm.optimal_slope(model)
        first = opt.candidates[0]
        scales = {"conditional": lm.error_scale(model, cond), "optimal": lm.error_scale(model, first)}
    else:
        cond = sg.conditional_mean_slope_sg(model)
        opt = sg.optimal_slope_sg(model)
        scales = {"conditional": sg.error_scale_sg(model, cond), "optimal": sg.error_scale_sg(model, opt.value)}
    out = {
        "model": model.to_dict(),
        "conditional_slope": cond,
        "optimal_slope": list(opt.value) if isinstance(opt.value, tuple) else opt.value,
        "case": opt.case_tag,
        "provenance": opt.provenance,
        "error_scale_conditional": scales["conditional"],
        "error_scale_optimal": scales["optimal"],
    }
    if opt.flat_interval is not None:
        out["flat_interval"] = list(opt.flat_interval)
    return out


def cmd_sample(cfg: CliConfig) -> tuple[str, int]:
    xy = draw_pairs(cfg.model, cfg.n, cfg.seed)
    meta = {"model": cfg.model.to_dict(), "seed": cfg.seed, "n": cfg.n}
    return _table(("x", "y"), xy.tolist(), cfg.output_format, meta), 0


def cmd_density(cfg: CliConfig) -> tuple[str, int]:
    var = cfg.extra.get("variable", "y")
    kind = cfg.extra.get("kind", "pdf")
    m = cfg.model
    gamma = m.gammaX if var == "x" else m.gammaY
    params = StableParams(m.alpha, gamma)
    lo = cfg.extra.get("lo", -5 * gamma if kind == "pdf" else 0.0)
    hi = cfg.extra.get("hi", 5 * gamma if kind == "pdf" else 5 / gamma)
    pts = int(cfg.extra.get("points", 101))
    if pts < 2 or not hi > lo:
        raise InputError("density grid needs --points >= 2 and --hi > --lo")
    grid = np.linspace(lo, hi, pts)
    vals = sas_pdf(params, grid) if kind == "pdf" else sas_cf(params, grid)
    arg = "x" if kind == "pdf" else "t"
    meta = {"model": m.to_dict(), "variable": var, "gamma": gamma}
    return _table((arg, kind), np.column_stack([grid, vals]).tolist(), cfg.output_format, meta), 0


def cmd_slopes(cfg: CliConfig) -> tuple[str, int]:
    out = _slopes(cfg.model)
    if cfg.output_format == "json":
        return _json(out), 0
    keys = [k for k in out if k != "model"]
    return _table(keys, [[out[k] for k in keys]], "csv"), 0


def cmd_optimize(cfg: CliConfig) -> tuple[str, int]:
    m = cfg.model
    if isinstance(m, lm.LinearMixModel):
        num = lm.minimize_error_scale_numeric(m)
        closed = lm.optimal_slope(m)
        first = num.candidates[0]
        scale = lm.error_scale(m, first)
    else:
        num = sg.minimize_scale_numeric_sg(m)
        closed = sg.optimal_slope_sg(m)
        first = num.value
        scale = sg.error_scale_sg(m, first)
    diff = max(abs(a - b) for a, b in zip(num.candidates, closed.candidates))
    out = {
        "model": m.to_dict(),
        "numeric_slope": list(num.value) if isinstance(num.value, tuple) else num.value,
        "closed_form_slope": list(closed.value) if isinstance(closed.value, tuple) else closed.value,
        "case": num.case_tag,
        "abs_difference": diff,
        "error_scale": scale,
    }
    if num.flat_interval is not None:
        out["flat_interval"] = list(num.flat_interval)
    if cfg.output_format == "json":
        return _json(out), 0
    keys = [k for k in out if k != "model"]
    return _table(keys, [[out[k] for k in keys]], "csv"), 0


def cmd_validate(cfg: CliConfig) -> tuple[str, int]:
    try:
        vcfg = ValidationConfig(
            n_samples=cfg.n,
            seed=cfg.seed,
            bandwidth=cfg.extra.get("bandwidth"),
            trim=cfg.extra.get("trim"),
            residual_check=bool(cfg.extra.get("residual_check", False)),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    rep = run_validation(cfg.model, vcfg)
    code = 0 if rep.passed else 1
    if cfg.output_format == "json":
        return rep.to_json(), code
    rows = [list(r.to_dict().values()) for r in rep.records]
    return _table(RECORD_KEYS, rows, "csv"), code


def cmd_sweep(cfg: CliConfig) -> tuple[str, int]:
    alphas = cfg.sweep_alphas or DEFAULT_SWEEP
    rows = []
    for al in alphas:
        if isinstance(cfg.model, lm.LinearMixModel):
            m = cfg.model.with_alpha(al)
        else:
            m = sg.build_subgaussian(al, cfg.model.sigma1, cfg.model.sigma2, cfg.model.rho)
        s = _slopes(m)
        rows.append([al, s["conditional_slope"], s["optimal_slope"], s["case"], s["error_scale_conditional"],
                     s["error_scale_optimal"]])
    cols = ("alpha", "conditional_slope", "optimal_slope", "case", "error_scale_conditional", "error_scale_optimal")
    meta = {"model": {k: v for k, v in cfg.model.to_dict().items() if k != "alpha"}}
    return _table(cols, rows, cfg.output_format, meta), 0


COMMANDS = {
    "sample": cmd_sample,
    "density": cmd_density,
    "slopes": cmd_slopes,
    "optimize": cmd_optimize,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        text, code = COMMANDS[cfg.subcommand](cfg)
    except SystemExit as exc:  # argparse: usage errors exit 2, --help exits 0
        return int(exc.code or 0)
    except (InputError, lm.ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        _emit(text, cfg.output_path)
    except OSError as exc:
        print(f"error: cannot write {cfg.output_path}: {exc}", file=sys.stderr)
        return 2
    return code


run = main
