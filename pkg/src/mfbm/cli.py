"""
Command-line front end.

Subcommands
-----------
eigen       closed-form eigenvalues, optionally against the numeric oracle
constants   small-ball exponent coefficients for one Hurst index
smallball   saddlepoint vs asymptotic log-probabilities over an eps grid
validate    invariant suites of all modules; exit status 1 on failure
sample      reproducible paths and Monte Carlo estimates

Settings may come from a JSON config file (``--config``); explicit flags
override it.  JSON reports embed the effective configuration, and
``--from-report`` re-runs a command from such a report.  Relative output
paths are resolved against ``$MFBM_OUTPUT_DIR`` when it is set.

Exit codes: 0 success, 1 invariant failure, 2 usage or domain error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from ._io import csv_text, json_text, write_csv, write_json

log = logging.getLogger("mfbm")

OUTPUT_ENV = "MFBM_OUTPUT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "h": None,
    "n": "1..50",
    "eps": "0.2,0.1,0.07,0.05",
    "grid": 2000,
    "samples": 0,
    "seed": 0,
    "paths": 10,
    "out": None,
    "format": "csv",
    "validate": False,
    "tight": False,
    "tol_scale": 1.0,
    "estimate": False,
    "n_star": 10_000,
}


class UsageError(ValueError):
    """Invalid arguments or out-of-domain parameters."""


# --------------------------------------------------------------------------
# parsing helpers


def parse_range(text):
    """``'a..b'`` or a comma list of integers."""
    text = str(text).strip()
    try:
        if ".." in text:
            a, b = text.split("..")
            a, b = int(a), int(b)
            if a < 1 or b < a:
                raise ValueError
            return np.arange(a, b + 1)
        vals = np.array([int(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"invalid index range {text!r}; use 'a..b' with 1 <= a <= b or a comma list")
    if np.any(vals < 1):
        raise UsageError("indices are 1-based")
    return vals


def parse_floats(text):
    try:
        vals = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise UsageError(f"invalid number list {text!r}")
    if any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise UsageError("eps values must be positive and finite")
    return vals


def hurst(value, allow_half=True):
    from .spectrum import HurstParam
    if value is None:
        raise UsageError("--h is required")
    try:
        h = HurstParam(float(value))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid Hurst index: {exc}")
    if not allow_half and h.H == 0.5:
        raise UsageError("H=1/2 is excluded: the stratified small-ball expansion "
                         "requires H in (0, 1) with H != 1/2")
    return h


def output_path(name):
    if name is None:
        return None
    p = Path(name)
    base = os.environ.get(OUTPUT_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def emit(cfg, header, rows, record):
    """Print or write a table (csv) or a record (json)."""
    if cfg["format"] == "json":
        text = json_text(record)
    else:
        text = csv_text(header, rows)
    path = output_path(cfg["out"])
    if path is None:
        sys.stdout.write(text)
    elif cfg["format"] == "json":
        write_json(path, record)
    else:
        write_csv(path, header, rows)
    return text


def _clean(cfg):
    return {k: v for k, v in cfg.items() if k not in ("config", "from_report")}


# --------------------------------------------------------------------------
# commands


def cmd_eigen(cfg):
    from .oracle import build_covariance, numeric_eigenvalues, spectrum_rows
    h = hurst(cfg["h"])
    n = parse_range(cfg["n"])
    numeric = None
    if cfg["validate"]:
        N = int(cfg["grid"])
        if n.max() > N // 4:
            raise UsageError(f"--validate needs n <= grid/4 = {N // 4}")
        numeric = numeric_eigenvalues(build_covariance(h, N), int(n.max()))
    rows = spectrum_rows(h, numeric, n)
    header = ("n", "nu", "lambda_closed_form", "lambda_numeric", "rel_err")
    record = {"command": "eigen", "config": _clean(cfg),
              "rows": [dict(zip(header, r)) for r in rows]}
    emit(cfg, header, rows, record)
    return record


def cmd_constants(cfg):
    from .smallball import beta_sequence
    h = hurst(cfg["h"], allow_half=False)
    asym = beta_sequence(h)
    record = {"command": "constants", "config": _clean(cfg), **asym.to_dict()}
    rows = [(ell, b, e) for ell, (b, e) in enumerate(zip(asym.betas, asym.exponents))]
    if cfg["format"] == "csv":
        emit(cfg, ("stratum", "beta", "eps_exponent"), rows, record)
    else:
        emit(cfg, None, None, record)
    return record


def cmd_smallball(cfg):
    from .sampler import MCConfig, path_smallball
    from .smallball import asymptotic_log_probability, mixed_tail_sequence, \
        saddlepoint_log_probability
    h = hurst(cfg["h"])
    eps_grid = parse_floats(cfg["eps"])
    eigs = mixed_tail_sequence(h, None, int(cfg["n_star"]))
    rows = []
    for eps in eps_grid:
        lp = saddlepoint_log_probability(eps * eps, eigs)
        asy = float(asymptotic_log_probability(h, eps))
        row = [eps, lp, asy, asy / lp]
        if cfg["samples"]:
            est = path_smallball(h, eps, MCConfig(int(cfg["samples"]), int(cfg["seed"]),
                                                  min(int(cfg["grid"]), 512)))
            lo, hi = est.interval()
            row += [est.probability, est.std_error, lo, hi]
        rows.append(tuple(row))
    header = ["eps", "log_p_saddlepoint", "log_p_asymptotic", "ratio"]
    if cfg["samples"]:
        header += ["mc_probability", "mc_std_error", "mc_ci_low", "mc_ci_high"]
    record = {"command": "smallball", "config": _clean(cfg),
              "rows": [dict(zip(header, r)) for r in rows]}
    emit(cfg, header, rows, record)
    return record


def cmd_validate(cfg):
    from .validate import run_suite
    scale = float(cfg["tol_scale"]) * (0.5 if cfg["tight"] else 1.0)
    report = run_suite(scale)
    report["config"] = _clean(cfg)
    report["command"] = "validate"
    rows = [(c["name"], c["value"], c["tolerance"], int(c["passed"]))
            for c in report["checks"]]
    for c in report["checks"]:
        log.info("%s %s: %.3e (tol %.3e)", "PASS" if c["passed"] else "FAIL",
                 c["name"], c["value"], c["tolerance"])
    emit(cfg, ("check", "value", "tolerance", "passed"), rows, report)
    return report


def cmd_sample(cfg):
    from .sampler import MCConfig, cholesky_paths, export_paths_csv, path_smallball
    h = hurst(cfg["h"])
    N = int(cfg["grid"])
    count = int(cfg["paths"])
    if count < 1:
        raise UsageError("--paths must be positive")
    outdir = output_path(cfg["out"] or ".")
    mc = MCConfig(max(int(cfg["samples"]) or 100_000, 100), int(cfg["seed"]), N)
    batch = cholesky_paths(h, N, mc, count=count)
    stem = f"paths_H{h.H:g}_N{N}_seed{mc.seed}"
    files = [str(export_paths_csv(outdir / f"{stem}.csv", batch))]
    record = {"command": "sample", "config": _clean(cfg), "seed": mc.seed,
              "files": files, "jitter": batch.jitter}
    if cfg["estimate"]:
        eps = parse_floats(cfg["eps"])
        record["estimates"] = [dict(path_smallball(h, e, mc).to_dict(), eps=e) for e in eps]
        est_path = outdir / f"estimate_H{h.H:g}_N{N}_seed{mc.seed}.json"
        write_json(est_path, record["estimates"])
        files.append(str(est_path))
    sys.stdout.write(json_text(record))
    return record


COMMANDS = {"eigen": cmd_eigen, "constants": cmd_constants, "smallball": cmd_smallball,
            "validate": cmd_validate, "sample": cmd_sample}


# --------------------------------------------------------------------------
# argument handling


def build_parser():
    p = argparse.ArgumentParser(prog="mfbm", description=__doc__.split("\n\n")[0].strip(),
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        # None means "not given", so the config file can fill it in
        sp.add_argument("--config", help="JSON file with settings; flags override it")
        sp.add_argument("--from-report", help="re-run from the config stored in a JSON report")
        sp.add_argument("--out", help=f"output file (relative to ${OUTPUT_ENV} if set)")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--seed", type=int)
        return sp

    s = common(sub.add_parser("eigen", help="eigenvalue table"))
    s.add_argument("--h", type=float)
    s.add_argument("--n", help="index range 'a..b' or list")
    s.add_argument("--grid", type=int, help="oracle grid size N")
    s.add_argument("--validate", action="store_true", default=None)

    s = common(sub.add_parser("constants", help="small-ball coefficients"))
    s.add_argument("--h", type=float)

    s = common(sub.add_parser("smallball", help="log-probability table"))
    s.add_argument("--h", type=float)
    s.add_argument("--eps", help="comma-separated radii")
    s.add_argument("--samples", type=int, help="add a Monte Carlo column with this many samples")
    s.add_argument("--grid", type=int, help="Monte Carlo grid size (capped at 512)")
    s.add_argument("--n-star", dest="n_star", type=int, help="closed-form eigenvalues before the tail model")

    s = common(sub.add_parser("validate", help="run invariant suites"))
    s.add_argument("--tight", action="store_true", default=None, help="halve all tolerances")
    s.add_argument("--tol-scale", dest="tol_scale", type=float, help="multiply all tolerances")

    s = common(sub.add_parser("sample", help="sample paths"))
    s.add_argument("--h", type=float)
    s.add_argument("--paths", type=int)
    s.add_argument("--grid", type=int)
    s.add_argument("--samples", type=int, help="Monte Carlo sample count for --estimate")
    s.add_argument("--estimate", action="store_true", default=None)
    s.add_argument("--eps", help="radii for --estimate")
    return p


def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {what} {path!r}: {exc}")


def resolve_config(args):
    """Defaults, then config file or report, then explicit flags."""
    cfg = dict(DEFAULTS)
    if args.command == "sample":
        cfg["grid"] = 256
        cfg["eps"] = "0.3"
    if args.command == "smallball":
        cfg["grid"] = 512
    for src, what in ((args.from_report, "report"), (args.config, "config file")):
        if src:
            data = _read_json(src, what)
            if what == "report":
                if data.get("command") not in (None, args.command):
                    raise UsageError(f"report was produced by {data['command']!r}, "
                                     f"not {args.command!r}")
                data = data.get("config", {})
            unknown = set(data) - set(DEFAULTS)
            if unknown:
                raise UsageError(f"unknown settings in {what}: {sorted(unknown)}")
            cfg.update(data)
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None:
            cfg[k] = v
    return cfg


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        result = COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"mfbm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"mfbm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "validate" and not result["passed"]:
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
