"""Command-line interface: ``cnlfit {sample,estimate,recover,density,gap,schema}``.

Exit codes: 0 success, 2 config error, 3 numerical non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import COMMANDS, ConfigError, dumps, load, schema
from .fde import FixedPointConfig, NonConvergenceError, SingularDenominatorError, gamma_slice_grid
from .grad import ContractionError
from .metrics import validation_loss
from .optim import RunAborted, RunConfig, initial_theta, run_ogd
from .recover import determination_gap, random_params, recover_cell
from .spectra import (
    STREAM_THETA,
    CwParams,
    SpectrumSample,
    SpnParams,
    make_rng,
    poisson_smooth,
    sample_model,
    sample_true_cw_experiment,
    sample_true_spn_experiment,
)

log = logging.getLogger("cnlfit")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4
OUTPUT_DIR_ENV = "CNLFIT_OUTPUT_DIR"

NUMERIC_ERRORS = (NonConvergenceError, RunAborted, ContractionError, SingularDenominatorError)


def provenance(cfg: dict) -> list[str]:
    return [f"cnlfit {__version__}", f"config={dumps(cfg)}"]


def _fixed_point(cfg: dict) -> FixedPointConfig:
    fp = cfg["fixed_point"]
    return FixedPointConfig(fp["tolerance"], fp["max_iterations"])


def _run_config(cfg: dict, seed: int) -> RunConfig:
    adam = cfg["adam"]
    return RunConfig(gamma=cfg["gamma"], n_iterations=cfg["N"], xi=cfg["xi"], seed=seed,
                     bound=cfg["M"], fixed_point=_fixed_point(cfg),
                     record_every=cfg["record_every"], failure_budget=cfg["failure_budget"],
                     alpha=adam["alpha"], beta1=adam["beta1"], beta2=adam["beta2"],
                     eps=adam["eps"])


def explicit_truth(cfg: dict):
    """Ground truth spelled out in the config, or None when it is to be drawn."""
    t = cfg["truth"]
    try:
        if cfg["model"] == "cw" and t["v"] is not None:
            if len(t["v"]) != cfg["p"]:
                raise ConfigError(f"field 'truth.v': expected {cfg['p']} entries, got {len(t['v'])}")
            return CwParams(np.array(t["v"], dtype=float), cfg["d"], bound=max(1.0, *map(abs, t["v"])))
        if cfg["model"] == "spn" and t["a"] is not None:
            if len(t["a"]) != cfg["d"]:
                raise ConfigError(f"field 'truth.a': expected {cfg['d']} entries, got {len(t['a'])}")
            sigma = t["sigma"] if t["sigma"] is not None else t["sigma_true"]
            bound = max(1.2, abs(sigma), *map(abs, t["a"]))
            return SpnParams(np.array(t["a"], dtype=float), sigma, cfg["p"], bound)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"field 'truth': {exc}") from exc
    return None


def truth_and_sample(cfg: dict, seed: int):
    """Ground truth and one sample for ``seed``: explicit parameters when given,
    otherwise drawn as in the experiments."""
    truth = explicit_truth(cfg)
    if truth is not None:
        return truth, sample_model(truth, cfg["field"], seed)
    t = cfg["truth"]
    try:
        if cfg["model"] == "cw":
            return sample_true_cw_experiment(cfg["p"], cfg["d"], seed, t["half_width"], cfg["field"])
        d_true = cfg["d"] if t["d_true"] is None else t["d_true"]
        return sample_true_spn_experiment(cfg["p"], cfg["d"], d_true, t["lambda_min"],
                                          t["sigma_true"], seed, cfg["field"])
    except ValueError as exc:
        raise ConfigError(f"field 'truth': {exc}") from exc


def _load_sample(path) -> SpectrumSample:
    try:
        return SpectrumSample.load(path)
    except ValueError as exc:
        raise ConfigError(f"field 'sample_path': {path} is not a spectrum CSV ({exc})") from exc


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv_text(comments, header, rows) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _pmap(fn, args, jobs: int):
    if jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*args)))


# ------------------------------------------------------------- commands ----

def cmd_sample(cfg: dict, out: Path, jobs: int = 1) -> list[Path]:
    prefix = cfg["output"] or "sample"
    paths = []
    for seed in cfg["seeds"]:
        _, s = truth_and_sample(cfg, seed)
        path = out / f"{prefix}_seed{seed}.csv"
        _write(path, s.to_csv(provenance(cfg)))
        paths.append(path)
    return paths


def theta_json(params, extra: dict) -> str:
    doc = {"model": params.model, "p": params.p, "d": params.d, "bound": params.bound}
    if isinstance(params, CwParams):
        doc["v"] = params.v.tolist()
    else:
        doc["a"] = params.a.tolist()
        doc["sigma"] = params.sigma
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _estimate_one(cfg: dict, seed: int) -> tuple[str, str]:
    if cfg["sample_path"] is not None:
        sample = _load_sample(cfg["sample_path"])
        cfg = {**cfg, "p": sample.p, "d": sample.d}
        truth = explicit_truth(cfg)
    else:
        truth, sample = truth_and_sample(cfg, seed)
    theta0 = initial_theta(cfg["model"], sample, cfg["M"], seed, init=cfg["init"])
    fit, trace = run_ogd(sample, theta0, _run_config(cfg, seed), truth)
    extra = {
        "seed": seed,
        "gamma": cfg["gamma"],
        "iterations": cfg["N"],
        "failures": trace.failures,
        "mean_inner_iterations": trace.mean_inner_iterations,
        "initial_validation_loss": None if truth is None else trace.initial_validation,
        "final_validation_loss": None if truth is None else validation_loss(fit, truth),
        "version": __version__,
    }
    return theta_json(fit, extra), trace.to_csv(provenance(cfg) + [f"seed={seed}"])


def cmd_estimate(cfg: dict, out: Path, jobs: int = 1) -> list[Path]:
    prefix = cfg["output"] or "estimate"
    results = _pmap(_estimate_one, [(cfg, s) for s in cfg["seeds"]], jobs)
    paths = []
    for seed, (theta_text, trace_text) in zip(cfg["seeds"], results):
        jp, tp = out / f"{prefix}_seed{seed}.json", out / f"{prefix}_seed{seed}_trace.csv"
        _write(jp, theta_text)
        _write(tp, trace_text)
        paths += [jp, tp]
    return paths


SWEEP_COLUMNS = ("d_true", "lambda_min", "seed", "estimated_rank", "baseline_rank", "v_spn",
                 "runtime_seconds")


def _recover_one(cfg: dict, d_true: int, lambda_min: float, seed: int) -> dict:
    try:
        row = recover_cell(cfg["p"], cfg["d"], d_true, lambda_min, cfg["sigma_true"], seed,
                           _run_config(cfg, seed), cfg["xi0"], cfg["delta"], cfg["init"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not cfg["timing"]:
        row["runtime_seconds"] = float("nan")
    return row


def cmd_recover(cfg: dict, out: Path, jobs: int = 1) -> list[Path]:
    if cfg["xi"] <= 0:
        raise ConfigError("field 'xi': rank recovery needs xi > 0")
    cells = list(itertools.product(cfg["d_true"], cfg["lambda_min"], cfg["seeds"]))
    rows = _pmap(_recover_one, [(cfg, *c) for c in cells], jobs)
    path = out / f"{cfg['output'] or 'recover'}.csv"
    _write(path, _csv_text(provenance(cfg), SWEEP_COLUMNS,
                           [[_fmt(r[k]) for k in SWEEP_COLUMNS] for r in rows]))
    return [path]


def cmd_density(cfg: dict, out: Path, jobs: int = 1) -> list[Path]:
    seed = cfg["seeds"][0]
    params = explicit_truth(cfg)
    if params is None:
        params, _ = truth_and_sample(cfg, seed)
    g = cfg["grid"]
    if not g["x_max"] > g["x_min"]:
        raise ConfigError("field 'grid': x_max must exceed x_min")
    xs = np.linspace(g["x_min"], g["x_max"], g["points"])
    values, iters, resid = gamma_slice_grid(params, xs, cfg["gamma"], _fixed_point(cfg))
    header = ["x", "slice_value", "iterations", "residual"]
    columns = [xs, values, iters, resid]
    if cfg["sample_path"] is not None:
        sample = _load_sample(cfg["sample_path"])
        header.append("sample_slice")
        columns.append(poisson_smooth(xs, cfg["gamma"], sample))
    rows = [[_fmt(c[i]) for c in columns] for i in range(xs.size)]
    path = out / f"{cfg['output'] or 'density'}.csv"
    _write(path, _csv_text(provenance(cfg), header, rows))
    return [path]


GAP_COLUMNS = ("d", "seed", "gamma", "empirical", "deterministic", "gap", "quadrature_bound")


def _gap_one(cfg: dict, dim: int, seed: int) -> dict:
    p = max(dim, round(dim * cfg["p"] / cfg["d"]))
    scaled = {**cfg, "p": p, "d": dim}
    truth = explicit_truth(cfg)
    if truth is not None and (cfg["p"], cfg["d"]) != (p, dim):
        raise ConfigError("field 'truth': explicit parameters fix the dimension; use one entry in 'dims'")
    theta0, sample = (truth, None) if truth is not None else truth_and_sample(scaled, seed)
    if cfg["theta"] == "same":
        theta = theta0
    else:
        theta = random_params(cfg["model"], p, dim, theta0.bound, make_rng(seed, STREAM_THETA))
    q = cfg["quadrature"]
    rep = determination_gap(theta0, theta, cfg["gamma"], seed, q["L"], q["n"], _fixed_point(cfg),
                            cfg["field"], sample)
    return {"d": dim, "seed": seed, "gamma": rep.gamma, "empirical": rep.empirical,
            "deterministic": rep.deterministic, "gap": rep.gap,
            "quadrature_bound": rep.quadrature_bound}


def cmd_gap(cfg: dict, out: Path, jobs: int = 1) -> list[Path]:
    cells = [(cfg, dim, seed) for dim in cfg["dims"] for seed in cfg["seeds"]]
    rows = _pmap(_gap_one, cells, jobs)
    path = out / f"{cfg['output'] or 'gap'}.csv"
    _write(path, _csv_text(provenance(cfg), GAP_COLUMNS,
                           [[_fmt(r[k]) for k in GAP_COLUMNS] for r in rows]))
    return [path]


HANDLERS = {
    "sample": cmd_sample,
    "estimate": cmd_estimate,
    "recover": cmd_recover,
    "density": cmd_density,
    "gap": cmd_gap,
}


# ---------------------------------------------------------------- main ----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cnlfit",
        description="Fit compound Wishart and signal-plus-noise spectra with the Cauchy noise loss.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} command")
        p.add_argument("--config", help="JSON config (defaults apply to missing fields)")
        p.add_argument("--seed", type=int, help="run this single seed instead of config 'seeds'")
        p.add_argument("--jobs", type=int, default=1, help="worker processes over seeds/cells")
        p.add_argument("--output-dir",
                       help=f"output directory (default: ${OUTPUT_DIR_ENV} or the current directory)")
    sp = sub.add_parser("schema", help="print the JSON schema of a command's config")
    sp.add_argument("target", choices=COMMANDS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "schema":
        print(json.dumps(schema(args.target), indent=2))
        return EXIT_OK
    try:
        cfg = load(args.command, args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg["seeds"] = [args.seed]
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        out = Path(args.output_dir or os.environ.get(OUTPUT_DIR_ENV) or ".")
        paths = HANDLERS[args.command](cfg, out, args.jobs)
    except ConfigError as exc:
        print(f"cnlfit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"cnlfit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"cnlfit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
