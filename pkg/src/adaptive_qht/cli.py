"""Command-line front end.

Subcommands: ``simulate``, ``reconstruct``, ``observe``, ``gamma-scan`` and
``pathology``.  Every command reads one JSON config (see ``CONFIG_SCHEMA``)
and writes CSV or JSON tables into ``--out``.

Exit codes: 0 success, 1 invalid config, 2 I/O error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .adapt import gamma_scan
from .config import ConfigError, load_config
from .estimators import AdaptiveKernelEstimator, exact_value, reconstruct_elements
from .exceptions import ConvergenceError, GridError, IllConditionedError, TruncationError
from .homodyne import PhaseStrategy, generate_dataset, load_dataset
from .kernels import KernelExpr, Target
from .states import intrinsic_noise
from .stats import kernel_histogram, noise_ratio

log = logging.getLogger("adaptive_qht")

THREADS_ENV = "ADAPTIVE_QHT_THREADS"
EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

RECONSTRUCT_COLUMNS = ["n", "m", "re_base", "im_base", "err_base", "re_opt", "im_opt", "err_opt", "gamma"]


def _num(v):
    if isinstance(v, (float, np.floating)) and not math.isfinite(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    return v


def write_table(rows, columns, out_dir, name, fmt):
    """Write ``rows`` (dicts) as ``name.csv`` or ``name.json``; returns the path."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.{fmt}"
    if fmt == "json":
        payload = [{c: _num(r.get(c)) for c in columns} for r in rows]
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        return path
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_fmt(r.get(c)) for c in columns])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{v:.17g}"
    return "" if v is None else str(v)


def write_json(obj, out_dir, name):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.json"
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_num) + "\n")
    return path


# ---------------------------------------------------------------------------
# dataset sourcing


def _dataset_for(cfg, args, state=None, strategy=None):
    path = args.dataset or cfg.get("dataset")
    if path and state is None:
        path = Path(path)
        if not path.is_absolute() and args.config and not path.exists():
            path = Path(args.config).parent / path
        return load_dataset(path)
    state = cfg.state if state is None else state
    return generate_dataset(state, strategy or cfg.strategy, cfg.blocks, cfg.per_block, cfg.seed, threads=args.threads)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, args):
    data = _dataset_for(cfg, args)
    args.out.mkdir(parents=True, exist_ok=True)
    path = data.to_csv(args.out / "dataset.csv")
    log.info("wrote %d samples to %s", len(data), path)
    return [path]


def _reconstruct_rows(data, cfg, elements, M=None):
    results = reconstruct_elements(
        data, elements, cfg.family_kind, cfg.M if M is None else M, None, cfg.max_condition, cfg.split
    )
    rows = []
    for est in results:
        row = est.row()
        row["dropped"] = est.dropped_members
        row["note"] = est.note
        if data.spec is not None:
            truth = exact_value(data.spec, Target("matrix_element", est.n, est.m))
            row["re_true"], row["im_true"] = truth.real, truth.imag
        rows.append(row)
    return rows


def cmd_reconstruct(cfg, args):
    data = _dataset_for(cfg, args)
    rows = _reconstruct_rows(data, cfg, cfg.elements())
    columns = RECONSTRUCT_COLUMNS + ["dropped"] + (["re_true", "im_true"] if data.spec is not None else [])
    paths = [write_table(rows, columns, args.out, "reconstruct", args.format)]
    notes = [{"n": r["n"], "m": r["m"], "note": r["note"]} for r in rows if r["note"]]
    meta = {
        "dataset": data.provenance(),
        "family": cfg.family_kind,
        "M": cfg.M,
        "split": cfg.split,
        "notes": notes,
    }
    paths.append(write_json(meta, args.out, "reconstruct_meta"))
    return paths


_INTRINSIC = {"intensity": "intensity", "quadrature": "quadrature", "amplitude": "amplitude"}


def cmd_observe(cfg, args):
    targets = [Target.parse(t) for t in cfg.get("targets", ["intensity"])]
    rows, paths = [], []
    hist_cfg = cfg.get("histogram")
    args.out.mkdir(parents=True, exist_ok=True)
    for idx, state in enumerate(cfg.states or [None]):
        data = _dataset_for(cfg, args, state=state)
        spec = data.spec
        for target in targets:
            est = AdaptiveKernelEstimator(target, cfg.family_kind, cfg.M, cfg.mode, cfg.max_condition, cfg.split)
            base, opt = est.estimate(data)
            row = {
                "state": idx,
                "target": str(target),
                "re_base": np.real(base.mean),
                "im_base": np.imag(base.mean),
                "err_base": base.std_error,
                "re_opt": np.real(opt.mean),
                "im_opt": np.imag(opt.mean),
                "err_opt": opt.std_error,
                "var_base": base.variance,
                "var_opt": opt.variance,
                "gamma": est.result_.gamma,
                "dropped": est.result_.dropped_members,
            }
            if spec is not None:
                truth = exact_value(spec, target)
                row["re_true"], row["im_true"] = truth.real, truth.imag
                row["mean_photons"] = spec.mean_photons
                if target.kind in _INTRINSIC:
                    intrinsic = intrinsic_noise(spec, _INTRINSIC[target.kind])
                    if intrinsic > 0:
                        row["noise_base"] = noise_ratio(base.variance, intrinsic)
                        row["noise_opt"] = noise_ratio(opt.variance, intrinsic)
            rows.append(row)
            if hist_cfg is not None and idx == 0:
                bins = hist_cfg.get("bins", 50)
                rng = hist_cfg.get("range")
                for label, kexpr in (("base", KernelExpr.base(target)), ("opt", est.kernel_)):
                    hist = kernel_histogram(data, kexpr, bins, rng)
                    paths.append(hist.to_csv(args.out / f"histogram_{_slug(target)}_{label}.csv"))
    columns = [
        "state", "target", "mean_photons", "re_true", "im_true", "re_base", "im_base", "err_base",
        "re_opt", "im_opt", "err_opt", "var_base", "var_opt", "noise_base", "noise_opt", "gamma", "dropped",
    ]
    paths.insert(0, write_table(rows, columns, args.out, "observe", args.format))
    return paths


def _slug(target):
    return str(target).replace("(", "_").replace(")", "").replace(",", "_")


def cmd_gamma_scan(cfg, args):
    M_values = cfg.get("M_values", [cfg.M])
    families = cfg.get("families") or [cfg.family_kind]
    rows = []
    for kind in families:
        for n, m in cfg.elements():
            target = Target("matrix_element", n, m)
            for M, gamma in gamma_scan(target, kind, cfg.state, M_values, cfg.mode, cfg.max_condition):
                rows.append({"family": kind, "n": n, "m": m, "M": M, "gamma": gamma})
    return [write_table(rows, ["family", "n", "m", "M", "gamma"], args.out, "gamma_scan", args.format)]


def cmd_pathology(cfg, args):
    """Too many null functions, and deterministic phase scanning."""
    opts = cfg.get("pathology", {})
    M_bad = opts.get("M_bad", 32)
    grid_P = opts.get("grid_P", 25)
    phase_target = Target.parse(opts.get("target", "quadrature"))
    elements = cfg.elements()
    spec = cfg.state

    random_data = _dataset_for(cfg, args, state=spec, strategy=PhaseStrategy.random())
    good = _reconstruct_rows(random_data, cfg, elements)
    bad = _reconstruct_rows(random_data, cfg, elements, M=M_bad)
    max_good = max(r["err_opt"] for r in good)
    max_bad = max(r["err_opt"] for r in bad)
    too_many = {
        "M": cfg.M,
        "M_bad": M_bad,
        "max_err_opt": max_good,
        "max_err_opt_bad": max_bad,
        "inflation": max_bad / max_good if max_good > 0 else math.inf,
        "inflated": bool(max_bad > max_good),
        "dropped_bad": [r["dropped"] for r in bad],
        "rows": [{"n": g["n"], "m": g["m"], "err_opt": g["err_opt"], "err_opt_bad": b["err_opt"]} for g, b in zip(good, bad)],
    }

    grid_data = _dataset_for(cfg, args, state=spec, strategy=PhaseStrategy.grid(grid_P))
    truth = exact_value(spec, phase_target)
    scanning = {"grid_P": grid_P, "target": str(phase_target), "truth": [truth.real, truth.imag]}
    for label, data in (("random", random_data), ("grid", grid_data)):
        est = AdaptiveKernelEstimator(phase_target, cfg.family_kind, cfg.M, cfg.mode, cfg.max_condition, cfg.split)
        base, opt = est.estimate(data)
        # effect of F_0 alone on a phase-independent kernel
        f0 = AdaptiveKernelEstimator("intensity", "I", 1, "real", cfg.max_condition).fit(data)
        x, phi = data.x, data.phi
        shift = float(np.mean(2.0 * (f0.mu_[0] * np.exp(2j * phi)).real))
        scanning[label] = {
            "mean_base": [float(np.real(base.mean)), float(np.imag(base.mean))],
            "err_base": base.std_error,
            "bias_base_sigma": abs(base.mean - truth) / base.std_error,
            "mean_opt": [float(np.real(opt.mean)), float(np.imag(opt.mean))],
            "err_opt": opt.std_error,
            "bias_opt_sigma": abs(opt.mean - truth) / opt.std_error,
            "f0_mean_shift": shift,
        }
    report = {"state": spec.to_dict(), "seed": cfg.seed, "too_many_null_functions": too_many, "phase_scanning": scanning}
    return [write_json(report, args.out, "pathology")]


COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "observe": cmd_observe,
    "gamma-scan": cmd_gamma_scan,
    "pathology": cmd_pathology,
}


def _default_threads():
    value = os.environ.get(THREADS_ENV)
    if value is None:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {value!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="adaptive-qht", description="Adaptive homodyne tomography experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        if name in ("reconstruct", "observe"):
            p.add_argument("--dataset", help="dataset CSV from 'simulate' (otherwise simulated in-process)")
        else:
            p.set_defaults(dataset=None)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.threads is None:
            args.threads = _default_threads()
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config, seed=args.seed)
        paths = COMMANDS[args.command](cfg, args)
    except (ConfigError, TruncationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (IllConditionedError, ConvergenceError, GridError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
