"""Command-line entry point: ``biasscan audit|experiment|synth|compas``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from . import __version__
from .data import BiasScanError, ConfigError, DataError, IngestConfig, ingest_csv
from .experiment import flatten, run_experiment
from .report import AuditConfig, dumps, run_audit, summary_text
from .scan import BOTH, ScanConfig
from .scoring import PenaltyConfig
from .synth import SyntheticSpec, generate_null, generate_synthetic

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

log = logging.getLogger("biasscan")

# flags a config file may set, keyed the way reports echo them
_AUDIT_KEYS = {
    "data", "outcome_col", "pred_col", "features", "direction", "theta", "restarts",
    "max_sweeps", "bootstrap", "seed", "error_scan", "threshold", "theta_sweep",
}


def _pattern(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.replace("x", ",").split(",") if s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad pattern {text!r}; expected e.g. 2,2,2,6") from None


def _theta_sweep(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("theta sweep must look like lo:hi:steps")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad theta sweep {text!r}") from None
    if steps < 1 or lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError("theta sweep needs 0 <= lo <= hi and steps >= 1")
    return lo, hi, steps


def _add_scan_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--direction", choices=["under", "over", BOTH], default=None, help="bias direction to scan (default both)")
    p.add_argument("--theta", type=float, default=None, help="complexity penalty per extra value (default 0)")
    p.add_argument("--restarts", type=int, default=None, help="random restarts per scan (default 50)")
    p.add_argument("--max-sweeps", type=int, default=None, help="sweep cap per restart (default 100)")
    p.add_argument("--bootstrap", type=int, default=None, help="bootstrap replicates, 0 to skip (default 99)")
    p.add_argument("--seed", type=int, default=None, help="master random seed (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes; results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biasscan", description="Find the most significantly mis-predicted subgroup of a probabilistic classifier.")
    parser.add_argument("--version", action="version", version=f"biasscan {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit", help="scan a predictions CSV for biased subgroups")
    a.add_argument("--config", help="JSON file of flag values; an audit report's config section works too")
    a.add_argument("--data", help="input CSV")
    a.add_argument("--outcome-col", help="binary outcome column")
    a.add_argument("--pred-col", help="predicted probability column")
    a.add_argument("--features", help="comma list; name:cont:<bins> marks a continuous column")
    _add_scan_flags(a)
    a.add_argument("--error-scan", action="store_true", default=None, help="scan for excess misclassification instead")
    a.add_argument("--threshold", type=float, default=None, help="classification threshold for --error-scan (default 0.5)")
    a.add_argument("--theta-sweep", type=_theta_sweep, default=None, help="lo:hi:steps; adds a score vs feature-count curve")
    a.add_argument("--out", help="report path (default stdout)")
    a.add_argument("--summary", action="store_true", help="print a short text summary to stderr")

    e = sub.add_parser("experiment", help="inject bias into synthetic data and measure detection")
    e.add_argument("--pattern", type=_pattern, action="append", dest="patterns", help="per-feature subset sizes, repeatable (default 2,2,2,6)")
    e.add_argument("--reps", type=int, default=50)
    e.add_argument("--arity", type=int, default=6)
    e.add_argument("--bias", type=float, default=1.5, help="injected log-odds shift")
    e.add_argument("--affected", type=int, default=100, help="rows inside the biased subgroup")
    e.add_argument("--coef-scale", type=float, default=0.5)
    e.add_argument("--alpha", type=float, default=0.05)
    _add_scan_flags(e)
    e.add_argument("--out", help="metrics path; .csv writes a flat table, anything else JSON")

    s = sub.add_parser("synth", help="write a synthetic dataset as CSV")
    s.add_argument("--pattern", type=_pattern, default=(2, 2, 2, 6))
    s.add_argument("--arity", type=int, default=6)
    s.add_argument("--bias", type=float, default=1.5)
    s.add_argument("--affected", type=int, default=100)
    s.add_argument("--coef-scale", type=float, default=0.5)
    s.add_argument("--null-rows", type=int, default=None, help="write unbiased data with this many rows instead")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--truth", help="also write the injected subgroup as JSON")
    s.add_argument("--out", required=True)

    c = sub.add_parser("compas", help="prepare ProPublica's compas-scores-two-years.csv for auditing")
    c.add_argument("--raw", required=True)
    c.add_argument("--out", required=True)
    return parser


def _pick(args, cfg: dict, key: str, default):
    val = getattr(args, key)
    if val is not None:
        return val
    return cfg.get(key, default)


def audit_config(args) -> AuditConfig:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if "config" in cfg and isinstance(cfg["config"], dict):
            cfg = cfg["config"]
        unknown = set(cfg) - _AUDIT_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = _pick(args, cfg, "data", None)
    outcome = _pick(args, cfg, "outcome_col", None)
    pred = _pick(args, cfg, "pred_col", None)
    features = _pick(args, cfg, "features", None)
    for name, val in (("--data", data), ("--outcome-col", outcome), ("--pred-col", pred), ("--features", features)):
        if not val:
            raise ConfigError(f"{name} is required")
    sweep = _pick(args, cfg, "theta_sweep", None)
    try:
        scan = ScanConfig(
            direction=_pick(args, cfg, "direction", BOTH),
            penalty=PenaltyConfig(float(_pick(args, cfg, "theta", 0.0))),
            restarts=int(_pick(args, cfg, "restarts", 50)),
            seed=int(_pick(args, cfg, "seed", 0)),
            max_sweeps=int(_pick(args, cfg, "max_sweeps", 100)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    bootstrap = int(_pick(args, cfg, "bootstrap", 99))
    if 0 < bootstrap < 19:
        raise ConfigError("--bootstrap must be 0 or at least 19")
    threshold = float(_pick(args, cfg, "threshold", 0.5))
    if not 0.0 < threshold < 1.0:
        raise ConfigError("--threshold must lie in (0, 1)")
    return AuditConfig(
        data=str(data),
        ingest=IngestConfig.from_tokens(outcome, pred, features),
        scan=scan,
        bootstrap=bootstrap,
        error_scan=bool(_pick(args, cfg, "error_scan", False)),
        threshold=threshold,
        theta_sweep=tuple(sweep) if sweep else None,
    )


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_audit(args) -> int:
    config = audit_config(args)
    dataset = ingest_csv(config.data, config.ingest)
    log.info("loaded %d rows, %d features", dataset.n, len(dataset.space))
    report = run_audit(dataset, config, jobs=args.jobs)
    _write(dumps(report), args.out)
    if args.summary:
        sys.stderr.write(summary_text(report))
    return EXIT_OK


def cmd_experiment(args) -> int:
    patterns = args.patterns or [(2, 2, 2, 6)]
    if args.reps < 1:
        raise ConfigError("--reps must be at least 1")
    bootstrap = 99 if args.bootstrap is None else args.bootstrap
    if 0 < bootstrap < 19:
        raise ConfigError("--bootstrap must be 0 or at least 19")
    widths = {len(p) for p in patterns}
    if len(widths) != 1:
        raise ConfigError("all patterns need the same number of features")
    try:
        base = SyntheticSpec(
            feature_count=widths.pop(), arity=args.arity, coefficient_scale=args.coef_scale,
            injection_pattern=patterns[0], bias_log_odds=args.bias, affected_count=args.affected,
            seed=args.seed or 0,
        )
        scan = ScanConfig(
            direction=args.direction or BOTH, penalty=PenaltyConfig(args.theta or 0.0),
            restarts=args.restarts or 50, seed=args.seed or 0, max_sweeps=args.max_sweeps or 100,
        )
        for p in patterns:
            SyntheticSpec(**{**base.as_dict(), "injection_pattern": p})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = run_experiment(base, patterns, args.reps, scan, bootstrap, args.alpha, args.jobs)
    config = {**base.as_dict(), **scan.as_dict(), "patterns": [list(p) for p in patterns], "reps": args.reps, "bootstrap": bootstrap, "alpha": args.alpha}
    if args.out and args.out.endswith(".csv"):
        pd.DataFrame(flatten(rows)).to_csv(args.out, index=False)
    else:
        _write(dumps({"tool": {"name": "biasscan", "version": __version__}, "config": config, "results": rows}), args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        if args.null_rows:
            data = generate_null(args.null_rows, len(args.pattern), args.arity, args.coef_scale, args.seed)
            truth = None
        else:
            spec = SyntheticSpec(
                feature_count=len(args.pattern), arity=args.arity, coefficient_scale=args.coef_scale,
                injection_pattern=args.pattern, bias_log_odds=args.bias, affected_count=args.affected, seed=args.seed,
            )
            data, gt = generate_synthetic(spec)
            truth = {"spec": spec.as_dict(), "biased_subgroup": gt.biased_subgroup.as_dict(), "affected_rows": len(gt.affected_rows)}
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    data.to_csv(args.out)
    if args.truth:
        if truth is None:
            raise ConfigError("--truth needs injected data, not --null-rows")
        Path(args.truth).write_text(json.dumps(truth, indent=2) + "\n")
    return EXIT_OK


def cmd_compas(args) -> int:
    from .compas import prepare_compas

    prepare_compas(args.raw).to_csv(args.out, index=False, float_format="%.17g")
    return EXIT_OK


COMMANDS = {"audit": cmd_audit, "experiment": cmd_experiment, "synth": cmd_synth, "compas": cmd_compas}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"biasscan: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"biasscan: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BiasScanError as exc:
        print(f"biasscan: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
