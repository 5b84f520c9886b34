"""Command-line entry points: calibrate, run, and table reproduction.

``calibrate`` tunes one detector and prints the resulting thresholds;
``run`` calibrates then measures, emitting CSV rows; ``reproduce --table N``
rebuilds one published benchmark table with side-by-side comparison values.
Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 calibration
failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

from .algos import DualCusumParams, SlotFusionParams
from .config import (
    DEFAULT_CAL_TRIALS,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    DETECTOR_IDS,
    ConfigError,
    DualTuning,
    ExperimentConfig,
    load_preset,
    parse_config,
)
from .experiments import (
    ExperimentCache,
    calibrate_detector,
    reproduce_table,
    run_experiment,
)
from .reference import ALPHAS, TABLES, table_spec
from .sim import CalibrationError

__all__ = ["RESULT_HEADER", "render_results", "write_results", "build_parser", "main"]

RESULT_HEADER = (
    "table,detector,alpha,pfa_hat,pfa_ci,edd_uncond,edd_cond,edd_ci,"
    "etr,pd_hat,trials,seed,paper_value,status"
)

_ROW_FIELDS = (
    "table",
    "detector",
    "alpha",
    "pfa_hat",
    "pfa_ci",
    "edd_uncond",
    "edd_cond",
    "edd_ci",
    "etr",
    "pd_hat",
    "trials",
    "seed",
    "paper_value",
    "status",
)


def _fmt_field(value) -> str:
    """One CSV field: empty for missing, 6 significant digits for floats."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".6g")
    return str(value)


def render_results(rows) -> str:
    """The full CSV document for a batch of result rows.

    Rows are sorted by (table, detector, alpha) so the bytes depend only on
    the set of rows, never on production order or worker count.
    """
    if not rows:
        raise ValueError("results must contain at least one row")
    ordered = sorted(rows, key=lambda r: (r.table, r.detector, r.alpha))
    lines = [RESULT_HEADER]
    for row in ordered:
        lines.append(",".join(_fmt_field(getattr(row, name)) for name in _ROW_FIELDS))
    return "\n".join(lines) + "\n"


def write_results(rows, path: str) -> None:
    """Write the rendered CSV to ``path`` with fixed newlines."""
    text = render_results(rows)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualcusum",
        description=(
            "Monte Carlo testbed for decentralized spectrum-sensing change "
            "detection: two-layer CUSUM with gated transmissions, slot-based "
            "fusion rules, and a centralized CUSUM benchmark."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser(
        "calibrate", help="tune one detector's thresholds to false-alarm targets"
    )
    _add_source_flags(cal)
    _add_budget_flags(cal)
    cal.set_defaults(func=_cmd_calibrate)

    run = sub.add_parser(
        "run", help="calibrate then measure one detector, emitting CSV rows"
    )
    _add_source_flags(run)
    _add_budget_flags(run)
    run.add_argument("--out", help="write CSV here instead of stdout")
    run.set_defaults(func=_cmd_run)

    rep = sub.add_parser(
        "reproduce", help="rebuild one published benchmark table"
    )
    rep.add_argument(
        "--table", type=int, required=True, choices=sorted(TABLES), help="table number"
    )
    _add_budget_flags(rep)
    rep.add_argument("--out", help="output CSV path (default table<N>.csv)")
    rep.set_defaults(func=_cmd_reproduce)

    return parser


def _add_source_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="YAML experiment document")
    sp.add_argument("--preset", help="shipped scenario preset name")
    sp.add_argument("--detector", choices=DETECTOR_IDS, help="detector to tune")
    sp.add_argument(
        "--alpha",
        type=float,
        action="append",
        dest="alphas",
        help="target run-level false-alarm probability (repeatable)",
    )


def _add_budget_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--seed", type=int, help="master seed")
    sp.add_argument("--trials", type=int, help="measurement trials per cell")
    sp.add_argument("--cal-trials", type=int, help="calibration trials per cell")
    sp.add_argument("--workers", type=int, help="parallel worker processes")


def _resolve_config(args) -> ExperimentConfig:
    """Build the experiment config from --config or --preset plus overrides."""
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise OSError(f"cannot read config {args.config!r}: {exc}") from exc
        config = parse_config(text)
    else:
        if args.preset is None or args.detector is None:
            raise ConfigError("provide --config, or --preset together with --detector")
        scenario, defaults = load_preset(args.preset)
        config = ExperimentConfig(
            scenario=scenario,
            detector=args.detector,
            alphas=tuple(args.alphas) if args.alphas else ALPHAS,
            dual=DualTuning(**{k: v for k, v in defaults.items() if k != "majority_quorum"}),
            majority_quorum=defaults.get("majority_quorum"),
        )

    overrides = {}
    if args.config is not None and args.detector is not None:
        overrides["detector"] = args.detector
    if args.alphas:
        overrides["alphas"] = tuple(args.alphas)
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.cal_trials is not None:
        overrides["calibration_trials"] = args.cal_trials
    if args.workers is not None:
        overrides["workers"] = args.workers
    if getattr(args, "out", None) is not None:
        overrides["out_path"] = args.out
    if overrides:
        try:
            config = replace(config, **overrides)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    return config


# ---------------------------------------------------------------------------
# commands


def _describe_detector(detector) -> str:
    if isinstance(detector, SlotFusionParams):
        return f"node_threshold={detector.node_threshold:.6g}"
    if isinstance(detector, DualCusumParams):
        return (
            f"local_threshold={detector.local_threshold:.6g} "
            f"fusion_threshold={detector.fusion_threshold:.6g}"
        )
    return f"fusion_threshold={detector.fusion_threshold:.6g}"


def _cmd_calibrate(args) -> int:
    config = _resolve_config(args)
    for alpha in config.alphas:
        cal = calibrate_detector(
            config.scenario,
            config.detector,
            alpha,
            dual=config.dual,
            majority_quorum=config.majority_quorum,
            cal_trials=config.calibration_trials,
            seed=config.master_seed,
            workers=config.workers,
        )
        print(
            f"{config.detector} alpha={alpha:.6g}: {_describe_detector(cal.detector)} "
            f"achieved_pfa={cal.achieved_pfa:.6g} (+-{cal.achieved_ci:.6g}, "
            f"{cal.n_trials} calibration trials)"
        )
        for gamma, beta, achieved, edd in cal.details:
            if math.isnan(beta):
                print(f"  local_threshold={gamma:.6g}: infeasible at this target")
            else:
                print(
                    f"  local_threshold={gamma:.6g}: fusion_threshold={beta:.6g} "
                    f"achieved_pfa={achieved:.6g} edd={edd:.6g}"
                )
    return 0


def _cmd_run(args) -> int:
    config = _resolve_config(args)
    rows = run_experiment(config)
    if config.out_path is not None:
        write_results(rows, config.out_path)
        print(f"wrote {len(rows)} rows to {config.out_path}")
    else:
        sys.stdout.write(render_results(rows))
    return 0


def _cmd_reproduce(args) -> int:
    rows = reproduce_table(
        args.table,
        seed=args.seed if args.seed is not None else DEFAULT_SEED,
        trials=args.trials if args.trials is not None else DEFAULT_TRIALS,
        cal_trials=args.cal_trials if args.cal_trials is not None else DEFAULT_CAL_TRIALS,
        workers=args.workers if args.workers is not None else 1,
        cache=ExperimentCache(),
    )
    out = args.out if args.out is not None else f"table{args.table}.csv"
    write_results(rows, out)

    spec = table_spec(args.table)
    metric = "etr" if spec.metric == "etr" else "edd_uncond"
    print(f"table {args.table} ({spec.preset}) -> {out}")
    print(f"{'detector':<14}{'alpha':>8}{metric:>12}{'published':>12}  status")
    for row in sorted(rows, key=lambda r: (r.detector, r.alpha)):
        est = getattr(row, metric)
        print(
            f"{row.detector:<14}{row.alpha:>8.6g}"
            f"{'' if est is None else format(est, '.6g'):>12}"
            f"{'' if row.paper_value is None else format(row.paper_value, '.6g'):>12}"
            f"  {row.status}"
        )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
