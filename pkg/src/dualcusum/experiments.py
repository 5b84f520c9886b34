"""Experiment orchestration: calibrate, measure, and rebuild benchmark tables.

One cell is a (scenario, detector, target false-alarm) triple: calibration
tunes the detector's free threshold on dedicated substreams, measurement
scores the tuned detector on fresh substreams, and the pair becomes one
results row. An :class:`ExperimentCache` shares cells across tables that
reuse the same scenario — the three energy-detection tables differ only in
row layout — so rebuilding every table costs one calibration and one
measurement per distinct cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .algos import FUSION_RULES, SlotFusionParams
from .config import (
    DEFAULT_CAL_TRIALS,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    DualTuning,
    ExperimentConfig,
    load_preset,
)
from .reference import ALPHAS, published_value, table_spec
from .sim import (
    CalibrationResult,
    Metrics,
    Scenario,
    calibrate_dual_cusum,
    calibrate_global_cusum,
    calibrate_slot_fusion,
    estimate_metrics,
    run_trials,
)

__all__ = [
    "ResultRow",
    "Cell",
    "ExperimentCache",
    "calibrate_detector",
    "measure_detector",
    "run_experiment",
    "reproduce_table",
]


@dataclass(frozen=True)
class ResultRow:
    """One output row: estimates beside the published value, if any.

    Estimate fields are None (rendered empty) on rows whose algorithm is
    outside this testbed's scope; ``status`` distinguishes the two cases.
    Rows from ad-hoc runs rather than a published table carry table 0 and
    no published value.
    """

    table: int
    detector: str
    alpha: float
    pfa_hat: float | None
    pfa_ci: float | None
    edd_uncond: float | None
    edd_cond: float | None
    edd_ci: float | None
    etr: float | None
    pd_hat: float | None
    trials: int | None
    seed: int | None
    paper_value: float | None
    status: str


@dataclass(frozen=True)
class Cell:
    """Calibration plus measurement for one (scenario, detector, alpha)."""

    calibration: CalibrationResult
    metrics: Metrics


def calibrate_detector(
    scenario: Scenario,
    detector_id: str,
    alpha: float,
    *,
    dual: DualTuning,
    majority_quorum: int | None = None,
    cal_trials: int = DEFAULT_CAL_TRIALS,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> CalibrationResult:
    """Tune one detector kind to a run-level false-alarm target."""
    if detector_id in FUSION_RULES:
        proto = SlotFusionParams(
            node_threshold=0.0,
            rule=detector_id,
            quorum=majority_quorum if detector_id == "majority" else None,
        )
        return calibrate_slot_fusion(
            scenario, proto, alpha, n_cal=cal_trials, master_seed=seed, workers=workers
        )
    if detector_id == "dual_cusum":
        return calibrate_dual_cusum(
            scenario,
            alpha,
            amplitude=dual.amplitude,
            drift_multiplier=dual.drift_multiplier,
            gamma_grid=dual.local_threshold_grid,
            n_cal=cal_trials,
            master_seed=seed,
            workers=workers,
        )
    if detector_id == "global_cusum":
        return calibrate_global_cusum(
            scenario, alpha, n_cal=cal_trials, master_seed=seed, workers=workers
        )
    raise ValueError(f"unknown detector id {detector_id!r}")


def measure_detector(
    scenario: Scenario,
    detector,
    detector_id: str,
    *,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> Metrics:
    """Score a tuned detector on fresh measurement substreams."""
    results = run_trials(scenario, detector, trials, seed, workers=workers)
    return estimate_metrics(results, slot_rule=detector_id in FUSION_RULES)


class ExperimentCache:
    """Process-level store of finished cells, keyed by everything that
    affects their value — so the key omits ``workers``, which by contract
    must not change any estimate."""

    def __init__(self) -> None:
        self._cells: dict = {}

    def cell(
        self,
        scenario: Scenario,
        detector_id: str,
        alpha: float,
        *,
        dual: DualTuning,
        majority_quorum: int | None,
        trials: int,
        cal_trials: int,
        seed: int,
        workers: int = 1,
    ) -> Cell:
        key = (
            scenario,
            detector_id,
            float(alpha),
            dual if detector_id == "dual_cusum" else None,
            majority_quorum if detector_id == "majority" else None,
            trials,
            cal_trials,
            seed,
        )
        got = self._cells.get(key)
        if got is None:
            cal = calibrate_detector(
                scenario,
                detector_id,
                alpha,
                dual=dual,
                majority_quorum=majority_quorum,
                cal_trials=cal_trials,
                seed=seed,
                workers=workers,
            )
            metrics = measure_detector(
                scenario, cal.detector, detector_id, trials=trials, seed=seed, workers=workers
            )
            got = Cell(calibration=cal, metrics=metrics)
            self._cells[key] = got
        return got


def _row_from_cell(
    table: int, detector_id: str, alpha: float, cell: Cell, seed: int
) -> ResultRow:
    m = cell.metrics
    return ResultRow(
        table=table,
        detector=detector_id,
        alpha=alpha,
        pfa_hat=m.pfa_hat,
        pfa_ci=m.pfa_ci,
        edd_uncond=m.edd_unconditional,
        edd_cond=m.edd_conditional,
        edd_ci=m.edd_ci,
        etr=m.etr_hat,
        pd_hat=None if math.isnan(m.pd_hat) else m.pd_hat,
        trials=m.n_trials,
        seed=seed,
        paper_value=published_value(table, detector_id, alpha),
        status="ok",
    )


def run_experiment(config: ExperimentConfig, cache: ExperimentCache | None = None):
    """Calibrate and measure the config's detector at each target alpha.

    Returns ad-hoc rows (table 0, no published value) in alpha order.
    """
    cache = cache if cache is not None else ExperimentCache()
    rows = []
    for alpha in config.alphas:
        cell = cache.cell(
            config.scenario,
            config.detector,
            alpha,
            dual=config.dual,
            majority_quorum=config.majority_quorum,
            trials=config.trials,
            cal_trials=config.calibration_trials,
            seed=config.master_seed,
            workers=config.workers,
        )
        rows.append(_row_from_cell(0, config.detector, alpha, cell, config.master_seed))
    return rows


def reproduce_table(
    table: int,
    *,
    seed: int = DEFAULT_SEED,
    trials: int = DEFAULT_TRIALS,
    cal_trials: int = DEFAULT_CAL_TRIALS,
    workers: int = 1,
    alphas: tuple[float, ...] = ALPHAS,
    cache: ExperimentCache | None = None,
):
    """Rebuild one benchmark table: every in-scope cell calibrated and
    measured, out-of-scope rows emitted with the published value only."""
    spec = table_spec(table)
    scenario, defaults = load_preset(spec.preset)
    dual = DualTuning(**{k: v for k, v in defaults.items() if k != "majority_quorum"})
    quorum = defaults.get("majority_quorum")
    cache = cache if cache is not None else ExperimentCache()

    rows = []
    for detector_id in spec.rows:
        for alpha in alphas:
            if detector_id in spec.out_of_scope:
                rows.append(
                    ResultRow(
                        table=table,
                        detector=detector_id,
                        alpha=alpha,
                        pfa_hat=None,
                        pfa_ci=None,
                        edd_uncond=None,
                        edd_cond=None,
                        edd_ci=None,
                        etr=None,
                        pd_hat=None,
                        trials=None,
                        seed=None,
                        paper_value=published_value(table, detector_id, alpha),
                        status="out-of-scope",
                    )
                )
                continue
            cell = cache.cell(
                scenario,
                detector_id,
                alpha,
                dual=dual,
                majority_quorum=quorum,
                trials=trials,
                cal_trials=cal_trials,
                seed=seed,
                workers=workers,
            )
            rows.append(_row_from_cell(table, detector_id, alpha, cell, seed))
    return rows
