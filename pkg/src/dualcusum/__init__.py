"""Decentralized change-detection testbed for cooperative spectrum sensing.

Simulates a network of sensing nodes watching for a primary transmitter's
onset at a geometric random time. Detectors: a two-layer scheme in which
per-node CUSUMs gate constant-amplitude transmissions and a fusion-center
CUSUM on the superposed signal declares the change; memoryless slot-fusion
rules (OR / AND / MAJORITY) with a tuned common node threshold; and a
centralized CUSUM benchmark with access to every node's statistic. The
package calibrates each detector to run-level false-alarm targets and
measures detection delay and transmission cost against published tables.
"""

from .algos import (
    FUSION_RULES,
    DualCusumParams,
    DualCusumState,
    GlobalCusumParams,
    SlotFusionParams,
    dual_cusum_step,
    global_cusum_step,
    rule_fused_pfa,
    rule_invert_pfa,
    slot_fusion_step,
)
from .cli import main, render_results, write_results
from .config import (
    DETECTOR_IDS,
    ConfigError,
    DualTuning,
    ExperimentConfig,
    load_preset,
    parse_config,
    preset_names,
)
from .detect import (
    EnergyModel,
    FusionChannel,
    GaussianShiftModel,
    cusum_step,
    llr_energy,
    llr_fusion,
    llr_gaussian_shift,
    node_llr,
)
from .experiments import (
    ExperimentCache,
    ResultRow,
    calibrate_detector,
    measure_detector,
    reproduce_table,
    run_experiment,
)
from .reference import ALPHAS, TABLES, published_value, table_spec
from .sim import (
    MEASUREMENT_STREAM_OFFSET,
    CalibrationError,
    CalibrationResult,
    Metrics,
    Scenario,
    TrialResult,
    calibrate_dual_cusum,
    calibrate_global_cusum,
    calibrate_slot_fusion,
    eq2_run_to_slot,
    eq2_slot_to_run,
    estimate_metrics,
    gen_slot_statistic,
    run_trials,
    simulate_trial,
)
from .stats import RandomStream

__version__ = "0.1.0"

__all__ = [
    "ALPHAS",
    "CalibrationError",
    "CalibrationResult",
    "ConfigError",
    "DETECTOR_IDS",
    "DualCusumParams",
    "DualCusumState",
    "DualTuning",
    "EnergyModel",
    "ExperimentCache",
    "ExperimentConfig",
    "FUSION_RULES",
    "FusionChannel",
    "GaussianShiftModel",
    "GlobalCusumParams",
    "MEASUREMENT_STREAM_OFFSET",
    "Metrics",
    "RandomStream",
    "ResultRow",
    "Scenario",
    "SlotFusionParams",
    "TABLES",
    "TrialResult",
    "calibrate_detector",
    "calibrate_dual_cusum",
    "calibrate_global_cusum",
    "calibrate_slot_fusion",
    "cusum_step",
    "dual_cusum_step",
    "eq2_run_to_slot",
    "eq2_slot_to_run",
    "estimate_metrics",
    "gen_slot_statistic",
    "global_cusum_step",
    "llr_energy",
    "llr_fusion",
    "llr_gaussian_shift",
    "load_preset",
    "main",
    "measure_detector",
    "node_llr",
    "parse_config",
    "preset_names",
    "published_value",
    "render_results",
    "reproduce_table",
    "rule_fused_pfa",
    "rule_invert_pfa",
    "run_experiment",
    "run_trials",
    "simulate_trial",
    "slot_fusion_step",
    "table_spec",
    "write_results",
]
