"""Experiment configuration: YAML parsing, presets, strict validation.

A config document names a scenario (inline mapping or shipped preset),
one detector, the target false-alarm probabilities, and the Monte Carlo
budget. Unknown keys are rejected at every level so typos fail loudly
instead of silently running defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import yaml

from .sim import Scenario

__all__ = [
    "DETECTOR_IDS",
    "DEFAULT_SEED",
    "ConfigError",
    "DualTuning",
    "ExperimentConfig",
    "parse_config",
    "load_preset",
    "preset_names",
]

DETECTOR_IDS = ("or", "and", "majority", "dual_cusum", "global_cusum")

DEFAULT_SEED = 20260814
DEFAULT_TRIALS = 50_000
DEFAULT_CAL_TRIALS = 20_000

_SCENARIO_KEYS = {
    "kind",
    "node_params",
    "rho",
    "node_noise_variance",
    "fusion_noise_variance",
    "samples_per_slot",
    "horizon_after_change",
}
_TOP_KEYS = {
    "scenario",
    "detector",
    "alphas",
    "trials",
    "calibration_trials",
    "seed",
    "workers",
    "out",
    "dual",
    "majority",
}
_DUAL_KEYS = {"amplitude", "drift_multiplier", "local_threshold_grid"}
_MAJORITY_KEYS = {"quorum"}
_PRESET_KEYS = {"description", "scenario", "defaults"}
_PRESET_DEFAULT_KEYS = {
    "amplitude",
    "drift_multiplier",
    "local_threshold_grid",
    "majority_quorum",
}


class ConfigError(ValueError):
    """Invalid configuration; surfaced as exit code 2."""


@dataclass(frozen=True)
class DualTuning:
    """Fixed design parameters of the two-layer detector.

    The local-threshold grid is searched during calibration; amplitude and
    drift multiplier are never tuned.
    """

    amplitude: float = 3.1623
    drift_multiplier: float = 5.0
    local_threshold_grid: tuple[float, ...] = tuple(float(g) for g in range(0, 21, 2))

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "local_threshold_grid", tuple(float(g) for g in self.local_threshold_grid)
        )
        if self.amplitude <= 0:
            raise ConfigError(f"dual.amplitude must be positive, got {self.amplitude}")
        if self.drift_multiplier <= 0:
            raise ConfigError(
                f"dual.drift_multiplier must be positive, got {self.drift_multiplier}"
            )
        if not self.local_threshold_grid:
            raise ConfigError("dual.local_threshold_grid must be nonempty")
        if any(g < 0 for g in self.local_threshold_grid):
            raise ConfigError("dual.local_threshold_grid entries must be nonnegative")


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully validated experiment: scenario, detector, targets, budget."""

    scenario: Scenario
    detector: str
    alphas: tuple[float, ...]
    trials: int = DEFAULT_TRIALS
    calibration_trials: int = DEFAULT_CAL_TRIALS
    master_seed: int = DEFAULT_SEED
    workers: int = 1
    out_path: str | None = None
    dual: DualTuning = field(default_factory=DualTuning)
    majority_quorum: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.detector not in DETECTOR_IDS:
            raise ConfigError(
                f"detector must be one of {DETECTOR_IDS}, got {self.detector!r}"
            )
        if not self.alphas:
            raise ConfigError("alphas must be nonempty")
        if any(not 0.0 < a < 1.0 for a in self.alphas):
            raise ConfigError(f"alphas must lie in (0, 1), got {list(self.alphas)}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.calibration_trials < 1:
            raise ConfigError(f"calibration_trials must be >= 1, got {self.calibration_trials}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.master_seed}")
        if self.out_path is not None and not isinstance(self.out_path, str):
            raise ConfigError(f"out must be a path string, got {self.out_path!r}")
        if self.majority_quorum is not None:
            if not isinstance(self.majority_quorum, int) or not (
                1 <= self.majority_quorum <= self.scenario.node_count
            ):
                raise ConfigError(
                    f"majority.quorum must be an integer in [1, {self.scenario.node_count}], "
                    f"got {self.majority_quorum}"
                )


def preset_names() -> tuple[str, ...]:
    root = resources.files("dualcusum").joinpath("presets")
    return tuple(sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml")))


def load_preset(name: str):
    """Load a shipped preset; returns (Scenario, defaults mapping)."""
    root = resources.files("dualcusum").joinpath("presets")
    path = root.joinpath(f"{name}.yaml")
    try:
        text = path.read_text()
    except (FileNotFoundError, OSError):
        raise ConfigError(
            f"unknown preset {name!r}; available presets: {', '.join(preset_names())}"
        ) from None
    doc = _load_mapping(text, f"preset {name!r}")
    _reject_unknown(doc, _PRESET_KEYS, f"preset {name!r}")
    scenario = _build_scenario(doc.get("scenario"), f"preset {name!r}")
    defaults = doc.get("defaults") or {}
    if not isinstance(defaults, dict):
        raise ConfigError(f"preset {name!r}: defaults must be a mapping")
    _reject_unknown(defaults, _PRESET_DEFAULT_KEYS, f"preset {name!r} defaults")
    return scenario, defaults


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a YAML experiment document."""
    doc = _load_mapping(text, "config")
    _reject_unknown(doc, _TOP_KEYS, "config")
    for key in ("scenario", "detector", "alphas"):
        if key not in doc:
            raise ConfigError(f"config is missing required key {key!r}")

    preset_defaults: dict = {}
    spec = doc["scenario"]
    if isinstance(spec, str):
        scenario, preset_defaults = load_preset(spec)
    else:
        scenario = _build_scenario(spec, "config")

    dual_block = doc.get("dual") or {}
    if not isinstance(dual_block, dict):
        raise ConfigError("dual must be a mapping")
    _reject_unknown(dual_block, _DUAL_KEYS, "dual")
    dual_kwargs = {
        k: preset_defaults[k] for k in ("amplitude", "drift_multiplier", "local_threshold_grid")
        if k in preset_defaults
    }
    dual_kwargs.update(dual_block)
    dual = DualTuning(**dual_kwargs)

    majority_block = doc.get("majority") or {}
    if not isinstance(majority_block, dict):
        raise ConfigError("majority must be a mapping")
    _reject_unknown(majority_block, _MAJORITY_KEYS, "majority")
    quorum = majority_block.get("quorum", preset_defaults.get("majority_quorum"))

    try:
        return ExperimentConfig(
            scenario=scenario,
            detector=_require_str(doc, "detector"),
            alphas=_require_list(doc, "alphas"),
            trials=_int_key(doc, "trials", DEFAULT_TRIALS),
            calibration_trials=_int_key(doc, "calibration_trials", DEFAULT_CAL_TRIALS),
            master_seed=_int_key(doc, "seed", DEFAULT_SEED),
            workers=_int_key(doc, "workers", 1),
            out_path=doc.get("out"),
            dual=dual,
            majority_quorum=quorum,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _load_mapping(text: str, what: str) -> dict:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{what} is not well-formed YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{what} must be a mapping, got {type(doc).__name__}")
    return doc


def _reject_unknown(doc: dict, allowed: set, what: str) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"{what} has unknown key(s): {', '.join(map(repr, unknown))}")


def _build_scenario(spec, what: str) -> Scenario:
    if not isinstance(spec, dict):
        raise ConfigError(f"{what}: scenario must be a preset name or a mapping")
    _reject_unknown(spec, _SCENARIO_KEYS, f"{what} scenario")
    for key in ("kind", "node_params", "rho"):
        if key not in spec:
            raise ConfigError(f"{what} scenario is missing required key {key!r}")
    kwargs = dict(spec)
    kwargs["change_prob"] = kwargs.pop("rho")
    try:
        return Scenario(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} scenario: {exc}") from exc


def _require_str(doc: dict, key: str) -> str:
    v = doc[key]
    if not isinstance(v, str):
        raise ConfigError(f"{key} must be a string, got {type(v).__name__}")
    return v


def _require_list(doc: dict, key: str):
    v = doc[key]
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{key} must be a list, got {type(v).__name__}")
    return tuple(v)


def _int_key(doc: dict, key: str, default: int) -> int:
    v = doc.get(key, default)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return v
