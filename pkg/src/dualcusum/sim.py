"""Scenario generation, trial simulation, metrics, and threshold calibration.

A trial is one run of a detector against one realization of the network:
a geometric change time T, pre-change noise up to T, post-change signal
afterwards, stopping at the first alarm or at T plus a censoring horizon.

Every detector here is a threshold crossing of a per-slot score process
that does not itself depend on the threshold: the fusion CUSUM for the
two-layer and centralized detectors, and the quorum-th largest node
statistic for slot fusion (count(stats > eta) >= q iff the q-th largest
exceeds eta). Calibration exploits that: one pass per trial records the
pre-change score maximum and the post-change running-max records, after
which the false-alarm probability and delay of EVERY candidate threshold
are exact lookups on common random numbers. Bisection then touches no new
randomness, which makes the achieved false-alarm rate pathwise monotone in
the threshold by construction.

Trial i draws exclusively from substream i of the master seed; measurement
uses substreams offset by MEASUREMENT_STREAM_OFFSET so tuned thresholds
are never scored on the noise they were tuned on. Slot statistics are
drawn slot-major in one block per chunk (nodes first, then the fusion
noise column for the two-layer detector), so a trial's draws do not depend
on chunk sizing or worker layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from multiprocessing import get_context

import numpy as np

from .algos import (
    DualCusumParams,
    GlobalCusumParams,
    SlotFusionParams,
    rule_invert_pfa,
)
from .detect import EnergyModel, GaussianShiftModel, _llr_energy_bulk
from .stats import (
    RandomStream,
    chi2_tail_threshold,
    db_to_linear,
    normal_tail_threshold,
    sample_geometric,
    sample_normal,
)

__all__ = [
    "MEASUREMENT_STREAM_OFFSET",
    "Scenario",
    "TrialResult",
    "Metrics",
    "CalibrationResult",
    "CalibrationError",
    "gen_slot_statistic",
    "simulate_trial",
    "run_trials",
    "estimate_metrics",
    "eq2_run_to_slot",
    "eq2_slot_to_run",
    "calibrate_slot_fusion",
    "calibrate_dual_cusum",
    "calibrate_global_cusum",
]

SCENARIO_KINDS = ("gaussian-shift", "energy")

# Measurement substreams sit far above any calibration index.
MEASUREMENT_STREAM_OFFSET = 2**32

# Engine chunking: grows geometrically so short trials stay cheap and long
# ones amortize; also bounds the in-chunk cumulative sums, which keeps the
# vectorized CUSUM identity well conditioned.
_CHUNK_INIT = 64
_CHUNK_MAX = 1024

_Z95 = 1.96


# ---------------------------------------------------------------------------
# scenario


@dataclass(frozen=True)
class Scenario:
    """Full generative model of one network.

    ``node_params`` holds the per-node post-change means for the
    gaussian-shift kind and the per-node channel gains in dB for the energy
    kind. The energy kind requires unit per-sample noise so slot energies
    are exactly central / noncentral chi-square, and it models the
    noncentrality as samples_per_slot times the linear channel power.
    """

    kind: str
    node_params: tuple[float, ...]
    change_prob: float
    node_noise_variance: float = 1.0
    fusion_noise_variance: float = 1.0
    samples_per_slot: int = 1
    horizon_after_change: int = 100_000

    def __post_init__(self) -> None:
        object.__setattr__(self, "node_params", tuple(float(v) for v in self.node_params))
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"kind must be one of {SCENARIO_KINDS}, got {self.kind!r}")
        if not self.node_params:
            raise ValueError("node_params must be nonempty")
        if not 0.0 < self.change_prob < 1.0:
            raise ValueError(f"change_prob must lie in (0, 1), got {self.change_prob}")
        if self.node_noise_variance <= 0 or self.fusion_noise_variance <= 0:
            raise ValueError("noise variances must be positive")
        if not isinstance(self.samples_per_slot, int) or self.samples_per_slot < 1:
            raise ValueError(
                f"samples_per_slot must be a positive integer, got {self.samples_per_slot}"
            )
        if self.kind == "gaussian-shift" and self.samples_per_slot != 1:
            raise ValueError("gaussian-shift scenarios use one sample per slot")
        if self.kind == "energy" and self.node_noise_variance != 1.0:
            raise ValueError(
                "energy scenarios require unit per-sample noise; fold other scales "
                "into the channel gains"
            )
        if not isinstance(self.horizon_after_change, int) or self.horizon_after_change < 1:
            raise ValueError("horizon_after_change must be a positive integer")

    @property
    def node_count(self) -> int:
        return len(self.node_params)

    def models(self) -> tuple:
        """Per-node observation models matching this scenario's kind."""
        return _scenario_models(self)

    def node_amplitudes(self) -> np.ndarray:
        """Per-node post-change per-sample signal amplitude (energy kind)."""
        if self.kind != "energy":
            raise ValueError("node amplitudes are defined for the energy kind only")
        return np.sqrt([db_to_linear(g) for g in self.node_params])


@lru_cache(maxsize=None)
def _scenario_models(scenario: Scenario) -> tuple:
    if scenario.kind == "gaussian-shift":
        return tuple(
            GaussianShiftModel(mu, scenario.node_noise_variance) for mu in scenario.node_params
        )
    n = scenario.samples_per_slot
    return tuple(EnergyModel(n, n * db_to_linear(g)) for g in scenario.node_params)


# ---------------------------------------------------------------------------
# trial results and metrics


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one simulated run.

    ``alarm_time`` is None when the trial was censored at change_time +
    horizon without an alarm. ``transmissions`` counts, per node, the slots
    on which the node transmitted up to the stop slot: gated slots for the
    two-layer detector, every slot for detectors that report each slot.
    """

    change_time: int
    alarm_time: int | None
    transmissions: tuple[int, ...]
    censored: bool = False

    def __post_init__(self) -> None:
        if self.change_time < 1:
            raise ValueError(f"change_time must be >= 1, got {self.change_time}")
        if (self.alarm_time is None) != self.censored:
            raise ValueError("alarm_time must be absent exactly when censored")
        if self.alarm_time is not None and self.alarm_time < 1:
            raise ValueError(f"alarm_time must be >= 1, got {self.alarm_time}")

    @property
    def false_alarm(self) -> bool:
        return self.alarm_time is not None and self.alarm_time < self.change_time

    @property
    def delay(self) -> int | None:
        """(tau - T)+ for stopped trials, None for censored ones."""
        if self.alarm_time is None:
            return None
        return max(0, self.alarm_time - self.change_time)


@dataclass(frozen=True)
class Metrics:
    """Aggregated estimates over a batch of trials.

    EDD is reported both unconditionally (mean of (tau-T)+ over stopped
    trials, false alarms contributing zero) and conditionally on detection
    (tau >= T). Both exclude censored trials, which are surfaced through
    censor_rate instead. etr_hat averages per-node transmission counts over
    nodes then stopped trials. pd_hat is the per-slot post-change detection
    probability of memoryless slot rules, estimated as detections per
    post-change slot exposed; it is NaN for the CUSUM detectors, whose slot
    decisions are not memoryless.
    """

    pfa_hat: float
    pfa_ci: float
    edd_unconditional: float
    edd_conditional: float
    edd_ci: float
    etr_hat: float
    pd_hat: float
    n_trials: int
    censor_rate: float


def estimate_metrics(results, slot_rule: bool = False) -> Metrics:
    """Reduce trial results to point estimates with 95% half-widths."""
    if not results:
        raise ValueError("cannot estimate metrics from zero trials")
    n = len(results)
    n_fa = sum(1 for r in results if r.false_alarm)
    pfa = n_fa / n
    pfa_ci = _Z95 * math.sqrt(pfa * (1.0 - pfa) / n)

    stopped = [r for r in results if not r.censored]
    censor_rate = 1.0 - len(stopped) / n
    if stopped:
        delays = np.array([r.delay for r in stopped], dtype=float)
        edd_u = float(delays.mean())
        edd_ci = (
            _Z95 * float(delays.std(ddof=1)) / math.sqrt(len(delays))
            if len(delays) > 1
            else math.nan
        )
        etr = float(np.mean([np.mean(r.transmissions) for r in stopped]))
    else:
        edd_u = edd_ci = etr = math.nan

    detected = [r for r in stopped if r.alarm_time >= r.change_time]
    edd_c = float(np.mean([r.delay for r in detected])) if detected else math.nan

    if slot_rule and detected:
        # each detected trial exposes delay+1 post-change slots, the last of
        # which fired; censored exposures are dropped along with the trials
        pd = len(detected) / sum(r.delay + 1 for r in detected)
    else:
        pd = math.nan

    return Metrics(
        pfa_hat=pfa,
        pfa_ci=pfa_ci,
        edd_unconditional=edd_u,
        edd_conditional=edd_c,
        edd_ci=edd_ci,
        etr_hat=etr,
        pd_hat=pd,
        n_trials=n,
        censor_rate=censor_rate,
    )


# ---------------------------------------------------------------------------
# run / slot false-alarm conversions


def eq2_run_to_slot(run_pfa: float, rho: float) -> float:
    """Per-slot false-alarm rate equivalent to a run-level target.

    For a memoryless per-slot rule under a geometric change time, a run
    false-alarm probability P corresponds to the per-slot rate
    P*rho / ((1-P)(1-rho)); the relation is exact for i.i.d. slot decisions.
    """
    if not 0.0 < run_pfa < 1.0:
        raise ValueError(f"run-level probability must lie in (0, 1), got {run_pfa}")
    _check_rho(rho)
    return run_pfa * rho / ((1.0 - run_pfa) * (1.0 - rho))


def eq2_slot_to_run(slot_pfa: float, rho: float) -> float:
    """Run-level false-alarm probability of a memoryless per-slot rate."""
    if not 0.0 < slot_pfa <= 1.0:
        raise ValueError(f"per-slot probability must lie in (0, 1], got {slot_pfa}")
    _check_rho(rho)
    scaled = slot_pfa * (1.0 - rho)
    return scaled / (rho + scaled)


def _check_rho(rho: float) -> None:
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")


# ---------------------------------------------------------------------------
# slot statistic generation


def gen_slot_statistic(stream: RandomStream, scenario: Scenario, node: int, post_change: bool):
    """One slot statistic for one node: the scalar reference generator.

    Gaussian-shift kind: a single N(mean, v) draw. Energy kind: the sum of
    samples_per_slot squared unit-variance draws around the post-change
    amplitude, which is exactly central / noncentral chi-square.
    """
    if not 0 <= node < scenario.node_count:
        raise ValueError(f"node {node} out of range for {scenario.node_count} nodes")
    if scenario.kind == "gaussian-shift":
        mean = scenario.node_params[node] if post_change else 0.0
        return sample_normal(stream, mean, scenario.node_noise_variance)
    amp = math.sqrt(db_to_linear(scenario.node_params[node])) if post_change else 0.0
    return sum(
        sample_normal(stream, amp, 1.0) ** 2 for _ in range(scenario.samples_per_slot)
    )


# ---------------------------------------------------------------------------
# vectorized per-trial engine

Detector = DualCusumParams | GlobalCusumParams | SlotFusionParams


def _alarm_threshold(detector: Detector) -> float:
    if isinstance(detector, SlotFusionParams):
        return detector.node_threshold
    return detector.fusion_threshold


def _with_threshold(detector: Detector, th: float) -> Detector:
    if isinstance(detector, SlotFusionParams):
        return replace(detector, node_threshold=th)
    return replace(detector, fusion_threshold=th)


def _cusum_path(increments: np.ndarray, carry) -> np.ndarray:
    """Whole-chunk CUSUM scores from a carry value.

    Uses the running-minimum identity W_k = S_k + max(carry, max_j<=k(-S_j))
    with S the in-chunk cumulative sum, which reproduces the max(0, .)
    recursion without a python loop.
    """
    s = np.cumsum(increments, axis=0)
    return s + np.maximum(carry, np.maximum.accumulate(-s, axis=0))


def _score_chunks(gen, scenario: Scenario, detector: Detector, t_change: int, max_slot: int):
    """Yield (scores, transmit_mask, base_slot) chunk by chunk.

    ``scores[i]`` is the detector's decision statistic at slot base_slot+i+1;
    an alarm fires at the first slot whose score exceeds the detector's
    threshold. ``transmit_mask`` is the per-slot, per-node gating mask for
    the two-layer detector and None otherwise.
    """
    L = scenario.node_count
    is_energy = scenario.kind == "energy"
    is_dual = isinstance(detector, DualCusumParams)
    is_slot = isinstance(detector, SlotFusionParams)
    n_node_cols = L * scenario.samples_per_slot if is_energy else L
    n_cols = n_node_cols + 1 if is_dual else n_node_cols

    if is_energy:
        amps = scenario.node_amplitudes()
        lams = scenario.samples_per_slot * np.array([db_to_linear(g) for g in scenario.node_params])
    else:
        means = np.asarray(scenario.node_params)
        noise_sd = math.sqrt(scenario.node_noise_variance)
    if is_slot:
        quorum = detector.effective_quorum(L)
    if is_dual or not is_slot:
        node_carry = np.zeros(L)
        fusion_carry = 0.0
    if is_dual:
        drift = detector.amplitude * detector.drift_multiplier
        fusion_sd = math.sqrt(scenario.fusion_noise_variance)

    k0 = 0
    chunk = _CHUNK_INIT
    while k0 < max_slot:
        m = min(chunk, max_slot - k0)
        raw = gen.standard_normal((m, n_cols))
        post = (np.arange(k0 + 1, k0 + m + 1) >= t_change)[:, None]

        if is_energy:
            samples = raw[:, :n_node_cols].reshape(m, L, scenario.samples_per_slot)
            samples = samples + post[:, :, None] * amps[None, :, None]
            stats = np.einsum("ijk,ijk->ij", samples, samples)
        else:
            stats = noise_sd * raw[:, :L] + post * means[None, :]

        if is_slot:
            scores = np.sort(stats, axis=1)[:, L - quorum]
            yield scores, None, k0
        else:
            if is_energy:
                xi = np.empty((m, L))
                for node in range(L):
                    xi[:, node] = _llr_energy_bulk(
                        stats[:, node], scenario.samples_per_slot, lams[node]
                    )
            else:
                xi = (stats * means[None, :] - 0.5 * means[None, :] ** 2) / (
                    scenario.node_noise_variance
                )
            if is_dual:
                w = _cusum_path(xi, node_carry)
                mask = w > detector.local_threshold
                fused = detector.amplitude * mask.sum(axis=1) + fusion_sd * raw[:, -1]
                inc = (drift * fused - 0.5 * drift * drift) / scenario.fusion_noise_variance
                f = _cusum_path(inc, fusion_carry)
                node_carry = w[-1]
                fusion_carry = f[-1]
                yield f, mask, k0
            else:
                f = _cusum_path(xi.sum(axis=1), fusion_carry)
                fusion_carry = f[-1]
                yield f, None, k0

        k0 += m
        chunk = min(chunk * 2, _CHUNK_MAX)


def _run_detector(gen, scenario: Scenario, detector: Detector, t_change: int):
    """Run one trial to the first alarm or the censoring horizon.

    Returns (alarm_slot or None, per-node transmission counts).
    """
    L = scenario.node_count
    max_slot = t_change + scenario.horizon_after_change
    threshold = _alarm_threshold(detector)
    is_dual = isinstance(detector, DualCusumParams)
    tx = np.zeros(L, dtype=np.int64)

    for scores, mask, base in _score_chunks(gen, scenario, detector, t_change, max_slot):
        hits = scores > threshold
        if hits.any():
            i = int(np.argmax(hits))
            if is_dual:
                tx += mask[: i + 1].sum(axis=0)
            else:
                tx[:] = base + i + 1
            return base + i + 1, tx
        if is_dual:
            tx += mask.sum(axis=0)
    if not is_dual:
        tx[:] = max_slot
    return None, tx


def simulate_trial(
    stream: RandomStream,
    scenario: Scenario,
    detector: Detector,
    change_time_override: int | None = None,
) -> TrialResult:
    """Simulate one full run of a detector on a fresh change-time draw.

    The change time is the stream's first draw (one uniform), so a trial is
    fully determined by (master_seed, stream_index, scenario, detector).
    Post-change statistics take effect at slot T itself, so a detection in
    that very slot has delay zero.
    """
    _check_detector(scenario, detector)
    if change_time_override is None:
        t_change = sample_geometric(stream, scenario.change_prob)
    else:
        if change_time_override < 1:
            raise ValueError(f"change time must be >= 1, got {change_time_override}")
        t_change = int(change_time_override)
    alarm, tx = _run_detector(stream.generator, scenario, detector, t_change)
    return TrialResult(
        change_time=t_change,
        alarm_time=alarm,
        transmissions=tuple(int(c) for c in tx),
        censored=alarm is None,
    )


def _check_detector(scenario: Scenario, detector: Detector) -> None:
    if not isinstance(detector, (DualCusumParams, GlobalCusumParams, SlotFusionParams)):
        raise TypeError(f"unsupported detector type {type(detector).__name__}")
    if isinstance(detector, SlotFusionParams):
        detector.effective_quorum(scenario.node_count)  # range check against L


# ---------------------------------------------------------------------------
# parallel trial running


def _simulate_range(args):
    scenario, detector, master_seed, offset, lo, hi = args
    return [
        simulate_trial(RandomStream(master_seed, offset + i), scenario, detector)
        for i in range(lo, hi)
    ]


def _profile_range(args):
    scenario, detector, master_seed, offset, lo, hi, cap, want_post = args
    return [
        _profile_trial(RandomStream(master_seed, offset + i), scenario, detector, cap, want_post)
        for i in range(lo, hi)
    ]


def _split_ranges(n: int, workers: int):
    # a few tasks per worker rides out uneven trial lengths
    n_tasks = max(1, min(n, 4 * workers))
    bounds = np.linspace(0, n, n_tasks + 1).astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if lo < hi]


def _parallel_map(fn, arg_lists, workers: int):
    if workers <= 1:
        out = []
        for args in arg_lists:
            out.extend(fn(args))
        return out
    with get_context("fork").Pool(processes=workers) as pool:
        chunks = pool.map(fn, arg_lists)
    return [item for chunk in chunks for item in chunk]


def run_trials(
    scenario: Scenario,
    detector: Detector,
    n_trials: int,
    master_seed: int,
    workers: int = 1,
    stream_offset: int = MEASUREMENT_STREAM_OFFSET,
):
    """Simulate ``n_trials`` independent trials on substreams offset+0..n-1.

    Results come back in trial-index order whatever the worker count, so
    every downstream reduction is reproducible byte for byte.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    args = [
        (scenario, detector, master_seed, stream_offset, lo, hi)
        for lo, hi in _split_ranges(n_trials, workers)
    ]
    return _parallel_map(_simulate_range, args, workers)


# ---------------------------------------------------------------------------
# calibration: per-trial threshold profiles on common random numbers


@dataclass(frozen=True)
class _ProfileBatch:
    """Everything threshold evaluation needs from a batch of trials.

    Per trial: ``pre_max`` is the supremum of the score before the change,
    so a threshold false-alarms on trial i iff pre_max[i] exceeds it. The
    strictly increasing running-max records of the post-change score live
    in the flat ``rec_values``/``rec_delays`` arrays (trial i owns the
    slice offsets[i]:offsets[i+1]): the detection delay at threshold th is
    the delay of the first record above th. Records stop either at the
    censoring horizon (complete) or once the running max clears ``cap``,
    by which point every threshold at or below cap is resolved.
    """

    pre_max: np.ndarray
    offsets: np.ndarray
    rec_delays: np.ndarray
    rec_values: np.ndarray
    complete: np.ndarray
    cap: float

    @property
    def n_trials(self) -> int:
        return self.pre_max.size


def _profile_trial(
    stream: RandomStream,
    scenario: Scenario,
    detector: Detector,
    cap: float,
    want_post: bool = True,
):
    """One trial's (pre_max, record delays, record values, complete) tuple."""
    gen = stream.generator
    t_change = sample_geometric(stream, scenario.change_prob)
    max_slot = t_change + scenario.horizon_after_change if want_post else t_change - 1

    pre_max = -math.inf
    run_max = -math.inf
    rec_d: list[np.ndarray] = []
    rec_v: list[np.ndarray] = []
    complete = True

    for scores, _mask, base in _score_chunks(gen, scenario, detector, t_change, max_slot):
        m = scores.shape[0]
        n_pre = min(m, max(0, t_change - 1 - base))
        if n_pre:
            pre_max = max(pre_max, float(scores[:n_pre].max()))
        post = scores[n_pre:]
        if post.size:
            rm = np.maximum.accumulate(post)
            np.maximum(rm, run_max, out=rm)
            is_new = np.empty(post.size, dtype=bool)
            is_new[0] = rm[0] > run_max
            is_new[1:] = rm[1:] > rm[:-1]
            idx = np.flatnonzero(is_new)
            if idx.size:
                rec_d.append(base + n_pre + 1 + idx - t_change)
                rec_v.append(rm[idx])
            run_max = float(rm[-1])
            if run_max > cap:
                complete = False
                break

    return (
        pre_max,
        np.concatenate(rec_d) if rec_d else np.empty(0, dtype=np.int64),
        np.concatenate(rec_v) if rec_v else np.empty(0),
        complete,
    )


# Profile batches are pure functions of their key and a few MB each, so a
# process-level cache lets the local-threshold grid share one batch across
# every target alpha and every table that reuses the scenario.
_PROFILE_CACHE: dict = {}


def _collect_profiles(
    scenario: Scenario,
    detector: Detector,
    n_cal: int,
    master_seed: int,
    cap: float,
    workers: int,
    want_post: bool = True,
) -> _ProfileBatch:
    key = (scenario, _with_threshold(detector, 0.0), n_cal, master_seed, cap, want_post)
    batch = _PROFILE_CACHE.get(key)
    if batch is None:
        args = [
            (scenario, detector, master_seed, 0, lo, hi, cap, want_post)
            for lo, hi in _split_ranges(n_cal, workers)
        ]
        rows = _parallel_map(_profile_range, args, workers)
        counts = [r[1].size for r in rows]
        offsets = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        batch = _ProfileBatch(
            pre_max=np.array([r[0] for r in rows]),
            offsets=offsets,
            rec_delays=(
                np.concatenate([r[1] for r in rows]).astype(np.int64)
                if offsets[-1]
                else np.empty(0, dtype=np.int64)
            ),
            rec_values=np.concatenate([r[2] for r in rows]) if offsets[-1] else np.empty(0),
            complete=np.array([r[3] for r in rows], dtype=bool),
            cap=cap,
        )
        _PROFILE_CACHE[key] = batch
    return batch


def _profile_pfa(pre_max: np.ndarray, th: float) -> float:
    return float(np.count_nonzero(pre_max > th)) / pre_max.size


def _profile_delays(batch: _ProfileBatch, th: float):
    """Unconditional delays (false alarms as zero) at one threshold.

    Returns (delays, censored count), or (None, count) when some trial's
    records were capped below th and a deeper profiling pass is needed.
    """
    delays = []
    censored = 0
    for i in range(batch.n_trials):
        if batch.pre_max[i] > th:
            delays.append(0)
            continue
        lo, hi = batch.offsets[i], batch.offsets[i + 1]
        j = lo + int(np.searchsorted(batch.rec_values[lo:hi], th, side="right"))
        if j < hi:
            delays.append(int(batch.rec_delays[j]))
        elif batch.complete[i]:
            censored += 1
        else:
            return None, censored  # needs a larger cap
    return delays, censored


class CalibrationError(RuntimeError):
    """No threshold meets the false-alarm target; surfaced as exit code 4."""


@dataclass(frozen=True)
class CalibrationResult:
    """A tuned detector with the evidence that it hits the target.

    ``achieved_pfa`` is the calibration-stream estimate at the returned
    thresholds, with half-width ``achieved_ci`` = 1.96 sqrt(a(1-a)/n) at
    the target a. ``details`` carries per-candidate diagnostics (the
    local-threshold grid for the two-layer detector).
    """

    detector: Detector
    achieved_pfa: float
    achieved_ci: float
    n_trials: int
    target_alpha: float
    details: tuple = ()

    def __post_init__(self) -> None:
        if abs(self.achieved_pfa - self.target_alpha) > self.achieved_ci:
            raise ValueError(
                f"calibration out of tolerance: achieved {self.achieved_pfa:.6g} "
                f"vs target {self.target_alpha:.6g} +- {self.achieved_ci:.6g}"
            )


def _half_width(alpha: float, n: int) -> float:
    return _Z95 * math.sqrt(alpha * (1.0 - alpha) / n)


def _search_threshold(pre_max: np.ndarray, alpha: float, hw: float, lo: float, hi: float):
    """Smallest-bisected threshold whose false-alarm estimate is within hw.

    The estimate is a step function of the threshold on common random
    numbers, pathwise nonincreasing; each step asserts that, and the 1/n
    step size is far below the 2*hw window, so bisection always lands.
    Returns None when even the lowest candidate cannot alarm often enough.
    """
    p_lo = _profile_pfa(pre_max, lo)
    if p_lo < alpha - hw:
        return None
    if abs(p_lo - alpha) <= hw:
        return lo
    span = max(hi - lo, 1.0)
    p_hi = _profile_pfa(pre_max, hi)
    while p_hi > alpha + hw:
        hi += span
        span *= 2.0
        p_hi = _profile_pfa(pre_max, hi)
        if hi > 1e12:
            raise CalibrationError(f"threshold bracket diverged above {hi:.3g}")
    if abs(p_hi - alpha) <= hw:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        p_mid = _profile_pfa(pre_max, mid)
        assert p_hi <= p_mid <= p_lo, "false-alarm estimate must be monotone in the threshold"
        if abs(p_mid - alpha) <= hw:
            return mid
        if p_mid > alpha:
            lo, p_lo = mid, p_mid
        else:
            hi, p_hi = mid, p_mid
    raise CalibrationError(f"bisection failed to reach the +-{hw:.3g} window around {alpha}")


def _validate_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"target false-alarm probability must lie in (0, 1), got {alpha}")


def calibrate_slot_fusion(
    scenario: Scenario,
    rule_params: SlotFusionParams,
    alpha: float,
    n_cal: int = 20_000,
    master_seed: int = 0,
    workers: int = 1,
) -> CalibrationResult:
    """Tune the common node threshold of a slot-fusion rule to a run target.

    Analytic pass first: convert the run-level target to a per-slot fused
    rate, invert the quorum rule to a per-node rate, and invert the node
    statistic's noise tail (Gaussian tail, or chi-square tail for slot
    energies). The empirical pass verifies the achieved run-level rate on
    n_cal trials and falls back to bisection on the same trials if the
    verification lands outside the target window.
    """
    _validate_alpha(alpha)
    L = scenario.node_count
    p_fused = eq2_run_to_slot(alpha, scenario.change_prob)
    p_node = rule_invert_pfa(p_fused, L, rule_params)
    if scenario.kind == "gaussian-shift":
        eta = math.sqrt(scenario.node_noise_variance) * normal_tail_threshold(p_node)
    else:
        eta = chi2_tail_threshold(scenario.samples_per_slot, p_node)

    batch = _collect_profiles(
        scenario, replace(rule_params, node_threshold=eta), n_cal, master_seed,
        cap=math.inf, workers=workers, want_post=False,
    )
    pre_max = batch.pre_max
    hw = _half_width(alpha, n_cal)
    achieved = _profile_pfa(pre_max, eta)
    if abs(achieved - alpha) > hw:
        found = _search_threshold(pre_max, alpha, hw, eta - 8.0, eta + 8.0)
        if found is None:
            raise CalibrationError(
                f"slot rule {rule_params.rule!r} cannot reach false-alarm target {alpha}"
            )
        eta = found
        achieved = _profile_pfa(pre_max, eta)
    return CalibrationResult(
        detector=replace(rule_params, node_threshold=eta),
        achieved_pfa=achieved,
        achieved_ci=hw,
        n_trials=n_cal,
        target_alpha=alpha,
    )


_DEFAULT_GAMMA_GRID = tuple(float(g) for g in range(0, 21, 2))
_PROFILE_CAP = 512.0


def calibrate_dual_cusum(
    scenario: Scenario,
    alpha: float,
    amplitude: float,
    drift_multiplier: float,
    gamma_grid=_DEFAULT_GAMMA_GRID,
    n_cal: int = 20_000,
    master_seed: int = 0,
    workers: int = 1,
) -> CalibrationResult:
    """Tune the two-layer detector: grid the local gate, bisect the alarm level.

    For each local threshold in the grid, the fusion threshold is bisected
    on common random numbers until the run-level false-alarm estimate is
    inside the target window; among the calibrated pairs the one with the
    smallest estimated delay wins. Grid points that cannot reach the target
    at any fusion threshold (too little pre-change transmission) are
    reported infeasible in the details.
    """
    _validate_alpha(alpha)
    gamma_grid = tuple(gamma_grid)
    if not gamma_grid:
        raise ValueError("gamma_grid must be nonempty")
    hw = _half_width(alpha, n_cal)
    details = []
    best = None

    for gamma in gamma_grid:
        proto = DualCusumParams(
            amplitude=amplitude,
            local_threshold=gamma,
            fusion_threshold=0.0,
            drift_multiplier=drift_multiplier,
        )
        found = _calibrate_threshold_profiled(
            scenario, proto, alpha, hw, n_cal, master_seed, workers
        )
        if found is None:
            details.append((gamma, math.nan, math.nan, math.nan))
            continue
        beta, achieved, edd = found
        details.append((gamma, beta, achieved, edd))
        key = (edd, gamma)
        if best is None or key < best[0]:
            best = (key, replace(proto, fusion_threshold=beta), achieved)

    if best is None:
        raise CalibrationError(
            f"no local threshold in {gamma_grid} reaches false-alarm target {alpha}"
        )
    _key, detector, achieved = best
    return CalibrationResult(
        detector=detector,
        achieved_pfa=achieved,
        achieved_ci=hw,
        n_trials=n_cal,
        target_alpha=alpha,
        details=tuple(details),
    )


def calibrate_global_cusum(
    scenario: Scenario,
    alpha: float,
    n_cal: int = 20_000,
    master_seed: int = 0,
    workers: int = 1,
) -> CalibrationResult:
    """Tune the centralized benchmark's single alarm threshold."""
    _validate_alpha(alpha)
    hw = _half_width(alpha, n_cal)
    proto = GlobalCusumParams(fusion_threshold=0.0)
    found = _calibrate_threshold_profiled(scenario, proto, alpha, hw, n_cal, master_seed, workers)
    if found is None:
        raise CalibrationError(f"centralized CUSUM cannot reach false-alarm target {alpha}")
    beta, achieved, _edd = found
    return CalibrationResult(
        detector=GlobalCusumParams(fusion_threshold=beta),
        achieved_pfa=achieved,
        achieved_ci=hw,
        n_trials=n_cal,
        target_alpha=alpha,
    )


def _calibrate_threshold_profiled(
    scenario: Scenario,
    proto: Detector,
    alpha: float,
    hw: float,
    n_cal: int,
    master_seed: int,
    workers: int,
):
    """Profile once, bisect the alarm threshold, estimate delay at the result.

    Returns (threshold, achieved_pfa, edd_estimate) or None when the score
    process cannot reach the target at any nonnegative threshold. The
    profiling cap quadruples until the chosen threshold and its delay
    lookups are fully resolved.
    """
    cap = _PROFILE_CAP
    while True:
        batch = _collect_profiles(scenario, proto, n_cal, master_seed, cap=cap, workers=workers)
        th = _search_threshold(batch.pre_max, alpha, hw, 0.0, 1.0)
        if th is None:
            return None
        if th > cap:
            cap *= 4.0
            continue
        delays, _censored = _profile_delays(batch, th)
        if delays is None:
            cap *= 4.0
            continue
        return th, _profile_pfa(batch.pre_max, th), float(np.mean(delays))
