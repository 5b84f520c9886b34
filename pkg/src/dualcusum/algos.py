"""The three detectors as per-slot state machines.

DualCUSUM runs one CUSUM per node to gate transmissions and a second CUSUM
at the fusion center on the superposed received signal. GlobalCUSUM is the
centralized benchmark that sums per-node LLRs as if every raw observation
were co-located. Slot fusion thresholds each node's statistic and combines
the one-bit decisions with an OR / AND / MAJORITY quorum.

The step functions here are the reference semantics: scalar, explicit, and
easy to audit. The simulation engine vectorizes the same recursions per
trial and is tested for agreement against these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .detect import FusionChannel, cusum_step, llr_fusion, node_llr

__all__ = [
    "FUSION_RULES",
    "DualCusumParams",
    "DualCusumState",
    "GlobalCusumParams",
    "SlotFusionParams",
    "dual_cusum_step",
    "global_cusum_step",
    "slot_fusion_step",
    "rule_fused_pfa",
    "rule_invert_pfa",
]

FUSION_RULES = ("or", "and", "majority")


@dataclass(frozen=True)
class DualCusumParams:
    """Fixed parameters of the two-layer detector.

    amplitude        transmission amplitude each gated node puts on the air
    local_threshold  node-CUSUM level above which a node transmits
    fusion_threshold fusion-CUSUM level that declares the change
    drift_multiplier designed number of simultaneous transmitters used in
                     the fusion LLR (the deliberate mismatch knob)
    """

    amplitude: float
    local_threshold: float
    fusion_threshold: float
    drift_multiplier: float

    def __post_init__(self) -> None:
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if self.drift_multiplier <= 0:
            raise ValueError(f"drift multiplier must be positive, got {self.drift_multiplier}")
        if self.local_threshold < 0:
            raise ValueError(f"local threshold must be nonnegative, got {self.local_threshold}")
        if self.fusion_threshold < 0:
            raise ValueError(f"fusion threshold must be nonnegative, got {self.fusion_threshold}")

    def channel(self, fusion_noise_variance: float = 1.0) -> FusionChannel:
        return FusionChannel(self.amplitude, self.drift_multiplier, fusion_noise_variance)


@dataclass(frozen=True)
class DualCusumState:
    """Running scores: one CUSUM per node plus the fusion CUSUM."""

    node_scores: tuple[float, ...]
    fusion_score: float = 0.0

    def __post_init__(self) -> None:
        if any(w < 0 for w in self.node_scores) or self.fusion_score < 0:
            raise ValueError("CUSUM scores must be nonnegative")

    @classmethod
    def initial(cls, node_count: int) -> "DualCusumState":
        return cls(node_scores=(0.0,) * node_count, fusion_score=0.0)


@dataclass(frozen=True)
class GlobalCusumParams:
    """Fixed parameters of the centralized benchmark: just the alarm level."""

    fusion_threshold: float

    def __post_init__(self) -> None:
        if self.fusion_threshold < 0:
            raise ValueError(f"fusion threshold must be nonnegative, got {self.fusion_threshold}")


@dataclass(frozen=True)
class SlotFusionParams:
    """Per-slot hard-decision fusion: a common node threshold plus a quorum rule.

    ``quorum`` may only be set for the majority rule; OR and AND are the
    quorum-1 and quorum-L extremes. When left unset, majority defaults to
    the strict majority ceil((L+1)/2) of the node count at use time.
    """

    node_threshold: float
    rule: str
    quorum: int | None = None

    def __post_init__(self) -> None:
        if self.rule not in FUSION_RULES:
            raise ValueError(f"rule must be one of {FUSION_RULES}, got {self.rule!r}")
        if self.quorum is not None:
            if self.rule != "majority":
                raise ValueError(f"quorum only applies to the majority rule, not {self.rule!r}")
            if not isinstance(self.quorum, int) or self.quorum < 1:
                raise ValueError(f"quorum must be a positive integer, got {self.quorum}")

    def effective_quorum(self, node_count: int) -> int:
        """Number of exceedances needed to alarm for a network of this size."""
        if node_count < 1:
            raise ValueError(f"node count must be positive, got {node_count}")
        if self.rule == "or":
            return 1
        if self.rule == "and":
            return node_count
        q = self.quorum if self.quorum is not None else (node_count + 2) // 2
        if not 1 <= q <= node_count:
            raise ValueError(f"quorum {q} out of range for {node_count} nodes")
        return q


def dual_cusum_step(
    state: DualCusumState,
    stats,
    fusion_noise: float,
    models,
    params: DualCusumParams,
    fusion_noise_variance: float = 1.0,
):
    """Advance DualCUSUM one slot.

    Per node: update its CUSUM with the slot statistic's LLR and transmit
    the amplitude while the score sits above the local threshold. The
    fusion center receives amplitude * (#transmitters) + noise, updates its
    own CUSUM with the design-drift LLR of that value, and alarms when it
    crosses the fusion threshold.

    Returns (new_state, alarm, transmit_mask).
    """
    if len(stats) != len(state.node_scores) or len(models) != len(state.node_scores):
        raise ValueError(
            f"dimension mismatch: {len(state.node_scores)} scores, "
            f"{len(stats)} stats, {len(models)} models"
        )
    new_scores = tuple(
        cusum_step(w, node_llr(s, m))
        for w, s, m in zip(state.node_scores, stats, models)
    )
    transmit_mask = tuple(w > params.local_threshold for w in new_scores)
    fused = params.amplitude * sum(transmit_mask) + fusion_noise
    channel = params.channel(fusion_noise_variance)
    new_fusion = cusum_step(state.fusion_score, llr_fusion(fused, channel))
    alarm = new_fusion > params.fusion_threshold
    return DualCusumState(new_scores, new_fusion), alarm, transmit_mask


def global_cusum_step(score: float, stats, models, params: GlobalCusumParams):
    """Advance the centralized CUSUM one slot.

    The increment is the sum of per-node LLRs, which is the LLR of the
    joint density because node observations are independent.

    Returns (new_score, alarm).
    """
    if len(stats) != len(models):
        raise ValueError(f"dimension mismatch: {len(stats)} stats, {len(models)} models")
    increment = sum(node_llr(s, m) for s, m in zip(stats, models))
    new_score = cusum_step(score, increment)
    return new_score, new_score > params.fusion_threshold


def slot_fusion_step(stats, params: SlotFusionParams) -> bool:
    """One slot of hard-decision fusion: quorum vote over node exceedances."""
    exceedances = sum(1 for s in stats if s > params.node_threshold)
    return exceedances >= params.effective_quorum(len(stats))


def rule_fused_pfa(p: float, node_count: int, params: SlotFusionParams) -> float:
    """Fused per-slot false-alarm probability given a per-node probability.

    Node decisions are i.i.d. under noise, so the fused probability is the
    binomial upper tail P(Bin(L, p) >= quorum). OR and AND reduce to
    1 - (1-p)^L and p^L.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    quorum = params.effective_quorum(node_count)
    if quorum == 1:
        # -expm1 keeps precision when p is tiny
        return -math.expm1(node_count * math.log1p(-p)) if p < 1.0 else 1.0
    if quorum == node_count:
        return p**node_count
    return sum(
        math.comb(node_count, k) * p**k * (1.0 - p) ** (node_count - k)
        for k in range(quorum, node_count + 1)
    )


def rule_invert_pfa(p_fused: float, node_count: int, params: SlotFusionParams) -> float:
    """The per-node probability whose fused false-alarm rate is ``p_fused``.

    rule_fused_pfa is strictly increasing in p on (0, 1), so plain bisection
    converges; it is run to absolute interval width below 1e-12 (and in
    practice to the last representable float).
    """
    if not 0.0 < p_fused < 1.0:
        raise ValueError(f"target probability must lie in (0, 1), got {p_fused}")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rule_fused_pfa(mid, node_count, params) < p_fused:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
