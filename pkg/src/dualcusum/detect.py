"""CUSUM recursion and the log-likelihood-ratio kernels detectors share.

Three observation models drive everything: a Gaussian mean shift on raw
slot samples, a chi-square slot energy (central before the change,
noncentral after), and the fusion-center channel that sees the superposed
node transmissions in receiver noise. Each model gets one LLR kernel; a
CUSUM is just the max-with-zero recursion over a stream of LLR increments.

CUSUM scores are plain nonnegative floats. A wrapper type would buy no
safety here and would poison the vectorized trial engine, so the invariant
lives in ``cusum_step`` instead: it rejects a negative carry and can only
return nonnegative values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .stats import SERIES_LOG_CUTOFF, central_chi2_logpdf, noncentral_chi2_logpdf

__all__ = [
    "GaussianShiftModel",
    "EnergyModel",
    "FusionChannel",
    "cusum_step",
    "llr_gaussian_shift",
    "llr_energy",
    "llr_fusion",
    "node_llr",
]


@dataclass(frozen=True)
class GaussianShiftModel:
    """Per-slot sample: N(0, v) before the change, N(post_mean, v) after."""

    post_mean: float
    noise_variance: float = 1.0

    def __post_init__(self) -> None:
        if self.noise_variance <= 0:
            raise ValueError(f"noise variance must be positive, got {self.noise_variance}")


@dataclass(frozen=True)
class EnergyModel:
    """Slot energy of ``samples_per_slot`` squared unit-noise samples.

    Central chi-square of order N before the change; noncentral with the
    given noncentrality (N times the linear channel power gain) after.
    Both hypotheses share the same degrees of freedom.
    """

    samples_per_slot: int
    noncentrality: float

    def __post_init__(self) -> None:
        if not isinstance(self.samples_per_slot, int) or self.samples_per_slot < 1:
            raise ValueError(
                f"samples per slot must be a positive integer, got {self.samples_per_slot}"
            )
        if self.noncentrality < 0:
            raise ValueError(f"noncentrality must be nonnegative, got {self.noncentrality}")


@dataclass(frozen=True)
class FusionChannel:
    """Received value at the fusion center: amplitude * (#transmitters) + noise.

    ``drift_multiplier`` is the designed number of simultaneous transmitters:
    the fusion LLR always tests mean amplitude*drift_multiplier against mean
    zero, regardless of how many nodes actually transmit. That deliberate
    mismatch is the design knob of the two-layer detector.
    """

    amplitude: float
    drift_multiplier: float
    noise_variance: float = 1.0

    def __post_init__(self) -> None:
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if self.drift_multiplier <= 0:
            raise ValueError(f"drift multiplier must be positive, got {self.drift_multiplier}")
        if self.noise_variance <= 0:
            raise ValueError(f"noise variance must be positive, got {self.noise_variance}")

    @property
    def design_drift(self) -> float:
        return self.amplitude * self.drift_multiplier


def cusum_step(w: float, xi: float) -> float:
    """One CUSUM update: max(0, w + xi)."""
    if w < 0:
        raise ValueError(f"CUSUM carry must be nonnegative, got {w}")
    return max(0.0, w + xi)


def llr_gaussian_shift(x, model: GaussianShiftModel):
    """LLR of one raw sample under the post- vs pre-change Gaussian.

    Closed form (mu*x - mu^2/2) / v; accepts scalars or arrays in ``x``.
    """
    mu = model.post_mean
    out = (mu * np.asarray(x, dtype=float) - 0.5 * mu * mu) / model.noise_variance
    return float(out) if out.ndim == 0 else out


def llr_energy(e, model: EnergyModel):
    """LLR of one slot energy under the post- vs pre-change chi-square.

    Equals noncentral_chi2_logpdf(e, N, lam) - central_chi2_logpdf(e, N),
    but the shared exponential and power factors cancel, leaving a
    Poisson-weighted power series in e/2:

        log sum_j exp( log_pois_j(lam/2) + lgamma(N/2) - lgamma(N/2 + j)
                       + j * log(e/2) )

    evaluated by log-sum-exp with the same unimodal-series cutoff as the
    noncentral density. Accepts scalars or arrays in ``e``.
    """
    arr = np.asarray(e, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("slot energy must be positive")
    if model.noncentrality == 0.0:
        out = np.zeros_like(arr)
    else:
        out = _llr_energy_bulk(
            arr.ravel(), model.samples_per_slot, model.noncentrality
        ).reshape(arr.shape)
    return float(out) if arr.ndim == 0 else out


def _llr_energy_bulk(e: np.ndarray, dof: int, lam: float) -> np.ndarray:
    """Vectorized energy LLR for a flat positive array ``e``.

    The series length is fixed by applying the cutoff rule at the largest
    input: terms decay slowest there, so every smaller input is truncated
    at least as deep below its own peak. One batched log-sum-exp then
    covers the whole array.
    """
    log_e2 = np.log(e / 2.0)
    le_max = float(log_e2.max())
    half_lam = lam / 2.0
    log_half_lam = math.log(half_lam)

    coeffs = []
    c = -half_lam  # j = 0 coefficient: the log Poisson weight alone
    peak = -math.inf
    j = 0
    while True:
        coeffs.append(c)
        term = c + j * le_max
        peak = max(peak, term)
        if term < peak - SERIES_LOG_CUTOFF:
            break
        j += 1
        c += log_half_lam - math.log(j) - math.log(dof / 2.0 + j - 1.0)
    n_terms = len(coeffs)

    terms = np.asarray(coeffs)[None, :] + log_e2[:, None] * np.arange(n_terms)[None, :]
    m = terms.max(axis=1)
    return m + np.log(np.exp(terms - m[:, None]).sum(axis=1))


def llr_fusion(y, ch: FusionChannel):
    """LLR of the fused received value at the designed post-change drift.

    Gaussian LLR between mean amplitude*drift_multiplier and mean zero:
    (d*y - d^2/2) / noise_variance with d the design drift. Accepts scalars
    or arrays in ``y``.
    """
    d = ch.design_drift
    out = (d * np.asarray(y, dtype=float) - 0.5 * d * d) / ch.noise_variance
    return float(out) if out.ndim == 0 else out


def node_llr(stat, model):
    """Dispatch a slot statistic to the LLR kernel of its observation model."""
    if isinstance(model, GaussianShiftModel):
        return llr_gaussian_shift(stat, model)
    if isinstance(model, EnergyModel):
        return llr_energy(stat, model)
    raise TypeError(f"no LLR kernel for model type {type(model).__name__}")
