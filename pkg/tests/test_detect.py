"""LLR kernels, observation models, and the CUSUM recursion.

Every closed-form kernel is checked against the log-density difference it
claims to equal (dual route, no shared code), plus frozen spot values
computed with mpmath at 50 decimal digits.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualcusum.detect import (
    EnergyModel,
    FusionChannel,
    GaussianShiftModel,
    cusum_step,
    llr_energy,
    llr_fusion,
    llr_gaussian_shift,
    node_llr,
)
from dualcusum.detect import _llr_energy_bulk
from dualcusum.stats import (
    RandomStream,
    central_chi2_logpdf,
    noncentral_chi2_logpdf,
    normal_logpdf,
)

# mpmath: log nc-chi2 pdf minus log chi2 pdf, dof 20, noncentralities from
# the six-node energy network (20 * 10^(gain/10))
LLR_ENERGY_ORACLE = [
    (20.0, 20, 8.531590376031854, -0.5805246390611367),
    (45.0, 20, 8.531590376031854, 3.1082872747016492),
    (12.0, 20, 2.244036908603927, -0.46800405568446557),
    (30.0, 20, 9.141763792297501, 0.9934633032599116),
    (5.0, 20, 5.768063006253211, -2.1849392783481716),
]


# ---------------------------------------------------------------------------
# observation models


def test_gaussian_model_validation():
    GaussianShiftModel(0.5)
    with pytest.raises(ValueError):
        GaussianShiftModel(0.5, noise_variance=0.0)


def test_energy_model_validation():
    EnergyModel(20, 8.5)
    EnergyModel(20, 0.0)
    with pytest.raises(ValueError):
        EnergyModel(0, 8.5)
    with pytest.raises(ValueError):
        EnergyModel(20, -0.1)


def test_fusion_channel_validation_and_design_drift():
    ch = FusionChannel(amplitude=3.1623, drift_multiplier=5.0)
    assert ch.design_drift == pytest.approx(15.8115)
    assert ch.noise_variance == 1.0
    for bad in (
        dict(amplitude=0.0, drift_multiplier=5.0),
        dict(amplitude=1.0, drift_multiplier=0.0),
        dict(amplitude=1.0, drift_multiplier=1.0, noise_variance=-1.0),
    ):
        with pytest.raises(ValueError):
            FusionChannel(**bad)


# ---------------------------------------------------------------------------
# CUSUM recursion


def test_cusum_step_basic():
    assert cusum_step(0.0, 1.5) == 1.5
    assert cusum_step(2.0, -5.0) == 0.0
    assert cusum_step(2.0, -1.5) == 0.5
    assert cusum_step(0.0, -3.0) == 0.0


def test_cusum_step_rejects_negative_carry():
    with pytest.raises(ValueError):
        cusum_step(-0.1, 1.0)


@given(
    st.floats(min_value=0.0, max_value=1e6),
    st.floats(min_value=-1e6, max_value=1e6),
)
def test_cusum_step_is_nonnegative(w, xi):
    assert cusum_step(w, xi) >= 0.0


# ---------------------------------------------------------------------------
# Gaussian shift kernel


def test_llr_gaussian_shift_equals_logpdf_difference():
    model = GaussianShiftModel(post_mean=0.9, noise_variance=1.0)
    rng = RandomStream(314, 0).generator
    x = rng.normal(0.3, 1.4, size=10_000)
    direct = llr_gaussian_shift(x, model)
    via_densities = normal_logpdf(x, 0.9, 1.0) - normal_logpdf(x, 0.0, 1.0)
    np.testing.assert_allclose(direct, via_densities, rtol=0, atol=1e-10)


def test_llr_gaussian_shift_nonunit_variance():
    model = GaussianShiftModel(post_mean=-1.2, noise_variance=2.5)
    x = np.linspace(-4, 4, 1001)
    diff = normal_logpdf(x, -1.2, 2.5) - normal_logpdf(x, 0.0, 2.5)
    np.testing.assert_allclose(llr_gaussian_shift(x, model), diff, atol=1e-12)


def test_llr_gaussian_shift_scalar():
    model = GaussianShiftModel(post_mean=0.5)
    out = llr_gaussian_shift(1.0, model)
    assert isinstance(out, float)
    assert out == pytest.approx(0.5 - 0.125)


def test_llr_gaussian_shift_sign_flips_at_half_mean():
    # the kernel crosses zero exactly at x = mu/2
    model = GaussianShiftModel(post_mean=0.8)
    assert llr_gaussian_shift(0.4, model) == pytest.approx(0.0, abs=1e-15)
    assert llr_gaussian_shift(0.5, model) > 0
    assert llr_gaussian_shift(0.3, model) < 0


# ---------------------------------------------------------------------------
# energy kernel


def test_llr_energy_matches_frozen_oracle():
    for e, dof, lam, expected in LLR_ENERGY_ORACLE:
        model = EnergyModel(dof, lam)
        assert llr_energy(e, model) == pytest.approx(expected, abs=1e-10)


def test_llr_energy_equals_logpdf_difference():
    model = EnergyModel(20, 8.531590376031854)
    rng = RandomStream(271, 0).generator
    e = rng.chisquare(20, size=10_000) + 1e-9
    direct = llr_energy(e, model)
    via = np.array(
        [
            noncentral_chi2_logpdf(float(v), 20, model.noncentrality)
            - central_chi2_logpdf(float(v), 20)
            for v in e
        ]
    )
    np.testing.assert_allclose(direct, via, rtol=0, atol=1e-10)


def test_llr_energy_bulk_matches_scalar_path():
    lam = 5.768063006253211
    model = EnergyModel(20, lam)
    e = np.array([0.5, 3.0, 12.0, 20.0, 45.0, 90.0, 200.0])
    bulk = _llr_energy_bulk(e, 20, lam)
    scalars = np.array([llr_energy(float(v), model) for v in e])
    np.testing.assert_allclose(bulk, scalars, rtol=0, atol=1e-12)


def test_llr_energy_zero_noncentrality_is_identically_zero():
    model = EnergyModel(20, 0.0)
    e = np.array([0.1, 5.0, 40.0])
    np.testing.assert_array_equal(llr_energy(e, model), np.zeros(3))
    assert llr_energy(5.0, model) == 0.0


def test_llr_energy_rejects_nonpositive_energy():
    model = EnergyModel(20, 2.0)
    with pytest.raises(ValueError):
        llr_energy(0.0, model)
    with pytest.raises(ValueError):
        llr_energy(np.array([1.0, -2.0]), model)


def test_llr_energy_scalar_type_and_shape():
    model = EnergyModel(20, 8.531590376031854)
    assert isinstance(llr_energy(20.0, model), float)
    out = llr_energy(np.full((3, 4), 20.0), model)
    assert out.shape == (3, 4)
    assert np.allclose(out, llr_energy(20.0, model))


def test_llr_energy_is_increasing_in_energy():
    # monotone likelihood ratio: stochastically larger post-change law
    model = EnergyModel(20, 8.531590376031854)
    e = np.linspace(0.5, 120.0, 500)
    vals = llr_energy(e, model)
    assert np.all(np.diff(vals) > 0)


def test_llr_energy_drift_signs_by_monte_carlo():
    # E[LLR] < 0 under the pre-change law and > 0 under the post-change law
    lam = 8.531590376031854
    model = EnergyModel(20, lam)
    rng = RandomStream(999, 0).generator
    n = 200_000
    pre = rng.chisquare(20, size=n)
    post = rng.noncentral_chisquare(20, lam, size=n)
    pre_llr = llr_energy(pre, model)
    post_llr = llr_energy(post, model)
    assert pre_llr.mean() + 5 * pre_llr.std() / math.sqrt(n) < 0
    assert post_llr.mean() - 5 * post_llr.std() / math.sqrt(n) > 0


# ---------------------------------------------------------------------------
# fusion kernel


def test_llr_fusion_frozen_value_at_zero():
    # mpmath: d = 3.1623 * 5; (d*0 - d^2/2) / 1
    ch = FusionChannel(amplitude=3.1623, drift_multiplier=5.0)
    assert llr_fusion(0.0, ch) == pytest.approx(-125.001766125, abs=1e-9)


def test_llr_fusion_equals_logpdf_difference():
    ch = FusionChannel(amplitude=2.0, drift_multiplier=3.0, noise_variance=1.7)
    rng = RandomStream(123, 0).generator
    y = rng.normal(0.0, 4.0, size=10_000)
    d = ch.design_drift
    via = normal_logpdf(y, d, 1.7) - normal_logpdf(y, 0.0, 1.7)
    np.testing.assert_allclose(llr_fusion(y, ch), via, rtol=0, atol=1e-10)


def test_llr_fusion_scalar():
    ch = FusionChannel(amplitude=1.0, drift_multiplier=2.0)
    assert isinstance(llr_fusion(0.5, ch), float)
    assert llr_fusion(0.5, ch) == pytest.approx(2.0 * 0.5 - 2.0)


# ---------------------------------------------------------------------------
# dispatch


def test_node_llr_dispatches_by_model_type():
    g = GaussianShiftModel(0.9)
    e = EnergyModel(20, 8.531590376031854)
    assert node_llr(1.1, g) == llr_gaussian_shift(1.1, g)
    assert node_llr(20.0, e) == llr_energy(20.0, e)


def test_node_llr_rejects_unknown_model():
    with pytest.raises(TypeError):
        node_llr(1.0, object())
