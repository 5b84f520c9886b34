"""Special functions, tail inverses, and seeded sampling.

Frozen numeric expectations were computed with mpmath (50 decimal digits)
and cross-checked against scipy; neither package is imported by the
package itself.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualcusum.stats import (
    RandomStream,
    central_chi2_logpdf,
    chi2_tail_threshold,
    db_to_linear,
    noncentral_chi2_logpdf,
    normal_logpdf,
    normal_tail,
    normal_tail_threshold,
    reg_gamma_q,
    sample_geometric,
    sample_normal,
)

# mpmath: 0.5*erfc(z/sqrt(2)) at 50 digits
NORMAL_TAIL_ORACLE = [
    (-1.5, 0.9331927987311419),
    (0.0, 0.5),
    (1.2815515655446004, 0.10000000000000002),
    (3.090232306167813, 0.001000000000000001),
    (3.5575804041262016, 0.00018714327728246012),
    (5.0, 2.866515718791939e-07),
]

# mpmath: sqrt(2)*erfinv(1-2p)
NORMAL_THRESHOLD_ORACLE = [
    (0.5, 0.0),
    (0.1, 1.2815515655446004),
    (0.025, 1.9599639845400543),
    (0.001, 3.0902323061678136),
    (1e-06, 4.753424308822899),
]

# mpmath: gammainc(a, x, inf, regularized=True)
REG_GAMMA_Q_ORACLE = [
    (0.5, 0.1, 0.654720846018577),
    (0.5, 3.0, 0.01430587843542964),
    (2.5, 1.0, 0.8491450360846097),
    (2.5, 9.0, 0.0029464045878802906),
    (10.0, 5.0, 0.9681719426937951),
    (10.0, 10.0, 0.4579297144718522),
    (10.0, 23.0, 0.0008060202794618003),
    (10.0, 40.0, 3.925932226286188e-09),
]

# mpmath: (k/2-1)log(x) - x/2 - loggamma(k/2) - (k/2)log(2)
CENTRAL_CHI2_ORACLE = [
    (12.0, 20, -3.36913943758892),
    (20.0, 20, -2.7717088236950036),
    (45.0, 20, -7.973336877748045),
    (3.2, 2, -2.2931471805599455),
    (0.5, 1, -0.8223649429247001),
    (150.0, 20, -49.63758163881462),
]

# mpmath: log of the 400-term Poisson mixture at 50 digits; noncentralities
# are 20 * 10^(gain/10) for the shipped six-node energy network's gains
NONCENTRAL_CHI2_ORACLE = [
    (5.0, 20, 8.531590376031854, -10.994090353062047),
    (20.0, 20, 8.531590376031854, -3.3522334627561405),
    (45.0, 20, 8.531590376031854, -4.865049603046396),
    (12.0, 20, 2.244036908603927, -3.8371434932733854),
    (30.0, 20, 2.244036908603927, -3.6708510795110176),
    (8.0, 20, 6.039903440804032, -6.889038574132069),
    (60.0, 20, 9.141763792297501, -7.6122270810116),
    (110.0, 20, 9.141763792297501, -21.290672155160348),
    (25.0, 20, 5.768063006253211, -2.9755917928091202),
    (40.0, 20, 8.33738766940671, -4.140771708053725),
    (2.0, 20, 8.531590376031854, -18.34209258419896),
    (95.0, 20, 2.244036908603927, -22.8898651705693),
]

# scipy: chi2.isf(p, k)
CHI2_THRESHOLD_ORACLE = [
    (20, 0.5, 19.337429229428256),
    (2, 0.01, 9.210340371976182),
    (20, 0.0009770422917863963, 45.38881759421642),
]


# ---------------------------------------------------------------------------
# tails and inverses


def test_normal_tail_matches_oracle():
    for z, expected in NORMAL_TAIL_ORACLE:
        assert normal_tail(z) == pytest.approx(expected, rel=1e-13)


def test_normal_tail_threshold_matches_oracle():
    for p, expected in NORMAL_THRESHOLD_ORACLE:
        assert normal_tail_threshold(p) == pytest.approx(expected, abs=1e-12)


def test_normal_tail_threshold_rejects_bad_probability():
    for p in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            normal_tail_threshold(p)


@given(st.floats(min_value=1e-10, max_value=1.0 - 1e-10))
@settings(max_examples=200)
def test_normal_tail_threshold_roundtrip(p):
    assert normal_tail(normal_tail_threshold(p)) == pytest.approx(p, rel=1e-9)


def test_reg_gamma_q_matches_oracle():
    for a, x, expected in REG_GAMMA_Q_ORACLE:
        assert reg_gamma_q(a, x) == pytest.approx(expected, rel=1e-12)


def test_reg_gamma_q_bounds_and_edges():
    assert reg_gamma_q(3.0, 0.0) == 1.0
    assert 0.0 < reg_gamma_q(10.0, 60.0) < 1e-12
    with pytest.raises(ValueError):
        reg_gamma_q(0.0, 1.0)
    with pytest.raises(ValueError):
        reg_gamma_q(1.0, -0.5)


@given(
    st.floats(min_value=0.3, max_value=60.0),
    st.floats(min_value=0.01, max_value=150.0),
    st.floats(min_value=0.01, max_value=150.0),
)
@settings(max_examples=200)
def test_reg_gamma_q_monotone_in_x(a, x1, x2):
    lo, hi = sorted((x1, x2))
    assert reg_gamma_q(a, lo) >= reg_gamma_q(a, hi)


def test_central_chi2_logpdf_matches_oracle():
    for x, k, expected in CENTRAL_CHI2_ORACLE:
        assert central_chi2_logpdf(x, k) == pytest.approx(expected, rel=1e-13, abs=1e-13)


def test_central_chi2_density_integrates_to_tail_difference():
    # dual route: integrating exp(logpdf) over [a, b] must reproduce the
    # regularized-gamma tail difference Q(k/2, a/2) - Q(k/2, b/2)
    k = 20
    grid = np.linspace(5.0, 50.0, 20001)
    pdf = np.exp([central_chi2_logpdf(float(x), k) for x in grid])
    integral = float(np.trapezoid(pdf, grid))
    expected = reg_gamma_q(k / 2.0, 2.5) - reg_gamma_q(k / 2.0, 25.0)
    assert integral == pytest.approx(expected, abs=1e-8)


def test_central_chi2_rejects_bad_arguments():
    with pytest.raises(ValueError):
        central_chi2_logpdf(0.0, 20)
    with pytest.raises(ValueError):
        central_chi2_logpdf(1.0, 0)
    with pytest.raises(ValueError):
        central_chi2_logpdf(1.0, 2.5)


def test_noncentral_chi2_logpdf_matches_oracle():
    for x, k, lam, expected in NONCENTRAL_CHI2_ORACLE:
        assert noncentral_chi2_logpdf(x, k, lam) == pytest.approx(expected, abs=1e-10)


def test_noncentral_chi2_reduces_to_central():
    for x in (1.0, 12.0, 45.0):
        assert noncentral_chi2_logpdf(x, 20, 0.0) == central_chi2_logpdf(x, 20)
        assert noncentral_chi2_logpdf(x, 20, 1e-14) == pytest.approx(
            central_chi2_logpdf(x, 20), abs=1e-9
        )


def test_noncentral_chi2_rejects_bad_arguments():
    with pytest.raises(ValueError):
        noncentral_chi2_logpdf(-1.0, 20, 2.0)
    with pytest.raises(ValueError):
        noncentral_chi2_logpdf(1.0, 20, -0.1)


def test_chi2_tail_threshold_matches_oracle():
    for k, p, expected in CHI2_THRESHOLD_ORACLE:
        assert chi2_tail_threshold(k, p) == pytest.approx(expected, abs=1e-8)


@given(
    st.integers(min_value=1, max_value=50),
    st.floats(min_value=1e-8, max_value=1.0 - 1e-3),
)
@settings(max_examples=150)
def test_chi2_tail_threshold_roundtrip(k, p):
    th = chi2_tail_threshold(k, p)
    assert reg_gamma_q(k / 2.0, th / 2.0) == pytest.approx(p, rel=1e-9)


def test_db_to_linear():
    assert db_to_linear(0.0) == 1.0
    assert db_to_linear(10.0) == pytest.approx(10.0, rel=1e-15)
    assert db_to_linear(-10.0) == pytest.approx(0.1, rel=1e-15)
    with pytest.raises(ValueError):
        db_to_linear(math.inf)


def test_normal_logpdf_scalar_and_array():
    x = np.array([-1.0, 0.0, 2.5])
    got = normal_logpdf(x, 0.5, 2.0)
    expected = -0.5 * math.log(2 * math.pi * 2.0) - (x - 0.5) ** 2 / 4.0
    np.testing.assert_allclose(got, expected, rtol=1e-14)
    assert isinstance(normal_logpdf(1.0, 0.0, 1.0), float)
    with pytest.raises(ValueError):
        normal_logpdf(1.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# seeded substreams


def test_random_stream_is_deterministic_per_index():
    a = RandomStream(12345, 7).generator.standard_normal(5)
    b = RandomStream(12345, 7).generator.standard_normal(5)
    np.testing.assert_array_equal(a, b)


def test_random_stream_indices_are_distinct():
    a = RandomStream(12345, 0).generator.standard_normal(5)
    b = RandomStream(12345, 1).generator.standard_normal(5)
    assert not np.allclose(a, b)


def test_random_stream_validates_inputs():
    with pytest.raises(ValueError):
        RandomStream(-1, 0)
    with pytest.raises(ValueError):
        RandomStream(2**64, 0)
    with pytest.raises(ValueError):
        RandomStream(1, -3)


def test_sample_normal_moments():
    stream = RandomStream(99, 0)
    n = 200_000
    draws = np.array([sample_normal(stream, 1.5, 2.5) for _ in range(n)])
    assert abs(draws.mean() - 1.5) < 5 * math.sqrt(2.5 / n)
    assert abs(draws.var() - 2.5) < 5 * math.sqrt(2 * 2.5**2 / n)


def test_sample_normal_rejects_bad_variance():
    with pytest.raises(ValueError):
        sample_normal(RandomStream(1, 0), 0.0, -1.0)


def test_sample_geometric_matches_inversion_of_same_uniform():
    # dual route: the sampler must equal the closed-form inversion applied
    # to the substream's own first uniform
    for seed, idx, rho in ((3, 0, 0.05), (3, 1, 0.3), (11, 5, 0.9)):
        u = float(RandomStream(seed, idx).generator.random())
        expected = int(math.log1p(-u) / math.log1p(-rho)) + 1
        assert sample_geometric(RandomStream(seed, idx), rho) == expected


def test_sample_geometric_distribution():
    stream = RandomStream(42, 0)
    rho = 0.05
    n = 200_000
    draws = np.array([sample_geometric(stream, rho) for _ in range(n)])
    assert draws.min() >= 1
    mean, var = 1 / rho, (1 - rho) / rho**2
    assert abs(draws.mean() - mean) < 5 * math.sqrt(var / n)
    p1 = np.mean(draws == 1)
    assert abs(p1 - rho) < 5 * math.sqrt(rho * (1 - rho) / n)


def test_sample_geometric_consumes_one_uniform_even_when_degenerate():
    # stream alignment must not depend on rho
    s1 = RandomStream(7, 0)
    assert sample_geometric(s1, 1.0) == 1
    s2 = RandomStream(7, 0)
    s2.generator.random()
    assert s1.generator.random() == s2.generator.random()


def test_sample_geometric_rejects_bad_rho():
    for rho in (0.0, -0.1, 1.2):
        with pytest.raises(ValueError):
            sample_geometric(RandomStream(1, 0), rho)
