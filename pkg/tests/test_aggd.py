import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from symiqa.aggd import (
    ALPHA_MAX,
    ALPHA_MIN,
    FEATURE_INDEX,
    FEATURE_NAMES,
    MAP_FIELDS,
    STAT_NAMES,
    FeatureVector,
    describe,
    empirical_moments,
    featurize,
    fit_alpha,
    fit_alpha_flagged,
    ggd_ratio,
    moment_ratio,
    partition_rms,
)
from symiqa.features import ChromaKL, MapSet


def ggd_samples(alpha, n, rng, scale=1.0):
    """Generalised Gaussian via |X|^alpha ~ Gamma(1/alpha) with a random sign."""
    mag = rng.gamma(1.0 / alpha, 1.0, n) ** (1.0 / alpha)
    return scale * np.where(rng.random(n) < 0.5, -mag, mag)


def gamma_ratio(alpha):
    # direct math.gamma evaluation, independent of the log-gamma form
    return math.gamma(2 / alpha) ** 2 / (math.gamma(1 / alpha) * math.gamma(3 / alpha))


# --- partition RMS ---------------------------------------------------------------

def test_partition_rms_examples():
    assert partition_rms([-1.0, 1.0]) == (1.0, 1.0)
    assert partition_rms(np.full((4, 4), 2.5)) == (0.0, 0.0)


def test_partition_rms_matches_loop_oracle():
    rng = np.random.default_rng(0)
    n = 100_000
    x = np.where(rng.random(n) < 0.3, -rng.laplace(0, 2.0, n) - 1, rng.laplace(0, 0.5, n) + 1)
    mean = sum(x.tolist()) / n
    neg, pos = [], []
    for v in x.tolist():
        c = v - mean
        if c < 0:
            neg.append(c * c)
        elif c > 0:
            pos.append(c * c)
    oracle = (math.sqrt(sum(neg) / len(neg)), math.sqrt(sum(pos) / len(pos)))
    got = partition_rms(x)
    assert got[0] == pytest.approx(oracle[0], abs=1e-12)
    assert got[1] == pytest.approx(oracle[1], abs=1e-12)


# --- moment ratio and shape fit -------------------------------------------------

def test_moment_ratio_examples():
    rng = np.random.default_rng(1)
    assert moment_ratio(rng.normal(size=100_000)) == pytest.approx(2 / np.pi, abs=0.01)
    assert moment_ratio(rng.laplace(size=100_000)) == pytest.approx(0.5, abs=0.01)
    assert moment_ratio([-3.0, 3.0, -3.0, 3.0]) == pytest.approx(1.0, abs=1e-15)
    assert math.isnan(moment_ratio(np.ones(5)))


def test_ggd_ratio_matches_gamma_function():
    for a in (0.2, 0.5, 1.0, 2.0, 4.0, 10.0):
        assert ggd_ratio(a) == pytest.approx(gamma_ratio(a), rel=1e-12)


def test_fit_alpha_examples():
    assert fit_alpha(2 / np.pi) == pytest.approx(2.0, abs=0.01)
    assert fit_alpha(0.5) == pytest.approx(1.0, abs=0.01)
    assert fit_alpha(gamma_ratio(4.0)) == pytest.approx(4.0, abs=0.01)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 4.0, 8.0])
def test_fit_alpha_round_trip(alpha):
    assert fit_alpha(gamma_ratio(alpha)) == pytest.approx(alpha, abs=1e-3)


def test_fit_alpha_monotone_on_grid():
    rhos = np.linspace(ggd_ratio(ALPHA_MIN) + 1e-6, ggd_ratio(ALPHA_MAX) - 1e-6, 100)
    alphas = [fit_alpha(r) for r in rhos]
    assert all(b > a for a, b in zip(alphas, alphas[1:]))


def test_fit_alpha_clamps_with_flag():
    assert fit_alpha_flagged(0.0) == (ALPHA_MIN, True)
    assert fit_alpha_flagged(1.0) == (ALPHA_MAX, True)
    assert fit_alpha_flagged(0.5)[1] is False


# --- moments -------------------------------------------------------------------

def test_empirical_moments_examples():
    rng = np.random.default_rng(2)
    _, _, kappa, gamma = empirical_moments(rng.normal(size=1_000_000))
    assert kappa == pytest.approx(3.0, abs=0.05) and gamma == pytest.approx(0.0, abs=0.02)
    _, _, kappa, gamma = empirical_moments(rng.exponential(size=1_000_000))
    assert kappa == pytest.approx(9.0, rel=0.03) and gamma == pytest.approx(2.0, rel=0.03)
    assert empirical_moments(np.full((3, 3), 0.7)) == (0.7, 0.0, 3.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(3, 200), elements=st.floats(-1e3, 1e3)))
def test_pearson_inequality(x):
    _, sigma, kappa, gamma = empirical_moments(x)
    if sigma > 1e-6 * max(1.0, np.abs(x).max()):
        assert kappa >= gamma ** 2 + 1 - 1e-9


# --- descriptor -----------------------------------------------------------------

def test_describe_degenerate_map():
    d = describe(np.full((8, 8), 1.0))
    assert (d.alpha_hat, d.sigma_bar_sq, d.mu, d.sigma, d.kappa, d.gamma) == (2.0, 0.0, 1.0, 0.0, 3.0, 0.0)
    assert d.degenerate


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 4.0])
def test_describe_recovers_ggd_shape(alpha):
    rng = np.random.default_rng(int(alpha * 10))
    d = describe(ggd_samples(alpha, 100_000, rng).reshape(250, 400))
    assert d.alpha_hat == pytest.approx(alpha, rel=0.10)
    assert not d.degenerate


def test_describe_sigma_bar_sq_uses_squared_scales():
    x = np.array([-2.0, 1.0, 1.0])
    sl, sr = partition_rms(x)
    assert describe(x).sigma_bar_sq == pytest.approx((sl ** 2 + sr ** 2) / 2)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(2, 60), elements=st.floats(-50, 50)), st.randoms())
def test_describe_permutation_invariant(x, rnd):
    perm = list(range(len(x)))
    rnd.shuffle(perm)
    a, b = describe(x), describe(x[perm])
    np.testing.assert_allclose(a.as_tuple(), b.as_tuple(), rtol=1e-9, atol=1e-9)
    assert ALPHA_MIN <= a.alpha_hat <= ALPHA_MAX
    assert a.sigma_bar_sq >= 0 and a.sigma >= 0 and a.kappa >= 1 - 1e-9
    assert all(np.isfinite(a.as_tuple()))


# --- feature vector ------------------------------------------------------------

def test_feature_names_layout():
    assert len(FEATURE_NAMES) == 45 == len(set(FEATURE_NAMES))
    expected = [f"{prefix}.{stat}" for _, prefix in MAP_FIELDS for stat in STAT_NAMES]
    expected += ["haar.chroma.d_kl_i", "haar.chroma.d_kl_q", "haar.chroma.mu_delta_c"]
    assert list(FEATURE_NAMES) == expected
    assert "vsi.sgm.sigma" in FEATURE_INDEX
    assert [f for f, _ in MAP_FIELDS] == ["haar_weight", "pc_sim", "pc_max", "vif_gain",
                                          "vsi_sgm", "vsi_smn", "ref_grad"]


def _random_mapset(rng):
    maps = {f: rng.random((16, 16)) ** (i + 1) for i, (f, _) in enumerate(MAP_FIELDS)}
    return MapSet(**maps, chroma_kl=ChromaKL(0.1, 0.3, 0.2))


def test_featurize_is_concatenation_of_describe():
    ms = _random_mapset(np.random.default_rng(3))
    fv = featurize(ms)
    oracle = []
    for field, _ in MAP_FIELDS:
        oracle.extend(describe(getattr(ms, field)).as_tuple())
    oracle += [0.1, 0.3, 0.2]
    np.testing.assert_array_equal(fv.values, oracle)
    assert len(fv) == 45
    assert fv["haar.chroma.mu_delta_c"] == 0.2


def test_featurize_identity_pair(astronaut):
    from symiqa.features import extract_all
    fv = featurize(extract_all(astronaut, astronaut))
    assert fv["vsi.sgm.mu"] == 1.0 and fv["vsi.sgm.sigma"] == 0.0
    assert fv["haar.chroma.d_kl_i"] == fv["haar.chroma.d_kl_q"] == fv["haar.chroma.mu_delta_c"] == 0.0


def test_feature_vector_validation():
    with pytest.raises(ValueError):
        FeatureVector(np.zeros(44))
    bad = np.zeros(45)
    bad[3] = np.inf
    with pytest.raises(ValueError):
        FeatureVector(bad)
    fv = FeatureVector(np.arange(45.0))
    assert fv.as_dict()["haar.weight.alpha"] == 0.0
    assert fv[FEATURE_NAMES[44]] == 44.0
