import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from conftest import natural, saturate
from symiqa.aggd import FEATURE_NAMES, FeatureVector, featurize
from symiqa.features import extract_all, vsi_maps
from symiqa.gp.program import eval_program
from symiqa.metrics import (
    BUILTIN_PROGRAMS,
    FULL_BINDING,
    EvoFullInputs,
    EvoSubsetInputs,
    SchemaError,
    bind_features,
    evoiqa_full,
    evoiqa_subset,
    haarpsi_score,
)
from symiqa.stats import srocc

FULL_FIELDS = ("sigma_sgm", "aggd_scale_sgm", "grad_ref", "mu_delta_c", "mu_smn", "mu_pcmax", "sigma_smn")


def full(**kw):
    return EvoFullInputs(**{f: kw.get(f, 0.0) for f in FULL_FIELDS})


def test_evoiqa_full_substitution():
    assert evoiqa_full(full()) == 0.0
    assert evoiqa_full(full(sigma_sgm=1.0)) == 2.0


def test_evoiqa_subset_substitution():
    assert evoiqa_subset(EvoSubsetInputs(0.0, 3.0, 2.0, 0.5)) == 0.0
    assert evoiqa_subset(EvoSubsetInputs(1.0, 1.0, 2.0, 0.0)) == 5.0


def test_evoiqa_full_hand_value():
    v = full(sigma_sgm=0.5, aggd_scale_sgm=0.1, grad_ref=2.0, mu_delta_c=0.09, mu_smn=0.9,
             mu_pcmax=0.3, sigma_smn=0.4)
    # 0.1 + 2 * (0.3 + 0.9 - 0.3) + sqrt(0.16 + 0.5)
    inner = 0.1 + 2.0 * 0.9 + math.sqrt(0.66)
    assert evoiqa_full(v) == pytest.approx(0.5 * inner + 0.5, rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 10), st.floats(0, 100), st.floats(-5, 5), st.floats(-2, 2))
def test_evoiqa_subset_nonnegative_and_pure(omega, grad, sigma_c, delta):
    v = EvoSubsetInputs(omega, grad, sigma_c, delta)
    q = evoiqa_subset(v)
    assert q >= 0 and q == evoiqa_subset(v)


def _random_vector(seed):
    rng = np.random.default_rng(seed)
    v = rng.uniform(0.05, 2.0, 45)
    return FeatureVector(v)


def test_bind_features_total_and_computed():
    fv = _random_vector(0)
    f, s = bind_features(fv)
    for name, feature in FULL_BINDING.items():
        assert getattr(f, name) == fv[feature]
    assert s.omega_cv == fv["vsi.sgm.sigma"] / fv["vsi.sgm.mu"]
    assert s.delta_cs == fv["vsi.smn.mu"] - fv["vsi.sgm.mu"]
    assert s.sigma_c == fv["vsi.smn.sigma"] and s.grad_ref == fv["vsi.ref_grad.mu"]
    assert all(math.isfinite(x) for x in (*vars(f).values(), *vars(s).values()))
    with pytest.raises(SchemaError):
        bind_features({"vsi.sgm.sigma": 1.0})


@pytest.mark.parametrize("seed", range(5))
def test_builtin_programs_match_closed_forms(seed):
    fv = _random_vector(seed)
    f, s = bind_features(fv)
    assert eval_program(BUILTIN_PROGRAMS["evoiqa-full"], fv) == pytest.approx(evoiqa_full(f), rel=1e-14)
    assert eval_program(BUILTIN_PROGRAMS["evoiqa-subset"], fv) == pytest.approx(evoiqa_subset(s), rel=1e-14)


def test_identity_pair(astronaut):
    f, s = bind_features(featurize(extract_all(astronaut, astronaut)))
    assert s.omega_cv == 0.0 and s.delta_cs == 0.0
    assert evoiqa_subset(s) == 0.0
    assert evoiqa_full(f) == 0.0
    assert haarpsi_score(astronaut, astronaut) == pytest.approx(1.0, abs=1e-6)


def test_haarpsi_blur_strictly_decreasing():
    img = natural("chelsea", 128)
    scores = [haarpsi_score(img, ndimage.gaussian_filter(img, (s, s, 0))) for s in (0.5, 1, 1.5, 2, 3)]
    assert all(b < a for a, b in zip(scores, scores[1:]))
    assert all(0 <= x <= 1 for x in scores)


def test_haarpsi_saturation_direction():
    img = natural("coffee", 128)
    scores = [haarpsi_score(img, saturate(img, 1 - k)) for k in (0.2, 0.4, 0.6, 0.8)]
    assert scores[0] > scores[-1]


def test_haarpsi_not_assumed_symmetric_and_checks_shape():
    img = natural("astronaut", 64)
    other = saturate(np.clip(img * 0.8, 0, 1), 0.5)
    a, b = haarpsi_score(img, other), haarpsi_score(other, img)
    assert 0 <= a <= 1 and 0 <= b <= 1
    with pytest.raises(ValueError):
        haarpsi_score(img, img[:32])


def test_evolved_metrics_saturation_monotone():
    img = natural("astronaut", 128)
    fulls, subs = [], []
    for k in (0.8, 0.6, 0.4, 0.2, 0.0):
        f, s = bind_features(featurize(extract_all(img, saturate(img, k))))
        fulls.append(evoiqa_full(f))
        subs.append(evoiqa_subset(s))
    # raw outputs measure distortion: 0 at identity, growing with severity
    assert all(b > a for a, b in zip(fulls, fulls[1:]))
    assert all(b > a for a, b in zip(subs, subs[1:]))


def test_block_pair_has_larger_spread_penalty():
    from scipy.optimize import brentq
    img = natural("astronaut", 256, offset=100)
    rng = np.random.default_rng(0)
    noise = rng.normal(0, 1, img.shape[:2])[..., None] * np.ones(3)
    mask = np.kron(rng.random((16, 16)) < 0.25, np.ones((16, 16)))[..., None]
    glob = np.clip(img + 0.02 * noise, 0, 1)
    target = vsi_maps(img, glob)[0].mean()
    amp = brentq(lambda a: vsi_maps(img, np.clip(img + a * noise * mask, 0, 1))[0].mean() - target,
                 0.02, 0.4, xtol=1e-6)
    block = np.clip(img + amp * noise * mask, 0, 1)
    _, s_glob = bind_features(featurize(extract_all(img, glob)))
    _, s_block = bind_features(featurize(extract_all(img, block)))
    assert s_block.omega_cv > 1.5 * s_glob.omega_cv
    assert evoiqa_subset(s_block) > evoiqa_subset(s_glob)
