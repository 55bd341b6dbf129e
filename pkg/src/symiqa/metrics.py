"""Closed-form evolved quality metrics and the HaarPSI baseline score."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggd import FEATURE_INDEX, FEATURE_NAMES, FeatureVector
from .features import stability_ratio
from .gp.program import Program, constant, op, psqrt, terminal
from .imaging import as_color_image, avg_pool, check_same_shape, haar_response, rgb_to_yiq

HAARPSI_C = 30.0
HAARPSI_ALPHA = 4.2


class SchemaError(KeyError):
    """A feature vector lacks names a model or binding needs."""


@dataclass(frozen=True)
class EvoFullInputs:
    sigma_sgm: float
    aggd_scale_sgm: float
    grad_ref: float
    mu_delta_c: float
    mu_smn: float
    mu_pcmax: float
    sigma_smn: float


@dataclass(frozen=True)
class EvoSubsetInputs:
    omega_cv: float
    grad_ref: float
    sigma_c: float
    delta_cs: float


def evoiqa_full(v: EvoFullInputs) -> float:
    inner = (v.aggd_scale_sgm
             + v.grad_ref * (psqrt(v.mu_delta_c) + v.mu_smn - v.mu_pcmax)
             + psqrt(v.sigma_smn ** 2 + v.sigma_sgm))
    return float(v.sigma_sgm * inner + v.sigma_sgm)


def evoiqa_subset(v: EvoSubsetInputs) -> float:
    spread = v.sigma_c - psqrt(v.delta_cs) * v.omega_cv
    return float(v.omega_cv * v.grad_ref * spread ** 2 + v.omega_cv)


# Feature names each published symbol binds to.
FULL_BINDING = {
    "sigma_sgm": "vsi.sgm.sigma",
    "aggd_scale_sgm": "vsi.sgm.sigma_bar_sq",
    "grad_ref": "vsi.ref_grad.mu",
    "mu_delta_c": "haar.chroma.mu_delta_c",
    "mu_smn": "vsi.smn.mu",
    "mu_pcmax": "fsim.pc_max.mu",
    "sigma_smn": "vsi.smn.sigma",
}
SUBSET_FEATURES = ("vsi.sgm.sigma", "vsi.sgm.mu", "vsi.ref_grad.mu", "vsi.smn.sigma", "vsi.smn.mu")


def _lookup(fv, name: str) -> float:
    try:
        return float(fv[name])
    except (KeyError, IndexError):
        raise SchemaError(f"feature vector has no entry {name!r}") from None


def bind_features(fv: FeatureVector | dict) -> tuple[EvoFullInputs, EvoSubsetInputs]:
    """Map canonical feature names onto the symbols of both evolved formulas."""
    full = EvoFullInputs(**{k: _lookup(fv, name) for k, name in FULL_BINDING.items()})
    sigma_sgm = full.sigma_sgm
    mu_sgm = _lookup(fv, "vsi.sgm.mu")
    subset = EvoSubsetInputs(
        omega_cv=sigma_sgm / mu_sgm,
        grad_ref=full.grad_ref,
        sigma_c=full.sigma_smn,
        delta_cs=full.mu_smn - mu_sgm,
    )
    return full, subset


def _t(name: str):
    return terminal(FEATURE_INDEX[name])


def _evoiqa_full_program() -> Program:
    s, b, g = _t("vsi.sgm.sigma"), _t("vsi.sgm.sigma_bar_sq"), _t("vsi.ref_grad.mu")
    c, m, p = _t("haar.chroma.mu_delta_c"), _t("vsi.smn.mu"), _t("fsim.pc_max.mu")
    t = _t("vsi.smn.sigma")
    return Program((
        s,
        b, g, c, op("psqrt"), m, op("add"), p, op("sub"), op("mul"), op("add"),
        t, t, op("mul"), s, op("add"), op("psqrt"), op("add"),
        op("mul"), s, op("add"),
    ))


def _evoiqa_subset_program() -> Program:
    s, u, g = _t("vsi.sgm.sigma"), _t("vsi.sgm.mu"), _t("vsi.ref_grad.mu")
    t, m = _t("vsi.smn.sigma"), _t("vsi.smn.mu")
    omega = (s, u, op("pdiv"))
    spread = (t, m, u, op("sub"), op("psqrt")) + omega + (op("mul"), op("sub"))
    return Program(omega + (g, op("mul")) + spread + spread + (op("mul"), op("mul")) + omega + (op("add"),))


BUILTIN_PROGRAMS: dict[str, Program] = {
    "evoiqa-full": _evoiqa_full_program(),
    "evoiqa-subset": _evoiqa_subset_program(),
}


# --- HaarPSI ---------------------------------------------------------------

def _sigmoid(x, alpha):
    return 1.0 / (1.0 + np.exp(-alpha * x))


def _logit(y, alpha):
    return np.log(y / (1.0 - y)) / alpha


def _local_mean_2x2(plane: np.ndarray) -> np.ndarray:
    p = np.pad(plane, ((0, 1), (0, 1)), mode="edge")
    return (p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:]) / 4.0


def haarpsi_score(ref, dist) -> float:
    """HaarPSI similarity in [0, 1] (1 for identical images).

    Inputs are RGB arrays in [0, 1]; processing runs on the 0-255 scale after
    a 2x2 average-pool subsample.
    """
    ref = as_color_image(ref, name="ref")
    dist = as_color_image(dist, name="dist")
    check_same_shape(ref, dist)
    ry, ri, rq = (avg_pool(p * 255.0, 2) for p in rgb_to_yiq(ref))
    dy, di, dq = (avg_pool(p * 255.0, 2) for p in rgb_to_yiq(dist))

    sims, weights = [], []
    for orientation in (1, 2):
        cr = [np.abs(haar_response(ry, s, orientation)) for s in (1, 2, 3)]
        cd = [np.abs(haar_response(dy, s, orientation)) for s in (1, 2, 3)]
        weights.append(np.maximum(cr[2], cd[2]))
        sims.append((stability_ratio(cr[0], cd[0], HAARPSI_C) + stability_ratio(cr[1], cd[1], HAARPSI_C)) / 2.0)

    ci = stability_ratio(np.abs(_local_mean_2x2(ri)), np.abs(_local_mean_2x2(di)), HAARPSI_C)
    cq = stability_ratio(np.abs(_local_mean_2x2(rq)), np.abs(_local_mean_2x2(dq)), HAARPSI_C)
    sims.append((ci + cq) / 2.0)
    weights.append((weights[0] + weights[1]) / 2.0)

    sims = np.stack(sims)
    weights = np.stack(weights)
    total = weights.sum()
    if total > 0:
        pooled = np.sum(_sigmoid(sims, HAARPSI_ALPHA) * weights) / total
    else:
        pooled = np.mean(_sigmoid(sims, HAARPSI_ALPHA))
    return float(np.clip(_logit(pooled, HAARPSI_ALPHA) ** 2, 0.0, 1.0))


__all__ = [
    "BUILTIN_PROGRAMS", "EvoFullInputs", "EvoSubsetInputs", "FEATURE_NAMES", "SchemaError",
    "bind_features", "evoiqa_full", "evoiqa_subset", "haarpsi_score", "SUBSET_FEATURES",
]
