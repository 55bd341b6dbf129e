"""AGGD descriptors of perceptual maps and the flattened terminal vector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .features import MapSet

ALPHA_MIN = 0.2
ALPHA_MAX = 10.0
ALPHA_TOL = 1e-6
DEGENERATE_ALPHA = 2.0

STAT_NAMES = ("alpha", "sigma_bar_sq", "mu", "sigma", "kappa", "gamma")

# (MapSet attribute, feature prefix)
MAP_FIELDS = (
    ("haar_weight", "haar.weight"),
    ("pc_sim", "fsim.pc_sim"),
    ("pc_max", "fsim.pc_max"),
    ("vif_gain", "vif.gain"),
    ("vsi_sgm", "vsi.sgm"),
    ("vsi_smn", "vsi.smn"),
    ("ref_grad", "vsi.ref_grad"),
)
CHROMA_FIELDS = (
    ("d_kl_i", "haar.chroma.d_kl_i"),
    ("d_kl_q", "haar.chroma.d_kl_q"),
    ("mu_delta_c", "haar.chroma.mu_delta_c"),
)

FEATURE_NAMES: tuple[str, ...] = tuple(
    f"{prefix}.{stat}" for _, prefix in MAP_FIELDS for stat in STAT_NAMES
) + tuple(name for _, name in CHROMA_FIELDS)

FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}


@dataclass(frozen=True)
class AggdDescriptor:
    alpha_hat: float
    sigma_bar_sq: float
    mu: float
    sigma: float
    kappa: float
    gamma: float
    degenerate: bool = False

    def as_tuple(self) -> tuple[float, ...]:
        return (self.alpha_hat, self.sigma_bar_sq, self.mu, self.sigma, self.kappa, self.gamma)


def _flat(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("map is empty")
    return arr


def partition_rms(values) -> tuple[float, float]:
    """Left/right RMS of the mean-centred coefficients.

    Zero-valued coefficients belong to neither side; an empty side gives 0.
    """
    x = _flat(values)
    x = x - x.mean()
    neg = x[x < 0]
    pos = x[x > 0]
    sigma_l = float(np.sqrt(np.mean(neg * neg))) if neg.size else 0.0
    sigma_r = float(np.sqrt(np.mean(pos * pos))) if pos.size else 0.0
    return sigma_l, sigma_r


def moment_ratio(values) -> float:
    """``E[|x|]^2 / E[x^2]`` of the mean-centred coefficients.

    Returns ``nan`` when the centred map has zero second moment.
    """
    x = _flat(values)
    x = x - x.mean()
    m2 = np.mean(x * x)
    if m2 <= 0.0:
        return float("nan")
    return float(np.mean(np.abs(x)) ** 2 / m2)


def ggd_ratio(alpha):
    """Theoretical ``G(2/a)^2 / (G(1/a) G(3/a))``; strictly increasing in ``a``."""
    a = np.asarray(alpha, dtype=np.float64)
    out = np.exp(2.0 * gammaln(2.0 / a) - gammaln(1.0 / a) - gammaln(3.0 / a))
    return float(out) if out.ndim == 0 else out


RHO_MIN = ggd_ratio(ALPHA_MIN)
RHO_MAX = ggd_ratio(ALPHA_MAX)

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def fit_alpha_flagged(rho: float) -> tuple[float, bool]:
    """Shape estimate plus a flag set when ``rho`` falls outside the fit range."""
    if not np.isfinite(rho):
        return DEGENERATE_ALPHA, True
    if rho <= RHO_MIN:
        return ALPHA_MIN, True
    if rho >= RHO_MAX:
        return ALPHA_MAX, True

    def loss(a: float) -> float:
        return (ggd_ratio(a) - rho) ** 2

    lo, hi = ALPHA_MIN, ALPHA_MAX
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = loss(c), loss(d)
    while hi - lo > ALPHA_TOL:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = loss(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = loss(d)
    return (lo + hi) / 2.0, False


def fit_alpha(rho: float) -> float:
    """Golden-section search for the GGD shape whose moment ratio matches ``rho``."""
    return fit_alpha_flagged(rho)[0]


def empirical_moments(values) -> tuple[float, float, float, float]:
    """Population ``(mu, sigma, kappa, gamma)``; kurtosis is non-excess.

    A zero-variance map yields ``(mu, 0, 3, 0)``.
    """
    x = _flat(values)
    mu = float(x.mean())
    d = x - mu
    var = float(np.mean(d * d))
    if var <= 0.0:
        return mu, 0.0, 3.0, 0.0
    sigma = np.sqrt(var)
    kappa = float(np.mean(d ** 4) / var ** 2)
    gamma = float(np.mean(d ** 3) / sigma ** 3)
    return mu, float(sigma), kappa, gamma


def describe(values) -> AggdDescriptor:
    x = _flat(values)
    mu, sigma, kappa, gamma = empirical_moments(x)
    rho = moment_ratio(x)
    if not np.isfinite(rho):
        return AggdDescriptor(DEGENERATE_ALPHA, 0.0, mu, 0.0, 3.0, 0.0, degenerate=True)
    sigma_l, sigma_r = partition_rms(x)
    alpha, clamped = fit_alpha_flagged(rho)
    return AggdDescriptor(
        alpha_hat=alpha,
        sigma_bar_sq=(sigma_l ** 2 + sigma_r ** 2) / 2.0,
        mu=mu,
        sigma=sigma,
        kappa=kappa,
        gamma=gamma,
        degenerate=clamped,
    )


@dataclass(frozen=True)
class FeatureVector:
    """Named terminal vector in the canonical ``FEATURE_NAMES`` order."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} entries, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature vector has non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def names(self) -> tuple[str, ...]:
        return FEATURE_NAMES

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURE_INDEX[name]])

    def __len__(self) -> int:
        return len(FEATURE_NAMES)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


def featurize(maps: MapSet) -> FeatureVector:
    values = []
    for attr, _ in MAP_FIELDS:
        values.extend(describe(getattr(maps, attr)).as_tuple())
    for attr, _ in CHROMA_FIELDS:
        values.append(getattr(maps.chroma_kl, attr))
    return FeatureVector(np.array(values))
