"""Perceptual map extraction for a (reference, distorted) image pair.

Four metric families contribute maps: HaarPSI (coarse-scale weight map and
chrominance KL divergences), FSIM (phase-congruency similarity and max maps),
VIF (gain map at the coarsest pyramid scale) and VSI (gradient and chromatic
similarity maps plus the reference gradient magnitude).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import (
    DimensionError,
    as_color_image,
    as_plane,
    avg_pool,
    check_same_shape,
    convolve,
    gaussian_kernel,
    haar_coeffs,
    rgb_to_lmn,
    rgb_to_yiq,
    scharr_gradient_magnitude,
)

# Log-Gabor bank (FSIM defaults)
PC_SCALES = 4
PC_ORIENTATIONS = 4
PC_MIN_WAVELENGTH = 6.0
PC_MULT = 2.0
PC_SIGMA_ON_F = 0.55
PC_D_THETA_ON_SIGMA = 1.2
PC_NOISE_K = 2.0
PC_EPS = 1e-4

PC_SIM_T1 = 0.85

VSI_C2 = 386.0
VSI_C3 = 130.0

VIF_SCALE = 4
VIF_EPS = 1e-10

HAAR_SCALE = 3
KL_BINS = 64
KL_SMOOTHING = 1e-6

MIN_PAIR_SIZE = 64

# Folded into the feature-cache hash: changing any of these invalidates caches.
EXTRACTOR_CONSTANTS = {
    "pc_scales": PC_SCALES,
    "pc_orientations": PC_ORIENTATIONS,
    "pc_min_wavelength": PC_MIN_WAVELENGTH,
    "pc_mult": PC_MULT,
    "pc_sigma_on_f": PC_SIGMA_ON_F,
    "pc_d_theta_on_sigma": PC_D_THETA_ON_SIGMA,
    "pc_noise_k": PC_NOISE_K,
    "pc_eps": PC_EPS,
    "pc_sim_t1": PC_SIM_T1,
    "vsi_c2": VSI_C2,
    "vsi_c3": VSI_C3,
    "vif_scale": VIF_SCALE,
    "vif_eps": VIF_EPS,
    "haar_scale": HAAR_SCALE,
    "haar_presubsample": 2,
    "kl_bins": KL_BINS,
    "kl_smoothing": KL_SMOOTHING,
    "border": "edge",
    "yiq": "ntsc",
    "lmn": "vsi",
}


@dataclass(frozen=True)
class ChromaKL:
    d_kl_i: float
    d_kl_q: float
    mu_delta_c: float


@dataclass(frozen=True)
class MapSet:
    haar_weight: np.ndarray
    pc_sim: np.ndarray
    pc_max: np.ndarray
    vif_gain: np.ndarray
    vsi_sgm: np.ndarray
    vsi_smn: np.ndarray
    ref_grad: np.ndarray
    chroma_kl: ChromaKL


def stability_ratio(a: np.ndarray, b: np.ndarray, c: float) -> np.ndarray:
    """``(2ab + c) / (a^2 + b^2 + c)``, the SSIM-style similarity ratio."""
    return (2.0 * a * b + c) / (a * a + b * b + c)


# --- HaarPSI ---------------------------------------------------------------

def haarpsi_weight_map(ref_y, dist_y) -> np.ndarray:
    """Coarse-scale Haar weight map: pointwise max of the six |C^(3)| maps."""
    ref_y = as_plane(ref_y, name="ref_y")
    dist_y = as_plane(dist_y, name="dist_y")
    check_same_shape(ref_y, dist_y)
    mags = [np.abs(haar_coeffs(p, HAAR_SCALE, k)) for p in (ref_y, dist_y) for k in (1, 2, 3)]
    return np.maximum.reduce(mags)


def _kl_divergence(p_samples: np.ndarray, q_samples: np.ndarray) -> float:
    lo = min(p_samples.min(), q_samples.min())
    hi = max(p_samples.max(), q_samples.max())
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, KL_BINS + 1)
    p, _ = np.histogram(p_samples, bins=edges)
    q, _ = np.histogram(q_samples, bins=edges)
    p = p / p.sum() + KL_SMOOTHING
    q = q / q.sum() + KL_SMOOTHING
    p /= p.sum()
    q /= q.sum()
    return float(max(np.sum(p * np.log(p / q)), 0.0))


def chroma_kl(ref_i, ref_q, dist_i, dist_q) -> ChromaKL:
    """KL divergence between pooled |I| and |Q| histograms of ref and dist."""
    planes = [as_plane(p) for p in (ref_i, ref_q, dist_i, dist_q)]
    check_same_shape(planes[0], planes[2])
    check_same_shape(planes[1], planes[3])
    ri, rq, di, dq = (avg_pool(np.abs(p), 2).ravel() for p in planes)
    d_i = _kl_divergence(ri, di)
    d_q = _kl_divergence(rq, dq)
    return ChromaKL(d_i, d_q, (d_i + d_q) / 2.0)


# --- FSIM ------------------------------------------------------------------

def _frequency_grid(rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    u = np.fft.fftfreq(cols)[None, :]
    v = np.fft.fftfreq(rows)[:, None]
    radius = np.sqrt(u * u + v * v)
    radius[0, 0] = 1.0
    theta = np.arctan2(-v, u)
    return radius, theta


def local_energy(plane) -> tuple[np.ndarray, np.ndarray]:
    """Noise-compensated local energy and total amplitude of a log-Gabor bank.

    Returns ``(energy, amplitude)`` summed over orientations; phase
    congruency is their ratio. Follows Kovesi's ``phasecong2`` with the
    Rayleigh noise model estimated from the finest scale.
    """
    plane = as_plane(plane, min_size=32)
    rows, cols = plane.shape
    spectrum = np.fft.fft2(plane)
    radius, theta = _frequency_grid(rows, cols)

    lowpass = 1.0 / (1.0 + (radius / 0.45) ** 30)
    radial = []
    for s in range(PC_SCALES):
        fo = 1.0 / (PC_MIN_WAVELENGTH * PC_MULT ** s)
        g = np.exp(-(np.log(radius / fo) ** 2) / (2.0 * np.log(PC_SIGMA_ON_F) ** 2))
        g *= lowpass
        g[0, 0] = 0.0
        radial.append(g)

    theta_sigma = np.pi / PC_ORIENTATIONS / PC_D_THETA_ON_SIGMA
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    energy_all = np.zeros_like(plane)
    amplitude_all = np.zeros_like(plane)

    for o in range(PC_ORIENTATIONS):
        angle = o * np.pi / PC_ORIENTATIONS
        ds = sin_t * np.cos(angle) - cos_t * np.sin(angle)
        dc = cos_t * np.cos(angle) + sin_t * np.sin(angle)
        dtheta = np.abs(np.arctan2(ds, dc))
        spread = np.exp(-(dtheta ** 2) / (2.0 * theta_sigma ** 2))

        sum_e = np.zeros_like(plane)
        sum_o = np.zeros_like(plane)
        sum_an = np.zeros_like(plane)
        responses = []
        spatial_filters = []
        for s in range(PC_SCALES):
            filt = radial[s] * spread
            spatial_filters.append(np.real(np.fft.ifft2(filt)) * np.sqrt(rows * cols))
            eo = np.fft.ifft2(spectrum * filt)
            responses.append(eo)
            sum_an += np.abs(eo)
            sum_e += eo.real
            sum_o += eo.imag
            if s == 0:
                em_n = np.sum(filt ** 2)
                finest_amp_sq = np.abs(eo) ** 2

        x_energy = np.sqrt(sum_e ** 2 + sum_o ** 2) + PC_EPS
        mean_e = sum_e / x_energy
        mean_o = sum_o / x_energy
        energy = np.zeros_like(plane)
        for eo in responses:
            e, od = eo.real, eo.imag
            energy += e * mean_e + od * mean_o - np.abs(e * mean_o - od * mean_e)

        # Noise threshold from the finest-scale amplitude distribution
        mean_e2n = -np.median(finest_amp_sq) / np.log(0.5)
        noise_power = mean_e2n / em_n
        est_sum_an2 = sum(np.sum(f ** 2) for f in spatial_filters)
        est_sum_aiaj = 0.0
        for i in range(PC_SCALES - 1):
            for j in range(i + 1, PC_SCALES):
                est_sum_aiaj += np.sum(spatial_filters[i] * spatial_filters[j])
        est_noise_energy2 = 2.0 * noise_power * est_sum_an2 + 4.0 * noise_power * est_sum_aiaj
        tau = np.sqrt(max(est_noise_energy2, 0.0) / 2.0)
        est_noise_energy = tau * np.sqrt(np.pi / 2.0)
        est_noise_sigma = np.sqrt((2.0 - np.pi / 2.0) * tau ** 2)
        threshold = (est_noise_energy + PC_NOISE_K * est_noise_sigma) / 1.7

        energy_all += np.maximum(energy - threshold, 0.0)
        amplitude_all += sum_an

    return energy_all, amplitude_all


def phase_congruency(plane) -> np.ndarray:
    """Phase congruency map in [0, 1]: local energy over total amplitude."""
    energy, amplitude = local_energy(plane)
    return np.clip(energy / (amplitude + PC_EPS), 0.0, 1.0)


def pc_similarity(pc_ref, pc_dist) -> np.ndarray:
    pc_ref = as_plane(pc_ref)
    pc_dist = as_plane(pc_dist)
    check_same_shape(pc_ref, pc_dist)
    return stability_ratio(pc_ref, pc_dist, PC_SIM_T1)


def pc_max(pc_ref, pc_dist) -> np.ndarray:
    pc_ref = as_plane(pc_ref)
    pc_dist = as_plane(pc_dist)
    check_same_shape(pc_ref, pc_dist)
    return np.maximum(pc_ref, pc_dist)


# --- VIF -------------------------------------------------------------------

def vif_gain_map(ref_y, dist_y) -> np.ndarray:
    """Gain ``sigma_xy / (sigma_x^2 + eps)`` at the coarsest of four scales.

    Scale ``s`` uses a Gaussian window of size ``2**(5-s) + 1`` (sigma =
    size / 5); each step down the pyramid filters with that window and keeps
    every second sample.
    """
    x = as_plane(ref_y, name="ref_y")
    y = as_plane(dist_y, name="dist_y")
    check_same_shape(x, y)
    for scale in range(1, VIF_SCALE + 1):
        size = 2 ** (5 - scale) + 1
        kernel = gaussian_kernel(size, size / 5.0)
        if scale > 1:
            if min(x.shape) < size:
                raise DimensionError(f"image too small for {VIF_SCALE} VIF pyramid levels")
            x = convolve(x, kernel)[::2, ::2]
            y = convolve(y, kernel)[::2, ::2]
    if min(x.shape) < size:
        raise DimensionError(f"image too small for {VIF_SCALE} VIF pyramid levels")
    mu_x = convolve(x, kernel)
    mu_y = convolve(y, kernel)
    var_x = np.maximum(convolve(x * x, kernel) - mu_x * mu_x, 0.0)
    cov_xy = convolve(x * y, kernel) - mu_x * mu_y
    return cov_xy / (var_x + VIF_EPS)


# --- VSI -------------------------------------------------------------------

def vsi_downsample_factor(height: int, width: int) -> int:
    return max(1, int(round(min(height, width) / 256.0)))


def _vsi_planes(img: np.ndarray, factor: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    l, m, n = rgb_to_lmn(img)
    return tuple(avg_pool(p * 255.0, factor) for p in (l, m, n))


def vsi_components(ref, dist) -> dict[str, np.ndarray]:
    """All VSI intermediate maps: ``sgm``, ``sm``, ``sn``, ``ref_grad``, ``dist_grad``."""
    ref = as_color_image(ref, name="ref")
    dist = as_color_image(dist, name="dist")
    check_same_shape(ref, dist)
    factor = vsi_downsample_factor(*ref.shape[:2])
    l1, m1, n1 = _vsi_planes(ref, factor)
    l2, m2, n2 = _vsi_planes(dist, factor)
    g1 = scharr_gradient_magnitude(l1)
    g2 = scharr_gradient_magnitude(l2)
    return {
        "sgm": stability_ratio(g1, g2, VSI_C2),
        "sm": stability_ratio(m1, m2, VSI_C3),
        "sn": stability_ratio(n1, n2, VSI_C3),
        "ref_grad": g1,
        "dist_grad": g2,
    }


def vsi_maps(ref, dist) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns ``(vsi_sgm, vsi_smn, ref_grad)``."""
    parts = vsi_components(ref, dist)
    smn = (parts["sm"] + parts["sn"]) / 2.0
    return parts["sgm"], smn, parts["ref_grad"]


# --- composition -----------------------------------------------------------

def extract_all(ref, dist) -> MapSet:
    ref = as_color_image(ref, name="ref")
    dist = as_color_image(dist, name="dist")
    check_same_shape(ref, dist)
    if min(ref.shape[:2]) < MIN_PAIR_SIZE:
        raise DimensionError(f"images must be at least {MIN_PAIR_SIZE}x{MIN_PAIR_SIZE}, got {ref.shape[:2]}")

    ref_y, ref_i, ref_q = rgb_to_yiq(ref)
    dist_y, dist_i, dist_q = rgb_to_yiq(dist)

    weight = haarpsi_weight_map(avg_pool(ref_y * 255.0, 2), avg_pool(dist_y * 255.0, 2))
    kl = chroma_kl(ref_i, ref_q, dist_i, dist_q)

    pc_r = phase_congruency(ref_y * 255.0)
    pc_d = phase_congruency(dist_y * 255.0)

    gain = vif_gain_map(ref_y, dist_y)
    sgm, smn, grad = vsi_maps(ref, dist)

    return MapSet(
        haar_weight=weight,
        pc_sim=pc_similarity(pc_r, pc_d),
        pc_max=pc_max(pc_r, pc_d),
        vif_gain=gain,
        vsi_sgm=sgm,
        vsi_smn=smn,
        ref_grad=grad,
        chroma_kl=kl,
    )
