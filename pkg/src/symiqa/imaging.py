"""Image containers, colour transforms and the filtering primitives shared by
every feature extractor.

Planes are plain 2-D ``float64`` numpy arrays; colour images are ``(H, W, 3)``
RGB arrays with samples in ``[0, 1]``. Borders are handled by edge
replication everywhere.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

MIN_EXTRACTOR_SIZE = 8

# NTSC YIQ
YIQ_MATRIX = np.array([
    [0.299, 0.587, 0.114],
    [0.596, -0.274, -0.322],
    [0.211, -0.523, 0.312],
])

# LMN opponent space used by VSI
LMN_MATRIX = np.array([
    [0.06, 0.63, 0.27],
    [0.30, 0.04, -0.35],
    [0.34, -0.60, 0.17],
])

SCHARR_SMOOTH = np.array([3.0, 10.0, 3.0]) / 16.0
SCHARR_DIFF = np.array([1.0, 0.0, -1.0])


class DimensionError(ValueError):
    """Raised when array shapes are incompatible with an operation."""


def as_plane(plane, *, min_size: int = 1, name: str = "plane") -> np.ndarray:
    arr = np.asarray(plane, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < min_size or arr.shape[1] < min_size:
        raise DimensionError(f"{name} must be at least {min_size}x{min_size}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return arr


def as_color_image(img, *, name: str = "image") -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} samples must lie in [0, 1]")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def load_image(path) -> np.ndarray:
    """Decode a PNG or BMP file into an RGB array scaled to [0, 1]."""
    path = Path(path)
    with Image.open(path) as im:
        if im.format not in ("PNG", "BMP"):
            raise ValueError(f"unsupported image format {im.format!r} for {path}")
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    return rgb / 255.0


def _apply_matrix(img, matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    arr = as_color_image(img)
    out = arr @ matrix.T
    return out[..., 0], out[..., 1], out[..., 2]


def rgb_to_yiq(img) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return _apply_matrix(img, YIQ_MATRIX)


def rgb_to_lmn(img) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return _apply_matrix(img, LMN_MATRIX)


def convolve(plane, kernel) -> np.ndarray:
    """Same-size 2-D convolution with edge-replicated borders.

    The kernel must have odd dimensions no larger than the plane.
    """
    plane = as_plane(plane)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2:
        raise DimensionError(f"kernel must be 2-D, got shape {kernel.shape}")
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise DimensionError(f"kernel dimensions must be odd, got {kernel.shape}")
    if kh > plane.shape[0] or kw > plane.shape[1]:
        raise DimensionError(f"kernel {kernel.shape} larger than plane {plane.shape}")
    return ndimage.convolve(plane, kernel, mode="nearest")


def avg_pool(plane, factor: int) -> np.ndarray:
    """Non-overlapping block mean; trailing partial blocks are dropped."""
    plane = as_plane(plane)
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    h, w = plane.shape
    oh, ow = h // factor, w // factor
    if oh == 0 or ow == 0:
        raise DimensionError(f"factor {factor} too large for plane {plane.shape}")
    blocks = plane[: oh * factor, : ow * factor].reshape(oh, factor, ow, factor)
    return blocks.mean(axis=(1, 3))


def scharr_kernels() -> tuple[np.ndarray, np.ndarray]:
    """Normalised Scharr pair ``(kx, ky)``."""
    kx = np.outer(SCHARR_SMOOTH, SCHARR_DIFF)
    return kx, kx.T


def scharr_gradient_magnitude(plane) -> np.ndarray:
    plane = as_plane(plane, min_size=3)
    kx, ky = scharr_kernels()
    gx = convolve(plane, kx)
    gy = convolve(plane, ky)
    return np.hypot(gx, gy)


def haar_kernel(scale: int, orientation: int) -> np.ndarray:
    """Haar kernel of size ``2**scale`` with entries ``+-1/2**scale``.

    Orientation 1 differentiates along columns (responds to vertical edges),
    2 along rows, 3 is the diagonal (checkerboard) kernel.
    """
    if scale < 1:
        raise ValueError(f"scale must be >= 1, got {scale}")
    n = 2 ** scale
    half = n // 2
    step = np.concatenate([np.ones(half), -np.ones(half)])
    flat = np.ones(n)
    if orientation == 1:
        k = np.outer(flat, step)
    elif orientation == 2:
        k = np.outer(step, flat)
    elif orientation == 3:
        k = np.outer(step, step)
    else:
        raise ValueError(f"orientation must be 1, 2 or 3, got {orientation}")
    return k / n


def haar_response(plane, scale: int, orientation: int) -> np.ndarray:
    """Full-resolution Haar filter response (no subsampling).

    Output pixel ``(i, j)`` covers input rows ``i - n//2 .. i + n//2 - 1``
    (likewise columns) for a kernel of size ``n``; borders replicate edges.
    """
    plane = as_plane(plane)
    kernel = haar_kernel(scale, orientation)
    n = kernel.shape[0]
    if n > plane.shape[0] or n > plane.shape[1]:
        raise DimensionError(f"Haar kernel of size {n} larger than plane {plane.shape}")
    before, after = n // 2, n // 2 - 1
    padded = np.pad(plane, ((before, after), (before, after)), mode="edge")
    flipped = kernel[::-1, ::-1]
    windows = np.lib.stride_tricks.sliding_window_view(padded, (n, n))
    return np.einsum("ijkl,kl->ij", windows, flipped)


def haar_coeffs(plane, scale: int, orientation: int) -> np.ndarray:
    """Haar coefficients at ``scale`` subsampled by ``2**(scale-1)``."""
    response = haar_response(plane, scale, orientation)
    step = 2 ** (scale - 1)
    out = response[::step, ::step]
    if out.size == 0:
        raise DimensionError("subsampled Haar output is empty")
    return out


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()
