import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from symiqa.imaging import (
    LMN_MATRIX,
    DimensionError,
    as_color_image,
    avg_pool,
    convolve,
    haar_coeffs,
    haar_kernel,
    haar_response,
    load_image,
    rgb_to_lmn,
    rgb_to_yiq,
    scharr_gradient_magnitude,
)


def naive_convolve(plane, kernel):
    """Nested-loop convolution with clamped (edge-replicated) indices."""
    h, w = plane.shape
    kh, kw = kernel.shape
    ch, cw = kh // 2, kw // 2
    out = np.zeros_like(plane)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for u in range(kh):
                for v in range(kw):
                    r = min(max(i - (u - ch), 0), h - 1)
                    c = min(max(j - (v - cw), 0), w - 1)
                    acc += kernel[u, v] * plane[r, c]
            out[i, j] = acc
    return out


def naive_haar(plane, scale, orientation):
    """Correlate the flipped Haar kernel over windows anchored at
    ``(i - n/2, j - n/2)`` with clamped indices, then stride."""
    n = 2 ** scale
    k = haar_kernel(scale, orientation)[::-1, ::-1]
    h, w = plane.shape
    out = np.zeros_like(plane)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for u in range(n):
                for v in range(n):
                    r = min(max(i - n // 2 + u, 0), h - 1)
                    c = min(max(j - n // 2 + v, 0), w - 1)
                    acc += k[u, v] * plane[r, c]
            out[i, j] = acc
    step = 2 ** (scale - 1)
    return out[::step, ::step]


# --- colour transforms ---------------------------------------------------------

def test_yiq_gray_and_black():
    y, i, q = rgb_to_yiq(np.full((4, 4, 3), 0.5))
    np.testing.assert_allclose(y, 0.5, atol=1e-12)
    np.testing.assert_allclose(i, 0.0, atol=1e-12)
    np.testing.assert_allclose(q, 0.0, atol=1e-12)
    for plane in rgb_to_yiq(np.zeros((3, 3, 3))):
        assert np.all(plane == 0)


def test_yiq_inverse_round_trip():
    rng = np.random.default_rng(0)
    img = rng.random((16, 16, 3))
    from symiqa.imaging import YIQ_MATRIX
    inv = np.linalg.inv(YIQ_MATRIX)
    yiq = np.stack(rgb_to_yiq(img), axis=-1)
    np.testing.assert_allclose(yiq @ inv.T, img, atol=1e-10)


def test_lmn_basis_and_black():
    img = np.zeros((2, 2, 3))
    img[0, 0, 0] = 1.0
    l, m, n = rgb_to_lmn(img)
    np.testing.assert_allclose([l[0, 0], m[0, 0], n[0, 0]], LMN_MATRIX[:, 0])
    assert l[1, 1] == m[1, 1] == n[1, 1] == 0.0


def test_lmn_gray_gives_achromatic_row_sums():
    # the opponent rows of this matrix sum to -0.01 and -0.09, not zero
    _, m, n = rgb_to_lmn(np.full((3, 3, 3), 0.5))
    np.testing.assert_allclose(m, 0.5 * LMN_MATRIX[1].sum(), atol=1e-12)
    np.testing.assert_allclose(n, 0.5 * LMN_MATRIX[2].sum(), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 6, 3), elements=st.floats(0, 1)), st.floats(0, 1))
def test_colour_transforms_linear(img, a):
    for transform in (rgb_to_yiq, rgb_to_lmn):
        for p_scaled, p in zip(transform(a * img), transform(img)):
            np.testing.assert_allclose(p_scaled, a * p, atol=1e-12)


def test_color_image_validation():
    with pytest.raises(DimensionError):
        as_color_image(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        as_color_image(np.full((4, 4, 3), 1.5))
    with pytest.raises(ValueError):
        as_color_image(np.full((4, 4, 3), np.nan))


def test_load_image_png_and_bmp(tmp_path):
    from PIL import Image
    rng = np.random.default_rng(1)
    rgb = rng.integers(0, 256, (9, 7, 3), dtype=np.uint8)
    for ext in ("png", "bmp"):
        path = tmp_path / f"x.{ext}"
        Image.fromarray(rgb).save(path)
        np.testing.assert_array_equal(load_image(path), rgb / 255.0)
    Image.fromarray(rgb).save(tmp_path / "x.jpg")
    with pytest.raises(ValueError):
        load_image(tmp_path / "x.jpg")


# --- convolution and pooling ---------------------------------------------------------

def test_convolve_identity_and_constant():
    rng = np.random.default_rng(2)
    plane = rng.random((6, 7))
    np.testing.assert_array_equal(convolve(plane, np.ones((1, 1))), plane)
    k = rng.random((3, 5))
    np.testing.assert_allclose(convolve(np.full((6, 7), 2.5), k), 2.5 * k.sum())


def test_convolve_matches_nested_loop_oracle():
    ramp = np.add.outer(np.arange(5.0), 10 * np.arange(5.0))
    box = np.ones((3, 3)) / 9
    np.testing.assert_allclose(convolve(ramp, box), naive_convolve(ramp, box), atol=1e-12)
    rng = np.random.default_rng(3)
    plane, k = rng.random((8, 9)), rng.random((3, 5))
    np.testing.assert_allclose(convolve(plane, k), naive_convolve(plane, k), atol=1e-12)


def test_convolve_rejects_bad_kernels():
    with pytest.raises(DimensionError):
        convolve(np.zeros((3, 3)), np.ones((5, 5)))
    with pytest.raises(DimensionError):
        convolve(np.zeros((6, 6)), np.ones((2, 3)))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 9), st.integers(3, 9)), elements=st.floats(-5, 5)))
def test_delta_kernel_identity(plane):
    delta = np.zeros((3, 3))
    delta[1, 1] = 1.0
    np.testing.assert_array_equal(convolve(plane, delta), plane)


def test_avg_pool_examples():
    np.testing.assert_array_equal(avg_pool(np.array([[1.0, 3.0], [5.0, 7.0]]), 2), [[4.0]])
    np.testing.assert_array_equal(avg_pool(np.full((6, 4), 3.0), 2), np.full((3, 2), 3.0))
    rng = np.random.default_rng(4)
    plane = rng.random((7, 7))
    oracle = np.array([[plane[2 * i:2 * i + 2, 2 * j:2 * j + 2].mean() for j in range(3)] for i in range(3)])
    np.testing.assert_allclose(avg_pool(plane, 2), oracle, atol=1e-15)
    with pytest.raises(DimensionError):
        avg_pool(np.zeros((3, 3)), 4)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(2, 12)), elements=st.floats(-100, 100)),
       st.integers(1, 3))
def test_avg_pool_preserves_block_mean(plane, factor):
    if min(plane.shape) < factor:
        return
    pooled = avg_pool(plane, factor)
    full = plane[: pooled.shape[0] * factor, : pooled.shape[1] * factor]
    up = np.kron(pooled, np.ones((factor, factor)))
    assert abs(up.mean() - full.mean()) <= 1e-12 * max(1.0, np.abs(full).max())


# --- gradients -----------------------------------------------------------------

def test_scharr_constant_and_ramp():
    assert np.all(scharr_gradient_magnitude(np.full((9, 9), 0.7)) == 0)
    for s in (0.5, -2.0):
        ramp = s * np.tile(np.arange(9.0), (9, 1))
        g = scharr_gradient_magnitude(ramp)
        # kernel [3, 10, 3]/16 x [1, 0, -1]: central difference over two pixels
        np.testing.assert_allclose(g[1:-1, 1:-1], 2 * abs(s), atol=1e-12)


def test_scharr_step_edge():
    plane = np.zeros((9, 10))
    plane[:, 5:] = 1.0
    g = scharr_gradient_magnitude(plane)
    assert set(np.flatnonzero(g.max(axis=0))) == {4, 5}
    assert np.all(g[:, :3] == 0) and np.all(g[:, 7:] == 0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 7), elements=st.floats(-10, 10)))
def test_scharr_nonnegative(plane):
    assert np.all(scharr_gradient_magnitude(plane) >= 0)


# --- Haar ---------------------------------------------------------------------

def test_haar_kernel_structure():
    for s in (1, 2, 3):
        for o in (1, 2, 3):
            k = haar_kernel(s, o)
            assert k.shape == (2 ** s, 2 ** s)
            np.testing.assert_allclose(np.abs(k), 2.0 ** -s)
            assert abs(k.sum()) < 1e-15
    np.testing.assert_array_equal(haar_kernel(1, 1), [[0.5, -0.5], [0.5, -0.5]])
    np.testing.assert_array_equal(haar_kernel(1, 2), [[0.5, 0.5], [-0.5, -0.5]])
    np.testing.assert_array_equal(haar_kernel(1, 3), [[0.5, -0.5], [-0.5, 0.5]])


def test_haar_constant_plane_is_zero():
    for s in (1, 2, 3):
        for o in (1, 2, 3):
            assert np.all(np.abs(haar_coeffs(np.full((16, 16), 0.3), s, o)) < 1e-15)


def test_haar_vertical_edge_orientation_one():
    plane = np.zeros((8, 8))
    plane[:, 4:] = 1.0
    c = haar_coeffs(plane, 1, 1)
    cols = set(np.flatnonzero(np.abs(c).max(axis=0)))
    assert cols == {4}
    assert np.all(haar_coeffs(plane, 1, 2) == 0)


@pytest.mark.parametrize("scale", [1, 2, 3])
@pytest.mark.parametrize("orientation", [1, 2, 3])
def test_haar_matches_naive_oracle(scale, orientation):
    rng = np.random.default_rng(10 * scale + orientation)
    plane = rng.random((16, 16))
    np.testing.assert_allclose(haar_coeffs(plane, scale, orientation),
                               naive_haar(plane, scale, orientation), atol=1e-12)


def test_haar_size_errors():
    with pytest.raises(DimensionError):
        haar_response(np.zeros((4, 4)), 3, 1)
    with pytest.raises(ValueError):
        haar_kernel(1, 4)


@settings(max_examples=30, deadline=None)
@given(st.floats(-50, 50), st.integers(1, 3), st.integers(1, 3))
def test_haar_constant_property(c, s, o):
    assert np.all(np.abs(haar_coeffs(np.full((9, 11), c), s, o)) <= 1e-12 * max(1, abs(c)))
