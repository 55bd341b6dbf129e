import numpy as np
import pytest

skdata = pytest.importorskip("skimage.data")


def natural(name: str = "astronaut", size: int = 128, offset: int = 0) -> np.ndarray:
    """A square RGB crop of a bundled scikit-image test picture, in [0, 1]."""
    img = getattr(skdata, name)()
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    crop = img[offset:offset + size, offset:offset + size, :3]
    return crop.astype(np.float64) / 255.0


def grayscale(img: np.ndarray) -> np.ndarray:
    y = img @ np.array([0.299, 0.587, 0.114])
    return np.repeat(y[..., None], 3, axis=-1)


def saturate(img: np.ndarray, k: float) -> np.ndarray:
    """Scale the chroma around the luma: k < 1 desaturates, k > 1 boosts."""
    g = grayscale(img)
    return np.clip(g + k * (img - g), 0.0, 1.0)


@pytest.fixture(scope="session")
def astronaut():
    return natural("astronaut", 128)


def save_rgb(path, img: np.ndarray) -> None:
    from PIL import Image
    Image.fromarray(np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)).save(path)


def make_tid_tree(root, n_refs: int = 2, dists=(1, 8), levels=(1, 2), size: int = 64,
                  upper_refs: bool = False):
    """A miniature TID2013-style tree: noise (odd ids) and blur (even ids)
    distortions of natural crops, with a synthetic MOS listing."""
    from scipy import ndimage
    ref_dir, dist_dir = root / "reference_images", root / "distorted_images"
    ref_dir.mkdir(parents=True)
    dist_dir.mkdir()
    rng = np.random.default_rng(0)
    lines = []
    for r in range(1, n_refs + 1):
        ref = natural("astronaut", size, offset=40 * r)
        name = f"i{r:02d}"
        save_rgb(ref_dir / (name.upper() + ".BMP" if upper_refs else name + ".bmp"), ref)
        for d in dists:
            for lv in levels:
                if d % 2:
                    dist = ref + 0.03 * lv * rng.normal(size=ref.shape)
                else:
                    dist = ndimage.gaussian_filter(ref, (lv, lv, 0))
                fname = f"{name}_{d:02d}_{lv}.bmp"
                save_rgb(dist_dir / fname, dist)
                lines.append(f"{7.0 - lv - 0.1 * r:.2f} {fname}")
    (root / "mos_with_names.txt").write_text("\n".join(lines) + "\n")
    return root


# --- acceptance summary ------------------------------------------------------------
# Acceptance tests append ``(criterion, status, detail)`` here; the lines are
# printed once at the end of the session, whatever the capture mode.
ACCEPTANCE_LINES: list[tuple[int, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n, status, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"{status:<4} criterion {n}: {detail}")
