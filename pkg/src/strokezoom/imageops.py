"""Raster image handling: PNG I/O, bicubic resampling, patch tiling and
full-reference quality metrics.

Images are numpy float64 arrays of shape (h, w, 3), channels in [0, 1].
All functions are pure; none keep global state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PilImage, UnidentifiedImageError

__all__ = [
    "PngFormatError",
    "UnsupportedPngError",
    "PatchGrid",
    "as_image",
    "round_half_up",
    "load_png",
    "save_png",
    "bicubic_resample",
    "box_downsample",
    "split_patches",
    "stitch_patches",
    "mse",
    "psnr",
    "ssim",
    "luma",
    "edge_sharpness",
]

# Display cap used wherever an infinite PSNR has to be printed.
PSNR_DISPLAY_CAP = 99.0

_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])  # ITU-R BT.601


class PngFormatError(ValueError):
    """The file is not a decodable PNG."""


class UnsupportedPngError(PngFormatError):
    """The PNG decodes but uses a bit depth / mode outside the contract."""


def round_half_up(x: float) -> int:
    """Rounding rule used everywhere dimensions are scaled: 0.5 goes up."""
    return int(np.floor(x + 0.5))


def as_image(arr: np.ndarray) -> np.ndarray:
    """Validate and return an (h, w, 3) float64 image in [0, 1]."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) image, got shape {a.shape}")
    if a.size and (a.min() < 0.0 or a.max() > 1.0):
        raise ValueError("image channels must lie in [0, 1]")
    return a


def load_png(path) -> np.ndarray:
    """Load a PNG as an (h, w, 3) float image with channels in [0, 1].

    Accepts 8-bit RGB/RGBA/grayscale/palette and 16-bit grayscale input.
    Alpha is discarded, grayscale is promoted to three equal channels.
    Raises FileNotFoundError, PngFormatError or UnsupportedPngError.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such image file: {p}")
    try:
        with PilImage.open(p) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64)
                if mode == "I":  # 32-bit integer gray holds 16-bit PNG data
                    if arr.size and arr.max() > 65535:
                        raise UnsupportedPngError(
                            f"unsupported sample range in mode {mode}"
                        )
                arr = arr / 65535.0
                return np.repeat(arr[:, :, None], 3, axis=2)
            if mode in ("1",):
                raise UnsupportedPngError(f"unsupported PNG bit depth (mode {mode})")
            if mode not in ("RGB", "RGBA", "L", "LA", "P", "PA"):
                raise UnsupportedPngError(f"unsupported PNG mode {mode}")
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
            return arr
    except UnidentifiedImageError as exc:
        raise PngFormatError(f"not a decodable PNG: {p}") from exc
    except (OSError, SyntaxError) as exc:
        raise PngFormatError(f"malformed PNG: {p}") from exc


def save_png(image: np.ndarray, path) -> None:
    """Write an 8-bit RGB PNG; channel byte = round-half-up of v * 255."""
    img = as_image(image)
    bytes_ = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    pil = PilImage.fromarray(bytes_, mode="RGB")
    try:
        pil.save(Path(path), format="PNG")
    except OSError as exc:
        raise OSError(f"cannot write PNG to {path}: {exc}") from exc


def _catmull_rom(t: np.ndarray) -> np.ndarray:
    """Cubic convolution kernel with a = -0.5 (Catmull-Rom)."""
    a = -0.5
    at = np.abs(t)
    at2 = at * at
    at3 = at2 * at
    near = (a + 2.0) * at3 - (a + 3.0) * at2 + 1.0
    far = a * at3 - 5.0 * a * at2 + 8.0 * a * at - 4.0 * a
    return np.where(at <= 1.0, near, np.where(at < 2.0, far, 0.0))


def _resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) bicubic weight matrix with pixel-center alignment and
    index clamping at the edges."""
    out_idx = np.arange(n_out, dtype=np.float64)
    src = (out_idx + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(np.int64)
    frac = src - base
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    for k in range(-1, 3):
        w = _catmull_rom(frac - k)
        idx = np.clip(base + k, 0, n_in - 1)
        np.add.at(mat, (out_idx.astype(np.int64), idx), w)
    return mat


def bicubic_resample(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable Catmull-Rom resampling to (out_h, out_w), clamped to [0, 1]."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    img = as_image(image)
    rows = _resample_matrix(img.shape[0], out_h)
    cols = _resample_matrix(img.shape[1], out_w)
    # separable: rows @ img (per channel), then columns
    tmp = np.tensordot(rows, img, axes=([1], [0]))        # (out_h, w, 3)
    out = np.tensordot(tmp, cols, axes=([1], [1]))        # (out_h, 3, out_w)
    out = np.transpose(out, (0, 2, 1))
    return np.clip(out, 0.0, 1.0)


def box_downsample(values: np.ndarray, factor: int) -> np.ndarray:
    """Average-pool by an integer factor along the two leading axes."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    v = np.asarray(values, dtype=np.float64)
    h, w = v.shape[0], v.shape[1]
    if h % factor or w % factor:
        raise ValueError(f"dims {h}x{w} not divisible by factor {factor}")
    shape = (h // factor, factor, w // factor, factor) + v.shape[2:]
    return v.reshape(shape).mean(axis=(1, 3))


@dataclass
class PatchGrid:
    """A disjoint tiling of a reflection-padded image."""

    patch_size: int
    rows: int
    cols: int
    patches: list = field(repr=False)
    pad_top: int = 0
    pad_left: int = 0
    pad_bottom: int = 0
    pad_right: int = 0

    @property
    def source_shape(self) -> tuple:
        return (
            self.rows * self.patch_size - self.pad_top - self.pad_bottom,
            self.cols * self.patch_size - self.pad_left - self.pad_right,
        )


def _split_padding(total: int) -> tuple:
    # even split, the odd pixel goes to the bottom/right side
    return total // 2, total - total // 2


def split_patches(image: np.ndarray, patch_size: int = 16) -> PatchGrid:
    """Reflection-pad to multiples of `patch_size` and tile disjointly."""
    if patch_size < 1:
        raise ValueError("patch_size must be >= 1")
    img = as_image(image)
    h, w = img.shape[:2]
    rows = -(-h // patch_size)
    cols = -(-w // patch_size)
    pad_t, pad_b = _split_padding(rows * patch_size - h)
    pad_l, pad_r = _split_padding(cols * patch_size - w)
    padded = np.pad(img, ((pad_t, pad_b), (pad_l, pad_r), (0, 0)), mode="reflect")
    patches = []
    for r in range(rows):
        for c in range(cols):
            patches.append(
                padded[
                    r * patch_size : (r + 1) * patch_size,
                    c * patch_size : (c + 1) * patch_size,
                ].copy()
            )
    return PatchGrid(
        patch_size=patch_size,
        rows=rows,
        cols=cols,
        patches=patches,
        pad_top=pad_t,
        pad_left=pad_l,
        pad_bottom=pad_b,
        pad_right=pad_r,
    )


def stitch_patches(grid: PatchGrid, scale: float = 1.0) -> np.ndarray:
    """Place patches disjointly and crop the (scaled) padding margins.

    Every patch must measure round(patch_size * scale) on both sides.
    At scale 1 this is the exact inverse of split_patches.
    """
    size = round_half_up(grid.patch_size * scale)
    for i, p in enumerate(grid.patches):
        if p.shape[0] != size or p.shape[1] != size:
            raise ValueError(
                f"patch {i} is {p.shape[0]}x{p.shape[1]}, expected {size}x{size}"
            )
    if len(grid.patches) != grid.rows * grid.cols:
        raise ValueError("patch count does not match rows x cols")
    canvas = np.zeros((grid.rows * size, grid.cols * size, 3), dtype=np.float64)
    for r in range(grid.rows):
        for c in range(grid.cols):
            canvas[r * size : (r + 1) * size, c * size : (c + 1) * size] = \
                grid.patches[r * grid.cols + c]
    src_h, src_w = grid.source_shape
    out_h = round_half_up(src_h * scale)
    out_w = round_half_up(src_w * scale)
    top = min(round_half_up(grid.pad_top * scale), canvas.shape[0] - out_h)
    left = min(round_half_up(grid.pad_left * scale), canvas.shape[1] - out_w)
    top = max(top, 0)
    left = max(left, 0)
    return canvas[top : top + out_h, left : left + out_w]


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error over all pixels and channels."""
    ia, ib = as_image(a), as_image(b)
    if ia.shape != ib.shape:
        raise ValueError(f"image shapes differ: {ia.shape} vs {ib.shape}")
    d = ia - ib
    return float(np.mean(d * d))


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the images are identical.

    Callers printing the value should cap it at PSNR_DISPLAY_CAP.
    """
    err = mse(a, b)
    if err == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / err))


def luma(image: np.ndarray) -> np.ndarray:
    """BT.601 luma plane of an RGB image."""
    return as_image(image) @ _LUMA_WEIGHTS


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma * sigma))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity on the luma channel.

    11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic
    range 1. Windows are evaluated fully inside the image ("valid" mode).
    """
    ia, ib = as_image(a), as_image(b)
    if ia.shape != ib.shape:
        raise ValueError(f"image shapes differ: {ia.shape} vs {ib.shape}")
    h, w = ia.shape[:2]
    if min(h, w) < 11:
        raise ValueError(f"image {h}x{w} smaller than the 11x11 SSIM window")
    x, y = luma(ia), luma(ib)
    win = _gaussian_window()

    from scipy.signal import convolve2d

    def filt(z):
        return convolve2d(z, win, mode="valid")

    mu_x = filt(x)
    mu_y = filt(y)
    xx = filt(x * x) - mu_x * mu_x
    yy = filt(y * y) - mu_y * mu_y
    xy = filt(x * y) - mu_x * mu_y
    c1 = 0.01**2
    c2 = 0.03**2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def edge_sharpness(image: np.ndarray) -> float:
    """Mean magnitude of the central-difference luma gradient."""
    img = as_image(image)
    h, w = img.shape[:2]
    if h < 2 or w < 2:
        raise ValueError(f"need at least 2x2 pixels, got {h}x{w}")
    y = luma(img)
    gy, gx = np.gradient(y)
    return float(np.mean(np.sqrt(gx * gx + gy * gy)))
