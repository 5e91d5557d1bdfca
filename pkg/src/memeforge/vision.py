"""Image decoding, OCR-oriented preprocessing, and classical texture/color features.

Images are plain numpy arrays: RGB rasters are uint8 of shape (h, w, 3),
grayscale rasters uint8 of shape (h, w). All preprocessing operations are
pure functions; border handling is edge replication throughout.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image, UnidentifiedImageError
from scipy.optimize import linprog

from .errors import (
    BoxOutOfBounds,
    EvenBlock,
    MalformedImage,
    NonPositiveSigma,
    TooSmall,
    UnsupportedFormat,
    ZeroDimension,
)

log = logging.getLogger(__name__)

# distance-1 offsets at 0, 45, 90, 135 degrees (row, col)
GLCM_OFFSETS = ((0, 1), (-1, 1), (-1, 0), (-1, -1))


@dataclass(frozen=True)
class GlcmFeatures:
    contrast: float
    correlation: float
    energy: float
    homogeneity: float


@dataclass(frozen=True)
class TamuraFeatures:
    coarseness: float
    directionality: float


@dataclass(frozen=True)
class FaceBox:
    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True)
class FaceFeatures:
    count: int
    max_rel_area: float


class SkewEstimate(NamedTuple):
    angle: float
    degenerate: bool


class Directionality(NamedTuple):
    value: float
    empty_histogram: bool


# ---------------------------------------------------------------------------
# decoding / color conversion
# ---------------------------------------------------------------------------

def decode_image(data: bytes) -> np.ndarray:
    """Decode a PNG or JPEG byte stream into an (h, w, 3) uint8 array."""
    try:
        img = Image.open(io.BytesIO(data))
        fmt = img.format
        if fmt not in ("PNG", "JPEG"):
            raise UnsupportedFormat(f"expected PNG or JPEG, got {fmt}")
        img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise MalformedImage(str(exc)) from exc
    except UnsupportedFormat:
        raise
    except OSError as exc:
        raise MalformedImage(str(exc)) from exc
    return arr


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Standard luma conversion: round(0.299 R + 0.587 G + 0.114 B)."""
    rgb = img.astype(np.float64)
    gray = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.round(gray), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

def _bilinear_axis_coords(n_src: int, n_dst: int):
    """Source coordinates for resampling, pixel-center aligned."""
    scale = n_src / n_dst
    coords = (np.arange(n_dst) + 0.5) * scale - 0.5
    coords = np.clip(coords, 0.0, n_src - 1)
    lo = np.floor(coords).astype(int)
    frac = coords - lo
    lo = np.clip(lo, 0, n_src - 1)
    hi = np.clip(lo + 1, 0, n_src - 1)
    return lo, hi, frac


def rescale(img: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Bilinear resize to exactly target_w x target_h, same channel count."""
    if target_w < 1 or target_h < 1:
        raise ZeroDimension(f"target size {target_w}x{target_h}")
    h, w = img.shape[:2]
    y_lo, y_hi, fy = _bilinear_axis_coords(h, target_h)
    x_lo, x_hi, fx = _bilinear_axis_coords(w, target_w)
    a = img.astype(np.float64)
    # separable gather: rows first, then columns
    fy_col = fy[:, None] if a.ndim == 2 else fy[:, None, None]
    fx_row = fx[None, :] if a.ndim == 2 else fx[None, :, None]
    rows = a[y_lo] * (1 - fy_col) + a[y_hi] * fy_col
    out = rows[:, x_lo] * (1 - fx_row) + rows[:, x_hi] * fx_row
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def _gaussian_kernel_1d(sigma: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return k


def _gaussian_kernel_2d(sigma: float, radius: int) -> np.ndarray:
    k = _gaussian_kernel_1d(sigma, radius)
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def _convolve2d_replicate(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Direct 2-D convolution (correlation; all kernels here are symmetric)
    with edge-replicated borders. Input and output are float64."""
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    padded = np.pad(img, ((ry, ry), (rx, rx)), mode="edge")
    windows = sliding_window_view(padded, (kh, kw))
    return np.einsum("ijkl,kl->ij", windows, kernel)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Blur with a normalized 2-D Gaussian of side 2*ceil(3*sigma)+1."""
    if sigma <= 0:
        raise NonPositiveSigma(f"sigma={sigma}")
    radius = int(np.ceil(3.0 * sigma))
    kernel = _gaussian_kernel_2d(sigma, radius)
    out = _convolve2d_replicate(img.astype(np.float64), kernel)
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def rotate(img: np.ndarray, angle: float, fill: int = 255) -> np.ndarray:
    """Rotate about the image center by `angle` degrees (counter-clockwise),
    bilinear sampling, out-of-bounds filled with `fill`. Same output size."""
    h, w = img.shape
    theta = np.deg2rad(angle)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    dy = ys - cy
    dx = xs - cx
    # inverse map: rotate output coords by -angle to find the source sample
    src_x = cos_t * dx + sin_t * dy + cx
    src_y = -sin_t * dx + cos_t * dy + cy

    a = img.astype(np.float64)
    x0 = np.floor(src_x).astype(int)
    y0 = np.floor(src_y).astype(int)
    fx = src_x - x0
    fy = src_y - y0

    def sample(yy, xx):
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        vals = a[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
        return np.where(inside, vals, float(fill))

    v00 = sample(y0, x0)
    v01 = sample(y0, x0 + 1)
    v10 = sample(y0 + 1, x0)
    v11 = sample(y0 + 1, x0 + 1)
    out = (v00 * (1 - fx) * (1 - fy) + v01 * fx * (1 - fy)
           + v10 * (1 - fx) * fy + v11 * fx * fy)
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def estimate_skew(img: np.ndarray, max_angle: float = 15.0,
                  step: float = 0.5) -> SkewEstimate:
    """Estimate the text skew angle in [-max_angle, +max_angle].

    The returned angle is the rotation the content appears to have; applying
    rotate(img, -angle) deskews it. The search maximizes the variance of
    row sums of the binarized, counter-rotated image.
    """
    if img.min() == img.max():
        return SkewEstimate(0.0, True)
    ink = (img.astype(np.float64) < img.mean()).astype(np.float64)
    best_angle, best_var = 0.0, -1.0
    for angle in np.arange(-max_angle, max_angle + step / 2, step):
        rotated = _rotate_float(ink, -angle)
        var = rotated.sum(axis=1).var()
        if var > best_var:
            best_var = var
            best_angle = float(angle)
    return SkewEstimate(best_angle, False)


def _rotate_float(a: np.ndarray, angle: float) -> np.ndarray:
    """Rotation core on a float array with zero fill (used by the skew search)."""
    h, w = a.shape
    theta = np.deg2rad(angle)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    src_x = cos_t * (xs - cx) + sin_t * (ys - cy) + cx
    src_y = -sin_t * (xs - cx) + cos_t * (ys - cy) + cy
    x0 = np.floor(src_x).astype(int)
    y0 = np.floor(src_y).astype(int)
    fx = src_x - x0
    fy = src_y - y0

    def sample(yy, xx):
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        return np.where(inside, a[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)], 0.0)

    return (sample(y0, x0) * (1 - fx) * (1 - fy)
            + sample(y0, x0 + 1) * fx * (1 - fy)
            + sample(y0 + 1, x0) * (1 - fx) * fy
            + sample(y0 + 1, x0 + 1) * fx * fy)


def adaptive_threshold(img: np.ndarray, block: int = 11, c: float = 2.0) -> np.ndarray:
    """Gaussian-weighted local mean thresholding.

    Output pixel is 255 when the input exceeds (local weighted mean - c),
    else 0. The weight kernel is a block x block Gaussian with the usual
    sigma = 0.3*((block-1)*0.5 - 1) + 0.8.
    """
    if block % 2 == 0 or block < 3:
        raise EvenBlock(f"block must be odd and >= 3, got {block}")
    sigma = 0.3 * ((block - 1) * 0.5 - 1) + 0.8
    radius = block // 2
    kernel = _gaussian_kernel_2d(sigma, radius)
    mean = _convolve2d_replicate(img.astype(np.float64), kernel)
    return np.where(img.astype(np.float64) > mean - c, 255, 0).astype(np.uint8)


def preprocess_for_ocr(img_rgb: np.ndarray, scale: float = 2.0,
                       blur_sigma: float = 1.0, block: int = 11,
                       c: float = 2.0) -> np.ndarray:
    """The full rescale -> blur -> deskew -> adaptive-threshold chain."""
    h, w = img_rgb.shape[:2]
    up = rescale(img_rgb, max(1, int(round(w * scale))), max(1, int(round(h * scale))))
    gray = to_grayscale(up)
    gray = gaussian_blur(gray, blur_sigma)
    skew = estimate_skew(gray)
    if not skew.degenerate and skew.angle != 0.0:
        gray = rotate(gray, -skew.angle)
    return adaptive_threshold(gray, block=block, c=c)


# ---------------------------------------------------------------------------
# GLCM
# ---------------------------------------------------------------------------

def compute_glcm(img: np.ndarray, levels: int = 8,
                 offsets: Sequence[tuple[int, int]] = GLCM_OFFSETS) -> np.ndarray:
    """Symmetrized, offset-pooled, normalized co-occurrence matrix.

    Intensities are quantized to `levels` equal-width bins over [0, 256).
    Each offset contributes both (i, j) and (j, i) counts.
    """
    if img.size < 4 or img.shape[0] < 2 or img.shape[1] < 2:
        raise TooSmall(f"image {img.shape} smaller than 2x2")
    if levels < 2:
        raise ValueError("levels must be >= 2")
    q = (img.astype(np.int64) * levels) // 256
    counts = np.zeros((levels, levels), dtype=np.float64)
    h, w = q.shape
    for dr, dc in offsets:
        r0, r1 = max(0, -dr), min(h, h - dr)
        c0, c1 = max(0, -dc), min(w, w - dc)
        a = q[r0:r1, c0:c1].ravel()
        b = q[r0 + dr:r1 + dr, c0 + dc:c1 + dc].ravel()
        np.add.at(counts, (a, b), 1.0)
        np.add.at(counts, (b, a), 1.0)
    total = counts.sum()
    if total == 0:
        raise TooSmall("no valid pixel pairs for the given offsets")
    return counts / total


def glcm_features(p: np.ndarray) -> GlcmFeatures:
    """Haralick contrast, correlation, energy, homogeneity of a normalized GLCM."""
    levels = p.shape[0]
    i = np.arange(levels, dtype=np.float64)
    ii, jj = np.meshgrid(i, i, indexing="ij")
    contrast = float(((ii - jj) ** 2 * p).sum())
    energy = float((p ** 2).sum())
    homogeneity = float((p / (1.0 + np.abs(ii - jj))).sum())
    marg = p.sum(axis=1)
    mu = float((i * marg).sum())
    var = float(((i - mu) ** 2 * marg).sum())
    if var < 1e-12:
        correlation = 0.0
    else:
        correlation = float((((ii - mu) * (jj - mu) * p).sum()) / var)
    return GlcmFeatures(contrast, correlation, energy, homogeneity)


# ---------------------------------------------------------------------------
# colorfulness (EMD against the uniform color histogram)
# ---------------------------------------------------------------------------

def emd(p: np.ndarray, q: np.ndarray, cost: np.ndarray) -> float:
    """Exact Earth Mover's Distance between two equal-mass distributions.

    Solved as the min-cost transportation LP: minimize sum(cost * flow)
    subject to row sums = p and column sums = q, flow >= 0.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m, n = len(p), len(q)
    if cost.shape != (m, n):
        raise ValueError("cost shape mismatch")
    if abs(p.sum() - q.sum()) > 1e-9:
        raise ValueError("distributions must carry equal mass")
    a_eq = []
    for i in range(m):
        row = np.zeros(m * n)
        row[i * n:(i + 1) * n] = 1.0
        a_eq.append(row)
    for j in range(n - 1):  # last column constraint is redundant
        col = np.zeros(m * n)
        col[j::n] = 1.0
        a_eq.append(col)
    b_eq = np.concatenate([p, q[:-1]])
    res = linprog(cost.ravel(), A_eq=np.array(a_eq), b_eq=b_eq,
                  bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transportation LP failed: {res.message}")
    return float(res.fun)


def _rgb_bin_centers(bins_per_channel: int = 4) -> np.ndarray:
    """Bin centers of the quantized RGB cube, in unit-cube coordinates."""
    centers = (np.arange(bins_per_channel) + 0.5) / bins_per_channel
    r, g, b = np.meshgrid(centers, centers, centers, indexing="ij")
    return np.stack([r.ravel(), g.ravel(), b.ravel()], axis=1)


def rgb_histogram(img: np.ndarray, bins_per_channel: int = 4) -> np.ndarray:
    """Normalized histogram over the bins_per_channel**3 quantized RGB cube."""
    q = (img.astype(np.int64) * bins_per_channel) // 256
    idx = (q[..., 0] * bins_per_channel + q[..., 1]) * bins_per_channel + q[..., 2]
    hist = np.bincount(idx.ravel(), minlength=bins_per_channel ** 3).astype(np.float64)
    return hist / hist.sum()


def colorfulness(img: np.ndarray, bins_per_channel: int = 4) -> float:
    """EMD between the image's RGB histogram and the uniform color histogram."""
    hist = rgb_histogram(img, bins_per_channel)
    n_bins = bins_per_channel ** 3
    uniform = np.full(n_bins, 1.0 / n_bins)
    centers = _rgb_bin_centers(bins_per_channel)
    cost = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
    return emd(hist, uniform, cost)


# ---------------------------------------------------------------------------
# Tamura features
# ---------------------------------------------------------------------------

_COARSENESS_EXPONENTS = (1, 2, 3, 4, 5)


def tamura_coarseness(img: np.ndarray) -> float:
    """Mean best window size over pixels, windows of side 2^k for k in 1..5.

    Per pixel the horizontal and vertical differences of shifted window
    averages are compared; the k maximizing the larger difference wins, ties
    break to the smallest k. Images below 64x64 are edge-padded up first.
    """
    a = img.astype(np.float64)
    h, w = a.shape
    if h < 64 or w < 64:
        pad_h = max(0, 64 - h)
        pad_w = max(0, 64 - w)
        a = np.pad(a, ((pad_h // 2, pad_h - pad_h // 2),
                       (pad_w // 2, pad_w - pad_w // 2)), mode="edge")
        h, w = a.shape
    margin = 2 ** max(_COARSENESS_EXPONENTS)  # window half + shift
    padded = np.pad(a, margin, mode="edge")
    # summed-area table with a zero guard row/column
    sat = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    sat[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)

    def window_mean(size: int) -> np.ndarray:
        """Mean over the size x size window centered (floor convention) at
        each pixel of the padded array's interior grid."""
        sums = (sat[size:, size:] - sat[:-size, size:]
                - sat[size:, :-size] + sat[:-size, :-size])
        return sums / (size * size)

    best_e = np.full((h, w), -1.0)
    best_size = np.zeros((h, w))
    for k in _COARSENESS_EXPONENTS:
        size = 2 ** k
        half = size // 2
        means = window_mean(size)  # indexed by window top-left in padded coords
        # window centered at padded pixel (y, x) has top-left (y - half, x - half)

        def center_mean(dy: int, dx: int) -> np.ndarray:
            y0 = margin + dy - half
            x0 = margin + dx - half
            return means[y0:y0 + h, x0:x0 + w]

        e_h = np.abs(center_mean(0, half) - center_mean(0, -half))
        e_v = np.abs(center_mean(half, 0) - center_mean(-half, 0))
        e = np.maximum(e_h, e_v)
        improved = e > best_e + 1e-12  # strict: ties keep the smaller window
        best_e[improved] = e[improved]
        best_size[improved] = size
    return float(best_size.mean())


_PREWITT_X = np.array([[-1.0, 0.0, 1.0]] * 3)
_PREWITT_Y = np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -1.0, -1.0]])

DIRECTIONALITY_BINS = 16
DIRECTIONALITY_MAG_THRESHOLD = 12.0


def tamura_directionality(img: np.ndarray) -> Directionality:
    """Orientation concentration in [0, 1]: 0 for a uniform orientation
    histogram, 1 when all gradient votes fall in a single bin."""
    a = img.astype(np.float64)
    gx = _convolve2d_replicate(a, _PREWITT_X)
    gy = _convolve2d_replicate(a, _PREWITT_Y)
    mag = (np.abs(gx) + np.abs(gy)) / 2.0
    voters = mag >= DIRECTIONALITY_MAG_THRESHOLD
    if not voters.any():
        return Directionality(0.0, True)
    theta = np.mod(np.arctan2(gy[voters], gx[voters]), np.pi)
    bins = np.minimum((theta / np.pi * DIRECTIONALITY_BINS).astype(int),
                      DIRECTIONALITY_BINS - 1)
    hist = np.bincount(bins, minlength=DIRECTIONALITY_BINS).astype(np.float64)
    hist /= hist.sum()
    peak = int(hist.argmax())
    dist = np.abs(np.arange(DIRECTIONALITY_BINS) - peak)
    dist = np.minimum(dist, DIRECTIONALITY_BINS - dist)  # circular bin distance
    moment = float((hist * dist.astype(np.float64) ** 2).sum())
    nb = DIRECTIONALITY_BINS
    d_uniform = np.abs(np.arange(nb))
    d_uniform = np.minimum(d_uniform, nb - d_uniform)
    uniform_moment = float((d_uniform.astype(np.float64) ** 2).sum()) / nb
    return Directionality(1.0 - moment / uniform_moment, False)


def tamura_features(img: np.ndarray) -> TamuraFeatures:
    return TamuraFeatures(tamura_coarseness(img), tamura_directionality(img).value)


# ---------------------------------------------------------------------------
# face features
# ---------------------------------------------------------------------------

def face_features(boxes: Sequence[FaceBox], img_w: int, img_h: int) -> FaceFeatures:
    """Count and largest relative area of externally supplied face boxes."""
    for b in boxes:
        if b.w <= 0 or b.h <= 0 or b.x < 0 or b.y < 0 \
                or b.x + b.w > img_w or b.y + b.h > img_h:
            raise BoxOutOfBounds(f"box {b} outside {img_w}x{img_h}")
    if not boxes:
        return FaceFeatures(0, 0.0)
    max_area = max(b.w * b.h for b in boxes)
    return FaceFeatures(len(boxes), max_area / (img_w * img_h))
