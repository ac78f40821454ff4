"""Deterministic image-processing primitives: grayscale, resize, edge maps.

Images are numpy arrays with values in [0, 1]: grayscale ``(H, W)`` or RGB
``(H, W, 3)``, float64. Binary images are boolean ``(H, W)`` arrays. All
functions are pure and safe to call from concurrent workers.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

# Default Canny pipeline parameters. The smoothing scale and hysteresis
# thresholds are configuration, not derived quantities; thresholds apply to
# gradient magnitude normalized by the theoretical Sobel maximum on [0,1]
# inputs (4*sqrt(2)), so they are stable across image content.
EDGE_SIGMA = 1.0
EDGE_LOW = 0.1
EDGE_HIGH = 0.2

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T
_SOBEL_MAX = 4.0 * np.sqrt(2.0)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def check_image(img: np.ndarray, *, gray: bool | None = None) -> np.ndarray:
    """Validate an image array and return it as float64.

    ``gray=True`` requires a single-channel image, ``gray=False`` requires
    RGB, ``None`` accepts either.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        channels = 1
    elif img.ndim == 3 and img.shape[2] == 3:
        channels = 3
    else:
        raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image must be at least 1x1, got shape {img.shape}")
    if gray is True and channels != 1:
        raise ValueError("expected a grayscale image, got 3 channels")
    if gray is False and channels != 3:
        raise ValueError("expected an RGB image, got 1 channel")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("pixel values must lie in [0, 1]")
    return img


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Convert RGB to luminance (0.299 R + 0.587 G + 0.114 B).

    Rejects single-channel input: passing an already-gray image through a
    conversion is almost always a caller bug.
    """
    img = check_image(img, gray=False)
    r, g, b = LUMA_WEIGHTS
    out = r * img[:, :, 0] + g * img[:, :, 1] + b * img[:, :, 2]
    return np.clip(out, 0.0, 1.0)


def ensure_rgb(img: np.ndarray) -> np.ndarray:
    """Return a 3-channel view of the image, replicating grayscale."""
    img = check_image(img)
    if img.ndim == 2:
        return np.repeat(img[:, :, None], 3, axis=2)
    return img


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """Vectorized RGB -> HSV, all channels in [0, 1] (hue wraps at 1)."""
    img = check_image(img, gray=False)
    r, g, b = img[:, :, 0], img[:, :, 1], img[:, :, 2]
    maxc = img.max(axis=2)
    minc = img.min(axis=2)
    delta = maxc - minc
    v = maxc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    # Hue sector depends on which channel attains the max.
    h = np.zeros_like(maxc)
    safe = np.where(delta > 0, delta, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(maxc == r, bc - gc, h)
    h = np.where((maxc == g) & (maxc != r), 2.0 + rc - bc, h)
    h = np.where((maxc == b) & (maxc != r) & (maxc != g), 4.0 + gc - rc, h)
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=2)


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Resize with center-aligned bilinear sampling (half-pixel offsets).

    Sample centers at ``(i + 0.5) * in/out - 0.5``, clamped to the source
    grid, so results match the convention of common image libraries. Output
    values stay within the input's [min, max] range.
    """
    img = check_image(img)
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target size must be >= 1, got {out_w}x{out_h}")
    in_h, in_w = img.shape[:2]

    sx = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    sy = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = sx - x0
    fy = sy - y0

    if img.ndim == 3:
        fx = fx[None, :, None]
        fy = fy[:, None, None]
    else:
        fx = fx[None, :]
        fy = fy[:, None]

    top = img[np.ix_(y0, x0)] * (1.0 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1.0 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bot * fy


def gradient_magnitude(gray: np.ndarray, sigma: float = EDGE_SIGMA) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gaussian-smoothed Sobel gradients: returns (normalized magnitude, gx, gy)."""
    gray = check_image(gray, gray=True)
    smoothed = ndimage.gaussian_filter(gray, sigma=sigma, mode="reflect")
    gx = ndimage.correlate(smoothed, _SOBEL_X, mode="reflect")
    gy = ndimage.correlate(smoothed, _SOBEL_Y, mode="reflect")
    mag = np.hypot(gx, gy) / _SOBEL_MAX
    return mag, gx, gy


def _nonmax_suppress(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin ridges of the gradient magnitude to 1-pixel curves.

    The gradient direction is quantized to four sectors; a pixel survives if
    its magnitude is >= the neighbor before it along the gradient line and
    strictly > the neighbor after it. The asymmetric tie rule keeps exactly
    one pixel on the two-pixel plateau a symmetric step edge produces.
    """
    h, w = mag.shape
    padded = np.zeros((h + 2, w + 2))
    padded[1:-1, 1:-1] = mag

    def shifted(dy: int, dx: int) -> np.ndarray:
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    angle = np.mod(np.arctan2(gy, gx), np.pi)
    sector = np.floor_divide(angle + np.pi / 8.0, np.pi / 4.0).astype(np.intp) % 4
    # Per sector: (before, after) neighbor offsets along the gradient line.
    offsets = {
        0: ((0, -1), (0, 1)),    # horizontal gradient -> left/right
        1: ((-1, -1), (1, 1)),   # 45 degrees
        2: ((-1, 0), (1, 0)),    # vertical gradient -> up/down
        3: ((-1, 1), (1, -1)),   # 135 degrees
    }
    keep = np.zeros_like(mag, dtype=bool)
    for s, (before, after) in offsets.items():
        in_sector = sector == s
        keep |= in_sector & (mag >= shifted(*before)) & (mag > shifted(*after))
    return keep


def edge_binarize(
    gray: np.ndarray,
    low: float = EDGE_LOW,
    high: float = EDGE_HIGH,
    sigma: float = EDGE_SIGMA,
) -> np.ndarray:
    """Canny-style edge map: smooth, Sobel, non-maximum suppression, hysteresis.

    Thresholds apply to the normalized gradient magnitude (see module
    constants). Weak edge pixels (>= low) are kept only when 8-connected to a
    strong pixel (>= high). Returns a boolean (H, W) array.
    """
    if not (0.0 <= low <= high <= 1.0):
        raise ValueError(f"thresholds must satisfy 0 <= low <= high <= 1, got {low}, {high}")
    mag, gx, gy = gradient_magnitude(gray, sigma=sigma)
    thinned = _nonmax_suppress(mag, gx, gy)
    strong = thinned & (mag >= high)
    weak = thinned & (mag >= low)
    if not strong.any():
        return np.zeros_like(weak)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return keep[labels]


def mean_intensity(img: np.ndarray) -> float:
    """Arithmetic mean of all pixel values (works on binary and gray/RGB images)."""
    arr = np.asarray(img)
    if arr.size == 0:
        raise ValueError("mean_intensity of an empty image is undefined")
    return float(arr.mean())


def load_image(path: str | Path) -> np.ndarray:
    """Decode a PNG or JPEG file to an RGB or grayscale [0,1] image."""
    with PILImage.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float64) / 255.0
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def save_png(img: np.ndarray, path: str | Path) -> None:
    """Write a [0,1] image as 8-bit PNG (deterministic for identical pixels)."""
    img = check_image(img)
    data = np.round(img * 255.0).astype(np.uint8)
    mode = "L" if data.ndim == 2 else "RGB"
    PILImage.fromarray(data, mode=mode).save(path, format="PNG")
