"""Feature extraction and the on-disk feature-vector format.

Two sources of features exist: a deterministic built-in descriptor that
keeps the whole pipeline testable without any trained network, and ingestion
of externally computed vectors in the ``PSFEAT01`` binary format (magic,
little-endian u32 count and dims, then per record a u64 region id followed
by dims float32 values, no padding).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import imgproc

FEATURE_MAGIC = b"PSFEAT01"

BASELINE_DIMS = 640
_GRID = 4
_CELL = 224 // _GRID
_ORIENT_BINS = 8
_MAG_BINS = 5
_MAG_RANGE = 0.5  # central-difference magnitudes of [0,1] images rarely exceed this


class FeatureFileError(ValueError):
    """Base class for feature/code file integrity problems."""


class MagicHeaderError(FeatureFileError):
    """The file does not start with the expected magic bytes."""


class TruncatedFileError(FeatureFileError):
    """The payload is shorter than the header declares."""


class DimensionMismatchError(FeatureFileError):
    """Declared dimensionality disagrees with the expected profile."""


@dataclass(frozen=True)
class ExtractorProfile:
    """Identity and dimensionality of a feature source."""

    name: str
    dims: int
    kind: str  # "builtin-baseline" | "external"

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError(f"profile dims must be positive, got {self.dims}")
        if self.kind not in ("builtin-baseline", "external"):
            raise ValueError(f"unknown profile kind {self.kind!r}")


BASELINE_PROFILE = ExtractorProfile("baseline-grid", BASELINE_DIMS, "builtin-baseline")

# External profiles named by the network taps that produce them.
KNOWN_PROFILES = {
    p.name: p
    for p in (
        BASELINE_PROFILE,
        ExtractorProfile("resnet50v2-conv", 100352, "external"),
        ExtractorProfile("resnet50v2-gapool", 2048, "external"),
        ExtractorProfile("vgg19-blocks", 1472, "external"),
        ExtractorProfile("vgg19-block4-5", 1024, "external"),
        ExtractorProfile("vgg19-block2-3", 384, "external"),
        ExtractorProfile("vgg19-block2-5", 640, "external"),
        ExtractorProfile("alexnet-fc", 4096, "external"),
    )
}


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit Euclidean norm, preserving direction.

    A zero vector cannot be normalized; it is returned unchanged and a
    RuntimeWarning is emitted so callers can spot the degenerate case.
    """
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        warnings.warn("l2_normalize: zero vector left unchanged", RuntimeWarning, stacklevel=2)
        return v.copy()
    return v / norm


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Row-wise unit normalization; zero rows pass through unchanged."""
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix / np.where(norms == 0.0, 1.0, norms)


def extract_baseline(crop: np.ndarray) -> np.ndarray:
    """Deterministic 640-dim grid descriptor of a crop.

    The crop is resized to 224x224 and divided into a 4x4 grid. Each cell
    contributes 40 dims: 3 mean colors, an 8-bin gradient-orientation
    histogram of the luminance, 8-bin orientation histograms of each RGB
    channel, and a 5-bin gradient-magnitude histogram (all gradient votes
    magnitude-weighted, so a uniform brightness shift leaves them unchanged).
    Color and gradient sub-blocks are L2-normalized separately per cell.
    """
    crop = imgproc.check_image(crop)
    if crop.size == 0:
        raise ValueError("cannot extract features from an empty crop")
    rgb = imgproc.ensure_rgb(imgproc.resize_bilinear(crop, 224, 224))
    luma = (
        imgproc.LUMA_WEIGHTS[0] * rgb[:, :, 0]
        + imgproc.LUMA_WEIGHTS[1] * rgb[:, :, 1]
        + imgproc.LUMA_WEIGHTS[2] * rgb[:, :, 2]
    )

    n_cells = _GRID * _GRID
    cell_row = np.arange(224) // _CELL
    cells = (cell_row[:, None] * _GRID + cell_row[None, :]).ravel()

    def orientation_hist(channel: np.ndarray) -> np.ndarray:
        gy, gx = np.gradient(channel)
        mag = np.hypot(gx, gy).ravel()
        theta = np.arctan2(gy, gx).ravel()
        obin = np.clip(
            ((theta + np.pi) / (2.0 * np.pi) * _ORIENT_BINS).astype(np.intp),
            0,
            _ORIENT_BINS - 1,
        )
        hist = np.bincount(cells * _ORIENT_BINS + obin, weights=mag, minlength=n_cells * _ORIENT_BINS)
        return hist.reshape(n_cells, _ORIENT_BINS), mag

    luma_hist, luma_mag = orientation_hist(luma)
    chan_hists = [orientation_hist(rgb[:, :, c])[0] for c in range(3)]

    mbin = np.clip((luma_mag / _MAG_RANGE * _MAG_BINS).astype(np.intp), 0, _MAG_BINS - 1)
    mag_hist = np.bincount(
        cells * _MAG_BINS + mbin, weights=luma_mag, minlength=n_cells * _MAG_BINS
    ).reshape(n_cells, _MAG_BINS)

    counts = np.bincount(cells, minlength=n_cells).astype(np.float64)
    means = np.stack(
        [np.bincount(cells, weights=rgb[:, :, c].ravel(), minlength=n_cells) / counts for c in range(3)],
        axis=1,
    )

    out = np.empty((n_cells, 40))
    color_block = means
    grad_block = np.concatenate([luma_hist] + chan_hists + [mag_hist], axis=1)
    color_norm = np.linalg.norm(color_block, axis=1, keepdims=True)
    grad_norm = np.linalg.norm(grad_block, axis=1, keepdims=True)
    out[:, :3] = color_block / np.where(color_norm == 0.0, 1.0, color_norm)
    out[:, 3:] = grad_block / np.where(grad_norm == 0.0, 1.0, grad_norm)
    return out.ravel()


class BaselineExtractor(BaseEstimator, TransformerMixin):
    """sklearn-style wrapper over :func:`extract_baseline`.

    Stateless; ``transform`` maps a list of crops to an (N, 640) matrix.
    """

    profile = BASELINE_PROFILE

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        return np.stack([extract_baseline(crop) for crop in X])


def write_feature_file(path: str | Path, region_ids: np.ndarray, vectors: np.ndarray) -> None:
    """Write vectors in the PSFEAT01 format (float32, little-endian)."""
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    region_ids = np.ascontiguousarray(region_ids, dtype="<u8")
    if vectors.ndim != 2:
        raise ValueError(f"expected an (N, dims) matrix, got shape {vectors.shape}")
    if len(region_ids) != len(vectors):
        raise ValueError("region id count does not match vector count")
    count, dims = vectors.shape
    record = np.dtype([("id", "<u8"), ("vec", "<f4", (dims,))])
    records = np.empty(count, dtype=record)
    records["id"] = region_ids
    records["vec"] = vectors
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(np.uint32(count).tobytes())
        fh.write(np.uint32(dims).tobytes())
        fh.write(records.tobytes())


def load_external_features(
    path: str | Path, expected: ExtractorProfile
) -> tuple[np.ndarray, np.ndarray]:
    """Load a PSFEAT01 file, checking dims against the profile.

    Returns (region_ids, vectors) with vectors as float32 (N, dims).
    """
    raw = Path(path).read_bytes()
    if raw[:8] != FEATURE_MAGIC:
        raise MagicHeaderError(f"{path}: expected magic {FEATURE_MAGIC!r}, got {raw[:8]!r}")
    if len(raw) < 16:
        raise TruncatedFileError(f"{path}: header truncated ({len(raw)} bytes)")
    count = int(np.frombuffer(raw, dtype="<u4", count=1, offset=8)[0])
    dims = int(np.frombuffer(raw, dtype="<u4", count=1, offset=12)[0])
    if dims != expected.dims:
        raise DimensionMismatchError(
            f"{path}: file declares dims {dims}, profile {expected.name!r} expects {expected.dims}"
        )
    record = np.dtype([("id", "<u8"), ("vec", "<f4", (dims,))])
    need = count * record.itemsize
    payload = raw[16:]
    if len(payload) < need:
        raise TruncatedFileError(
            f"{path}: payload holds {len(payload)} bytes, header declares {need}"
        )
    records = np.frombuffer(payload[:need], dtype=record)
    return records["id"].copy(), records["vec"].reshape(count, dims).copy()
