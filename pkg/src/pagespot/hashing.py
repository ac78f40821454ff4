"""Binary hash codes: threshold real vectors into bit-packed words.

Codes are stored as rows of 64-bit words, little-endian bit order (dimension
``64*j + i`` is bit ``i`` of word ``j``); padding bits above ``dims`` are
always zero. Distances are exact Hamming counts computed with XOR and a
native population count, which is what makes binary-mode scans cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .features import MagicHeaderError, TruncatedFileError

CODE_MAGIC = b"PSHASH01"


@dataclass(frozen=True)
class BinarizerParams:
    """Per-dimension thresholds learned from a feature corpus."""

    thresholds: np.ndarray

    @property
    def dims(self) -> int:
        return len(self.thresholds)


def words_per_code(dims: int) -> int:
    return (dims + 63) // 64


def fit_binarizer(features: np.ndarray) -> BinarizerParams:
    """Per-dimension corpus median as the binarization threshold.

    The median keeps bits roughly balanced, which is the point of hashing:
    a dimension that always lands on one side carries no information.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError(f"need a non-empty (N, dims) feature matrix, got shape {features.shape}")
    if not np.isfinite(features).all():
        raise ValueError("features must be finite to fit thresholds")
    return BinarizerParams(thresholds=np.median(features, axis=0))


def binarize(vectors: np.ndarray, params: BinarizerParams) -> np.ndarray:
    """Pack ``v > threshold`` bits into (N, words) uint64 rows.

    Accepts a single vector or a matrix; a single vector returns shape
    (words,). The comparison is strict, so values exactly at the threshold
    map to 0.
    """
    arr = np.asarray(vectors, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] != params.dims:
        raise ValueError(f"vector dims {arr.shape[1]} != binarizer dims {params.dims}")
    bits = (arr > params.thresholds).astype(np.uint8)
    packed = np.packbits(bits, axis=1, bitorder="little")
    n_words = words_per_code(params.dims)
    padded = np.zeros((arr.shape[0], n_words * 8), dtype=np.uint8)
    padded[:, : packed.shape[1]] = packed
    words = padded.view("<u8")
    return words[0] if single else words


def unpack_bits(codes: np.ndarray, dims: int) -> np.ndarray:
    """Inverse of :func:`binarize`'s packing: (N, dims) uint8 bits."""
    codes = np.atleast_2d(codes).astype("<u8")
    as_bytes = codes.view(np.uint8).reshape(codes.shape[0], -1)
    bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
    return bits[:, :dims]


def canonicalize(codes: np.ndarray, dims: int) -> np.ndarray:
    """Zero any padding bits beyond ``dims`` (defensive re-masking)."""
    codes = np.atleast_2d(np.asarray(codes, dtype=np.uint64)).copy()
    n_words = words_per_code(dims)
    if codes.shape[1] != n_words:
        raise ValueError(f"expected {n_words} words per code, got {codes.shape[1]}")
    tail = dims % 64
    if tail:
        mask = np.uint64((1 << tail) - 1)
        codes[:, -1] &= mask
    return codes


def hamming_distance(q: np.ndarray, p: np.ndarray) -> int:
    """Number of differing bits between two packed codes of equal dims."""
    q = np.asarray(q, dtype=np.uint64)
    p = np.asarray(p, dtype=np.uint64)
    if q.shape != p.shape:
        raise ValueError(f"code shapes differ: {q.shape} vs {p.shape}")
    return int(np.bitwise_count(q ^ p).sum(dtype=np.int64))


def hamming_scan(codes: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Hamming distance from one query code to every row of ``codes``."""
    codes = np.asarray(codes, dtype=np.uint64)
    query = np.asarray(query, dtype=np.uint64)
    if codes.ndim != 2 or codes.shape[1] != query.shape[0]:
        raise ValueError(f"codes {codes.shape} incompatible with query {query.shape}")
    return np.bitwise_count(codes ^ query).sum(axis=1, dtype=np.int64)


class MedianBinarizer(BaseEstimator, TransformerMixin):
    """sklearn-style binarizer: fit learns medians, transform packs codes."""

    def fit(self, X, y=None):
        self.params_ = fit_binarizer(X)
        return self

    def transform(self, X) -> np.ndarray:
        return binarize(X, self.params_)


def write_code_file(path: str | Path, region_ids: np.ndarray, codes: np.ndarray, dims: int) -> None:
    """Write packed codes in the PSHASH01 format."""
    codes = np.ascontiguousarray(codes, dtype="<u8")
    region_ids = np.ascontiguousarray(region_ids, dtype="<u8")
    n_words = words_per_code(dims)
    if codes.ndim != 2 or codes.shape[1] != n_words:
        raise ValueError(f"expected (N, {n_words}) code matrix for dims {dims}, got {codes.shape}")
    if len(region_ids) != len(codes):
        raise ValueError("region id count does not match code count")
    record = np.dtype([("id", "<u8"), ("words", "<u8", (n_words,))])
    records = np.empty(len(codes), dtype=record)
    records["id"] = region_ids
    records["words"] = codes
    with open(path, "wb") as fh:
        fh.write(CODE_MAGIC)
        fh.write(np.uint32(len(codes)).tobytes())
        fh.write(np.uint32(dims).tobytes())
        fh.write(records.tobytes())


def load_code_file(path: str | Path) -> tuple[np.ndarray, np.ndarray, int]:
    """Load a PSHASH01 file; returns (region_ids, codes, dims)."""
    raw = Path(path).read_bytes()
    if raw[:8] != CODE_MAGIC:
        raise MagicHeaderError(f"{path}: expected magic {CODE_MAGIC!r}, got {raw[:8]!r}")
    if len(raw) < 16:
        raise TruncatedFileError(f"{path}: header truncated ({len(raw)} bytes)")
    count = int(np.frombuffer(raw, dtype="<u4", count=1, offset=8)[0])
    dims = int(np.frombuffer(raw, dtype="<u4", count=1, offset=12)[0])
    n_words = words_per_code(dims)
    record = np.dtype([("id", "<u8"), ("words", "<u8", (n_words,))])
    need = count * record.itemsize
    payload = raw[16:]
    if len(payload) < need:
        raise TruncatedFileError(
            f"{path}: payload holds {len(payload)} bytes, header declares {need}"
        )
    records = np.frombuffer(payload[:need], dtype=record)
    return records["id"].copy(), records["words"].reshape(count, n_words).copy(), dims
