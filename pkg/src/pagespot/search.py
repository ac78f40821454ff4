"""Online phase: rank every indexed region against a query.

Both modes do a full scan. Euclidean mode measures float32 distances on the
stored vectors; hamming mode binarizes the query with the index's own
thresholds and counts differing bits. Results are totally ordered (distance
ascending, region id as tie-break) so rankings are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import features as feat
from . import hashing
from .index import SearchIndex
from .proposals import BoundingBox

MODES = ("euclidean", "hamming")


@dataclass(frozen=True)
class QueryResult:
    region_id: int
    page_id: str
    bbox: BoundingBox
    distance: float
    rank: int


@dataclass(frozen=True)
class PostProcessParams:
    """Union post-processing: near-duplicate suppression on the top pool."""

    pool_size: int = 3000
    union_iou: float = 0.85

    def __post_init__(self):
        if not (0.0 < self.union_iou < 1.0):
            raise ValueError(f"union_iou must be in (0, 1), got {self.union_iou}")
        if self.pool_size < 1:
            raise ValueError(f"pool_size must be >= 1, got {self.pool_size}")


def euclidean_scan(vectors: np.ndarray, query: np.ndarray) -> np.ndarray:
    """float32 Euclidean distance from the query to every row."""
    q = np.asarray(query, dtype=np.float32)
    diff = vectors - q
    return np.sqrt(np.einsum("ij,ij->i", diff, diff, dtype=np.float32))


def query_vector_for(index: SearchIndex, query_img: np.ndarray) -> np.ndarray:
    """Extract and condition a query vector the same way the index was built."""
    if index.profile.kind != "builtin-baseline":
        raise ValueError(
            f"index profile {index.profile.name!r} holds external features; "
            "query images require the builtin extractor, pass a vector instead"
        )
    vec = feat.extract_baseline(query_img)
    if index.normalized:
        norm = np.linalg.norm(vec)
        if norm > 0.0:
            vec = vec / norm
    return vec.astype(np.float32)


def query(
    index: SearchIndex,
    query_img: np.ndarray | None = None,
    query_vec: np.ndarray | None = None,
    mode: str = "euclidean",
    n: int = 100,
) -> list[QueryResult]:
    """Rank all candidates against the query; return the top n.

    Exactly one of ``query_img`` / ``query_vec`` must be given. With fewer
    than n candidates, all of them come back (no padding).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if (query_img is None) == (query_vec is None):
        raise ValueError("pass exactly one of query_img or query_vec")
    if len(index) == 0:
        raise ValueError("cannot query an empty index")

    if query_img is not None:
        vec = query_vector_for(index, query_img)
    else:
        vec = np.asarray(query_vec, dtype=np.float32)
        if vec.shape != (index.profile.dims,):
            raise ValueError(
                f"query vector shape {vec.shape} != profile dims ({index.profile.dims},)"
            )

    if mode == "euclidean":
        distances = euclidean_scan(index.vectors, vec)
    else:
        code = hashing.binarize(vec, index.binarizer)
        distances = hashing.hamming_scan(index.codes, code)

    ids = index.region_ids
    order = np.lexsort((ids, distances))[:n]
    results = []
    for rank, idx in enumerate(order.tolist(), start=1):
        e = index.entries[idx]
        results.append(
            QueryResult(
                region_id=e.region_id,
                page_id=e.page_id,
                bbox=e.bbox,
                distance=float(distances[idx]),
                rank=rank,
            )
        )
    return results


def postprocess_union(
    results: list[QueryResult], params: PostProcessParams = PostProcessParams()
) -> list[QueryResult]:
    """Greedy near-duplicate suppression over the best ``pool_size`` results.

    Scanning in rank order, a result is dropped when it overlaps an already
    kept result on the same page with IoU above the threshold; the earlier
    (smaller-distance) box wins. Ranks are reassigned 1..m.
    """
    pool = results[: params.pool_size]
    kept: list[QueryResult] = []
    kept_boxes: dict[str, list[tuple[int, int, int, int]]] = {}
    for r in pool:
        boxes = kept_boxes.get(r.page_id)
        if boxes:
            arr = np.asarray(boxes, dtype=np.float64)
            x1 = np.maximum(arr[:, 0], r.bbox.x)
            y1 = np.maximum(arr[:, 1], r.bbox.y)
            x2 = np.minimum(arr[:, 0] + arr[:, 2], r.bbox.x + r.bbox.w)
            y2 = np.minimum(arr[:, 1] + arr[:, 3], r.bbox.y + r.bbox.h)
            inter = np.maximum(x2 - x1, 0.0) * np.maximum(y2 - y1, 0.0)
            union = arr[:, 2] * arr[:, 3] + r.bbox.area - inter
            if (inter / union > params.union_iou).any():
                continue
        kept.append(r)
        kept_boxes.setdefault(r.page_id, []).append(r.bbox.as_tuple())
    return [replace(r, rank=i + 1) for i, r in enumerate(kept)]


def ir_page_list(results: list[QueryResult]) -> list[str]:
    """Pages in order of their best-ranked occurrence, each page once."""
    return list(dict.fromkeys(r.page_id for r in results))
