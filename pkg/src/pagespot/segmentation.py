"""Graph-based image segmentation (Felzenszwalb-Huttenlocher).

Single-scale segmentation seeding the region-merging proposal stage. Pixels
are nodes of an 8-connected grid graph; edges are weighted by Euclidean
color distance and processed in ascending order. Two components merge when
the connecting edge weight is no larger than

    min(Int(C1) + k/|C1|, Int(C2) + k/|C2|)

where Int(C) is the largest weight in the component's minimum spanning tree.
A final pass merges components smaller than ``min_size``. Weights are
computed on a 0-255 color scale so the conventional defaults for ``k`` keep
their meaning on [0,1] inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imgproc import check_image

DEFAULT_K = 200.0
DEFAULT_MIN_SIZE = 50
DEFAULT_SIGMA = 0.8

_WEIGHT_SCALE = 255.0


@dataclass(frozen=True)
class SegmentLabels:
    """Per-pixel segment ids in a contiguous range [0, segment_count)."""

    labels: np.ndarray  # (H, W) intp
    segment_count: int

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


class _UnionFind:
    """Union-find over pixel indices with component size bookkeeping."""

    __slots__ = ("parent", "rank", "size")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        """Merge the components rooted at a and b; returns the new root."""
        if self.rank[a] < self.rank[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        if self.rank[a] == self.rank[b]:
            self.rank[a] += 1
        return a


def _grid_edges(img: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """8-connectivity edges (a, b, weight) with a < b, row-major pixel ids."""
    h, w = img.shape[:2]
    if img.ndim == 2:
        img = img[:, :, None]
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)

    pairs_a = []
    pairs_b = []
    weights = []
    # (dy, dx) for right, down, down-right, down-left; each pixel pairs once.
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        ys = slice(0, h - dy)
        xs = slice(max(0, -dx), w - max(0, dx))
        ys2 = slice(dy, h)
        xs2 = slice(max(0, dx), w + min(0, dx))
        a = idx[ys, xs].ravel()
        b = idx[ys2, xs2].ravel()
        diff = img[ys, xs, :] - img[ys2, xs2, :]
        wgt = np.sqrt((diff * diff).sum(axis=2)).ravel() * _WEIGHT_SCALE
        pairs_a.append(a)
        pairs_b.append(b)
        weights.append(wgt)
    a = np.concatenate(pairs_a)
    b = np.concatenate(pairs_b)
    wgt = np.concatenate(weights)
    # a < b holds for all offsets except down-left; normalize.
    swap = a > b
    a[swap], b[swap] = b[swap], a[swap]
    return a, b, wgt


def _merge_sorted_edges(
    edges_a: list[int], edges_b: list[int], edge_w: list[float], n: int, k: float, min_size: int
) -> np.ndarray:
    """Run the merge predicate over pre-sorted edges; returns per-pixel roots."""
    uf = _UnionFind(n)
    # Int(C) per root; threshold tau(C) = Int(C) + k / |C|.
    threshold = [k] * n
    find = uf.find
    size = uf.size
    for ea, eb, ew in zip(edges_a, edges_b, edge_w):
        ra = find(ea)
        rb = find(eb)
        if ra == rb:
            continue
        if ew <= threshold[ra] and ew <= threshold[rb]:
            root = uf.union(ra, rb)
            threshold[root] = ew + k / size[root]

    # Post-pass: absorb undersized components, again in ascending edge order.
    for ea, eb in zip(edges_a, edges_b):
        ra = find(ea)
        rb = find(eb)
        if ra != rb and (size[ra] < min_size or size[rb] < min_size):
            uf.union(ra, rb)

    return np.fromiter((find(i) for i in range(n)), dtype=np.int64, count=n)


def _labels_from_roots(roots: np.ndarray, h: int, w: int) -> SegmentLabels:
    """Relabel roots to a contiguous range ordered by first appearance."""
    uniq, first_idx, inverse = np.unique(roots, return_index=True, return_inverse=True)
    remap = np.empty(len(uniq), dtype=np.intp)
    remap[np.argsort(first_idx, kind="stable")] = np.arange(len(uniq))
    return SegmentLabels(labels=remap[inverse].reshape(h, w), segment_count=len(uniq))


def felzenszwalb_segment(
    img: np.ndarray,
    k: float = DEFAULT_K,
    min_size: int = DEFAULT_MIN_SIZE,
    sigma: float = DEFAULT_SIGMA,
) -> SegmentLabels:
    """Segment an RGB or grayscale image; see module docstring for the predicate.

    Equal-weight edges are processed in (smaller pixel index, larger pixel
    index) order, making the result fully deterministic.
    """
    img = check_image(img)
    if k <= 0:
        raise ValueError(f"scale parameter k must be positive, got {k}")
    if min_size < 1:
        raise ValueError(f"min_size must be >= 1, got {min_size}")
    if sigma > 0:
        if img.ndim == 3:
            img = ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0), mode="reflect")
        else:
            img = ndimage.gaussian_filter(img, sigma=sigma, mode="reflect")

    h, w = img.shape[:2]
    a, b, wgt = _grid_edges(img)
    order = np.lexsort((b, a, wgt))
    roots = _merge_sorted_edges(
        a[order].tolist(), b[order].tolist(), wgt[order].tolist(), h * w, k, min_size
    )
    return _labels_from_roots(roots, h, w)
