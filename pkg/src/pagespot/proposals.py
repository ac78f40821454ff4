"""Candidate-region proposals: selective search plus validity filtering.

The initial over-segmentation is merged greedily: at every step the pair of
neighboring regions with the highest combined color/texture/size/fill
similarity is fused, and every bounding box seen along the way becomes a
proposal. Two filters then prune the list: a size filter against tiny and
page-sized boxes, and an edge-density filter that rejects crops whose edge
image is mostly empty (stains, margins, bare background).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import imgproc
from .segmentation import SegmentLabels

COLOR_BINS = 25   # per HSV channel -> 75 total
TEXTURE_ORIENTATIONS = 8
TEXTURE_BINS = 10  # per orientation per channel -> 240 total
_TEXTURE_CLIP = 1.0


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned region in pixel units, (x, y) top-left, w/h >= 1."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box must have positive extent, got {self}")

    @property
    def area(self) -> int:
        return self.w * self.h

    def union(self, other: "BoundingBox") -> "BoundingBox":
        x = min(self.x, other.x)
        y = min(self.y, other.y)
        x2 = max(self.x + self.w, other.x + other.w)
        y2 = max(self.y + self.h, other.y + other.h)
        return BoundingBox(x, y, x2 - x, y2 - y)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class FilterParams:
    """Knobs of the proposal filters.

    ``alpha`` is the minimum mean edge density; a crop is invalid when its
    edge image's global mean falls below it, or when more than half of the
    eight sectors do. ``min_side``/``max_side_frac`` bound proposal geometry.
    """

    alpha: float = 0.06
    sector_count: int = 8
    min_side: int = 10
    max_side_frac: float = 0.9

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.sector_count != 8:
            raise ValueError("sector_count is fixed at 8")


@dataclass
class RegionNode:
    """Bookkeeping for one region in the merge hierarchy."""

    pixel_count: int
    bbox: BoundingBox
    color_hist: np.ndarray    # (75,) L1-normalized
    texture_hist: np.ndarray  # (240,) L1-normalized


@dataclass
class ProposeResult:
    """Filtered proposals plus stage counts for reporting."""

    boxes: list[BoundingBox]
    raw_count: int
    size_filtered_count: int
    valid_count: int = field(init=False)

    def __post_init__(self):
        self.valid_count = len(self.boxes)


def _texture_responses(img: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    """Gaussian-derivative responses at 8 orientations, shape (8, H, W, C)."""
    gx = np.empty_like(img)
    gy = np.empty_like(img)
    for c in range(img.shape[2]):
        gx[:, :, c] = ndimage.gaussian_filter(img[:, :, c], sigma, order=(0, 1), mode="reflect")
        gy[:, :, c] = ndimage.gaussian_filter(img[:, :, c], sigma, order=(1, 0), mode="reflect")
    thetas = np.arange(TEXTURE_ORIENTATIONS) * np.pi / TEXTURE_ORIENTATIONS
    return np.stack([np.cos(t) * gx + np.sin(t) * gy for t in thetas])


def region_histograms(img: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Color and texture histograms of one pixel mask (oracle-friendly path).

    Slow reference used by tests and small callers; the bulk path in
    :func:`selective_search` computes the same histograms for all segments in
    one pass.
    """
    rgb = imgproc.ensure_rgb(img)
    hsv = imgproc.rgb_to_hsv(rgb)
    color = np.zeros(3 * COLOR_BINS)
    bins = np.clip((hsv * COLOR_BINS).astype(np.intp), 0, COLOR_BINS - 1)
    for c in range(3):
        color[c * COLOR_BINS : (c + 1) * COLOR_BINS] = np.bincount(
            bins[:, :, c][mask], minlength=COLOR_BINS
        )
    color /= max(color.sum(), 1.0)

    responses = _texture_responses(rgb)
    scaled = (responses + _TEXTURE_CLIP) / (2.0 * _TEXTURE_CLIP)
    tbins = np.clip((scaled * TEXTURE_BINS).astype(np.intp), 0, TEXTURE_BINS - 1)
    texture = np.zeros(TEXTURE_ORIENTATIONS * TEXTURE_BINS * 3)
    i = 0
    for c in range(3):
        for o in range(TEXTURE_ORIENTATIONS):
            texture[i : i + TEXTURE_BINS] = np.bincount(
                tbins[o][:, :, c][mask], minlength=TEXTURE_BINS
            )
            i += TEXTURE_BINS
    texture /= max(texture.sum(), 1.0)
    return color, texture


def _all_segment_histograms(img: np.ndarray, labels: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Histograms for every segment at once via label-offset bincounts."""
    rgb = imgproc.ensure_rgb(img)
    hsv = imgproc.rgb_to_hsv(rgb)
    flat_labels = labels.ravel()

    color = np.empty((n, 3 * COLOR_BINS))
    bins = np.clip((hsv * COLOR_BINS).astype(np.intp), 0, COLOR_BINS - 1)
    for c in range(3):
        idx = flat_labels * COLOR_BINS + bins[:, :, c].ravel()
        counts = np.bincount(idx, minlength=n * COLOR_BINS).reshape(n, COLOR_BINS)
        color[:, c * COLOR_BINS : (c + 1) * COLOR_BINS] = counts

    responses = _texture_responses(rgb)
    scaled = (responses + _TEXTURE_CLIP) / (2.0 * _TEXTURE_CLIP)
    tbins = np.clip((scaled * TEXTURE_BINS).astype(np.intp), 0, TEXTURE_BINS - 1)
    texture = np.empty((n, TEXTURE_ORIENTATIONS * TEXTURE_BINS * 3))
    i = 0
    for c in range(3):
        for o in range(TEXTURE_ORIENTATIONS):
            idx = flat_labels * TEXTURE_BINS + tbins[o][:, :, c].ravel()
            counts = np.bincount(idx, minlength=n * TEXTURE_BINS).reshape(n, TEXTURE_BINS)
            texture[:, i : i + TEXTURE_BINS] = counts
            i += TEXTURE_BINS

    color /= np.maximum(color.sum(axis=1, keepdims=True), 1.0)
    texture /= np.maximum(texture.sum(axis=1, keepdims=True), 1.0)
    return color, texture


def region_similarity(a: RegionNode, b: RegionNode, image_size: int) -> float:
    """Combined color+texture+size+fill similarity, each component in [0, 1]."""
    s_color = np.minimum(a.color_hist, b.color_hist).sum()
    s_texture = np.minimum(a.texture_hist, b.texture_hist).sum()
    s_size = 1.0 - (a.pixel_count + b.pixel_count) / image_size
    union = a.bbox.union(b.bbox)
    s_fill = 1.0 - (union.area - a.pixel_count - b.pixel_count) / image_size
    s_size = min(max(s_size, 0.0), 1.0)
    s_fill = min(max(s_fill, 0.0), 1.0)
    return float(s_color + s_texture + s_size + s_fill)


def _segment_bboxes(labels: np.ndarray, n: int) -> list[BoundingBox]:
    slices = ndimage.find_objects(labels + 1, max_label=n)
    boxes = []
    for sl in slices:
        ys, xs = sl
        boxes.append(BoundingBox(xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start))
    return boxes


def _neighbor_pairs(labels: np.ndarray) -> set[tuple[int, int]]:
    """Pairs of segment ids that touch under 8-connectivity."""
    pairs: set[tuple[int, int]] = set()
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        h, w = labels.shape
        a = labels[0 : h - dy, max(0, -dx) : w - max(0, dx)]
        b = labels[dy:h, max(0, dx) : w + min(0, dx)]
        diff = a != b
        lo = np.minimum(a[diff], b[diff])
        hi = np.maximum(a[diff], b[diff])
        pairs.update(zip(lo.tolist(), hi.tolist()))
    return pairs


def selective_search(seg: SegmentLabels, img: np.ndarray) -> list[BoundingBox]:
    """All bounding boxes of the greedy merge hierarchy, deduplicated.

    Starts from the segmentation, repeatedly fuses the most similar
    neighboring pair (ties broken by the smaller region-id pair) until a
    single region remains. The returned order is: initial segment boxes by
    segment id, then one box per merge in merge order; exact duplicates keep
    their first position.
    """
    img = imgproc.check_image(img)
    if img.shape[:2] != seg.labels.shape:
        raise ValueError(
            f"segmentation {seg.labels.shape} does not match image {img.shape[:2]}"
        )
    n = seg.segment_count
    image_size = seg.labels.size

    color, texture = _all_segment_histograms(img, seg.labels, n)
    counts = np.bincount(seg.labels.ravel(), minlength=n)
    bboxes = _segment_bboxes(seg.labels, n)
    nodes: dict[int, RegionNode] = {
        i: RegionNode(int(counts[i]), bboxes[i], color[i], texture[i]) for i in range(n)
    }
    neighbors: dict[int, set[int]] = {i: set() for i in range(n)}
    sims: dict[tuple[int, int], float] = {}
    heap: list[tuple[float, int, int]] = []
    for (i, j) in _neighbor_pairs(seg.labels):
        neighbors[i].add(j)
        neighbors[j].add(i)
        s = region_similarity(nodes[i], nodes[j], image_size)
        sims[(i, j)] = s
        heap.append((-s, i, j))
    heapq.heapify(heap)

    boxes = [nodes[i].bbox for i in range(n)]
    next_id = n
    alive = set(range(n))
    while len(alive) > 1 and heap:
        neg_s, i, j = heapq.heappop(heap)
        if sims.get((i, j)) != -neg_s:
            continue  # stale entry for a merged or re-scored pair
        del sims[(i, j)]
        a, b = nodes.pop(i), nodes.pop(j)
        alive.discard(i)
        alive.discard(j)
        merged = RegionNode(
            pixel_count=a.pixel_count + b.pixel_count,
            bbox=a.bbox.union(b.bbox),
            color_hist=(a.pixel_count * a.color_hist + b.pixel_count * b.color_hist)
            / (a.pixel_count + b.pixel_count),
            texture_hist=(a.pixel_count * a.texture_hist + b.pixel_count * b.texture_hist)
            / (a.pixel_count + b.pixel_count),
        )
        t = next_id
        next_id += 1
        nodes[t] = merged
        alive.add(t)
        boxes.append(merged.bbox)

        merged_neighbors = (neighbors.pop(i) | neighbors.pop(j)) - {i, j}
        neighbors[t] = merged_neighbors
        for u in merged_neighbors:
            neighbors[u].discard(i)
            neighbors[u].discard(j)
            neighbors[u].add(t)
            sims.pop((min(i, u), max(i, u)), None)
            sims.pop((min(j, u), max(j, u)), None)
            s = region_similarity(nodes[u], merged, image_size)
            sims[(u, t)] = s
            heapq.heappush(heap, (-s, u, t))

    seen: set[tuple[int, int, int, int]] = set()
    out = []
    for box in boxes:
        key = box.as_tuple()
        if key not in seen:
            seen.add(key)
            out.append(box)
    return out


def sector_validity(edge_image: np.ndarray, alpha: float) -> bool:
    """Edge-density test on a binary edge map.

    Rejects when the global mean is below ``alpha`` or when more than four of
    the eight sectors fall below it. Sectors are equal-width vertical strips
    (horizontal strips when the image is narrower than 8 px; the global test
    alone when both dimensions are).
    """
    edge = np.asarray(edge_image, dtype=np.float64)
    if imgproc.mean_intensity(edge) < alpha:
        return False
    if edge.shape[1] >= 8:
        sectors = np.array_split(edge, 8, axis=1)
    elif edge.shape[0] >= 8:
        sectors = np.array_split(edge, 8, axis=0)
    else:
        return True
    invalid = 0
    for sector in sectors:
        if sector.mean() < alpha:
            invalid += 1
            if invalid > 4:
                return False
    return True


def filter_invalid_region(
    crop: np.ndarray,
    params: FilterParams,
    edge_low: float = imgproc.EDGE_LOW,
    edge_high: float = imgproc.EDGE_HIGH,
) -> bool:
    """True when the crop's edge image passes the density test."""
    crop = imgproc.check_image(crop)
    gray = imgproc.to_grayscale(crop) if crop.ndim == 3 else crop
    edges = imgproc.edge_binarize(gray, low=edge_low, high=edge_high)
    return sector_validity(edges, params.alpha)


def size_filter(box: BoundingBox, page_w: int, page_h: int, params: FilterParams) -> bool:
    """True when the box is neither too small nor nearly page-sized."""
    return (
        box.w >= params.min_side
        and box.h >= params.min_side
        and box.w <= params.max_side_frac * page_w
        and box.h <= params.max_side_frac * page_h
    )


def propose(
    page: np.ndarray,
    params: FilterParams = FilterParams(),
    *,
    seg_k: float | None = None,
    seg_min_size: int | None = None,
    seg_sigma: float | None = None,
    edge_low: float = imgproc.EDGE_LOW,
    edge_high: float = imgproc.EDGE_HIGH,
) -> ProposeResult:
    """Full proposal pipeline for one page: segment, merge, filter.

    Returns the surviving boxes in proposal order together with the raw and
    size-filtered counts so callers can report the reduction.
    """
    from . import segmentation

    page = imgproc.check_image(page)
    seg_kwargs = {}
    if seg_k is not None:
        seg_kwargs["k"] = seg_k
    if seg_min_size is not None:
        seg_kwargs["min_size"] = seg_min_size
    if seg_sigma is not None:
        seg_kwargs["sigma"] = seg_sigma
    seg = segmentation.felzenszwalb_segment(page, **seg_kwargs)
    raw = selective_search(seg, page)

    page_h, page_w = page.shape[:2]
    sized = [b for b in raw if size_filter(b, page_w, page_h, params)]
    valid = [
        b
        for b in sized
        if filter_invalid_region(
            page[b.y : b.y + b.h, b.x : b.x + b.w], params, edge_low, edge_high
        )
    ]
    return ProposeResult(boxes=valid, raw_count=len(raw), size_filtered_count=len(sized))
