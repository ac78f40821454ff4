"""Synthetic page corpus with planted glyphs and exact ground truth.

Pages imitate scanned manuscript texture cheaply: a warm base tone, low
amplitude pixel noise and faint ruled lines (so the invalid-region filter
has something to reject). Each glyph class is a fixed high-contrast ink
stamp; every planted instance is recorded in the ground truth, and queries
are cut straight from the first instance of each class. Output is a pure
function of the spec's seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evaluation import GroundTruth, QueryTruth, save_ground_truth
from .imgproc import save_png
from .proposals import BoundingBox

_BASE_TONE = np.array([0.87, 0.84, 0.78])
_LINE_DROP = 0.04
_LINE_SPACING = 24
_MARGIN = 6
_SEPARATION = 4


@dataclass(frozen=True)
class SynthSpec:
    page_count: int = 20
    page_w: int = 320
    page_h: int = 240
    glyph_classes: int = 5
    plants_per_page: int = 3
    noise: float = 0.02
    seed: int = 0


@dataclass
class SynthCorpus:
    pages: list[tuple[str, np.ndarray]]
    ground_truth: GroundTruth
    queries: list[tuple[str, np.ndarray]]


def _glyph_mask(kind: int, h: int, w: int, thickness: int) -> np.ndarray:
    """Connected stroke patterns that touch all four bbox edges.

    Shapes lean on diagonals and curves so that every vertical strip of the
    bbox carries real edge density; pure horizontal bars would leave their
    outer sectors nearly empty and get rejected by the validity filter.
    """
    yy, xx = np.mgrid[0:h, 0:w]
    t = thickness
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    u = (xx - cx) / ((w - 1) / 2.0)  # [-1, 1] across the box
    v = (yy - cy) / ((h - 1) / 2.0)
    scale = min(h, w)
    if kind == 0:  # eight-spoke star: + and x overlaid
        plus = (np.abs(xx - cx) < t / 2 + 0.5) | (np.abs(yy - cy) < t / 2 + 0.5)
        diag = (np.abs(u - v) * scale < t) | (np.abs(u + v) * scale < t)
        return plus | diag
    if kind == 1:  # ring
        r = u**2 + v**2
        inner = 1.0 - 2.0 * t / scale
        return (r <= 1.0) & (r >= inner**2)
    if kind == 2:  # x with a horizontal waist
        diag = (np.abs(u - v) * scale < t) | (np.abs(u + v) * scale < t)
        waist = np.abs(yy - cy) < t / 2 + 0.5
        return diag | waist
    if kind == 3:  # hourglass: top/bottom bars joined by both diagonals
        diag = (np.abs(u - v) * scale < t) | (np.abs(u + v) * scale < t)
        return (yy < t) | (yy >= h - t) | diag
    # diamond outline
    d = np.abs(v) + np.abs(u)
    return (d <= 1.0) & (d >= 1.0 - 2.2 * t / scale)


def _glyph_library(spec: SynthSpec, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per class: (mask, ink color). Fixed per corpus so instances repeat."""
    palette = [
        (0.25, 0.14, 0.10),
        (0.10, 0.12, 0.32),
        (0.30, 0.10, 0.12),
        (0.10, 0.24, 0.14),
        (0.16, 0.10, 0.24),
    ]
    library = []
    for c in range(spec.glyph_classes):
        h = int(rng.integers(26, 40))
        w = int(rng.integers(26, 40))
        if h > spec.page_h - 2 * _MARGIN or w > spec.page_w - 2 * _MARGIN:
            raise ValueError(f"glyph {h}x{w} does not fit on {spec.page_w}x{spec.page_h} pages")
        thickness = int(rng.integers(4, 6))
        mask = _glyph_mask(c % 5, h, w, thickness)
        color = np.array(palette[c % len(palette)]) + rng.uniform(-0.02, 0.02, size=3)
        library.append((mask, np.clip(color, 0.0, 1.0)))
    return library


def _background(h: int, w: int, noise: float, rng: np.random.Generator) -> np.ndarray:
    page = np.empty((h, w, 3))
    page[:] = _BASE_TONE
    page[_LINE_SPACING::_LINE_SPACING, :, :] -= _LINE_DROP
    page += rng.uniform(-noise, noise, size=(h, w))[:, :, None]
    return np.clip(page, 0.0, 1.0)


def _tight_extent(mask: np.ndarray) -> tuple[int, int, int, int]:
    ys, xs = np.nonzero(mask)
    return int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1)


def generate(spec: SynthSpec) -> SynthCorpus:
    """Build pages, ground truth and query crops for one seed."""
    if spec.page_count < 1 or spec.plants_per_page < 0:
        raise ValueError("page_count must be >= 1 and plants_per_page >= 0")
    children = np.random.SeedSequence(spec.seed).spawn(spec.page_count + 1)
    library = _glyph_library(spec, np.random.default_rng(children[0]))
    page_seqs = children[1:]

    pages: list[tuple[str, np.ndarray]] = []
    occurrences: dict[int, list[tuple[str, BoundingBox]]] = {c: [] for c in range(spec.glyph_classes)}
    plant_index = 0
    for p in range(spec.page_count):
        rng = np.random.default_rng(page_seqs[p])
        page_id = f"page_{p:03d}"
        page = _background(spec.page_h, spec.page_w, spec.noise, rng)
        placed: list[tuple[int, int, int, int]] = []
        for _ in range(spec.plants_per_page):
            cls = plant_index % spec.glyph_classes
            plant_index += 1
            mask, color = library[cls]
            gh, gw = mask.shape
            for _attempt in range(300):
                x = int(rng.integers(_MARGIN, spec.page_w - gw - _MARGIN + 1))
                y = int(rng.integers(_MARGIN, spec.page_h - gh - _MARGIN + 1))
                clear = all(
                    x + gw + _SEPARATION <= px
                    or px + pw + _SEPARATION <= x
                    or y + gh + _SEPARATION <= py
                    or py + ph + _SEPARATION <= y
                    for px, py, pw, ph in placed
                )
                if clear:
                    break
            else:
                raise RuntimeError(f"could not place glyph {cls} on {page_id}; lower the density")
            placed.append((x, y, gw, gh))
            region = page[y : y + gh, x : x + gw]
            region[mask] = color
            ex, ey, ew, eh = _tight_extent(mask)
            occurrences[cls].append((page_id, BoundingBox(x + ex, y + ey, ew, eh)))
        pages.append((page_id, page))

    queries: list[tuple[str, np.ndarray]] = []
    truths: list[QueryTruth] = []
    page_images = dict(pages)
    for cls in range(spec.glyph_classes):
        if not occurrences[cls]:
            continue
        page_id, box = occurrences[cls][0]
        img = page_images[page_id]
        crop = img[box.y : box.y + box.h, box.x : box.x + box.w].copy()
        qid = f"glyph_{cls}"
        queries.append((qid, crop))
        truths.append(
            QueryTruth(query_id=qid, page_id=page_id, bbox=box, occurrences=occurrences[cls])
        )
    return SynthCorpus(pages=pages, ground_truth=GroundTruth(queries=truths), queries=queries)


def write_corpus(corpus: SynthCorpus, out_dir: str | Path) -> None:
    """Lay the corpus out as pages/*.png, queries/*.png and gt.json."""
    out = Path(out_dir)
    (out / "pages").mkdir(parents=True, exist_ok=True)
    (out / "queries").mkdir(parents=True, exist_ok=True)
    for page_id, img in corpus.pages:
        save_png(img, out / "pages" / f"{page_id}.png")
    for qid, crop in corpus.queries:
        save_png(crop, out / "queries" / f"{qid}.png")
    save_ground_truth(corpus.ground_truth, out / "gt.json")
