"""Build, persist and load the immutable search index.

On disk an index is a directory of three files: ``meta.json`` (profile,
binarizer thresholds, normalization flag, one entry per region with page id
and box), ``features.psfeat`` and ``codes.pshash``. Metadata is written with
sorted keys and fixed separators so identical builds are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import features as feat
from . import hashing
from .features import BaselineExtractor, ExtractorProfile, KNOWN_PROFILES
from .proposals import BoundingBox, FilterParams, propose

META_NAME = "meta.json"
FEATURES_NAME = "features.psfeat"
CODES_NAME = "codes.pshash"
MANIFEST_NAME = "manifest.csv"


class IndexBuildError(RuntimeError):
    """Raised when an index cannot be built from the given inputs."""


@dataclass(frozen=True)
class IndexEntry:
    region_id: int
    page_id: str
    bbox: BoundingBox


@dataclass(frozen=True)
class StorageReport:
    """Payload-only storage accounting for the two representations."""

    record_count: int
    dims: int
    float_bytes: int
    binary_bytes: int

    @property
    def ratio(self) -> float:
        return self.float_bytes / self.binary_bytes

    def gib(self) -> tuple[float, float]:
        return self.float_bytes / 2**30, self.binary_bytes / 2**30


def storage_report(record_count: int, dims: int) -> StorageReport:
    """Analytic storage cost: float32 payload vs bit-packed payload.

    Only the vectors themselves are counted (no ids, headers or metadata),
    so the ratio is exactly 32 whenever dims is a multiple of 64.
    """
    if record_count < 0 or dims < 1:
        raise ValueError("need record_count >= 0 and dims >= 1")
    return StorageReport(
        record_count=record_count,
        dims=dims,
        float_bytes=record_count * dims * 4,
        binary_bytes=record_count * hashing.words_per_code(dims) * 8,
    )


@dataclass
class SearchIndex:
    """In-memory view of a built index; treat as immutable."""

    profile: ExtractorProfile
    normalized: bool
    binarizer: hashing.BinarizerParams
    entries: list[IndexEntry]
    vectors: np.ndarray  # (N, dims) float32
    codes: np.ndarray    # (N, words) uint64

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def region_ids(self) -> np.ndarray:
        return np.array([e.region_id for e in self.entries], dtype=np.uint64)

    def storage(self) -> StorageReport:
        return storage_report(len(self.entries), self.profile.dims)

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ids = self.region_ids
        feat.write_feature_file(out / FEATURES_NAME, ids, self.vectors)
        hashing.write_code_file(out / CODES_NAME, ids, self.codes, self.profile.dims)
        meta = {
            "format": "psindex-v1",
            "profile": {
                "name": self.profile.name,
                "dims": self.profile.dims,
                "kind": self.profile.kind,
            },
            "normalized": self.normalized,
            "binarizer": {
                "rule": "median",
                "thresholds": [float(t) for t in self.binarizer.thresholds],
            },
            "entries": [
                {
                    "region_id": e.region_id,
                    "page_id": e.page_id,
                    "bbox": list(e.bbox.as_tuple()),
                }
                for e in self.entries
            ],
        }
        with open(out / META_NAME, "w") as fh:
            json.dump(meta, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")


def load_index(index_dir: str | Path) -> SearchIndex:
    """Load a persisted index, cross-checking the three files."""
    index_dir = Path(index_dir)
    with open(index_dir / META_NAME) as fh:
        meta = json.load(fh)
    prof = meta["profile"]
    profile = ExtractorProfile(prof["name"], int(prof["dims"]), prof["kind"])
    binarizer = hashing.BinarizerParams(
        thresholds=np.asarray(meta["binarizer"]["thresholds"], dtype=np.float64)
    )
    entries = [
        IndexEntry(int(e["region_id"]), str(e["page_id"]), BoundingBox(*e["bbox"]))
        for e in meta["entries"]
    ]
    fids, vectors = feat.load_external_features(index_dir / FEATURES_NAME, profile)
    cids, codes, dims = hashing.load_code_file(index_dir / CODES_NAME)
    if dims != profile.dims:
        raise feat.DimensionMismatchError(
            f"code file dims {dims} != profile dims {profile.dims}"
        )
    ids = np.array([e.region_id for e in entries], dtype=np.uint64)
    if not (np.array_equal(fids, ids) and np.array_equal(cids, ids)):
        raise IndexBuildError("region ids disagree between meta, features and codes")
    return SearchIndex(
        profile=profile,
        normalized=bool(meta["normalized"]),
        binarizer=binarizer,
        entries=entries,
        vectors=vectors,
        codes=codes,
    )


def _page_work(task):
    """Propose (and optionally featurize) one page; picklable for workers."""
    page_id, img, params, propose_kwargs, extract = task
    result = propose(img, params, **propose_kwargs)
    vectors = None
    if extract and result.boxes:
        crops = [img[b.y : b.y + b.h, b.x : b.x + b.w] for b in result.boxes]
        vectors = BaselineExtractor().transform(crops)
    counts = {
        "page_id": page_id,
        "raw": result.raw_count,
        "after_size_filter": result.size_filtered_count,
        "after_invalid_filter": result.valid_count,
    }
    return page_id, result.boxes, vectors, counts


def build_index(
    pages: list[tuple[str, np.ndarray]],
    params: FilterParams = FilterParams(),
    extractor: BaselineExtractor | None = None,
    normalize: bool = True,
    external: tuple[str | Path, ExtractorProfile] | None = None,
    propose_kwargs: dict | None = None,
    report: list | None = None,
    workers: int = 1,
) -> SearchIndex:
    """Offline phase: propose regions on every page, featurize, binarize.

    ``pages`` is a list of (page_id, image). Region ids are assigned
    sequentially in (page order, proposal order); with ``workers`` > 1 pages
    are processed in parallel but assembled in page order, so the result is
    identical. With ``external`` set, the crops are not featurized here;
    vectors are read from the given PSFEAT01 file and must cover exactly the
    proposed region ids. ``report``, if given, collects per-page counts.
    """
    if not pages:
        raise IndexBuildError("no pages to index")
    propose_kwargs = propose_kwargs or {}
    if extractor is not None and workers > 1:
        raise ValueError("custom extractors only run single-worker")

    extract_here = external is None and extractor is None
    collect_crops = external is None and extractor is not None
    tasks = [(pid, img, params, propose_kwargs, extract_here) for pid, img in pages]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            page_results = list(pool.map(_page_work, tasks))
    else:
        page_results = [_page_work(t) for t in tasks]

    entries: list[IndexEntry] = []
    crops: list[np.ndarray] = []
    vector_blocks: list[np.ndarray] = []
    next_id = 0
    page_images = dict(pages)
    for page_id, boxes, vectors, counts in page_results:
        img = page_images[page_id]
        for box in boxes:
            entries.append(IndexEntry(next_id, page_id, box))
            if collect_crops:
                crops.append(img[box.y : box.y + box.h, box.x : box.x + box.w])
            next_id += 1
        if vectors is not None:
            vector_blocks.append(vectors)
        if report is not None:
            report.append(counts)
    if not entries:
        counts = report if report is not None else "enable report for per-page counts"
        raise IndexBuildError(f"no proposals survived filtering: {counts}")

    ids = np.array([e.region_id for e in entries], dtype=np.uint64)
    if external is not None:
        path, profile = external
        ext_ids, vectors = feat.load_external_features(path, profile)
        if len(ext_ids) != len(ids) or not np.array_equal(np.sort(ext_ids), ids):
            raise IndexBuildError(
                f"external features cover {len(ext_ids)} regions, "
                f"proposals produced {len(ids)}; ids must match exactly"
            )
        order = np.argsort(ext_ids)
        vectors = vectors[order]
    elif extract_here:
        profile = BaselineExtractor.profile
        vectors = np.concatenate(vector_blocks, axis=0)
    else:
        profile = extractor.profile
        vectors = extractor.transform(crops)

    vectors = np.asarray(vectors, dtype=np.float64)
    if normalize:
        vectors = feat.normalize_rows(vectors)
    vectors = vectors.astype(np.float32)

    binarizer = hashing.fit_binarizer(vectors)
    codes = hashing.binarize(vectors, binarizer)
    return SearchIndex(
        profile=profile,
        normalized=normalize,
        binarizer=binarizer,
        entries=entries,
        vectors=vectors,
        codes=codes,
    )


def write_manifest(index: SearchIndex, page_paths: dict[str, str], path: str | Path) -> None:
    """Crops manifest consumed by external feature exporters (CSV).

    Columns: region_id, image path, x, y, w, h.
    """
    lines = ["region_id,path,x,y,w,h"]
    for e in index.entries:
        b = e.bbox
        lines.append(f"{e.region_id},{page_paths[e.page_id]},{b.x},{b.y},{b.w},{b.h}")
    Path(path).write_text("\n".join(lines) + "\n")
