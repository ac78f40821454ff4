"""Evaluation protocol: IoU, average precision, and both task metrics.

Image retrieval (IR) judges the ranked list of pages a query returns;
pattern spotting (PS) judges localized boxes, a result counting as a true
positive when it overlaps a not-yet-matched ground-truth occurrence on its
page with IoU at or above the threshold. mAP is the mean of per-query
average precision, reported for each top-n cutoff.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .proposals import BoundingBox
from .search import QueryResult, ir_page_list, query, query_vector_for

DEFAULT_TOP_N = (100, 300, 500, 700, 1000)
PS_IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class QueryTruth:
    """One query with all ground-truth occurrences of its pattern."""

    query_id: str
    page_id: str
    bbox: BoundingBox
    occurrences: list[tuple[str, BoundingBox]]


@dataclass(frozen=True)
class GroundTruth:
    queries: list[QueryTruth]

    def by_id(self) -> dict[str, QueryTruth]:
        return {q.query_id: q for q in self.queries}


@dataclass
class EvalReport:
    task: str
    map_by_n: dict[int, float]
    ap_by_query: dict[str, dict[int, float]]
    skipped_queries: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "task": self.task,
            "map": {str(n): v for n, v in sorted(self.map_by_n.items())},
            "per_query_ap": {
                qid: {str(n): v for n, v in sorted(d.items())}
                for qid, d in sorted(self.ap_by_query.items())
            },
            "skipped_queries": self.skipped_queries,
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area of two boxes."""
    x1 = max(a.x, b.x)
    y1 = max(a.y, b.y)
    x2 = min(a.x + a.w, b.x + b.w)
    y2 = min(a.y + a.h, b.y + b.h)
    inter = max(x2 - x1, 0) * max(y2 - y1, 0)
    union = a.area + b.area - inter
    return inter / union


def average_precision(ranked_rel: list[bool], total_relevant: int) -> float:
    """Non-interpolated AP: mean of precision at each relevant hit.

    Relevant items never retrieved contribute zero. ``total_relevant`` must
    be at least 1; queries without relevant items are the caller's problem
    (they are excluded from mAP with a warning upstream).
    """
    if total_relevant < 1:
        raise ValueError(f"total_relevant must be >= 1, got {total_relevant}")
    hits = 0
    precision_sum = 0.0
    for k, rel in enumerate(ranked_rel, start=1):
        if rel:
            hits += 1
            precision_sum += hits / k
    return precision_sum / total_relevant


def _per_query_results(
    results_per_query: dict[str, list[QueryResult]], gt: GroundTruth
) -> list[tuple[QueryTruth, list[QueryResult]]]:
    truth = gt.by_id()
    missing = [qid for qid in results_per_query if qid not in truth]
    if missing:
        raise KeyError(f"queries missing from ground truth: {missing}")
    return [(truth[qid], results_per_query[qid]) for qid in sorted(results_per_query)]


def eval_ir(
    results_per_query: dict[str, list[QueryResult]],
    gt: GroundTruth,
    n_values: tuple[int, ...] = DEFAULT_TOP_N,
) -> EvalReport:
    """Page-retrieval mAP: the top-n candidates vote pages in rank order.

    A page is relevant when it hosts at least one occurrence of the query's
    pattern; AP runs over the deduplicated page list.
    """
    report = EvalReport(task="ir", map_by_n={}, ap_by_query={})
    per_n_aps: dict[int, list[float]] = {n: [] for n in n_values}
    for truth, results in _per_query_results(results_per_query, gt):
        relevant_pages = {page for page, _ in truth.occurrences}
        if not relevant_pages:
            warnings.warn(
                f"query {truth.query_id!r} has no relevant pages; excluded from mAP",
                stacklevel=2,
            )
            report.skipped_queries.append(truth.query_id)
            continue
        report.ap_by_query[truth.query_id] = {}
        for n in n_values:
            pages = ir_page_list(results[:n])
            rel = [p in relevant_pages for p in pages]
            ap = average_precision(rel, len(relevant_pages))
            report.ap_by_query[truth.query_id][n] = ap
            per_n_aps[n].append(ap)
    report.map_by_n = {
        n: float(np.mean(aps)) if aps else 0.0 for n, aps in per_n_aps.items()
    }
    return report


def _ps_relevance(
    results: list[QueryResult],
    occurrences: list[tuple[str, BoundingBox]],
    iou_thresh: float,
) -> list[bool]:
    """Greedy one-to-one matching of results to occurrences in rank order."""
    unmatched: dict[str, list[BoundingBox]] = {}
    for page, box in occurrences:
        unmatched.setdefault(page, []).append(box)
    rel = []
    for r in results:
        candidates = unmatched.get(r.page_id, [])
        best_iou = -1.0
        best_idx = -1
        for i, box in enumerate(candidates):
            v = iou(r.bbox, box)
            if v > best_iou:
                best_iou = v
                best_idx = i
        if best_idx >= 0 and best_iou >= iou_thresh:
            candidates.pop(best_idx)
            rel.append(True)
        else:
            rel.append(False)
    return rel


def eval_ps(
    results_per_query: dict[str, list[QueryResult]],
    gt: GroundTruth,
    n_values: tuple[int, ...] = DEFAULT_TOP_N,
    iou_thresh: float = PS_IOU_THRESHOLD,
) -> EvalReport:
    """Localization mAP: each occurrence is matchable by one result only."""
    report = EvalReport(task="ps", map_by_n={}, ap_by_query={})
    per_n_aps: dict[int, list[float]] = {n: [] for n in n_values}
    for truth, results in _per_query_results(results_per_query, gt):
        if not truth.occurrences:
            warnings.warn(
                f"query {truth.query_id!r} has no occurrences; excluded from mAP",
                stacklevel=2,
            )
            report.skipped_queries.append(truth.query_id)
            continue
        report.ap_by_query[truth.query_id] = {}
        for n in n_values:
            rel = _ps_relevance(results[:n], truth.occurrences, iou_thresh)
            ap = average_precision(rel, len(truth.occurrences))
            report.ap_by_query[truth.query_id][n] = ap
            per_n_aps[n].append(ap)
    report.map_by_n = {
        n: float(np.mean(aps)) if aps else 0.0 for n, aps in per_n_aps.items()
    }
    return report


@dataclass(frozen=True)
class BenchmarkStats:
    mode: str
    query_count: int
    scan_mean_s: float
    scan_std_s: float
    extract_mean_s: float


def benchmark(index, queries: list[np.ndarray], mode: str, n: int = 1000) -> BenchmarkStats:
    """Wall-clock search cost per query (scan + sort), extraction separate."""
    if not queries:
        raise ValueError("benchmark needs at least one query")
    extract_times = []
    scan_times = []
    for img in queries:
        t0 = time.perf_counter()
        vec = query_vector_for(index, img)
        t1 = time.perf_counter()
        query(index, query_vec=vec, mode=mode, n=n)
        t2 = time.perf_counter()
        extract_times.append(t1 - t0)
        scan_times.append(t2 - t1)
    scan = np.asarray(scan_times)
    return BenchmarkStats(
        mode=mode,
        query_count=len(queries),
        scan_mean_s=float(scan.mean()),
        scan_std_s=float(scan.std()),
        extract_mean_s=float(np.mean(extract_times)),
    )


def load_ground_truth(path: str | Path) -> GroundTruth:
    """Read the ground-truth JSON format.

    ``{"queries": [{"id", "page", "bbox": [x,y,w,h],
    "occurrences": [{"page", "bbox"}]}]}``
    """
    with open(path) as fh:
        data = json.load(fh)
    queries = []
    for q in data["queries"]:
        queries.append(
            QueryTruth(
                query_id=str(q["id"]),
                page_id=str(q["page"]),
                bbox=BoundingBox(*q["bbox"]),
                occurrences=[(str(o["page"]), BoundingBox(*o["bbox"])) for o in q["occurrences"]],
            )
        )
    return GroundTruth(queries=queries)


def save_ground_truth(gt: GroundTruth, path: str | Path) -> None:
    data = {
        "queries": [
            {
                "id": q.query_id,
                "page": q.page_id,
                "bbox": list(q.bbox.as_tuple()),
                "occurrences": [
                    {"page": page, "bbox": list(box.as_tuple())} for page, box in q.occurrences
                ],
            }
            for q in gt.queries
        ]
    }
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True, indent=2)
        fh.write("\n")
