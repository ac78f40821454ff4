"""Pattern spotting and image retrieval for scanned document pages.

Offline, pages are decomposed into candidate regions (graph segmentation +
greedy region merging), invalid regions are filtered out, and each survivor
is stored both as a float feature vector and as a bit-packed binary code.
Online, queries are ranked against the whole candidate list by Euclidean or
Hamming distance, optionally de-duplicated, and scored with IR/PS mAP.
"""

from .evaluation import (
    GroundTruth,
    QueryTruth,
    average_precision,
    eval_ir,
    eval_ps,
    iou,
    load_ground_truth,
)
from .features import (
    BASELINE_PROFILE,
    KNOWN_PROFILES,
    BaselineExtractor,
    ExtractorProfile,
    extract_baseline,
    l2_normalize,
    load_external_features,
)
from .hashing import (
    BinarizerParams,
    MedianBinarizer,
    binarize,
    fit_binarizer,
    hamming_distance,
)
from .index import SearchIndex, build_index, load_index, storage_report
from .proposals import BoundingBox, FilterParams, propose, selective_search
from .search import PostProcessParams, QueryResult, ir_page_list, postprocess_union, query
from .segmentation import SegmentLabels, felzenszwalb_segment
from .spotter import PatternSpotter
from .synth import SynthCorpus, SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "BASELINE_PROFILE",
    "KNOWN_PROFILES",
    "BaselineExtractor",
    "BinarizerParams",
    "BoundingBox",
    "ExtractorProfile",
    "FilterParams",
    "GroundTruth",
    "MedianBinarizer",
    "PatternSpotter",
    "PostProcessParams",
    "QueryResult",
    "QueryTruth",
    "SearchIndex",
    "SegmentLabels",
    "SynthCorpus",
    "SynthSpec",
    "average_precision",
    "binarize",
    "build_index",
    "eval_ir",
    "eval_ps",
    "extract_baseline",
    "felzenszwalb_segment",
    "fit_binarizer",
    "generate",
    "hamming_distance",
    "iou",
    "ir_page_list",
    "l2_normalize",
    "load_external_features",
    "load_ground_truth",
    "load_index",
    "postprocess_union",
    "propose",
    "query",
    "selective_search",
    "storage_report",
]
