import numpy as np
import pytest

from pagespot.evaluation import iou
from pagespot.features import ExtractorProfile
from pagespot.hashing import BinarizerParams, binarize, fit_binarizer, unpack_bits
from pagespot.index import IndexEntry, SearchIndex
from pagespot.proposals import BoundingBox
from pagespot.search import (
    PostProcessParams,
    QueryResult,
    ir_page_list,
    postprocess_union,
    query,
)


def synthetic_index(vectors: np.ndarray, pages=None, normalize=False) -> SearchIndex:
    """Wrap a raw float matrix as a SearchIndex for ranking tests."""
    n, dims = vectors.shape
    vectors = vectors.astype(np.float32)
    params = fit_binarizer(vectors)
    pages = pages or [f"page_{i % 7}" for i in range(n)]
    entries = [
        IndexEntry(i, pages[i], BoundingBox(x=i % 50, y=i % 40, w=10, h=10))
        for i in range(n)
    ]
    return SearchIndex(
        profile=ExtractorProfile("raw", dims, "external"),
        normalized=normalize,
        binarizer=params,
        entries=entries,
        vectors=vectors,
        codes=binarize(vectors, params),
    )


def result(rank, page, box, distance, rid=None):
    return QueryResult(
        region_id=rid if rid is not None else rank,
        page_id=page,
        bbox=BoundingBox(*box),
        distance=distance,
        rank=rank,
    )


class TestQuery:
    def test_identical_crop_is_rank_one_distance_zero(self, small_corpus, small_index):
        pages = dict(small_corpus.pages)
        entry = small_index.entries[len(small_index) // 2]
        page = pages[entry.page_id]
        b = entry.bbox
        crop = page[b.y : b.y + b.h, b.x : b.x + b.w]
        for mode in ("euclidean", "hamming"):
            top = query(small_index, query_img=crop, mode=mode, n=3)
            assert top[0].region_id == entry.region_id
            assert top[0].distance == 0.0
            assert top[0].rank == 1

    def test_n_larger_than_index(self, rng):
        idx = synthetic_index(rng.normal(size=(12, 32)))
        results = query(idx, query_vec=rng.normal(size=32), mode="euclidean", n=500)
        assert len(results) == 12
        assert [r.rank for r in results] == list(range(1, 13))

    def test_hamming_permutes_all_entries(self, rng):
        idx = synthetic_index(rng.normal(size=(30, 64)))
        results = query(idx, query_vec=rng.normal(size=64), mode="hamming", n=30)
        assert sorted(r.region_id for r in results) == list(range(30))

    def test_hamming_ranking_matches_naive_oracle(self, rng):
        vectors = rng.normal(size=(1000, 96))
        idx = synthetic_index(vectors)
        qvec = rng.normal(size=96).astype(np.float32)
        results = query(idx, query_vec=qvec, mode="hamming", n=1000)

        qbits = unpack_bits(binarize(qvec, idx.binarizer), 96)[0]
        dbbits = unpack_bits(idx.codes, 96)
        naive = np.abs(dbbits.astype(int) - qbits.astype(int)).sum(axis=1)
        expected_order = sorted(range(1000), key=lambda i: (naive[i], i))
        assert [r.region_id for r in results] == expected_order
        assert [r.distance for r in results] == [naive[i] for i in expected_order]

    def test_equal_distances_tie_break_by_region_id(self):
        vectors = np.tile(np.linspace(0, 1, 16), (9, 1))
        idx = synthetic_index(vectors)
        results = query(idx, query_vec=np.zeros(16), mode="euclidean", n=9)
        assert [r.region_id for r in results] == list(range(9))

    def test_euclidean_scale_invariance(self, rng):
        vectors = rng.normal(size=(200, 48))
        qvec = rng.normal(size=48)
        order1 = [
            r.region_id
            for r in query(synthetic_index(vectors), query_vec=qvec, mode="euclidean", n=200)
        ]
        order2 = [
            r.region_id
            for r in query(
                synthetic_index(vectors * 7.5), query_vec=qvec * 7.5, mode="euclidean", n=200
            )
        ]
        assert order1 == order2

    def test_profile_mismatch_rejected(self, rng):
        idx = synthetic_index(rng.normal(size=(5, 16)))
        with pytest.raises(ValueError):
            query(idx, query_img=np.zeros((8, 8, 3)), mode="euclidean", n=1)

    def test_empty_index_rejected(self, rng):
        idx = synthetic_index(rng.normal(size=(4, 8)))
        idx.entries = []
        with pytest.raises(ValueError):
            query(idx, query_vec=np.zeros(8), n=1)

    def test_bad_args_rejected(self, rng):
        idx = synthetic_index(rng.normal(size=(4, 8)))
        with pytest.raises(ValueError):
            query(idx, query_vec=np.zeros(8), mode="cosine", n=1)
        with pytest.raises(ValueError):
            query(idx, query_vec=np.zeros(8), n=0)
        with pytest.raises(ValueError):
            query(idx, n=1)
        with pytest.raises(ValueError):
            query(idx, query_vec=np.zeros(9), n=1)


def brute_force_union(results, pool_size, thresh):
    """Naive suppression oracle using the reference iou()."""
    kept = []
    for r in results[:pool_size]:
        if any(
            k.page_id == r.page_id and iou(k.bbox, r.bbox) > thresh for k in kept
        ):
            continue
        kept.append(r)
    return [r.region_id for r in kept]


class TestPostprocessUnion:
    def test_identical_boxes_keep_best(self):
        results = [
            result(1, "a", (0, 0, 10, 10), 1.0, rid=1),
            result(2, "a", (0, 0, 10, 10), 2.0, rid=2),
        ]
        kept = postprocess_union(results)
        assert [r.region_id for r in kept] == [1]
        assert kept[0].rank == 1

    def test_same_box_other_page_survives(self):
        results = [
            result(1, "a", (0, 0, 10, 10), 1.0, rid=1),
            result(2, "b", (0, 0, 10, 10), 2.0, rid=2),
        ]
        assert len(postprocess_union(results)) == 2

    def test_straddling_pool_matches_oracle(self):
        # overlaps straddle the 0.85 threshold in both directions
        results = [
            result(1, "a", (0, 0, 100, 100), 0.1, rid=0),
            result(2, "a", (2, 0, 100, 100), 0.2, rid=1),   # iou ~0.96 -> drop
            result(3, "a", (10, 0, 100, 100), 0.3, rid=2),  # iou ~0.82 -> keep
            result(4, "a", (11, 0, 100, 100), 0.4, rid=3),  # vs kept ~0.98 -> drop
            result(5, "a", (30, 30, 100, 100), 0.5, rid=4),
        ]
        params = PostProcessParams(pool_size=3000, union_iou=0.85)
        kept = [r.region_id for r in postprocess_union(results, params)]
        assert kept == brute_force_union(results, 3000, 0.85)

    def test_random_pools_match_oracle(self, rng):
        for _ in range(10):
            results = []
            for i in range(60):
                x = int(rng.integers(0, 40))
                y = int(rng.integers(0, 40))
                w = int(rng.integers(5, 30))
                h = int(rng.integers(5, 30))
                results.append(
                    result(i + 1, f"p{rng.integers(0, 3)}", (x, y, w, h), float(i), rid=i)
                )
            kept = [r.region_id for r in postprocess_union(results)]
            assert kept == brute_force_union(results, 3000, 0.85)

    def test_kept_is_subsequence_with_nondecreasing_distance(self, rng):
        results = [
            result(i + 1, "a", (int(rng.integers(0, 30)), 0, 10, 10), float(i), rid=i)
            for i in range(40)
        ]
        kept = postprocess_union(results)
        ids = [r.region_id for r in kept]
        assert ids == sorted(ids)
        distances = [r.distance for r in kept]
        assert distances == sorted(distances)
        assert len(kept) <= len(results)

    def test_pool_size_truncates(self):
        results = [result(i + 1, "a", (i * 20, 0, 10, 10), float(i), rid=i) for i in range(10)]
        kept = postprocess_union(results, PostProcessParams(pool_size=4, union_iou=0.85))
        assert [r.region_id for r in kept] == [0, 1, 2, 3]

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            PostProcessParams(union_iou=1.0)
        with pytest.raises(ValueError):
            PostProcessParams(pool_size=0)


class TestIrPageList:
    def test_first_occurrence_dedup(self):
        results = [
            result(1, "A", (0, 0, 1, 1), 0.1),
            result(2, "A", (0, 0, 1, 1), 0.2),
            result(3, "B", (0, 0, 1, 1), 0.3),
            result(4, "A", (0, 0, 1, 1), 0.4),
            result(5, "C", (0, 0, 1, 1), 0.5),
        ]
        assert ir_page_list(results) == ["A", "B", "C"]

    def test_empty(self):
        assert ir_page_list([]) == []

    def test_single_page(self):
        results = [result(i, "Z", (0, 0, 1, 1), float(i)) for i in range(1, 4)]
        assert ir_page_list(results) == ["Z"]
