import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from pagespot.features import MagicHeaderError, TruncatedFileError
from pagespot.hashing import (
    BinarizerParams,
    MedianBinarizer,
    binarize,
    canonicalize,
    fit_binarizer,
    hamming_distance,
    hamming_scan,
    load_code_file,
    unpack_bits,
    words_per_code,
    write_code_file,
)


def naive_hamming(bits_a: np.ndarray, bits_b: np.ndarray) -> int:
    """Per-bit oracle: sum of absolute differences over unpacked bits."""
    return int(np.abs(bits_a.astype(int) - bits_b.astype(int)).sum())


def random_code(rng, dims):
    bits = rng.integers(0, 2, size=dims)
    params = BinarizerParams(thresholds=np.zeros(dims))
    return binarize(bits.astype(float) - 0.5 + bits, params), bits
    # values above 0 exactly where bit is 1


class TestFitBinarizer:
    def test_single_vector_is_its_own_threshold(self, rng):
        v = rng.normal(size=16)
        params = fit_binarizer(v[None, :])
        np.testing.assert_array_equal(params.thresholds, v)

    def test_odd_median(self):
        feats = np.array([[1.0], [2.0], [3.0]])
        assert fit_binarizer(feats).thresholds[0] == 2.0

    def test_even_median_is_midpoint(self):
        # sort-based oracle: median of {0, 10} is (0 + 10) / 2
        feats = np.array([[0.0], [10.0]])
        assert fit_binarizer(feats).thresholds[0] == 5.0

    def test_matches_sort_oracle(self, rng):
        feats = rng.normal(size=(11, 7))
        params = fit_binarizer(feats)
        for d in range(7):
            col = np.sort(feats[:, d])
            assert params.thresholds[d] == col[5]  # middle of 11

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            fit_binarizer(np.zeros((0, 4)))

    def test_mixed_dims_rejected(self):
        with pytest.raises(ValueError):
            fit_binarizer([[1.0, 2.0], [1.0]])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            fit_binarizer(np.array([[np.nan, 1.0]]))


class TestBinarize:
    def test_at_threshold_is_zero(self, rng):
        v = rng.normal(size=32)
        params = BinarizerParams(thresholds=v.copy())
        code = binarize(v, params)
        assert not code.any()

    def test_above_threshold_all_ones(self, rng):
        v = rng.normal(size=64)
        params = BinarizerParams(thresholds=v.copy())
        code = binarize(v + 1.0, params)
        assert unpack_bits(code, 64).sum() == 64

    def test_65_dims_packing(self):
        params = BinarizerParams(thresholds=np.zeros(65))
        v = np.zeros(65)
        v[64] = 1.0
        code = binarize(v, params)
        assert code.shape == (2,)
        assert code[0] == 0
        assert code[1] == 1  # exactly one meaningful bit, 63 zero padding bits

    def test_padding_bits_zero(self, rng):
        params = BinarizerParams(thresholds=np.zeros(70))
        code = binarize(rng.normal(size=70), params)
        np.testing.assert_array_equal(canonicalize(code, 70)[0], code)

    def test_dims_mismatch_rejected(self):
        params = BinarizerParams(thresholds=np.zeros(8))
        with pytest.raises(ValueError):
            binarize(np.zeros(9), params)

    def test_balanced_bits_odd_corpus(self, rng):
        # odd corpus with distinct values: exactly (n-1)/2 ones per dimension
        n, dims = 31, 12
        feats = rng.permuted(np.arange(n * dims, dtype=float).reshape(n, dims), axis=0)
        params = fit_binarizer(feats)
        codes = binarize(feats, params)
        ones = unpack_bits(codes, dims).sum(axis=0)
        np.testing.assert_array_equal(ones, np.full(dims, (n - 1) // 2))


class TestHammingDistance:
    def test_identical_zero(self, rng):
        code, _ = random_code(rng, 128)
        assert hamming_distance(code, code) == 0

    def test_complement_is_dims(self, rng):
        for dims in (64, 65, 640):
            params = BinarizerParams(thresholds=np.full(dims, 0.5))
            a = binarize(np.zeros(dims), params)
            b = binarize(np.ones(dims), params)
            assert hamming_distance(a, b) == dims

    def test_spec_example_1010_0110(self):
        params = BinarizerParams(thresholds=np.full(4, 0.5))
        q = binarize(np.array([1.0, 0.0, 1.0, 0.0]), params)
        p = binarize(np.array([0.0, 1.0, 1.0, 0.0]), params)
        assert hamming_distance(q, p) == 2

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            hamming_distance(np.zeros(1, dtype=np.uint64), np.zeros(2, dtype=np.uint64))

    def test_matches_naive_oracle(self, rng):
        for dims in (64, 65, 640, 1024):
            params = BinarizerParams(thresholds=np.full(dims, 0.5))
            a_vals = rng.integers(0, 2, size=(50, dims)).astype(float)
            b_vals = rng.integers(0, 2, size=(50, dims)).astype(float)
            a = binarize(a_vals, params)
            b = binarize(b_vals, params)
            for i in range(50):
                expected = naive_hamming(a_vals[i], b_vals[i])
                assert hamming_distance(a[i], b[i]) == expected

    def test_padding_never_counts(self, rng):
        dims = 70
        params = BinarizerParams(thresholds=np.full(dims, 0.5))
        a = binarize(rng.integers(0, 2, size=dims).astype(float), params)
        b = binarize(rng.integers(0, 2, size=dims).astype(float), params)
        base = hamming_distance(a, b)
        corrupted = a.copy()
        corrupted[-1] |= np.uint64(0xFFFF) << np.uint64(6)  # poke padding region
        cleaned = canonicalize(corrupted, dims)[0]
        assert hamming_distance(cleaned, b) == base


@settings(max_examples=200, deadline=None)
@given(
    data=st.data(),
    dims=st.sampled_from([64, 65, 96, 640]),
)
def test_hamming_is_a_metric(data, dims):
    n_words = words_per_code(dims)
    tail = dims % 64
    tail_max = (1 << tail) - 1 if tail else (1 << 64) - 1

    def code():
        words = [
            data.draw(st.integers(min_value=0, max_value=(1 << 64) - 1))
            for _ in range(n_words - 1)
        ]
        words.append(data.draw(st.integers(min_value=0, max_value=tail_max)))
        return np.array(words, dtype=np.uint64)

    a, b, c = code(), code(), code()
    assert hamming_distance(a, b) == hamming_distance(b, a)
    assert (hamming_distance(a, b) == 0) == bool(np.array_equal(a, b))
    assert hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c)


class TestHammingScan:
    def test_matches_pairwise(self, rng):
        dims = 96
        params = BinarizerParams(thresholds=np.full(dims, 0.5))
        codes = binarize(rng.integers(0, 2, size=(40, dims)).astype(float), params)
        q = binarize(rng.integers(0, 2, size=dims).astype(float), params)
        scan = hamming_scan(codes, q)
        for i in range(40):
            assert scan[i] == hamming_distance(codes[i], q)

    def test_incompatible_rejected(self):
        with pytest.raises(ValueError):
            hamming_scan(np.zeros((3, 2), dtype=np.uint64), np.zeros(1, dtype=np.uint64))


class TestMedianBinarizer:
    def test_fit_transform(self, rng):
        X = rng.normal(size=(9, 32))
        est = MedianBinarizer().fit(X)
        codes = est.transform(X)
        assert codes.shape == (9, 1)
        np.testing.assert_array_equal(codes, binarize(X, est.params_))

    def test_cloneable(self):
        est = MedianBinarizer()
        assert clone(est).get_params() == est.get_params()


class TestCodeFile:
    def test_round_trip(self, tmp_path, rng):
        dims = 130
        params = BinarizerParams(thresholds=np.zeros(dims))
        codes = binarize(rng.normal(size=(7, dims)), params)
        ids = np.arange(100, 107, dtype=np.uint64)
        path = tmp_path / "c.pshash"
        write_code_file(path, ids, codes, dims)
        got_ids, got_codes, got_dims = load_code_file(path)
        assert got_dims == dims
        np.testing.assert_array_equal(got_ids, ids)
        np.testing.assert_array_equal(got_codes, codes)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "c.pshash"
        path.write_bytes(b"PSFEAT01" + b"\x00" * 8)
        with pytest.raises(MagicHeaderError):
            load_code_file(path)

    def test_truncation(self, tmp_path, rng):
        dims = 64
        params = BinarizerParams(thresholds=np.zeros(dims))
        codes = binarize(rng.normal(size=(3, dims)), params)
        path = tmp_path / "c.pshash"
        write_code_file(path, np.arange(3, dtype=np.uint64), codes, dims)
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(TruncatedFileError):
            load_code_file(path)
