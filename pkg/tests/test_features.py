import numpy as np
import pytest
from sklearn.base import clone

from pagespot import features
from pagespot.features import (
    BASELINE_DIMS,
    BaselineExtractor,
    DimensionMismatchError,
    ExtractorProfile,
    MagicHeaderError,
    TruncatedFileError,
    extract_baseline,
    l2_normalize,
    load_external_features,
    write_feature_file,
)

CELL_DIMS = 40
COLOR_SLOTS = np.array([c * CELL_DIMS + k for c in range(16) for k in range(3)])
GRAD_SLOTS = np.array([c * CELL_DIMS + k for c in range(16) for k in range(3, CELL_DIMS)])


class TestExtractBaseline:
    def test_constant_crop_zero_gradients_equal_cells(self):
        vec = extract_baseline(np.full((30, 30, 3), 0.5))
        assert vec.shape == (BASELINE_DIMS,)
        assert np.allclose(vec[GRAD_SLOTS], 0.0)
        cells = vec.reshape(16, CELL_DIMS)
        for cell in cells[1:]:
            np.testing.assert_allclose(cell, cells[0], atol=1e-12)

    def test_duplicate_crop_identical(self, rng):
        crop = rng.uniform(size=(22, 31, 3))
        a = extract_baseline(crop)
        b = extract_baseline(crop.copy())
        np.testing.assert_array_equal(a, b)
        assert np.linalg.norm(a - b) == 0.0

    def test_brightness_shift_leaves_gradient_dims(self, rng):
        crop = rng.uniform(0.0, 0.7, size=(40, 40, 3))
        a = extract_baseline(crop)
        b = extract_baseline(crop + 0.1)
        np.testing.assert_allclose(a[GRAD_SLOTS], b[GRAD_SLOTS], atol=1e-12)
        assert not np.allclose(a[COLOR_SLOTS], b[COLOR_SLOTS])

    def test_dims_constant_across_sizes(self, rng):
        for shape in ((10, 12, 3), (244, 180, 3), (7, 7), (300, 40)):
            crop = rng.uniform(size=shape)
            assert extract_baseline(crop).shape == (BASELINE_DIMS,)

    def test_finite_values(self, rng):
        vec = extract_baseline(rng.uniform(size=(17, 23, 3)))
        assert np.isfinite(vec).all()

    def test_translation_closer_than_random(self, rng):
        # descriptor sanity: a 1-px shifted crop stays nearer than noise
        base = rng.uniform(size=(64, 64, 3))
        crop = base[2:50, 2:50]
        shifted = base[3:51, 2:50]
        unrelated = rng.uniform(size=(48, 48, 3))
        v = extract_baseline(crop)
        d_shift = np.linalg.norm(v - extract_baseline(shifted))
        d_rand = np.linalg.norm(v - extract_baseline(unrelated))
        assert d_shift < d_rand


class TestL2Normalize:
    def test_three_four_five(self):
        np.testing.assert_allclose(l2_normalize(np.array([3.0, 4.0])), [0.6, 0.8])

    def test_unit_vector_unchanged(self):
        v = np.array([0.0, 1.0, 0.0])
        np.testing.assert_allclose(l2_normalize(v), v)

    def test_zero_vector_flagged(self):
        v = np.zeros(4)
        with pytest.warns(RuntimeWarning):
            out = l2_normalize(v)
        np.testing.assert_array_equal(out, v)

    def test_direction_preserved(self, rng):
        v = rng.normal(size=32)
        out = l2_normalize(v)
        assert np.linalg.norm(out) == pytest.approx(1.0)
        np.testing.assert_allclose(out * np.linalg.norm(v), v, atol=1e-12)


class TestBaselineExtractor:
    def test_transform_stacks(self, rng):
        crops = [rng.uniform(size=(12, 14, 3)) for _ in range(3)]
        X = BaselineExtractor().fit(crops).transform(crops)
        assert X.shape == (3, BASELINE_DIMS)

    def test_sklearn_cloneable(self):
        est = BaselineExtractor()
        assert clone(est).get_params() == est.get_params()


class TestFeatureFile:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        vecs = rng.normal(size=(5, 64)).astype(np.float32)
        ids = np.arange(5, dtype=np.uint64)
        path = tmp_path / "f.psfeat"
        profile = ExtractorProfile("test", 64, "external")
        write_feature_file(path, ids, vecs)
        got_ids, got = load_external_features(path, profile)
        np.testing.assert_array_equal(got_ids, ids)
        assert got.dtype == np.float32
        np.testing.assert_array_equal(got, vecs)

    def test_two_vector_happy_path(self, tmp_path, rng):
        profile = ExtractorProfile("p1024", 1024, "external")
        path = tmp_path / "f.psfeat"
        write_feature_file(path, np.array([7, 9], dtype=np.uint64), rng.normal(size=(2, 1024)))
        ids, vecs = load_external_features(path, profile)
        assert len(ids) == 2 and vecs.shape == (2, 1024)

    def test_dimension_mismatch(self, tmp_path, rng):
        path = tmp_path / "f.psfeat"
        write_feature_file(path, np.array([0], dtype=np.uint64), rng.normal(size=(1, 1024)))
        with pytest.raises(DimensionMismatchError):
            load_external_features(path, ExtractorProfile("p", 2048, "external"))

    def test_truncated_payload(self, tmp_path, rng):
        path = tmp_path / "f.psfeat"
        write_feature_file(path, np.array([0, 1], dtype=np.uint64), rng.normal(size=(2, 16)))
        raw = path.read_bytes()
        path.write_bytes(raw[:-4])
        with pytest.raises(TruncatedFileError):
            load_external_features(path, ExtractorProfile("p", 16, "external"))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.psfeat"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(MagicHeaderError):
            load_external_features(path, ExtractorProfile("p", 16, "external"))

    def test_errors_are_distinct_types(self):
        kinds = {MagicHeaderError, TruncatedFileError, DimensionMismatchError}
        assert len(kinds) == 3
        assert all(issubclass(k, features.FeatureFileError) for k in kinds)


class TestProfiles:
    def test_known_external_dims(self):
        dims = sorted(p.dims for p in features.KNOWN_PROFILES.values() if p.kind == "external")
        assert dims == [384, 640, 1024, 1472, 2048, 4096, 100352]

    def test_baseline_dims(self):
        assert features.BASELINE_PROFILE.dims == BASELINE_DIMS == 640

    def test_invalid_profile_rejected(self):
        with pytest.raises(ValueError):
            ExtractorProfile("x", 0, "external")
        with pytest.raises(ValueError):
            ExtractorProfile("x", 10, "mystery")
