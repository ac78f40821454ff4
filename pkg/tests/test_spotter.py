import pytest
from sklearn.base import clone

from pagespot.evaluation import iou
from pagespot.spotter import PatternSpotter


@pytest.fixture(scope="module")
def fitted(small_corpus_module):
    return PatternSpotter(seg_sigma=0.8).fit(small_corpus_module.pages)


@pytest.fixture(scope="module")
def small_corpus_module():
    from pagespot.synth import SynthSpec, generate

    return generate(SynthSpec(page_count=4, seed=0))


def test_fit_builds_index(fitted):
    assert len(fitted.index_) > 0


def test_query_finds_planted_glyph(fitted, small_corpus_module):
    truth = small_corpus_module.ground_truth.queries[0]
    crop = small_corpus_module.queries[0][1]
    results = fitted.query(crop, n=5, postprocess=True)
    top = results[0]
    hits = [
        iou(top.bbox, box)
        for page, box in truth.occurrences
        if page == top.page_id
    ]
    assert hits and max(hits) >= 0.5


def test_unfitted_query_rejected():
    with pytest.raises(RuntimeError):
        PatternSpotter().query(None)


def test_sklearn_contract():
    est = PatternSpotter(alpha=0.1, mode="hamming")
    params = est.get_params()
    assert params["alpha"] == 0.1
    assert params["mode"] == "hamming"
    cloned = clone(est)
    assert cloned.get_params() == params
    est.set_params(alpha=0.06)
    assert est.alpha == 0.06
