import numpy as np
import pytest

from pagespot.index import build_index
from pagespot.synth import SynthSpec, generate


@pytest.fixture(scope="session")
def small_corpus():
    """Six synthetic pages, five glyph classes, fixed seed."""
    return generate(SynthSpec(page_count=6, seed=0))


@pytest.fixture(scope="session")
def small_index(small_corpus):
    return build_index(small_corpus.pages)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
