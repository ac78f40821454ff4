"""One-stop estimator tying the offline and online phases together.

``PatternSpotter`` follows the sklearn convention: construct with plain
hyperparameters, ``fit`` on pages to build the in-memory index, then
``query`` images against it. It exists so the pipeline composes with the
wider ecosystem (``get_params``/``set_params``, clone-ability); the CLI and
tests that need persistence use :mod:`pagespot.index` directly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .index import SearchIndex, build_index
from .proposals import FilterParams
from .search import PostProcessParams, QueryResult, postprocess_union, query


class PatternSpotter(BaseEstimator):
    """Propose-extract-binarize on fit; ranked localized retrieval on query."""

    def __init__(
        self,
        alpha: float = 0.06,
        min_side: int = 10,
        max_side_frac: float = 0.9,
        seg_k: float = 200.0,
        seg_min_size: int = 50,
        seg_sigma: float = 0.8,
        normalize: bool = True,
        mode: str = "euclidean",
        pool_size: int = 3000,
        union_iou: float = 0.85,
    ):
        self.alpha = alpha
        self.min_side = min_side
        self.max_side_frac = max_side_frac
        self.seg_k = seg_k
        self.seg_min_size = seg_min_size
        self.seg_sigma = seg_sigma
        self.normalize = normalize
        self.mode = mode
        self.pool_size = pool_size
        self.union_iou = union_iou

    def fit(self, pages: list[tuple[str, np.ndarray]], y=None):
        params = FilterParams(
            alpha=self.alpha, min_side=self.min_side, max_side_frac=self.max_side_frac
        )
        self.index_: SearchIndex = build_index(
            pages,
            params,
            normalize=self.normalize,
            propose_kwargs={
                "seg_k": self.seg_k,
                "seg_min_size": self.seg_min_size,
                "seg_sigma": self.seg_sigma,
            },
        )
        return self

    def query(
        self, query_img: np.ndarray, n: int = 100, postprocess: bool = False
    ) -> list[QueryResult]:
        if not hasattr(self, "index_"):
            raise RuntimeError("PatternSpotter is not fitted; call fit(pages) first")
        results = query(
            self.index_,
            query_img=query_img,
            mode=self.mode,
            n=self.pool_size if postprocess else n,
        )
        if postprocess:
            pp = PostProcessParams(pool_size=self.pool_size, union_iou=self.union_iou)
            results = postprocess_union(results, pp)[:n]
        return results
