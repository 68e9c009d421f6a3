"""scikit-learn style wrapper around the recommender.

``fit`` takes a program listing and an optional profiling trace, builds the
annotated CFG and the recommendation table. ``predict`` maps instruction
addresses to mode bits (0 horizontal, 1 vertical).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .cfg import PROFILE_LIMIT, ProgramListing, annotate_probabilities, build_cfg, parse_listing
from .recommender import PruneOptions, build_table, expected_scores
from .simulator import RecPolicy, simulate
from .validation import check_geometry, check_trace, check_window

__all__ = ["RecommendationEstimator"]


class RecommendationEstimator(BaseEstimator):
    """Per-instruction allocation recommendations for one geometry and window.

    Parameters mirror :func:`~racetrack_rf.recommender.build_table`;
    ``geometry`` accepts anything :func:`~racetrack_rf.validation.check_geometry`
    does.
    """

    def __init__(
        self,
        geometry=None,
        window: int = 100,
        max_paths: int = 4096,
        min_weight: float = 1e-6,
        hysteresis: float | None = None,
        aggregate: str = "score",
        method: str = "dp",
        profile_limit: int = PROFILE_LIMIT,
    ):
        self.geometry = geometry
        self.window = window
        self.max_paths = max_paths
        self.min_weight = min_weight
        self.hysteresis = hysteresis
        self.aggregate = aggregate
        self.method = method
        self.profile_limit = profile_limit

    def fit(self, listing, trace=None):
        geom = check_geometry(self.geometry)
        window = check_window(self.window)
        if isinstance(listing, str):
            listing = parse_listing(listing, geom.num_regs)
        if not isinstance(listing, ProgramListing):
            raise TypeError("listing must be a ProgramListing or listing text")
        cfg = build_cfg(listing)
        if trace is not None:
            cfg = annotate_probabilities(cfg, check_trace(trace, geom), self.profile_limit)
        prune = PruneOptions(self.max_paths, self.min_weight, self.hysteresis)
        self.geometry_ = geom
        self.cfg_ = cfg
        self.prune_ = prune
        self.table_ = build_table(cfg, geom, window, prune, self.aggregate, self.method)
        self.n_instructions_ = len(listing)
        return self

    def predict(self, addresses) -> np.ndarray:
        check_is_fitted(self, "table_")
        return np.array([int(self.table_[int(a)]) for a in addresses], dtype=np.int8)

    def decision_function(self, addresses) -> np.ndarray:
        """Expected horizontal minus vertical shift score; positive leans vertical."""
        check_is_fitted(self, "table_")
        h, v = expected_scores(self.cfg_, self.geometry_, self.window)
        idx = [self.cfg_.listing.index_of(int(a)) for a in addresses]
        return h[idx] - v[idx]

    def score(self, trace, y=None) -> float:
        """Negated total REC energy (fJ) of ``trace``, so that higher is better."""
        check_is_fitted(self, "table_")
        rep = simulate(check_trace(trace, self.geometry_), self.geometry_, None, RecPolicy(self.table_), self.window)
        return -float(rep.totals.energy)
