"""Estimator-style wrappers (``fit`` / ``predict`` / ``get_params``) around the approximation routines.

``OuterPSS`` and ``InnerPSS`` are fit on a :class:`SemialgSet`; ``PointCloudPSS``
is fit on an ``(N, n)`` array of points. After fitting, ``predict`` labels
points ``+1`` inside the approximating set and ``-1`` outside.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .approx import PssResult, SemialgSet, fit_points, inner_pss, outer_pss
from .errors import InputError
from .moments import Box
from .sampler import PolyDensity, SampleBatch, uniform_sample
from .solve import SolverSettings


def _as_set(K) -> SemialgSet:
    if isinstance(K, SemialgSet):
        return K
    if isinstance(K, dict):
        return SemialgSet.from_json(K)
    raise InputError(f"expected a SemialgSet or its JSON dict, got {type(K).__name__}")


class _PssBase(BaseEstimator):
    def _settings(self) -> SolverSettings:
        return SolverSettings(tol_feas=self.solver_tol, tol_gap=self.solver_tol, max_iter=self.max_iter)

    def _store(self, result: PssResult):
        self.result_ = result
        self.polynomial_ = result.p
        self.w_ = result.w
        self.box_ = result.box
        self.n_features_in_ = result.box.dim
        return self

    def _check_X(self, X) -> np.ndarray:
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise InputError(f"X has {X.shape[1]} features, estimator was fit with {self.n_features_in_}")
        return X

    def score_samples(self, X) -> np.ndarray:
        """Polynomial values ``p(x)`` at each row."""
        X = self._check_X(X)
        return self.polynomial_(X)


class OuterPSS(_PssBase):
    """Minimum-integral polynomial whose superlevel set ``{p >= 1}`` contains the set."""

    def __init__(self, degree=8, order=None, *, rescale="auto", include_box=False, solver_tol=1e-8, max_iter=200):
        self.degree = degree
        self.order = order
        self.rescale = rescale
        self.include_box = include_box
        self.solver_tol = solver_tol
        self.max_iter = max_iter

    def fit(self, K, y=None):
        self.set_ = _as_set(K)
        res = outer_pss(
            self.set_,
            self.degree,
            self.order,
            rescale=self.rescale,
            include_box=self.include_box,
            settings=self._settings(),
        )
        return self._store(res)

    def decision_function(self, X) -> np.ndarray:
        """``p(x) - 1``: nonnegative on the outer approximation."""
        return self.score_samples(X) - 1.0

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def density(self) -> PolyDensity:
        check_is_fitted(self, "result_")
        return PolyDensity.from_result(self.result_)

    def sample(self, n_samples: int, seed: int = 0) -> SampleBatch:
        """Uniform points on the fitted set by rejection from ``p``."""
        return uniform_sample(self.set_, self.density(), n_samples, seed)


class InnerPSS(_PssBase):
    """Minimum-integral polynomial whose sublevel set ``{p <= 1}`` lies inside the set."""

    def __init__(self, degree=8, order=None, *, rescale="auto", solver_tol=1e-8, max_iter=200):
        self.degree = degree
        self.order = order
        self.rescale = rescale
        self.solver_tol = solver_tol
        self.max_iter = max_iter

    def fit(self, K, y=None):
        self.set_ = _as_set(K)
        res = inner_pss(self.set_, self.degree, self.order, rescale=self.rescale, settings=self._settings())
        return self._store(res)

    def decision_function(self, X) -> np.ndarray:
        """``1 - p(x)``: nonnegative on the inner approximation."""
        return 1.0 - self.score_samples(X)

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)


class PointCloudPSS(_PssBase):
    """Superlevel-set fit through a finite point cloud by linear programming.

    ``box`` is a ``(lower, upper)`` pair; when omitted, the points' bounding
    box padded by ``padding`` of its width on each side is used.
    """

    def __init__(self, degree=2, *, box=None, padding=0.1, grid=50, rescale="auto", solver_tol=1e-8, max_iter=200):
        self.degree = degree
        self.box = box
        self.padding = padding
        self.grid = grid
        self.rescale = rescale
        self.solver_tol = solver_tol
        self.max_iter = max_iter

    def _resolve_box(self, X: np.ndarray) -> Box:
        if self.box is None:
            lo, hi = X.min(axis=0), X.max(axis=0)
            width = np.where(hi > lo, hi - lo, 1.0)
            return Box(lo - self.padding * width, hi + self.padding * width)
        if isinstance(self.box, Box):
            return self.box
        lo, hi = self.box
        return Box(lo, hi)

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        res = fit_points(
            X,
            self._resolve_box(X),
            self.degree,
            self.grid,
            rescale=self.rescale,
            settings=self._settings(),
        )
        return self._store(res)

    def decision_function(self, X) -> np.ndarray:
        return self.score_samples(X) - 1.0

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)
