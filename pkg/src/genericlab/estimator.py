"""scikit-learn style front end.

Rows of ``X`` are ``[point (n), vector (n)]`` for :class:`GenericityEstimator`
and bare points for :class:`CurvatureTransformer`.  Fitting only binds and
validates the chart; nothing is learned from data.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .chart import Chart
from .errors import RegionError
from .experiments import catalog_chart
from .genericity import DEFAULT_TOL, magnitudes
from .geometry import MetricJet, curvature_derivatives, riemann_from_jet
from .tensor import curv_coordinates

__all__ = ["GenericityEstimator", "CurvatureTransformer"]


def _resolve_chart(chart):
    if isinstance(chart, Chart):
        return chart
    if isinstance(chart, str):
        return catalog_chart(chart)
    raise TypeError("chart must be a Chart or a catalog id")


class _ChartEstimator(BaseEstimator):
    def fit(self, X=None, y=None):
        self.chart_ = _resolve_chart(self.chart)
        self.n_features_in_ = self._width(self.chart_.n)
        if X is not None:
            self._validate(X)
        return self

    def _validate(self, X):
        check_is_fitted(self, "chart_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        pts = X[:, : self.chart_.n]
        if not np.all(self.chart_.in_region(pts)):
            raise RegionError(f"some rows lie outside the region of chart '{self.chart_.name}'")
        return X

    def _jet(self, pts, order):
        return MetricJet(pts, order, self.chart_.metric_coefficients(pts, order))


class GenericityEstimator(TransformerMixin, _ChartEstimator):
    """Normalized genericity magnitudes ``m_0..m_r`` of ``(point, vector)`` rows.

    Parameters
    ----------
    chart : Chart or str
        Chart object or catalog id.
    r : int, default=0
        Highest derivative order tested.
    tol : float, default=1e-10
        Threshold applied to the normalized magnitudes.

    Examples
    --------
    >>> est = GenericityEstimator("ppwave4", r=2).fit()
    >>> est.predict([[0.1, 0, 0.2, -0.3, 0, 1, 0, 0]])
    array([False])
    """

    def __init__(self, chart="minkowski4", r=0, tol=DEFAULT_TOL):
        self.chart = chart
        self.r = r
        self.tol = tol

    @staticmethod
    def _width(n):
        return 2 * n

    def transform(self, X):
        """Magnitudes, shape ``(n_samples, r + 1)``."""
        X = self._validate(X)
        if self.r < 0:
            raise ValueError("r must be non-negative")
        n = self.chart_.n
        mj = self._jet(X[:, :n], self.r + 2)
        return magnitudes(X[:, n:], mj.value, curvature_derivatives(mj, self.r + 1))

    def predict(self, X):
        """True where the vector is generic (``m_0 > tol``)."""
        return self.transform(X)[:, 0] > self.tol

    def predict_nongeneric(self, X):
        """True where the vector is r-nongeneric (all ``m_k <= tol``)."""
        return np.all(self.transform(X) <= self.tol, axis=1)


class CurvatureTransformer(TransformerMixin, _ChartEstimator):
    """Riemann tensor at each point, as coordinates in the curvature basis.

    Parameters
    ----------
    chart : Chart or str
        Chart object or catalog id.
    """

    def __init__(self, chart="minkowski4"):
        self.chart = chart

    @staticmethod
    def _width(n):
        return n

    def transform(self, X):
        X = self._validate(X)
        R = riemann_from_jet(self._jet(X, 2))
        return curv_coordinates(R)
