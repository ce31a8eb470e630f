"""Generic and r-nongeneric vectors, the orthogonal-complement criterion, geodesic scans.

The normalized magnitude of order ``k`` is::

    m_k = |(X_flat (x) X_flat) o (nabla^k_X R)(., X, ., X)|_max
          / (|g|_max^2 * |X|_inf^(4+k) * max_{j<=k} |nabla^j R|_max)

which is invariant under ``X -> lambda X`` and under constant rescaling of the
curvature.  A vector is generic when ``m_0 > tol``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import JetOrderError
from .geometry import (
    _contract_all,
    _vec,
    causal_character,
    curvature_derivatives,
    geodesic_flows,
    metric_jet,
    MetricJet,
)
from .tensor import ZERO_FLOOR, kulkarni_nomizu

__all__ = [
    "DEFAULT_TOL",
    "PLATEAU_MIN",
    "GenericityVerdict",
    "ScanReport",
    "lower",
    "contract_slots_2_4",
    "generic_quantity",
    "magnitudes",
    "is_generic",
    "is_r_nongeneric",
    "orthogonal_basis",
    "beem_harris_value",
    "beem_harris_test",
    "annotate_traces",
    "scan_geodesic",
    "scan_geodesics",
]

DEFAULT_TOL = 1e-10
PLATEAU_MIN = 3
SCHEMA_VERSION = "1.0"
WINDOW_NOTE = (
    "verdicts cover the integrated parameter window only; "
    "inextendible geodesics are not certified"
)


def lower(g, X):
    return np.einsum("...ab,...b->...a", g, X)


def contract_slots_2_4(R, X):
    """``R(., X, ., X)_ab = R_aebf X^e X^f``."""
    return np.einsum("...aebf,...e,...f->...ab", R, X, X)


def generic_quantity(X, g, R):
    """``(X_flat (x) X_flat) o R(., X, ., X)`` (Kulkarni-Nomizu product)."""
    X = _vec(X)
    g = np.asarray(g, dtype=float)
    R = np.asarray(R, dtype=float)
    if not (g.shape[-1] == R.shape[-1] == X.shape[-1]):
        raise ValueError("dimension mismatch between g, R and X")
    Xf = lower(g, X)
    return kulkarni_nomizu(np.einsum("...a,...b->...ab", Xf, Xf), contract_slots_2_4(R, X))


def magnitudes(X, g, derivs):
    """Normalized magnitudes ``m_0..m_{len(derivs)-1}`` (last axis).

    ``derivs`` are the full tensors ``[R, nabla R, ...]``; the batch axes of
    ``X`` may extend those of ``g`` and ``derivs`` on the right (several
    vectors per point).
    """
    X = _vec(X)
    g = np.asarray(g, dtype=float)
    extra = X.ndim - 1 - (g.ndim - 2)
    g = g.reshape(g.shape[:-2] + (1,) * extra + g.shape[-2:])
    contracted = _contract_all(derivs, X)
    gnorm = np.max(np.abs(g), axis=(-2, -1))
    xnorm = np.max(np.abs(X), axis=-1)
    Xf = lower(g, X)
    XX = np.einsum("...a,...b->...ab", Xf, Xf)
    scale = np.zeros(X.shape[:-1])
    out = []
    for k, (D, C) in enumerate(zip(derivs, contracted)):
        bd = D.ndim - 4 - k
        full = np.max(np.abs(D), axis=tuple(range(bd, D.ndim)))
        full = full.reshape(full.shape + (1,) * extra)
        scale = np.maximum(scale, full)
        Q = kulkarni_nomizu(XX, contract_slots_2_4(C, X))
        qn = np.max(np.abs(Q), axis=(-4, -3, -2, -1))
        denom = gnorm**2 * xnorm ** (4 + k) * np.maximum(scale, ZERO_FLOOR)
        out.append(np.where(scale > ZERO_FLOOR, qn / denom, 0.0))
    return np.stack(out, axis=-1)


@dataclass
class GenericityVerdict:
    vector: np.ndarray
    causal_character: str
    magnitudes: list
    tol: float
    r: int = None

    @property
    def magnitude(self):
        return self.magnitudes[0]

    @property
    def generic(self):
        return self.magnitudes[0] > self.tol

    @property
    def r_nongeneric(self):
        if self.r is None:
            return None
        return all(m <= self.tol for m in self.magnitudes[: self.r + 1])

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "vector": [float(v) for v in self.vector],
            "causal_character": self.causal_character,
            "magnitudes": [float(m) for m in self.magnitudes],
            "generic": bool(self.generic),
            "r_nongeneric": self.r_nongeneric,
            "r": self.r,
            "tol": float(self.tol),
        }


def _verdict(X, mj, count, tol, r):
    X = _vec(X)
    if mj.point.ndim != 1:
        raise ValueError("verdicts are computed for a single base point")
    derivs = curvature_derivatives(mj, count)
    m = magnitudes(X, mj.value, derivs)
    return GenericityVerdict(X.copy(), causal_character(mj.value, X), [float(v) for v in m], tol, r)


def is_generic(X, mj, tol=DEFAULT_TOL):
    """Order-0 genericity of ``X`` for a metric jet of order >= 2."""
    if mj.order < 2:
        raise JetOrderError("genericity needs a metric jet of order >= 2")
    return _verdict(X, mj, 1, tol, None)


def is_r_nongeneric(X, mj, r, tol=DEFAULT_TOL):
    """Magnitudes ``m_0..m_r``; ``X`` is r-nongeneric iff all are <= ``tol``.

    Needs a metric jet of order ``r + 2``.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    if mj.order < r + 2:
        raise JetOrderError(f"r = {r} needs a metric jet of order {r + 2}, got {mj.order}")
    return _verdict(X, mj, r + 1, tol, r)


def orthogonal_basis(g, X):
    """Basis of ``{A : g(A, X) = 0}`` by pivoted elimination on ``g X``.

    With ``w = g X`` and pivot ``p = argmax |w_i|`` the vectors are
    ``e_j - (w_j / w_p) e_p`` for ``j != p``; rows of the returned ``(n-1, n)``
    array.  Entries are bounded by 1 in absolute value.
    """
    w = lower(np.asarray(g, dtype=float), _vec(X))
    p = int(np.argmax(np.abs(w)))
    n = len(w)
    rows = []
    for j in range(n):
        if j == p:
            continue
        a = np.zeros(n)
        a[j] = 1.0
        a[p] = -w[j] / w[p]
        rows.append(a)
    return np.array(rows)


def beem_harris_value(X, g, R):
    """Normalized ``max |R(A_i, X, A_j, X)|`` over the pivoted basis of ``X``-perp."""
    X = _vec(X)
    R = np.asarray(R, dtype=float)
    rnorm = np.max(np.abs(R))
    if rnorm <= ZERO_FLOOR:
        return 0.0
    A = orthogonal_basis(g, X)
    S = A @ contract_slots_2_4(R, X) @ A.T
    basis_scale = np.max(np.abs(A)) ** 2
    return float(np.max(np.abs(S)) / (rnorm * np.max(np.abs(X)) ** 2 * basis_scale))


def beem_harris_test(X, g, R, tol=DEFAULT_TOL):
    """True iff ``R(A, X, B, X) = 0`` for all ``A, B`` orthogonal to ``X`` (order-0 nongenericity)."""
    return beem_harris_value(X, g, R) <= tol


# ---------------------------------------------------------------------------
# geodesic scans
# ---------------------------------------------------------------------------


def annotate_traces(chart, traces, chunk=2048, tol=DEFAULT_TOL):
    """Fill ``magnitude`` and ``character`` of each trace in place."""
    for trace in traces:
        mags = np.zeros(len(trace))
        chars = np.empty(len(trace), dtype=object)
        for s in range(0, len(trace), chunk):
            x = trace.x[s : s + chunk]
            v = trace.xdot[s : s + chunk]
            mj = MetricJet(x, 2, chart.metric_coefficients(x, 2), check_signature=False)
            derivs = curvature_derivatives(mj, 1)
            mags[s : s + chunk] = magnitudes(v, mj.value, derivs)[..., 0]
            chars[s : s + chunk] = causal_character(mj.value, v)
        trace.magnitude = mags
        trace.character = chars
    return traces


def _runs(mask):
    runs = []
    i = 0
    while i < len(mask):
        if mask[i]:
            j = i
            while j + 1 < len(mask) and mask[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


@dataclass
class ScanReport:
    """Zero structure of the genericity magnitude along one geodesic window.

    A run of sub-tolerance samples is a ``plateau`` when it spans at least
    ``PLATEAU_MIN`` consecutive samples (a discreteness violation at this
    resolution; the threshold is a heuristic) and a ``dip`` otherwise.
    ``higher_order_witness`` tells whether, at every sample of the run, some
    magnitude of order ``1..r`` exceeds the tolerance, i.e. the zero is isolated.
    """

    trace: object
    r: int
    tol: float
    runs: list = field(default_factory=list)

    @property
    def generic_point_found(self):
        return bool(np.any(self.trace.magnitude > self.tol))

    @property
    def plateaus(self):
        return sum(1 for run in self.runs if run["kind"] == "plateau")

    @property
    def dips(self):
        return sum(1 for run in self.runs if run["kind"] == "dip")

    def summary(self):
        found = "yes" if self.generic_point_found else "no"
        if self.runs and len(self.runs) == 1 and self.runs[0]["length"] == len(self.trace):
            zeros = "plateau over full window"
        else:
            zeros = f"{self.plateaus} plateaus, {self.dips} dips"
        trunc = " (trace truncated at region boundary)" if self.trace.truncated else ""
        return f"generic point found: {found}; {zeros}{trunc}"

    def to_dict(self):
        t = self.trace
        return {
            "schema_version": SCHEMA_VERSION,
            "chart": t.chart,
            "window": [float(t.t[0]), float(t.t[-1])],
            "samples": len(t),
            "step": float(t.step),
            "truncated": bool(t.truncated),
            "generic_point_found": self.generic_point_found,
            "generic_samples": int(np.sum(t.magnitude > self.tol)),
            "plateaus": self.plateaus,
            "dips": self.dips,
            "runs": self.runs,
            "r": self.r,
            "tol": float(self.tol),
            "plateau_min_samples": PLATEAU_MIN,
            "note": WINDOW_NOTE,
        }


def _report(chart, trace, r, tol):
    below = trace.magnitude <= tol
    runs = []
    for i, j in _runs(below):
        witness = False
        if r >= 1:
            x = trace.x[i : j + 1]
            v = trace.xdot[i : j + 1]
            mj = MetricJet(x, r + 2, chart.metric_coefficients(x, r + 2), check_signature=False)
            m = magnitudes(v, mj.value, curvature_derivatives(mj, r + 1))
            witness = bool(np.all(np.any(m[:, 1:] > tol, axis=1)))
        length = j - i + 1
        runs.append(
            {
                "start_index": int(i),
                "end_index": int(j),
                "t_start": float(trace.t[i]),
                "t_end": float(trace.t[j]),
                "length": int(length),
                "kind": "plateau" if length >= PLATEAU_MIN else "dip",
                "higher_order_witness": witness,
            }
        )
    return ScanReport(trace, r, tol, runs)


def scan_geodesics(chart, points, vectors, t_span, step, r=1, tol=DEFAULT_TOL):
    traces = geodesic_flows(chart, points, vectors, t_span, step, annotate=False)
    annotate_traces(chart, traces, tol=tol)
    return [_report(chart, tr, r, tol) for tr in traces]


def scan_geodesic(chart, X0, t_span, step, r=1, point=None, tol=DEFAULT_TOL):
    """Integrate a geodesic and classify the zeros of its genericity magnitude."""
    point = getattr(X0, "point", None) if point is None else point
    if point is None:
        raise ValueError("initial point required")
    return scan_geodesics(chart, [point], [_vec(X0)], t_span, step, r=r, tol=tol)[0]


def verdict_at(chart, point, X, r=None, tol=DEFAULT_TOL):
    """Convenience: build the needed metric jet at ``point`` and test ``X``."""
    order = 2 if r is None else r + 2
    mj = metric_jet(chart, point, order)
    return is_generic(X, mj, tol) if r is None else is_r_nongeneric(X, mj, r, tol)
