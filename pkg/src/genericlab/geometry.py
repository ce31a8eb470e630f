"""Curvature and its covariant derivatives from metric jets; geodesic integration.

Tensor-field jets are arrays of shape ``(..., n, ..., n, N)``: leading batch
axes, one axis per covariant slot, and a trailing Taylor-coefficient axis (see
:mod:`genericlab.taylor`).  Christoffel symbols ``Gamma^a_bc`` are stored with
the upper index first.

Sign convention: ``R_abcd = 1/2 (g_ad,bc + g_bc,ad - g_ac,bd - g_bd,ac)
+ g_np (Gamma^n_bc Gamma^p_ad - Gamma^n_bd Gamma^p_ac)``.  Genericity verdicts
only test vanishing, so they do not depend on it.
"""
import csv
import io
from dataclasses import dataclass, field
from string import ascii_lowercase

import numpy as np

from . import taylor
from .errors import DomainError, JetOrderError, RegionError
from .tensor import _emit, check_lorentzian, curvature_projector

__all__ = [
    "MetricJet",
    "TangentVector",
    "AlphaImage",
    "GeodesicTrace",
    "causal_character",
    "metric_jet",
    "inverse_metric_jet",
    "christoffel_jet",
    "riemann_jet",
    "riemann_from_jet",
    "covariant_derivative_jet",
    "curvature_derivatives",
    "contract_directional",
    "alpha_r",
    "christoffel_at",
    "geodesic_flow",
    "geodesic_flows",
    "write_trace_csv",
]

NULL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MetricJet:
    """Taylor data of a metric at a point: ``coefficients[..., a, b, alpha]``.

    ``point`` may carry leading batch axes, in which case the coefficients do too.
    """

    point: np.ndarray
    order: int
    coefficients: np.ndarray
    check_signature: bool = True

    def __post_init__(self):
        point = np.array(self.point, dtype=float)
        coeffs = np.array(self.coefficients, dtype=float)
        n = point.shape[-1]
        expected = point.shape[:-1] + (n, n, taylor.num_coefficients(n, self.order))
        if coeffs.shape != expected:
            raise ValueError(f"coefficients must have shape {expected}, got {coeffs.shape}")
        if not np.allclose(coeffs, np.swapaxes(coeffs, -2, -3), rtol=0, atol=1e-14 * max(1.0, np.abs(coeffs).max())):
            raise ValueError("metric jet is not symmetric")
        if self.check_signature:
            check_lorentzian(coeffs[..., 0])
        point.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def n(self):
        return self.point.shape[-1]

    @property
    def value(self):
        """Metric matrix at the base point."""
        return self.coefficients[..., 0]

    def component(self, a, b):
        if self.point.ndim != 1:
            raise ValueError("component jets are only available for a single base point")
        return taylor.TaylorJet(self.point, self.order, self.coefficients[a, b])

    def truncate(self, order):
        if order > self.order:
            raise JetOrderError(f"metric jet has order {self.order}, {order} requested")
        return MetricJet(
            self.point, order, taylor.jet_truncate(self.coefficients, self.n, order), check_signature=False
        )


def causal_character(g, X):
    """``'timelike'``, ``'null'`` or ``'spacelike'`` (vectorised over a batch)."""
    g = np.asarray(g, dtype=float)
    X = np.asarray(X, dtype=float)
    q = np.einsum("...ab,...a,...b->...", g, X, X)
    scale = np.max(np.abs(g), axis=(-2, -1)) * np.max(np.abs(X), axis=-1) ** 2
    out = np.where(np.abs(q) <= NULL_TOL * scale, "null", np.where(q < 0, "timelike", "spacelike"))
    return str(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A nonzero tangent vector at ``point`` with its causal character under ``g``."""

    point: np.ndarray
    components: np.ndarray
    character: str

    @classmethod
    def at(cls, point, components, g):
        X = np.asarray(components, dtype=float).copy()
        if X.ndim != 1 or not np.max(np.abs(X), initial=0.0) > 0:
            raise ValueError("tangent vector must be a nonzero 1-d array")
        X.setflags(write=False)
        return cls(np.asarray(point, dtype=float), X, causal_character(g, X))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.components, dtype=dtype)


def _vec(X):
    X = np.asarray(X.components if isinstance(X, TangentVector) else X, dtype=float)
    if not np.all(np.max(np.abs(X), axis=-1) > 0):
        raise ValueError("vector must be nonzero")
    return X


def metric_jet(chart, p, k):
    """Order-``k`` jet of the chart's metric at ``p`` (or a batch of points)."""
    p = np.asarray(p, dtype=float)
    chart.require_region(p)
    return MetricJet(p, k, chart.metric_coefficients(p, k))


def inverse_metric_jet(mj, order=None):
    """Jet of ``g^{-1}``: Neumann series ``sum_j (-G0^{-1} E)^j G0^{-1}``, exact to the order."""
    k = mj.order if order is None else order
    n = mj.n
    G = taylor.jet_truncate(mj.coefficients, n, k)
    G0inv = np.linalg.inv(G[..., 0])
    E = G.copy()
    E[..., 0] = 0.0
    A = -np.einsum("...ab,...bcz->...acz", G0inv, E)
    term = np.zeros_like(G)
    term[..., 0] = G0inv
    H = term.copy()
    for _ in range(k):
        term = taylor.jet_contract("ab,bc->ac", A, term, n, k)
        H = H + term
    return H


def _first_kind(dg):
    # dg[..., a, b, e, z] = d_e g_ab ;  out[d, b, c] = 1/2 (d_b g_dc + d_c g_db - d_d g_bc)
    t1 = np.einsum("...dcbz->...dbcz", dg)
    t2 = dg
    t3 = np.einsum("...bcdz->...dbcz", dg)
    return 0.5 * (t1 + t2 - t3)


def christoffel_jet(mj, first_kind=False):
    """Jets of ``Gamma^a_bc`` of order ``k - 1`` (``Gamma_{a,bc}`` if ``first_kind``)."""
    if mj.order < 1:
        raise JetOrderError("Christoffel symbols need a metric jet of order >= 1")
    n, k = mj.n, mj.order
    dg = taylor.jet_gradient(mj.coefficients, n, k)
    lower = _first_kind(dg)
    if first_kind:
        return lower
    ginv = inverse_metric_jet(mj, k - 1)
    return taylor.jet_contract("ad,dbc->abc", ginv, lower, n, k - 1)


def riemann_jet(mj):
    """Jet of ``R_abcd`` of order ``k - 2``."""
    if mj.order < 2:
        raise JetOrderError("curvature needs a metric jet of order >= 2")
    n, k = mj.n, mj.order
    dg = taylor.jet_gradient(mj.coefficients, n, k)
    ddg = taylor.jet_gradient(dg, n, k - 1)  # ddg[a, b, e, f] = d_f d_e g_ab
    second = 0.5 * (
        np.einsum("...adbcz->...abcdz", ddg)
        + np.einsum("...bcadz->...abcdz", ddg)
        - np.einsum("...acbdz->...abcdz", ddg)
        - np.einsum("...bdacz->...abcdz", ddg)
    )
    lower = taylor.jet_truncate(_first_kind(dg), n, k - 2)
    ginv = inverse_metric_jet(mj, k - 2)
    upper = taylor.jet_contract("ad,dbc->abc", ginv, lower, n, k - 2)
    # g_np Gamma^n_bc Gamma^p_ad = Gamma_{p,bc} Gamma^p_ad
    quad = taylor.jet_contract("pbc,pad->abcd", lower, upper, n, k - 2)
    quad = quad - np.einsum("...abdcz->...abcdz", quad)
    return second + quad


def riemann_from_jet(mj):
    """Curvature tensor ``R_abcd`` at the base point(s)."""
    return _emit(riemann_jet(mj)[..., 0])


_SLOT_LETTERS = [c for c in ascii_lowercase if c not in "xyz"]


def covariant_derivative_jet(T, gamma, n):
    """``(nabla T)_{a1..as;e} = d_e T - sum_i Gamma^f_{e a_i} T_{..f..}``, slot ``e`` appended last.

    ``T`` is a covariant tensor-field jet of order ``k >= 1``; ``gamma`` holds
    Christoffel jets of order at least ``k - 1``.  The result has order ``k - 1``.
    """
    k = taylor._nk(T, n)
    if k < 1:
        raise JetOrderError("covariant derivative needs a tensor jet of order >= 1")
    gamma = taylor.jet_truncate(gamma, n, k - 1)
    if taylor._nk(gamma, n) != k - 1:
        raise JetOrderError("Christoffel jets of insufficient order")
    out = taylor.jet_gradient(T, n, k)
    Tk = taylor.jet_truncate(T, n, k - 1)
    slots = T.ndim - 1 - (gamma.ndim - 4)  # tensor axes of T
    letters = "".join(_SLOT_LETTERS[:slots])
    for i in range(slots):
        t_sub = letters[:i] + "x" + letters[i + 1 :]
        out = out - taylor.jet_contract(f"{t_sub},xy{letters[i]}->{letters}y", Tk, gamma, n, k - 1)
    return out


def curvature_derivatives(mj, count):
    """Full tensors ``[R, nabla R, ..., nabla^{count-1} R]`` at the base point(s)."""
    needed = count + 1
    if mj.order < needed:
        raise JetOrderError(f"{count} curvature derivative orders need a metric jet of order {needed}")
    n = mj.n
    gamma = christoffel_jet(mj)
    T = riemann_jet(mj)
    out = [T[..., 0]]
    for _ in range(1, count):
        T = covariant_derivative_jet(T, gamma, n)
        out.append(T[..., 0])
    return out


def contract_directional(T, X, slots):
    """Contract the last ``slots`` axes of ``T`` with ``X`` (batch axes broadcast)."""
    X = np.asarray(X, dtype=float)
    for _ in range(slots):
        rest = T.ndim - X.ndim  # tensor axes still present, the last one is contracted
        Xb = X.reshape(X.shape[:-1] + (1,) * (rest) + X.shape[-1:])
        T = np.sum(T * Xb, axis=-1)
    return T


def _contract_all(derivs, X):
    # vector batch axes may extend the tensor batch axes on the right.  For k >= 1
    # the contraction is a curvature tensor in exact arithmetic; it is projected
    # onto that space so that rounding noise (all there is when nabla R = 0)
    # carries the symmetries too.
    X = np.asarray(X, dtype=float)
    out = []
    for j, D in enumerate(derivs):
        bd = D.ndim - 4 - j
        extra = X.ndim - 1 - bd
        if extra < 0:
            raise ValueError("vector batch shape must extend the tensor batch shape")
        D = D.reshape(D.shape[:bd] + (1,) * extra + D.shape[bd:])
        C = contract_directional(D, X, j)
        out.append(_emit(C if j == 0 else curvature_projector(C)))
    return out


@dataclass(frozen=True, eq=False)
class AlphaImage:
    """Vector, 1-jet of the metric and ``nabla^k_X R`` for ``k = 0..r-1``."""

    vector: np.ndarray
    g1: MetricJet
    derivatives: list = field(default_factory=list)

    @property
    def r(self):
        return len(self.derivatives)


def alpha_r(X, mj, r=None):
    """Curvature and its directional covariant derivatives along ``X``.

    ``derivatives[k]`` is the full ``nabla^k R`` with every derivative slot
    contracted with ``X``.  Along the geodesic with initial velocity ``X`` the
    parallel extension of ``X`` is the velocity itself, so ``nabla_X X = 0`` and
    iterated directional derivatives equal this contraction; nothing needs to
    be transported numerically.
    """
    X = _vec(X)
    if r is None:
        r = mj.order - 1
    if r < 1:
        raise ValueError("r must be at least 1")
    if mj.order < r + 1:
        raise JetOrderError(f"alpha_{r} needs a metric jet of order {r + 1}, got {mj.order}")
    derivs = curvature_derivatives(mj, r)
    return AlphaImage(X, mj.truncate(1), _contract_all(derivs, X))


# ---------------------------------------------------------------------------
# geodesics
# ---------------------------------------------------------------------------


def christoffel_at(chart, x):
    """``Gamma^a_bc`` at point(s) ``x`` from a first-order forward-mode evaluation."""
    g, dg = chart.metric_and_gradient(x)
    lower = 0.5 * (np.swapaxes(dg, -1, -2) + dg - np.moveaxis(dg, -1, -3))
    return np.einsum("...ad,...dbc->...abc", np.linalg.inv(g), lower)


def _acceleration(chart, x, v):
    gamma = christoffel_at(chart, x)
    return -np.einsum("...abc,...b,...c->...a", gamma, v, v)


@dataclass
class GeodesicTrace:
    """Samples of a geodesic; ``magnitude`` is the normalized genericity quantity."""

    chart: str
    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    step: float
    truncated: bool = False
    magnitude: np.ndarray = None
    character: np.ndarray = None
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def norms(self, chart):
        """``g(xdot, xdot)`` at every sample."""
        g = chart.metric_at(self.x)
        return np.einsum("...ab,...a,...b->...", g, self.xdot, self.xdot)

    def norm_drift(self, chart):
        """``max_t |g(xdot, xdot)(t) - g(xdot, xdot)(t0)|`` relative to the initial value.

        For null geodesics the reference is ``|g|_max |xdot|_inf^2`` at ``t0``.
        """
        q = self.norms(chart)
        g0 = chart.metric_at(self.x[0])
        ref = np.max(np.abs(g0)) * np.max(np.abs(self.xdot[0])) ** 2
        if causal_character(g0, self.xdot[0]) != "null":
            ref = abs(q[0])
        return float(np.max(np.abs(q - q[0])) / ref)

    def to_rows(self):
        n = self.x.shape[1]
        header = ["t"] + [f"x{i}" for i in range(n)] + [f"xdot{i}" for i in range(n)]
        header += ["genericity_magnitude", "causal_character"]
        rows = []
        for i in range(len(self.t)):
            m = "" if self.magnitude is None else repr(float(self.magnitude[i]))
            c = "" if self.character is None else str(self.character[i])
            rows.append([repr(float(self.t[i]))] + [repr(float(v)) for v in self.x[i]]
                        + [repr(float(v)) for v in self.xdot[i]] + [m, c])
        return header, rows


def write_trace_csv(trace, target=None):
    """Write the trace as CSV to a path or file object; returns the text if ``target`` is None."""
    header, rows = trace.to_rows()
    buf = io.StringIO() if target is None else None
    fh = buf if target is None else (open(target, "w", newline="", encoding="utf-8") if isinstance(target, str) else target)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if isinstance(target, str):
            fh.close()
    return buf.getvalue() if buf is not None else None


def _safe_acceleration(chart, x, v, active):
    # evaluate the active geodesics; isolate any that hit a singular point
    idx = np.flatnonzero(active)
    acc = np.zeros_like(x)
    try:
        acc[idx] = _acceleration(chart, x[idx], v[idx])
        return acc, np.zeros(len(x), dtype=bool)
    except (DomainError, np.linalg.LinAlgError):
        failed = np.zeros(len(x), dtype=bool)
        for i in idx:
            try:
                acc[i] = _acceleration(chart, x[i], v[i])
            except (DomainError, np.linalg.LinAlgError):
                failed[i] = True
        return acc, failed


def geodesic_flows(chart, points, vectors, t_span, step, annotate=True, chunk=2048):
    """Integrate several geodesics together with fixed-step RK4.

    Each geodesic stops (``truncated=True``) at the last sample still inside
    the chart's region.  Returns one :class:`GeodesicTrace` per initial condition.
    """
    x = np.array(points, dtype=float, ndmin=2)
    v = np.array(vectors, dtype=float, ndmin=2)
    t0, t1 = map(float, t_span)
    if not step > 0:
        raise ValueError("step must be positive")
    if step < 1e-12 * max(1.0, abs(t1 - t0)):
        raise ValueError("step underflow")
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    if not np.all(chart.in_region(x)):
        raise RegionError("initial point outside the chart region")
    nsteps = int(np.ceil((t1 - t0) / step - 1e-9))
    G = len(x)
    xs = np.full((nsteps + 1, G, chart.n), np.nan)
    vs = np.full((nsteps + 1, G, chart.n), np.nan)
    xs[0], vs[0] = x, v
    length = np.ones(G, dtype=int)
    active = np.ones(G, dtype=bool)
    truncated = np.zeros(G, dtype=bool)
    evals = 0
    for i in range(nsteps):
        h = min(step, t1 - (t0 + i * step))
        a1, f1 = _safe_acceleration(chart, x, v, active)
        a2, f2 = _safe_acceleration(chart, x + 0.5 * h * v, v + 0.5 * h * a1, active)
        a3, f3 = _safe_acceleration(chart, x + 0.5 * h * (v + 0.5 * h * a1), v + 0.5 * h * a2, active)
        a4, f4 = _safe_acceleration(chart, x + h * (v + 0.5 * h * a2), v + h * a3, active)
        evals += 4 * int(active.sum())
        x_new = x + h * v + (h * h / 6.0) * (a1 + a2 + a3)
        v_new = v + (h / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
        failed = f1 | f2 | f3 | f4
        inside = np.zeros(G, dtype=bool)
        if active.any():
            inside[active] = chart.in_region(x_new[active]) & np.all(np.isfinite(x_new[active]), axis=-1)
        stop = active & (failed | ~inside)
        truncated |= stop
        active &= ~stop
        x = np.where(active[:, None], x_new, x)
        v = np.where(active[:, None], v_new, v)
        xs[i + 1, active] = x[active]
        vs[i + 1, active] = v[active]
        length[active] += 1
        if not active.any():
            break

    traces = []
    for j in range(G):
        L = length[j]
        ts = t0 + step * np.arange(L)
        if L == nsteps + 1:
            ts[-1] = min(ts[-1], t1)
        trace = GeodesicTrace(
            chart=chart.name,
            t=ts,
            x=xs[:L, j].copy(),
            xdot=vs[:L, j].copy(),
            step=step,
            truncated=bool(truncated[j]),
            stats={"steps": int(L - 1), "acceleration_evaluations": int(4 * (L - 1)), "batch_evaluations": evals},
        )
        traces.append(trace)
    if annotate:
        from .genericity import annotate_traces

        annotate_traces(chart, traces, chunk=chunk)
    return traces


def geodesic_flow(chart, X0, t_span, step, point=None, annotate=True):
    """RK4 geodesic with initial velocity ``X0`` based at ``point``."""
    if isinstance(X0, TangentVector):
        point = X0.point if point is None else point
    if point is None:
        raise ValueError("initial point required")
    return geodesic_flows(chart, [point], [_vec(X0)], t_span, step, annotate=annotate)[0]
