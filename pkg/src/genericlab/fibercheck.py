"""Fiberwise linear algebra behind the genericity theorem, as explicit matrices.

Coordinates are chosen with the direction vector ``X = e_0``, so the top-order
part of ``nabla^{r-1}_X R`` reads the metric derivatives ``Q_{ab, c d 0...0}``.
"""
from dataclasses import asdict, dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np
import scipy.linalg

from .errors import SymmetryError
from .genericity import contract_slots_2_4, orthogonal_basis
from .geometry import _vec, causal_character
from .tensor import (
    _basis_matrix,
    _emit,
    check_curvature,
    curv_coordinates,
    curv_space_basis,
    curv_space_dim,
    sympair_basis,
    sympair_element,
)

__all__ = [
    "RANK_RTOL",
    "FiberMapReport",
    "numerical_rank",
    "alpha_linear",
    "alpha_fiber_matrix",
    "right_inverse",
    "quotient_basis",
    "c_map_matrix",
    "c_map_rank",
    "codim_nongen",
    "r_threshold",
    "dim_check",
    "jet_fiber_dim",
    "surjectivity_report",
    "right_inverse_error",
]

RANK_RTOL = 1e-8


def numerical_rank(M, rtol=RANK_RTOL):
    """Number of singular values above ``rtol`` times the largest."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def alpha_linear(Q, r):
    """Top-order part of ``nabla^{r-1}_X R`` as a function of the metric derivatives.

    ``Q`` has shape ``(n,) * (3 + r)`` with index groups ``(a b | c d i_1..i_{r-1})``;
    returns ``1/2 (Q_adbc0..0 + Q_bcad0..0 - Q_acbd0..0 - Q_bdac0..0)``.
    """
    q = np.asarray(Q, dtype=float)[(Ellipsis,) + (0,) * (r - 1)] if r > 1 else np.asarray(Q, dtype=float)
    return _emit(0.5 * (
        np.einsum("adbc->abcd", q)
        + np.einsum("bcad->abcd", q)
        - np.einsum("acbd->abcd", q)
        - np.einsum("bdac->abcd", q)
    ))


def _drop_direction(mset, r):
    # multiset {c, d} left after removing r - 1 copies of the X index, or None
    rest = list(mset)
    for _ in range(r - 1):
        if 0 not in rest:
            return None
        rest.remove(0)
    return tuple(rest)


@lru_cache(maxsize=None)
def _alpha_matrix(n, r):
    labels = sympair_basis(n, r)
    images = np.zeros((len(labels), n, n, n, n))
    for col, ((a, b), mset) in enumerate(labels):
        cd = _drop_direction(mset, r)
        if cd is None:
            continue
        c, d = cd
        q = np.zeros((n,) * 4)
        for i, j in ((a, b), (b, a)):
            q[i, j, c, d] = q[i, j, d, c] = 1.0
        images[col] = alpha_linear(q, 1)
    M = curv_coordinates(images).T
    M.setflags(write=False)
    return M


def alpha_fiber_matrix(n, r):
    """Matrix of ``S_2 (x) S_{r+1} -> curvature tensors`` in the canonical bases.

    Rows are coordinates in :func:`~genericlab.tensor.curv_space_basis`;
    columns follow :func:`~genericlab.tensor.sympair_basis`.
    """
    if n < 2 or r < 1:
        raise ValueError("need n >= 2 and r >= 1")
    return _alpha_matrix(n, r)


def right_inverse(P, n=None, r=1, dense=True):
    """Symmetric ``Q`` with ``Q_{ab, c d 0..0} = -(P_acbd + P_adbc)/3`` and zero elsewhere.

    Entries are filled for every ordering of the symmetric index group, so
    ``Q`` lies in ``S_2 (x) S_{r+1}`` and :func:`alpha_linear` maps it back to ``P``.
    Returns ``(Q, coordinates)`` where the coordinates follow the canonical basis;
    ``Q`` is None when ``dense`` is false.
    """
    P = np.asarray(P, dtype=float)
    if n is None:
        n = P.shape[0]
    if P.shape != (n,) * 4:
        raise ValueError(f"P must have shape {(n,) * 4}")
    try:
        check_curvature(P, tol=1e-10)
    except SymmetryError as exc:
        raise SymmetryError(f"right inverse needs a curvature tensor: {exc}") from None
    q = -(np.einsum("acbd->abcd", P) + np.einsum("adbc->abcd", P)) / 3.0
    labels = sympair_basis(n, r)
    coords = np.zeros(len(labels))
    Q = np.zeros((n,) * (3 + r)) if dense else None
    for idx, label in enumerate(labels):
        cd = _drop_direction(label[1], r)
        if cd is None:
            continue
        (a, b), (c, d) = label[0], cd
        coords[idx] = q[a, b, c, d]
        if dense and coords[idx] != 0.0:
            Q += coords[idx] * sympair_element(n, r, label)
    return Q, coords


def quotient_basis(g, X):
    """Basis of ``X-perp / R X`` for null ``X``: rows of an ``(n-2, n)`` array.

    The pivoted basis of ``X-perp`` has its ``X`` component removed along the
    largest coordinate of ``X``; the dependent vector is dropped by pivoted QR.
    """
    X = _vec(X)
    A = orthogonal_basis(g, X)
    q = int(np.argmax(np.abs(X)))
    B = A - np.outer(A[:, q] / X[q], X)
    _, _, piv = scipy.linalg.qr(B.T, pivoting=True)
    keep = np.sort(piv[: len(X) - 2])
    return B[keep]


def c_map_matrix(g, X, null=None):
    """Matrix of ``R -> (R(A_i, X, A_j, X))_{i <= j}`` over the curvature basis."""
    X = _vec(X)
    g = np.asarray(g, dtype=float)
    n = len(X)
    if null is None:
        null = causal_character(g, X) == "null"
    A = quotient_basis(g, X) if null else orthogonal_basis(g, X)
    m = len(A)
    iu = np.triu_indices(m)
    cols = []
    for R in curv_space_basis(n):
        S = A @ contract_slots_2_4(R, X) @ A.T
        cols.append(S[iu])
    return np.array(cols).T


@dataclass
class FiberMapReport:
    n: int
    r: int
    causal_class: str
    rows: int
    cols: int
    rank: int
    expected_rank: int
    codimension: int
    expected_codimension: int

    @property
    def ok(self):
        return self.rank == self.expected_rank and self.codimension == self.expected_codimension

    def to_dict(self):
        out = asdict(self)
        out["ok"] = self.ok
        return out


def c_map_rank(n, g, X, r=1):
    """Rank of the map ``c`` at ``(X, g)`` and the codimension it implies for ``r`` copies."""
    X = _vec(X)
    g = np.asarray(g, dtype=float)
    if g.shape != (n, n) or X.shape != (n,):
        raise ValueError("dimension mismatch")
    null = causal_character(g, X) == "null"
    M = c_map_matrix(g, X, null)
    rank = numerical_rank(M)
    expected = (n - 1) * (n - 2) // 2 if null else n * (n - 1) // 2
    cls = "null" if null else "non-null"
    return FiberMapReport(
        n=n,
        r=r,
        causal_class=cls,
        rows=M.shape[0],
        cols=M.shape[1],
        rank=rank,
        expected_rank=expected,
        codimension=r * rank + (1 if null else 0),
        expected_codimension=codim_nongen(n, r, cls),
    )


def codim_nongen(n, r, causal_class):
    """Codimension of the nongenericity set: ``rn(n-1)/2`` or ``r(n-1)(n-2)/2 + 1``."""
    if n < 2 or r < 1:
        raise ValueError("need n >= 2 and r >= 1")
    if causal_class in ("non-null", "nonnull", "timelike", "spacelike"):
        return r * n * (n - 1) // 2
    if causal_class == "null":
        return r * (n - 1) * (n - 2) // 2 + 1
    raise ValueError(f"unknown causal class {causal_class!r}")


def r_threshold(n):
    """Smallest integer ``r > (4n - 2) / ((n - 1)(n - 2))``."""
    if n < 3:
        raise ValueError("the threshold is defined for n >= 3")
    bound = Fraction(4 * n - 2, (n - 1) * (n - 2))
    return bound.numerator // bound.denominator + 1


def dim_check(n, r):
    """Compare ``dim T M minus zero section = 2n`` against both codimensions."""
    if n < 3 or r < 1:
        raise ValueError("need n >= 3 and r >= 1")
    dim = 2 * n
    c_non = codim_nongen(n, r, "non-null")
    c_null = codim_nongen(n, r, "null")
    report = {
        "n": n,
        "r": r,
        "dimension": dim,
        "codim_non_null": c_non,
        "codim_null": c_null,
        "non_null_ok": dim < c_non,
        "null_ok": dim < c_null,
        "threshold": r_threshold(n),
    }
    report["passes"] = report["non_null_ok"] and report["null_ok"]
    if r >= report["threshold"] and not report["passes"]:  # pragma: no cover - arithmetic identity
        raise AssertionError(f"dim check fails above the threshold for n={n}, r={r}")
    return report


def jet_fiber_dim(n, k):
    """Dimension of a fiber of the ``k``-jet bundle of metrics: ``n(n+1)/2 * C(n+k, k)``."""
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    return n * (n + 1) // 2 * sum(comb(n + j - 1, j) for j in range(k + 1))


def surjectivity_report(n, r):
    """Rank of the fiber matrix against the curvature space dimension."""
    M = alpha_fiber_matrix(n, r)
    rank = numerical_rank(M)
    return {
        "n": n,
        "r": r,
        "rows": int(M.shape[0]),
        "cols": int(M.shape[1]),
        "rank": rank,
        "curv_space_dim": curv_space_dim(n),
        "surjective": rank == curv_space_dim(n),
    }


def right_inverse_error(P, r):
    """``|alpha(Q(P)) - P|_max / |P|_max`` via the fiber matrix."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    _, coords = right_inverse(P, n, r, dense=False)
    image = alpha_fiber_matrix(n, r) @ coords
    back = (_basis_matrix(n) @ image).reshape((n,) * 4)
    scale = max(float(np.max(np.abs(P))), 1e-300)
    return float(np.max(np.abs(back - P)) / scale)
