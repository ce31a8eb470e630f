"""Truncated multivariate Taylor arithmetic.

A jet of order ``k`` in ``n`` variables is stored as a coefficient array whose
last axis runs over the multi-indices ``alpha`` with ``|alpha| <= k`` in graded
lexicographic order (total degree ascending; within a degree, exponent tuples in
descending lexicographic order, so ``x0`` precedes ``x1``).  Entry ``alpha``
holds ``d^alpha f / alpha!`` at the base point.  Because the order is graded,
the coefficients of the order-``j`` truncation are exactly the first
``C(n + j, j)`` entries.

All kernels accept arbitrary leading batch/tensor axes, so a whole metric (or a
batch of metrics at many points) is processed in one numpy call.
"""
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb, factorial

import numpy as np

from .errors import DomainError, JetOrderError

__all__ = [
    "multi_indices",
    "num_coefficients",
    "index_of",
    "jet_mul",
    "jet_contract",
    "jet_derivative",
    "jet_gradient",
    "jet_truncate",
    "jet_reciprocal",
    "jet_compose",
    "series_coefficients",
    "variable_jet",
    "TaylorJet",
]


def num_coefficients(n, k):
    return comb(n + k, k)


@lru_cache(maxsize=None)
def multi_indices(n, k):
    """Multi-indices with total degree <= k, shape ``(C(n+k, k), n)``."""
    rows = []
    for degree in range(k + 1):
        block = []
        for combo in combinations_with_replacement(range(n), degree):
            alpha = [0] * n
            for var in combo:
                alpha[var] += 1
            block.append(tuple(alpha))
        block.sort(reverse=True)
        rows.extend(block)
    out = np.array(rows, dtype=np.int64).reshape(len(rows), n)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _index_map(n, k):
    return {tuple(int(v) for v in alpha): i for i, alpha in enumerate(multi_indices(n, k))}


def index_of(alpha, k=None):
    """Position of multi-index ``alpha`` in the graded order."""
    alpha = tuple(int(a) for a in alpha)
    if k is None:
        k = sum(alpha)
    return _index_map(len(alpha), k)[alpha]


@lru_cache(maxsize=None)
def _product_table(n, k):
    # pairs (i, j) with |alpha_i| + |alpha_j| <= k, grouped by target index
    alphas = multi_indices(n, k)
    lookup = _index_map(n, k)
    degrees = alphas.sum(axis=1)
    left, right, target = [], [], []
    for i, a in enumerate(alphas):
        for j in range(len(alphas)):
            if degrees[i] + degrees[j] > k:
                break
            left.append(i)
            right.append(j)
            target.append(lookup[tuple(int(v) for v in a + alphas[j])])
    left, right, target = map(np.asarray, (left, right, target))
    order = np.argsort(target, kind="stable")
    left, right, target = left[order], right[order], target[order]
    starts = np.flatnonzero(np.r_[True, target[1:] != target[:-1]])
    return left, right, starts


@lru_cache(maxsize=None)
def _derivative_table(n, k, var):
    # d/dx_var maps order k onto order k-1
    src = []
    factor = []
    lookup = _index_map(n, k)
    for beta in multi_indices(n, k - 1):
        up = beta.copy()
        up[var] += 1
        src.append(lookup[tuple(int(v) for v in up)])
        factor.append(beta[var] + 1)
    return np.asarray(src), np.asarray(factor, dtype=float)


def _nk(a, n):
    N = a.shape[-1]
    k = 0
    while num_coefficients(n, k) < N:
        k += 1
    if num_coefficients(n, k) != N:
        raise ValueError(f"coefficient axis of length {N} is not a jet in {n} variables")
    return k


def jet_mul(a, b, n, k=None):
    """Truncated product of jets with broadcasting over leading axes."""
    if k is None:
        k = _nk(a, n)
    left, right, starts = _product_table(n, k)
    return np.add.reduceat(a[..., left] * b[..., right], starts, axis=-1)


def jet_contract(subscripts, a, b, n, k=None):
    """``np.einsum`` over tensor axes combined with jet multiplication.

    ``subscripts`` names only tensor axes (e.g. ``"ab,bc->ac"``); leading batch
    axes and the trailing coefficient axis are handled implicitly.
    """
    if k is None:
        k = _nk(a, n)
    left, right, starts = _product_table(n, k)
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    prod = np.einsum(f"...{sa}z,...{sb}z->...{out}z", a[..., left], b[..., right])
    return np.add.reduceat(prod, starts, axis=-1)


def jet_truncate(a, n, k):
    return a[..., : num_coefficients(n, k)]


def jet_derivative(a, n, var, k=None):
    """Partial derivative along coordinate ``var``; the order drops by one."""
    if k is None:
        k = _nk(a, n)
    if k < 1:
        raise JetOrderError("cannot differentiate a jet of order 0")
    src, factor = _derivative_table(n, k, var)
    return a[..., src] * factor


def jet_gradient(a, n, k=None):
    """All partials stacked on a new axis placed just before the coefficients."""
    if k is None:
        k = _nk(a, n)
    return np.stack([jet_derivative(a, n, i, k) for i in range(n)], axis=-2)


def variable_jet(point, var, n, k):
    """Jet of the coordinate function ``x_var`` at (a batch of) points."""
    point = np.asarray(point, dtype=float)
    out = np.zeros(point.shape[:-1] + (num_coefficients(n, k),))
    out[..., 0] = point[..., var]
    if k >= 1:
        e = [0] * n
        e[var] = 1
        out[..., index_of(e, k)] = 1.0
    return out


def series_coefficients(name, c, k):
    """Taylor coefficients ``f^(j)(c) / j!``, ``j = 0..k``, of a univariate function.

    ``c`` may be an array; the series axis is appended last.
    """
    c = np.asarray(c, dtype=float)
    j = np.arange(k + 1)
    fact = np.array([float(factorial(i)) for i in j])
    cc = c[..., None]
    if name == "exp":
        return np.exp(cc) / fact
    if name == "log":
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(j == 0, 0.0, (-1.0) ** (j + 1) / np.maximum(j, 1) / cc**j)
        out[..., 0] = np.log(c)
        return out
    if name == "sqrt":
        binom = np.cumprod(np.r_[1.0, [(0.5 - i) / (i + 1) for i in range(k)]])
        return np.sqrt(cc) * binom / cc**j
    if name == "recip":
        return (-1.0) ** j / cc ** (j + 1)
    cycles = {
        "sin": (np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)),
        "cos": (np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin),
        "sinh": (np.sinh, np.cosh, np.sinh, np.cosh),
        "cosh": (np.cosh, np.sinh, np.cosh, np.sinh),
    }
    if name in cycles:
        funcs = cycles[name]
        return np.stack([funcs[i % 4](c) for i in j], axis=-1) / fact
    raise ValueError(f"no series for function '{name}'")


def jet_compose(a, coeffs, n, k=None):
    """Evaluate ``sum_j coeffs[j] * (a - a_0)^j`` by Horner's rule.

    ``coeffs`` is the Taylor series of the outer function about ``a_0``.
    """
    if k is None:
        k = _nk(a, n)
    u = a.copy()
    u[..., 0] = 0.0
    out = np.zeros_like(a)
    out[..., 0] = coeffs[..., k]
    for j in range(k - 1, -1, -1):
        out = jet_mul(out, u, n, k)
        out[..., 0] += coeffs[..., j]
    return out


def jet_reciprocal(a, n, k=None, where=None):
    if k is None:
        k = _nk(a, n)
    base = a[..., 0]
    if np.any(base == 0.0):
        raise DomainError("division by zero", where)
    return jet_compose(a, series_coefficients("recip", base, k), n, k)


@dataclass(frozen=True, eq=False)
class TaylorJet:
    """Truncated Taylor expansion of a scalar about ``point``.

    Arithmetic operators act coefficient-wise with truncation at ``order``;
    operands must share base point and order.
    """

    point: np.ndarray
    order: int
    coefficients: np.ndarray

    def __post_init__(self):
        point = np.array(self.point, dtype=float).reshape(-1)
        coeffs = np.array(self.coefficients, dtype=float)
        if coeffs.shape != (num_coefficients(point.size, self.order),):
            raise ValueError(
                f"expected {num_coefficients(point.size, self.order)} coefficients, "
                f"got shape {coeffs.shape}"
            )
        point.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def n(self):
        return self.point.size

    @property
    def value(self):
        return float(self.coefficients[0])

    @property
    def multi_indices(self):
        return multi_indices(self.n, self.order)

    @classmethod
    def constant(cls, value, point, order):
        point = np.asarray(point, dtype=float).reshape(-1)
        c = np.zeros(num_coefficients(point.size, order))
        c[0] = value
        return cls(point, order, c)

    @classmethod
    def from_derivatives(cls, point, order, derivatives):
        """Build from raw partial derivatives listed in graded order."""
        point = np.asarray(point, dtype=float).reshape(-1)
        fact = np.prod([[factorial(int(v)) for v in a] for a in multi_indices(point.size, order)], axis=1)
        return cls(point, order, np.asarray(derivatives, dtype=float) / fact)

    def coefficient(self, alpha):
        return float(self.coefficients[index_of(alpha, self.order)])

    def derivative(self, alpha):
        """Raw partial derivative ``d^alpha f`` at the base point."""
        scale = np.prod([factorial(int(a)) for a in alpha])
        return self.coefficient(alpha) * scale

    def derivatives(self):
        fact = np.prod([[factorial(int(v)) for v in a] for a in self.multi_indices], axis=1)
        return self.coefficients * fact

    def truncate(self, order):
        if order > self.order:
            raise JetOrderError(f"cannot raise jet order {self.order} to {order}")
        return TaylorJet(self.point, order, jet_truncate(self.coefficients, self.n, order))

    def partial(self, var):
        return TaylorJet(self.point, self.order - 1, jet_derivative(self.coefficients, self.n, var, self.order))

    def polynomial(self, x):
        """Evaluate the truncated series at ``x`` (shape ``(..., n)``)."""
        h = np.asarray(x, dtype=float) - self.point
        monomials = np.prod(h[..., None, :] ** self.multi_indices, axis=-1)
        return monomials @ self.coefficients

    def _check(self, other):
        if not isinstance(other, TaylorJet):
            return False
        if other.order != self.order or not np.array_equal(other.point, self.point):
            raise ValueError("jets must share base point and order")
        return True

    def __add__(self, other):
        if self._check(other):
            return TaylorJet(self.point, self.order, self.coefficients + other.coefficients)
        return TaylorJet(self.point, self.order, self.coefficients + _const_vec(other, self))

    __radd__ = __add__

    def __neg__(self):
        return TaylorJet(self.point, self.order, -self.coefficients)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if self._check(other):
            return TaylorJet(
                self.point, self.order, jet_mul(self.coefficients, other.coefficients, self.n, self.order)
            )
        return TaylorJet(self.point, self.order, self.coefficients * float(other))

    __rmul__ = __mul__

    def reciprocal(self):
        return TaylorJet(self.point, self.order, jet_reciprocal(self.coefficients, self.n, self.order))

    def __truediv__(self, other):
        if isinstance(other, TaylorJet):
            return self * other.reciprocal()
        return self * (1.0 / float(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    def __repr__(self):
        return f"TaylorJet(n={self.n}, order={self.order}, value={self.value:.6g})"


def _const_vec(c, jet):
    out = np.zeros_like(jet.coefficients)
    out[0] = float(c)
    return out
