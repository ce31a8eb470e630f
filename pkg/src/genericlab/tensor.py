"""Dense small-dimension tensors with curvature symmetries.

Tensors are plain numpy arrays; the symmetry classes are enforced by checks
rather than packed storage.  Slot order follows ``R(x, y, v, w)`` throughout.
Leading batch axes are allowed wherever noted.
"""
from contextlib import contextmanager
from functools import lru_cache
from itertools import combinations_with_replacement, permutations

import numpy as np

from .errors import SignatureError, SymmetryError

__all__ = [
    "ZERO_FLOOR",
    "as_sym2",
    "check_lorentzian",
    "is_lorentzian",
    "kulkarni_nomizu",
    "riemann_symmetry_residual",
    "pair_symmetry_residual",
    "check_curvature",
    "curvature_projector",
    "curv_space_dim",
    "curv_space_basis",
    "curv_coordinates",
    "sympair_basis",
    "sympair_dim",
    "check_sympair",
    "curvature_audit",
]

ZERO_FLOOR = 1e-300
SIGNATURE_TOL = 1e-10


def as_sym2(a, atol=0.0):
    """Validate and return a symmetric matrix (or batch of them)."""
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    asym = np.max(np.abs(a - np.swapaxes(a, -1, -2)), initial=0.0)
    if asym > atol:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    return a


def _signature_ok(eig):
    scale = np.max(np.abs(eig), axis=-1)
    ok = np.sum(eig < 0, axis=-1) == 1
    ok &= np.min(np.abs(eig), axis=-1) > SIGNATURE_TOL * scale
    return ok


def is_lorentzian(g):
    """Elementwise signature test over a batch of symmetric matrices."""
    g = np.asarray(g, dtype=float)
    return _signature_ok(np.linalg.eigvalsh(g))


def check_lorentzian(g):
    """Return ``g`` if every matrix has signature (-, +, ..., +); raise otherwise."""
    g = as_sym2(g, atol=1e-12 * max(1.0, float(np.max(np.abs(g), initial=0.0))))
    eig = np.linalg.eigvalsh(g)
    ok = _signature_ok(eig)
    if not np.all(ok):
        bad = eig[~ok][0] if np.ndim(ok) else eig
        raise SignatureError(f"metric is not Lorentzian (eigenvalues {np.array2string(bad, precision=4)})")
    return g


# ---------------------------------------------------------------------------
# symmetry audit: records the worst residual of every curvature tensor emitted
# ---------------------------------------------------------------------------

_audit_stack = []


@contextmanager
def curvature_audit():
    """Collect symmetry residuals of every curvature tensor produced inside the block.

    Yields a dict with keys ``max_residual`` and ``count``.
    """
    record = {"max_residual": 0.0, "count": 0}
    _audit_stack.append(record)
    try:
        yield record
    finally:
        _audit_stack.remove(record)


def _emit(T):
    if _audit_stack:
        res = float(np.max(riemann_symmetry_residual(T), initial=0.0))
        count = int(np.prod(T.shape[:-4]))
        for record in _audit_stack:
            record["max_residual"] = max(record["max_residual"], res)
            record["count"] += count
    return T


# ---------------------------------------------------------------------------
# Kulkarni-Nomizu product and residuals
# ---------------------------------------------------------------------------


def kulkarni_nomizu(h, k):
    """Kulkarni-Nomizu product of symmetric 2-tensors (batched).

    ``(h o k)_{xyuv} = h_xu k_yv + h_yv k_xu - h_xv k_yu - h_yu k_xv``
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    if h.shape[-2:] != k.shape[-2:]:
        raise ValueError(f"dimension mismatch: {h.shape[-2:]} vs {k.shape[-2:]}")
    a = np.einsum("...xu,...yv->...xyuv", h, k)
    b = np.einsum("...xv,...yu->...xyuv", h, k)
    # grouped so that swapping h and k only commutes additions: exact symmetry
    out = (a + np.swapaxes(np.swapaxes(a, -4, -3), -2, -1)) - (b + np.swapaxes(np.swapaxes(b, -4, -3), -2, -1))
    # the cyclic identity holds only to rounding at the scale of h and k; when
    # the product cancels (null X in constant curvature) that noise is all that
    # is left, so project to keep the identities relative to the result itself
    return _emit(curvature_projector(out))


def _violations(T):
    # distance of T from each of the three defining subspaces
    anti1 = 0.5 * (T + np.swapaxes(T, -4, -3))
    anti2 = 0.5 * (T + np.swapaxes(T, -2, -1))
    cyc = (T + np.moveaxis(T, (-4, -3, -2), (-2, -4, -3)) + np.moveaxis(T, (-4, -3, -2), (-3, -2, -4))) / 3.0
    return anti1, anti2, cyc


def riemann_symmetry_residual(T):
    """Worst violation of the curvature identities relative to ``max |T|``.

    For each identity the violation is the component of ``T`` removed by the
    orthogonal projection onto tensors satisfying it:
    ``(T + T_swap)/2`` for the two antisymmetries and the cyclic sum over the
    first three slots divided by 3 for the first Bianchi identity.  Returns 0
    for the zero tensor; batched over leading axes.
    """
    T = np.asarray(T, dtype=float)
    scale = np.max(np.abs(T), axis=(-4, -3, -2, -1))
    worst = np.zeros_like(scale)
    for part in _violations(T):
        worst = np.maximum(worst, np.max(np.abs(part), axis=(-4, -3, -2, -1)))
    out = np.where(scale > ZERO_FLOOR, worst / np.maximum(scale, ZERO_FLOOR), 0.0)
    return float(out) if out.ndim == 0 else out


def pair_symmetry_residual(T):
    T = np.asarray(T, dtype=float)
    scale = np.max(np.abs(T), axis=(-4, -3, -2, -1))
    diff = np.max(np.abs(T - np.moveaxis(T, (-4, -3), (-2, -1))), axis=(-4, -3, -2, -1))
    out = np.where(scale > ZERO_FLOOR, diff / np.maximum(scale, ZERO_FLOOR), 0.0)
    return float(out) if out.ndim == 0 else out


def check_curvature(T, tol=1e-10):
    """Return ``T`` if it is an algebraic curvature tensor to within ``tol``."""
    T = np.asarray(T, dtype=float)
    if T.ndim < 4 or len(set(T.shape[-4:])) != 1:
        raise ValueError(f"expected a (0,4) tensor, got shape {T.shape}")
    res = np.max(riemann_symmetry_residual(T), initial=0.0)
    if res > tol:
        raise SymmetryError(f"tensor violates curvature symmetries (residual {res:.3g})")
    return T


# ---------------------------------------------------------------------------
# The space of algebraic curvature tensors
# ---------------------------------------------------------------------------


def curvature_projector(T):
    """Orthogonal projection onto algebraic curvature tensors.

    Antisymmetrize both pairs and symmetrize under pair exchange; what remains
    of the cyclic sum is then totally antisymmetric and is subtracted.
    """
    T = np.asarray(T, dtype=float)
    S = 0.25 * (T - np.swapaxes(T, -4, -3) - np.swapaxes(T, -2, -1) + np.swapaxes(np.swapaxes(T, -4, -3), -2, -1))
    S = 0.5 * (S + np.moveaxis(S, (-4, -3), (-2, -1)))
    cyc = (S + np.moveaxis(S, (-4, -3, -2), (-2, -4, -3)) + np.moveaxis(S, (-4, -3, -2), (-3, -2, -4))) / 3.0
    return S - cyc


def curv_space_dim(n):
    """Dimension ``n^2 (n^2 - 1) / 12`` of the space of curvature tensors."""
    if n < 2:
        raise ValueError("dimension must be at least 2")
    return n * n * (n * n - 1) // 12


@lru_cache(maxsize=None)
def _basis_matrix(n):
    # columns: projected elementary tensors, greedily kept while independent
    cols = []
    Q = np.zeros((n**4, 0))
    for flat in range(n**4):
        e = np.zeros(n**4)
        e[flat] = 1.0
        v = curvature_projector(e.reshape((n,) * 4)).ravel()
        if np.max(np.abs(v)) < 1e-12:
            continue
        resid = v - Q @ (Q.T @ v)
        norm = np.linalg.norm(resid)
        if norm > 1e-8 * np.linalg.norm(v):
            cols.append(v / np.max(np.abs(v)))
            Q = np.column_stack([Q, resid / norm])
        if len(cols) == curv_space_dim(n):
            break
    B = np.column_stack(cols)
    B.setflags(write=False)
    return B


def curv_space_basis(n):
    """Basis of curvature tensors obtained from projected elementary tensors."""
    B = _basis_matrix(n)
    return [B[:, i].reshape((n,) * 4).copy() for i in range(B.shape[1])]


@lru_cache(maxsize=None)
def _basis_pinv(n):
    P = np.linalg.pinv(_basis_matrix(n))
    P.setflags(write=False)
    return P


def curv_coordinates(T):
    """Coordinates of curvature tensor(s) ``T`` in :func:`curv_space_basis`."""
    T = np.asarray(T, dtype=float)
    n = T.shape[-1]
    return T.reshape(T.shape[:-4] + (n**4,)) @ _basis_pinv(n).T


def curv_from_coordinates(c, n):
    c = np.asarray(c, dtype=float)
    return (c @ _basis_matrix(n).T).reshape(c.shape[:-1] + (n,) * 4)


# ---------------------------------------------------------------------------
# S_2 (x) S_{r+1}: symmetric pair (a b) followed by r+1 symmetric slots
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def sympair_basis(n, r):
    """Canonical labels ``((a, b), multiset)`` with ``a <= b`` and sorted multiset."""
    pairs = [(a, b) for a in range(n) for b in range(a, n)]
    msets = list(combinations_with_replacement(range(n), r + 1))
    return tuple((p, m) for p in pairs for m in msets)


def sympair_dim(n, r):
    return len(sympair_basis(n, r))


def sympair_element(n, r, label):
    """The symmetric tensor with value 1 on every index ordering of ``label``."""
    (a, b), mset = label
    Q = np.zeros((n,) * (3 + r))
    for perm in set(permutations(mset)):
        Q[(a, b) + perm] = 1.0
        Q[(b, a) + perm] = 1.0
    return Q


def check_sympair(Q, tol=1e-12):
    Q = np.asarray(Q, dtype=float)
    scale = max(float(np.max(np.abs(Q), initial=0.0)), ZERO_FLOOR)
    worst = np.max(np.abs(Q - np.swapaxes(Q, 0, 1)), initial=0.0)
    for i in range(3, Q.ndim):
        worst = max(worst, np.max(np.abs(Q - np.swapaxes(Q, 2, i)), initial=0.0))
    if worst > tol * scale:
        raise SymmetryError(f"tensor is not in S2 (x) S_{Q.ndim - 2} (residual {worst / scale:.3g})")
    return Q


def sympair_coordinates(Q, r):
    """Read canonical coordinates (one representative entry per label)."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    return np.array([Q[pair + mset] for pair, mset in sympair_basis(n, r)])
