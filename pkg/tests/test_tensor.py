import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from genericlab.errors import SignatureError, SymmetryError
from genericlab.tensor import (
    check_curvature,
    check_lorentzian,
    check_sympair,
    curv_coordinates,
    curv_from_coordinates,
    curv_space_basis,
    curv_space_dim,
    curvature_audit,
    curvature_projector,
    is_lorentzian,
    kulkarni_nomizu,
    pair_symmetry_residual,
    riemann_symmetry_residual,
    sympair_basis,
    sympair_dim,
    sympair_element,
)

ETA = np.diag([-1.0, 1, 1, 1])


def constraint_nullity(n):
    # independent count: null space of the three linear identities on R^(n^4)
    N = n**4
    idx = np.arange(N).reshape((n,) * 4)
    eye = np.eye(N)
    s1 = eye[idx.transpose(1, 0, 2, 3).ravel()]
    s2 = eye[idx.transpose(0, 1, 3, 2).ravel()]
    c1 = eye[idx.transpose(1, 2, 0, 3).ravel()]
    c2 = eye[idx.transpose(2, 0, 1, 3).ravel()]
    A = np.vstack([eye + s1, eye + s2, eye + c1 + c2])
    return N - np.linalg.matrix_rank(A)


# entries are 0 or of size >= 1e-6 so products never underflow
ENTRY = st.one_of(st.just(0.0), st.floats(1e-6, 3), st.floats(-3, -1e-6))


def sym(n):
    return arrays(np.float64, (n, n), elements=ENTRY).map(lambda a: a + a.T)


def test_kn_minkowski_entries():
    T = kulkarni_nomizu(ETA, ETA)
    assert T[0, 1, 0, 1] == -2.0
    assert T[0, 1, 1, 0] == 2.0
    assert T[0, 1, 2, 3] == 0.0


def test_kn_of_zero_is_zero():
    assert not np.any(kulkarni_nomizu(np.zeros((3, 3)), np.zeros((3, 3))))


def test_kn_dimension_mismatch():
    with pytest.raises(ValueError):
        kulkarni_nomizu(np.eye(3), np.eye(4))


@settings(max_examples=50, deadline=None)
@given(sym(4), sym(4))
def test_kn_is_symmetric_and_curvature_like(h, k):
    a = kulkarni_nomizu(h, k)
    assert np.array_equal(a, kulkarni_nomizu(k, h))
    assert riemann_symmetry_residual(a) <= 1e-14
    assert pair_symmetry_residual(a) <= 1e-14


def test_residual_examples():
    assert riemann_symmetry_residual(np.zeros((4,) * 4)) == 0.0
    T = np.zeros((4,) * 4)
    T[0, 1, 0, 1] = T[1, 0, 0, 1] = 1.0
    assert riemann_symmetry_residual(T) == 1.0
    with pytest.raises(SymmetryError):
        check_curvature(T)


def test_residual_is_batched():
    T = np.stack([kulkarni_nomizu(ETA, ETA), np.ones((4,) * 4)])
    res = riemann_symmetry_residual(T)
    assert res.shape == (2,) and res[0] == 0.0 and res[1] == 1.0


@pytest.mark.parametrize("n, dim", [(2, 1), (3, 6), (4, 20), (5, 50)])
def test_space_dimension_matches_constraint_count(n, dim):
    assert curv_space_dim(n) == dim
    assert constraint_nullity(n) == dim
    proj = np.array([curvature_projector(e.reshape((n,) * 4)).ravel() for e in np.eye(n**4)])
    assert np.linalg.matrix_rank(proj) == dim


def test_projector_is_idempotent_and_fixes_curvature_tensors(rng):
    T = rng.normal(size=(4,) * 4)
    P = curvature_projector(T)
    assert np.allclose(curvature_projector(P), P, atol=1e-14)
    assert riemann_symmetry_residual(P) <= 1e-14
    h = rng.normal(size=(4, 4))
    K = kulkarni_nomizu(ETA, h + h.T)
    assert np.allclose(curvature_projector(K), K, atol=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_basis(n):
    B = curv_space_basis(n)
    assert len(B) == curv_space_dim(n)
    flat = np.array([b.ravel() for b in B])
    assert np.linalg.matrix_rank(flat @ flat.T) == len(B)
    assert max(riemann_symmetry_residual(b) for b in B) <= 1e-14
    if n == 2:
        b = B[0]
        assert b[0, 1, 0, 1] != 0
        assert np.allclose(b / b[0, 1, 0, 1], kulkarni_nomizu(np.eye(2), np.eye(2)) / 2)


def test_coordinates_roundtrip(rng):
    T = curvature_projector(rng.normal(size=(5, 4, 4, 4, 4)))
    c = curv_coordinates(T)
    assert c.shape == (5, 20)
    assert np.allclose(curv_from_coordinates(c, 4), T, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 4, 4, 4), elements=ENTRY))
def test_pair_symmetry_follows_from_the_three_identities(T):
    P = curvature_projector(T)
    # P satisfies the three identities; pair symmetry is a consequence
    scale = max(np.max(np.abs(P)), 1e-300)
    if scale < 1e-8:
        return
    assert riemann_symmetry_residual(P) <= 1e-12
    assert pair_symmetry_residual(P) <= 1e-12


def test_lorentzian_signature():
    assert is_lorentzian(ETA)
    assert not is_lorentzian(np.eye(4))
    assert not is_lorentzian(np.diag([-1.0, -1, 1, 1]))
    assert not is_lorentzian(np.diag([-1.0, 1, 1, 1e-12]))
    assert is_lorentzian(np.array([[0.0, 1], [1, 0]]))
    with pytest.raises(SignatureError):
        check_lorentzian(np.eye(3))


def test_sympair_space():
    n, r = 3, 2
    labels = sympair_basis(n, r)
    assert sympair_dim(n, r) == 6 * 10
    els = np.array([sympair_element(n, r, lab).ravel() for lab in labels])
    assert np.linalg.matrix_rank(els) == len(labels)
    Q = sympair_element(n, r, ((0, 1), (0, 1, 2)))
    check_sympair(Q)
    assert Q[1, 0, 2, 0, 1] == 1.0
    bad = Q.copy()
    bad[0, 0, 0, 1, 2] = 5.0
    with pytest.raises(SymmetryError):
        check_sympair(bad)


def test_audit_records_products():
    with curvature_audit() as audit:
        kulkarni_nomizu(np.stack([ETA, ETA]), np.stack([ETA, np.eye(4)]))
    assert audit["count"] == 2 and audit["max_residual"] == 0.0
