from fractions import Fraction
from math import comb

import numpy as np
import pytest

from genericlab.errors import SymmetryError
from genericlab.experiments import make_rng, random_metric, sample_vectors
from genericlab.fibercheck import (
    alpha_fiber_matrix,
    alpha_linear,
    c_map_matrix,
    c_map_rank,
    codim_nongen,
    dim_check,
    jet_fiber_dim,
    numerical_rank,
    quotient_basis,
    r_threshold,
    right_inverse,
    right_inverse_error,
    surjectivity_report,
)
from genericlab.tensor import (
    check_sympair,
    curv_space_basis,
    curv_space_dim,
    curvature_projector,
    sympair_dim,
)
from oracles import threshold_by_search

ETA = np.diag([-1.0, 1, 1, 1])


def random_P(n, rng):
    return curvature_projector(rng.normal(size=(n,) * 4))


# surjectivity and the right inverse ---------------------------------------------


@pytest.mark.parametrize("n, r", [(n, r) for n in (2, 3, 4, 5) for r in (1, 2, 3)])
def test_fiber_matrix_is_surjective(n, r):
    M = alpha_fiber_matrix(n, r)
    assert M.shape == (curv_space_dim(n), sympair_dim(n, r))
    assert numerical_rank(M) == curv_space_dim(n)
    assert np.all(np.any(M != 0, axis=1))
    assert surjectivity_report(n, r)["surjective"]


def test_fiber_matrix_matches_dense_map(rng):
    # applying the matrix to coordinates equals applying the formula to the tensor
    n, r = 3, 2
    coords = rng.normal(size=sympair_dim(n, r))
    from genericlab.tensor import sympair_basis, sympair_element, curv_from_coordinates

    Q = sum(c * sympair_element(n, r, lab) for c, lab in zip(coords, sympair_basis(n, r)))
    check_sympair(Q)
    direct = alpha_linear(Q, r)
    via_matrix = curv_from_coordinates(alpha_fiber_matrix(n, r) @ coords, n)
    assert np.allclose(direct, via_matrix, atol=1e-13)


def test_right_inverse_of_zero():
    Q, coords = right_inverse(np.zeros((4,) * 4), 4, 2)
    assert not np.any(Q) and not np.any(coords)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_right_inverse_on_basis(r):
    for P in curv_space_basis(4):
        Q, _ = right_inverse(P, 4, r)
        check_sympair(Q)
        assert np.max(np.abs(alpha_linear(Q, r) - P)) <= 1e-12 * np.max(np.abs(P))
        assert right_inverse_error(P, r) <= 1e-12


def test_right_inverse_random_n3_r2(rng):
    for _ in range(10):
        P = random_P(3, rng)
        Q, _ = right_inverse(P, 3, 2)
        assert np.max(np.abs(alpha_linear(Q, 2) - P)) <= 1e-12 * np.max(np.abs(P))


def test_right_inverse_rejects_non_curvature(rng):
    with pytest.raises(SymmetryError):
        right_inverse(rng.normal(size=(3,) * 4), 3, 1)
    with pytest.raises(ValueError):
        right_inverse(np.zeros((3,) * 4), 4, 1)


def test_numerical_rank_edge_cases():
    assert numerical_rank(np.zeros((0, 3))) == 0
    assert numerical_rank(np.zeros((2, 2))) == 0
    assert numerical_rank(np.diag([1.0, 1e-9])) == 1
    assert numerical_rank(np.diag([1.0, 1e-7])) == 2


# the maps c ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "X, cls, rank",
    [([1, 0, 0, 0], "non-null", 6), ([0, 0, 1, 0], "non-null", 6), ([1, 1, 0, 0], "null", 3)],
)
def test_c_map_rank_minkowski(X, cls, rank):
    rep = c_map_rank(4, ETA, X)
    assert rep.causal_class == cls and rep.rank == rank == rep.expected_rank
    assert rep.ok
    assert rep.to_dict()["ok"] is True


def test_c_map_rank_null_n3():
    rep = c_map_rank(3, np.diag([-1.0, 1, 1]), [1, 0, 1])
    assert rep.rank == 1 and rep.codimension == codim_nongen(3, 1, "null") == 2


@pytest.mark.parametrize("n", [3, 4, 5])
def test_rank_is_stable_over_random_inputs(n):
    rng = make_rng(n)
    ranks = {"timelike": set(), "null": set(), "spacelike": set()}
    for _ in range(5):
        g = random_metric(n, rng)
        for cls, X in zip(("timelike", "null", "spacelike"), sample_vectors(g, rng)):
            for r in (1, 2, 3):
                rep = c_map_rank(n, g, X, r)
                assert rep.ok, rep
                ranks[cls].add(rep.rank)
    assert ranks["timelike"] == ranks["spacelike"] == {n * (n - 1) // 2}
    assert ranks["null"] == {(n - 1) * (n - 2) // 2}


def test_quotient_basis(rng):
    g = random_metric(4, rng)
    X = sample_vectors(g, rng)[1]
    B = quotient_basis(g, X)
    assert B.shape == (2, 4)
    assert np.max(np.abs(B @ g @ X)) <= 1e-12
    assert np.linalg.matrix_rank(np.vstack([B, X])) == 3


def test_c_map_dimension_mismatch():
    with pytest.raises(ValueError):
        c_map_rank(3, ETA, [1, 0, 0, 0])
    assert c_map_matrix(ETA, [1, 0, 0, 0]).shape == (6, 20)


# codimensions, threshold, dimension count ------------------------------------------


@pytest.mark.parametrize(
    "n, r, cls, value",
    [(4, 1, "non-null", 6), (4, 1, "null", 4), (4, 3, "null", 10), (4, 2, "timelike", 12), (3, 6, "null", 7)],
)
def test_codim_formulas(n, r, cls, value):
    assert codim_nongen(n, r, cls) == value


def test_codim_errors():
    with pytest.raises(ValueError):
        codim_nongen(4, 1, "lightlike")
    with pytest.raises(ValueError):
        codim_nongen(4, 0, "null")


@pytest.mark.parametrize("n, r", [(3, 6), (4, 3), (5, 2), (6, 2)])
def test_threshold(n, r):
    assert r_threshold(n) == r == threshold_by_search(n)
    assert Fraction(r) > Fraction(4 * n - 2, (n - 1) * (n - 2)) >= r - 1


def test_threshold_for_large_n():
    for n in range(3, 40):
        assert r_threshold(n) == threshold_by_search(n)
    with pytest.raises(ValueError):
        r_threshold(2)


@pytest.mark.parametrize(
    "n, r, c_non, c_null, passes",
    [(4, 3, 18, 10, True), (3, 6, 18, 7, True), (4, 2, 12, 7, False), (3, 5, 15, 6, False)],
)
def test_dim_check(n, r, c_non, c_null, passes):
    rep = dim_check(n, r)
    assert rep["dimension"] == 2 * n
    assert (rep["codim_non_null"], rep["codim_null"], rep["passes"]) == (c_non, c_null, passes)


def test_dim_check_passes_from_threshold_on():
    for n in range(3, 12):
        t = r_threshold(n)
        assert dim_check(n, t)["passes"]
        if t > 1:
            assert not dim_check(n, t - 1)["passes"]


@pytest.mark.parametrize("n, k, dim", [(4, 0, 10), (4, 1, 50), (2, 2, 18)])
def test_jet_fiber_dim(n, k, dim):
    assert jet_fiber_dim(n, k) == dim
    assert jet_fiber_dim(n, k) == n * (n + 1) // 2 * comb(n + k, k)
