import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from dsomarket.solver.lp import (BoundedLp, LpStatus, Tolerances, geometric_scaling,
                                 refine_on_optimal_face, solve_lp)
from helpers import highs_lp, random_lp, vertex_enumeration

INF = np.inf


def lp_of(A, lo, hi, clo, chi, c):
    return BoundedLp(sp.csr_matrix(np.atleast_2d(np.asarray(A, float))), lo, hi, clo, chi, c)


def test_single_row_lower_bound():
    sol = solve_lp(lp_of([[1.0]], [2.0], [INF], [0.0], [10.0], [1.0]))
    assert sol.status is LpStatus.OPTIMAL
    assert sol.x[0] == pytest.approx(2.0)
    assert sol.objective == pytest.approx(2.0)
    assert sol.duals[0] == pytest.approx(1.0)


def test_symmetric_pair():
    sol = solve_lp(lp_of([[1.0, 1.0]], [-INF], [1.0], [0, 0], [1, 1], [-1.0, -1.0]))
    assert sol.objective == pytest.approx(-1.0)
    assert sol.duals[0] == pytest.approx(-1.0)


def test_infeasible_and_unbounded():
    infeas = lp_of([[1.0, 1.0]], [5.0], [INF], [0, 0], [1, 1], [1, 1])
    assert solve_lp(infeas).status is LpStatus.INFEASIBLE
    unb = lp_of([[1.0, -1.0]], [-INF], [1.0], [0, 0], [INF, INF], [-1.0, 0.0])
    assert solve_lp(unb).status is LpStatus.UNBOUNDED


def test_equality_and_free_columns():
    # min x + 2y, x - y = 1, x + y >= 3, y free
    sol = solve_lp(lp_of([[1, -1], [1, 1]], [1, 3], [1, INF], [0, -INF], [INF, INF], [1, 2]))
    assert sol.x == pytest.approx([2.0, 1.0])
    assert sol.objective == pytest.approx(4.0)


def test_crossed_bounds_rejected():
    with pytest.raises(ValueError):
        lp_of([[1.0]], [1.0], [0.0], [0.0], [1.0], [1.0])


def test_scaling_factors_are_powers_of_two():
    A = sp.csr_matrix(np.array([[1000.0, 0.001], [3.0, 7.0]]))
    R, C = geometric_scaling(A)
    assert np.all(np.log2(R) == np.round(np.log2(R)))
    assert np.all(np.log2(C) == np.round(np.log2(C)))


def _check_optimality(lp, sol, tol=1e-6):
    """Strong duality, complementary slackness and dual signs from scratch."""
    x = sol.x
    A = lp.A.toarray()
    assert np.allclose(sol.reduced_costs, lp.c - A.T @ sol.duals, atol=1e-7 * (1 + np.abs(lp.c).max()))
    # multipliers below 1e-9 are treated as zero; larger ones must price a finite bound
    y = np.where(np.abs(sol.duals) > 1e-9, sol.duals, 0.0)
    d = np.where(np.abs(sol.reduced_costs) > 1e-9, sol.reduced_costs, 0.0)
    assert not np.any((y > 0) & np.isinf(lp.row_lo)) and not np.any((y < 0) & np.isinf(lp.row_hi))
    assert not np.any((d > 0) & np.isinf(lp.col_lo)) and not np.any((d < 0) & np.isinf(lp.col_hi))
    rlo = np.where(np.isfinite(lp.row_lo), lp.row_lo, 0.0)
    rhi = np.where(np.isfinite(lp.row_hi), lp.row_hi, 0.0)
    clo = np.where(np.isfinite(lp.col_lo), lp.col_lo, 0.0)
    chi = np.where(np.isfinite(lp.col_hi), lp.col_hi, 0.0)
    act = A @ x
    scale = 1 + abs(sol.objective)
    dual_obj = np.where(y > 0, y * rlo, y * rhi).sum() + np.where(d > 0, d * clo, d * chi).sum()
    assert abs(sol.objective - dual_obj) <= tol * scale
    # signs: <= rows non-positive, >= rows non-negative
    le = np.isinf(lp.row_lo) & np.isfinite(lp.row_hi)
    ge = np.isfinite(lp.row_lo) & np.isinf(lp.row_hi)
    assert np.all(sol.duals[le] <= 1e-9) and np.all(sol.duals[ge] >= -1e-9)
    # complementary slackness
    assert np.all(np.abs(np.where(y > 0, y * (act - rlo), 0.0)) <= tol * scale)
    assert np.all(np.abs(np.where(y < 0, y * (rhi - act), 0.0)) <= tol * scale)
    assert np.all(np.abs(np.where(d > 0, d * (x - clo), 0.0)) <= tol * scale)
    assert np.all(np.abs(np.where(d < 0, d * (chi - x), 0.0)) <= tol * scale)
    # feasibility
    slack = 1e-7 * (1 + np.abs(act))
    assert np.all(act >= lp.row_lo - slack) and np.all(act <= lp.row_hi + slack)
    assert np.all(x >= lp.col_lo - 1e-9) and np.all(x <= lp.col_hi + 1e-9)


@pytest.mark.parametrize("seed", range(40))
def test_random_lps_match_highs(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 31)), int(rng.integers(1, 41))
    lp = random_lp(rng, m, n)
    sol = solve_lp(lp)
    ref = highs_lp(lp)
    assert ref.status == 0
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(ref.fun, abs=1e-6 * (1 + abs(ref.fun)))
    _check_optimality(lp, sol)


@pytest.mark.parametrize("seed", range(12))
def test_vertex_enumeration_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    m, n = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    lp = random_lp(rng, m, n, equalities=False, ranged=False)
    lp = BoundedLp(lp.A, lp.row_lo, lp.row_hi, np.maximum(lp.col_lo, -5.0), lp.col_hi, lp.c)
    A = lp.A.toarray()
    # rewrite as A' x <= b'
    ge, le = np.isfinite(lp.row_lo), np.isfinite(lp.row_hi)
    Aq = np.vstack([-A[ge], A[le]])
    bq = np.concatenate([-lp.row_lo[ge], lp.row_hi[le]])
    ref = vertex_enumeration(Aq, bq, lp.col_lo, lp.col_hi, lp.c)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(ref, abs=1e-8 * (1 + abs(ref)))


def test_warm_start_reaches_same_optimum():
    rng = np.random.default_rng(7)
    lp = random_lp(rng, 25, 35)
    first = solve_lp(lp)
    c2 = lp.c + 0.1 * rng.normal(size=lp.c.size)
    cold = solve_lp(lp.with_cost(c2))
    warm = solve_lp(lp.with_cost(c2), warm=first.basis)
    assert warm.objective == pytest.approx(cold.objective, abs=1e-8)
    assert warm.iterations <= cold.iterations + 5


def test_deterministic_repeat():
    lp = random_lp(np.random.default_rng(3), 20, 30)
    a, b = solve_lp(lp), solve_lp(lp)
    assert a.basis == b.basis
    assert np.array_equal(a.x, b.x) and np.array_equal(a.duals, b.duals)


def test_degenerate_problem_terminates():
    # many ties: min -sum x over x_i + x_j <= 1 on a cycle
    n = 9
    A = np.zeros((n, n))
    for i in range(n):
        A[i, i] = A[i, (i + 1) % n] = 1.0
    sol = solve_lp(lp_of(A, np.full(n, -INF), np.ones(n), np.zeros(n), np.ones(n), -np.ones(n)))
    assert sol.objective == pytest.approx(-n / 2)


def test_face_refinement_keeps_duals():
    # min x1 + x2 with x1 + x2 >= 1: every split is optimal; prefer x1 = 0
    lp = lp_of([[1.0, 1.0]], [1.0], [INF], [0, 0], [1, 1], [1.0, 1.0])
    sol = solve_lp(lp)
    ref = refine_on_optimal_face(lp, sol, np.array([1.0, 0.0]))
    assert ref.x == pytest.approx([0.0, 1.0])
    assert ref.objective == pytest.approx(1.0)
    assert np.array_equal(ref.duals, sol.duals)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 12))
def test_property_duality(seed, m, n):
    lp = random_lp(np.random.default_rng(seed), m, n)
    sol = solve_lp(lp)
    assert sol.status is LpStatus.OPTIMAL
    _check_optimality(lp, sol)


def test_tolerances_override():
    lp = random_lp(np.random.default_rng(11), 10, 10)
    sol = solve_lp(lp, tol=Tolerances(feasibility=1e-9, optimality=1e-9))
    assert sol.optimal
