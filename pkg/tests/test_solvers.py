import numpy as np
import pytest

from conftest import brute_force_quadratic_min
from lgw.solvers import minimize_quadratic_simplex


def test_isotropic_minimum_is_uniform():
    res = minimize_quadratic_simplex(np.eye(4), np.zeros(4), gap_tol=1e-12)
    assert res.converged
    assert res.objective == pytest.approx(0.25, rel=1e-9)
    assert np.allclose(res.theta, 0.25, atol=1e-7)


def test_linear_part_moves_minimum():
    # minimize theta' I theta - b' theta on the 2-simplex, b = (1, 0):
    # theta = (3/4, 1/4), value = 10/16 - 3/4 = -1/8
    res = minimize_quadratic_simplex(np.eye(2), np.array([1.0, 0.0]), gap_tol=1e-14)
    assert np.allclose(res.theta, [0.75, 0.25], atol=1e-9)
    assert res.objective == pytest.approx(-0.125, abs=1e-12)


def test_vertex_optimum():
    # strong pull toward vertex 1
    res = minimize_quadratic_simplex(np.eye(2), np.array([0.0, 10.0]), gap_tol=1e-14)
    assert np.allclose(res.theta, [0.0, 1.0], atol=1e-12)


def test_certificate_brackets_brute_force(rng):
    for _ in range(25):
        A_half = rng.standard_normal((3, 3))
        A = A_half.T @ A_half
        b = rng.standard_normal(3)
        res = minimize_quadratic_simplex(A, b, gap_tol=1e-10)
        brute = brute_force_quadratic_min(A, b, step=1e-3)
        # certified: objective - gap <= true min <= objective; the grid value
        # is within resolution of the true min
        assert res.objective - res.gap <= brute + 1e-9
        assert res.objective <= brute + 1e-4 * (1.0 + abs(brute))


def test_objective_nonincreasing_in_iteration_cap(rng):
    A_half = rng.standard_normal((6, 6))
    A = A_half.T @ A_half
    b = rng.standard_normal(6)
    values = [
        minimize_quadratic_simplex(A, b, gap_tol=0.0, max_iter=k).objective
        for k in (1, 3, 10, 30, 100, 300)
    ]
    assert all(v2 <= v1 + 1e-12 for v1, v2 in zip(values, values[1:]))


def test_permutation_equivariance(rng):
    A_half = rng.standard_normal((5, 5))
    A = A_half.T @ A_half
    b = rng.standard_normal(5)
    perm = np.array([3, 0, 4, 1, 2])
    res = minimize_quadratic_simplex(A, b, gap_tol=1e-12)
    res_p = minimize_quadratic_simplex(A[np.ix_(perm, perm)], b[perm], gap_tol=1e-12)
    assert np.allclose(res_p.theta, res.theta[perm], atol=1e-7)
    assert res_p.objective == pytest.approx(res.objective, abs=1e-10)


def test_nonconverged_flag_on_tiny_cap(rng):
    A_half = rng.standard_normal((8, 8))
    A = A_half.T @ A_half
    res = minimize_quadratic_simplex(A, rng.standard_normal(8), gap_tol=1e-14, max_iter=2)
    assert not res.converged
    assert res.iterations == 2


def test_warm_start_accepted():
    theta0 = np.array([0.5, 0.5])
    res = minimize_quadratic_simplex(np.eye(2), np.zeros(2), gap_tol=1e-12, theta0=theta0)
    assert res.converged
    assert res.iterations == 0  # already optimal
