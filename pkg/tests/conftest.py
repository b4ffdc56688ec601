"""Shared oracles: brute-force maximizers the solvers are checked against."""

import numpy as np
import pytest


def simplex_grid(M: int, step: float) -> np.ndarray:
    """All simplex points with coordinates on a grid of the given step."""
    k = round(1.0 / step)
    if M == 1:
        return np.array([[1.0]])
    if M == 2:
        i = np.arange(k + 1)
        return np.column_stack([i, k - i]).astype(np.float64) / k
    if M == 3:
        i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
        mask = i + j <= k
        i, j = i[mask], j[mask]
        return np.column_stack([i, j, k - i - j]).astype(np.float64) / k
    raise ValueError("brute force oracle supports M <= 3 only")


def brute_force_support(points: np.ndarray, g: np.ndarray, s: float, step: float = 1e-3):
    """Grid maximum of g' mu_theta over the simplex subject to Q <= s^2.

    Independent of the certified solver: direct enumeration with the exact
    feasibility filter. Returns -inf when no grid point is feasible.
    """
    M = points.shape[1]
    thetas = simplex_grid(M, step)
    mus = thetas @ points.T
    feasible = np.einsum("ij,ij->i", mus, mus) <= s * s
    if not feasible.any():
        return -np.inf
    vals = mus[feasible] @ g
    return float(vals.max())


def brute_force_quadratic_min(A: np.ndarray, b: np.ndarray, step: float = 1e-3):
    """Grid minimum of theta' A theta - b' theta over the simplex."""
    thetas = simplex_grid(A.shape[0], step)
    vals = np.einsum("ij,jk,ik->i", thetas, A, thetas) - thetas @ b
    return float(vals.min())


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
