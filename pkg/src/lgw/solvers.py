"""Away-step conditional-gradient kernel for simplex-constrained quadratics.

One kernel serves every optimization problem in the package: it minimizes

    phi(theta) = lam * theta' Sigma theta - c' theta

over the probability simplex, with exact line search (phi is quadratic along
any segment) and away steps for linear convergence on polytope faces. The
matrix-vector product Sigma theta and the quadratic form theta' Sigma theta
are maintained incrementally in O(M) per iteration, with a periodic O(M^2)
recompute to kill floating-point drift.

The Frank-Wolfe gap returned on exit is a certificate:
phi(theta) - min phi <= gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DimensionMismatch

__all__ = ["QuadSolveResult", "minimize_quadratic_simplex", "fw_quadratic_step"]

_RECOMPUTE_EVERY = 256


@njit(cache=True, nogil=True)
def _fw_quadratic(sigma, c, lam, theta, stheta, max_iter, gap_tol):  # pragma: no cover
    M = theta.shape[0]
    qv = 0.0
    for j in range(M):
        qv += theta[j] * stheta[j]
    it = 0
    gap = 0.0
    while it < max_iter:
        if it % _RECOMPUTE_EVERY == _RECOMPUTE_EVERY - 1:
            tsum = 0.0
            for j in range(M):
                tsum += theta[j]
            if tsum > 0.0:
                for j in range(M):
                    theta[j] /= tsum
            for j in range(M):
                acc = 0.0
                for k in range(M):
                    acc += sigma[j, k] * theta[k]
                stheta[j] = acc
            qv = 0.0
            for j in range(M):
                qv += theta[j] * stheta[j]

        gdot = 0.0
        v = 0
        gv = np.inf
        a = -1
        ga = -np.inf
        for j in range(M):
            gj = 2.0 * lam * stheta[j] - c[j]
            gdot += gj * theta[j]
            if gj < gv:
                gv = gj
                v = j
            if theta[j] > 0.0 and gj > ga:
                ga = gj
                a = j
        gap = gdot - gv
        if gap <= gap_tol:
            break

        use_away = a >= 0 and (ga - gdot) > gap
        if not use_away:
            # toward-vertex step: d = e_v - theta
            slope = gv - gdot
            dad = sigma[v, v] - 2.0 * stheta[v] + qv
            denom = 2.0 * lam * dad
            if denom > 0.0:
                gamma = -slope / denom
                if gamma > 1.0:
                    gamma = 1.0
            else:
                gamma = 1.0
            if gamma >= 1.0:
                for j in range(M):
                    theta[j] = 0.0
                    stheta[j] = sigma[j, v]
                theta[v] = 1.0
                qv = sigma[v, v]
            else:
                sv = stheta[v]
                om = 1.0 - gamma
                for j in range(M):
                    theta[j] *= om
                    stheta[j] = om * stheta[j] + gamma * sigma[j, v]
                theta[v] += gamma
                qv = om * om * qv + 2.0 * gamma * om * sv + gamma * gamma * sigma[v, v]
        else:
            # away step: d = theta - e_a, capped so theta[a] stays >= 0
            alpha = theta[a]
            if alpha >= 1.0:
                break  # singleton support and zero away direction
            gmax = alpha / (1.0 - alpha)
            slope = gdot - ga
            dad = qv - 2.0 * stheta[a] + sigma[a, a]
            denom = 2.0 * lam * dad
            if denom > 0.0:
                gamma = -slope / denom
                if gamma > gmax:
                    gamma = gmax
            else:
                gamma = gmax
            sa = stheta[a]
            op = 1.0 + gamma
            for j in range(M):
                theta[j] *= op
                stheta[j] = op * stheta[j] - gamma * sigma[j, a]
            theta[a] -= gamma
            if gamma >= gmax or theta[a] < 1e-18:
                theta[a] = 0.0
            qv = op * op * qv - 2.0 * gamma * op * sa + gamma * gamma * sigma[a, a]
        it += 1
    return gap, it, qv


def fw_quadratic_step(sigma, c, lam, theta, stheta, max_iter, gap_tol):
    """Run the kernel in place and return (gap, iterations, theta'Sigma theta).

    `theta` and `stheta = sigma @ theta` are mutated; callers warm-start by
    passing the pair from a previous call with a different `lam`.
    """
    return _fw_quadratic(sigma, c, float(lam), theta, stheta, int(max_iter), float(gap_tol))


@dataclass(frozen=True)
class QuadSolveResult:
    """Certified solution of min theta' A theta - b' theta over the simplex."""

    theta: np.ndarray
    objective: float
    gap: float
    iterations: int
    converged: bool


def minimize_quadratic_simplex(
    A: np.ndarray,
    b: np.ndarray,
    gap_tol: float,
    max_iter: int = 100_000,
    theta0: np.ndarray | None = None,
) -> QuadSolveResult:
    """Minimize theta' A theta - b' theta over the probability simplex.

    A must be symmetric positive semi-definite. The returned ``gap`` bounds
    the objective suboptimality: objective - gap <= true minimum.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    M = b.shape[0]
    if A.shape != (M, M):
        raise DimensionMismatch(f"A has shape {A.shape}, expected ({M}, {M})")
    if theta0 is None:
        theta = np.zeros(M)
        theta[int(np.argmin(np.diag(A) - b))] = 1.0
    else:
        theta = np.array(theta0, dtype=np.float64)
        if theta.shape != (M,):
            raise DimensionMismatch("theta0 has wrong length")
    stheta = A @ theta
    gap, iters, qv = fw_quadratic_step(A, b, 1.0, theta, stheta, max_iter, gap_tol)
    obj = qv - float(b @ theta)
    return QuadSolveResult(
        theta=theta,
        objective=obj,
        gap=float(gap),
        iterations=int(iters),
        converged=gap <= gap_tol,
    )
