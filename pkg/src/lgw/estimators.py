"""Constrained empirical risk minimizers.

Four estimators, one solver: the constrained Lasso, fixed-design convex
aggregation, the l1-constrained least squares of the random-design problem,
and the density ERM all reduce to a quadratic over the simplex. The l1 ball
of radius R is handled as the hull of the 2M signed scaled columns, so the
simplex kernel with its duality-gap certificate covers every case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GramMatrix
from .errors import DimensionMismatch, InvalidInput
from .solvers import minimize_quadratic_simplex

__all__ = [
    "SolveOpts",
    "RegressionProblem",
    "DensityProblem",
    "EstimatorResult",
    "lasso_constrained",
    "convex_aggregate",
    "persistence_erm",
    "density_erm",
    "minimize_quadratic_l1",
]


@dataclass(frozen=True)
class SolveOpts:
    """gap_tol is relative; the absolute gap target is gap_tol * (1 + scale)
    where scale is the natural size of the objective (|y|^2 for regression)."""

    gap_tol: float = 1e-8
    max_iter: int = 100_000


@dataclass(frozen=True)
class RegressionProblem:
    """Fixed design, observed response, and the constraint radius.

    noise_sd is carried for experiment harnesses and never used by solvers.
    radius is the l1 budget; estimators over the plain simplex ignore it.
    """

    design: np.ndarray
    response: np.ndarray
    noise_sd: float = 0.0
    radius: float | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.design, dtype=np.float64)
        y = np.ascontiguousarray(self.response, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidInput("design must be a nonempty n x M matrix")
        if y.shape != (X.shape[0],):
            raise DimensionMismatch(
                f"response has shape {y.shape}, expected ({X.shape[0]},)"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidInput("design and response must be finite")
        if self.noise_sd < 0:
            raise InvalidInput("noise_sd must be nonnegative")
        if self.radius is not None and self.radius <= 0:
            raise InvalidInput("radius must be positive")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def M(self) -> int:
        return self.design.shape[1]

    @property
    def max_col_sq_norm(self) -> float:
        """max_j (1/n) |x_j|^2, the column normalization the Lasso rates assume."""
        return float(np.max(np.sum(self.design**2, axis=0)) / self.n)


@dataclass(frozen=True)
class DensityProblem:
    """Gram of the candidate densities and their evaluations at the sample."""

    gram: GramMatrix
    evals: np.ndarray
    b_inf: float

    def __post_init__(self):
        ev = np.ascontiguousarray(self.evals, dtype=np.float64)
        if ev.ndim != 2 or ev.shape[0] < 1:
            raise InvalidInput("evals must be a nonempty n x M matrix")
        if ev.shape[1] != self.gram.M:
            raise DimensionMismatch(
                f"evals has {ev.shape[1]} columns, gram is {self.gram.M} x {self.gram.M}"
            )
        if self.b_inf <= 0:
            raise InvalidInput("b_inf must be positive")
        if np.any(np.abs(ev) > self.b_inf * (1 + 1e-12)):
            raise InvalidInput("evals exceed the stated sup-norm bound b_inf")
        ev.setflags(write=False)
        object.__setattr__(self, "evals", ev)

    @property
    def n(self) -> int:
        return self.evals.shape[0]

    @property
    def M(self) -> int:
        return self.gram.M


@dataclass(frozen=True)
class EstimatorResult:
    weights: np.ndarray
    objective: float
    certified_gap: float
    iterations: int
    converged: bool


def minimize_quadratic_l1(
    Q: np.ndarray,
    linear: np.ndarray,
    radius: float,
    gap_tol_abs: float,
    max_iter: int = 100_000,
):
    """Minimize beta' Q beta + linear' beta over the l1 ball of given radius.

    Returns (beta, value, gap, iterations, converged). Used both by the
    Lasso path and by experiment oracles that need certified quadratic
    minima over the l1 ball.
    """
    if radius <= 0:
        raise InvalidInput("radius must be positive")
    Q = np.asarray(Q, dtype=np.float64)
    lin = np.asarray(linear, dtype=np.float64)
    M = lin.shape[0]
    if Q.shape != (M, M):
        raise DimensionMismatch(f"Q has shape {Q.shape}, expected ({M}, {M})")
    r2 = radius * radius
    A = np.empty((2 * M, 2 * M))
    A[:M, :M] = r2 * Q
    A[M:, M:] = r2 * Q
    A[:M, M:] = -r2 * Q
    A[M:, :M] = -r2 * Q
    b = np.concatenate([-radius * lin, radius * lin])
    res = minimize_quadratic_simplex(A, b, gap_tol=gap_tol_abs, max_iter=max_iter)
    beta = radius * (res.theta[:M] - res.theta[M:])
    value = float(beta @ Q @ beta + lin @ beta)
    return beta, value, res.gap, res.iterations, res.converged


def lasso_constrained(prob: RegressionProblem, opts: SolveOpts | None = None) -> EstimatorResult:
    """l1-constrained least squares |y - X beta|^2 over |beta|_1 <= radius.

    Stops when the conditional-gradient gap falls below
    gap_tol * (1 + |y|^2); on cap exhaustion the best iterate is returned
    with converged=False.
    """
    opts = opts or SolveOpts()
    if prob.radius is None:
        raise InvalidInput("lasso_constrained requires a radius")
    X, y = prob.design, prob.response
    gap_abs = opts.gap_tol * (1.0 + float(y @ y))
    beta, _, gap, iters, ok = minimize_quadratic_l1(
        X.T @ X, -2.0 * (X.T @ y), prob.radius, gap_abs, opts.max_iter
    )
    resid = y - X @ beta
    return EstimatorResult(
        weights=beta,
        objective=float(resid @ resid),
        certified_gap=float(gap),
        iterations=iters,
        converged=ok,
    )


def convex_aggregate(prob: RegressionProblem, opts: SolveOpts | None = None) -> EstimatorResult:
    """Least squares over the simplex of dictionary combinations."""
    opts = opts or SolveOpts()
    F, y = prob.design, prob.response
    gap_abs = opts.gap_tol * (1.0 + float(y @ y))
    res = minimize_quadratic_simplex(
        F.T @ F, 2.0 * (F.T @ y), gap_tol=gap_abs, max_iter=opts.max_iter
    )
    resid = y - F @ res.theta
    return EstimatorResult(
        weights=res.theta,
        objective=float(resid @ resid),
        certified_gap=res.gap,
        iterations=res.iterations,
        converged=res.converged,
    )


def persistence_erm(
    data_x: np.ndarray,
    data_y: np.ndarray,
    radius: float,
    opts: SolveOpts | None = None,
) -> EstimatorResult:
    """l1-constrained empirical risk minimizer on sampled rows.

    Delegates to lasso_constrained on the empirical design, bit for bit.
    """
    prob = RegressionProblem(design=data_x, response=data_y, radius=radius)
    return lasso_constrained(prob, opts)


def density_erm(prob: DensityProblem, opts: SolveOpts | None = None) -> EstimatorResult:
    """Minimize theta' G theta - (2/n) sum_i p_theta(Z_i) over the simplex."""
    opts = opts or SolveOpts()
    b = 2.0 * prob.evals.mean(axis=0)
    gap_abs = opts.gap_tol * (1.0 + prob.gram.max_diag + float(np.max(np.abs(b))))
    res = minimize_quadratic_simplex(
        prob.gram.sigma, b, gap_tol=gap_abs, max_iter=opts.max_iter
    )
    return EstimatorResult(
        weights=res.theta,
        objective=float(res.theta @ prob.gram.sigma @ res.theta - b @ res.theta),
        certified_gap=res.gap,
        iterations=res.iterations,
        converged=res.converged,
    )
