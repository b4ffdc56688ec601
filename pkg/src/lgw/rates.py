"""Closed-form rate quantities and width fixed points.

Every evaluator returns the squared rate with branch provenance so callers
can audit which side of a min/max fired. All logarithms are natural. The
absolute constants the underlying inequalities leave unspecified are
explicit parameters defaulting to one: the functions report formula values,
never claims about unknowable constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Dictionary, GramMatrix
from .errors import InvalidInput, InvalidRegime, NoCrossing
from .rng import SeededStream
from .width import WidthEstimate, WidthOpts, estimate_width

__all__ = [
    "FixedPointReport",
    "FixedPointOpts",
    "AnisotropicConstants",
    "AnisotropicBounds",
    "t_star_convex_agg",
    "t_star_lasso",
    "t_star_kappa",
    "phi_convex",
    "r_n_fixed_point",
    "s_n_fixed_point",
    "make_l1_ellipsoid_width_oracle",
    "anisotropic_rate_bounds",
    "r_star_bounded",
    "bounded_process_bound",
    "t_star_finite_dim",
    "rademacher_sup_bound",
    "verify_t_star_fixed_point",
]

BRANCH_DIMENSION = "dimension-term"
BRANCH_WIDTH = "width-term"
BRANCH_CLAMPED = "clamped"
BRANCH_BISECTION = "bisection"


@dataclass(frozen=True)
class FixedPointReport:
    """A squared rate with provenance.

    ``branch`` identifies which side of the defining min/max produced the
    value (or that bisection or bracket clamping did). ``residual`` is only
    populated by the bisection solvers.
    """

    value: float
    branch: str
    inputs: dict
    residual: float | None = None
    residual_stderr: float | None = None
    iterations: int = 0
    extras: dict = field(default_factory=dict)


def _require_positive(**kwargs) -> None:
    for name, val in kwargs.items():
        if not (val > 0) or not math.isfinite(val):
            raise InvalidInput(f"{name} must be positive and finite, got {val}")


def t_star_convex_agg(sigma: float, R: float, n: int, M: int) -> FixedPointReport:
    """Squared fixed point for simplex-constrained least squares.

    min(4 sigma^2 M / n, 31 sigma R sqrt(log(e M sigma / (R sqrt n))) / sqrt n);
    the second branch is only evaluated in its validity regime
    R sqrt(n) <= M sigma.
    """
    _require_positive(sigma=sigma, R=R)
    if n < 1 or M < 2:
        raise InvalidInput("need n >= 1 and M >= 2")
    inputs = {"sigma": sigma, "R": R, "n": n, "M": M}
    dim = 4.0 * sigma * sigma * M / n
    if R * math.sqrt(n) <= M * sigma:
        width = 31.0 * sigma * R * math.sqrt(
            math.log(math.e * M * sigma / (R * math.sqrt(n)))
        ) / math.sqrt(n)
        if dim <= width:
            return FixedPointReport(dim, BRANCH_DIMENSION, inputs)
        return FixedPointReport(width, BRANCH_WIDTH, inputs)
    return FixedPointReport(
        dim, BRANCH_DIMENSION, inputs, extras={"width_branch_in_regime": False}
    )


def t_star_lasso(sigma: float, R: float, n: int, M: int, rank: int) -> FixedPointReport:
    """Squared fixed point for the constrained Lasso.

    min(4 sigma^2 rank / n, 62 sigma R sqrt(log(2 e M sigma / (R sqrt n))) / sqrt n).
    The width branch lives on the hull of the 2M signed scaled columns, so
    its validity regime is R sqrt(n) <= 2 M sigma.
    """
    _require_positive(sigma=sigma, R=R)
    if n < 1 or M < 2:
        raise InvalidInput("need n >= 1 and M >= 2")
    if not (0 <= rank <= min(n, M)):
        raise InvalidInput(f"rank must lie in [0, min(n, M)], got {rank}")
    inputs = {"sigma": sigma, "R": R, "n": n, "M": M, "rank": rank}
    dim = 4.0 * sigma * sigma * rank / n
    if R * math.sqrt(n) <= 2.0 * M * sigma:
        width = 62.0 * sigma * R * math.sqrt(
            math.log(2.0 * math.e * M * sigma / (R * math.sqrt(n)))
        ) / math.sqrt(n)
        if dim <= width:
            return FixedPointReport(dim, BRANCH_DIMENSION, inputs)
        return FixedPointReport(width, BRANCH_WIDTH, inputs)
    return FixedPointReport(
        dim, BRANCH_DIMENSION, inputs, extras={"width_branch_in_regime": False}
    )


def t_star_kappa(sigma: float, R: float, n: int, M: int) -> FixedPointReport:
    """Width-only squared fixed point 31 sigma R sqrt(log(e M sigma/(R sqrt n))/n).

    Requires R sqrt(n) <= M sigma. When the side condition t* <= R fails the
    value is still reported but the branch is flagged as clamped.
    """
    _require_positive(sigma=sigma, R=R)
    if n < 1 or M < 2:
        raise InvalidInput("need n >= 1 and M >= 2")
    if R * math.sqrt(n) > M * sigma:
        raise InvalidRegime(
            f"R sqrt(n) = {R * math.sqrt(n):.6g} exceeds M sigma = {M * sigma:.6g}"
        )
    inputs = {"sigma": sigma, "R": R, "n": n, "M": M}
    value = 31.0 * sigma * R * math.sqrt(
        math.log(math.e * M * sigma / (R * math.sqrt(n))) / n
    )
    t_star = math.sqrt(value)
    if t_star > R:
        return FixedPointReport(
            value, BRANCH_CLAMPED, inputs,
            extras={"t_star": t_star, "side_condition_ok": False},
        )
    return FixedPointReport(
        value, BRANCH_WIDTH, inputs, extras={"t_star": t_star, "side_condition_ok": True}
    )


def phi_convex(M: int, n: int) -> FixedPointReport:
    """Minimax convex-aggregation rate min(M/n, sqrt(log(eM/sqrt n)/n)).

    When eM <= sqrt(n) the log branch is vacuous and the dimension branch is
    returned. extras carry the regime flag phi <= 1.
    """
    if M < 2 or n < 1:
        raise InvalidInput("need M >= 2 and n >= 1")
    inputs = {"M": M, "n": n}
    dim = M / n
    arg = math.e * M / math.sqrt(n)
    if arg > 1.0:
        width = math.sqrt(math.log(arg) / n)
        value, branch = (dim, BRANCH_DIMENSION) if dim <= width else (width, BRANCH_WIDTH)
    else:
        value, branch = dim, BRANCH_DIMENSION
    return FixedPointReport(value, branch, inputs, extras={"regime_ok": value <= 1.0})


# ---------------------------------------------------------------------------
# width fixed points by bisection


@dataclass(frozen=True)
class FixedPointOpts:
    """Bracket [lo_frac * R, hi_frac * R], relative bracket tolerance, and
    the Monte Carlo sample count used by the default width oracle."""

    lo_frac: float = 1e-6
    hi_frac: float = 2.0
    max_steps: int = 60
    rel_tol: float = 1e-3
    samples: int = 2000
    width_opts: WidthOpts = field(default_factory=WidthOpts)


def sqrt_psd(matrix: np.ndarray, tol_scale: float = 1e-10) -> np.ndarray:
    """Symmetric PSD square root; eigenvalues below tol_scale*trace clip to 0."""
    sym = 0.5 * (matrix + matrix.T)
    vals, vecs = np.linalg.eigh(sym)
    floor = tol_scale * max(np.trace(sym), 0.0)
    vals = np.where(vals < floor, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.T


def make_l1_ellipsoid_width_oracle(
    gram: GramMatrix,
    R: float,
    samples: int,
    stream: SeededStream,
    width_opts: WidthOpts | None = None,
) -> Callable[[float], WidthEstimate]:
    """Width oracle W(r) for {beta : |beta|_1 <= 2R, beta' Sigma beta <= r^2}.

    The supremum of beta' Sigma^(1/2) g over that set equals the localized
    width of the hull of the 2M points +-2R Sigma^(1/2) e_j at radius r, so
    each call is one width-module Monte Carlo run. All calls share `stream`:
    common random numbers keep the bisection crossing quiet.
    """
    _require_positive(R=R)
    root = sqrt_psd(gram.sigma)
    cols = 2.0 * R * root
    dictionary = Dictionary(np.hstack([cols, -cols]))
    gm = GramMatrix(sigma=dictionary.points.T @ dictionary.points)
    opts = width_opts or WidthOpts()

    def oracle(r: float) -> WidthEstimate:
        return estimate_width(dictionary, r, samples, stream, opts=opts, gram_matrix=gm)

    return oracle


def _bisect_width_threshold(
    threshold: Callable[[float], float],
    width_oracle: Callable[[float], WidthEstimate],
    R: float,
    opts: FixedPointOpts,
    inputs: dict,
) -> FixedPointReport:
    r_lo = opts.lo_frac * R
    r_hi = opts.hi_frac * R
    w_hi = width_oracle(r_hi)
    if w_hi.mean > threshold(r_hi):
        raise NoCrossing(
            f"W({r_hi:.6g}) = {w_hi.mean:.6g} exceeds the threshold "
            f"{threshold(r_hi):.6g}; enlarge the bracket or increase n"
        )
    w_lo = width_oracle(r_lo)
    if w_lo.mean <= threshold(r_lo):
        return FixedPointReport(
            value=r_lo * r_lo,
            branch=BRANCH_CLAMPED,
            inputs=inputs,
            residual=w_lo.mean - threshold(r_lo),
            residual_stderr=w_lo.stderr,
            iterations=0,
            extras={"r": r_lo, "clamped_at": "lo"},
        )
    steps = 0
    w_at_hi = w_hi
    while steps < opts.max_steps and (r_hi - r_lo) > opts.rel_tol * r_hi:
        mid = 0.5 * (r_lo + r_hi)
        w_mid = width_oracle(mid)
        if w_mid.mean > threshold(mid):
            r_lo = mid
        else:
            r_hi = mid
            w_at_hi = w_mid
        steps += 1
    return FixedPointReport(
        value=r_hi * r_hi,
        branch=BRANCH_BISECTION,
        inputs=inputs,
        residual=w_at_hi.mean - threshold(r_hi),
        residual_stderr=w_at_hi.stderr,
        iterations=steps,
        extras={"r": r_hi},
    )


def r_n_fixed_point(
    gram: GramMatrix,
    R: float,
    gamma: float,
    n: int,
    width_oracle: Callable[[float], WidthEstimate] | None = None,
    opts: FixedPointOpts | None = None,
    stream: SeededStream | None = None,
) -> FixedPointReport:
    """Smallest r with W(r) <= gamma r sqrt(n), by bisection.

    W(r)/r is nonincreasing, so the transition point is unique up to Monte
    Carlo noise. If even the bracket's low end already satisfies the
    inequality the report is clamped there; if the high end does not,
    NoCrossing is raised.
    """
    _require_positive(R=R, gamma=gamma)
    if n < 1:
        raise InvalidInput("n must be >= 1")
    opts = opts or FixedPointOpts()
    if width_oracle is None:
        if stream is None:
            raise InvalidInput("provide either width_oracle or stream")
        width_oracle = make_l1_ellipsoid_width_oracle(
            gram, R, opts.samples, stream, opts.width_opts
        )
    inputs = {"R": R, "gamma": gamma, "n": n, "M": gram.M, "kind": "r_n"}
    sqrt_n = math.sqrt(n)
    return _bisect_width_threshold(
        lambda r: gamma * r * sqrt_n, width_oracle, R, opts, inputs
    )


def s_n_fixed_point(
    gram: GramMatrix,
    R: float,
    gamma: float,
    n: int,
    sigma: float,
    width_oracle: Callable[[float], WidthEstimate] | None = None,
    opts: FixedPointOpts | None = None,
    stream: SeededStream | None = None,
) -> FixedPointReport:
    """Smallest s with W(s) <= gamma s^2 sqrt(n) / sigma.

    W(s)/s^2 is strictly decreasing wherever W > 0, so the crossing is
    unique. sigma = 0 sends the threshold to infinity and clamps at the
    bracket's low end.
    """
    _require_positive(R=R, gamma=gamma)
    if sigma < 0:
        raise InvalidInput("sigma must be nonnegative")
    if n < 1:
        raise InvalidInput("n must be >= 1")
    opts = opts or FixedPointOpts()
    if width_oracle is None:
        if stream is None:
            raise InvalidInput("provide either width_oracle or stream")
        width_oracle = make_l1_ellipsoid_width_oracle(
            gram, R, opts.samples, stream, opts.width_opts
        )
    inputs = {"R": R, "gamma": gamma, "n": n, "sigma": sigma, "M": gram.M, "kind": "s_n"}
    sqrt_n = math.sqrt(n)
    if sigma == 0.0:
        threshold = lambda s: math.inf  # noqa: E731
    else:
        threshold = lambda s: gamma * s * s * sqrt_n / sigma  # noqa: E731
    return _bisect_width_threshold(threshold, width_oracle, R, opts, inputs)


# ---------------------------------------------------------------------------
# remaining closed forms


@dataclass(frozen=True)
class AnisotropicConstants:
    """The six gamma-dependent constants of the persistence rate bounds."""

    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    c5: float = 1.0
    c6: float = 1.0

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "c4", "c5", "c6"):
            if getattr(self, name) <= 0:
                raise InvalidInput(f"{name} must be positive")


@dataclass(frozen=True)
class AnisotropicBounds:
    r_bound: float
    s_bound: float
    r_log_valid: bool
    s_log_valid: bool


def anisotropic_rate_bounds(
    R: float,
    sigma: float,
    n: int,
    M: int,
    constants: AnisotropicConstants | None = None,
) -> AnisotropicBounds:
    """Closed-form envelopes for the two persistence fixed points.

    r_bound = c3 R^2/n log(c3 M/n) when n <= c4 M, else 0.
    s_bound = c5 R sigma/sqrt(n) sqrt(log(c5 M sigma/(sqrt(n) R))) when
    n <= c6 sigma^2 M^2 / R^2, else c5 sigma^2 M / n. A log argument <= 1
    clamps that bound to 0 and clears its validity flag.
    """
    _require_positive(R=R, sigma=sigma)
    if n < 1 or M < 1:
        raise InvalidInput("need n >= 1 and M >= 1")
    c = constants or AnisotropicConstants()
    r_valid = True
    if n <= c.c4 * M:
        arg = c.c3 * M / n
        if arg <= 1.0:
            r_bound, r_valid = 0.0, False
        else:
            r_bound = (c.c3 * R * R / n) * math.log(arg)
    else:
        r_bound = 0.0
    s_valid = True
    if n <= c.c6 * sigma * sigma * M * M / (R * R):
        arg = c.c5 * M * sigma / (math.sqrt(n) * R)
        if arg <= 1.0:
            s_bound, s_valid = 0.0, False
        else:
            s_bound = (c.c5 * R * sigma / math.sqrt(n)) * math.sqrt(math.log(arg))
    else:
        s_bound = c.c5 * sigma * sigma * M / n
    return AnisotropicBounds(r_bound, s_bound, r_valid, s_valid)


def r_star_bounded(
    b: float, L: float, R: float, M: int, n: int, C: float = 1.0
) -> FixedPointReport:
    """Squared fixed point C R K sqrt(log(e M K/(R sqrt n))/n), K = max(b, sqrt L).

    Requires the regime M K > R sqrt(n).
    """
    _require_positive(b=b, L=L, R=R)
    if M < 1 or n < 1:
        raise InvalidInput("need M >= 1 and n >= 1")
    if C < 1.0:
        raise InvalidInput("C must be >= 1")
    K = max(b, math.sqrt(L))
    if M * K <= R * math.sqrt(n):
        raise InvalidRegime(
            f"M K = {M * K:.6g} must exceed R sqrt(n) = {R * math.sqrt(n):.6g}"
        )
    inputs = {"b": b, "L": L, "R": R, "M": M, "n": n, "C": C}
    value = C * R * K * math.sqrt(math.log(math.e * M * K / (R * math.sqrt(n))) / n)
    return FixedPointReport(value, BRANCH_WIDTH, inputs, extras={"K": K})


def bounded_process_bound(
    L: float, R: float, b: float, M: int, n: int, r: float, c: float = 1.0
) -> float:
    """Envelope for the symmetrized empirical process over the localized hull.

    c * max(sqrt(L) R sqrt(log(e M r^2/R^2)/n), b R^2 log(e M r^2/R^2)/(r^2 n)),
    valid on R/sqrt(M) <= r <= R.
    """
    _require_positive(L=L, R=R, b=b, r=r, c=c)
    if M < 1 or n < 1:
        raise InvalidInput("need M >= 1 and n >= 1")
    lo = R / math.sqrt(M)
    if not (lo * (1 - 1e-12) <= r <= R * (1 + 1e-12)):
        raise InvalidRegime(f"need R/sqrt(M) = {lo:.6g} <= r <= R = {R:.6g}, got {r}")
    log_term = math.log(math.e * M * r * r / (R * R))
    term_sqrt = math.sqrt(L) * R * math.sqrt(log_term / n)
    term_lin = b * R * R * log_term / (r * r * n)
    return c * max(term_sqrt, term_lin)


def t_star_finite_dim(p0_sup: float, d: int, n: int) -> float:
    """Squared fixed point 256 |p0|_inf d / n for a d-dimensional class."""
    _require_positive(p0_sup=p0_sup)
    if d < 1 or n < 1:
        raise InvalidInput("need d >= 1 and n >= 1")
    return 256.0 * p0_sup * d / n


def rademacher_sup_bound(rad: float, v: float, b_inf: float, x: float, n: int) -> float:
    """High-probability envelope 4 rad + sqrt(2 v x / n) + 8 b_inf x / (3 n)."""
    if rad < 0 or v < 0 or x < 0:
        raise InvalidInput("rad, v and x must be nonnegative")
    _require_positive(b_inf=b_inf)
    if n < 1:
        raise InvalidInput("n must be >= 1")
    return 4.0 * rad + math.sqrt(2.0 * v * x / n) + 8.0 * b_inf * x / (3.0 * n)


def verify_t_star_fixed_point(
    dictionary: Dictionary,
    sigma: float,
    R: float,
    n: int,
    n_samples: int,
    stream: SeededStream,
    width_opts: WidthOpts | None = None,
) -> dict:
    """Empirical check that the width at radius t* sits below t*^2 / 2.

    `dictionary` holds the root-n-normalized points (columns bounded by R in
    Euclidean norm, ambient dimension n). The claimed inequality,
    (sigma/sqrt n) * width(t*) <= t*^2 / 2, is evaluated by Monte Carlo and
    reported with a 3-stderr allowance.
    """
    _require_positive(sigma=sigma, R=R)
    if dictionary.n != n:
        raise InvalidInput(
            f"dictionary ambient dimension {dictionary.n} must equal n = {n}"
        )
    norms = np.linalg.norm(dictionary.points, axis=0)
    if np.any(norms > R * (1 + 1e-9)):
        raise InvalidInput("columns must have norm at most R")
    report = t_star_kappa(sigma, R, n, dictionary.M)
    t_star = math.sqrt(report.value)
    est = estimate_width(dictionary, t_star, n_samples, stream, opts=width_opts)
    scale = sigma / math.sqrt(n)
    lhs = scale * est.mean
    lhs_stderr = scale * est.stderr
    rhs = report.value / 2.0
    return {
        "t_star_sq": report.value,
        "t_star": t_star,
        "side_condition_ok": report.extras.get("side_condition_ok", True),
        "lhs_mean": lhs,
        "lhs_stderr": lhs_stderr,
        "rhs": rhs,
        "passed": lhs <= rhs + 3.0 * lhs_stderr,
        "width_mean": est.mean,
        "width_stderr": est.stderr,
        "n_samples": n_samples,
    }
