"""Localized Gaussian widths of M-point convex hulls.

Monte Carlo width estimation with a certified inner maximizer, closed-form
upper and lower bounds, the one-sided restricted-isometry constant, and the
greedy signed packing used by the lower-bound construction.

The inner problem, maximize g' mu_theta over the simplex subject to
Q(theta) <= s^2, is solved by bisecting the multiplier of the penalized
concave program; each penalized solve is an away-step conditional gradient.
The problem is normalized internally to radius one (Q/s^2 <= 1), which makes
the solve scale-equivariant and keeps tolerances dimensionless.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import Dictionary, GramMatrix, SimplexWeight, gram, min_q_over_simplex
from .errors import (
    DimensionMismatch,
    EmptyIntersection,
    InvalidInput,
    InvalidRegime,
    NonConvergence,
    SignSearchExhausted,
)
from .rng import SeededStream
from .solvers import fw_quadratic_step

__all__ = [
    "WidthOpts",
    "SupportSolution",
    "WidthEstimate",
    "Packing",
    "local_support",
    "estimate_width",
    "upper_bound_closed_form",
    "upper_bound_scaled",
    "lower_bound_rip",
    "rip_constant",
    "build_packing",
]


@dataclass(frozen=True)
class WidthOpts:
    """Inner-solver and Monte Carlo options.

    feas_tol is the bisection target on the normalized constraint |Q/s^2 - 1|,
    i.e. relative to the squared radius. cg_gap_rel scales the per-multiplier
    conditional-gradient gap tolerance. A sample counts as converged when the
    bisection hits feas_tol or the certified gap is below cg_gap_rel relative
    to the achieved value.
    """

    feas_tol: float = 1e-8
    cg_gap_rel: float = 1e-6
    bisect_steps: int = 60
    cg_max_iter: int = 5000
    anchor_tol: float = 1e-9
    max_doublings: int = 200
    threads: int = 1

    def as_dict(self) -> dict:
        return {
            "feas_tol": self.feas_tol,
            "cg_gap_rel": self.cg_gap_rel,
            "bisect_steps": self.bisect_steps,
            "cg_max_iter": self.cg_max_iter,
            "anchor_tol": self.anchor_tol,
            "max_doublings": self.max_doublings,
            "threads": self.threads,
        }


@dataclass(frozen=True)
class SupportSolution:
    """One certified inner maximization.

    ``value + dual_gap`` upper-bounds the true supremum; ``value`` itself is
    attained at the feasible ``theta``. ``lam`` is the active multiplier of
    the quadratic constraint (zero when the best vertex is feasible).
    """

    value: float
    theta: SimplexWeight
    q_value: float
    lam: float
    dual_gap: float
    feasible: bool
    converged: bool


@dataclass(frozen=True)
class WidthEstimate:
    """Monte Carlo localized-width estimate with its standard error."""

    mean: float
    stderr: float
    n_samples: int
    s: float
    mean_dual_gap: float
    n_nonconverged: int = 0


@dataclass(frozen=True)
class Packing:
    """Signed supports of equal weight with pairwise support distance > m."""

    signed_vectors: np.ndarray  # (K, M) entries in {-1, 0, 1}
    m: int

    def __post_init__(self):
        sv = np.array(self.signed_vectors, dtype=np.int8)
        if sv.ndim != 2 or sv.shape[0] < 1:
            raise InvalidInput("signed_vectors must be a nonempty (K, M) matrix")
        if not np.all(np.isin(sv, (-1, 0, 1))):
            raise InvalidInput("signed_vectors entries must be in {-1, 0, 1}")
        weights = np.count_nonzero(sv, axis=1)
        if not np.all(weights == self.m):
            raise InvalidInput("every signed vector must have exactly m nonzeros")
        supports = (sv != 0).astype(np.float32)
        overlaps = supports @ supports.T
        np.fill_diagonal(overlaps, 0.0)
        if np.any(2.0 * overlaps >= self.m):
            raise InvalidInput("pairwise support distance must exceed m")
        sv.setflags(write=False)
        object.__setattr__(self, "signed_vectors", sv)
        object.__setattr__(self, "m", int(self.m))

    @property
    def size(self) -> int:
        return self.signed_vectors.shape[0]


# ---------------------------------------------------------------------------
# inner solver


@dataclass
class _SupportContext:
    points: np.ndarray        # n x M
    sigma_n: np.ndarray       # Sigma / s^2
    diag_n: np.ndarray
    s: float
    anchor_theta: np.ndarray
    anchor_stheta: np.ndarray  # sigma_n @ anchor
    anchor_q: float            # anchor' sigma_n anchor, <= 1
    lam_unit: float            # initial multiplier per unit of |c|_inf

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def M(self) -> int:
        return self.points.shape[1]


def _make_context(
    dictionary: Dictionary,
    s: float,
    opts: WidthOpts,
    gram_matrix: GramMatrix | None = None,
) -> _SupportContext:
    if s <= 0:
        raise InvalidInput("radius s must be positive")
    gm = gram_matrix if gram_matrix is not None else gram(dictionary)
    if gm.M != dictionary.M:
        raise DimensionMismatch("gram matrix does not match the dictionary")
    inv_s2 = 1.0 / (s * s)
    sigma_n = np.ascontiguousarray(gm.sigma * inv_s2)
    max_diag_n = max(float(np.max(np.diag(sigma_n))), np.finfo(float).tiny)
    anchor_gram = GramMatrix(sigma=sigma_n)
    anchor, q_anchor = min_q_over_simplex(anchor_gram, tol=opts.anchor_tol)
    if q_anchor > 1.0 + opts.feas_tol:
        raise EmptyIntersection(
            f"min of Q over the simplex is {q_anchor * s * s:.6g} > s^2 = {s * s:.6g}"
        )
    anchor_theta = anchor.theta.copy()
    return _SupportContext(
        points=dictionary.points,
        sigma_n=sigma_n,
        diag_n=np.ascontiguousarray(np.diag(sigma_n)),
        s=float(s),
        anchor_theta=anchor_theta,
        anchor_stheta=sigma_n @ anchor_theta,
        anchor_q=min(q_anchor, 1.0),
        lam_unit=1.0 / (2.0 * max_diag_n),
    )


@njit(cache=True, nogil=True)
def _repair_toward_anchor(theta, stheta, q, anchor_theta, anchor_stheta, anchor_q):  # pragma: no cover
    """Smallest t in [0,1] with Q((1-t) theta + t anchor) = 1, applied in place."""
    m = 0.0
    for j in range(theta.shape[0]):
        m += anchor_theta[j] * stheta[j]
    a = anchor_q - 2.0 * m + q
    b = 2.0 * (m - q)
    c0 = q - 1.0
    if c0 <= 0.0:
        return 0.0
    t = 1.0
    if abs(a) < 1e-300:
        if b < 0.0:
            t = -c0 / b
    else:
        disc = b * b - 4.0 * a * c0
        if disc >= 0.0:
            rt = math.sqrt(disc)
            t1 = (-b - rt) / (2.0 * a)
            t2 = (-b + rt) / (2.0 * a)
            t = 2.0
            if 0.0 <= t1 <= 1.0:
                t = t1
            if 0.0 <= t2 <= 1.0 and t2 < t:
                t = t2
            if t > 1.0:
                t = 1.0
    for j in range(theta.shape[0]):
        theta[j] = (1.0 - t) * theta[j] + t * anchor_theta[j]
        stheta[j] = (1.0 - t) * stheta[j] + t * anchor_stheta[j]
    return t


def _solve_support(ctx: _SupportContext, c: np.ndarray, opts: WidthOpts):
    """Fast tuple-returning core shared by local_support and estimate_width.

    Returns (value, theta, q_norm, lam_norm, dual_gap, converged).
    """
    v = int(np.argmax(c))
    if ctx.diag_n[v] <= 1.0 + opts.feas_tol:
        theta = np.zeros(ctx.M)
        theta[v] = 1.0
        return float(c[v]), theta, float(ctx.diag_n[v]), 0.0, 0.0, True

    c_scale = float(np.max(np.abs(c)))
    if c_scale == 0.0:
        return 0.0, ctx.anchor_theta.copy(), ctx.anchor_q, 0.0, 0.0, True

    gap_tol = opts.cg_gap_rel * c_scale
    theta = ctx.anchor_theta.copy()
    stheta = ctx.anchor_stheta.copy()

    best_upper = float(c[v])  # multiplier-zero dual bound
    best_value = float(c @ ctx.anchor_theta)
    best_theta = None  # anchor by default

    def solve_at(lam):
        nonlocal best_upper, best_value, best_theta
        fw_gap, _, q = fw_quadratic_step(
            ctx.sigma_n, c, lam, theta, stheta, opts.cg_max_iter, gap_tol
        )
        val = float(c @ theta)
        upper = val - lam * (q - 1.0) + fw_gap
        if upper < best_upper:
            best_upper = upper
        if q <= 1.0 + 1e-12 and val > best_value:
            best_value = val
            best_theta = theta.copy()
        return q

    lam_lo = 0.0
    lam_hi = ctx.lam_unit * c_scale
    q = solve_at(lam_hi)
    doublings = 0
    while q > 1.0 and doublings < opts.max_doublings:
        lam_lo = lam_hi
        lam_hi *= 2.0
        q = solve_at(lam_hi)
        doublings += 1

    lam = lam_hi
    feas_hit = abs(q - 1.0) <= opts.feas_tol
    if not feas_hit:
        for _ in range(opts.bisect_steps):
            lam = 0.5 * (lam_lo + lam_hi)
            q = solve_at(lam)
            if abs(q - 1.0) <= opts.feas_tol:
                feas_hit = True
                break
            if q > 1.0:
                lam_lo = lam
            else:
                lam_hi = lam

    if q > 1.0:
        _repair_toward_anchor(
            theta, stheta, q, ctx.anchor_theta, ctx.anchor_stheta, ctx.anchor_q
        )
        q = float(theta @ stheta)
    val = float(c @ theta)
    if val >= best_value:
        best_value = val
        final_theta, final_q = theta, q
    elif best_theta is not None:
        final_theta = best_theta
        final_q = float(best_theta @ (ctx.sigma_n @ best_theta))
    else:
        final_theta, final_q = ctx.anchor_theta.copy(), ctx.anchor_q

    dual_gap = max(best_upper - best_value, 0.0)
    # The achievable gap is set by the per-multiplier solve tolerance, which
    # scales with |c|_inf; a factor 8 covers the repair and bracketing noise.
    converged = feas_hit or dual_gap <= 8.0 * opts.cg_gap_rel * max(1.0, c_scale)
    return best_value, final_theta, final_q, lam, dual_gap, converged


def local_support(
    dictionary: Dictionary,
    g: np.ndarray,
    s: float,
    opts: WidthOpts | None = None,
    gram_matrix: GramMatrix | None = None,
) -> SupportSolution:
    """Maximize g' mu_theta over the simplex subject to Q(theta) <= s^2.

    Raises EmptyIntersection when even the minimum of Q over the simplex
    exceeds s^2. On cap exhaustion the best feasible iterate is returned
    with ``converged=False`` and the certified gap left large.
    """
    opts = opts or WidthOpts()
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (dictionary.n,):
        raise DimensionMismatch(f"g has shape {g.shape}, expected ({dictionary.n},)")
    ctx = _make_context(dictionary, s, opts, gram_matrix)
    c = g @ ctx.points
    value, theta, q_n, lam_n, dual_gap, converged = _solve_support(ctx, c, opts)
    return SupportSolution(
        value=value,
        theta=SimplexWeight(theta),
        q_value=q_n * s * s,
        lam=lam_n / (s * s),
        dual_gap=dual_gap,
        feasible=True,
        converged=converged,
    )


def estimate_width(
    dictionary: Dictionary,
    s: float,
    n_samples: int,
    stream: SeededStream,
    opts: WidthOpts | None = None,
    gram_matrix: GramMatrix | None = None,
) -> WidthEstimate:
    """Monte Carlo estimate of the localized Gaussian width at radius s.

    Sample k draws its Gaussian direction from ``stream.substream(k)``, so
    the estimate is independent of thread count and evaluation order.
    """
    opts = opts or WidthOpts()
    if n_samples < 2:
        raise InvalidInput("n_samples must be at least 2")
    ctx = _make_context(dictionary, s, opts, gram_matrix)
    values = np.empty(n_samples)
    gaps = np.empty(n_samples)
    conv = np.zeros(n_samples, dtype=bool)

    def run_sample(k: int) -> None:
        g = stream.substream(k).open().gaussians(ctx.n)
        c = g @ ctx.points
        value, _, _, _, dual_gap, ok = _solve_support(ctx, c, opts)
        values[k] = value
        gaps[k] = dual_gap
        conv[k] = ok

    if opts.threads > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            list(pool.map(run_sample, range(n_samples)))
    else:
        for k in range(n_samples):
            run_sample(k)

    n_bad = int(n_samples - conv.sum())
    estimate = WidthEstimate(
        mean=float(values.mean()),
        stderr=float(values.std(ddof=1) / math.sqrt(n_samples)),
        n_samples=n_samples,
        s=float(s),
        mean_dual_gap=float(gaps.mean()),
        n_nonconverged=n_bad,
    )
    if n_bad > 0.01 * n_samples:
        raise NonConvergence(
            f"{n_bad}/{n_samples} samples failed to converge", best=estimate
        )
    return estimate


# ---------------------------------------------------------------------------
# closed-form bounds


def _log_plus(a: float) -> float:
    return max(1.0, math.log(a)) if a > 0 else 1.0


def upper_bound_closed_form(M: int, n: int, s: float) -> float:
    """Width upper bound for a hull of M points inside the unit ball."""
    if M < 2 or n < 1:
        raise InvalidInput("need M >= 2 and n >= 1")
    if s <= 0:
        raise InvalidInput("s must be positive")
    log_term = 4.0 * math.sqrt(_log_plus(4.0 * math.e * M * min(s * s, 1.0)))
    cs_term = s * math.sqrt(min(n, M))
    return min(log_term, cs_term)


def upper_bound_scaled(M: int, n: int, r: float, R: float) -> float:
    """Width upper bound when the vertices are bounded by R instead of 1."""
    if M < 2 or n < 1:
        raise InvalidInput("need M >= 2 and n >= 1")
    if r <= 0 or R <= 0:
        raise InvalidInput("r and R must be positive")
    log_term = 4.0 * R * math.sqrt(_log_plus(4.0 * math.e * M * min(1.0, (r * r) / (R * R))))
    cs_term = r * math.sqrt(min(n, M))
    return min(log_term, cs_term)


def lower_bound_rip(M: int, s: float, kappa: float) -> float:
    """Packing-based width lower bound under a one-sided RIP constant kappa.

    Valid when m = 1/s^2 is a positive integer with m <= M/5; otherwise
    InvalidRegime is raised.
    """
    if M < 2:
        raise InvalidInput("need M >= 2")
    if not (0.0 < s <= 1.0):
        raise InvalidInput("s must lie in (0, 1]")
    if not (0.0 < kappa <= 1.0):
        raise InvalidInput("kappa must lie in (0, 1]")
    m_real = 1.0 / (s * s)
    m = round(m_real)
    if m < 1 or abs(m_real - m) > 1e-9 * m:
        raise InvalidRegime(f"1/s^2 = {m_real} is not a positive integer")
    if m > M / 5.0:
        raise InvalidRegime(f"m = {m} exceeds M/5 = {M / 5.0}")
    arg = M * s * s / 5.0
    if arg < 1.0:
        raise InvalidRegime(f"M s^2 / 5 = {arg} < 1 gives no positive bound")
    return (math.sqrt(2.0) / 4.0) * kappa * math.sqrt(math.log(arg))


# ---------------------------------------------------------------------------
# RIP constant


def rip_constant(
    dictionary: Dictionary,
    sparsity: int,
    budget: int = 100_000,
    stream: SeededStream | None = None,
) -> tuple[float, bool]:
    """Smallest singular value ratio over sparse supports.

    Enumerates all supports of size `sparsity` when their count fits the
    budget (exact=True); otherwise evaluates `budget` uniformly sampled
    supports, which can only overestimate the true constant (exact=False).
    """
    if sparsity < 1:
        raise InvalidInput("sparsity must be >= 1")
    k = min(sparsity, dictionary.M)
    sigma = gram(dictionary).sigma
    total = math.comb(dictionary.M, k)
    exact = total <= budget
    if exact:
        from itertools import combinations

        supports = np.array(list(combinations(range(dictionary.M), k)), dtype=np.int64)
    else:
        if stream is None:
            raise InvalidInput("a stream is required when sampling supports")
        drawer = stream.open()
        supports = np.empty((budget, k), dtype=np.int64)
        for i in range(budget):
            supports[i] = drawer.choose_indices(dictionary.M, k)
    lam_min = np.inf
    batch = 4096
    for lo in range(0, supports.shape[0], batch):
        idx = supports[lo : lo + batch]
        subs = sigma[idx[:, :, None], idx[:, None, :]]
        eigs = np.linalg.eigvalsh(subs)[:, 0]
        lam_min = min(lam_min, float(eigs.min()))
    return math.sqrt(max(lam_min, 0.0)), exact


# ---------------------------------------------------------------------------
# greedy signed packing


@njit(cache=True, nogil=True)
def _has_conflict(supports, n_rows, cand_idx, m):  # pragma: no cover
    for r in range(n_rows):
        ov = 0
        for t in range(cand_idx.shape[0]):
            ov += supports[r, cand_idx[t]]
            if 2 * ov >= m:
                return True
    return False


def build_packing(
    dictionary: Dictionary,
    m: int,
    stream: SeededStream,
    rejection_cap: int = 10_000,
    sign_cap: int = 1_000_000,
) -> Packing:
    """Greedy randomized packing of weight-m supports with signed vertices.

    Supports are accepted while their pairwise support distance exceeds m;
    the search stops after `rejection_cap` consecutive rejections. Each
    accepted support is signed so that the corresponding vertex combination
    has squared norm at most m, which a mean argument guarantees to exist.
    Requires unit-norm columns (within 1e-6). When m <= M/5 the accepted
    family must reach the guaranteed cardinality, else AssertionError.
    """
    M = dictionary.M
    if not (1 <= m <= M):
        raise InvalidInput(f"need 1 <= m <= M, got m={m}, M={M}")
    norms = np.linalg.norm(dictionary.points, axis=0)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise InvalidInput("build_packing requires unit-norm columns (within 1e-6)")

    greedy = stream.substream(0).open()
    supports = np.zeros((256, M), dtype=np.uint8)
    accepted: list[np.ndarray] = []
    rejections = 0
    while rejections < rejection_cap:
        cand = greedy.choose_indices(M, m)
        if _has_conflict(supports, len(accepted), cand, m):
            rejections += 1
            continue
        rejections = 0
        if len(accepted) == supports.shape[0]:
            supports = np.vstack([supports, np.zeros_like(supports)])
        supports[len(accepted), cand] = 1
        accepted.append(cand)

    if m <= M / 5.0:
        guaranteed = (m / 2.0) * math.log(M / (5.0 * m))
        if math.log(len(accepted)) < guaranteed - 1e-12:
            raise AssertionError(
                f"greedy packing of size {len(accepted)} misses the guaranteed "
                f"log-cardinality {guaranteed:.6g}"
            )

    sigma = gram(dictionary).sigma
    signed = np.zeros((len(accepted), M), dtype=np.int8)
    for i, idx in enumerate(accepted):
        sub = np.ascontiguousarray(sigma[np.ix_(idx, idx)])
        drawer = stream.substream(i + 1).open()
        found = False
        for _ in range(sign_cap):
            eps = drawer.rademacher(m)
            if float(eps @ sub @ eps) <= m * (1.0 + 1e-9):
                signed[i, idx] = eps.astype(np.int8)
                found = True
                break
        if not found:
            raise SignSearchExhausted(
                f"no admissible signing for support {i} in {sign_cap} draws"
            )
    return Packing(signed_vectors=signed, m=m)
