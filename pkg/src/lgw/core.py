"""Core data model: dictionaries, Gram matrices, simplex weights.

All types are immutable after construction and validate their invariants
eagerly, so downstream numerical code can assume well-formed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidInput, NonConvergence
from .solvers import minimize_quadratic_simplex

__all__ = [
    "Dictionary",
    "GramMatrix",
    "SimplexWeight",
    "SparseGridWeight",
    "gram",
    "q_form",
    "mu_of_theta",
    "project_simplex",
    "project_l1_ball",
    "min_q_over_simplex",
    "read_dictionary_csv",
    "write_dictionary_csv",
    "signed_basis_dictionary",
]

_PSD_EXACT_MAX = 50     # exact eigendecomposition up to this size
_PSD_TRUSTED_MIN = 2001  # beyond this the PSD check is skipped
_NEG_CLAMP = -1e-12
_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Dictionary:
    """M points in R^n stored as the columns of an n x M matrix."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidInput("points must be a nonempty 2-d matrix (n rows, M columns)")
        if not np.all(np.isfinite(pts)):
            raise InvalidInput("points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def M(self) -> int:
        return self.points.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.points[:, j]

    def scaled(self, factor: float) -> "Dictionary":
        return Dictionary(self.points * float(factor))


def signed_basis_dictionary(n: int) -> Dictionary:
    """The 2n points {+-e_1, ..., +-e_n} in R^n (columns e_1..e_n, -e_1..-e_n)."""
    eye = np.eye(n)
    return Dictionary(np.hstack([eye, -eye]))


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric PSD matrix of pairwise inner products, plus its diagonal cap."""

    sigma: np.ndarray
    max_diag: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        sig = np.ascontiguousarray(self.sigma, dtype=np.float64)
        if sig.ndim != 2 or sig.shape[0] != sig.shape[1] or sig.shape[0] < 1:
            raise InvalidInput("sigma must be a square matrix")
        if not np.all(np.isfinite(sig)):
            raise InvalidInput("sigma must be finite")
        asym = np.abs(sig - sig.T) - 1e-12 * (1.0 + np.abs(sig))
        if np.any(asym > 0):
            raise InvalidInput("sigma is not symmetric within tolerance")
        sig = 0.5 * (sig + sig.T)
        _check_psd(sig)
        diag_max = float(np.max(np.diag(sig)))
        md = self.max_diag
        if md is None:
            md = diag_max
        else:
            md = float(md)
            if md < 0 or diag_max > md * (1.0 + 1e-12) + 1e-300:
                raise InvalidInput(
                    f"max_diag={md} does not dominate the diagonal (max entry {diag_max})"
                )
        sig.setflags(write=False)
        object.__setattr__(self, "sigma", sig)
        object.__setattr__(self, "max_diag", md)

    @property
    def M(self) -> int:
        return self.sigma.shape[0]


def _check_psd(sig: np.ndarray) -> None:
    M = sig.shape[0]
    if M >= _PSD_TRUSTED_MIN:
        return
    floor = -1e-8 * max(np.trace(sig), 0.0) / M
    if M <= _PSD_EXACT_MAX:
        lam_min = float(np.linalg.eigvalsh(sig)[0])
    else:
        lam_min = _power_iteration_min_eig(sig)
    if lam_min < floor:
        raise InvalidInput(f"sigma is not positive semi-definite (lambda_min ~ {lam_min:.3e})")


def _power_iteration_min_eig(sig: np.ndarray, iters: int = 200) -> float:
    # Largest eigenvalue of c*I - sigma gives c - lambda_min(sigma).
    M = sig.shape[0]
    c = float(np.max(np.sum(np.abs(sig), axis=1)))  # Gershgorin cap on |lambda|
    v = np.ones(M) / np.sqrt(M)
    v[0] += 0.5  # deterministic symmetry breaker
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(iters):
        w = c * v - sig @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return c
        v = w / nw
        mu = nw
    return c - mu


@dataclass(frozen=True)
class SimplexWeight:
    """Nonnegative weights summing to one.

    Entries in [-1e-12, 0) are treated as roundoff, clamped to zero and the
    vector renormalized; anything more negative is a construction error.
    """

    theta: np.ndarray

    def __post_init__(self):
        th = np.array(self.theta, dtype=np.float64)
        if th.ndim != 1 or th.size < 1:
            raise InvalidInput("theta must be a nonempty vector")
        if not np.all(np.isfinite(th)):
            raise InvalidInput("theta must be finite")
        if np.any(th < _NEG_CLAMP):
            raise InvalidInput(f"theta has entries below {_NEG_CLAMP}")
        np.clip(th, 0.0, None, out=th)
        s = th.sum()
        if abs(s - 1.0) > _SUM_TOL:
            raise InvalidInput(f"theta sums to {s}, not 1")
        th /= s
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    @property
    def M(self) -> int:
        return self.theta.shape[0]

    @staticmethod
    def vertex(M: int, j: int) -> "SimplexWeight":
        th = np.zeros(M)
        th[j] = 1.0
        return SimplexWeight(th)


@dataclass(frozen=True)
class SparseGridWeight:
    """Element of the m-averaging grid: integer counts summing to m."""

    counts: np.ndarray
    m: int

    def __post_init__(self):
        cnt = np.array(self.counts, dtype=np.int64)
        if cnt.ndim != 1 or cnt.size < 1:
            raise InvalidInput("counts must be a nonempty integer vector")
        if np.any(cnt < 0):
            raise InvalidInput("counts must be nonnegative")
        if self.m < 1:
            raise InvalidInput("m must be a positive integer")
        if int(cnt.sum()) != int(self.m):
            raise InvalidInput(f"counts sum to {int(cnt.sum())}, expected m={self.m}")
        cnt.setflags(write=False)
        object.__setattr__(self, "counts", cnt)
        object.__setattr__(self, "m", int(self.m))

    def weight(self) -> SimplexWeight:
        return SimplexWeight(self.counts.astype(np.float64) / self.m)

    @property
    def M(self) -> int:
        return self.counts.shape[0]


def gram(dictionary: Dictionary) -> GramMatrix:
    """Gram matrix of the dictionary columns."""
    sig = dictionary.points.T @ dictionary.points
    return GramMatrix(sigma=sig)


def q_form(gram_matrix: GramMatrix, theta: np.ndarray) -> float:
    """Evaluate theta' Sigma theta."""
    th = np.asarray(theta, dtype=np.float64)
    if th.shape != (gram_matrix.M,):
        raise DimensionMismatch(
            f"theta has length {th.shape}, expected ({gram_matrix.M},)"
        )
    return float(th @ gram_matrix.sigma @ th)


def mu_of_theta(dictionary: Dictionary, theta: SimplexWeight) -> np.ndarray:
    """Convex combination of the dictionary points with the given weights."""
    if theta.M != dictionary.M:
        raise DimensionMismatch(
            f"theta has {theta.M} entries, dictionary has {dictionary.M} columns"
        )
    return dictionary.points @ theta.theta


def project_simplex(v: np.ndarray) -> SimplexWeight:
    """Euclidean projection onto the simplex (sort-and-threshold, O(M log M))."""
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise InvalidInput("input must be a nonempty vector")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("input must be finite")
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, x.size + 1)
    cond = u - css / idx > 0
    rho = int(np.nonzero(cond)[0][-1]) + 1
    tau = css[rho - 1] / rho
    return SimplexWeight(np.maximum(x - tau, 0.0))


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the l1 ball of the given radius.

    Interior points are returned unchanged; otherwise the magnitudes are
    projected onto the radius-scaled simplex and the signs restored.
    """
    if radius <= 0:
        raise InvalidInput("radius must be positive")
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise InvalidInput("input must be a nonempty vector")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("input must be finite")
    if np.abs(x).sum() <= radius:
        return x.copy()
    mags = project_simplex(np.abs(x) / radius).theta * radius
    return np.sign(x) * mags


def min_q_over_simplex(
    gram_matrix: GramMatrix, tol: float = 1e-9, max_iter: int = 200_000
) -> tuple[SimplexWeight, float]:
    """Minimize Q(theta) = theta' Sigma theta over the simplex.

    Returns (theta_min, q_min) with q_min <= true minimum + tol * max_diag,
    certified by the conditional-gradient duality gap.
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    scale = max(gram_matrix.max_diag, np.finfo(float).tiny)
    res = minimize_quadratic_simplex(
        gram_matrix.sigma,
        np.zeros(gram_matrix.M),
        gap_tol=tol * scale,
        max_iter=max_iter,
    )
    weight = SimplexWeight(res.theta)
    q_min = q_form(gram_matrix, weight.theta)
    if not res.converged:
        raise NonConvergence(
            f"min-Q conditional gradient did not reach gap {tol * scale:.3e} "
            f"in {max_iter} iterations (gap {res.gap:.3e})",
            best=(weight, q_min),
        )
    return weight, q_min


def write_dictionary_csv(path, dictionary: Dictionary) -> None:
    """Write `# n=<n> m=<M>` then n rows of M comma-separated decimals."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# n={dictionary.n} m={dictionary.M}\n")
        for row in dictionary.points:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_dictionary_csv(path) -> Dictionary:
    """Read the dictionary format produced by :func:`write_dictionary_csv`."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        parts = header.replace(",", " ").split()
        if len(parts) < 3 or parts[0] != "#":
            raise InvalidInput(f"bad dictionary header: {header!r}")
        fields = dict(p.split("=", 1) for p in parts[1:] if "=" in p)
        try:
            n = int(fields["n"])
            M = int(fields["m"])
        except (KeyError, ValueError) as exc:
            raise InvalidInput(f"bad dictionary header: {header!r}") from exc
        rows = []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            vals = [float(tok) for tok in line.split(",")]
            if len(vals) != M:
                raise DimensionMismatch(
                    f"line {line_no}: expected {M} values, got {len(vals)}"
                )
            rows.append(vals)
    if len(rows) != n:
        raise DimensionMismatch(f"expected {n} rows, got {len(rows)}")
    return Dictionary(np.array(rows, dtype=np.float64))
