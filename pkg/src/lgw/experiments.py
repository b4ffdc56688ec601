"""Configuration-driven experiment harness.

Each experiment kind turns a flat key=value config into a deterministic,
seeded run that exercises one family of inequalities and emits self-auditing
rows: every violation flag is recomputable from the other columns of its own
row. Replicates draw from per-index substreams and are assembled in index
order, so thread count never changes the output bytes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Dictionary, GramMatrix, SimplexWeight, gram, read_dictionary_csv, signed_basis_dictionary
from .errors import EmptyIntersection, InvalidInput, InvalidRegime, NoCrossing, NonConvergence
from .estimators import (
    DensityProblem,
    RegressionProblem,
    SolveOpts,
    convex_aggregate,
    density_erm,
    lasso_constrained,
    minimize_quadratic_l1,
    persistence_erm,
)
from .maurey import expected_q_of_sample, sparsify_certified
from .rates import (
    FixedPointOpts,
    phi_convex,
    r_n_fixed_point,
    s_n_fixed_point,
    sqrt_psd,
    t_star_convex_agg,
    t_star_kappa,
    t_star_lasso,
)
from .rng import SeededStream
from .solvers import minimize_quadratic_simplex
from .width import WidthOpts, estimate_width, lower_bound_rip, rip_constant, upper_bound_closed_form

__all__ = [
    "ExperimentConfig",
    "RunResult",
    "parse_config",
    "parse_config_text",
    "validate_config",
    "run_config",
    "run_width_sandwich",
    "run_oracle_coverage",
    "run_density_oracle",
    "run_maurey_check",
    "run_persistence",
    "run_rates_sweep",
    "emit_report",
    "FIELDNAMES",
]

KINDS = (
    "width-sandwich",
    "maurey-check",
    "lasso-oracle",
    "agg-oracle",
    "density-oracle",
    "persistence-run",
    "rates-sweep",
)

FIELDNAMES = {
    "width-sandwich": [
        "s", "samples", "mean", "stderr", "mean_dual_gap", "n_nonconverged",
        "upper_bound", "lower_bound", "kappa", "lower_regime_ok",
        "upper_violation", "lower_violation", "error",
    ],
    "lasso-oracle": [
        "replicate", "excess", "oracle_term", "t_star_sq", "t_star_branch",
        "bound", "violation", "converged",
    ],
    "agg-oracle": [
        "replicate", "excess", "oracle_term", "t_star_sq", "t_star_branch",
        "bound", "violation", "converged",
    ],
    "density-oracle": [
        "replicate", "theta_hat_1", "excess", "closed_form_excess",
        "bound", "violation", "converged",
    ],
    "maurey-check": [
        "instance", "m", "trials", "q_bar", "r2_over_m", "q_hat_mean",
        "q_hat_stderr", "best_q", "bound", "violation", "identity_expected",
        "identity_ok",
    ],
    "persistence-run": [
        "n", "replicate", "excess", "r_n_sq", "s_n_sq", "rate_bound",
        "ratio", "converged", "rate_error",
    ],
    "rates-sweep": ["formula", "n", "M", "value", "branch", "error"],
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    parameters: dict
    seed: int
    output_path: str | None = None


@dataclass(frozen=True)
class RunResult:
    kind: str
    rows: list
    fieldnames: list
    passed: bool
    summary: dict


# ---------------------------------------------------------------------------
# config parsing


def _parse_value(text: str):
    text = text.strip()
    if "," in text:
        return [_parse_value(tok) for tok in text.split(",") if tok.strip()]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse `key = value` lines; `#` starts a comment, grids are comma lists."""
    kind = None
    seed = None
    output = None
    params: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInput(f"config line {line_no}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "kind":
            kind = value
        elif key == "seed":
            seed = int(value)
        elif key == "output":
            output = value
        else:
            params[key] = _parse_value(value)
    if kind is None:
        raise InvalidInput("config is missing the required key 'kind'")
    if seed is None:
        raise InvalidInput("config is missing the required key 'seed'")
    return ExperimentConfig(kind=kind, parameters=params, seed=seed, output_path=output)


def parse_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _need(params: dict, key: str, kind: str):
    if key not in params:
        raise InvalidInput(f"{kind}: missing required parameter '{key}'")
    return params[key]


def _as_grid(value) -> list:
    return list(value) if isinstance(value, list) else [value]


def validate_config(cfg: ExperimentConfig) -> None:
    """Check presence, shapes and regimes before any work is done."""
    if cfg.kind not in KINDS:
        raise InvalidInput(f"unknown experiment kind {cfg.kind!r}; choose from {KINDS}")
    p = cfg.parameters
    if cfg.kind == "width-sandwich":
        grid = _as_grid(_need(p, "s_grid", cfg.kind))
        if not grid:
            raise InvalidInput("width-sandwich: s_grid must be a nonempty list")
        if any(s <= 0 for s in grid):
            raise InvalidInput("width-sandwich: every radius in s_grid must be positive")
        if int(p.get("samples", 10_000)) < 2:
            raise InvalidInput("width-sandwich: samples must be at least 2")
        if "dict" not in p and "n" not in p:
            raise InvalidInput("width-sandwich: provide either 'dict' (CSV path) or 'n'")
    elif cfg.kind in ("lasso-oracle", "agg-oracle"):
        for key in ("n", "M", "sigma", "x", "replicates"):
            _need(p, key, cfg.kind)
        if cfg.kind == "lasso-oracle":
            _need(p, "R", cfg.kind)
        if p["sigma"] <= 0:
            raise InvalidInput(f"{cfg.kind}: sigma must be positive")
        if p["x"] <= 0:
            raise InvalidInput(f"{cfg.kind}: x must be positive")
        if int(p["replicates"]) < 1:
            raise InvalidInput(f"{cfg.kind}: replicates must be >= 1")
        conv = p.get("radius_convention", "quarter-max")
        if conv not in ("quarter-max", "direct"):
            raise InvalidInput(
                f"{cfg.kind}: radius_convention must be 'quarter-max' or 'direct'"
            )
    elif cfg.kind == "density-oracle":
        for key in ("n", "replicates", "x"):
            _need(p, key, cfg.kind)
        bins = int(p.get("bins", 2))
        if bins < 2:
            raise InvalidInput("density-oracle: bins must be >= 2")
        weights = p.get("mix_weights")
        if weights is not None:
            w = _as_grid(weights)
            if len(w) != bins or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
                raise InvalidInput(
                    "density-oracle: mix_weights must be a nonnegative list of "
                    f"length bins={bins} summing to 1"
                )
    elif cfg.kind == "maurey-check":
        for key in ("m", "trials"):
            _need(p, key, cfg.kind)
        if int(p["m"]) < 1 or int(p["trials"]) < 1:
            raise InvalidInput("maurey-check: m and trials must be >= 1")
        if int(p.get("instances", 1)) < 1:
            raise InvalidInput("maurey-check: instances must be >= 1")
    elif cfg.kind == "persistence-run":
        for key in ("M", "R", "sigma", "n_grid", "replicates"):
            _need(p, key, cfg.kind)
        if not _as_grid(p["n_grid"]):
            raise InvalidInput("persistence-run: n_grid must be nonempty")
        if p["R"] <= 0:
            raise InvalidInput("persistence-run: R must be positive")
        if p["sigma"] < 0:
            raise InvalidInput("persistence-run: sigma must be nonnegative")
        cov = p.get("cov", "identity")
        if cov not in ("identity", "toeplitz"):
            raise InvalidInput("persistence-run: cov must be 'identity' or 'toeplitz'")
    elif cfg.kind == "rates-sweep":
        formula = _need(p, "formula", cfg.kind)
        if formula not in ("t-star-agg", "t-star-lasso", "t-star-kappa", "phi-convex"):
            raise InvalidInput(f"rates-sweep: unknown formula {formula!r}")
        for key in ("n_grid", "M_grid"):
            if not _as_grid(_need(p, key, cfg.kind)):
                raise InvalidInput(f"rates-sweep: {key} must be nonempty")


# ---------------------------------------------------------------------------
# shared helpers


def _map_indexed(fn, count: int, threads: int) -> list:
    results = [None] * count

    def work(i: int) -> None:
        results[i] = fn(i)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(count)))
    else:
        for i in range(count):
            work(i)
    return results


def _normalized_design(stream: SeededStream, n: int, M: int) -> np.ndarray:
    """Gaussian design with every column scaled to (1/n)|x_j|^2 = 1."""
    raw = stream.open().gaussians(n * M).reshape(n, M)
    norms = np.linalg.norm(raw, axis=0)
    norms[norms == 0] = 1.0
    return raw * (math.sqrt(n) / norms)


def _binomial_stderr(rate: float, count: int) -> float:
    return math.sqrt(max(rate * (1.0 - rate), 0.0) / count)


# ---------------------------------------------------------------------------
# runners


def run_width_sandwich(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.parameters
    stream = SeededStream(cfg.seed)
    if "dict" in p:
        dictionary = read_dictionary_csv(p["dict"])
        rip_base = dictionary
    else:
        n = int(p["n"])
        dictionary = signed_basis_dictionary(n)
        rip_base = Dictionary(np.eye(n))
    if dictionary.M < 2:
        raise InvalidInput(
            "width-sandwich: the dictionary must have at least 2 columns "
            "(the closed-form bounds are defined for M >= 2)"
        )
    gm = gram(dictionary)
    M = dictionary.M
    samples = int(p.get("samples", 10_000))
    budget = int(p.get("budget", 100_000))
    fixed_kappa = p.get("kappa")
    s_grid = [float(s) for s in _as_grid(p["s_grid"])]
    opts = WidthOpts(threads=threads)

    rows = []
    all_ok = True
    for s in s_grid:
        row = dict.fromkeys(FIELDNAMES["width-sandwich"])
        row["s"] = s
        row["samples"] = samples
        row["error"] = ""
        try:
            est = estimate_width(dictionary, s, samples, stream, opts=opts, gram_matrix=gm)
        except (NonConvergence, EmptyIntersection, InvalidInput) as exc:
            row.update(
                mean=math.nan, stderr=math.nan, mean_dual_gap=math.nan,
                n_nonconverged=-1, upper_bound=math.nan, lower_bound=math.nan,
                kappa=math.nan, lower_regime_ok=False,
                upper_violation=False, lower_violation=False,
                error=f"width: {exc}",
            )
            rows.append(row)
            all_ok = False
            continue
        row["mean"] = est.mean
        row["stderr"] = est.stderr
        row["mean_dual_gap"] = est.mean_dual_gap
        row["n_nonconverged"] = est.n_nonconverged
        upper = upper_bound_closed_form(M, dictionary.n, s)
        row["upper_bound"] = upper
        lower = math.nan
        kappa = math.nan
        regime_ok = False
        try:
            m = round(1.0 / (s * s))
            if fixed_kappa is not None:
                kappa = float(fixed_kappa)
            else:
                kappa, _ = rip_constant(
                    rip_base, min(2 * m, rip_base.M), budget, stream.substream(900_000)
                )
            lower = lower_bound_rip(M, s, kappa)
            regime_ok = True
        except (InvalidRegime, InvalidInput) as exc:
            row["error"] = f"lower bound: {exc}"
        row["lower_bound"] = lower
        row["kappa"] = kappa
        row["lower_regime_ok"] = regime_ok
        row["upper_violation"] = bool(est.mean > upper + 2.0 * est.stderr)
        row["lower_violation"] = bool(
            regime_ok and est.mean < lower - 2.0 * est.stderr
        )
        if row["upper_violation"] or row["lower_violation"]:
            all_ok = False
        rows.append(row)
    summary = {"grid_points": len(rows), "all_flags_clear": all_ok}
    return RunResult("width-sandwich", rows, FIELDNAMES["width-sandwich"], all_ok, summary)


def _oracle_common(cfg: ExperimentConfig, flavor: str, threads: int) -> RunResult:
    p = cfg.parameters
    stream = SeededStream(cfg.seed)
    n = int(p["n"])
    M = int(p["M"])
    sigma = float(p["sigma"])
    x = float(p["x"])
    replicates = int(p["replicates"])
    opts = SolveOpts(gap_tol=float(p.get("gap_tol", 1e-8)))
    oracle_opts_gap = 1e-10

    design = _normalized_design(stream.substream(0), n, M)
    picker = stream.substream(1).open()
    k0 = min(int(p.get("f0_sparsity", 5)), M)
    support = picker.choose_indices(M, k0)

    if flavor == "lasso":
        R = float(p["R"])
        beta0 = np.zeros(M)
        signs = np.where(np.arange(k0) % 2 == 0, 1.0, -1.0)
        beta0[support] = signs * (float(p.get("f0_scale", 0.5)) * R / k0)
        f0 = design @ beta0
        rank = int(np.linalg.matrix_rank(design))
        t_rep = t_star_lasso(sigma, R, n, M, rank)
        _, oracle_val, oracle_gap, _, _ = minimize_quadratic_l1(
            design.T @ design, -2.0 * (design.T @ f0), R,
            gap_tol_abs=oracle_opts_gap * (1.0 + float(f0 @ f0)),
        )
        oracle_term = (oracle_val + float(f0 @ f0)) / n
    else:
        theta0 = np.zeros(M)
        theta0[support] = 1.0 / k0
        f0 = design @ theta0
        conv = p.get("radius_convention", "quarter-max")
        max_sq = float(np.max(np.sum(design**2, axis=0)) / n)
        R = 0.5 * math.sqrt(max_sq) if conv == "quarter-max" else math.sqrt(max_sq)
        t_rep = t_star_convex_agg(sigma, R, n, M)
        res = minimize_quadratic_simplex(
            design.T @ design, 2.0 * (design.T @ f0),
            gap_tol=oracle_opts_gap * (1.0 + float(f0 @ f0)),
        )
        oracle_term = (res.objective + float(f0 @ f0)) / n
        oracle_gap = res.gap

    tail = 4.0 * sigma * sigma * x / n

    def one(k: int) -> dict:
        xi = stream.substream(2).substream(k).open().gaussians(n)
        y = f0 + sigma * xi
        if flavor == "lasso":
            result = lasso_constrained(
                RegressionProblem(design=design, response=y, noise_sd=sigma, radius=R),
                opts,
            )
        else:
            result = convex_aggregate(
                RegressionProblem(design=design, response=y, noise_sd=sigma), opts
            )
        fit = design @ result.weights
        excess = float(np.sum((fit - f0) ** 2)) / n
        bound = oracle_term + 2.0 * t_rep.value + tail + (oracle_gap + result.certified_gap) / n
        return {
            "replicate": k,
            "excess": excess,
            "oracle_term": oracle_term,
            "t_star_sq": t_rep.value,
            "t_star_branch": t_rep.branch,
            "bound": bound,
            "violation": bool(excess > bound),
            "converged": bool(result.converged),
        }

    rows = _map_indexed(one, replicates, threads)
    violations = sum(r["violation"] for r in rows)
    failures = sum(not r["converged"] for r in rows)
    rate = violations / replicates
    target = math.exp(-x)
    tol = target + 3.0 * _binomial_stderr(target, replicates)
    passed = rate <= tol and failures <= 0.01 * replicates
    kind = "lasso-oracle" if flavor == "lasso" else "agg-oracle"
    summary = {
        "violation_rate": rate,
        "coverage_target": target,
        "coverage_tolerance": tol,
        "solver_failures": failures,
        "replicates": replicates,
    }
    return RunResult(kind, rows, FIELDNAMES[kind], passed, summary)


def run_oracle_coverage(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    flavor = "lasso" if cfg.kind == "lasso-oracle" else "agg"
    return _oracle_common(cfg, flavor, threads)


def run_density_oracle(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.parameters
    stream = SeededStream(cfg.seed)
    n = int(p["n"])
    replicates = int(p["replicates"])
    x = float(p["x"])
    c = float(p.get("c", 1.0))
    bins = int(p.get("bins", 2))
    weights = np.array(
        _as_grid(p.get("mix_weights", [1.0 / bins] * bins)), dtype=np.float64
    )
    M = bins
    b_inf = float(bins)  # histogram heights
    G = GramMatrix(sigma=b_inf * np.eye(bins))
    R = math.sqrt(b_inf) / 2.0  # quarter-max convention on int p_j^2 = bins

    arg = math.e * M * math.sqrt(b_inf) / (R * math.sqrt(n))
    width_term = (
        R * math.sqrt(b_inf) * math.sqrt(math.log(arg) / n) if arg > 1.0 else 0.0
    )
    bound = c * max(b_inf * M / n, width_term) + 88.0 * b_inf * x / (3.0 * n)

    oracle_res = minimize_quadratic_simplex(
        G.sigma, 2.0 * (G.sigma @ weights), gap_tol=1e-12 * b_inf
    )
    oracle_min = oracle_res.objective + float(weights @ G.sigma @ weights)
    slack = oracle_res.gap

    def one(k: int) -> dict:
        drawer = stream.substream(2).substream(k).open()
        bins_drawn = drawer.categorical(weights, n)
        evals = np.zeros((n, bins))
        evals[np.arange(n), bins_drawn] = b_inf
        result = density_erm(DensityProblem(gram=G, evals=evals, b_inf=b_inf))
        diff = result.weights - weights
        l2_excess = float(diff @ G.sigma @ diff)
        excess = l2_excess - oracle_min
        return {
            "replicate": k,
            "theta_hat_1": float(result.weights[0]),
            "excess": excess,
            "closed_form_excess": l2_excess,
            "bound": bound + slack + result.certified_gap,
            "violation": bool(excess > bound + slack + result.certified_gap),
            "converged": bool(result.converged),
        }

    rows = _map_indexed(one, replicates, threads)
    violations = sum(r["violation"] for r in rows)
    failures = sum(not r["converged"] for r in rows)
    rate = violations / replicates
    target = math.exp(-x)
    tol = target + 3.0 * _binomial_stderr(target, replicates)
    passed = rate <= tol and failures <= 0.01 * replicates
    summary = {
        "violation_rate": rate,
        "coverage_target": target,
        "coverage_tolerance": tol,
        "bound_constant_c": c,
        "solver_failures": failures,
        "mean_excess": float(np.mean([r["excess"] for r in rows])),
    }
    return RunResult("density-oracle", rows, FIELDNAMES["density-oracle"], passed, summary)


def run_maurey_check(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.parameters
    stream = SeededStream(cfg.seed)
    m = int(p["m"])
    trials = int(p["trials"])
    instances = int(p.get("instances", 1))
    M = int(p.get("M", 8))

    def one(i: int) -> dict:
        inst = stream.substream(i)
        drawer = inst.open()
        raw = drawer.gaussians(M * M).reshape(M, M)
        sigma = raw.T @ raw / M
        sigma /= np.max(np.diag(sigma))
        gm = GramMatrix(sigma=sigma)
        expo = -np.log(drawer.uniforms_open(M))
        theta_bar = SimplexWeight(expo / expo.sum())
        best, cert = sparsify_certified(theta_bar, gm, m, trials, inst.substream(1_000_000))
        w = best.weight().theta
        best_q = float(w @ sigma @ w)
        identity = expected_q_of_sample(theta_bar, gm, m)
        bound = cert.q_bar + cert.r_squared_over_m + 3.0 * cert.q_hat_stderr
        return {
            "instance": i,
            "m": m,
            "trials": trials,
            "q_bar": cert.q_bar,
            "r2_over_m": cert.r_squared_over_m,
            "q_hat_mean": cert.q_hat_mean,
            "q_hat_stderr": cert.q_hat_stderr,
            "best_q": best_q,
            "bound": bound,
            "violation": bool(cert.q_hat_mean > bound),
            "identity_expected": identity,
            "identity_ok": bool(
                abs(cert.q_hat_mean - identity) <= 3.0 * cert.q_hat_stderr
            ),
        }

    rows = _map_indexed(one, instances, threads)
    passed = all(not r["violation"] for r in rows)
    summary = {
        "instances": instances,
        "identity_failures": sum(not r["identity_ok"] for r in rows),
    }
    return RunResult("maurey-check", rows, FIELDNAMES["maurey-check"], passed, summary)


def run_persistence(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.parameters
    stream = SeededStream(cfg.seed)
    M = int(p["M"])
    R = float(p["R"])
    sigma = float(p["sigma"])
    replicates = int(p["replicates"])
    n_grid = [int(v) for v in _as_grid(p["n_grid"])]
    gamma = float(p.get("gamma", 1.0))
    samples = int(p.get("samples", 500))

    if p.get("cov", "identity") == "toeplitz":
        rho = float(p.get("rho", 0.5))
        idx = np.arange(M)
        cov = rho ** np.abs(idx[:, None] - idx[None, :])
    else:
        cov = np.eye(M)
    gm = GramMatrix(sigma=cov)
    root = sqrt_psd(cov)

    picker = stream.substream(0).open()
    k0 = min(int(p.get("f0_sparsity", 3)), M)
    support = picker.choose_indices(M, k0)
    beta0 = np.zeros(M)
    beta0[support] = float(p.get("beta_scale", 0.9)) * R / k0

    beta_star, _, star_gap, _, _ = minimize_quadratic_l1(
        cov, -2.0 * (cov @ beta0), R, gap_tol_abs=1e-12 * max(1.0, R * R)
    )
    d0 = beta_star - beta0
    base_risk = float(d0 @ cov @ d0)

    fp_opts = FixedPointOpts(samples=samples)
    rates_by_n = {}
    for n in n_grid:
        entry = {"r_n_sq": math.nan, "s_n_sq": math.nan, "error": ""}
        try:
            r_rep = r_n_fixed_point(gm, R, gamma, n, opts=fp_opts, stream=stream.substream(1))
            entry["r_n_sq"] = r_rep.value
        except NoCrossing as exc:
            entry["error"] = f"r_n: {exc}"
        try:
            s_rep = s_n_fixed_point(
                gm, R, gamma, n, sigma, opts=fp_opts, stream=stream.substream(1)
            )
            entry["s_n_sq"] = s_rep.value
        except NoCrossing as exc:
            entry["error"] += f" s_n: {exc}"
        rates_by_n[n] = entry

    jobs = [(n, k) for n in n_grid for k in range(replicates)]

    def one(j: int) -> dict:
        n, k = jobs[j]
        drawer = stream.substream(2).substream(j).open()
        X = drawer.gaussians(n * M).reshape(n, M) @ root
        y = X @ beta0 + sigma * drawer.gaussians(n)
        result = persistence_erm(X, y, R)
        d = result.weights - beta0
        excess = float(d @ cov @ d) - base_risk
        entry = rates_by_n[n]
        rate_bound = (
            max(entry["r_n_sq"], entry["s_n_sq"])
            if not math.isnan(entry["r_n_sq"]) and not math.isnan(entry["s_n_sq"])
            else math.nan
        )
        ratio = excess / rate_bound if rate_bound and not math.isnan(rate_bound) else math.nan
        return {
            "n": n,
            "replicate": k,
            "excess": excess,
            "r_n_sq": entry["r_n_sq"],
            "s_n_sq": entry["s_n_sq"],
            "rate_bound": rate_bound,
            "ratio": ratio,
            "converged": bool(result.converged),
            "rate_error": entry["error"],
        }

    rows = _map_indexed(one, len(jobs), threads)
    passed = all(r["converged"] for r in rows)
    mean_by_n = {
        n: float(np.mean([r["excess"] for r in rows if r["n"] == n])) for n in n_grid
    }
    summary = {"mean_excess_by_n": mean_by_n, "oracle_gap": star_gap, "base_risk": base_risk}
    return RunResult("persistence-run", rows, FIELDNAMES["persistence-run"], passed, summary)


def run_rates_sweep(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.parameters
    formula = p["formula"]
    sigma = float(p.get("sigma", 1.0))
    R = float(p.get("R", 1.0))
    rows = []
    ok = True
    for n in [int(v) for v in _as_grid(p["n_grid"])]:
        for M in [int(v) for v in _as_grid(p["M_grid"])]:
            row = {"formula": formula, "n": n, "M": M, "value": math.nan,
                   "branch": "", "error": ""}
            try:
                if formula == "t-star-agg":
                    rep = t_star_convex_agg(sigma, R, n, M)
                elif formula == "t-star-lasso":
                    rep = t_star_lasso(sigma, R, n, M, min(n, M))
                elif formula == "t-star-kappa":
                    rep = t_star_kappa(sigma, R, n, M)
                else:
                    rep = phi_convex(M, n)
                row["value"] = rep.value
                row["branch"] = rep.branch
            except (InvalidRegime, InvalidInput) as exc:
                row["error"] = str(exc)
                ok = False
            rows.append(row)
    return RunResult("rates-sweep", rows, FIELDNAMES["rates-sweep"], ok, {"points": len(rows)})


_RUNNERS = {
    "width-sandwich": run_width_sandwich,
    "lasso-oracle": run_oracle_coverage,
    "agg-oracle": run_oracle_coverage,
    "density-oracle": run_density_oracle,
    "maurey-check": run_maurey_check,
    "persistence-run": run_persistence,
    "rates-sweep": run_rates_sweep,
}


def run_config(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """Validate and execute one experiment config."""
    validate_config(cfg)
    return _RUNNERS[cfg.kind](cfg, threads=threads)


# ---------------------------------------------------------------------------
# reports


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if value is None:
        return ""
    text = str(value)
    if "," in text or "\n" in text:
        text = text.replace(",", ";").replace("\n", " ")
    return text


def _json_ready(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return None if math.isnan(v) else v
    return value


def emit_report(rows: list, path, fmt: str = "csv", fieldnames: list | None = None) -> str:
    """Write rows as CSV (17 significant digits) or a JSON array.

    Row order is preserved exactly; callers order by replicate index. The
    text written is also returned, which keeps determinism easy to test.
    """
    if fieldnames is None:
        if not rows:
            raise InvalidInput("fieldnames are required for an empty row list")
        fieldnames = list(rows[0].keys())
    for i, row in enumerate(rows):
        if list(row.keys()) != list(fieldnames):
            raise InvalidInput(f"row {i} fields {list(row.keys())} != header {fieldnames}")
    if fmt == "csv":
        lines = [",".join(fieldnames)]
        for row in rows:
            lines.append(",".join(_format_cell(row[name]) for name in fieldnames))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = [
            {name: _json_ready(row[name]) for name in fieldnames} for row in rows
        ]
        text = json.dumps(payload, indent=2) + "\n"
    else:
        raise InvalidInput(f"unknown report format {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
