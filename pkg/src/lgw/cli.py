"""Command-line interface.

Every subcommand emits a single JSON object (to --out or stdout) that echoes
the full option set alongside the results, so a saved output file is a
complete reproducibility record.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .core import GramMatrix, SimplexWeight, gram, read_dictionary_csv
from .errors import LgwError
from .estimators import (
    DensityProblem,
    RegressionProblem,
    SolveOpts,
    convex_aggregate,
    density_erm,
    lasso_constrained,
)
from .experiments import emit_report, parse_config, run_config
from .maurey import sparsify_certified
from .rates import (
    FixedPointOpts,
    bounded_process_bound,
    phi_convex,
    r_n_fixed_point,
    r_star_bounded,
    rademacher_sup_bound,
    s_n_fixed_point,
    t_star_convex_agg,
    t_star_kappa,
    t_star_lasso,
    t_star_finite_dim,
)
from .rng import SeededStream
from .width import (
    WidthOpts,
    build_packing,
    estimate_width,
    lower_bound_rip,
    rip_constant,
    upper_bound_closed_form,
    upper_bound_scaled,
)


def _write_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, default=_default) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _load_matrix(path) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return arr


def _load_vector(path) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", dtype=np.float64)
    return np.atleast_1d(arr).ravel()


def _fp_report_payload(report) -> dict:
    return {
        "value": report.value,
        "branch": report.branch,
        "inputs": report.inputs,
        "residual": report.residual,
        "residual_stderr": report.residual_stderr,
        "iterations": report.iterations,
        "extras": report.extras,
    }


def _cmd_width(args) -> int:
    dictionary = read_dictionary_csv(args.dict_path)
    opts = WidthOpts(
        feas_tol=args.feas_tol,
        cg_gap_rel=args.gap_rel,
        threads=args.threads,
    )
    stream = SeededStream(args.seed)
    est = estimate_width(dictionary, args.radius, args.samples, stream, opts=opts)
    _write_json(
        {
            "command": "width",
            "dict": args.dict_path,
            "radius": args.radius,
            "samples": args.samples,
            "seed": args.seed,
            "options": opts.as_dict(),
            "mean": est.mean,
            "stderr": est.stderr,
            "n_samples": est.n_samples,
            "s": est.s,
            "mean_dual_gap": est.mean_dual_gap,
            "n_nonconverged": est.n_nonconverged,
        },
        args.out,
    )
    return 0


def _cmd_bounds(args) -> int:
    if args.scale is not None:
        upper = upper_bound_scaled(args.M, args.n, args.radius, args.scale)
    else:
        upper = upper_bound_closed_form(args.M, args.n, args.radius)
    payload = {
        "command": "bounds",
        "M": args.M,
        "n": args.n,
        "radius": args.radius,
        "scale": args.scale,
        "upper_bound": upper,
    }
    if args.kappa is not None:
        try:
            payload["lower_bound"] = lower_bound_rip(args.M, args.radius, args.kappa)
            payload["lower_regime_ok"] = True
        except LgwError as exc:
            payload["lower_bound"] = None
            payload["lower_regime_ok"] = False
            payload["lower_error"] = str(exc)
    _write_json(payload, args.out)
    return 0


def _cmd_rip(args) -> int:
    dictionary = read_dictionary_csv(args.dict_path)
    kappa, exact = rip_constant(
        dictionary, args.sparsity, args.budget, SeededStream(args.seed)
    )
    _write_json(
        {
            "command": "rip",
            "dict": args.dict_path,
            "sparsity": args.sparsity,
            "budget": args.budget,
            "seed": args.seed,
            "kappa": kappa,
            "exact": exact,
        },
        args.out,
    )
    return 0


def _cmd_packing(args) -> int:
    dictionary = read_dictionary_csv(args.dict_path)
    packing = build_packing(dictionary, args.m, SeededStream(args.seed))
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write(f"# m={packing.m} k={packing.size}\n")
        for row in packing.signed_vectors:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    sys.stdout.write(
        json.dumps({"command": "packing", "size": packing.size, "m": packing.m,
                    "out": args.out, "seed": args.seed}) + "\n"
    )
    return 0


def _cmd_maurey(args) -> int:
    dictionary = read_dictionary_csv(args.dict_path)
    theta_bar = SimplexWeight(_load_vector(args.theta))
    gm = gram(dictionary)
    best, cert = sparsify_certified(
        theta_bar, gm, args.m, args.trials, SeededStream(args.seed)
    )
    _write_json(
        {
            "command": "maurey",
            "dict": args.dict_path,
            "theta": args.theta,
            "m": args.m,
            "trials": args.trials,
            "seed": args.seed,
            "counts": best.counts.tolist(),
            "certificate": {
                "q_bar": cert.q_bar,
                "q_hat_mean": cert.q_hat_mean,
                "q_hat_stderr": cert.q_hat_stderr,
                "m": cert.m,
                "r_squared_over_m": cert.r_squared_over_m,
                "n_trials": cert.n_trials,
            },
        },
        args.out,
    )
    return 0


def _estimator_payload(command: str, args, result, extra: dict) -> dict:
    payload = {
        "command": command,
        "weights": result.weights.tolist(),
        "objective": result.objective,
        "certified_gap": result.certified_gap,
        "iterations": result.iterations,
        "converged": result.converged,
        "gap_tol": args.gap_tol,
    }
    payload.update(extra)
    return payload


def _cmd_lasso(args) -> int:
    prob = RegressionProblem(
        design=_load_matrix(args.design),
        response=_load_vector(args.response),
        radius=args.radius,
    )
    result = lasso_constrained(prob, SolveOpts(gap_tol=args.gap_tol))
    _write_json(
        _estimator_payload(
            "lasso", args, result,
            {"design": args.design, "response": args.response, "radius": args.radius},
        ),
        args.out,
    )
    return 0


def _cmd_cvx_agg(args) -> int:
    prob = RegressionProblem(
        design=_load_matrix(args.design), response=_load_vector(args.response)
    )
    result = convex_aggregate(prob, SolveOpts(gap_tol=args.gap_tol))
    _write_json(
        _estimator_payload(
            "cvx-agg", args, result,
            {"design": args.design, "response": args.response},
        ),
        args.out,
    )
    return 0


def _cmd_density(args) -> int:
    evals = _load_matrix(args.evals)
    b_inf = args.b_inf if args.b_inf is not None else float(np.max(np.abs(evals)))
    prob = DensityProblem(
        gram=GramMatrix(sigma=_load_matrix(args.gram)), evals=evals, b_inf=b_inf
    )
    result = density_erm(prob, SolveOpts(gap_tol=args.gap_tol))
    _write_json(
        _estimator_payload(
            "density", args, result,
            {"gram": args.gram, "evals": args.evals, "b_inf": b_inf},
        ),
        args.out,
    )
    return 0


def _cmd_rates(args) -> int:
    sub = args.rates_command
    if sub == "t-star-agg":
        payload = _fp_report_payload(t_star_convex_agg(args.sigma, args.R, args.n, args.M))
    elif sub == "t-star-lasso":
        payload = _fp_report_payload(
            t_star_lasso(args.sigma, args.R, args.n, args.M, args.rank)
        )
    elif sub == "t-star-kappa":
        payload = _fp_report_payload(t_star_kappa(args.sigma, args.R, args.n, args.M))
    elif sub == "phi-convex":
        payload = _fp_report_payload(phi_convex(args.M, args.n))
    elif sub == "r-star":
        payload = _fp_report_payload(
            r_star_bounded(args.b, args.L, args.R, args.M, args.n, args.C)
        )
    elif sub == "finite-dim":
        payload = {"value": t_star_finite_dim(args.p0_sup, args.d, args.n),
                   "inputs": {"p0_sup": args.p0_sup, "d": args.d, "n": args.n}}
    elif sub == "bounded":
        payload = {
            "value": bounded_process_bound(
                args.L, args.R, args.b, args.M, args.n, args.r, args.c
            ),
            "inputs": {"L": args.L, "R": args.R, "b": args.b, "M": args.M,
                       "n": args.n, "r": args.r, "c": args.c},
        }
    elif sub == "talagrand":
        payload = {
            "value": rademacher_sup_bound(args.rad, args.v, args.b_inf, args.x, args.n),
            "inputs": {"rad": args.rad, "v": args.v, "b_inf": args.b_inf,
                       "x": args.x, "n": args.n},
        }
    else:  # pragma: no cover
        raise SystemExit(f"unknown rates subcommand {sub}")
    payload["command"] = f"rates {sub}"
    _write_json(payload, args.out)
    return 0


def _cmd_persistence_rates(args) -> int:
    gm = GramMatrix(sigma=_load_matrix(args.gram))
    opts = FixedPointOpts(samples=args.samples)
    stream = SeededStream(args.seed)
    r_rep = r_n_fixed_point(gm, args.R, args.gamma, args.n, opts=opts, stream=stream)
    s_rep = s_n_fixed_point(
        gm, args.R, args.gamma, args.n, args.sigma, opts=opts, stream=stream
    )
    _write_json(
        {
            "command": "persistence-rates",
            "gram": args.gram,
            "R": args.R,
            "gamma": args.gamma,
            "n": args.n,
            "sigma": args.sigma,
            "seed": args.seed,
            "samples": args.samples,
            "r_n": _fp_report_payload(r_rep),
            "s_n": _fp_report_payload(s_rep),
        },
        args.out,
    )
    return 0


def _cmd_experiment(args) -> int:
    cfg = parse_config(args.config)
    result = run_config(cfg, threads=args.threads)
    out_path = cfg.output_path
    if out_path is not None and args.out_dir is not None:
        out_path = os.path.join(args.out_dir, out_path)
    if out_path is not None:
        fmt = "json" if out_path.endswith(".json") else "csv"
        emit_report(result.rows, out_path, fmt=fmt, fieldnames=result.fieldnames)
    sys.stdout.write(
        json.dumps(
            {"command": "experiment run", "kind": result.kind, "passed": result.passed,
             "rows": len(result.rows), "summary": result.summary, "output": out_path},
            indent=2, default=_default,
        )
        + "\n"
    )
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lgw",
        description="Localized Gaussian widths of M-point convex hulls: "
        "Monte Carlo estimation, closed-form bounds, sparsification, "
        "constrained ERM estimators, rate formulas, and experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("width", help="Monte Carlo localized width of a dictionary hull")
    p.add_argument("--dict", dest="dict_path", required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--feas-tol", type=float, default=1e-8)
    p.add_argument("--gap-rel", type=float, default=1e-6)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_width)

    p = sub.add_parser("bounds", help="closed-form width bounds")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("rip", help="one-sided restricted isometry constant")
    p.add_argument("--dict", dest="dict_path", required=True)
    p.add_argument("--sparsity", type=int, required=True)
    p.add_argument("--budget", type=int, default=100_000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_rip)

    p = sub.add_parser("packing", help="greedy signed packing of weight-m supports")
    p.add_argument("--dict", dest="dict_path", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_packing)

    p = sub.add_parser("maurey", help="certified sampling sparsification")
    p.add_argument("--dict", dest="dict_path", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_maurey)

    p = sub.add_parser("lasso", help="l1-constrained least squares")
    p.add_argument("--design", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--gap-tol", type=float, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_lasso)

    p = sub.add_parser("cvx-agg", help="least squares over the simplex")
    p.add_argument("--design", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--gap-tol", type=float, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_cvx_agg)

    p = sub.add_parser("density", help="density ERM over the simplex")
    p.add_argument("--gram", required=True)
    p.add_argument("--evals", required=True)
    p.add_argument("--b-inf", type=float, default=None)
    p.add_argument("--gap-tol", type=float, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_density)

    p = sub.add_parser("rates", help="closed-form rate formulas")
    rsub = p.add_subparsers(dest="rates_command", required=True)

    q = rsub.add_parser("t-star-agg")
    for name, typ in (("--sigma", float), ("--R", float), ("--n", int), ("--M", int)):
        q.add_argument(name, type=typ, required=True)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_rates)

    q = rsub.add_parser("t-star-lasso")
    for name, typ in (("--sigma", float), ("--R", float), ("--n", int), ("--M", int),
                      ("--rank", int)):
        q.add_argument(name, type=typ, required=True)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_rates)

    q = rsub.add_parser("t-star-kappa")
    for name, typ in (("--sigma", float), ("--R", float), ("--n", int), ("--M", int)):
        q.add_argument(name, type=typ, required=True)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_rates)

    q = rsub.add_parser("phi-convex")
    q.add_argument("--M", type=int, required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_rates)

    q = rsub.add_parser("r-star")
    for name, typ in (("--b", float), ("--L", float), ("--R", float), ("--M", int),
                      ("--n", int)):
        q.add_argument(name, type=typ, required=True)
    q.add_argument("--C", type=float, default=1.0)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_rates)

    q = rsub.add_parser("finite-dim")
    q.add_argument("--p0-sup", type=float, required=True)
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_rates)

    q = rsub.add_parser("bounded")
    for name, typ in (("--L", float), ("--R", float), ("--b", float), ("--M", int),
                      ("--n", int), ("--r", float)):
        q.add_argument(name, type=typ, required=True)
    q.add_argument("--c", type=float, default=1.0)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_rates)

    q = rsub.add_parser("talagrand")
    for name, typ in (("--rad", float), ("--v", float), ("--b-inf", float),
                      ("--x", float), ("--n", int)):
        q.add_argument(name, type=typ, required=True)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_rates)

    p = sub.add_parser("persistence-rates", help="both width fixed points by bisection")
    p.add_argument("--gram", required=True)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_persistence_rates)

    p = sub.add_parser("experiment", help="run a config-driven experiment")
    esub = p.add_subparsers(dest="experiment_command", required=True)
    q = esub.add_parser("run")
    q.add_argument("--config", required=True)
    q.add_argument("--threads", type=int, default=1)
    q.add_argument("--out-dir", default=None)
    q.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LgwError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
