"""Command-line interface: ``sync-landscape <subcommand> [flags]``.

Exit codes: 0 success or benign verdict, 2 usage error or malformed input,
3 certificate verified but landscape not certified benign, 4 certificate
fails its KKT checks. The resolved configuration is echoed to stderr as JSON.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .blockmat import BlockSymMatrix, SymmetryError
from .certificate import CertificateError, build_certificate, landscape_verdict, verify_certificate
from .criticality import riemannian_gradient, second_order_check
from .instances import (
    SyncInstance,
    critical_twist,
    gen_kuramoto_graph,
    gen_od_gaussian,
    gen_procrustes,
    gen_z2,
    twisted_certificate,
    twisted_state,
)
from .operators import StiefelTuple, monte_carlo_cov, p_cov_exact, sigma_tau
from .solver import SolveConfig, estimate_minimizer, random_stiefel, recovery_error, solve
from .thresholds import (
    GridSpec,
    ThresholdDomainError,
    alpha_g,
    alpha_g_tau,
    alpha_m,
    alpha_simplified,
    counterexample_threshold,
    validate_pd,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_BENIGN = 3
EXIT_KKT = 4

TABLE_HEADER_PREFIX = "d"
FIGURE_HEADER = ["p", "alpha_g", "alpha_m", "alpha_g_tau1"]
EXPERIMENT_HEADER = ["trial", "seed", "sigma", "cond", "benign", "recovery_error", "iters"]


class UsageError(Exception):
    pass


def thread_count() -> int:
    raw = os.environ.get("SYNC_LANDSCAPE_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def fmt(x) -> str:
    """Shortest round-trip decimal; booleans and missing values spelled out."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def emit(payload: dict, output: str, out) -> None:
    if output == "json":
        json.dump(_jsonable(payload), out, indent=2, sort_keys=False)
        out.write("\n")
    elif output == "csv":
        writer = csv.writer(out, lineterminator="\n")
        flat = {k: v for k, v in payload.items() if not isinstance(v, (dict, list))}
        writer.writerow(flat.keys())
        writer.writerow(fmt(v) for v in flat.values())
    else:
        width = max(len(k) for k in payload) if payload else 0
        for key, value in payload.items():
            if isinstance(value, dict):
                out.write(f"{key}:\n")
                for k2, v2 in value.items():
                    out.write(f"  {k2:<{width}}  {fmt(v2)}\n")
            else:
                out.write(f"{key:<{width}}  {fmt(value)}\n")


def emit_rows(header: list[str], rows: list[list], out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(fmt(v) for v in row)


def _grid(args) -> GridSpec:
    return GridSpec(tau_points=args.tau_points, uvw_points=args.uvw_points, refine_iters=args.refine_iters)


def cmd_alpha(args, out) -> int:
    try:
        validate_pd(args.p, args.d)
    except ThresholdDomainError as exc:
        raise UsageError(str(exc)) from exc
    res = alpha_g(args.p, args.d, _grid(args))
    payload = {
        "p": args.p,
        "d": args.d,
        "alpha_g": res.alpha,
        "tau_star": res.tau_star,
        "case_id": res.case_id,
        "alpha_m": None,
        "alpha_simplified": None,
        "alpha_g_tau1": alpha_g_tau(args.p, args.d, 1.0).alpha,
        "counterexample": counterexample_threshold(args.p, args.d),
    }
    if args.d >= 2 and args.p >= args.d + 2:
        payload["alpha_m"] = alpha_m(args.p, args.d).alpha
    simplified = alpha_simplified(args.p, args.d)
    if simplified is not None:
        payload["alpha_simplified"] = simplified.alpha
    if not res.feasible:
        payload["note"] = "alpha_g < 1: no condition number qualifies, the guarantee is vacuous"
    emit(payload, args.output, out)
    return EXIT_OK


def table_cell(p: int, d: int, grid: GridSpec) -> str:
    try:
        validate_pd(p, d)
    except ThresholdDomainError:
        return "x"
    res = alpha_g(p, d, grid)
    if not res.feasible:
        return "<1"
    return str(int(round(res.alpha))) if d == 1 else f"{res.alpha:.4f}"


def cmd_table(args, out) -> int:
    if not (2 <= args.p_max <= 20 and 1 <= args.d_max <= 20):
        raise UsageError("table bounds must satisfy 2 <= p_max <= 20 and 1 <= d_max <= 20")
    grid = _grid(args)
    ps = list(range(2, args.p_max + 1))
    rows = [[d] + [table_cell(p, d, grid) for p in ps] for d in range(1, args.d_max + 1)]
    emit_rows([TABLE_HEADER_PREFIX] + [f"p={p}" for p in ps], rows, out)
    return EXIT_OK


def cmd_figure_data(args, out) -> int:
    d = args.d
    if d < 2:
        raise UsageError("figure data needs d >= 2 (the relaxed bound is undefined for d = 1)")
    lo = max(args.p_min if args.p_min is not None else d + 2, d + 2)
    if args.p_max < lo:
        raise UsageError(f"empty p range: need p_max >= {lo}")
    grid = _grid(args)
    rows = [
        [p, alpha_g(p, d, grid).alpha, alpha_m(p, d).alpha, alpha_g_tau(p, d, 1.0).alpha]
        for p in range(lo, args.p_max + 1)
    ]
    emit_rows(FIGURE_HEADER, rows, out)
    return EXIT_OK


def load_instance(path: str) -> SyncInstance:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return SyncInstance.from_dict(raw)
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError, SymmetryError) as exc:
        raise UsageError(f"cannot read instance {path!r}: {exc}") from exc


def save_instance(inst: SyncInstance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(inst.to_dict(), fh)
        fh.write("\n")


def cmd_verify(args, out) -> int:
    inst = load_instance(args.instance)
    if args.estimate:
        Z = estimate_minimizer(inst.A, seed=args.seed)
    elif inst.Z is None:
        raise UsageError("instance has no candidate Z; pass --estimate to compute one")
    else:
        Z = inst.Z
    p = args.p if args.p is not None else inst.d + 2
    L = build_certificate(inst.A, Z)
    report = verify_certificate(L, inst.d, args.tol)
    payload = {"instance": args.instance, "p": p, "certificate": report.to_dict()}
    code = EXIT_KKT
    if report.kkt_ok:
        try:
            verdict = landscape_verdict(L, p, inst.d, args.tol, _grid(args))
            payload["verdict"] = verdict.to_dict()
            code = EXIT_OK if verdict.benign else EXIT_NOT_BENIGN
        except CertificateError as exc:
            payload["verdict"] = {"error": str(exc)}
            code = EXIT_NOT_BENIGN
        except ThresholdDomainError as exc:
            raise UsageError(str(exc)) from exc
    emit(payload, args.output, out)
    return code


def _solve_config(args) -> SolveConfig:
    rule = "fixed" if args.step is not None and args.fixed_step else "backtracking"
    return SolveConfig(
        max_iter=args.max_iter,
        grad_tol=args.grad_tol,
        step_rule=rule,
        step=args.step,
        seed=args.seed,
        record_trace=args.trace_csv is not None,
    )


def cmd_solve(args, out) -> int:
    inst = load_instance(args.instance)
    p = args.p if args.p is not None else inst.d + 2
    if p < inst.d:
        raise UsageError(f"p must be >= d = {inst.d}")
    cfg = _solve_config(args)
    res = solve(inst.A, random_stiefel(inst.n, inst.d, p, args.seed), cfg)
    payload = {"p": p, "seed": args.seed, **res.to_dict()}
    if inst.Z is not None:
        payload["recovery_error"] = recovery_error(res.S_final, inst.Z)
    if args.trace_csv:
        with open(args.trace_csv, "w", encoding="utf-8") as fh:
            emit_rows(["iter", "objective", "grad_norm"], [[k, o, g] for k, (o, g) in enumerate(res.trace)], fh)
    emit(payload, args.output, out)
    return EXIT_OK


def cmd_counterexample(args, out) -> int:
    p, d = args.p, args.d
    if p is None or d < 1 or p < d + 1:
        raise UsageError("counterexample needs --p and --d with d >= 1 and p >= d + 1")
    t = args.t_scale * critical_twist(p, d)
    S = twisted_state(p, d)
    L = twisted_certificate(p, d, t)
    report = verify_certificate(L, d)
    crit = second_order_check(L, S, args.tol)
    # A = -L has certificate L at the all-identity candidate, so S is a critical point of A
    A = BlockSymMatrix(L.n, L.d, -L.data)
    start = solve(A, S, SolveConfig(max_iter=args.max_iter, grad_tol=args.grad_tol))
    payload = {
        "p": p,
        "d": d,
        "n": S.n,
        "t": t,
        "t_star": critical_twist(p, d),
        "cond": report.cond,
        "threshold_2p_over_d_plus_1": counterexample_threshold(p, d),
        "criticality": crit.to_dict(),
        "start_grad_residual": float(np.linalg.norm(riemannian_gradient(A, S).blocks)),
        "solver_iters": start.iters,
        "fixed_point": start.iters == 0,
    }
    emit(payload, args.output, out)
    return EXIT_OK


def cmd_montecarlo(args, out) -> int:
    S = random_stiefel(args.n, args.d, args.p, args.seed)
    which = args.which
    exact = sigma_tau(S, args.tau) if which == "L-cov" else p_cov_exact(S, args.tau)
    est = monte_carlo_cov(S, args.tau, which, args.trials, args.seed + 1)
    rel = float(np.linalg.norm(est.data - exact.data) / np.linalg.norm(exact.data))
    payload = {
        "n": args.n,
        "d": args.d,
        "p": args.p,
        "tau": args.tau,
        "which": which,
        "trials": args.trials,
        "seed": args.seed,
        "relative_error": rel,
    }
    emit(payload, args.output, out)
    return EXIT_OK


def _make_instance(args, seed: int) -> SyncInstance:
    if args.model == "od-gaussian":
        return gen_od_gaussian(args.n, args.d, args.sigma, seed)
    if args.model == "z2":
        return gen_z2(args.n, args.z2_model, seed, sigma=args.sigma, p_edge=args.p_edge, flip_prob=args.flip_prob)
    if args.model == "kuramoto":
        return gen_kuramoto_graph(args.n, args.p_edge, args.signed, seed)
    if args.model == "procrustes":
        return gen_procrustes(args.n, args.d, args.m, args.sigma, seed)
    raise UsageError(f"unknown model {args.model!r}")


def run_trial(args, trial: int) -> list:
    seed = args.seed + trial
    inst = _make_instance(args, seed)
    d = inst.d
    p = args.p if args.p is not None else d + 2
    Z = inst.Z if args.model == "kuramoto" or args.sigma == 0 else estimate_minimizer(inst.A, seed=seed)
    L = build_certificate(inst.A, Z)
    report = verify_certificate(L, d)
    benign = None
    if report.kkt_ok and report.unique_ok:
        benign = landscape_verdict(L, p, d).benign
    init_seed = 10_000 + seed
    res = solve(inst.A, random_stiefel(inst.n, d, p, init_seed), SolveConfig(max_iter=args.max_iter, grad_tol=args.grad_tol))
    return [trial, seed, args.sigma, report.cond, benign, recovery_error(res.S_final, Z), res.iters]


def cmd_experiment(args, out) -> int:
    if args.model == "counterexample":
        return cmd_counterexample(args, out)
    workers = thread_count()
    trials = range(args.trials)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda k: run_trial(args, k), trials))
    else:
        rows = [run_trial(args, k) for k in trials]
    rows.sort(key=lambda r: r[0])
    success = sum(1 for r in rows if r[5] <= args.success_tol) / max(len(rows), 1)
    if args.output == "json":
        emit({"rows": [dict(zip(EXPERIMENT_HEADER, r)) for r in rows], "success_rate": success}, "json", out)
    else:
        emit_rows(EXPERIMENT_HEADER, rows, out)
    sys.stderr.write(f"success_rate={fmt(success)}\n")
    return EXIT_OK


def cmd_generate(args, out) -> int:
    if args.model == "twisted":
        p, d = args.p, args.d
        if p is None or d < 1 or p < d + 1:
            raise UsageError("twisted instances need --p and --d with d >= 1 and p >= d + 1")
        L = twisted_certificate(p, d, args.t_scale * critical_twist(p, d))
        A = BlockSymMatrix(L.n, L.d, -L.data)
        inst = SyncInstance(L.n, d, A, StiefelTuple.identity(L.n, d),
                            {"generator": "twisted", "seed": None, "params": {"p": p, "t_scale": args.t_scale}})
    else:
        inst = _make_instance(args, args.seed)
    save_instance(inst, args.out)
    emit({"written": args.out, "n": inst.n, "d": inst.d, "generator": inst.meta.get("generator")}, args.output, out)
    return EXIT_OK


def _add_output(p: argparse.ArgumentParser, default: str = "pretty") -> None:
    p.add_argument("--output", choices=["json", "csv", "pretty"], default=default)


def _add_grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau-points", type=int, default=2049)
    p.add_argument("--uvw-points", type=int, default=256)
    p.add_argument("--refine-iters", type=int, default=60)


def _add_model(p: argparse.ArgumentParser, models: list[str]) -> None:
    p.add_argument("--model", choices=models, default=models[0])
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--z2-model", choices=["gaussian", "erdos_renyi"], default="gaussian")
    p.add_argument("--p-edge", type=float, default=0.9)
    p.add_argument("--flip-prob", type=float, default=0.0)
    p.add_argument("--signed", action="store_true")
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--t-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sync-landscape", description="Landscape thresholds for orthogonal synchronization.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("alpha", help="threshold alpha_g(p, d) and related bounds")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    _add_grid(p)
    _add_output(p)
    p.set_defaults(func=cmd_alpha)

    p = sub.add_parser("table", help="CSV table of alpha_g over p and d")
    p.add_argument("--p-max", type=int, default=11)
    p.add_argument("--d-max", type=int, default=5)
    _add_grid(p)
    _add_output(p, "csv")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("figure-data", help="CSV of alpha_g, alpha_m and alpha_g(tau=1) against p")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p-min", type=int, default=None)
    p.add_argument("--p-max", type=int, default=40)
    _add_grid(p)
    _add_output(p, "csv")
    p.set_defaults(func=cmd_figure_data)

    p = sub.add_parser("verify", help="certificate and landscape verdict for an instance file")
    p.add_argument("instance")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--estimate", action="store_true", help="use an estimated minimizer instead of the stored candidate")
    p.add_argument("--seed", type=int, default=0)
    _add_grid(p)
    _add_output(p, "json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("solve", help="Riemannian gradient descent from a random start")
    p.add_argument("instance")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--grad-tol", type=float, default=1e-9)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--fixed-step", action="store_true")
    p.add_argument("--trace-csv", default=None)
    _add_output(p, "json")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("counterexample", help="twisted-state spurious critical point")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--t-scale", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--grad-tol", type=float, default=1e-10)
    _add_output(p, "json")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("montecarlo", help="Monte Carlo check of the covariance formula")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--tau", type=float, default=0.3)
    p.add_argument("--which", choices=["L-cov", "P-cov"], default="L-cov")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    _add_output(p, "json")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("experiment", help="batch landscape experiment")
    _add_model(p, ["od-gaussian", "z2", "kuramoto", "procrustes", "counterexample"])
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=20000)
    p.add_argument("--grad-tol", type=float, default=1e-9)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--success-tol", type=float, default=1e-4)
    _add_output(p, "csv")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("generate", help="write an instance file")
    _add_model(p, ["od-gaussian", "z2", "kuramoto", "procrustes", "twisted"])
    p.add_argument("--out", required=True)
    _add_output(p)
    p.set_defaults(func=cmd_generate)
    return parser


def _echo_config(args) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    sys.stderr.write("config: " + json.dumps(_jsonable(config), sort_keys=True) + "\n")


def main(argv: list[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    _echo_config(args)
    try:
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


def run(argv: list[str]) -> tuple[int, str]:
    """Run the CLI in-process and capture stdout; used by tests and demos."""
    buf = io.StringIO()
    try:
        code = main(argv, buf)
    except SystemExit as exc:
        code = int(exc.code or 0)
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
