"""Command-line front end: solve | weights | diagnose | experiment | concentration-test.

Exit codes: 0 success, 1 usage error, 2 runtime error.  All randomness flows
from one seed (flag > config file > WLASSO_SEED env var > 0); reruns with the
same inputs produce byte-identical outputs.  No subcommand mutates its inputs.
"""
from __future__ import annotations

import argparse
import os
import sys
import warnings
from typing import Optional

import numpy as np

from . import bernoulli as _bernoulli
from . import convolution as _convolution
from .config import (
    apply_overrides,
    experiment_config_from_mapping,
    format_experiment_config,
    parse_config_text,
)
from .concentration import tail_coverage_test
from .diagnostics import assumption_report
from .experiments import run_mse_vs_m, run_mse_vs_p, rows_to_csv
from .model import apply, make_sparse_signal, sample_poisson, trial_rng
from .solver import SolverConfig, oracle_least_squares, two_step, weighted_lasso


class _UsageError(Exception):
    pass


def _env_seed() -> int:
    raw = os.environ.get("WLASSO_SEED", "")
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise _UsageError(f"WLASSO_SEED must be an integer, got {raw!r}") from exc


def _resolve_seed(flag_seed: Optional[int]) -> int:
    return flag_seed if flag_seed is not None else _env_seed()


def _add_instance_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--model", choices=("convolution", "bernoulli"), default="convolution")
    sub.add_argument("--p", type=int, default=200)
    sub.add_argument("--s", type=int, default=5)
    sub.add_argument("--m", type=int, default=20, help="parents (convolution)")
    sub.add_argument("--n", type=int, default=5000, help="rows (bernoulli)")
    sub.add_argument("--q", type=float, default=0.5, help="Bernoulli rate")
    sub.add_argument("--l1", type=float, default=100.0, help="signal total mass")
    sub.add_argument("--noiseless", action="store_true")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--instance", help="read instance from a .npz file instead")


def _generate_instance(args):
    rng = trial_rng(_resolve_seed(args.seed))
    signal = make_sparse_signal(args.p, args.s, args.l1, rng)
    x_star = signal.dense()
    if args.model == "convolution":
        inst = _convolution.sample_parents(args.p, args.m, rng)
        intensity = apply(_convolution.sensing_operator(inst), x_star)
    else:
        inst = _bernoulli.sample_bernoulli_matrix(args.n, args.p, args.q, rng)
        intensity = inst.a @ x_star
    y = intensity if args.noiseless else sample_poisson(intensity, rng).counts.astype(float)
    return inst, y, x_star, signal.support


def _load_instance(path: str, q_flag: float):
    with np.load(path) as data:
        if "counts" in data:
            counts = np.asarray(data["counts"], dtype=np.int64)
            inst = _convolution.ConvolutionInstance(
                p=counts.size, m=int(counts.sum()), counts=counts
            )
        elif "a" in data:
            a = np.asarray(data["a"], dtype=np.float64)
            q = float(data["q"]) if "q" in data else q_flag
            inst = _bernoulli.BernoulliInstance(
                n=a.shape[0], p=a.shape[1], q=q, a=a, column_sums=a.sum(axis=0)
            )
        else:
            raise _UsageError("instance file needs either 'counts' or 'a'")
        if "y" not in data:
            raise _UsageError("instance file needs 'y'")
        y = np.asarray(data["y"], dtype=np.float64)
        x_star = np.asarray(data["x_star"], dtype=np.float64) if "x_star" in data else None
    support = None if x_star is None else np.flatnonzero(x_star)
    return inst, y, x_star, support


def _instance_from_args(args):
    if args.instance:
        return _load_instance(args.instance, args.q)
    return _generate_instance(args)


def _surrogate(inst, y):
    if isinstance(inst, _convolution.ConvolutionInstance):
        return _convolution.surrogate_convolution(inst, y)
    return _bernoulli.surrogate_bernoulli(inst, y)


def _weights_of_kind(inst, pair, y, x_star, kind: str, theta: Optional[float], c: float):
    if kind == "oracle":
        if x_star is None:
            raise _UsageError("oracle weights need x_star")
        return _convolution.oracle_weights(pair, x_star)
    if isinstance(inst, _convolution.ConvolutionInstance):
        fn = _convolution.constant_weights if kind == "constant" else _convolution.nonconstant_weights
        return fn(inst, y, theta=theta)
    fn = _bernoulli.constant_weights if kind == "constant" else _bernoulli.nonconstant_weights
    return fn(inst, y, c=c, theta=theta)


def _emit(text: str, out_path: Optional[str]) -> None:
    if out_path:
        with open(out_path, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _cmd_solve(args) -> int:
    inst, y, x_star, support = _instance_from_args(args)
    pair = _surrogate(inst, y)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        config = SolverConfig(gamma=args.gamma)
    lines = []
    if support is not None and support.size:
        x_ls = oracle_least_squares(pair, support)
        err = x_ls - x_star
        denom = max(float(np.abs(x_star).sum()), 1.0)
        lines.append(
            f"estimator=ls_oracle weight_kind=none nmse={_fmt(float(err @ err) / denom)}"
        )
    for kind in args.weights.split(","):
        kind = kind.strip()
        w = _weights_of_kind(inst, pair, y, x_star, kind, args.theta, args.c)
        result = weighted_lasso(pair, w, config)
        _, x_two = two_step(result.x_hat, pair, config.support_eps)
        est = "lasso_two_step" if kind == "constant" else "wlasso_two_step"
        parts = [
            f"estimator={est}",
            f"weight_kind={kind}",
            f"kkt={_fmt(result.kkt_residual)}",
            f"iterations={result.iterations}",
            f"converged={'true' if result.converged else 'false'}",
        ]
        if x_star is not None:
            denom = max(float(np.abs(x_star).sum()), 1.0)
            err = x_two - x_star
            parts.insert(2, f"nmse={_fmt(float(err @ err) / denom)}")
        lines.append(" ".join(parts))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_weights(args) -> int:
    inst, y, x_star, _ = _instance_from_args(args)
    pair = _surrogate(inst, y)
    w = _weights_of_kind(inst, pair, y, x_star, args.kind, args.theta, args.c)
    lines = ["index,weight"]
    lines.extend(f"{k},{_fmt(v)}" for k, v in enumerate(w.values))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_diagnose(args) -> int:
    inst, y, x_star, _ = _instance_from_args(args)
    if x_star is None:
        raise _UsageError("diagnose needs x_star (generated instances have it)")
    pair = _surrogate(inst, y)
    w = _weights_of_kind(inst, pair, y, x_star, args.kind, args.theta, args.c)
    if args.theta is not None:
        theta = args.theta
    elif isinstance(inst, _convolution.ConvolutionInstance):
        theta = _convolution.default_theta(inst.p)
    else:
        theta = _bernoulli.default_theta(inst.p)
    report = assumption_report(
        pair, x_star, w, gamma=args.gamma, theta_used=theta, rip_s=args.rip_s
    )
    _emit(report.to_text(), args.out)
    return 0


def _cmd_experiment(args) -> int:
    mapping: dict[str, str] = {}
    if args.config:
        with open(args.config) as handle:
            mapping = parse_config_text(handle.read())
    mapping = apply_overrides(mapping, args.set or [])
    if args.seed is not None:
        mapping["master_seed"] = str(args.seed)
    elif "master_seed" not in mapping:
        mapping["master_seed"] = str(_env_seed())
    try:
        cfg = experiment_config_from_mapping(mapping)
    except (ValueError, TypeError) as exc:
        raise _UsageError(str(exc)) from exc
    if args.dump_config:
        with open(args.dump_config, "w") as handle:
            handle.write(format_experiment_config(cfg))
    if cfg.m_grid and cfg.p_grid:
        raise _UsageError("config sets both m_grid and p_grid; pick one sweep")
    if cfg.m_grid:
        rows = run_mse_vs_m(cfg, threads=args.threads)
    elif cfg.p_grid:
        rows = run_mse_vs_p(cfg, threads=args.threads)
    else:
        raise _UsageError("config needs m_grid or p_grid")
    _emit(rows_to_csv(rows), args.out)
    return 0


def _cmd_concentration_test(args) -> int:
    rng = trial_rng(_resolve_seed(args.seed))
    r = np.ones(args.n)
    intensity = np.full(args.n, args.intensity)
    report = tail_coverage_test(r, intensity, args.theta, args.trials, rng)
    lines = [
        f"n_trials = {report.n_trials}",
        f"theta = {_fmt(report.theta)}",
        f"bernstein_bound = {_fmt(report.bernstein)}",
        f"failure_rate_bernstein = {_fmt(report.failure_rate_bernstein)}",
        f"failure_rate_empirical = {_fmt(report.failure_rate_empirical)}",
        f"failure_rate_envelope = {_fmt(report.failure_rate_envelope)}",
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wlasso",
        description="Weighted LASSO estimators for sparse Poisson inverse problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one instance and report errors")
    _add_instance_args(p_solve)
    p_solve.add_argument("--gamma", type=float, default=4.0)
    p_solve.add_argument("--weights", default="nonconstant", help="comma list of kinds")
    p_solve.add_argument("--theta", type=float, default=None)
    p_solve.add_argument("--c", type=float, default=1.0)
    p_solve.add_argument("--out", default=None)
    p_solve.set_defaults(func=_cmd_solve)

    p_weights = sub.add_parser("weights", help="emit a weight vector as CSV")
    _add_instance_args(p_weights)
    p_weights.add_argument("--kind", choices=("constant", "nonconstant", "oracle"), default="nonconstant")
    p_weights.add_argument("--theta", type=float, default=None)
    p_weights.add_argument("--c", type=float, default=1.0)
    p_weights.add_argument("--out", default=None)
    p_weights.set_defaults(func=_cmd_weights)

    p_diag = sub.add_parser("diagnose", help="check assumptions on one instance")
    _add_instance_args(p_diag)
    p_diag.add_argument("--kind", choices=("constant", "nonconstant", "oracle"), default="nonconstant")
    p_diag.add_argument("--gamma", type=float, default=4.0)
    p_diag.add_argument("--theta", type=float, default=None)
    p_diag.add_argument("--c", type=float, default=1.0)
    p_diag.add_argument("--rip-s", type=int, default=None)
    p_diag.add_argument("--out", default=None)
    p_diag.set_defaults(func=_cmd_diagnose)

    p_exp = sub.add_parser("experiment", help="run a Monte Carlo sweep to CSV")
    p_exp.add_argument("--config", help="flat key = value config file")
    p_exp.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_exp.add_argument("--seed", type=int, default=None)
    p_exp.add_argument("--threads", type=int, default=0, help="0 = all cores")
    p_exp.add_argument("--out", default=None)
    p_exp.add_argument("--dump-config", default=None)
    p_exp.set_defaults(func=_cmd_experiment)

    p_conc = sub.add_parser("concentration-test", help="Monte Carlo tail coverage")
    p_conc.add_argument("--n", type=int, default=50)
    p_conc.add_argument("--intensity", type=float, default=2.0)
    p_conc.add_argument("--theta", type=float, default=5.0)
    p_conc.add_argument("--trials", type=int, default=100_000)
    p_conc.add_argument("--seed", type=int, default=None)
    p_conc.add_argument("--out", default=None)
    p_conc.set_defaults(func=_cmd_concentration_test)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary: report and set exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
