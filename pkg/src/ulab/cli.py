"""Command-line front end: binds flag grammars to experiments and writes
CSV/JSON artifacts atomically.

Grammars: designs ``gaussian | student:DF | iso3pt:ATOM:P | counterexample:L``,
noise ``zero | gaussian:SIGMA | student:DF:SIGMA``, priors
``gaussian:SD | pointmass:V | sparse2pt:V:FRAC``, grids ``START:STOP:COUNT``
(linear spacing).  ``ULAB_SEED`` overrides the seed default when ``--seed``
is not given.  Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .asymptotics import (
    signal_from_prior,
    solve_lasso_fpe,
    solve_ridge_fpe,
    solve_robust_fpe,
)
from .experiments import (
    ExperimentConfig,
    run_cost_compare,
    run_coverage,
    run_non_universality,
    run_qq,
    run_residual_check,
    run_risk_curve,
    run_sparsity_check,
)
from .losses import RobustLoss, absolute, huber, square_half
from .models import build_instance, parse_design, parse_noise, parse_prior, sample_noise
from .results import atomic_write_text
from .solvers import solve_lasso, solve_lse, solve_ridge, solve_robust, sparsity
from .streams import Stream

ROBUST_NOISE_SAMPLE = 100_000


def parse_loss(spec: str) -> RobustLoss:
    """Parse ``absolute`` | ``huber:ETA`` | ``square``."""
    parts = spec.split(":")
    if parts[0] == "absolute" and len(parts) == 1:
        return absolute()
    if parts[0] == "huber" and len(parts) == 2:
        return huber(float(parts[1]))
    if parts[0] == "square" and len(parts) == 1:
        return square_half()
    raise ValueError(f"malformed loss spec {spec!r}")


def parse_grid(spec: str) -> tuple[float, ...]:
    """``START:STOP:COUNT`` -> linearly spaced grid; a bare float is a 1-grid."""
    parts = spec.split(":")
    if len(parts) == 1:
        return (float(parts[0]),)
    if len(parts) == 3:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("grid count must be >= 1")
        return tuple(np.linspace(start, stop, count).tolist())
    raise ValueError(f"malformed grid spec {spec!r} (want START:STOP:COUNT)")


def _default_seed() -> int:
    env = os.environ.get("ULAB_SEED")
    return int(env) if env else 0


def _default_threads() -> int:
    return os.cpu_count() or 1


def _add_io(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output file path")
    p.add_argument("--seed", type=int, default=_default_seed(),
                   help="master seed (env ULAB_SEED overrides this default)")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="replication worker pool size")


def _add_model(p: argparse.ArgumentParser, multi_design: bool) -> None:
    if multi_design:
        p.add_argument("--design", action="append", required=True,
                       metavar="KIND", help="design kind (repeatable)")
    else:
        p.add_argument("--design", default="gaussian", help="design kind")
    p.add_argument("--noise", default="gaussian:1.0", help="noise kind")
    p.add_argument("--prior", default="gaussian:1.0", help="signal prior")
    p.add_argument("--m", type=int, required=True, help="sample size")
    p.add_argument("--n", type=int, required=True, help="signal dimension")
    p.add_argument("--reps", type=int, default=50, help="replications")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ulab",
        description="regularized-regression universality experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("fpe", formatter_class=fmt,
                       help="solve a state-evolution fixed point")
    p.add_argument("--model", required=True, choices=("ridge", "lasso", "robust"))
    p.add_argument("--delta", type=float, required=True, help="aspect ratio m/n")
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="regularization level")
    p.add_argument("--sigma", type=float, default=1.0,
                   help="noise level (ridge/lasso)")
    p.add_argument("--prior", default="gaussian:1.0", help="signal prior")
    p.add_argument("--loss", default="huber:1.0",
                   help="robust loss (robust model only)")
    p.add_argument("--noise", default="gaussian:1.0",
                   help="noise kind for the robust expectation sample")
    p.add_argument("--noise-sample", type=int, default=ROBUST_NOISE_SAMPLE,
                   help="robust noise sample size")
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--seed", type=int, default=_default_seed(),
                   help="master seed (env ULAB_SEED overrides this default)")

    p = sub.add_parser("solve", formatter_class=fmt,
                       help="sample one instance and run one estimator")
    _add_model(p, multi_design=False)
    p.add_argument("--estimator", required=True,
                   choices=("ridge", "lasso", "robust", "lse"))
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="regularization level")
    p.add_argument("--loss", default="huber:1.0", help="robust loss")
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--seed", type=int, default=_default_seed(),
                   help="master seed (env ULAB_SEED overrides this default)")

    p = sub.add_parser("risk-curve", formatter_class=fmt,
                       help="empirical vs theoretical risk over a lambda grid")
    _add_model(p, multi_design=True)
    p.add_argument("--estimator", required=True, choices=("ridge", "lasso"))
    p.add_argument("--lambda-grid", required=True,
                   help="grid START:STOP:COUNT")
    _add_io(p)

    p = sub.add_parser("qq", formatter_class=fmt,
                       help="pooled error quantiles vs the population law")
    _add_model(p, multi_design=True)
    p.add_argument("--estimator", required=True, choices=("ridge", "lasso"))
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    _add_io(p)

    p = sub.add_parser("residual", formatter_class=fmt,
                       help="residual statistics vs the conditional limit law")
    _add_model(p, multi_design=True)
    p.add_argument("--estimator", required=True, choices=("ridge", "lasso"))
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    _add_io(p)

    p = sub.add_parser("sparsity", formatter_class=fmt,
                       help="lasso sparsity vs the population value")
    _add_model(p, multi_design=True)
    p.add_argument("--lambda-grid", required=True, help="grid START:STOP:COUNT")
    _add_io(p)

    p = sub.add_parser("coverage", formatter_class=fmt,
                       help="debiased-lasso confidence interval coverage")
    _add_model(p, multi_design=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05,
                   help="significance level")
    _add_io(p)

    p = sub.add_parser("counterexample", formatter_class=fmt,
                       help="LSE risk ratio under the isotropic counterexample")
    p.add_argument("--L", type=float, required=True, help="risk blow-up factor")
    p.add_argument("--m", type=int, required=True, help="sample size (> n)")
    p.add_argument("--n", type=int, required=True, help="signal dimension")
    p.add_argument("--reps", type=int, default=200, help="replications")
    _add_io(p)

    p = sub.add_parser("cost-compare", formatter_class=fmt,
                       help="normalized cost optimum across designs")
    _add_model(p, multi_design=True)
    p.add_argument("--estimator", required=True,
                   choices=("ridge", "lasso", "robust"))
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--loss", default="huber:1.0", help="robust loss")
    _add_io(p)

    return parser


def _experiment_config(args, estimator: str,
                       grid: tuple[float, ...]) -> ExperimentConfig:
    return ExperimentConfig(
        m=args.m, n=args.n,
        designs=tuple(parse_design(d) for d in args.design),
        noise=parse_noise(args.noise),
        prior=parse_prior(args.prior),
        estimator=estimator,
        lambda_grid=grid,
        loss=parse_loss(args.loss) if hasattr(args, "loss") else None,
        reps=args.reps,
        master_seed=args.seed,
        alpha=getattr(args, "alpha", None),
        threads=args.threads,
    )


def _cmd_fpe(args) -> str:
    prior = parse_prior(args.prior)
    signal = signal_from_prior(prior)
    if args.model == "ridge":
        fp = solve_ridge_fpe(args.delta, args.lam, args.sigma, signal)
    elif args.model == "lasso":
        fp = solve_lasso_fpe(args.delta, args.lam, args.sigma, signal)
    else:
        noise = parse_noise(args.noise)
        sample = sample_noise(noise, args.noise_sample,
                              Stream(args.seed).child("fpe_noise"))
        fp = solve_robust_fpe(args.delta, args.lam, parse_loss(args.loss),
                              sample, signal.second_moment())
    atomic_write_text(args.out, fp.to_json() + "\n")
    return (f"{args.model} fixed point: beta*={fp.beta_star:.6g} "
            f"gamma*={fp.gamma_star:.6g} residuals={max(fp.residuals):.2e}")


def _cmd_solve(args) -> str:
    inst = build_instance(parse_design(args.design), parse_noise(args.noise),
                          parse_prior(args.prior), args.m, args.n,
                          Stream(args.seed).child("solve"))
    if args.estimator == "ridge":
        fit = solve_ridge(inst, args.lam)
    elif args.estimator == "lasso":
        fit = solve_lasso(inst, args.lam)
    elif args.estimator == "robust":
        fit = solve_robust(inst, parse_loss(args.loss), args.lam)
    else:
        fit = solve_lse(inst)
    payload = {
        "estimator": fit.estimator,
        "m": inst.m, "n": inst.n, "lambda": fit.lam,
        "objective": fit.objective,
        "kkt_residual": fit.kkt_residual,
        "iterations": fit.iterations,
        "converged": bool(fit.converged),
        "risk_emp": float(np.mean((fit.mu_hat - inst.mu0) ** 2)),
        "sparsity": sparsity(fit),
        "mu_hat": fit.mu_hat.tolist(),
    }
    atomic_write_text(args.out, json.dumps(payload, indent=2) + "\n")
    return (f"{fit.estimator}: objective={fit.objective:.6g} "
            f"kkt={fit.kkt_residual:.2e} iters={fit.iterations}")


def _run_experiment(args, runner, estimator, grid) -> str:
    cfg = _experiment_config(args, estimator, grid)
    t0 = time.perf_counter()
    result = runner(cfg)
    result.write(args.out, runtime_seconds=time.perf_counter() - t0)
    return f"{result.metadata['experiment']}: {len(result.rows)} rows -> {args.out}"


def dispatch(args) -> str:
    cmd = args.command
    if cmd == "fpe":
        return _cmd_fpe(args)
    if cmd == "solve":
        return _cmd_solve(args)
    if cmd == "risk-curve":
        return _run_experiment(args, run_risk_curve, args.estimator,
                               parse_grid(args.lambda_grid))
    if cmd == "qq":
        return _run_experiment(args, run_qq, args.estimator, (args.lam,))
    if cmd == "residual":
        return _run_experiment(args, run_residual_check, args.estimator,
                               (args.lam,))
    if cmd == "sparsity":
        return _run_experiment(args, run_sparsity_check, "lasso",
                               parse_grid(args.lambda_grid))
    if cmd == "coverage":
        return _run_experiment(args, run_coverage, "lasso", (args.lam,))
    if cmd == "counterexample":
        t0 = time.perf_counter()
        result = run_non_universality(args.m, args.n, args.L, args.reps,
                                      args.seed, threads=args.threads)
        result.write(args.out, runtime_seconds=time.perf_counter() - t0)
        return (f"counterexample: ratio={result.metadata['ratio']:.3g} "
                f"ci95_low={result.metadata['ratio_ci95'][0]:.3g} -> {args.out}")
    if cmd == "cost-compare":
        return _run_experiment(args, run_cost_compare, args.estimator,
                               (args.lam,))
    raise ValueError(f"unknown command {cmd!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        summary = dispatch(args)
    except (ValueError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
