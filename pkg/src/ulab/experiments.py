"""Replicated Monte Carlo drivers for the universality experiments.

Each driver returns an :class:`~ulab.results.ExperimentResult` whose bytes
depend only on (config, master_seed): replications draw from substreams
keyed by (master_seed, experiment_tag, design_index, rep_index) and results
are reduced in a fixed order, so worker count and scheduling never matter.

Theory columns use delta * (gamma*^2 - sigma^2) for ridge/lasso risk and
tau0 * gamma*^2 for the robust risk (the two systems live in different
parameterizations; see the asymptotics module).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .asymptotics import (
    FixedPoint,
    PopulationLaw,
    population_sparsity,
    sample_population,
    signal_from_prior,
    solve_lasso_fpe,
    solve_ridge_fpe,
    theoretical_risk,
)
from .inference import empirical_coverage, gamma_hat as gamma_hat_op, infer
from .losses import RobustLoss, huber, loss_value
from .metrics import bootstrap_ci, bootstrap_se, ks_distance, wasserstein2_1d
from .models import DesignKind, ModelInstance, NoiseKind, PriorKind, build_instance
from .normals import gauss_hermite
from .results import ExperimentResult
from .solvers import (
    SolverConfig,
    solve_lasso,
    solve_lse,
    solve_ridge,
    solve_robust,
    sparsity,
)
from .streams import Stream

__all__ = [
    "ExperimentConfig",
    "run_risk_curve",
    "run_qq",
    "run_residual_check",
    "run_sparsity_check",
    "run_coverage",
    "run_non_universality",
    "run_cost_compare",
    "wasserstein2_1d",
    "ks_distance",
]

QQ_QUANTILES = 199
THEORY_SAMPLE = 1_000_000
N_BOOT = 500


@dataclass(frozen=True)
class ExperimentConfig:
    m: int
    n: int
    designs: tuple[DesignKind, ...]
    noise: NoiseKind
    prior: PriorKind
    estimator: str
    lambda_grid: tuple[float, ...]
    loss: RobustLoss | None = None
    reps: int = 50
    master_seed: int = 0
    alpha: float | None = None
    max_sweeps: int = 5000
    threads: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.estimator not in ("ridge", "lasso", "robust", "lse"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        grid = tuple(float(x) for x in self.lambda_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda grid must be strictly increasing")
        object.__setattr__(self, "designs", tuple(self.designs))
        object.__setattr__(self, "lambda_grid", grid)

    @property
    def lam(self) -> float:
        if len(self.lambda_grid) != 1:
            raise ValueError("this experiment uses a single lambda")
        return self.lambda_grid[0]

    @property
    def delta(self) -> float:
        return self.m / self.n

    def describe(self) -> dict:
        return {
            "m": self.m, "n": self.n,
            "designs": [d.label() for d in self.designs],
            "noise": self.noise.label(), "prior": self.prior.label(),
            "estimator": self.estimator,
            "lambda_grid": list(self.lambda_grid),
            "loss": self.loss.short_name() if self.loss else None,
            "reps": self.reps, "master_seed": self.master_seed,
            "alpha": self.alpha,
        }


def _rep_stream(cfg: ExperimentConfig, tag: str, i_design: int, rep: int) -> Stream:
    return Stream(cfg.master_seed).child(tag).child(i_design).child(rep)


def _map_indexed(fn, items, threads: int) -> list:
    """Apply fn over items, preserving order; threads > 1 uses a pool."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _fit_grid(cfg: ExperimentConfig, inst: ModelInstance):
    """Solve the estimator on every grid lambda; lasso warm-starts downward."""
    solver_cfg = SolverConfig(max_iter=cfg.max_sweeps)
    fits = {}
    if cfg.estimator == "ridge":
        for lam in cfg.lambda_grid:
            fits[lam] = solve_ridge(inst, lam)
        return fits
    if cfg.estimator == "lasso":
        warm = None
        for lam in reversed(cfg.lambda_grid):
            fits[lam] = solve_lasso(inst, lam, replace(solver_cfg, warm_start=warm))
            warm = fits[lam].mu_hat
        return fits
    if cfg.estimator == "robust":
        for lam in cfg.lambda_grid:
            fits[lam] = solve_robust(inst, cfg.loss, lam)
        return fits
    raise ValueError(f"grid fitting not defined for {cfg.estimator!r}")


def _theory_fixed_points(cfg: ExperimentConfig) -> dict[float, FixedPoint]:
    signal = signal_from_prior(cfg.prior)
    solver = solve_ridge_fpe if cfg.estimator == "ridge" else solve_lasso_fpe
    return {lam: solver(cfg.delta, lam, cfg.noise.sigma, signal)
            for lam in cfg.lambda_grid}


# --------------------------------------------------------------------------
# Risk curves (Fig. 1)
# --------------------------------------------------------------------------

def run_risk_curve(cfg: ExperimentConfig) -> ExperimentResult:
    """Empirical vs theoretical estimation risk over a lambda grid."""
    if cfg.estimator not in ("ridge", "lasso"):
        raise ValueError("risk curves support ridge and lasso")
    if not cfg.lambda_grid:
        raise ValueError("risk curve needs a nonempty lambda grid")
    fps = _theory_fixed_points(cfg)
    risk_theory = {lam: theoretical_risk(fp, cfg.delta) for lam, fp in fps.items()}

    def one(task):
        i_design, rep = task
        stream = _rep_stream(cfg, "risk_curve", i_design, rep)
        inst = build_instance(cfg.designs[i_design], cfg.noise, cfg.prior,
                              cfg.m, cfg.n, stream)
        fits = _fit_grid(cfg, inst)
        label = cfg.designs[i_design].label()
        return [
            (label, lam, rep,
             float(np.mean((fits[lam].mu_hat - inst.mu0) ** 2)),
             risk_theory[lam], int(fits[lam].converged))
            for lam in cfg.lambda_grid
        ]

    tasks = [(i, r) for i in range(len(cfg.designs)) for r in range(cfg.reps)]
    chunks = _map_indexed(one, tasks, cfg.threads)
    rows = [row for chunk in chunks for row in chunk]
    order = {d.label(): i for i, d in enumerate(cfg.designs)}
    rows.sort(key=lambda r: (order[r[0]], r[1], r[2]))
    return ExperimentResult(
        schema=("design", "lambda", "rep", "risk_emp", "risk_theory", "converged"),
        rows=rows,
        metadata={"experiment": "risk_curve", "config": cfg.describe(),
                  "seed": cfg.master_seed,
                  "risk_theory": {f"{lam:g}": v for lam, v in risk_theory.items()}},
    )


# --------------------------------------------------------------------------
# QQ distributional check (Fig. 2)
# --------------------------------------------------------------------------

def run_qq(cfg: ExperimentConfig) -> ExperimentResult:
    """Pooled estimator-error quantiles against the population law of w*."""
    if cfg.estimator not in ("ridge", "lasso"):
        raise ValueError("qq supports ridge and lasso")
    lam = cfg.lam
    signal = signal_from_prior(cfg.prior)
    fp = _theory_fixed_points(cfg)[lam]
    law = PopulationLaw(fp=fp, signal=signal, sigma=cfg.noise.sigma)
    theory = sample_population(
        law, "W", Stream(cfg.master_seed).child("qq").child("theory"),
        size=THEORY_SAMPLE)

    def one(task):
        i_design, rep = task
        stream = _rep_stream(cfg, "qq", i_design, rep)
        inst = build_instance(cfg.designs[i_design], cfg.noise, cfg.prior,
                              cfg.m, cfg.n, stream)
        fit = _fit_grid(cfg, inst)[lam]
        return fit.mu_hat - inst.mu0, fit.converged

    levels = np.arange(1, QQ_QUANTILES + 1) / (QQ_QUANTILES + 1)
    theory_q = np.quantile(theory, levels)
    rows = []
    all_converged = True
    for i_design, design in enumerate(cfg.designs):
        outs = _map_indexed(one, [(i_design, r) for r in range(cfg.reps)],
                            cfg.threads)
        pooled = np.concatenate([w for w, _ in outs])
        all_converged &= all(c for _, c in outs)
        emp_q = np.quantile(pooled, levels)
        w2 = wasserstein2_1d(pooled, theory)
        ks = ks_distance(pooled, theory)
        rows.extend(
            (design.label(), float(q), float(eq), float(tq), w2, ks)
            for q, eq, tq in zip(levels, emp_q, theory_q))
    return ExperimentResult(
        schema=("design", "q", "emp_quantile", "theory_quantile", "w2", "ks"),
        rows=rows,
        metadata={"experiment": "qq", "config": cfg.describe(),
                  "seed": cfg.master_seed, "lambda": lam,
                  "gamma_star": fp.gamma_star, "beta_star": fp.beta_star,
                  "all_converged": all_converged},
    )


# --------------------------------------------------------------------------
# Residual distribution check
# --------------------------------------------------------------------------

def _ramp(x):
    """Smooth 1-Lipschitz ramp (softplus)."""
    return np.logaddexp(0.0, x)


_RESIDUAL_STATS = {
    "huber1": lambda x: loss_value(huber(1.0), x),
    "ramp": _ramp,
}


def _residual_theory_stat(stat, xi0, sigma, fp):
    """E_h of the statistic under the conditional law of r*, by quadrature."""
    z, w = gauss_hermite()
    spread = np.sqrt(max(fp.gamma_star**2 - sigma**2, 0.0))
    scale = fp.beta_star / fp.gamma_star
    vals = stat(scale * (sigma * xi0[:, None] + spread * z[None, :]))
    return float(np.mean(vals @ w))


def run_residual_check(cfg: ExperimentConfig) -> ExperimentResult:
    """Lipschitz statistics of the residual against its conditional limit law."""
    if cfg.estimator not in ("ridge", "lasso"):
        raise ValueError("residual check supports ridge and lasso")
    lam = cfg.lam
    signal = signal_from_prior(cfg.prior)
    fp = _theory_fixed_points(cfg)[lam]
    sigma = cfg.noise.sigma

    def one(task):
        i_design, rep = task
        stream = _rep_stream(cfg, "residual", i_design, rep)
        inst = build_instance(cfg.designs[i_design], cfg.noise, cfg.prior,
                              cfg.m, cfg.n, stream)
        fit = _fit_grid(cfg, inst)[lam]
        r_hat = fit.residual(inst)
        xi0 = inst.xi0()
        law = PopulationLaw(fp=fp, signal=signal, sigma=sigma, noise_vector=xi0)
        r_star = sample_population(law, "R", stream.child("rstar"))
        stats = {}
        for name, stat in _RESIDUAL_STATS.items():
            stats[name] = (float(np.mean(stat(r_hat))),
                           _residual_theory_stat(stat, xi0, sigma, fp))
        return r_hat, r_star, stats

    rows = []
    meta_stats = {}
    for i_design, design in enumerate(cfg.designs):
        outs = _map_indexed(one, [(i_design, r) for r in range(cfg.reps)],
                            cfg.threads)
        pooled_hat = np.concatenate([o[0] for o in outs])
        pooled_star = np.concatenate([o[1] for o in outs])
        w2 = wasserstein2_1d(pooled_hat, pooled_star)
        label = design.label()
        for name in _RESIDUAL_STATS:
            gaps = np.array([o[2][name][0] - o[2][name][1] for o in outs])
            se = (bootstrap_se(gaps, Stream(cfg.master_seed)
                               .child("residual_boot").child(i_design)
                               .child(name).generator(), N_BOOT)
                  if cfg.reps > 1 else float("nan"))
            meta_stats[f"{label}/{name}"] = {
                "mean_gap": float(gaps.mean()), "bootstrap_se": se}
            for rep, o in enumerate(outs):
                emp, theory = o[2][name]
                rows.append((label, name, rep, emp, theory, w2))
    return ExperimentResult(
        schema=("design", "stat", "rep", "stat_emp", "stat_theory", "w2"),
        rows=rows,
        metadata={"experiment": "residual", "config": cfg.describe(),
                  "seed": cfg.master_seed, "lambda": lam,
                  "gamma_star": fp.gamma_star, "stats": meta_stats},
    )


# --------------------------------------------------------------------------
# Sparsity concentration
# --------------------------------------------------------------------------

def run_sparsity_check(cfg: ExperimentConfig) -> ExperimentResult:
    """Observed lasso sparsity against the population value s*."""
    if cfg.estimator != "lasso":
        raise ValueError("sparsity check is lasso-only")
    signal = signal_from_prior(cfg.prior)
    fps = _theory_fixed_points(cfg)
    s_star = {lam: population_sparsity(fp, signal) for lam, fp in fps.items()}

    def one(task):
        i_design, rep = task
        stream = _rep_stream(cfg, "sparsity", i_design, rep)
        inst = build_instance(cfg.designs[i_design], cfg.noise, cfg.prior,
                              cfg.m, cfg.n, stream)
        fits = _fit_grid(cfg, inst)
        label = cfg.designs[i_design].label()
        return [
            (label, lam, rep, sparsity(fits[lam]), s_star[lam],
             int(fits[lam].converged))
            for lam in cfg.lambda_grid
        ]

    tasks = [(i, r) for i in range(len(cfg.designs)) for r in range(cfg.reps)]
    rows = [row for chunk in _map_indexed(one, tasks, cfg.threads)
            for row in chunk]
    return ExperimentResult(
        schema=("design", "lambda", "rep", "s_hat", "s_star", "converged"),
        rows=rows,
        metadata={"experiment": "sparsity", "config": cfg.describe(),
                  "seed": cfg.master_seed},
    )


# --------------------------------------------------------------------------
# Coverage of the debiased lasso
# --------------------------------------------------------------------------

def run_coverage(cfg: ExperimentConfig) -> ExperimentResult:
    """Per-rep gamma_hat and averaged CI coverage of the debiased lasso."""
    if cfg.estimator != "lasso":
        raise ValueError("coverage is lasso-only")
    if cfg.alpha is None:
        raise ValueError("coverage requires alpha")
    lam = cfg.lam
    fp = _theory_fixed_points(cfg)[lam]

    def one(task):
        i_design, rep = task
        stream = _rep_stream(cfg, "coverage", i_design, rep)
        inst = build_instance(cfg.designs[i_design], cfg.noise, cfg.prior,
                              cfg.m, cfg.n, stream)
        fit = _fit_grid(cfg, inst)[lam]
        label = cfg.designs[i_design].label()
        try:
            report = infer(inst, fit, cfg.alpha)
        except ValueError:
            return (label, rep, float("nan"), fp.gamma_star, float("nan"), 0)
        return (label, rep, report.gamma_hat, fp.gamma_star,
                report.coverage, 1)

    tasks = [(i, r) for i in range(len(cfg.designs)) for r in range(cfg.reps)]
    rows = _map_indexed(one, tasks, cfg.threads)
    return ExperimentResult(
        schema=("design", "rep", "gamma_hat", "gamma_star", "coverage", "dof_ok"),
        rows=rows,
        metadata={"experiment": "coverage", "config": cfg.describe(),
                  "seed": cfg.master_seed, "lambda": lam, "alpha": cfg.alpha},
    )


# --------------------------------------------------------------------------
# Non-universality of the LSE under the isotropic counterexample
# --------------------------------------------------------------------------

def run_non_universality(m: int, n: int, L: float, reps: int,
                         master_seed: int, threads: int = 1,
                         designs: tuple[DesignKind, DesignKind] | None = None,
                         ) -> ExperimentResult:
    """LSE risk ratio: counterexample isotropic design over Gaussian design.

    Rank-deficient counterexample draws are retried on fresh substreams and
    counted; more than 50% deficient draws aborts with a diagnostic.  The
    ``designs`` pair can be overridden (e.g. Gaussian vs Gaussian as a
    same-law control); the ratio is first design over second.
    """
    if not (m > n >= 1):
        raise ValueError("requires m > n >= 1")
    if not L > 1:
        raise ValueError("requires L > 1")
    if designs is None:
        designs = (DesignKind("counterexample", L=L), DesignKind("gaussian"))
    noise = NoiseKind("gaussian", sigma=1.0)
    prior = PriorKind("pointmass", value=0.0)  # LSE risk does not depend on mu0
    root = Stream(master_seed).child("counterexample")

    def one(task):
        i_design, rep = task
        retries = 0
        while True:
            stream = root.child(i_design).child(rep).child("retry", retries)
            inst = build_instance(designs[i_design], noise, prior, m, n, stream)
            try:
                fit = solve_lse(inst)
            except np.linalg.LinAlgError:
                retries += 1
                if retries > reps:
                    raise RuntimeError(
                        f"over 50% rank-deficient draws for {designs[i_design].label()}")
                continue
            return (i_design, rep,
                    float(np.mean((fit.mu_hat - inst.mu0) ** 2)), retries)

    tasks = [(i, r) for i in range(2) for r in range(reps)]
    raw = _map_indexed(one, tasks, threads)
    per_design = [np.array([r[2] for r in raw if r[0] == i])
                  for i in range(2)]
    deficient = sum(r[3] for r in raw)
    if deficient > reps:
        raise RuntimeError("over 50% rank-deficient counterexample draws")
    ratio = float(per_design[0].mean() / per_design[1].mean())
    ci_lo, ci_hi = bootstrap_ci(
        lambda a, b: a.mean() / b.mean(),
        {"a": per_design[0], "b": per_design[1]},
        root.child("bootstrap").generator(), N_BOOT)
    rows = [(designs[i].label(), rep, risk, retries, ratio, ci_lo)
            for i, rep, risk, retries in raw]
    return ExperimentResult(
        schema=("design", "rep", "risk", "retries", "ratio", "ratio_lo95"),
        rows=rows,
        metadata={"experiment": "counterexample", "seed": master_seed,
                  "config": {"m": m, "n": n, "L": L, "reps": reps},
                  "ratio": ratio, "ratio_ci95": [ci_lo, ci_hi],
                  "risk_counterexample": float(per_design[0].mean()),
                  "risk_gaussian": float(per_design[1].mean())},
    )


# --------------------------------------------------------------------------
# Cost-optimum universality probe
# --------------------------------------------------------------------------

def run_cost_compare(cfg: ExperimentConfig) -> ExperimentResult:
    """Normalized cost optimum per design, with pairwise mean gaps.

    Duplicate design entries get independent substreams (keyed by position),
    so a design listed twice yields the self-comparison control.
    """
    if cfg.estimator not in ("ridge", "lasso", "robust"):
        raise ValueError("cost compare supports ridge, lasso, robust")
    lam = cfg.lam

    def one(task):
        i_design, rep = task
        stream = _rep_stream(cfg, "cost_compare", i_design, rep)
        inst = build_instance(cfg.designs[i_design], cfg.noise, cfg.prior,
                              cfg.m, cfg.n, stream)
        fit = _fit_grid(cfg, inst)[lam]
        return (i_design, cfg.designs[i_design].label(), rep,
                fit.objective / cfg.m, int(fit.converged))

    tasks = [(i, r) for i in range(len(cfg.designs)) for r in range(cfg.reps)]
    rows = _map_indexed(one, tasks, cfg.threads)
    groups = {}
    for i_design in range(len(cfg.designs)):
        vals = np.array([r[3] for r in rows if r[0] == i_design])
        groups[i_design] = vals
    summary = {
        str(i): {"design": cfg.designs[i].label(),
                 "mean": float(v.mean()),
                 "var": float(v.var(ddof=1)) if v.size > 1 else float("nan"),
                 "se": float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1
                 else float("nan")}
        for i, v in groups.items()
    }
    gaps = {}
    for i in range(len(cfg.designs)):
        for j in range(i + 1, len(cfg.designs)):
            gi, gj = groups[i], groups[j]
            gap = float(gi.mean() - gj.mean())
            se = float(np.sqrt(gi.var(ddof=1) / gi.size +
                               gj.var(ddof=1) / gj.size))
            gaps[f"{i}-{j}"] = {"gap": gap, "se": se}
    return ExperimentResult(
        schema=("design_index", "design", "rep", "cost_norm", "converged"),
        rows=rows,
        metadata={"experiment": "cost_compare", "config": cfg.describe(),
                  "seed": cfg.master_seed, "lambda": lam,
                  "groups": summary, "pairwise_gaps": gaps},
    )
