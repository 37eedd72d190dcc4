"""Regularized regression estimators, state-evolution fixed points, and
design-universality experiments in the proportional regime m/n -> delta."""

from .asymptotics import (
    FixedPoint,
    FixedPointError,
    PopulationLaw,
    SignalDistribution,
    population_sparsity,
    sample_population,
    signal_from_prior,
    solve_lasso_fpe,
    solve_ridge_fpe,
    solve_robust_fpe,
    theoretical_risk,
)
from .experiments import (
    ExperimentConfig,
    ks_distance,
    run_cost_compare,
    run_coverage,
    run_non_universality,
    run_qq,
    run_residual_check,
    run_risk_curve,
    run_sparsity_check,
    wasserstein2_1d,
)
from .inference import (
    InferenceReport,
    confidence_intervals,
    debiased_lasso,
    empirical_coverage,
    gamma_hat,
    infer,
)
from .losses import (
    RobustLoss,
    absolute,
    huber,
    loss_value,
    moreau_envelope,
    prox,
    prox_weak_derivative,
    ridge_shrink,
    soft_threshold,
    square_half,
)
from .models import (
    DesignKind,
    ModelInstance,
    NoiseKind,
    PriorKind,
    build_instance,
    parse_design,
    parse_noise,
    parse_prior,
    sample_design,
    sample_noise,
    sample_prior,
)
from .results import ExperimentResult
from .solvers import (
    FitResult,
    SolverConfig,
    lasso_kkt_residual,
    lasso_subgradient,
    solve_lasso,
    solve_lse,
    solve_ridge,
    solve_robust,
    sparsity,
)
from .streams import Stream

__version__ = "0.1.0"
