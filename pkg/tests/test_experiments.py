import numpy as np
import pytest

from ulab.experiments import (
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
from ulab.losses import huber
from ulab.models import DesignKind, NoiseKind, PriorKind, counterexample_atoms
from ulab.streams import Stream

from oracles import w2_bruteforce

GAUSS = DesignKind("gaussian")
NOISE1 = NoiseKind("gaussian", sigma=1.0)
PRIOR1 = PriorKind("gaussian", sd=1.0)


def _cfg(**kw):
    base = dict(m=80, n=100, designs=(GAUSS,), noise=NOISE1, prior=PRIOR1,
                estimator="ridge", lambda_grid=(1.0,), reps=3, master_seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

def test_w2_basics():
    x = Stream(0).generator().standard_normal(500)
    assert wasserstein2_1d(x, x) == 0.0
    assert wasserstein2_1d([1.5], [-2.0]) == pytest.approx(3.5)
    y = Stream(1).generator().standard_normal(700)
    assert wasserstein2_1d(x, y) == pytest.approx(wasserstein2_1d(y, x))
    assert wasserstein2_1d(x, y) >= 0
    with pytest.raises(ValueError):
        wasserstein2_1d([], [1.0])


def test_w2_matches_bruteforce_on_size4():
    gen = Stream(2).generator()
    for _ in range(25):
        a = gen.normal(size=4)
        b = gen.normal(size=4)
        assert wasserstein2_1d(a, b) == pytest.approx(w2_bruteforce(a, b),
                                                      abs=1e-12)


def test_ks_basics():
    x = np.array([0.0, 1.0, 2.0])
    assert ks_distance(x, x) == 0.0
    assert ks_distance([0, 1], [5, 6]) == 1.0
    assert ks_distance(x, [0.5, 1.5, 2.5]) == pytest.approx(1.0 / 3.0)


# --------------------------------------------------------------------------
# Config validation
# --------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(reps=0)
    with pytest.raises(ValueError):
        _cfg(lambda_grid=(2.0, 1.0))
    with pytest.raises(ValueError):
        _cfg(estimator="pls")
    with pytest.raises(ValueError):
        _cfg(lambda_grid=(1.0, 2.0)).lam


# --------------------------------------------------------------------------
# Risk curve
# --------------------------------------------------------------------------

def test_risk_curve_row_count_and_determinism():
    cfg = _cfg(designs=(GAUSS, DesignKind("student", df=6.0)),
               lambda_grid=(0.5, 1.0, 2.0), reps=2)
    res = run_risk_curve(cfg)
    assert res.schema[:5] == ("design", "lambda", "rep", "risk_emp",
                              "risk_theory")
    assert len(res.rows) == 2 * 3 * 2
    again = run_risk_curve(cfg)
    assert res.to_csv() == again.to_csv()
    # threads must not change the bytes
    threaded = run_risk_curve(_cfg(designs=cfg.designs,
                                   lambda_grid=cfg.lambda_grid, reps=2,
                                   threads=4))
    assert threaded.to_csv() == res.to_csv()


def test_risk_curve_lasso_small_scale_sane():
    cfg = _cfg(estimator="lasso", lambda_grid=(1.0,), reps=4, m=160, n=200)
    res = run_risk_curve(cfg)
    emp = res.column("risk_emp").mean()
    theory = res.column("risk_theory")[0]
    assert emp == pytest.approx(theory, rel=0.35)
    assert np.all(res.column("converged") == 1)


# --------------------------------------------------------------------------
# QQ
# --------------------------------------------------------------------------

def test_qq_small_input_contract():
    cfg = _cfg(m=8, n=10, reps=1, lambda_grid=(1.0,))
    res = run_qq(cfg)
    assert len(res.rows) == 199
    qs = res.column("q")
    assert qs[0] == pytest.approx(1 / 200) and qs[-1] == pytest.approx(199 / 200)
    assert np.all(np.diff(res.column("theory_quantile")) >= 0)


def test_qq_theory_self_distance_shrinks():
    # two independent draws of the same law: W2 decreases with sample size
    from ulab.asymptotics import PopulationLaw, SignalDistribution, \
        sample_population, solve_ridge_fpe
    signal = SignalDistribution.gaussian(1.0)
    fp = solve_ridge_fpe(0.8, 1.0, 1.0, signal)
    law = PopulationLaw(fp=fp, signal=signal, sigma=1.0)
    d = {}
    for size in (1_000, 100_000):
        a = sample_population(law, "W", Stream(3).child(size, 0), size=size)
        b = sample_population(law, "W", Stream(3).child(size, 1), size=size)
        d[size] = wasserstein2_1d(a, b)
    assert d[100_000] < d[1_000] < 0.2


# --------------------------------------------------------------------------
# Residual check
# --------------------------------------------------------------------------

def test_residual_check_runs_and_is_deterministic():
    cfg = _cfg(m=100, n=80, reps=3)
    res = run_residual_check(cfg)
    assert len(res.rows) == 2 * 3  # two statistics per rep
    assert run_residual_check(cfg).to_csv() == res.to_csv()
    for key, stat in res.metadata["stats"].items():
        assert np.isfinite(stat["mean_gap"])


def test_residual_check_degenerate_gamma_equals_sigma():
    # pointmass-0 signal with a huge lambda: gamma* = sigma, r* has no
    # fresh gaussian part, so the statistic compares against scaled xi0
    cfg = _cfg(estimator="lasso", m=60, n=40,
               prior=PriorKind("pointmass", value=0.0),
               lambda_grid=(40.0,), reps=2)
    res = run_residual_check(cfg)
    assert res.metadata["gamma_star"] == pytest.approx(1.0, abs=1e-8)
    gaps = res.column("stat_emp") - res.column("stat_theory")
    assert np.max(np.abs(gaps)) < 0.2


# --------------------------------------------------------------------------
# Sparsity
# --------------------------------------------------------------------------

def test_sparsity_check_huge_lambda_gives_zero():
    cfg = _cfg(estimator="lasso", m=50, n=60, lambda_grid=(30.0,), reps=3)
    res = run_sparsity_check(cfg)
    assert np.all(res.column("s_hat") == 0.0)
    assert np.all(res.column("s_star") < 1e-6)


# --------------------------------------------------------------------------
# Coverage
# --------------------------------------------------------------------------

def test_coverage_alpha_half_sanity():
    cfg = _cfg(estimator="lasso", m=320, n=400, lambda_grid=(1.0,), reps=4,
               alpha=0.5)
    res = run_coverage(cfg)
    assert np.all(res.column("dof_ok") == 1)
    assert res.column("coverage").mean() == pytest.approx(0.5, abs=0.08)


# --------------------------------------------------------------------------
# Non-universality
# --------------------------------------------------------------------------

def test_counterexample_atoms_value():
    lo, hi = counterexample_atoms(2.0, 2)
    assert (lo, hi) == (0.5, pytest.approx(np.sqrt(1.75)))


def test_non_universality_gaussian_control():
    res = run_non_universality(60, 20, L=10.0, reps=60, master_seed=5,
                               designs=(GAUSS, GAUSS))
    assert 0.9 <= res.metadata["ratio"] <= 1.1


def test_non_universality_counterexample_inflates_risk():
    res = run_non_universality(80, 40, L=4.0, reps=60, master_seed=6)
    assert res.metadata["ratio"] > 2.0
    assert res.metadata["ratio_ci95"][0] > 1.5
    assert np.all(res.column("retries") == 0)
    again = run_non_universality(80, 40, L=4.0, reps=60, master_seed=6)
    assert again.to_csv() == res.to_csv()


def test_non_universality_input_validation():
    with pytest.raises(ValueError):
        run_non_universality(20, 30, L=10.0, reps=5, master_seed=0)
    with pytest.raises(ValueError):
        run_non_universality(30, 20, L=1.0, reps=5, master_seed=0)


# --------------------------------------------------------------------------
# Cost compare
# --------------------------------------------------------------------------

def test_cost_compare_self_control_within_3se():
    cfg = _cfg(designs=(GAUSS, GAUSS), reps=12, m=200, n=250,
               lambda_grid=(1.0,))
    res = run_cost_compare(cfg)
    gap = res.metadata["pairwise_gaps"]["0-1"]
    assert abs(gap["gap"]) <= 3 * gap["se"]
    assert len(res.rows) == 24


def test_cost_compare_robust_estimator_runs():
    cfg = _cfg(estimator="robust", loss=huber(1.0), lambda_grid=(0.5,),
               reps=2, m=60, n=40)
    res = run_cost_compare(cfg)
    assert np.all(res.column("converged") == 1)
    assert np.all(np.isfinite(res.column("cost_norm")))
