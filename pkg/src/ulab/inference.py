"""Degrees-of-freedom adjusted debiased lasso, noise estimation, and coverage.

The dof adjustment divides the correlation update by 1 - ||mu_hat||_0 / m,
where the zero-norm counts the exact zeros produced by coordinate descent
(zero_tol = 0); solvers that do not produce exact zeros should pass an
explicit ``zero_tol``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .models import ModelInstance
from .normals import norm_ppf
from .solvers import FitResult

__all__ = [
    "InferenceReport",
    "debiased_lasso",
    "gamma_hat",
    "confidence_intervals",
    "empirical_coverage",
    "infer",
]


def _nnz(fit: FitResult, zero_tol: float) -> int:
    return int(np.sum(np.abs(fit.mu_hat) > zero_tol))


def _check_dof(inst: ModelInstance, fit: FitResult, zero_tol: float) -> int:
    k = _nnz(fit, zero_tol)
    if k >= inst.m:
        raise ValueError(
            f"dof adjustment undefined: ||mu_hat||_0 = {k} >= m = {inst.m}")
    return k


def debiased_lasso(inst: ModelInstance, fit: FitResult,
                   zero_tol: float = 0.0) -> np.ndarray:
    """mu_hat + A^T (Y - A mu_hat) / (1 - ||mu_hat||_0 / m)."""
    k = _check_dof(inst, fit, zero_tol)
    resid = inst.Y - inst.A @ fit.mu_hat
    return fit.mu_hat + inst.A.T @ resid / (1.0 - k / inst.m)


def gamma_hat(inst: ModelInstance, fit: FitResult,
              zero_tol: float = 0.0) -> float:
    """sqrt(m) ||Y - A mu_hat|| / (m - ||mu_hat||_0), consistent for gamma*."""
    k = _check_dof(inst, fit, zero_tol)
    resid = inst.Y - inst.A @ fit.mu_hat
    return float(np.sqrt(inst.m) * np.linalg.norm(resid) / (inst.m - k))


def confidence_intervals(mu_debiased: np.ndarray, gamma: float,
                         alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate intervals mu_debiased_j -/+ z_{alpha/2} * gamma."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    half = norm_ppf(1.0 - alpha / 2.0) * gamma
    return mu_debiased - half, mu_debiased + half


def empirical_coverage(ci: tuple[np.ndarray, np.ndarray],
                       mu0: np.ndarray) -> float:
    """Fraction of coordinates whose interval contains the truth."""
    lower, upper = ci
    if lower.shape != mu0.shape or upper.shape != mu0.shape:
        raise ValueError("dimension mismatch between intervals and mu0")
    return float(np.mean((mu0 >= lower) & (mu0 <= upper)))


@dataclass(frozen=True)
class InferenceReport:
    mu_debiased: np.ndarray
    gamma_hat: float
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    alpha: float
    coverage: float | None = None

    def to_json(self, indent=2) -> str:
        return json.dumps({
            "alpha": self.alpha,
            "gamma_hat": self.gamma_hat,
            "coverage": self.coverage,
            "mu_debiased": self.mu_debiased.tolist(),
            "ci_lower": self.ci_lower.tolist(),
            "ci_upper": self.ci_upper.tolist(),
        }, indent=indent)

    def ci_table(self, inst: ModelInstance, fit: FitResult) -> list[tuple]:
        """Rows (j, mu0, mu_hat, mu_debiased, lower, upper, covered)."""
        covered = (inst.mu0 >= self.ci_lower) & (inst.mu0 <= self.ci_upper)
        return [
            (j, inst.mu0[j], fit.mu_hat[j], self.mu_debiased[j],
             self.ci_lower[j], self.ci_upper[j], int(covered[j]))
            for j in range(inst.n)
        ]


def infer(inst: ModelInstance, fit: FitResult, alpha: float,
          zero_tol: float = 0.0) -> InferenceReport:
    """Debias, estimate the effective noise level, and form intervals."""
    mu_d = debiased_lasso(inst, fit, zero_tol)
    g = gamma_hat(inst, fit, zero_tol)
    lower, upper = confidence_intervals(mu_d, g, alpha)
    cov = empirical_coverage((lower, upper), inst.mu0)
    return InferenceReport(mu_debiased=mu_d, gamma_hat=g,
                           ci_lower=lower, ci_upper=upper,
                           alpha=alpha, coverage=cov)
