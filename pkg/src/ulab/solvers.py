"""Minimizers of the regularized costs, with verifiable optimality certificates.

Costs (unnormalized, A already carries the 1/sqrt(m) scaling):

* ridge:   0.5 * ||A mu - Y||^2 + lam/2 * ||mu||^2       (closed form)
* lasso:   0.5 * ||A mu - Y||^2 + lam * ||mu||_1         (cyclic CD)
* robust:  sum_i loss((A mu - Y)_i) + lam/2 * ||mu||^2   (ADMM, rho = 1)
* lse:     ||A mu - Y||^2, m > n                         (normal equations)

Coordinate descent produces exact zeros (soft thresholding), which the
sparsity and degrees-of-freedom computations downstream rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg as sla

from .losses import RobustLoss, loss_value, prox, soft_threshold
from .models import ModelInstance

__all__ = [
    "SolverConfig",
    "FitResult",
    "solve_ridge",
    "solve_lasso",
    "solve_robust",
    "solve_lse",
    "lasso_kkt_residual",
    "lasso_objective",
    "lasso_subgradient",
    "sparsity",
]

RIDGE_TOL = 1e-10
LASSO_TOL = 1e-8
ADMM_TOL = 1e-7


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 100_000
    tol: float = LASSO_TOL
    warm_start: np.ndarray | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


@dataclass(frozen=True)
class FitResult:
    """Estimator output with its optimality certificate."""

    mu_hat: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    estimator: str
    lam: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    def w_hat(self, mu0: np.ndarray) -> np.ndarray:
        """Estimation error mu_hat - mu0."""
        return self.mu_hat - mu0

    def residual(self, inst: ModelInstance) -> np.ndarray:
        """Regression residual Y - A mu_hat."""
        return inst.Y - inst.A @ self.mu_hat


# --------------------------------------------------------------------------
# Ridge / LSE
# --------------------------------------------------------------------------

def _ridge_objective(A, Y, mu, lam):
    r = A @ mu - Y
    return 0.5 * float(r @ r) + 0.5 * lam * float(mu @ mu)


def solve_ridge(inst: ModelInstance, lam: float) -> FitResult:
    """mu_hat = (A^T A + lam I)^{-1} A^T Y via an SPD solve.

    Uses the m x m dual system when m < n; identical solution either way.
    """
    if not lam > 0:
        raise ValueError("ridge requires lam > 0")
    A, Y, m, n = inst.A, inst.Y, inst.m, inst.n
    try:
        if m < n:
            K = A @ A.T
            K[np.diag_indices_from(K)] += lam
            mu = A.T @ sla.solve(K, Y, assume_a="pos")
        else:
            K = A.T @ A
            K[np.diag_indices_from(K)] += lam
            mu = sla.solve(K, A.T @ Y, assume_a="pos")
    except np.linalg.LinAlgError as exc:  # cannot happen for lam > 0
        raise np.linalg.LinAlgError(f"ridge system numerically singular: {exc}")
    aty = A.T @ Y
    kkt = float(np.max(np.abs(A.T @ (A @ mu) + lam * mu - aty)))
    return FitResult(
        mu_hat=mu,
        objective=_ridge_objective(A, Y, mu, lam),
        kkt_residual=kkt,
        iterations=1,
        converged=kkt <= RIDGE_TOL * max(1.0, float(np.max(np.abs(aty)))),
        estimator="ridge",
        lam=lam,
    )


def solve_lse(inst: ModelInstance) -> FitResult:
    """Ordinary least squares; requires m > n and a nonsingular A^T A."""
    A, Y, m, n = inst.A, inst.Y, inst.m, inst.n
    if m <= n:
        raise ValueError(f"lse requires m > n, got m={m}, n={n}")
    G = A.T @ A
    try:
        c, low = sla.cho_factor(G)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("A^T A is singular: rank-deficient design")
    mu = sla.cho_solve((c, low), A.T @ Y)
    r = A @ mu - Y
    kkt = float(np.max(np.abs(G @ mu - A.T @ Y)))
    return FitResult(
        mu_hat=mu,
        objective=float(r @ r),
        kkt_residual=kkt,
        iterations=1,
        converged=True,
        estimator="lse",
    )


# --------------------------------------------------------------------------
# Lasso: cyclic coordinate descent
# --------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _cd_sweep(A, w, r, colnorm2, lam):
    """One cyclic sweep; updates w, r in place, returns max coordinate move."""
    m, n = A.shape
    max_move = 0.0
    for j in range(n):
        cn = colnorm2[j]
        if cn <= 0.0:
            continue
        wj = w[j]
        dot = 0.0
        for i in range(m):
            dot += A[i, j] * r[i]
        z = wj + dot / cn
        t = lam / cn
        if z > t:
            nw = z - t
        elif z < -t:
            nw = z + t
        else:
            nw = 0.0
        d = nw - wj
        if d != 0.0:
            for i in range(m):
                r[i] -= d * A[i, j]
            w[j] = nw
            ad = abs(d)
            if ad > max_move:
                max_move = ad
    return max_move


def lasso_objective(inst: ModelInstance, mu: np.ndarray, lam: float) -> float:
    r = inst.A @ mu - inst.Y
    return 0.5 * float(r @ r) + lam * float(np.sum(np.abs(mu)))


def lasso_kkt_residual(inst: ModelInstance, mu: np.ndarray, lam: float) -> float:
    """max_j distance of A_j^T (Y - A mu) to the subdifferential lam * d|mu_j|."""
    g = inst.A.T @ (inst.Y - inst.A @ mu)
    on_pos = mu > 0
    on_neg = mu < 0
    res = np.maximum(np.abs(g) - lam, 0.0)       # zero coords: box constraint
    res[on_pos] = np.abs(g[on_pos] - lam)
    res[on_neg] = np.abs(g[on_neg] + lam)
    return float(np.max(res)) if res.size else 0.0


def solve_lasso(inst: ModelInstance, lam: float,
                cfg: SolverConfig = SolverConfig()) -> FitResult:
    """Cyclic coordinate descent with exact soft-threshold updates.

    The KKT residual is checked after every full sweep; coordinates hit
    exact zeros, so the reported sparsity needs no thresholding.
    """
    if not lam > 0:
        raise ValueError("lasso requires lam > 0")
    A = np.asfortranarray(inst.A)
    Y = inst.Y
    n = inst.n
    mu = (np.array(cfg.warm_start, dtype=float, copy=True)
          if cfg.warm_start is not None else np.zeros(n))
    if mu.shape != (n,):
        raise ValueError("warm_start has wrong length")
    r = Y - A @ mu
    colnorm2 = np.einsum("ij,ij->j", A, A)
    kkt = np.inf
    sweeps = 0
    while sweeps < cfg.max_iter:
        _cd_sweep(A, mu, r, colnorm2, lam)
        sweeps += 1
        kkt = lasso_kkt_residual(inst, mu, lam)
        if kkt <= cfg.tol:
            break
    return FitResult(
        mu_hat=mu,
        objective=lasso_objective(inst, mu, lam),
        kkt_residual=kkt,
        iterations=sweeps,
        converged=kkt <= cfg.tol,
        estimator="lasso",
        lam=lam,
    )


def lasso_subgradient(inst: ModelInstance, fit: FitResult, lam: float) -> np.ndarray:
    """v_hat = A^T (Y - A mu_hat) / lam; in [-1, 1]^n at an exact optimum."""
    return inst.A.T @ (inst.Y - inst.A @ fit.mu_hat) / lam


def sparsity(fit: FitResult, zero_tol: float = 0.0) -> float:
    """Fraction of coordinates with |mu_hat_j| > zero_tol."""
    if zero_tol < 0:
        raise ValueError("zero_tol must be >= 0")
    return float(np.mean(np.abs(fit.mu_hat) > zero_tol))


# --------------------------------------------------------------------------
# Robust: ADMM with splitting z = A mu - Y
# --------------------------------------------------------------------------

def robust_objective(inst: ModelInstance, mu: np.ndarray, loss: RobustLoss,
                     lam: float) -> float:
    z = inst.A @ mu - inst.Y
    return float(np.sum(loss_value(loss, z))) + 0.5 * lam * float(mu @ mu)


def solve_robust(inst: ModelInstance, loss: RobustLoss, lam: float,
                 cfg: SolverConfig = SolverConfig(tol=ADMM_TOL)) -> FitResult:
    """ADMM: the z-update is the elementwise prox of the loss, the mu-update
    a cached ridge solve.  Fixed penalty rho = 1; the ridge term keeps the
    mu-subproblem strongly convex for any design.

    Termination is on the optimality certificate itself: after a z-update,
    rho * u is an exact element of the loss subdifferential at z, so
    max(||A^T (rho u) + lam mu||_inf, ||A mu - Y - z||_inf) vanishes at the
    optimum and is re-verifiable from (mu, z, u) alone.
    """
    if not lam > 0:
        raise ValueError("robust solve requires lam > 0")
    A, Y, m, n = inst.A, inst.Y, inst.m, inst.n
    rho = 1.0

    if m < n:
        # Woodbury form of (lam I + rho A^T A)^{-1}
        K = A @ A.T
        K[np.diag_indices_from(K)] += lam / rho
        cho = sla.cho_factor(K)

        def mu_update(v):  # solves (lam I + rho A^T A) mu = rho A^T v
            return (rho / lam) * (A.T @ v - A.T @ sla.cho_solve(cho, A @ (A.T @ v)))
    else:
        K = A.T @ A
        K *= rho
        K[np.diag_indices_from(K)] += lam
        cho = sla.cho_factor(K)

        def mu_update(v):
            return sla.cho_solve(cho, rho * (A.T @ v))

    mu = (np.array(cfg.warm_start, dtype=float, copy=True)
          if cfg.warm_start is not None else np.zeros(n))
    z = A @ mu - Y
    u = np.zeros(m)
    Amu = A @ mu
    it = 0
    kkt = np.inf
    converged = False
    for it in range(1, cfg.max_iter + 1):
        mu = mu_update(Y + z - u)
        Amu = A @ mu
        z = prox(loss, Amu - Y + u, 1.0 / rho)
        u = u + Amu - Y - z
        # after the z-update, rho * u is exactly a subgradient of the loss
        # at z, so this certificate vanishes at the true optimum
        kkt = max(float(np.max(np.abs(A.T @ (rho * u) + lam * mu))),
                  float(np.max(np.abs(Amu - Y - z))))
        if kkt <= cfg.tol:
            converged = True
            break
    return FitResult(
        mu_hat=mu,
        objective=robust_objective(inst, mu, loss, lam),
        kkt_residual=kkt,
        iterations=it,
        converged=converged,
        estimator="robust",
        lam=lam,
        extra={"loss": loss.short_name()},
    )
