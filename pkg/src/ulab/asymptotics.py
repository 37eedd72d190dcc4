"""State-evolution fixed points and the population laws they induce.

Two-scalar systems in (beta*, gamma*) characterize the high-dimensional
limits of the ridge, lasso, and regularized robust estimators.  gamma* is
the effective noise level of the limiting coordinate law; the effective
threshold is alpha* = gamma* lam / beta*.

Expectations over the signal law cross a discrete atom representation
(empirical vector, explicit atoms, or 61-node Gauss-Hermite for a Gaussian
signal) with exact normal-CDF closed forms in Z, so the theory curves carry
no Monte Carlo noise.  The robust system crosses Gauss-Hermite in Z with a
caller-supplied empirical noise sample.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .losses import RobustLoss, prox, prox_weak_derivative, ridge_shrink, soft_threshold
from .normals import gauss_hermite, norm_cdf, norm_pdf, norm_sf
from .models import PriorKind
from .streams import Stream

__all__ = [
    "SignalDistribution",
    "FixedPoint",
    "PopulationLaw",
    "FixedPointError",
    "solve_ridge_fpe",
    "solve_lasso_fpe",
    "solve_robust_fpe",
    "population_sparsity",
    "sample_population",
    "theoretical_risk",
    "signal_from_prior",
]

FPE_TOL = 1e-10
GH_NODES = 61


class FixedPointError(RuntimeError):
    """Raised on bracket exhaustion or non-convergence; carries diagnostics."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


# --------------------------------------------------------------------------
# Signal distributions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SignalDistribution:
    """Mixing law of the signal coordinate, Pi.

    * ``empirical`` -- the exact law n^{-1} sum_j delta_{mu0_j} of a stored
      vector (the canonical mode: matches the finite-n systems exactly);
    * ``atoms``     -- an explicit finite mixture;
    * ``gaussian``  -- N(0, sd^2), integrated by Gauss-Hermite.
    """

    mode: str
    mu0: np.ndarray | None = None
    sd: float | None = None
    values: np.ndarray | None = None
    probs: np.ndarray | None = None

    @staticmethod
    def empirical(mu0: np.ndarray) -> "SignalDistribution":
        return SignalDistribution("empirical", mu0=np.asarray(mu0, dtype=float))

    @staticmethod
    def gaussian(sd: float) -> "SignalDistribution":
        if sd < 0:
            raise ValueError("sd must be >= 0")
        return SignalDistribution("gaussian", sd=float(sd))

    @staticmethod
    def atoms(values, probs) -> "SignalDistribution":
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if values.shape != probs.shape or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("atom probabilities must match values and sum to 1")
        return SignalDistribution("atoms", values=values, probs=probs)

    def atom_representation(self) -> tuple[np.ndarray, np.ndarray]:
        """(values, weights) used by the expectation engine."""
        if self.mode == "empirical":
            n = self.mu0.size
            return self.mu0, np.full(n, 1.0 / n)
        if self.mode == "atoms":
            return self.values, self.probs
        z, w = gauss_hermite(GH_NODES)
        return self.sd * z, w

    def second_moment(self) -> float:
        if self.mode == "gaussian":
            return self.sd**2
        v, w = self.atom_representation()
        return float(np.sum(w * v * v))

    def sample(self, size: int, gen: np.random.Generator) -> np.ndarray:
        """i.i.d. draws from Pi (gaussian/atoms modes)."""
        if self.mode == "gaussian":
            return self.sd * gen.standard_normal(size)
        if self.mode == "atoms":
            return gen.choice(self.values, size=size, p=self.probs)
        raise ValueError("empirical signals are used as stored vectors, not resampled")

    def describe(self) -> str:
        if self.mode == "gaussian":
            return f"gaussian:{self.sd:g}"
        if self.mode == "atoms":
            return f"atoms[{len(self.values)}]"
        return f"empirical[{self.mu0.size}]"


def signal_from_prior(prior: PriorKind) -> SignalDistribution:
    """Analytic signal law matching a sampling prior."""
    if prior.kind == "gaussian":
        return SignalDistribution.gaussian(prior.sd)
    if prior.kind == "pointmass":
        return SignalDistribution.atoms([prior.value], [1.0])
    return SignalDistribution.atoms(
        [0.0, prior.value], [1.0 - prior.fraction, prior.fraction])


# --------------------------------------------------------------------------
# Shrinker moments: E[(eta_p(pi + gamma Z; t) - pi)^2] and E eta_p'(...)
# --------------------------------------------------------------------------

def _eta1_moments(pi: np.ndarray, w: np.ndarray, gamma: float, t: float):
    """Closed forms in Phi for the soft-threshold shrinker, per signal atom."""
    a = (t - pi) / gamma
    b = (-t - pi) / gamma
    pa, pb = norm_pdf(a), norm_pdf(b)
    sfa, cb = norm_sf(a), norm_cdf(b)
    upper = gamma**2 * (sfa + a * pa) - 2 * gamma * t * pa + t**2 * sfa
    lower = gamma**2 * (cb - b * pb) - 2 * gamma * t * pb + t**2 * cb
    dead = pi**2 * (norm_cdf(a) - cb)
    m2 = float(np.sum(w * (upper + lower + dead)))
    active = float(np.sum(w * (sfa + cb)))
    return m2, active


def _eta2_moments(pi: np.ndarray, w: np.ndarray, gamma: float, t: float):
    """Same moments for the ridge shrinker x / (1 + t): algebraic."""
    epi2 = float(np.sum(w * pi * pi))
    m2 = (gamma**2 + t**2 * epi2) / (1.0 + t) ** 2
    return m2, 1.0 / (1.0 + t)


def _eta_moments_quad(p: int, pi: np.ndarray, w: np.ndarray, gamma: float, t: float):
    """Numeric Gauss-Hermite evaluation of the same moments (residual checks)."""
    z, wz = gauss_hermite(GH_NODES)
    x = pi[:, None] + gamma * z[None, :]
    if p == 1:
        eta = soft_threshold(x, t)
        deriv = (np.abs(x) >= t).astype(float)
    else:
        eta = ridge_shrink(x, t)
        deriv = np.full_like(x, 1.0 / (1.0 + t))
    ww = w[:, None] * wz[None, :]
    m2 = float(np.sum(ww * (eta - pi[:, None]) ** 2))
    active = float(np.sum(ww * deriv))
    return m2, active


def _moments(p: int, pi, w, gamma, t):
    return _eta1_moments(pi, w, gamma, t) if p == 1 else _eta2_moments(pi, w, gamma, t)


# --------------------------------------------------------------------------
# Fixed points
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedPoint:
    """Solution of a state-evolution system plus its equation residuals."""

    model: str
    beta_star: float
    gamma_star: float
    residuals: tuple[float, float]
    params: dict = field(default_factory=dict, compare=False)
    degenerate: bool = False

    @property
    def alpha_star(self) -> float:
        """Effective threshold gamma* lam / beta*."""
        if self.degenerate or self.beta_star == 0:
            return math.nan
        return self.gamma_star * self.params["lam"] / self.beta_star

    def to_json_dict(self) -> dict:
        a = self.alpha_star
        return {
            "model": self.model,
            "beta_star": self.beta_star,
            "gamma_star": self.gamma_star,
            "alpha_star": None if math.isnan(a) else a,
            "residuals": list(self.residuals),
            "params": self.params,
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)


def _fpe_residuals(p: int, delta, lam, sigma, pi, w, beta, gamma, quad: bool):
    t = gamma * lam / beta
    if quad:
        m2, active = _eta_moments_quad(p, pi, w, gamma, t)
    else:
        m2, active = _moments(p, pi, w, gamma, t)
    r1 = abs(gamma**2 - sigma**2 - m2 / delta)
    r2 = abs(beta - gamma * (1.0 - active / delta))
    return r1, r2


def _solve_fpe_damped(p: int, delta: float, lam: float, sigma: float,
                      signal: SignalDistribution, tol: float = FPE_TOL,
                      max_iter: int = 10_000) -> tuple[float, float]:
    """Damped alternation shared by the ridge and lasso systems.

    Given beta, gamma is found by bisection on the variance equation over
    [sigma, gamma_max]; beta is then relaxed toward the degrees-of-freedom
    equation with damping 0.5.
    """
    pi, w = signal.atom_representation()
    epi2 = signal.second_moment()
    gamma_max = sigma + 10.0 * math.sqrt(max(epi2, 0.0) / delta) + 10.0
    gamma = sigma + math.sqrt(epi2 / delta) + 1.0
    beta = gamma / 2.0

    def var_gap(g, b):
        m2, _ = _moments(p, pi, w, g, g * lam / b)
        return sigma**2 + m2 / delta - g * g

    lo = max(sigma, 1e-12)
    bracket_failures = 0
    residuals = (np.inf, np.inf)
    for _ in range(max_iter):
        if var_gap(gamma_max, beta) > 0:
            # no root below gamma_max at this beta; shrinking beta raises
            # the threshold and restores solvability unless the system
            # genuinely needs gamma > gamma_max (lam too small for m < n)
            bracket_failures += 1
            if bracket_failures > 60:
                raise FixedPointError(
                    "gamma bracket exhausted (variance equation has no root "
                    "below gamma_max); lam may be too small for this regime",
                    gamma_max=gamma_max, beta=beta, delta=delta, lam=lam)
            beta = beta / 2.0
            continue
        bracket_failures = 0
        gamma = brentq(var_gap, lo, gamma_max, args=(beta,),
                       xtol=1e-14, rtol=8.9e-16)
        _, active = _moments(p, pi, w, gamma, gamma * lam / beta)
        beta_new = gamma * (1.0 - active / delta)
        if beta_new <= 0:
            beta = beta / 2.0
            continue
        beta = 0.5 * beta + 0.5 * beta_new
        residuals = _fpe_residuals(p, delta, lam, sigma, pi, w, beta, gamma,
                                   quad=False)
        if max(residuals) < tol:
            return beta, gamma
    raise FixedPointError("damped alternation did not converge",
                          beta=beta, gamma=gamma, residuals=residuals)


def _degenerate_fixed_point(model: str, params: dict) -> FixedPoint:
    return FixedPoint(model=model, beta_star=0.0, gamma_star=0.0,
                      residuals=(0.0, 0.0), params=params, degenerate=True)


def solve_ridge_fpe(delta: float, lam: float, sigma: float,
                    signal: SignalDistribution,
                    method: str = "closed") -> FixedPoint:
    """Ridge system, by algebraic reduction (default) or the damped iteration.

    With r = gamma/beta, the dof equation reduces to the positive root of
    lam r^2 + r (1 - lam - 1/delta) - 1 = 0, after which the variance
    equation is linear in gamma^2.  Residuals are re-evaluated by numeric
    Gauss-Hermite quadrature, independently of the algebra.
    """
    if not (delta > 0 and lam > 0 and sigma >= 0):
        raise ValueError("require delta > 0, lam > 0, sigma >= 0")
    epi2 = signal.second_moment()
    params = {"delta": delta, "lam": lam, "sigma": sigma,
              "signal": signal.describe(), "signal_m2": epi2}
    if sigma == 0 and epi2 == 0:
        return _degenerate_fixed_point("ridge", params)

    if method == "iterative":
        beta, gamma = _solve_fpe_damped(2, delta, lam, sigma, signal)
    elif method == "closed":
        c = 1.0 - lam - 1.0 / delta
        r = (-c + math.sqrt(c * c + 4.0 * lam)) / (2.0 * lam)
        denom = 1.0 - 1.0 / (delta * (1.0 + lam * r) ** 2)
        if denom <= 0:
            raise FixedPointError(
                "degenerate variance equation: delta (1 + lam r)^2 <= 1",
                delta=delta, lam=lam, r=r)
        g2 = (sigma**2 + lam**2 * r**2 * epi2 / (delta * (1.0 + lam * r) ** 2)) / denom
        gamma = math.sqrt(g2)
        beta = gamma / r
    else:
        raise ValueError(f"unknown method {method!r}")

    pi, w = signal.atom_representation()
    res = _fpe_residuals(2, delta, lam, sigma, pi, w, beta, gamma, quad=True)
    return FixedPoint("ridge", beta, gamma, res, params)


def solve_lasso_fpe(delta: float, lam: float, sigma: float,
                    signal: SignalDistribution) -> FixedPoint:
    """Lasso system via damped alternation with closed-form Phi moments."""
    if not (delta > 0 and lam > 0 and sigma >= 0):
        raise ValueError("require delta > 0, lam > 0, sigma >= 0")
    epi2 = signal.second_moment()
    params = {"delta": delta, "lam": lam, "sigma": sigma,
              "signal": signal.describe(), "signal_m2": epi2}
    if sigma == 0 and epi2 == 0:
        return _degenerate_fixed_point("lasso", params)
    beta, gamma = _solve_fpe_damped(1, delta, lam, sigma, signal)
    pi, w = signal.atom_representation()
    res = _fpe_residuals(1, delta, lam, sigma, pi, w, beta, gamma, quad=False)
    return FixedPoint("lasso", beta, gamma, res, params)


# --------------------------------------------------------------------------
# Robust system
# --------------------------------------------------------------------------

def robust_moments(loss: RobustLoss, gamma: float, beta: float,
                   xi: np.ndarray) -> tuple[float, float]:
    """E[(X - prox(X; beta))^2] and E prox'(X; beta) for X = gamma Z + xi.

    The Z-expectation is evaluated in closed form per noise atom (the
    prox displacement is piecewise linear, so the moments reduce to
    truncated-Gaussian formulas in Phi); only the noise dimension is
    empirical.  This keeps both scalar fields smooth in (gamma, beta),
    which the root-finder relies on.
    """
    if loss.kind == "square_half":
        exi2 = float(np.mean(xi * xi))
        shrink = beta / (1.0 + beta)
        return shrink**2 * (gamma**2 + exi2), 1.0 / (1.0 + beta)
    # threshold T on |X| separating the quadratic/clipped branches
    T = beta if loss.kind == "absolute" else loss.eta * (1.0 + beta)
    hi = (T - xi) / gamma
    lo = (-T - xi) / gamma
    p_hi, p_lo = norm_pdf(hi), norm_pdf(lo)
    prob_in = norm_cdf(hi) - norm_cdf(lo)
    # E[X^2; |X| <= T] per atom, X ~ N(xi, gamma^2)
    ex2_in = ((xi**2 + gamma**2) * prob_in
              + 2.0 * xi * gamma * (p_lo - p_hi)
              + gamma**2 * (lo * p_lo - hi * p_hi))
    if loss.kind == "absolute":
        m2 = float(np.mean(ex2_in + beta**2 * (1.0 - prob_in)))
        active = float(np.mean(1.0 - prob_in))
    else:
        shrink = beta / (1.0 + beta)
        m2 = float(np.mean(shrink**2 * ex2_in
                           + beta**2 * loss.eta**2 * (1.0 - prob_in)))
        active = 1.0 - shrink * float(np.mean(prob_in))
    return m2, active


def robust_moments_quad(loss: RobustLoss, gamma: float, beta: float,
                        xi: np.ndarray, nodes: int = GH_NODES):
    """Gauss-Hermite-in-Z evaluation of the same moments (cross-check path)."""
    z, wz = gauss_hermite(nodes)
    x = gamma * z[:, None] + xi[None, :]
    w = wz[:, None] / xi.size
    m2 = float(np.sum(w * (x - prox(loss, x, beta)) ** 2))
    active = float(np.sum(w * prox_weak_derivative(loss, x, beta)))
    return m2, active


def solve_robust_fpe(tau0: float, lam: float, loss: RobustLoss,
                     noise_sample: np.ndarray, signal_second_moment: float,
                     tol: float = 1e-10) -> FixedPoint:
    """Robust system over an empirical noise sample.

    Outer root-finding runs in beta over the rigorous bracket implied by the
    dof equation (the prox derivative averages to a value in [0, 1], forcing
    1 - 1/tau0 + lam beta into [0, 1]); for each beta the variance equation
    is solved for gamma on a doubling bracket.  The limiting risk in this
    parameterization is tau0 * gamma*^2.
    """
    if not (tau0 > 0 and lam > 0):
        raise ValueError("require tau0 > 0 and lam > 0")
    xi = np.asarray(noise_sample, dtype=float).ravel()
    if xi.size == 0:
        raise ValueError("noise_sample must be nonempty")
    epi2 = float(signal_second_moment)

    def var_gap(gamma, beta):
        m2, _ = robust_moments(loss, gamma, beta, xi)
        return gamma * gamma / tau0 - m2 - lam**2 * beta**2 * epi2

    scan: list[tuple[float, float]] = []

    def gamma_of(beta):
        hi = 1.0
        while var_gap(hi, beta) < 0:
            hi *= 2.0
            if hi > 1e12:
                raise FixedPointError("gamma bracket exhausted in robust system",
                                      beta=beta, scan=scan)
        return brentq(var_gap, 1e-12, hi, args=(beta,), xtol=1e-14, rtol=8.9e-16)

    def dof_gap(beta):
        gamma = gamma_of(beta)
        _, active = robust_moments(loss, gamma, beta, xi)
        gap = active - (1.0 - 1.0 / tau0 + lam * beta)
        scan.append((beta, gap))
        return gap

    beta_lo = max(0.0, 1.0 / tau0 - 1.0) / lam + 1e-9
    beta_hi = 1.0 / (tau0 * lam) - 1e-9
    g_lo, g_hi = dof_gap(beta_lo), dof_gap(beta_hi)
    if not (g_lo > 0 > g_hi):
        raise FixedPointError(
            "dof equation has no sign change on the admissible beta bracket",
            bracket=(beta_lo, beta_hi), gaps=(g_lo, g_hi), scan=scan)
    beta = brentq(dof_gap, beta_lo, beta_hi, xtol=1e-14, rtol=8.9e-16)
    gamma = gamma_of(beta)
    r1 = abs(var_gap(gamma, beta))
    r2 = abs(dof_gap(beta))
    if max(r1, r2) > tol:
        raise FixedPointError("robust system residuals above tolerance",
                              residuals=(r1, r2))
    params = {"tau0": tau0, "lam": lam, "sigma": float(np.sqrt(np.mean(xi**2))),
              "loss": loss.short_name(), "signal_m2": epi2,
              "noise_sample_size": int(xi.size)}
    return FixedPoint("robust", beta, gamma, (r1, r2), params)


# --------------------------------------------------------------------------
# Population laws
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PopulationLaw:
    """Samplers for the limit laws w*, r*, v* attached to a fixed point.

    The residual law r* is conditional on the realized standardized noise
    ``noise_vector``; only the Gaussian part is redrawn.
    """

    fp: FixedPoint
    signal: SignalDistribution
    sigma: float
    noise_vector: np.ndarray | None = None

    def sparsity(self) -> float:
        return population_sparsity(self.fp, self.signal)


def population_sparsity(fp: FixedPoint, signal: SignalDistribution) -> float:
    """s* = P(|Pi + gamma* Z| >= alpha*), averaged over the signal atoms."""
    if fp.model != "lasso":
        raise ValueError("population sparsity is defined for the lasso model")
    if fp.degenerate:
        return 0.0
    pi, w = signal.atom_representation()
    _, active = _eta1_moments(pi, w, fp.gamma_star, fp.alpha_star)
    return active


def _shrink(p: int, x, t):
    return soft_threshold(x, t) if p == 1 else ridge_shrink(x, t)


def sample_population(law: PopulationLaw, which: str, stream: Stream,
                      size: int | None = None) -> np.ndarray:
    """One vector draw from the population law of W, R, or V.

    W and V use the stored signal vector (empirical mode) or ``size`` fresh
    signal draws; R redraws only the Gaussian component around the stored
    noise realization.
    """
    fp = law.fp
    gen = stream.generator()
    if which in ("W", "V"):
        if fp.model not in ("ridge", "lasso"):
            raise ValueError("W/V laws are defined for ridge and lasso models")
        p = 1 if fp.model == "lasso" else 2
        if law.signal.mode == "empirical":
            mu0 = law.signal.mu0
            if size is not None and size != mu0.size:
                raise ValueError("size must match the empirical signal length")
        else:
            if size is None:
                raise ValueError("size is required for non-empirical signals")
            mu0 = law.signal.sample(size, gen)
        g = gen.standard_normal(mu0.size)
        w_star = _shrink(p, mu0 + fp.gamma_star * g, fp.alpha_star) - mu0
        if which == "W":
            return w_star
        if fp.model != "lasso":
            raise ValueError("the subgradient law V is lasso-only")
        lam = fp.params["lam"]
        return -(fp.beta_star / (fp.gamma_star * lam)) * (w_star - fp.gamma_star * g)
    if which == "R":
        if law.noise_vector is None:
            raise ValueError("R law requires the realized noise vector xi0")
        gamma, sigma = fp.gamma_star, law.sigma
        if gamma < sigma:
            raise ValueError("gamma* < sigma: invalid fixed point for R law")
        spread = math.sqrt(max(gamma**2 - sigma**2, 0.0))
        h = gen.standard_normal(law.noise_vector.size)
        return (fp.beta_star / gamma) * (sigma * law.noise_vector + spread * h)
    raise ValueError(f"unknown population component {which!r}")


def theoretical_risk(fp: FixedPoint, delta: float) -> float:
    """Limiting estimation risk ||mu_hat - mu0||^2 / n implied by a fixed point."""
    if fp.model in ("ridge", "lasso"):
        sigma = fp.params["sigma"]
        return delta * (fp.gamma_star**2 - sigma**2)
    return delta * fp.gamma_star**2
