"""Standard-normal helpers: density, CDF, tail, quantile, Gauss-Hermite rule.

The quantile function is Wichura's AS 241 (PPND16) rational approximation,
accurate to ~1e-16 in double precision; it is implemented here so the
inference layer carries no dependency beyond numpy for its critical values.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

__all__ = ["norm_pdf", "norm_cdf", "norm_sf", "norm_ppf", "gauss_hermite"]


def norm_pdf(x):
    return np.exp(-0.5 * np.square(x)) / np.sqrt(2.0 * np.pi)


def norm_cdf(x):
    return ndtr(x)


def norm_sf(x):
    """Upper tail P(Z > x)."""
    return ndtr(-np.asarray(x, dtype=float))


# AS 241 PPND16 coefficients (central and tail rational fits).
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
      5.3941960214247511077e3, 2.1213794301586595867e4, 3.9307895800092710610e4,
      2.8729085735721942674e4, 5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
      6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
      1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15)


def _poly(coeffs, x):
    out = np.zeros_like(x)
    for c in reversed(coeffs):
        out = out * x + c
    return out


def norm_ppf(p):
    """Inverse standard-normal CDF (AS 241), elementwise; NaN outside (0, 1)."""
    p = np.asarray(p, dtype=float)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    out = np.full_like(p, np.nan)
    q = p - 0.5
    central = np.abs(q) <= 0.425
    if np.any(central):
        r = 0.180625 - q[central] ** 2
        out[central] = q[central] * _poly(_A, r) / _poly(_B, r)
    tails = (~central) & (p > 0) & (p < 1)
    if np.any(tails):
        pt = p[tails]
        r = np.where(pt < 0.5, pt, 1.0 - pt)
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        val[near] = _poly(_C, r[near] - 1.6) / _poly(_D, r[near] - 1.6)
        val[~near] = _poly(_E, r[~near] - 5.0) / _poly(_F, r[~near] - 5.0)
        out[tails] = np.where(pt < 0.5, -val, val)
    out[p == 0] = -np.inf
    out[p == 1] = np.inf
    return float(out[0]) if scalar else out


def gauss_hermite(n_nodes: int = 61) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for E f(Z), Z ~ N(0,1): sum(w * f(z)) with w summing to 1."""
    x, w = np.polynomial.hermite.hermgauss(n_nodes)
    return np.sqrt(2.0) * x, w / np.sqrt(np.pi)
