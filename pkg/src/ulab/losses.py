"""Scalar proximal calculus for the losses and penalties used everywhere else.

All functions are pure, operate in double precision, and accept scalars or
numpy arrays (broadcasting elementwise).  Convention at branch boundaries:
derivatives take the inner-branch value; this is harmless because every
expectation downstream integrates against a continuous law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RobustLoss",
    "absolute",
    "huber",
    "square_half",
    "soft_threshold",
    "ridge_shrink",
    "prox",
    "prox_weak_derivative",
    "moreau_envelope",
    "loss_value",
]


@dataclass(frozen=True)
class RobustLoss:
    """One of the three scalar losses: ``absolute``, ``huber``, ``square_half``.

    ``eta`` is the Huber transition point and must be positive; it is
    ignored by the other kinds.  ``absolute`` and ``huber`` have derivative
    bounded by 1 and ``eta`` respectively; ``square_half`` is unbounded.
    """

    kind: str
    eta: float | None = None

    def __post_init__(self):
        if self.kind not in ("absolute", "huber", "square_half"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "huber":
            if self.eta is None or not self.eta > 0:
                raise ValueError("huber loss requires eta > 0")
        elif self.eta is not None:
            raise ValueError(f"{self.kind} loss takes no eta parameter")

    @property
    def derivative_bound(self) -> float:
        """Essential sup of the loss derivative (inf for square_half)."""
        if self.kind == "absolute":
            return 1.0
        if self.kind == "huber":
            return float(self.eta)
        return np.inf

    def short_name(self) -> str:
        return self.kind if self.kind != "huber" else f"huber:{self.eta:g}"


def absolute() -> RobustLoss:
    return RobustLoss("absolute")


def huber(eta: float) -> RobustLoss:
    return RobustLoss("huber", float(eta))


def square_half() -> RobustLoss:
    return RobustLoss("square_half")


def soft_threshold(z, lam):
    """sign(z) * (|z| - lam)_+, the prox of lam*|.|; lam >= 0."""
    if np.any(np.asarray(lam) < 0):
        raise ValueError("soft_threshold requires lam >= 0")
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def ridge_shrink(z, lam):
    """z / (1 + lam), the prox of lam*|.|^2/2; lam >= 0."""
    if np.any(np.asarray(lam) < 0):
        raise ValueError("ridge_shrink requires lam >= 0")
    return np.asarray(z) / (1.0 + lam) if np.ndim(z) else z / (1.0 + lam)


def _check_tau(tau):
    if not np.all(np.asarray(tau) > 0):
        raise ValueError("prox scale tau must be > 0")


def prox(loss: RobustLoss, x, tau):
    """argmin_z { (x - z)^2 / (2 tau) + loss(z) }, elementwise in x."""
    _check_tau(tau)
    if loss.kind == "absolute":
        return soft_threshold(x, tau)
    if loss.kind == "square_half":
        return x / (1.0 + tau)
    eta = loss.eta
    x = np.asarray(x, dtype=float)
    inner = np.abs(x) <= eta * (1.0 + tau)
    out = np.where(inner, x / (1.0 + tau), x - tau * eta * np.sign(x))
    return out if out.ndim else float(out)


def prox_weak_derivative(loss: RobustLoss, x, tau):
    """d/dx prox(x; tau) a.e.; inner-branch value at the kink."""
    _check_tau(tau)
    x = np.asarray(x, dtype=float)
    if loss.kind == "absolute":
        out = np.where(np.abs(x) <= tau, 0.0, 1.0)
    elif loss.kind == "square_half":
        out = np.full_like(x, 1.0 / (1.0 + tau))
    else:
        inner = np.abs(x) <= loss.eta * (1.0 + tau)
        out = np.where(inner, 1.0 / (1.0 + tau), 1.0)
    return out if out.ndim else float(out)


def moreau_envelope(loss: RobustLoss, x, tau):
    """min_z { (x - z)^2 / (2 tau) + loss(z) }, attained at prox(loss, x, tau)."""
    _check_tau(tau)
    p = prox(loss, x, tau)
    return (np.asarray(x, dtype=float) - p) ** 2 / (2.0 * tau) + loss_value(loss, p)


def loss_value(loss: RobustLoss, x):
    """Evaluate the loss itself."""
    x = np.asarray(x, dtype=float)
    if loss.kind == "absolute":
        out = np.abs(x)
    elif loss.kind == "square_half":
        out = 0.5 * x * x
    else:
        eta = loss.eta
        a = np.abs(x)
        out = np.where(a <= eta, 0.5 * x * x, eta * a - 0.5 * eta * eta)
    return out if out.ndim else float(out)
