"""Random design matrices, noise, signal priors, and model instances.

The observation model is ``Y = A @ mu0 + xi`` with ``A = A0 / sqrt(m)``,
where ``A0`` has unit-variance entries (or unit-second-moment rows for the
isotropic kinds).  Heavy-tailed entry laws are standardized to variance 1
before the ``1/sqrt(m)`` scaling.

Every ``sample_*`` function is pure given its :class:`~ulab.streams.Stream`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .streams import Stream

__all__ = [
    "DesignKind",
    "NoiseKind",
    "PriorKind",
    "ModelInstance",
    "sample_design",
    "sample_noise",
    "sample_prior",
    "build_instance",
    "parse_design",
    "parse_noise",
    "parse_prior",
]


# --------------------------------------------------------------------------
# Kind descriptors
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignKind:
    """Entry/row law of the standardized design ``A0``.

    kinds:
      * ``gaussian``        -- i.i.d. N(0, 1) entries
      * ``student``         -- i.i.d. t(df) entries scaled to unit variance
                               (requires df > 2)
      * ``iso3pt``          -- isotropic rows ``U_i * Z_i`` with U on
                               {+atom, -atom, 0}, P(U = +/-atom) = p_atom
                               each; needs 2 * p_atom * atom^2 == 1
      * ``counterexample``  -- isotropic rows with U on {+/-1/L, +/-S_m},
                               P(U = +/-1/L) = (1 - 1/m)/2 each and
                               P(U = +/-S_m) = 1/(2m) each, where
                               S_m = sqrt(m * (1 - (1 - 1/m)/L^2)) makes
                               E U^2 = 1 exactly
    """

    kind: str
    df: float | None = None
    atom: float | None = None
    p_atom: float | None = None
    L: float | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            pass
        elif self.kind == "student":
            if self.df is None or not self.df > 2:
                raise ValueError("student design requires df > 2 (finite variance)")
        elif self.kind == "iso3pt":
            if self.atom is None or self.p_atom is None:
                raise ValueError("iso3pt design requires atom and p_atom")
            if not (self.atom > 0 and 0 < self.p_atom <= 0.5):
                raise ValueError("iso3pt needs atom > 0 and p_atom in (0, 0.5]")
            if abs(2.0 * self.p_atom * self.atom**2 - 1.0) > 1e-12:
                raise ValueError(
                    "iso3pt row multiplier must satisfy 2 * p_atom * atom^2 == 1 "
                    f"(got {2.0 * self.p_atom * self.atom ** 2:.15g})"
                )
        elif self.kind == "counterexample":
            if self.L is None or not self.L > 1:
                raise ValueError("counterexample design requires L > 1")
        else:
            raise ValueError(f"unknown design kind {self.kind!r}")

    def label(self) -> str:
        if self.kind == "gaussian":
            return "gaussian"
        if self.kind == "student":
            return f"student:{self.df:g}"
        if self.kind == "iso3pt":
            return f"iso3pt:{self.atom:g}:{self.p_atom:g}"
        return f"counterexample:{self.L:g}"


@dataclass(frozen=True)
class NoiseKind:
    """Noise law; ``sigma`` multiplies a unit-variance standardized draw."""

    kind: str
    sigma: float = 1.0
    df: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "student", "zero"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("noise sigma must be >= 0")
        if self.kind == "student" and (self.df is None or not self.df > 2):
            raise ValueError("student noise requires df > 2")

    def label(self) -> str:
        if self.kind == "zero":
            return "zero"
        if self.kind == "gaussian":
            return f"gaussian:{self.sigma:g}"
        return f"student:{self.df:g}:{self.sigma:g}"


@dataclass(frozen=True)
class PriorKind:
    """Signal coordinate law for ``mu0``."""

    kind: str
    sd: float | None = None
    value: float | None = None
    fraction: float | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.sd is None or self.sd < 0:
                raise ValueError("gaussian prior requires sd >= 0")
        elif self.kind == "pointmass":
            if self.value is None:
                raise ValueError("pointmass prior requires a value")
        elif self.kind == "sparse2pt":
            if self.value is None or self.fraction is None:
                raise ValueError("sparse2pt prior requires value and fraction")
            if not 0 <= self.fraction <= 1:
                raise ValueError("sparse2pt fraction must be in [0, 1]")
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    def second_moment(self) -> float:
        if self.kind == "gaussian":
            return self.sd**2
        if self.kind == "pointmass":
            return self.value**2
        return self.fraction * self.value**2

    def label(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian:{self.sd:g}"
        if self.kind == "pointmass":
            return f"pointmass:{self.value:g}"
        return f"sparse2pt:{self.value:g}:{self.fraction:g}"


@dataclass(frozen=True)
class ModelInstance:
    """One realization of the linear model, with ``Y = A @ mu0 + xi`` exact."""

    m: int
    n: int
    A: np.ndarray
    mu0: np.ndarray
    xi: np.ndarray
    Y: np.ndarray
    design: DesignKind | None = field(default=None, compare=False)
    noise: NoiseKind | None = field(default=None, compare=False)
    prior: PriorKind | None = field(default=None, compare=False)

    @property
    def delta(self) -> float:
        """Aspect ratio m/n."""
        return self.m / self.n

    @property
    def sigma(self) -> float:
        return self.noise.sigma if self.noise is not None else float("nan")

    def xi0(self) -> np.ndarray:
        """Standardized noise xi / sigma (zeros when sigma == 0)."""
        s = self.sigma
        if not s > 0:
            return np.zeros(self.m)
        return self.xi / s


# --------------------------------------------------------------------------
# Samplers
# --------------------------------------------------------------------------

def _student_standardized(gen: np.random.Generator, df: float, size) -> np.ndarray:
    # divide by sqrt(df / (df - 2)) so the entry variance is exactly 1
    return gen.standard_t(df, size=size) / np.sqrt(df / (df - 2.0))


def _row_multipliers(kind: DesignKind, m: int, gen: np.random.Generator) -> np.ndarray:
    if kind.kind == "iso3pt":
        u = gen.uniform(size=m)
        mult = np.zeros(m)
        mult[u < kind.p_atom] = kind.atom
        mult[(u >= kind.p_atom) & (u < 2 * kind.p_atom)] = -kind.atom
        return mult
    # counterexample: two magnitudes, the rare one blown up to keep E U^2 = 1
    L = kind.L
    s_big = np.sqrt(m * (1.0 - (1.0 - 1.0 / m) / L**2))
    u = gen.uniform(size=m)
    p_small = (1.0 - 1.0 / m) / 2.0
    mult = np.empty(m)
    mult[:] = s_big
    mult[u < p_small] = 1.0 / L
    mult[(u >= p_small) & (u < 2 * p_small)] = -1.0 / L
    mult[(u >= 2 * p_small) & (u < 2 * p_small + 1.0 / (2 * m))] = s_big
    mult[u >= 2 * p_small + 1.0 / (2 * m)] = -s_big
    return mult


def counterexample_atoms(L: float, m: int) -> tuple[float, float]:
    """Magnitudes (1/L, S_m) of the counterexample row multipliers."""
    return 1.0 / L, float(np.sqrt(m * (1.0 - (1.0 - 1.0 / m) / L**2)))


def sample_design(kind: DesignKind, m: int, n: int, stream: Stream) -> np.ndarray:
    """Draw an m x n design already carrying the 1/sqrt(m) normalization."""
    if m < 1 or n < 1:
        raise ValueError("design dimensions must be >= 1")
    gen = stream.generator()
    if kind.kind == "gaussian":
        A0 = gen.standard_normal((m, n))
    elif kind.kind == "student":
        A0 = _student_standardized(gen, kind.df, (m, n))
    else:
        mult = _row_multipliers(kind, m, gen)
        Z = gen.standard_normal((m, n))
        A0 = mult[:, None] * Z
    return A0 / np.sqrt(m)


def sample_noise(kind: NoiseKind, m: int, stream: Stream) -> np.ndarray:
    """Draw the length-m noise vector xi = sigma * xi0."""
    if kind.kind == "zero" or kind.sigma == 0:
        return np.zeros(m)
    gen = stream.generator()
    if kind.kind == "gaussian":
        xi0 = gen.standard_normal(m)
    else:
        xi0 = _student_standardized(gen, kind.df, m)
    return kind.sigma * xi0


def sample_prior(kind: PriorKind, n: int, stream: Stream) -> np.ndarray:
    """Draw the length-n signal vector mu0 with i.i.d. coordinates."""
    if n < 1:
        raise ValueError("prior dimension must be >= 1")
    gen = stream.generator()
    if kind.kind == "gaussian":
        return kind.sd * gen.standard_normal(n)
    if kind.kind == "pointmass":
        return np.full(n, float(kind.value))
    mask = gen.uniform(size=n) < kind.fraction
    return np.where(mask, float(kind.value), 0.0)


def build_instance(
    design: DesignKind,
    noise: NoiseKind,
    prior: PriorKind,
    m: int,
    n: int,
    stream: Stream,
) -> ModelInstance:
    """Sample (A, mu0, xi) on independent tagged substreams and assemble Y.

    The substreams are keyed by component name, so e.g. changing n leaves
    the noise draw untouched.
    """
    A = sample_design(design, m, n, stream.child("design"))
    mu0 = sample_prior(prior, n, stream.child("prior"))
    xi = sample_noise(noise, m, stream.child("noise"))
    Y = A @ mu0 + xi
    return ModelInstance(m=m, n=n, A=A, mu0=mu0, xi=xi, Y=Y,
                         design=design, noise=noise, prior=prior)


# --------------------------------------------------------------------------
# CLI string grammars (exact)
# --------------------------------------------------------------------------

def _split(spec: str, name: str, arities) -> list[str]:
    parts = spec.split(":")
    if len(parts) - 1 not in arities:
        raise ValueError(f"malformed {name} spec {spec!r}")
    return parts


def parse_design(spec: str) -> DesignKind:
    """Parse ``gaussian`` | ``student:DF`` | ``iso3pt:ATOM:P`` | ``counterexample:L``."""
    parts = spec.split(":")
    head = parts[0]
    if head == "gaussian" and len(parts) == 1:
        return DesignKind("gaussian")
    if head == "student" and len(parts) == 2:
        return DesignKind("student", df=float(parts[1]))
    if head == "iso3pt" and len(parts) == 3:
        return DesignKind("iso3pt", atom=float(parts[1]), p_atom=float(parts[2]))
    if head == "counterexample" and len(parts) == 2:
        return DesignKind("counterexample", L=float(parts[1]))
    raise ValueError(f"malformed design spec {spec!r}")


def parse_noise(spec: str) -> NoiseKind:
    """Parse ``zero`` | ``gaussian:SIGMA`` | ``student:DF:SIGMA``."""
    parts = spec.split(":")
    head = parts[0]
    if head == "zero" and len(parts) == 1:
        return NoiseKind("zero", sigma=0.0)
    if head == "gaussian" and len(parts) == 2:
        return NoiseKind("gaussian", sigma=float(parts[1]))
    if head == "student" and len(parts) == 3:
        return NoiseKind("student", df=float(parts[1]), sigma=float(parts[2]))
    raise ValueError(f"malformed noise spec {spec!r}")


def parse_prior(spec: str) -> PriorKind:
    """Parse ``gaussian:SD`` | ``pointmass:V`` | ``sparse2pt:V:FRAC``."""
    parts = spec.split(":")
    head = parts[0]
    if head == "gaussian" and len(parts) == 2:
        return PriorKind("gaussian", sd=float(parts[1]))
    if head == "pointmass" and len(parts) == 2:
        return PriorKind("pointmass", value=float(parts[1]))
    if head == "sparse2pt" and len(parts) == 3:
        return PriorKind("sparse2pt", value=float(parts[1]), fraction=float(parts[2]))
    raise ValueError(f"malformed prior spec {spec!r}")
