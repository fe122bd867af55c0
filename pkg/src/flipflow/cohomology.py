"""Kahler-class bookkeeping for the projective bundles X_{p,q}.

X_{p,q} is the P^{q+1}-bundle over P^p obtained by projectivizing
O + O(-1)^(q+1).  Its Neron-Severi space is spanned by the pullback
hyperplane class [D_H] and the big semi-ample class [D_inf]; a class
a[D_H] + b[D_inf] is Kahler iff a > 0 and b > 0.  Along the normalized
Ricci flow the class moves on a straight line whose slopes are the
negated canonical-class coefficients.  Everything in this module is
exact arithmetic on that line: decay rates, singular time, the volume
polynomial and the vanishing-pattern trichotomy.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import TimeOutOfRange

__all__ = [
    "BundleModel",
    "KahlerClass",
    "ClassPath",
    "SingularityKind",
    "SingularityClass",
    "canonical_rates",
    "paper_literal_rates",
    "class_at",
    "singular_time",
    "volume_poly",
    "volume_poly_coefficients",
    "volume_ratio",
    "classify_singularity",
]

# Relative tolerance for declaring the two roots of the class line equal
# (simultaneous extinction).  Exact ties only arise from constructed input.
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class BundleModel:
    """The bundle X_{p,q}: base P^p, fiber P^{q+1}, dimension n = p+q+1."""

    p: int
    q: int

    def __post_init__(self) -> None:
        if not (isinstance(self.p, int) and isinstance(self.q, int)):
            raise ValueError("p and q must be integers")
        if self.p < 1:
            raise ValueError(f"base dimension p must be >= 1, got {self.p}")
        if self.q < 0:
            raise ValueError(f"fiber rank offset q must be >= 0, got {self.q}")

    @property
    def n(self) -> int:
        return self.p + self.q + 1

    @property
    def supports_flip(self) -> bool:
        """Flip scenarios require 1 <= q < p."""
        return 1 <= self.q < self.p

    def swapped(self) -> "BundleModel":
        """The flip partner X_{q,p}."""
        return BundleModel(p=self.q, q=self.p)


@dataclass(frozen=True)
class KahlerClass:
    """Coefficients (a, b) in the basis ([D_H], [D_inf])."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if self.a < 0 or self.b < 0:
            raise ValueError(f"class coefficients must be >= 0, got ({self.a}, {self.b})")

    @property
    def is_kahler(self) -> bool:
        return self.a > 0 and self.b > 0


def canonical_rates(model: BundleModel) -> tuple[int, int]:
    """Linear decay rates of (a, b) along the flow, from adjunction.

    rate_a = p - q is the degree of -K on a line in the exceptional P^p
    (K_E = (K_X + det N)|_E with N = O(-1)^(q+1)); rate_b = q + 2 is the
    degree of -K on a line in the P^{q+1} fiber.
    """
    return model.p - model.q, model.q + 2


def paper_literal_rates(model: BundleModel) -> tuple[int, int]:
    """Alternate convention (p - q, p + 2), kept for side-by-side reports.

    Inconsistent with adjunction on the fiber and with the post-flip
    restart bookkeeping; exposed behind the paper-literal-rates flag and
    never mixed into the dynamics.
    """
    return model.p - model.q, model.p + 2


class SingularityKind(enum.Enum):
    FLIP = "Flip"
    COLLAPSE = "Collapse"
    EXTINCTION = "Extinction"


@dataclass(frozen=True)
class ClassPath:
    """Affine path (a(t), b(t)) = (a0, b0) - (t - t0) * (rate_a, rate_b).

    ``T`` is the first time >= t0 at which the path leaves the Kahler
    cone; ``vanishing`` records which coefficient(s) hit zero there.
    t0 = 0 for initial data; flip continuations are anchored at the
    singular time of the preceding phase.
    """

    a0: float
    b0: float
    rate_a: float
    rate_b: float
    T: float
    vanishing: str  # "a" | "b" | "both"
    t0: float = 0.0

    def a(self, t: float) -> float:
        return self.a0 - self.rate_a * (t - self.t0)

    def b(self, t: float) -> float:
        return self.b0 - self.rate_b * (t - self.t0)


@dataclass(frozen=True)
class SingularityClass:
    kind: SingularityKind
    ratio_exponent: int


def singular_time(a0: float, b0: float, model: BundleModel,
                  literal_rates: bool = False, t0: float = 0.0) -> ClassPath:
    """Build the class path from initial coefficients and tag its end.

    T is the least positive root among a(t) = 0 (only when rate_a > 0;
    for p = q the a-coefficient is constant) and b(t) = 0.  T is always
    finite since rate_b >= 2.
    """
    if a0 <= 0 or b0 <= 0:
        raise ValueError(f"initial class must be Kahler: a0={a0}, b0={b0}")
    rates = paper_literal_rates(model) if literal_rates else canonical_rates(model)
    rate_a, rate_b = rates
    t_b = b0 / rate_b
    t_a = a0 / rate_a if rate_a > 0 else math.inf
    if math.isfinite(t_a) and abs(t_a - t_b) <= TIE_RTOL * max(t_a, t_b):
        T, vanishing = 0.5 * (t_a + t_b), "both"
    elif t_a < t_b:
        T, vanishing = t_a, "a"
    else:
        T, vanishing = t_b, "b"
    return ClassPath(a0=a0, b0=b0, rate_a=rate_a, rate_b=rate_b,
                     T=t0 + T, vanishing=vanishing, t0=t0)


def class_at(path: ClassPath, t: float) -> KahlerClass:
    """Evaluate the path at time t in [t0, T]."""
    if t < path.t0 or t > path.T:
        raise TimeOutOfRange(f"t={t} outside [{path.t0}, {path.T}]")
    return KahlerClass(a=max(path.a(t), 0.0), b=max(path.b(t), 0.0))


def volume_poly_coefficients(model: BundleModel) -> dict[tuple[int, int], Fraction]:
    """Exact coefficients of V(a, b) = integral_0^b (a+s)^p s^q ds.

    Returned as {(i, j): c} for the monomial c * a^i * b^j.  Every
    monomial has i <= p, j >= q + 1 and i + j = n.
    """
    p, q = model.p, model.q
    coeffs: dict[tuple[int, int], Fraction] = {}
    for k in range(p + 1):
        j = q + 1 + k
        coeffs[(p - k, j)] = Fraction(math.comb(p, k), j)
    return coeffs


def volume_poly(model: BundleModel, cls: KahlerClass) -> float:
    """Ansatz volume V(a, b) = integral_0^b (a+s)^p s^q ds, in doubles.

    This is the push-forward of the Calabi volume form under s = u';
    strictly positive whenever b > 0.
    """
    a, b = cls.a, cls.b
    total = 0.0
    for (i, j), c in volume_poly_coefficients(model).items():
        total += float(c) * a**i * b**j
    return total


def classify_singularity(path: ClassPath, model: BundleModel) -> SingularityClass:
    """Trichotomy at T from the vanishing pattern of the class.

    The ratio exponent is the leading power of V(t) in (T - t): 0 for a
    flip (the volume survives), q + 1 for collapse onto the base, and
    n for extinction (V is homogeneous of degree n).  The vanishing
    pattern, not the literal limsup test, decides the kind; the ratio
    series is reported alongside and left to the caller to inspect.
    """
    if path.vanishing == "both":
        return SingularityClass(SingularityKind.EXTINCTION, model.n)
    if path.vanishing == "b":
        return SingularityClass(SingularityKind.COLLAPSE, model.q + 1)
    if model.q >= 1:
        return SingularityClass(SingularityKind.FLIP, 0)
    # q = 0: the exceptional locus is a divisor; a-vanishing still
    # contracts it with surviving volume, same exponent as a flip.
    return SingularityClass(SingularityKind.FLIP, 0)


def volume_ratio(path: ClassPath, model: BundleModel, t: float) -> float:
    """V(class_at(t)) / (T - t)^(p-q), the trichotomy diagnostic."""
    if t >= path.T:
        raise TimeOutOfRange(f"volume_ratio needs t < T={path.T}, got {t}")
    v = volume_poly(model, class_at(path, t))
    return v / (path.T - t) ** (model.p - model.q)
