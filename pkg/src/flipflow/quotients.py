"""Exact classification of the C*-quotient local models.

A weighted C* action on C^{m+l+2} with negative weights a_0..a_m on the
x-block and positive weights b_0..b_l on the y-block has two geometric
quotients: removing {x = 0} gives a bundle-like space over the weighted
projective space P^m_(a), removing {y = 0} the mirror over P^l_(b).
The pair is the local model of a divisorial contraction, a flip or a
flop depending only on (m, l) and the weight multisets.  Everything
here is exact integer arithmetic; weights are stored as magnitudes with
the sign convention carried by the block.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

from .errors import EmptyWeights

__all__ = [
    "QuotientWeights",
    "AdmissibilityReport",
    "Chart",
    "BundleDescription",
    "QuotientReport",
    "validate_weights",
    "charts",
    "classify",
    "upsilon",
]


@dataclass(frozen=True)
class QuotientWeights:
    """Positive integer weights: a for the x-block, b for the y-block."""

    a: tuple[int, ...]
    b: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.a or not self.b:
            raise EmptyWeights("both weight lists must be nonempty")
        for w in self.a + self.b:
            if not isinstance(w, int) or w < 1:
                raise ValueError(f"weights must be positive integers, got {w!r}")

    @classmethod
    def of(cls, a, b) -> "QuotientWeights":
        return cls(a=tuple(int(w) for w in a), b=tuple(int(w) for w in b))

    @property
    def m(self) -> int:
        return len(self.a) - 1

    @property
    def l(self) -> int:
        return len(self.b) - 1


@dataclass(frozen=True)
class AdmissibilityReport:
    basic: bool                 # gcd of all weights is 1
    strong: bool                # dropping any single weight keeps gcd 1
    offending_index: tuple[str, int] | None = None

    @property
    def ok(self) -> bool:
        return self.basic


def validate_weights(weights: QuotientWeights) -> AdmissibilityReport:
    """Check the gcd admissibility conditions.

    Basic: the full multiset a + b has gcd 1.  Strong: the gcd stays 1
    after deleting any one weight, which rules out quasi-reflections on
    every chart.  On strong failure the first offending (block, index)
    is reported.
    """
    full = weights.a + weights.b
    basic = gcd(*full) == 1 if len(full) > 1 else full[0] == 1
    strong = basic
    offender = None
    if basic:
        for block, values in (("a", weights.a), ("b", weights.b)):
            for i in range(len(values)):
                rest = [w for j, w in enumerate(values) if j != i]
                other = weights.b if block == "a" else weights.a
                g = gcd(*rest, *other) if (rest or other) else 0
                if g != 1:
                    strong = False
                    offender = (block, i)
                    break
            if offender:
                break
    return AdmissibilityReport(basic=basic, strong=strong,
                               offending_index=offender)


@dataclass(frozen=True)
class Chart:
    """Coordinate patch {x_i != 0} (or {y_j != 0}) of a quotient.

    The patch is C^{m+l+1} divided by the cyclic group of order
    ``group_order`` acting with ``residual_weights`` (the remaining
    weights reduced modulo the order; a documented interpretation of
    the patch description, which the source examples fix only case by
    case).  Smooth iff the group is trivial or acts trivially.
    """

    block: str
    index: int
    group_order: int
    residual_weights: tuple[int, ...]

    @property
    def smooth(self) -> bool:
        return self.group_order == 1 or all(w == 0 for w in self.residual_weights)


def _charts_one_side(own: tuple[int, ...], other: tuple[int, ...],
                     block: str) -> tuple[Chart, ...]:
    out = []
    for i, order in enumerate(own):
        rest = tuple(w % order for j, w in enumerate(own) if j != i)
        tail = tuple(w % order for w in other)
        out.append(Chart(block=block, index=i, group_order=order,
                         residual_weights=rest + tail))
    return tuple(out)


def charts(weights: QuotientWeights) -> tuple[tuple[Chart, ...], tuple[Chart, ...]]:
    """Orbifold charts of both quotients, x-side then y-side."""
    return (_charts_one_side(weights.a, weights.b, "a"),
            _charts_one_side(weights.b, weights.a, "b"))


@dataclass(frozen=True)
class BundleDescription:
    """Total space over the fixed locus when the structure is known.

    kind "sum_line_bundles": direct sum of O(twist) over projective
    space of dimension base_dim; kind "affine_space": C^dim.  None is
    reported when the weights leave a genuinely orbifold structure the
    classification does not resolve further.
    """

    kind: str
    base_dim: int = 0
    twists: tuple[int, ...] = ()
    dim: int = 0


@dataclass(frozen=True)
class QuotientReport:
    weights: QuotientWeights
    admissibility: AdmissibilityReport
    fixed_minus: tuple[int, ...]   # weights of P^m_(a)
    fixed_plus: tuple[int, ...]    # weights of P^l_(b)
    charts_minus: tuple[Chart, ...]
    charts_plus: tuple[Chart, ...]
    smooth_minus: bool
    smooth_plus: bool
    kind: str                      # DivisorialContraction | Flip | Flop
    bundle_minus: BundleDescription | None
    bundle_plus: BundleDescription | None


def _bundle_side(own: tuple[int, ...], other: tuple[int, ...]) -> BundleDescription | None:
    """Structure of the quotient with base weights ``own``, fiber ``other``."""
    if len(own) == 1:
        # base is a point: the total space is affine iff the C* is used up
        if own[0] == 1:
            return BundleDescription(kind="affine_space", dim=len(other))
        return None
    if all(w == 1 for w in own):
        return BundleDescription(kind="sum_line_bundles",
                                 base_dim=len(own) - 1,
                                 twists=tuple(-w for w in other))
    return None


def classify(weights: QuotientWeights) -> QuotientReport:
    """Full birational classification of the quotient pair.

    Divisorial contraction iff one block has a single weight (the
    exceptional locus is then a divisor), flop iff m = l with equal
    weight multisets, flip otherwise.  For unit x-weights the minus
    side is the explicit sum of line bundles O(-b_j) over P^m.
    """
    adm = validate_weights(weights)
    ch_minus, ch_plus = charts(weights)
    m, l = weights.m, weights.l
    if l == 0 or m == 0:
        kind = "DivisorialContraction"
    elif m == l and sorted(weights.a) == sorted(weights.b):
        kind = "Flop"
    else:
        kind = "Flip"
    bundle_minus = _bundle_side(weights.a, weights.b)
    bundle_plus = _bundle_side(weights.b, weights.a)
    return QuotientReport(
        weights=weights,
        admissibility=adm,
        fixed_minus=weights.a,
        fixed_plus=weights.b,
        charts_minus=ch_minus,
        charts_plus=ch_plus,
        smooth_minus=all(c.smooth for c in ch_minus),
        smooth_plus=all(c.smooth for c in ch_plus),
        kind=kind,
        bundle_minus=bundle_minus,
        bundle_plus=bundle_plus,
    )


def upsilon(weights: QuotientWeights, x_abs, y_abs) -> float:
    """The slice function (sum |x_i|^(2/a_i)) * (sum |y_j|^(2/b_j)).

    Invariant under the unitary part of the action; the unit sublevel
    set delimits the neighborhood on which the local comparison
    estimates operate.
    """
    x_abs = [float(v) for v in x_abs]
    y_abs = [float(v) for v in y_abs]
    if len(x_abs) != len(weights.a) or len(y_abs) != len(weights.b):
        raise ValueError("magnitude vectors must match weight dimensions")
    if any(v < 0 for v in x_abs + y_abs):
        raise ValueError("magnitudes must be non-negative")
    sx = sum(v ** (2.0 / w) for v, w in zip(x_abs, weights.a))
    sy = sum(v ** (2.0 / w) for v, w in zip(y_abs, weights.b))
    return sx * sy
