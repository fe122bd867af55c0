"""Geometric quantities and estimate verifiers computed from profiles.

Lengths and diameters use the Riemannian convention ds^2 = 2 * (Kahler
coefficients), fixed once so the closed forms are unambiguous: a fiber
ray has length element sqrt(u''/2) drho and the Fubini-Study diameter
is pi/sqrt(2) in every dimension (realized along a projective line).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWindow, NonPositiveDensity
from .profiles import Profile, Tolerances, ValidationReport, validate_calabi
from .solver import FlowPhase, FlowState

__all__ = [
    "FS_DIAMETER",
    "MetricEigenvalues",
    "metric_eigenvalues",
    "radial_length",
    "fs_diameter",
    "exceptional_diameter",
    "neck_diameter",
    "fit_left_exponent",
    "profile_volume",
    "EstimateVerdicts",
    "estimate_suite",
    "density_envelope",
    "RicciModification",
    "ricci_modify",
]

# Diameter of (P^p, theta) under ds^2 = 2 theta, independent of p.
FS_DIAMETER = math.pi / math.sqrt(2.0)


def fs_diameter(p: int) -> float:
    if p < 0:
        raise ValueError("dimension must be non-negative")
    return FS_DIAMETER


@dataclass(frozen=True)
class MetricEigenvalues:
    """Ansatz metric eigenvalue fields: P^p base, fiber sphere, fiber radial."""

    base: np.ndarray    # a + u'
    sphere: np.ndarray  # u'
    radial: np.ndarray  # u''


def metric_eigenvalues(state: FlowState) -> MetricEigenvalues:
    prof = state.profile
    return MetricEigenvalues(base=state.a + prof.up, sphere=prof.up.copy(),
                             radial=prof.upp.copy())


def _cumulative_length(profile: Profile) -> np.ndarray:
    integrand = np.sqrt(np.maximum(profile.upp, 0.0) / 2.0)
    h = profile.grid.h
    out = np.zeros(profile.grid.N)
    out[1:] = np.cumsum(0.5 * h * (integrand[1:] + integrand[:-1]))
    return out


def radial_length(profile: Profile, rho1: float, rho2: float) -> float:
    """Length of a fiber ray between rho1 and rho2: int sqrt(u''/2) drho.

    Composite trapezoid accumulated once over the grid; off-node
    endpoints interpolate the cumulative, which keeps the quadrature
    exactly additive over subdivisions.
    """
    R = profile.grid.R
    if not (-R <= rho1 <= rho2 <= R):
        raise ValueError(f"need -R <= rho1 <= rho2 <= R, got ({rho1}, {rho2})")
    cum = _cumulative_length(profile)
    rho = profile.grid.rho
    return float(np.interp(rho2, rho, cum) - np.interp(rho1, rho, cum))


def exceptional_diameter(state: FlowState) -> float:
    """Diameter of the exceptional P^p under the evolving metric.

    The restriction of the ansatz metric to the zero section is
    (a + u'(-inf)) theta with u'(-inf) = 0 identically for admissible
    data, so the diameter is exactly sqrt(a) * D_FS.  Substituting the
    truncated boundary value u'(-R) for u'(-inf) would pollute the
    late-time decay with the cone's trace at the grid edge (~4e-5 for
    the stock flip path), which is pure truncation slop.
    """
    return math.sqrt(max(state.a, 0.0)) * FS_DIAMETER


def neck_diameter(state: FlowState, rho1: float) -> float:
    """Upper diameter proxy for the sublevel set {rho <= rho1}.

    Radial reach from -R plus the two slice diameters at rho1 (base P^p
    at a + u', fiber sphere at u').  Monotone non-decreasing in rho1.
    """
    prof = state.profile
    up1 = float(np.interp(rho1, prof.grid.rho, prof.up))
    reach = radial_length(prof, -prof.grid.R, rho1)
    return (reach + math.sqrt(max(state.a + up1, 0.0)) * FS_DIAMETER
            + math.sqrt(max(up1, 0.0)) * FS_DIAMETER)


def fit_left_exponent(profile: Profile,
                      window: tuple[float, float] | None = None) -> float:
    """Least-squares slope of log u' against rho on the left window.

    Defaults to [-R, -R/2].  The slope of the far tail identifies the
    decay exponent: 1 for compactifiable data, gamma for cone data.
    """
    R = profile.grid.R
    lo, hi = window if window is not None else (-R, -R / 2.0)
    mask = (profile.grid.rho >= lo) & (profile.grid.rho <= hi)
    up = profile.up[mask]
    if mask.sum() < 2 or np.any(up <= 0.0) or not np.all(np.isfinite(np.log(up))):
        raise DegenerateWindow(f"u' not positive/finite on [{lo}, {hi}]")
    slope, _ = np.polyfit(profile.grid.rho[mask], np.log(up), 1)
    return float(slope)


def profile_volume(state: FlowState) -> float:
    """Trapezoid of the volume density (a+u')^p (u')^q u'' over the grid.

    By the change of variables s = u' this equals V(a, u'(R)) up to
    quadrature and truncation error; checked against the closed form as
    a running solver invariant.
    """
    prof = state.profile
    dens = ((state.a + prof.up) ** state.model.p * prof.up ** state.model.q
            * prof.upp)
    return float(np.trapz(dens, dx=prof.grid.h))


def density_envelope(state: FlowState) -> np.ndarray:
    """Post-flip volume-density envelope e^{-(q-p)rho} (1+e^rho)^p e^{(q+1)rho}.

    Written for the current model labels (p, q); on the flip partner
    these are the swapped labels of the contracted side.
    """
    rho = state.profile.grid.rho
    p, q = state.model.p, state.model.q
    # log-space evaluation: the three factors overflow individually at R=20
    return np.exp(-(q - p) * rho + p * np.logaddexp(0.0, rho) + (q + 1) * rho)


@dataclass(frozen=True)
class EstimateVerdicts:
    ratio_bound: bool
    ratio_margin: float
    density_bound: bool | None
    density_margin: float | None
    base_bound: bool
    base_margin: float

    @property
    def ok(self) -> bool:
        checks = [self.ratio_bound, self.base_bound]
        if self.density_bound is not None:
            checks.append(self.density_bound)
        return all(checks)


def estimate_suite(state: FlowState, ratio_cap: float | None = None,
                   frozen_density_const: float | None = None,
                   class_sum: float | None = None) -> EstimateVerdicts:
    """Named a-priori-estimate verdicts with measured margins.

    (i) sharpened ratio bound: max u''/u' below the running cap,
        defaulting to the normalized bound 1.05 when the caller tracks
        no history (callers with a trajectory pass 1.05 * max(1, initial));
    (ii) post-flip density bound against the frozen envelope constant,
        skipped pre-flip or when no constant has been frozen yet;
    (iii) base eigenvalue bound a + u' <= a0 + b0.
    """
    prof = state.profile
    ratio = float(np.max(prof.upp / prof.up))
    cap = ratio_cap if ratio_cap is not None else 1.05
    verdict_i = ratio <= cap

    verdict_ii = None
    margin_ii = None
    if frozen_density_const is not None and state.phase is FlowPhase.POST_FLIP:
        dens = ((state.a + prof.up) ** state.model.p
                * prof.up ** state.model.q * prof.upp)
        ratio_ii = float(np.max(dens / density_envelope(state)))
        margin_ii = frozen_density_const - ratio_ii
        verdict_ii = ratio_ii <= frozen_density_const * (1.0 + 1e-9)

    if class_sum is None:
        class_sum = state.path.a0 + state.path.b0
    base_max = float(np.max(state.a + prof.up))
    verdict_iii = base_max <= class_sum * (1.0 + 1e-12)

    return EstimateVerdicts(
        ratio_bound=bool(verdict_i), ratio_margin=cap - ratio,
        density_bound=verdict_ii, density_margin=margin_ii,
        base_bound=bool(verdict_iii), base_margin=class_sum - base_max)


@dataclass(frozen=True)
class RicciModification:
    a: float
    b_ref: float
    profile: Profile
    report: ValidationReport


def ricci_modify(state: FlowState, eps: float,
                 eps_floor: float = 1e-10) -> RicciModification:
    """The metric minus eps times its Ricci form, in ansatz coordinates.

    The Ricci potential of the ansatz metric is -psi with
    psi = log[(a+u')^p (u')^q u''] - (q+1) rho, up to base classes that
    shift (a, b) by eps times the canonical rates.  Validity of the
    result for the given eps is reported, not asserted: smallness is
    exactly what the smooth-resolution statement claims, so a large eps
    failing validation is an expected recorded outcome.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    prof = state.profile
    p, q = state.model.p, state.model.q
    base = state.a + prof.up
    if base.min() <= eps_floor or prof.up.min() <= eps_floor \
            or prof.upp.min() <= eps_floor:
        raise NonPositiveDensity("state density not strictly positive")
    psi = (p * np.log(base) + q * np.log(prof.up) + np.log(prof.upp)
           - (q + 1) * prof.grid.rho)
    a_mod = state.a + eps * (p - q)
    b_mod = state.b + eps * (q + 2)
    modified = Profile.from_values(prof.grid, prof.u + eps * psi, b_ref=b_mod)
    report = validate_calabi(modified, b_mod,
                             Tolerances(eps_bc=1e-3, eps_range=1e-3))
    return RicciModification(a=a_mod, b_ref=b_mod, profile=modified,
                             report=report)
