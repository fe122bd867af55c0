"""Calabi-symmetric metric profiles u(rho) on a truncated uniform grid.

A profile is admissible when u' > 0 and u'' > 0 everywhere and the two
tails match the compactification asymptotics: u'' ~ u' as rho -> -inf
(smoothness across the zero section) and u'' ~ b - u' as rho -> +inf
(smoothness across the infinity divisor for reference class value b).
On the truncated grid those asymptotics become Robin-type ghost-node
closures at the two boundary nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

__all__ = [
    "Grid",
    "Profile",
    "ValidationCheck",
    "ValidationReport",
    "Tolerances",
    "differentiate",
    "canonical_profile",
    "perturbed_profile",
    "cone_profile",
    "validate_calabi",
    "cone_scaling_check",
    "interp_cubic",
    "write_profile_csv",
]

# Width (in rho) of the near-boundary window over which the asymptotic
# residuals are measured with interior stencils.  Measuring next to, not
# at, the boundary keeps the check independent of the ghost closure.
RESIDUAL_WINDOW = 1.0


@dataclass(frozen=True)
class Grid:
    """Uniform nodes on [-R, R]; N odd so rho = 0 is a node."""

    R: float = 20.0
    N: int = 2001

    def __post_init__(self) -> None:
        if self.R < 10:
            raise ValueError(f"truncation radius R must be >= 10, got {self.R}")
        if self.N < 101:
            raise ValueError(f"node count N must be >= 101, got {self.N}")
        if self.N % 2 == 0:
            raise ValueError(f"node count N must be odd, got {self.N}")

    @property
    def h(self) -> float:
        return 2.0 * self.R / (self.N - 1)

    @property
    def i_zero(self) -> int:
        return (self.N - 1) // 2

    @cached_property
    def rho(self) -> np.ndarray:
        nodes = np.linspace(-self.R, self.R, self.N)
        nodes[self.i_zero] = 0.0  # gauge node must sit exactly at rho = 0
        nodes.setflags(write=False)
        return nodes


def differentiate(u: np.ndarray, grid: Grid,
                  b_ref: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Second-order u', u'' of node values u.

    Interior nodes use centered stencils.  With ``b_ref`` given, the two
    boundary nodes are closed by ghost values chosen so that u'' = u' at
    -R and u'' = b_ref - u' at +R (the discretized tail asymptotics).
    Without ``b_ref`` the boundary values come from one-sided
    second-order stencils, exact on quadratics at every node.
    """
    n = u.shape[0]
    if n < 5:
        raise ValueError("need at least 5 nodes to differentiate")
    h = grid.h
    up = np.empty_like(u)
    upp = np.empty_like(u)
    up[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    upp[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    if b_ref is None:
        up[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
        up[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
        upp[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / (h * h)
        upp[-1] = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / (h * h)
    else:
        # Ghost elimination: u'' = u' on the left collapses to a forward
        # difference, u'' = b - u' on the right to a backward one.
        k = 1.0 / (h * (1.0 + 0.5 * h))
        up[0] = k * (u[1] - u[0])
        upp[0] = up[0]
        up[-1] = (0.5 * b_ref * h + (u[-1] - u[-2]) / h) / (1.0 + 0.5 * h)
        upp[-1] = b_ref - up[-1]
    return up, upp


@dataclass(frozen=True)
class Profile:
    """Potential values on a grid with cached first/second derivatives.

    Immutable after construction; derivative caches are eager.  Closed
    forms (canonical, cone) install their analytic derivatives, which is
    what makes the tight closed-form checks downstream meaningful; flow
    states rebuilt from raw node values carry finite-difference caches.
    """

    grid: Grid
    u: np.ndarray
    up: np.ndarray
    upp: np.ndarray
    b_ref: float | None = None

    def __post_init__(self) -> None:
        for arr in (self.u, self.up, self.upp):
            if arr.shape != (self.grid.N,):
                raise ValueError("profile arrays must match the grid")
            arr.setflags(write=False)

    @classmethod
    def from_values(cls, grid: Grid, u: np.ndarray,
                    b_ref: float | None = None) -> "Profile":
        u = np.asarray(u, dtype=float).copy()
        up, upp = differentiate(u, grid, b_ref=b_ref)
        return cls(grid=grid, u=u, up=up, upp=upp, b_ref=b_ref)

    @classmethod
    def from_callables(cls, grid: Grid, f: Callable, fp: Callable, fpp: Callable,
                       b_ref: float | None = None) -> "Profile":
        rho = grid.rho
        return cls(grid=grid, u=f(rho), up=fp(rho), upp=fpp(rho), b_ref=b_ref)


def canonical_profile(b0: float, grid: Grid) -> Profile:
    """Closed-form admissible profile u = b0 * log(1 + e^rho).

    u' = b0 * sigma(rho) sweeps (0, b0) monotonically and both tail
    asymptotics hold with reference value b0; this is the stock initial
    datum for flow runs.  Uses log1p against overflow on the right tail.
    """
    if b0 <= 0:
        raise ValueError(f"b0 must be positive, got {b0}")

    def f(rho):
        return b0 * (np.logaddexp(0.0, rho))

    def fp(rho):
        sig = 1.0 / (1.0 + np.exp(-rho))
        return b0 * sig

    def fpp(rho):
        sig = 1.0 / (1.0 + np.exp(-rho))
        return b0 * sig * (1.0 - sig)

    return Profile.from_callables(grid, f, fp, fpp, b_ref=b0)


def perturbed_profile(b0: float, grid: Grid, amplitude: float,
                      seed: int = 0) -> Profile:
    """Canonical profile plus a small random mid-grid bump.

    The bump is a seeded combination of low-frequency modes damped at
    the tails, so the tail asymptotics survive; amplitudes large enough
    to break convexity are rejected.  Used to probe profile-independence
    of the singularity behavior.
    """
    rng = np.random.default_rng(seed)
    coeff = rng.uniform(-1.0, 1.0, size=3)
    rho = grid.rho
    envelope = 1.0 / np.cosh(rho / 3.0) ** 2
    bump = envelope * sum(c * np.cos((k + 1) * np.pi * rho / grid.R)
                          for k, c in enumerate(coeff))
    base = canonical_profile(b0, grid)
    u = base.u + amplitude * b0 * bump
    prof = Profile.from_values(grid, u, b_ref=b0)
    if prof.upp.min() <= 0 or prof.up.min() <= 0:
        raise ValueError(f"amplitude {amplitude} destroys admissibility")
    return prof


def cone_profile(gamma: float, grid: Grid) -> Profile:
    """Homogeneous cone potential u = e^(gamma*rho), gamma in (0, 1].

    Non-compact data: it satisfies u', u'' > 0 but no right-tail
    asymptote for any finite reference value.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")

    def f(rho):
        return np.exp(gamma * rho)

    return Profile.from_callables(grid, f,
                                  lambda r: gamma * f(r),
                                  lambda r: gamma * gamma * f(r),
                                  b_ref=None)


@dataclass(frozen=True)
class Tolerances:
    """Relative tolerances for admissibility checks."""

    eps_bc: float = 1e-6      # tail residuals
    eps_range: float = 1e-6   # u' range overshoot, relative to b_ref
    eps_positive: float = 0.0  # strict positivity margin


@dataclass(frozen=True)
class ValidationCheck:
    passed: bool
    violation: float = 0.0


@dataclass(frozen=True)
class ValidationReport:
    checks: dict[str, ValidationCheck] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [name for name, c in self.checks.items() if not c.passed]


def validate_calabi(profile: Profile, b_ref: float,
                    tol: Tolerances = Tolerances()) -> ValidationReport:
    """Check the discretized Kahler-cone conditions; never raises.

    Positivity and monotonicity of u', positivity of u'', the range
    0 < u' < b_ref (+tol), and the two tail residuals measured with
    interior stencils on the near-boundary windows.
    """
    up, upp = profile.up, profile.upp
    checks: dict[str, ValidationCheck] = {}

    checks["positive_up"] = ValidationCheck(
        bool(up.min() > tol.eps_positive), float(max(0.0, -up.min())))
    checks["positive_upp"] = ValidationCheck(
        bool(upp.min() > tol.eps_positive), float(max(0.0, -upp.min())))
    dup = np.diff(up)
    checks["monotone_up"] = ValidationCheck(
        bool(dup.min() > 0.0), float(max(0.0, -dup.min())))
    over = float(up[1:-1].max() - b_ref) if profile.grid.N > 2 else 0.0
    checks["range_up"] = ValidationCheck(over <= tol.eps_range * b_ref,
                                         max(0.0, over))

    rho = profile.grid.rho
    left = (rho <= -profile.grid.R + RESIDUAL_WINDOW)
    right = (rho >= profile.grid.R - RESIDUAL_WINDOW)
    left[0] = left[-1] = False
    right[0] = right[-1] = False
    with np.errstate(divide="ignore", invalid="ignore"):
        res_l = np.abs(upp[left] - up[left]) / np.abs(up[left])
    res_l = float(np.nanmax(res_l)) if res_l.size else 0.0
    res_r = float(np.max(np.abs(upp[right] - (b_ref - up[right]))) / b_ref) \
        if right.any() else 0.0
    checks["left_residual"] = ValidationCheck(res_l <= tol.eps_bc, res_l)
    checks["right_residual"] = ValidationCheck(res_r <= tol.eps_bc, res_r)
    return ValidationReport(checks=checks)


def interp_cubic(grid: Grid, values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Local 4-point Lagrange interpolation at query points inside the grid."""
    h = grid.h
    pos = (np.asarray(x, dtype=float) + grid.R) / h
    base = np.clip(np.floor(pos).astype(int) - 1, 0, grid.N - 4)
    t = pos - base  # offset from the leftmost stencil node, in cells
    w0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0
    w1 = t * (t - 2.0) * (t - 3.0) / 2.0
    w2 = -t * (t - 1.0) * (t - 3.0) / 2.0
    w3 = t * (t - 1.0) * (t - 2.0) / 6.0
    return (w0 * values[base] + w1 * values[base + 1]
            + w2 * values[base + 2] + w3 * values[base + 3])


def cone_scaling_check(cone: Profile, gamma: float, s: float) -> float:
    """Max relative defect of the dilation identity u(rho + 2 log s) = s^(2 gamma) u(rho).

    Shifted points that stay on the grid are evaluated by cubic
    interpolation, so an exact cone returns interpolation error only.
    The defect is measured relative to the dilated potential; on the
    exponential profiles the relative interpolation error is
    rho-uniform, which is what makes a grid-wide tolerance meaningful.
    """
    if s <= 0:
        raise ValueError(f"dilation factor must be positive, got {s}")
    shift = 2.0 * np.log(s)
    rho = cone.grid.rho
    keep = (rho + shift >= -cone.grid.R) & (rho + shift <= cone.grid.R)
    shifted = interp_cubic(cone.grid, cone.u, rho[keep] + shift)
    target = s ** (2.0 * gamma) * cone.u[keep]
    return float(np.max(np.abs(shifted - target) / np.abs(target)))


def write_profile_csv(profile: Profile, path) -> None:
    """Snapshot export with columns rho,u,up,upp at 17 significant digits."""
    rows = ["rho,u,up,upp"]
    for r, u, up, upp in zip(profile.grid.rho, profile.u, profile.up, profile.upp):
        rows.append(f"{r:.17g},{u:.17g},{up:.17g},{upp:.17g}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
