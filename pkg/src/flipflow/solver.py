"""Time integration of the reduced flow on X_{p,q} and flip continuation.

The evolved quantity is the Calabi potential u(t, rho) on a fixed
rho-grid.  Its equation is

    du/dt = log[(a + u')^p (u')^q u''] - (q+1) rho + c(t),

with a = a(t) the [D_H]-coefficient of the evolving class and c(t) the
gauge constant pinning du/dt(0, t) = 0.  The boundary nodes are closed
by the Robin-type ghost relations u'' = u' at -R and u'' = b(t) - u' at
+R, with b(t) the cohomological [D_inf]-coefficient.

Two steppers are provided.  ``step`` is classical RK4 guarded by the
diffusion stability bound dt <= sigma h^2 min(u''); it is the reference
integrator for convergence studies but is unusable for full runs on
production grids, where min(u'') ~ b e^{-R} drives the admissible dt
below 1e-12.  ``step_implicit`` is backward Euler with a damped Newton
solve (tridiagonal Jacobian plus the rank-one gauge coupling, handled
by one Sherman-Morrison correction); it is unconditionally stable and
is the default scheme for runs to the singular time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from .cohomology import BundleModel, ClassPath, canonical_rates, singular_time
from .errors import (ConvexityLoss, NonPositiveDensity, NotAFlip, StepFailure,
                     StepRejected)
from .profiles import Grid, Profile, differentiate

__all__ = [
    "FlowPhase",
    "FlowState",
    "SolverConfig",
    "EventCause",
    "SingularEvent",
    "initial_state",
    "rhs",
    "gauge_constant",
    "step",
    "step_implicit",
    "run_until_singular",
    "flip_continue",
]

MAX_HALVINGS = 40
NEWTON_MAX_ITER = 30
NEWTON_BACKTRACKS = 30


class FlowPhase(enum.Enum):
    PRE_FLIP = "PreFlip"
    POST_FLIP = "PostFlip"


@dataclass(frozen=True)
class FlowState:
    """One time slice of the flow: class position, profile, gauge."""

    t: float
    model: BundleModel
    path: ClassPath
    profile: Profile
    c: float
    phase: FlowPhase = FlowPhase.PRE_FLIP

    @property
    def a(self) -> float:
        return self.path.a(self.t)

    @property
    def b(self) -> float:
        return self.path.b(self.t)


@dataclass(frozen=True)
class SolverConfig:
    """Stepper knobs.  All strictly positive; cfl_sigma <= 1/2."""

    dt_max: float = 2.5e-4
    cfl_sigma: float = 0.2
    eps_stop: float = 1e-3
    eps_floor: float = 1e-10
    output_stride: int = 20
    scheme: str = "implicit"  # "implicit" | "rk4"
    newton_tol: float = 1e-12

    def __post_init__(self) -> None:
        for name in ("dt_max", "cfl_sigma", "eps_stop", "eps_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.cfl_sigma > 0.5:
            raise ValueError(f"cfl_sigma must be <= 0.5, got {self.cfl_sigma}")
        if self.output_stride < 1:
            raise ValueError("output_stride must be >= 1")
        if self.scheme not in ("implicit", "rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class EventCause:
    kind: str  # "class_exhausted" | "convexity_loss" | "step_failure" | "window_end"
    component: str | None = None  # "a" | "b" | "both" for class_exhausted

    def __str__(self) -> str:
        if self.kind == "class_exhausted":
            return f"ClassExhausted({self.component})"
        return {"convexity_loss": "ConvexityLoss",
                "step_failure": "StepFailure",
                "window_end": "WindowEnd"}[self.kind]


@dataclass(frozen=True)
class SingularEvent:
    T_num: float
    cause: EventCause
    final_state: FlowState
    detail: str = ""


def initial_state(model: BundleModel, profile: Profile, a0: float, b0: float,
                  literal_rates: bool = False) -> FlowState:
    """Assemble the t = t0 flow state with its gauge constant."""
    path = singular_time(a0, b0, model, literal_rates=literal_rates)
    c = _gauge_from_arrays(profile, path.a(path.t0), model)
    return FlowState(t=path.t0, model=model, path=path, profile=profile, c=c)


def _gauge_from_arrays(profile: Profile, a: float, model: BundleModel) -> float:
    i0 = profile.grid.i_zero
    up0, upp0 = profile.up[i0], profile.upp[i0]
    if upp0 <= 0 or up0 <= 0 or a + up0 <= 0:
        raise NonPositiveDensity("density factors non-positive at rho = 0")
    return float(-math.log(upp0) - model.q * math.log(up0)
                 - model.p * math.log(a + up0))


def gauge_constant(state: FlowState) -> float:
    """c = -log u''(0) - q log u'(0) - p log(a + u'(0))."""
    return _gauge_from_arrays(state.profile, state.a, state.model)


def _rhs_arrays(up: np.ndarray, upp: np.ndarray, rho: np.ndarray, a: float,
                model: BundleModel, eps_floor: float,
                c: float | None = None) -> tuple[np.ndarray, float]:
    """Gauged right-hand side from derivative arrays.

    With c omitted, the gauge is taken as -f_raw at the center node,
    which pins the field to exactly zero there in floating point.
    """
    base = a + up
    if base.min() <= eps_floor or up.min() <= eps_floor or upp.min() <= eps_floor:
        raise NonPositiveDensity(
            "density factor at or below eps_floor "
            f"(min a+u'={base.min():.3e}, u'={up.min():.3e}, u''={upp.min():.3e})")
    p, q = model.p, model.q
    f = p * np.log(base) + q * np.log(up) + np.log(upp) - (q + 1) * rho
    i0 = rho.shape[0] // 2
    if c is None:
        c = -f[i0]
    return f + c, float(c)


def rhs(state: FlowState, eps_floor: float = 1e-10) -> np.ndarray:
    """du/dt field over the grid from the state's cached derivatives."""
    f, _ = _rhs_arrays(state.profile.up, state.profile.upp, state.profile.grid.rho,
                       state.a, state.model, eps_floor, c=state.c)
    return f


def _advance_state(state: FlowState, u_new: np.ndarray, t_new: float,
                   eps_floor: float) -> FlowState:
    b_new = state.path.b(t_new)
    profile = Profile.from_values(state.profile.grid, u_new, b_ref=b_new)
    if profile.upp.min() <= eps_floor:
        raise ConvexityLoss(
            f"u'' dropped to {profile.upp.min():.3e} at t={t_new:.6f}")
    c_new = _gauge_from_arrays(profile, state.path.a(t_new), state.model)
    return replace(state, t=t_new, profile=profile, c=c_new)


def step(state: FlowState, dt: float, config: SolverConfig = SolverConfig()) -> FlowState:
    """One classical RK4 step of u, guarded by the diffusion CFL bound.

    The class coefficients, the right-boundary reference b(t) and the
    gauge constant are all re-evaluated at each stage.  Raises
    StepRejected when dt exceeds sigma h^2 min(u''), ConvexityLoss when
    the updated profile loses strict convexity.
    """
    grid = state.profile.grid
    rho = grid.rho
    u = state.profile.u
    bound = config.cfl_sigma * grid.h ** 2 * float(state.profile.upp.min())
    if dt > bound:
        raise StepRejected(f"dt={dt:.3e} exceeds CFL bound {bound:.3e}")

    def stage(v: np.ndarray, t_s: float) -> np.ndarray:
        up, upp = differentiate(v, grid, b_ref=state.path.b(t_s))
        f, _ = _rhs_arrays(up, upp, rho, state.path.a(t_s), state.model,
                           config.eps_floor)
        return f

    k1 = stage(u, state.t)
    k2 = stage(u + 0.5 * dt * k1, state.t + 0.5 * dt)
    k3 = stage(u + 0.5 * dt * k2, state.t + 0.5 * dt)
    k4 = stage(u + dt * k3, state.t + dt)
    u_new = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return _advance_state(state, u_new, state.t + dt, config.eps_floor)


def _softlog(x: np.ndarray, delta: float) -> np.ndarray:
    """log(x) for x >= delta, C^2 quadratic extension below.

    Lets Newton iterates traverse the infeasible region smoothly; the
    extension never survives to a converged solution, whose density
    factors sit strictly above the floor.
    """
    out = np.log(np.maximum(x, delta))
    below = x < delta
    if np.any(below):
        z = (x[below] - delta) / delta
        out[below] += z - 0.5 * z * z
    return out


def _dsoftlog(x: np.ndarray, delta: float) -> np.ndarray:
    out = 1.0 / np.maximum(x, delta)
    below = x < delta
    if np.any(below):
        out[below] = (1.0 - (x[below] - delta) / delta) / delta
    return out


def _feasible_start(u: np.ndarray, grid: Grid, b_new: float,
                    eps_floor: float) -> np.ndarray:
    """Newton start with the right tail slaved to the new class value.

    b(t) decays faster than the boundary value u'(R) it anchors, so the
    previous potential is infeasible at +R for every fresh step (and
    grossly so at the flip restart).  The start replaces the far tail,
    from the last node where u'' clears a small threshold, by the exact
    solution of u'' = b_new - u' matched in value and slope; the
    evolution equation itself still relaxes against the true previous
    state.
    """
    up, upp = differentiate(u, grid, b_ref=b_new)
    margin = max(100.0 * eps_floor, 1e-9 * b_new)
    if upp.min() > eps_floor and (b_new - up[-1]) > margin:
        return u.copy()
    # Anchor where the curvature is healthy AND the slope still clears the
    # new class value; after a flip restart the whole right plateau sits
    # above b_new, so both conditions genuinely bind.
    thresh = 1e-3 * b_new
    eligible = np.where((upp[1:-1] >= thresh)
                        & (up[1:-1] <= b_new - 0.5 * thresh))[0]
    if eligible.size == 0:
        raise StepFailure("no feasible anchor for the boundary tail rebuild")
    i_star = int(eligible[-1]) + 1
    v = u.copy()
    s = grid.rho[i_star:] - grid.rho[i_star]
    v[i_star:] = (u[i_star] + b_new * s
                  - (b_new - up[i_star]) * (1.0 - np.exp(-s)))
    return v


def step_implicit(state: FlowState, dt: float,
                  config: SolverConfig = SolverConfig()) -> FlowState:
    """One backward-Euler step solved by Newton with softened logarithms.

    The Jacobian is tridiagonal except for the rank-one gauge coupling,
    which is folded in with a Sherman-Morrison correction around one
    two-column banded solve.  Inside the solve the logarithms carry a
    C^2 extension below the positivity floor, so iterates may traverse
    the infeasible region (the fresh boundary datum b(t+dt) always
    starts them there); the converged solution itself must be feasible
    or the step reports ConvexityLoss.  The center-node equation
    reduces exactly to u_new(0) = u_old(0), which is enforced verbatim
    so the gauge invariant survives accumulation over long runs.
    """
    grid = state.profile.grid
    rho = grid.rho
    h = grid.h
    n = grid.N
    i0 = grid.i_zero
    p, q = state.model.p, state.model.q
    t_new = state.t + dt
    a_new = state.path.a(t_new)
    b_new = state.path.b(t_new)
    u_old = state.profile.u
    kappa0 = 1.0 / (h * (1.0 + 0.5 * h))
    delta_floor = config.eps_floor

    v = _feasible_start(u_old, grid, b_new, config.eps_floor)
    scale = max(1.0, float(np.abs(u_old).max()))
    eps_mach = np.finfo(float).eps
    converged = False
    for _ in range(NEWTON_MAX_ITER):
        up, upp = differentiate(v, grid, b_ref=b_new)
        base = a_new + up
        f_raw = (p * _softlog(base, delta_floor) + q * _softlog(up, delta_floor)
                 + _softlog(upp, delta_floor) - (q + 1) * rho)
        resid = v - u_old - dt * (f_raw - f_raw[i0])
        # The attainable floor is set by second-difference cancellation in
        # u'' where the tail is flattest, entering the residual through
        # dt * dlog(u''); below that Newton chases rounding noise.
        noise_floor = (8.0 * dt * eps_mach * scale
                       / (h * h * max(float(upp.min()), delta_floor)))
        tol = config.newton_tol * scale + noise_floor
        if float(np.abs(resid).max()) <= tol:
            converged = True
            break

        alpha = p * _dsoftlog(base, delta_floor) + q * _dsoftlog(up, delta_floor)
        beta = _dsoftlog(upp, delta_floor)
        lower = np.empty(n)
        diag = np.empty(n)
        upper = np.empty(n)
        lower[1:-1] = -alpha[1:-1] / (2.0 * h) + beta[1:-1] / h**2
        diag[1:-1] = -2.0 * beta[1:-1] / h**2
        upper[1:-1] = alpha[1:-1] / (2.0 * h) + beta[1:-1] / h**2
        g_left = float(alpha[0] + beta[0])  # u'' = u' at the left closure
        diag[0] = -kappa0 * g_left
        upper[0] = kappa0 * g_left
        g_right = float(alpha[-1] - beta[-1])  # u'' = b - u' at the right
        diag[-1] = kappa0 * g_right
        lower[-1] = -kappa0 * g_right

        # Gauge gradient: c couples every row to the three center nodes.
        g = np.zeros(n)
        g[i0 - 1] = -beta[i0] / h**2 + alpha[i0] / (2.0 * h)
        g[i0] = 2.0 * beta[i0] / h**2
        g[i0 + 1] = -beta[i0] / h**2 - alpha[i0] / (2.0 * h)

        ab = np.zeros((3, n))
        ab[0, 1:] = -dt * upper[:-1]
        ab[1, :] = 1.0 - dt * diag
        ab[2, :-1] = -dt * lower[1:]
        rhs2 = np.column_stack([resid, np.ones(n)])
        sol = solve_banded((1, 1), ab, rhs2)
        x0, y = sol[:, 0], sol[:, 1]
        denom = 1.0 - dt * float(g @ y)
        step_vec = x0 + (dt * float(g @ x0) / denom) * y
        # cap pathological increments; Newton re-aims next iteration
        cap = 0.25 * scale
        worst = float(np.abs(step_vec).max())
        if worst > cap:
            step_vec *= cap / worst
        v = v - step_vec
    if not converged:
        raise StepFailure(f"Newton stalled at t={t_new:.6f}")

    v[i0] = u_old[i0]  # exact: the gauged equation at rho=0 is du/dt = 0
    return _advance_state(state, v, t_new, config.eps_floor)


def _halt_time(path: ClassPath, eps_stop: float) -> float:
    """Last time the evolving class keeps both coefficients >= eps_stop."""
    candidates = [path.t0 + (path.b0 - eps_stop) / path.rate_b]
    if path.rate_a > 0:
        candidates.append(path.t0 + (path.a0 - eps_stop) / path.rate_a)
    return min(candidates)


def run_until_singular(state: FlowState,
                       config: SolverConfig = SolverConfig(),
                       t_end: float | None = None,
                       sample_first: int = 0) -> tuple[list[FlowState], SingularEvent]:
    """Advance to the singular time (or t_end) and record sampled states.

    The run trusts the cohomological class line: stepping halts when
    min(a, b) would drop below eps_stop, shrinking dt geometrically on
    approach so the final accepted time lands within O(eps_stop) of the
    singular time.  Convexity loss or a failed step before that point is
    a numerical failure and is reported as the event cause, never
    absorbed.  ``sample_first`` forces the first few accepted steps into
    the sample list regardless of stride (used across flip restarts).
    """
    t_limit = _halt_time(state.path, config.eps_stop)
    if t_end is not None:
        t_limit = min(t_limit, t_end)
    dt_floor = max(1e-10, 1e-6 * config.dt_max)
    samples: list[FlowState] = [state]
    accepted = 0
    stepper = step_implicit if config.scheme == "implicit" else step

    while True:
        remaining = t_limit - state.t
        if remaining <= dt_floor:
            break
        dt = min(config.dt_max, max(0.5 * remaining, dt_floor))
        dt = min(dt, remaining)
        try:
            new_state = None
            for _ in range(MAX_HALVINGS + 1):
                try:
                    new_state = stepper(state, dt, config)
                    break
                except StepRejected:
                    dt *= 0.5
            if new_state is None:
                raise StepFailure(f"CFL halving exhausted at t={state.t:.6f}")
        except ConvexityLoss as exc:
            event = SingularEvent(T_num=state.t,
                                  cause=EventCause("convexity_loss"),
                                  final_state=state, detail=str(exc))
            return samples, event
        except (StepFailure, NonPositiveDensity) as exc:
            event = SingularEvent(T_num=state.t,
                                  cause=EventCause("step_failure"),
                                  final_state=state, detail=str(exc))
            return samples, event
        state = new_state
        accepted += 1
        tail_phase = dt < config.dt_max
        if (accepted % config.output_stride == 0 or tail_phase
                or accepted <= sample_first):
            samples.append(state)

    if samples[-1] is not state:
        samples.append(state)
    if t_end is not None and t_limit == t_end:
        cause = EventCause("window_end")
    else:
        cause = EventCause("class_exhausted", state.path.vanishing)
    event = SingularEvent(T_num=state.t, cause=cause, final_state=state)
    return samples, event


def flip_continue(event: SingularEvent,
                  config: SolverConfig = SolverConfig()) -> FlowState:
    """Restart the flow on the flip partner X_{q,p} after contraction of E.

    The potential array is reused bit for bit on the same rho-grid; the
    new class path grows a'(t) = (p-q)(t-T) from zero while b continues
    from b(T) with the swapped fiber rate p+2.  The first state is
    placed at T + 10 dt so the new base class is strictly positive.
    """
    state = event.final_state
    if event.cause.kind != "class_exhausted" or event.cause.component != "a":
        raise NotAFlip(f"cannot flip-continue a {event.cause} event")
    if state.model.q < 1:
        raise NotAFlip("q = 0 contracts a divisor, not a flip")

    T = state.path.T
    new_model = state.model.swapped()
    rate_a, rate_b = canonical_rates(new_model)
    b_T = state.path.b(T)
    post_path = ClassPath(a0=0.0, b0=b_T, rate_a=rate_a, rate_b=rate_b,
                          T=T + b_T / rate_b, vanishing="b", t0=T)
    delta = 10.0 * config.dt_max
    t1 = T + delta
    profile = Profile.from_values(state.profile.grid, state.profile.u,
                                  b_ref=post_path.b(t1))
    c1 = _gauge_from_arrays(profile, post_path.a(t1), new_model)
    return FlowState(t=t1, model=new_model, path=post_path, profile=profile,
                     c=c1, phase=FlowPhase.POST_FLIP)
