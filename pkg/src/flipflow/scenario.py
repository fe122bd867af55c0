"""Flip-scenario orchestration: runs, verdict evaluation, artifacts.

A flip scenario is the pre-flip run to the singular time, the restart
on the flip partner, and the post-flip run over a fixed window, with
the quantitative estimates evaluated on the sampled trajectory.  Each
estimate becomes a named verdict; the mandatory ones gate the CLI exit
code, the advisory ones are reported only.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .cohomology import (BundleModel, ClassPath, SingularityClass,
                         SingularityKind, class_at, classify_singularity,
                         paper_literal_rates, singular_time, volume_poly)
from .config import ScenarioConfig
from .diagnostics import (density_envelope, exceptional_diameter,
                          fit_left_exponent, profile_volume, radial_length)
from .errors import ConfigError, DegenerateWindow
from .profiles import (Grid, Profile, Tolerances, canonical_profile,
                       perturbed_profile, validate_calabi, write_profile_csv)
from .solver import (FlowState, SingularEvent, SolverConfig, flip_continue,
                     initial_state, run_until_singular)

__all__ = [
    "Verdict",
    "ScenarioResult",
    "build_initial_state",
    "run_simulation",
    "run_flip_scenario",
    "trajectory_rows",
    "write_trajectory_csv",
    "write_summary_json",
    "write_artifacts",
]

TRAJECTORY_COLUMNS = ("t", "a", "b", "V_poly", "V_profile", "ratio",
                      "up_max", "upp_over_up_max", "exc_diam", "fiber_len")

# Defaults wired to the quantitative estimates: flip runs must track the
# class line deep enough for the diameter-decay ratio test, hence the
# tighter stop threshold than the generic solver default.
FLIP_EPS_STOP = 1e-5
SIM_EPS_STOP = 1e-3

MANDATORY_VERDICTS = ("volume_identity", "gauge", "max_principle", "rate_b",
                      "exc_diam_decay", "post_flip_positivity",
                      "post_flip_left_exponent")


@dataclass(frozen=True)
class Verdict:
    passed: bool
    mandatory: bool
    margin: float
    detail: str


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    model: BundleModel
    path: ClassPath
    classification: SingularityClass
    pre_samples: list[FlowState]
    event: SingularEvent
    post_path: ClassPath | None = None
    post_samples: list[FlowState] = field(default_factory=list)
    verdicts: dict[str, Verdict] = field(default_factory=dict)
    solver_failed: bool = False

    @property
    def exit_code(self) -> int:
        if self.solver_failed:
            return 3
        failing = [name for name in MANDATORY_VERDICTS
                   if name in self.verdicts and not self.verdicts[name].passed]
        return 1 if failing else 0

    def failing_mandatory(self) -> list[str]:
        return [name for name in MANDATORY_VERDICTS
                if name in self.verdicts and not self.verdicts[name].passed]


def build_initial_state(cfg: ScenarioConfig) -> FlowState:
    """Initial flow state from a scenario config; cone data is rejected."""
    model = BundleModel(p=cfg.p, q=cfg.q)
    grid = Grid(R=cfg.grid_R, N=cfg.grid_N)
    if cfg.profile.kind == "canonical":
        prof = canonical_profile(cfg.b0, grid)
    elif cfg.profile.kind == "perturbed":
        prof = perturbed_profile(cfg.b0, grid, cfg.profile.amplitude,
                                 seed=cfg.seed)
    else:
        raise ConfigError("invalid field 'profile.kind': cone profiles are "
                          "non-compact data and cannot seed a compact run")
    return initial_state(model, prof, cfg.a0, cfg.b0)


def _solver_config(cfg: ScenarioConfig, eps_stop: float) -> SolverConfig:
    return SolverConfig(dt_max=cfg.dt_max, cfl_sigma=cfg.cfl_sigma,
                        eps_stop=eps_stop, eps_floor=cfg.eps_floor,
                        output_stride=cfg.output_stride, scheme=cfg.scheme)


def run_simulation(cfg: ScenarioConfig) -> ScenarioResult:
    """Run the flow to its singular time without continuation."""
    state = build_initial_state(cfg)
    solver_cfg = _solver_config(cfg, cfg.eps_stop or SIM_EPS_STOP)
    samples, event = run_until_singular(state, solver_cfg)
    cls = classify_singularity(state.path, state.model)
    failed = event.cause.kind != "class_exhausted"
    return ScenarioResult(config=cfg, model=state.model, path=state.path,
                          classification=cls, pre_samples=samples, event=event,
                          solver_failed=failed)


def run_flip_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Full surgical-flip scenario with verdicts on every tracked estimate."""
    state = build_initial_state(cfg)
    cls = classify_singularity(state.path, state.model)
    if cls.kind is not SingularityKind.FLIP or not state.model.supports_flip:
        raise ConfigError(f"config classifies as {cls.kind.value}, not Flip")

    solver_cfg = _solver_config(cfg, cfg.eps_stop or FLIP_EPS_STOP)
    pre_samples, event = run_until_singular(state, solver_cfg)
    result = ScenarioResult(config=cfg, model=state.model, path=state.path,
                            classification=cls, pre_samples=pre_samples,
                            event=event)
    if event.cause.kind != "class_exhausted" \
            or event.T_num < state.path.T - 5e-3:
        result.solver_failed = True
        return result

    restart = flip_continue(event, solver_cfg)
    post_samples, post_event = run_until_singular(
        restart, solver_cfg, t_end=state.path.T + cfg.t_post, sample_first=5)
    result.post_path = restart.path
    result.post_samples = post_samples
    if post_event.cause.kind not in ("window_end", "class_exhausted"):
        result.solver_failed = True
        return result
    result.verdicts = _evaluate_verdicts(result)
    return result


# ---------------------------------------------------------------------------
# verdict evaluation


def _identity_error(state: FlowState) -> float:
    v_poly = volume_poly(state.model, class_at(state.path, state.t))
    return abs(profile_volume(state) - v_poly) / v_poly


def _fit_slope(ts: list[float], ys: list[float]) -> float:
    slope, _ = np.polyfit(np.asarray(ts), np.asarray(ys), 1)
    return float(slope)


def _evaluate_verdicts(res: ScenarioResult) -> dict[str, Verdict]:
    verdicts: dict[str, Verdict] = {}
    T = res.path.T
    model = res.model
    q2 = model.q + 2
    p2 = model.p + 2
    pre, post = res.pre_samples, res.post_samples
    restart_t = post[0].t
    post_settled = [s for s in post
                    if s.t > restart_t + 3.5 * res.config.dt_max]

    # volume identity, pre-flip everywhere and post-flip once settled
    errs = [_identity_error(s) for s in pre]
    errs += [_identity_error(s) for s in post_settled]
    worst = max(errs)
    verdicts["volume_identity"] = Verdict(
        worst <= 1e-3, True, 1e-3 - worst,
        f"max relative identity error {worst:.3e} (t=0: {errs[0]:.3e})")

    # gauge: u(0, t) pinned over the whole scenario
    i0 = pre[0].profile.grid.i_zero
    u00 = pre[0].profile.u[i0]
    drift = max(abs(s.profile.u[i0] - u00) for s in pre + post)
    tol = 1e-8 * abs(u00) + 1e-10
    verdicts["gauge"] = Verdict(drift <= tol, True, tol - drift,
                                f"max |u(0,t) - u(0,0)| = {drift:.3e}")

    # maximum principle for u''/u' across the flip
    init_ratio = float(np.max(pre[0].profile.upp / pre[0].profile.up))
    cap = 1.05 * max(1.0, init_ratio)
    worst_ratio = max(float(np.max(s.profile.upp / s.profile.up))
                      for s in pre + post)
    verdicts["max_principle"] = Verdict(
        worst_ratio <= cap, True, cap - worst_ratio,
        f"max u''/u' = {worst_ratio:.6f} vs cap {cap:.6f}")

    # boundary class-rate measurement against the expected convention
    literal = res.config.flags.paper_literal_rates
    exp_pre = -(paper_literal_rates(model)[1] if literal else q2)
    exp_post = -(paper_literal_rates(model.swapped())[1] if literal else p2)
    window = [s for s in pre if 0.05 * T <= s.t <= 0.95 * T]
    slope_pre = _fit_slope([s.t for s in window],
                           [float(s.profile.up[-1]) for s in window])
    settle = [s for s in post_settled if s.t >= restart_t + 0.02]
    slope_post = _fit_slope([s.t for s in settle],
                            [float(s.profile.up[-1]) for s in settle])
    ok_pre = abs(slope_pre - exp_pre) <= 0.05 * abs(exp_pre)
    ok_post = abs(slope_post - exp_post) <= 0.05 * abs(exp_post)
    verdicts["rate_b"] = Verdict(
        ok_pre and ok_post, True,
        min(0.05 * abs(exp_pre) - abs(slope_pre - exp_pre),
            0.05 * abs(exp_post) - abs(slope_post - exp_post)),
        f"measured d/dt u'(R) pre {slope_pre:.4f} (expected {exp_pre}), "
        f"post {slope_post:.4f} (expected {exp_post})")

    # exceptional-set collapse faster than the cube-root envelope
    late = [s for s in pre if s.t >= 0.8 * T and s.t < T]
    ratios = [exceptional_diameter(s) / (T - s.t) ** (1.0 / 3.0) for s in late]
    diffs = np.diff(ratios)
    monotone = bool(np.all(diffs <= 1e-9 * ratios[0]))
    final_frac = ratios[-1] / ratios[0]
    verdicts["exc_diam_decay"] = Verdict(
        monotone and final_frac <= 0.2, True, 0.2 - final_frac,
        f"ratio falls to {final_frac:.4f} of its 0.8T value; "
        f"monotone={monotone}")

    # post-flip smoothing within three accepted steps
    step3 = post[3] if len(post) > 3 else post[-1]
    rep3 = validate_calabi(step3.profile, step3.b,
                           Tolerances(eps_bc=1e-3, eps_range=1e-3))
    min_upp = float(step3.profile.upp.min())
    first_ok = next((k for k in (1, 2, 3) if len(post) > k
                     and post[k].profile.upp.min() > 0
                     and validate_calabi(post[k].profile, post[k].b,
                                         Tolerances(1e-3, 1e-3)).ok), None)
    verdicts["post_flip_positivity"] = Verdict(
        min_upp > 0 and rep3.ok, True, min_upp,
        f"min u'' = {min_upp:.3e} after 3 steps; validation "
        f"{'passes' if rep3.ok else 'fails: ' + ','.join(rep3.failed())}; "
        f"first admissible step: {first_ok}")

    # post-flip left-tail decay exponent (fiber-rank fraction of dimension)
    target = (model.q + 1) / model.n - 0.05
    try:
        slope_left = fit_left_exponent(post[-1].profile)
        ok_exp = slope_left >= target
        detail = f"fitted exponent {slope_left:.4f} >= target {target:.4f}"
    except DegenerateWindow as exc:
        slope_left, ok_exp, detail = math.nan, False, str(exc)
    verdicts["post_flip_left_exponent"] = Verdict(
        ok_exp, True, slope_left - target, detail)

    # advisory: pre-flip left exponent at the contraction limit
    try:
        slope_pre_left = fit_left_exponent(pre[-1].profile)
        verdicts["pre_flip_left_exponent"] = Verdict(
            slope_pre_left >= target, False, slope_pre_left - target,
            f"fitted exponent {slope_pre_left:.4f} at T_num")
    except DegenerateWindow as exc:
        verdicts["pre_flip_left_exponent"] = Verdict(False, False, math.nan,
                                                     str(exc))

    # advisory: volume continuity across the hand-off, Lipschitz in the
    # restart offset along the post-flip class line
    v_T = volume_poly(model, class_at(res.path, T))
    v_1 = volume_poly(model.swapped(), class_at(res.post_path, restart_t))
    delta = restart_t - T
    eps = 1e-6
    lip = abs(volume_poly(model.swapped(), class_at(res.post_path, restart_t + eps))
              - volume_poly(model.swapped(), class_at(res.post_path, restart_t - eps))
              ) / (2 * eps)
    bound = 2.0 * lip * delta
    gap = abs(v_T - v_1)
    verdicts["volume_continuity"] = Verdict(
        gap <= bound, False, bound - gap,
        f"|V(T) - V(T+delta)| = {gap:.4e} vs Lipschitz bound {bound:.4e} "
        f"(L = {lip:.1f}, delta = {delta:.2e})")

    # advisory: post-flip volume-density envelope with frozen constant
    def density_ratio(s: FlowState) -> float:
        dens = ((s.a + s.profile.up) ** s.model.p
                * s.profile.up ** s.model.q * s.profile.upp)
        return float(np.max(dens / density_envelope(s)))

    frozen_c = density_ratio(post[1]) if len(post) > 1 else density_ratio(post[0])
    later = post[2:] if len(post) > 2 else []
    worst_density = max((density_ratio(s) for s in later), default=0.0)
    verdicts["density_bound"] = Verdict(
        worst_density <= frozen_c * (1.0 + 1e-9), False,
        frozen_c - worst_density,
        f"max density/envelope {worst_density:.4e} vs frozen C {frozen_c:.4e}")

    return verdicts


# ---------------------------------------------------------------------------
# artifacts


def trajectory_rows(res: ScenarioResult) -> list[tuple[float, ...]]:
    """Time-series rows in the fixed column order."""
    rows = []
    exponent = res.model.p - res.model.q
    T = res.path.T
    for state in list(res.pre_samples) + list(res.post_samples):
        cls = class_at(state.path, state.t)
        v_poly = volume_poly(state.model, cls)
        v_prof = profile_volume(state)
        ratio = v_poly / abs(T - state.t) ** exponent if state.t != T else math.inf
        prof = state.profile
        rows.append((state.t, cls.a, cls.b, v_poly, v_prof, ratio,
                     float(prof.up.max()), float(np.max(prof.upp / prof.up)),
                     exceptional_diameter(state),
                     radial_length(prof, -prof.grid.R, prof.grid.R)))
    return rows


def write_trajectory_csv(path, rows) -> None:
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _path_dict(path: ClassPath) -> dict:
    return {"a0": path.a0, "b0": path.b0, "rate_a": path.rate_a,
            "rate_b": path.rate_b, "T": path.T, "vanishing": path.vanishing,
            "t0": path.t0}


def summary_dict(res: ScenarioResult) -> dict:
    out = {
        "config": asdict(res.config),
        "model": {"p": res.model.p, "q": res.model.q, "n": res.model.n},
        "class_path": _path_dict(res.path),
        "classification": {"kind": res.classification.kind.value,
                           "ratio_exponent": res.classification.ratio_exponent},
        "event": {"T_num": res.event.T_num, "cause": str(res.event.cause),
                  "detail": res.event.detail},
        "post_path": _path_dict(res.post_path) if res.post_path else None,
        "verdicts": {name: {"passed": v.passed, "mandatory": v.mandatory,
                            "margin": v.margin, "detail": v.detail}
                     for name, v in sorted(res.verdicts.items())},
        "failing_mandatory": res.failing_mandatory(),
        "solver_failed": res.solver_failed,
        "exit_code": res.exit_code,
    }
    return out


def write_summary_json(path, res: ScenarioResult) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(summary_dict(res), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_artifacts(res: ScenarioResult, out_dir) -> None:
    """Trajectory CSV, JSON summary, and optional profile snapshots."""
    os.makedirs(out_dir, exist_ok=True)
    write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"),
                         trajectory_rows(res))
    write_summary_json(os.path.join(out_dir, "summary.json"), res)
    if res.config.flags.emit_snapshots:
        samples = list(res.pre_samples) + list(res.post_samples)
        for k, state in enumerate(samples):
            write_profile_csv(state.profile,
                              os.path.join(out_dir, f"snapshot_{k:05d}.csv"))
