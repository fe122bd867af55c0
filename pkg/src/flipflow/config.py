"""Scenario configuration: JSON schema, defaults and strict validation.

Unknown keys are rejected at every level and validation errors name the
offending field with its dotted path, so golden configs stay honest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["ProfileChoice", "FlagSet", "ScenarioConfig", "parse_config", "load_config"]

_SOLVER_KEYS = {"dt_max", "cfl_sigma", "eps_stop", "eps_floor",
                "output_stride", "scheme"}


@dataclass(frozen=True)
class ProfileChoice:
    kind: str = "canonical"      # canonical | perturbed | cone
    amplitude: float = 0.02      # perturbed only
    gamma: float = 0.5           # cone only


@dataclass(frozen=True)
class FlagSet:
    paper_literal_rates: bool = False
    emit_snapshots: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    p: int = 3
    q: int = 1
    a0: float = 2.0
    b0: float = 9.0
    grid_R: float = 20.0
    grid_N: int = 2001
    dt_max: float = 2.5e-4
    cfl_sigma: float = 0.2
    eps_stop: float | None = None   # None: 1e-5 for flip runs, 1e-3 otherwise
    eps_floor: float = 1e-10
    output_stride: int = 20
    scheme: str = "implicit"
    t_post: float = 0.2
    profile: ProfileChoice = field(default_factory=ProfileChoice)
    flags: FlagSet = field(default_factory=FlagSet)
    out_dir: str = "out"
    seed: int = 0


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"invalid field {name!r}: {message}")


def _take(mapping: dict, section: str, allowed: set[str]) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        key = sorted(unknown)[0]
        path = f"{section}.{key}" if section else key
        raise ConfigError(f"unknown key {path!r}")


def _number(mapping: dict, section: str, key: str, default, positive=True):
    value = mapping.get(key, default)
    name = f"{section}.{key}" if section else key
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             name, "must be a number")
    if positive:
        _require(value > 0, name, "must be strictly positive")
    return value


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a JSON scenario document.

    Defaults fill in every optional section; parse errors carry the
    line/column from the JSON decoder, validation errors the dotted
    field name.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigError("top-level config must be a JSON object")
    _take(doc, "", {"model", "class", "grid", "solver", "t_post", "profile",
                    "flags", "out_dir", "seed"})

    model = doc.get("model", {})
    _take(model, "model", {"p", "q"})
    p = model.get("p", 3)
    q = model.get("q", 1)
    _require(isinstance(p, int) and p >= 1, "model.p", "must be an integer >= 1")
    _require(isinstance(q, int) and q >= 0, "model.q", "must be an integer >= 0")

    cls = doc.get("class", {})
    _take(cls, "class", {"a0", "b0"})
    a0 = _number(cls, "class", "a0", 2.0)
    b0 = _number(cls, "class", "b0", 9.0)

    grid = doc.get("grid", {})
    _take(grid, "grid", {"R", "N"})
    R = _number(grid, "grid", "R", 20.0)
    N = grid.get("N", 2001)
    _require(isinstance(N, int) and N >= 101 and N % 2 == 1,
             "grid.N", "must be an odd integer >= 101")
    _require(R >= 10, "grid.R", "must be >= 10")

    solver = doc.get("solver", {})
    _take(solver, "solver", _SOLVER_KEYS)
    dt_max = _number(solver, "solver", "dt_max", 2.5e-4)
    cfl_sigma = _number(solver, "solver", "cfl_sigma", 0.2)
    _require(cfl_sigma <= 0.5, "solver.cfl_sigma", "must be <= 0.5")
    eps_stop = solver.get("eps_stop")
    if eps_stop is not None:
        eps_stop = _number(solver, "solver", "eps_stop", None)
    eps_floor = _number(solver, "solver", "eps_floor", 1e-10)
    stride = solver.get("output_stride", 20)
    _require(isinstance(stride, int) and stride >= 1,
             "solver.output_stride", "must be an integer >= 1")
    scheme = solver.get("scheme", "implicit")
    _require(scheme in ("implicit", "rk4"), "solver.scheme",
             "must be 'implicit' or 'rk4'")

    t_post = _number(doc, "", "t_post", 0.2)

    prof = doc.get("profile", {})
    _take(prof, "profile", {"kind", "amplitude", "gamma"})
    kind = prof.get("kind", "canonical")
    _require(kind in ("canonical", "perturbed", "cone"), "profile.kind",
             "must be canonical, perturbed or cone")
    amplitude = _number(prof, "profile", "amplitude", 0.02)
    gamma = _number(prof, "profile", "gamma", 0.5)
    _require(gamma <= 1.0, "profile.gamma", "must lie in (0, 1]")

    flags = doc.get("flags", {})
    _take(flags, "flags", {"paper_literal_rates", "emit_snapshots"})
    literal = flags.get("paper_literal_rates", False)
    snapshots = flags.get("emit_snapshots", False)
    _require(isinstance(literal, bool), "flags.paper_literal_rates",
             "must be a boolean")
    _require(isinstance(snapshots, bool), "flags.emit_snapshots",
             "must be a boolean")

    out_dir = doc.get("out_dir", "out")
    _require(isinstance(out_dir, str), "out_dir", "must be a string")
    seed = doc.get("seed", 0)
    _require(isinstance(seed, int), "seed", "must be an integer")

    return ScenarioConfig(
        p=p, q=q, a0=a0, b0=b0, grid_R=R, grid_N=N,
        dt_max=dt_max, cfl_sigma=cfl_sigma, eps_stop=eps_stop,
        eps_floor=eps_floor, output_stride=stride, scheme=scheme,
        t_post=t_post,
        profile=ProfileChoice(kind=kind, amplitude=amplitude, gamma=gamma),
        flags=FlagSet(paper_literal_rates=literal, emit_snapshots=snapshots),
        out_dir=out_dir, seed=seed)


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
