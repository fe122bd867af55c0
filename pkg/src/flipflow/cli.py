"""Command-line surface: classify, simulate, flip-run, quotient, verify.

Exit codes are contractual: 0 success / all mandatory verdicts pass,
1 a named mandatory verdict failed, 2 configuration error, 3 solver
failure before the predicted singular time.  The FLIPFLOW_OUT
environment variable overrides --out.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import os
import sys

from .cohomology import (BundleModel, classify_singularity, singular_time,
                         volume_poly, volume_ratio, class_at)
from .config import ScenarioConfig, load_config, parse_config
from .errors import ConfigError, EmptyWeights, FlipFlowError
from .quotients import QuotientWeights, classify
from .scenario import (run_flip_scenario, run_simulation, summary_dict,
                       write_artifacts)

__all__ = ["main"]

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _resolve_out(args) -> str:
    return os.environ.get("FLIPFLOW_OUT") or args.out


def _load_scenario(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = parse_config("{}")
    updates = {}
    if getattr(args, "paper_literal_rates", False):
        updates["flags"] = dataclasses.replace(cfg.flags,
                                               paper_literal_rates=True)
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    return cfg


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_classify(args) -> int:
    try:
        cfg = _load_scenario(args)
        model = BundleModel(p=cfg.p, q=cfg.q)
        path = singular_time(cfg.a0, cfg.b0, model)
        cls = classify_singularity(path, model)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    doc = {
        "kind": cls.kind.value,
        "T": path.T,
        "ratio_exponent": cls.ratio_exponent,
        "vanishing": path.vanishing,
        "path": {"a0": path.a0, "b0": path.b0,
                 "rate_a": path.rate_a, "rate_b": path.rate_b},
        "volume_t0": volume_poly(model, class_at(path, 0.0)),
        "ratio_t0": volume_ratio(path, model, 0.0),
    }
    if cfg.flags.paper_literal_rates:
        lit = singular_time(cfg.a0, cfg.b0, model, literal_rates=True)
        doc["paper_literal_path"] = {
            "rate_a": lit.rate_a, "rate_b": lit.rate_b, "T": lit.T,
            "vanishing": lit.vanishing}
    _emit(doc)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        cfg = _load_scenario(args)
        result = run_simulation(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_artifacts(result, _resolve_out(args))
    if result.solver_failed:
        print(f"solver failure: {result.event.cause} at t={result.event.T_num}",
              file=sys.stderr)
        return EXIT_SOLVER
    print(f"singular event {result.event.cause} at T_num={result.event.T_num:.6f} "
          f"(predicted T={result.path.T:.6f})")
    return EXIT_OK


def _run_one_flip(cfg: ScenarioConfig, out_dir: str) -> dict:
    result = run_flip_scenario(cfg)
    write_artifacts(result, out_dir)
    return summary_dict(result)


def cmd_flip_run(args) -> int:
    out = _resolve_out(args)
    try:
        if args.sweep:
            return _cmd_sweep(args, out)
        cfg = _load_scenario(args)
        summary = _run_one_flip(cfg, out)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlipFlowError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    code = summary["exit_code"]
    if code == EXIT_VERDICT:
        print(f"failing verdicts: {', '.join(summary['failing_mandatory'])}",
              file=sys.stderr)
    elif code == EXIT_SOLVER:
        print(f"solver failure: {summary['event']['cause']} at "
              f"t={summary['event']['T_num']}", file=sys.stderr)
    else:
        print(f"flip completed: T_num={summary['event']['T_num']:.6f}, "
              "all mandatory verdicts pass")
    return code


def _cmd_sweep(args, out: str) -> int:
    """Fan independent scenarios out to isolated output directories."""
    with open(args.sweep, "r", encoding="utf-8") as fh:
        docs = json.load(fh)
    if not isinstance(docs, list):
        raise ConfigError("sweep spec must be a JSON array of config objects")
    configs = [parse_config(json.dumps(doc)) for doc in docs]
    jobs = [(cfg, os.path.join(out, f"sweep_{k:03d}"))
            for k, cfg in enumerate(configs)]
    if args.workers > 1:
        with multiprocessing.Pool(args.workers) as pool:
            summaries = pool.starmap(_run_one_flip, jobs)
    else:
        summaries = [_run_one_flip(cfg, d) for cfg, d in jobs]
    worst = max(s["exit_code"] for s in summaries)
    for k, s in enumerate(summaries):
        print(f"sweep_{k:03d}: exit {s['exit_code']}")
    return worst


def _parse_weight_spec(spec: str) -> QuotientWeights:
    try:
        a_part, b_part = spec.split(";")
        a = [int(w) for w in a_part.split(",") if w.strip()]
        b = [int(w) for w in b_part.split(",") if w.strip()]
        return QuotientWeights.of(a, b)
    except (ValueError, EmptyWeights) as exc:
        raise ConfigError(f"bad weight spec {spec!r}: {exc}") from exc


def cmd_quotient(args) -> int:
    try:
        weights = _parse_weight_spec(args.weights)
        report = classify(weights)
    except (ConfigError, ValueError, EmptyWeights) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    doc = {
        "weights": {"a": list(weights.a), "b": list(weights.b)},
        "m": weights.m,
        "l": weights.l,
        "kind": report.kind,
        "admissible": report.admissibility.basic,
        "strongly_admissible": report.admissibility.strong,
        "fixed_minus": list(report.fixed_minus),
        "fixed_plus": list(report.fixed_plus),
        "smooth_minus": report.smooth_minus,
        "smooth_plus": report.smooth_plus,
        "charts_minus": [{"index": c.index, "group_order": c.group_order,
                          "residual_weights": list(c.residual_weights),
                          "smooth": c.smooth} for c in report.charts_minus],
        "charts_plus": [{"index": c.index, "group_order": c.group_order,
                         "residual_weights": list(c.residual_weights),
                         "smooth": c.smooth} for c in report.charts_plus],
        "bundle_minus": dataclasses.asdict(report.bundle_minus)
        if report.bundle_minus else None,
        "bundle_plus": dataclasses.asdict(report.bundle_plus)
        if report.bundle_plus else None,
    }
    _emit(doc)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import run_acceptance
    results = run_acceptance(fast=args.fast)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} criterion {r.ident}: "
              f"{r.name} -- {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERDICT


def _add_common(sub, seed=True):
    sub.add_argument("--config", help="path to a JSON scenario config")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--paper-literal-rates", action="store_true",
                     help="report against the literal rate convention")
    if seed:
        sub.add_argument("--seed", type=int, default=None,
                         help="seed for profile perturbations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flipflow",
        description="Metric flips of projective bundles by the reduced "
                    "Ricci flow: simulation, classification, verification.")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("classify", help="classify the singularity type "
                          "of an initial class")
    _add_common(sub, seed=False)
    sub.set_defaults(func=cmd_classify)

    sub = subs.add_parser("simulate", help="run the flow to its singular time")
    _add_common(sub)
    sub.set_defaults(func=cmd_simulate)

    sub = subs.add_parser("flip-run", help="run a full flip scenario with "
                          "verdicts")
    _add_common(sub)
    sub.add_argument("--sweep", help="JSON array of config objects to fan out")
    sub.add_argument("--workers", type=int, default=1,
                     help="parallel workers for --sweep")
    sub.set_defaults(func=cmd_flip_run)

    sub = subs.add_parser("quotient", help="classify a weighted C* quotient, "
                          "weights as 'a0,a1,...;b0,b1,...'")
    sub.add_argument("weights")
    sub.set_defaults(func=cmd_quotient)

    sub = subs.add_parser("verify", help="run the acceptance checks")
    sub.add_argument("--fast", action="store_true",
                     help="coarser grids for a quicker sweep")
    sub.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
