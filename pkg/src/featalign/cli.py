"""Command-line entry points: run one episode, sweep a directory of scenarios,
validate a scenario file, or serve the live correction session API.

Exit codes: 0 success, 2 schema error, 3 budget exhausted without convergence.
Set FEATALIGN_LOG=DEBUG|INFO|WARNING to control verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from .episode import emit_report, run_episode
from .errors import ScenarioError
from .scenario import Scenario, load_scenario

log = logging.getLogger("featalign")

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_BUDGET = 3


def _setup_logging() -> None:
    level = os.environ.get("FEATALIGN_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
        changes["planner"] = dataclasses.replace(scenario.planner, seed=args.seed)
    if args.policy is not None:
        changes["policy"] = args.policy
    if args.steps is not None:
        changes["budget"] = args.steps
    if args.force_naive_update:
        changes["learner"] = dataclasses.replace(scenario.learner, p_e_override=1.0)
    return dataclasses.replace(scenario, **changes) if changes else scenario


def _cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    scenario = _apply_overrides(scenario, args)
    report = run_episode(scenario)
    emit_report(report, args.out)
    log.info("wrote %s (%s, %d corrections)", args.out, report.status,
             report.metrics["correction_count"])
    print(f"{scenario.label}: {report.status} after {report.steps} step(s), "
          f"{report.metrics['correction_count']} correction(s) -> {args.out}")
    return EXIT_OK if report.status == "converged" else EXIT_BUDGET


def _cmd_sweep(args) -> int:
    src = Path(args.scenarios)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(src.glob("*.json"))
    if not paths:
        print(f"no scenario files in {src}", file=sys.stderr)
        return EXIT_SCHEMA
    worst = EXIT_OK
    for path in paths:
        try:
            scenario = load_scenario(path)
        except ScenarioError as exc:
            print(f"{path.name}: schema error: {exc}", file=sys.stderr)
            worst = max(worst, EXIT_SCHEMA)
            continue
        scenario = _apply_overrides(scenario, args)
        report = run_episode(scenario)
        out = out_dir / f"{path.stem}.report.json"
        emit_report(report, out)
        print(f"{path.name}: {report.status}, "
              f"{report.metrics['correction_count']} correction(s) -> {out}")
        if report.status != "converged":
            worst = max(worst, EXIT_BUDGET)
    return worst


def _cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print(f"ok: {scenario.label} ({len(scenario.feature_set)} features, "
          f"{scenario.model.joint_dim} joints, budget {scenario.budget})")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    default_scenario = None
    if args.scenario:
        try:
            default_scenario = load_scenario(args.scenario)
        except ScenarioError as exc:
            print(f"schema error: {exc}", file=sys.stderr)
            return EXIT_SCHEMA
    app = create_app(default_scenario=default_scenario, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _common_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--policy", choices=["permissive", "conservative"], default=None,
                   help="alignment policy override")
    p.add_argument("--force-naive-update", action="store_true",
                   help="force P(E=1)=1 so every update is the plain feature-difference step")
    p.add_argument("--steps", type=int, default=None, help="override the step budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featalign",
        description="Simulated correction-driven reward learning with "
                    "feature-misalignment diagnosis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write a report")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--out", required=True)
    _common_run_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run every scenario in a directory")
    p_sweep.add_argument("--scenarios", required=True, help="directory of scenario JSON files")
    p_sweep.add_argument("--out", required=True, help="directory for reports")
    _common_run_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_val = sub.add_parser("validate", help="check a scenario file against the schema")
    p_val.add_argument("--scenario", required=True)
    p_val.set_defaults(func=_cmd_validate)

    p_serve = sub.add_parser("serve", help="serve the live correction-session API and UI")
    p_serve.add_argument("--scenario", default=None, help="default scenario for new sessions")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8321)
    p_serve.add_argument("--static", default=None, help="directory with the built UI bundle")
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
