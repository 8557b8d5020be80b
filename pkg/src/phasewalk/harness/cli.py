"""Command-line entry points: ``phasewalk <command> <config> [flags]``."""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..automaton import DisturbanceSchedule, GuardKind
from ..dynamics import ComSurface
from ..errors import PhaseWalkError
from ..manifold import ControlRanges, viable_region
from ..planner import StepSpec, plan_samples
from ..recovery import dp_build, load_policy, save_policy
from .config import ScenarioConfig, load_config, reference_dp
from .io import write_json
from .scenario import nominal_plan, run_scenario

# (local progression in the disturbed step, sagittal jump m/s); the first
# three stay within reach of the continuous controller, the last three
# land too late or too hard and need a new foot
DEMO_CASES = ((0.2, 0.1), (0.3, 0.2), (0.5, 0.15), (0.8, 0.4), (0.9, 0.2), (0.85, -0.2))
DEMO_STEP = 1


def _f(v) -> str:
    return repr(float(v))


def reference_step(cfg: ScenarioConfig) -> StepSpec:
    r = cfg.reference
    return StepSpec((r.foot_x, 0.0, 0.0), ComSurface(0.0, 0.0, r.z_apex), r.xd_apex)


def reference_table(cfg: ScenarioConfig, force: bool = False, out: Path | None = None,
                    region: bool = True):
    """Build (or load from the cache) the table for the reference step."""
    dp = reference_dp(cfg)
    path = Path(out) if out is not None else cfg.policy_dir() / "reference_policy.json"
    if path.exists() and not force:
        table = load_policy(path)
        if table.dp == dp and (table.region is not None or not region):
            return table, path, False
    table = dp_build(dp, reference_step(cfg), cfg.bundle, cfg.robot, region=region)
    save_policy(table, path)
    return table, path, True


def cmd_plan(cfg: ScenarioConfig, args) -> int:
    out = Path(args.out_dir) if args.out_dir else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    plans = nominal_plan(cfg)
    t, S, idx = plan_samples(plans)
    with open(out / "plan.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "step", "x", "y", "z", "xd", "yd", "zd"))
        for k in range(t.shape[0]):
            w.writerow((_f(t[k]), int(idx[k]), *(_f(v) for v in S[k])))
    steps = [{"index": p.index, "foot": list(p.foot), "omega": p.omega,
              "apex_speed": p.spec.apex_speed, "lateral_foot": p.lateral_foot,
              "t_entry": p.t_entry, "t_apex": p.t_apex, "t_exit": p.t_exit,
              "transition": list(p.transition)} for p in plans]
    write_json(out / "plan.json", {"schema_version": 1, "steps": steps})
    print(f"planned {len(plans)} steps -> {out}")
    return 0


def cmd_dp_build(cfg: ScenarioConfig, args) -> int:
    table, path, built = reference_table(cfg, force=args.force, out=args.out)
    n = table.region.count if table.region is not None else 0
    print(f"{'built' if built else 'cached'} policy {table.values.shape} "
          f"(region {n} cells) -> {path}")
    return 0


def cmd_simulate(cfg: ScenarioConfig, args) -> int:
    if args.seed is not None:
        cfg = replace(cfg, terrain=replace(cfg.terrain, seed=args.seed))
    if args.disturbance:
        cfg = replace(cfg, disturbances=DisturbanceSchedule.parse(args.disturbance))
    if args.guard:
        cfg = replace(cfg, guard=GuardKind(args.guard))
    out = Path(args.out_dir) if args.out_dir else cfg.out_dir
    _, m = run_scenario(cfg, out_dir=out)
    status = "completed" if m.completed else f"failed ({m.failure})"
    print(f"walk {status}: {m.n_steps} steps, max|sigma| {m.max_abs_sigma:.3g}, "
          f"continuous {m.continuous_recoveries}, re-plans "
          f"{m.sagittal_replans + m.lateral_replans}, {m.wall_clock:.2f} s -> {out}")
    return 0 if m.completed else 1


def cmd_replan_demo(cfg: ScenarioConfig, args) -> int:
    """Six disturbed walks over the same terrain; one output folder per case."""
    out = Path(args.out_dir) if args.out_dir else cfg.out_dir / "replan_demo"
    n = max(cfg.n_steps, DEMO_STEP + 3)
    base = replace(cfg, terrain=replace(cfg.terrain, n_steps=n))
    rows = []
    for k, (z, dv) in enumerate(DEMO_CASES):
        c = replace(base, disturbances=DisturbanceSchedule.parse([f"{DEMO_STEP + z}:{dv},0"]))
        log, m = run_scenario(c, out_dir=out / f"case_{k}")
        kind = "replan" if m.sagittal_replans else ("continuous" if m.continuous_recoveries else "none")
        feet = [e.payload for e in (log.events if log else []) if e.payload.get("reason") == "sagittal"]
        rows.append({"case": k, "zeta": DEMO_STEP + z, "dv": dv, "recovery": kind,
                     "completed": m.completed, "kappa": m.kappa.get(DEMO_STEP),
                     "nominal_foot": feet[0]["nominal_foot"] if feet else None,
                     "replanned_foot": feet[0]["foot"] if feet else None,
                     "next_apex_speed": m.apex_speeds.get(DEMO_STEP + 1)})
        print(f"case {k}: zeta {DEMO_STEP + z:.2f} dv {dv:+.2f} -> {kind}")
    write_json(out / "summary.json", {"schema_version": 1, "cases": rows})
    return 0 if all(r["completed"] for r in rows) else 1


def cmd_region(cfg: ScenarioConfig, args) -> int:
    out = Path(args.out_dir) if args.out_dir else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    table, _, _ = reference_table(cfg)
    reg = table.region
    with open(out / "region.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x", "xd", "member", "reach_stage", "sigma"))
        for n, x in enumerate(reg.stage_x):
            for i, v in enumerate(reg.states):
                w.writerow((_f(x), _f(v), int(reg.member[n, i]), int(reg.reach[n, i]),
                            _f(table.sigma(x, v))))
    if args.sweep:
        # viable-set size against the allowed control spans, centred on the
        # reference (the policy-rollout region is not monotone in the spans)
        w_ref = table.step.omega_ref
        with open(out / "region_sweep.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("omega_span", "tau_span", "viable_cells"))
            for ws in np.linspace(0.0, 0.6, 7):
                for ts in np.linspace(0.0, 6.0, 7):
                    cr = ControlRanges((w_ref - ws / 2, w_ref + ws / 2), (-ts / 2, ts / 2))
                    cnt = viable_region(table.grid(), cr, cfg.bundle, table).count
                    w.writerow((_f(ws), _f(ts), cnt))
    print(f"region: {reg.count} of {reg.member.size} cells -> {out / 'region.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phasewalk", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="nominal plan only")
    p.add_argument("config")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("dp-build", help="build and cache the reference policy table")
    p.add_argument("config")
    p.add_argument("--force", action="store_true", help="rebuild even if cached")
    p.add_argument("--out", type=Path, help="policy file (default: cache directory)")
    p.set_defaults(func=cmd_dp_build)

    p = sub.add_parser("simulate", help="full hybrid walk with recovery")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--disturbance", action="append", metavar="ZETA:DVX,DVY",
                   help="velocity jump at global progression ZETA (repeatable)")
    p.add_argument("--guard", choices=[g.value for g in GuardKind])
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replan-demo", help="six-case disturbance sweep")
    p.add_argument("config")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_replan_demo)

    p = sub.add_parser("region", help="recoverable-region membership grid")
    p.add_argument("config")
    p.add_argument("--sweep", action="store_true", help="also sweep control ranges")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_region)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(cfg, args)
    except (PhaseWalkError, OSError) as exc:
        print(f"phasewalk: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
