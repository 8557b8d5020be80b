"""End-to-end scenario: terrain, keyframes, nominal plan, DP cache, walk."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..automaton import EventClass, WalkConfig, WalkLog, run_walk
from ..contact import multicontact_forces
from ..errors import PhaseWalkError, WalkFailed
from ..planner import PlannerConfig, StepSpec, generate_nominal, to_local
from ..recovery import PolicyCache
from .config import ScenarioConfig
from .io import emit_outputs
from .terrain import keyframe_speeds, sample_terrain


@dataclass
class WalkMetrics:
    n_steps: int = 0
    completed: bool = False
    failure: str | None = None
    failure_step: int | None = None
    kappa: dict = field(default_factory=dict)
    max_abs_sigma: float = 0.0
    disturbances: int = 0
    continuous_recoveries: int = 0
    sagittal_replans: int = 0
    lateral_replans: int = 0
    transition_residuals: list = field(default_factory=list)
    cone_min_margin: float | None = None
    cone_samples: int = 0
    lateral_excursion: float = 0.0
    apex_speeds: dict = field(default_factory=dict)
    # not serialised: both depend on the machine and cache state, and the
    # outputs must be reproducible
    policy_builds: int = 0
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        return {
            "n_steps": self.n_steps, "completed": self.completed, "failure": self.failure,
            "failure_step": self.failure_step,
            "kappa": {str(k): v for k, v in sorted(self.kappa.items())},
            "max_abs_sigma": self.max_abs_sigma,
            "recovery_counts": {"disturbances": self.disturbances,
                                "continuous": self.continuous_recoveries,
                                "replan_sagittal": self.sagittal_replans,
                                "replan_lateral": self.lateral_replans},
            "transition_residuals": self.transition_residuals,
            "cone_min_margin": self.cone_min_margin, "cone_samples": self.cone_samples,
            "lateral_excursion": self.lateral_excursion,
            "apex_speeds": {str(k): v for k, v in sorted(self.apex_speeds.items())},
        }


def step_specs(cfg: ScenarioConfig) -> list:
    ter = sample_terrain(cfg.terrain, cfg.keyframes.apex_height)
    kf = cfg.keyframes
    speeds = keyframe_speeds(ter, kf.base_apex_speed, kf.height_gain, kf.min_apex_speed)
    return [StepSpec(t.foot, t.surface, v) for t, v in zip(ter, speeds)]


def planner_config(cfg: ScenarioConfig, multicontact: bool = False) -> PlannerConfig:
    return PlannerConfig(sample_dt=cfg.dt, lateral_half_width=cfg.keyframes.lateral_half_width,
                         continuous_surfaces=True,
                         multicontact_fraction=cfg.multicontact_fraction if multicontact else 0.0)


def nominal_plan(cfg: ScenarioConfig, multicontact: bool = False) -> list:
    return generate_nominal(step_specs(cfg), cfg.robot, planner_config(cfg, multicontact))


def walk_config(cfg: ScenarioConfig) -> WalkConfig:
    return WalkConfig(dt=cfg.dt, guard=cfg.guard, bundle=cfg.bundle, robot=cfg.robot,
                      planner=planner_config(cfg), recovery=cfg.recovery,
                      dual_support_time=cfg.dual_support_time)


def policy_cache(cfg: ScenarioConfig, persist: bool = True) -> PolicyCache:
    return PolicyCache(cfg.dp, cfg.bundle, cfg.robot,
                       directory=cfg.policy_dir() if persist else None)


def compute_metrics(log: WalkLog, plans_mc: list | None, cfg: ScenarioConfig) -> WalkMetrics:
    A = log.arrays()
    m = WalkMetrics(n_steps=cfg.n_steps, completed=log.completed, failure=log.failure)
    m.kappa = dict(log.kappa)
    m.max_abs_sigma = float(np.max(np.abs(A["sigma"]))) if A["sigma"].size else 0.0
    m.disturbances = len(log.events_of(EventClass.DISTURBED_JUMP))
    m.continuous_recoveries = len(log.events_of(EventClass.CONTROLLED_JUMP))
    cs = log.events_of(EventClass.CONTROLLED_SWITCHING)
    m.sagittal_replans = sum(1 for e in cs if e.payload.get("reason") == "sagittal")
    m.lateral_replans = sum(1 for e in cs if e.payload.get("reason") == "lateral")
    m.transition_residuals = [float(e.payload.get("residual", 0.0))
                              for e in log.events_of(EventClass.AUTONOMOUS_SWITCHING)
                              if "residual" in e.payload]
    m.apex_speeds = {q: float(a["sd"]) for q, a in sorted(log.apex.items())}
    if log.plans and A["t"].size:
        # lateral spread about the straight path through the first and last foot
        th = log.plans[0].heading
        lat = np.array([to_local(th, s[:2])[1] for s in A["states"]])
        m.lateral_excursion = float(lat.max() - lat.min())
    if plans_mc:
        samples = multicontact_forces(plans_mc, cfg.robot.mass, cfg.robot.gravity)
        if samples:
            m.cone_min_margin = float(min(s.margin for s in samples))
            m.cone_samples = len(samples)
    return m


def _describe(exc: Exception) -> str:
    cause = getattr(exc, "cause", None)
    name = type(cause).__name__ if isinstance(cause, Exception) else type(exc).__name__
    return f"{name}: {exc}"


def run_scenario(cfg: ScenarioConfig, out_dir=None, emit: bool = True,
                 persist_policies: bool = True) -> tuple:
    """Run the full pipeline; returns ``(log or None, metrics)``.

    Planner or walk failures are reported through the metrics (and the
    metrics file) rather than raised.
    """
    t0 = time.perf_counter()
    out_dir = cfg.out_dir if out_dir is None else out_dir
    log = None
    try:
        plans = nominal_plan(cfg)
        plans_mc = None
        if cfg.multicontact_fraction > 0 and cfg.n_steps > 1:
            try:
                plans_mc = nominal_plan(cfg, multicontact=True)
            except PhaseWalkError:
                plans_mc = None
        cache = policy_cache(cfg, persist_policies) if cfg.recovery else None
        log = run_walk(plans, cache, cfg.disturbances, walk_config(cfg))
        metrics = compute_metrics(log, plans_mc, cfg)
        metrics.policy_builds = cache.builds if cache is not None else 0
    except WalkFailed as exc:
        metrics = WalkMetrics(n_steps=cfg.n_steps, failure=_describe(exc),
                              failure_step=exc.step)
    except PhaseWalkError as exc:
        metrics = WalkMetrics(n_steps=cfg.n_steps, failure=_describe(exc),
                              failure_step=getattr(exc, "step", None))
    metrics.wall_clock = time.perf_counter() - t0
    if emit:
        emit_outputs(log, metrics, out_dir)
    return log, metrics
