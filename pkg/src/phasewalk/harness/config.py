"""Scenario configuration (YAML, schema version 1).

DP parameters accept the published names in several spellings (plain ASCII,
the symbol form, or the descriptive label); see ``DP_ALIASES``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from ..automaton import Disturbance, DisturbanceSchedule, GuardKind
from ..dynamics import RobotParams
from ..errors import ConfigError
from ..manifold import BundleSpec
from ..recovery import DpParams
from .terrain import TerrainSpec

SCHEMA_VERSION = 1

# canonical DpParams / scenario field -> accepted spellings
DP_ALIASES = {
    "tau_ref": ["tau_y_ref", "τ_y^{ref}", "τ_y^ref", "nominal pitch torque"],
    "omega_ref": ["omega_ref", "ω^{ref}", "ω^ref", "nominal asymptote slope"],
    "tau_range": ["tau_range", "tau_y_range", "τ_y^{range}", "τ_y^range", "pitch torque range"],
    "omega_range": ["omega_range", "ω^{range}", "ω^range", "asymptote slope range"],
    "z_apex": ["z_apex", "z_{apex}", "apex height"],
    "mass": ["mass", "m"],
    "stage_range": ["stage_range", "stage range"],
    "state_range": ["state_range", "state range"],
    "stage_res": ["stage_res", "stage_resolution", "stage resolution"],
    "state_res": ["state_res", "state_resolution", "state resolution"],
    "s_initial": ["s_initial", "s_{initial}", "disturbed initial state"],
    "xd_apex": ["xd_apex", "\\dot{x}_{apex}", "nominal apex velocity"],
    "gamma1": ["gamma1", "gamma_1", "Gamma1", "Gamma_1", "Γ_1", "Γ1", "weighting scalar Γ_1"],
    "gamma2": ["gamma2", "gamma_2", "Gamma2", "Gamma_2", "Γ_2", "Γ2", "weighting scalar Γ_2"],
    "beta": ["beta", "β", "weighting scalar β"],
    "alpha": ["alpha", "α", "weighting scalar α"],
    "eta": ["eta", "η"],
    "omega_res": ["omega_res", "omega_resolution"],
    "tau_res": ["tau_res", "tau_resolution", "tau_y_resolution"],
    "foot_x": ["foot_x"],
}


def _norm(key: str) -> str:
    return re.sub(r"\s+", " ", str(key).strip()).lower()


_LOOKUP = {_norm(a): k for k, names in DP_ALIASES.items() for a in names + [k]}


@dataclass(frozen=True)
class KeyframeSpec:
    base_apex_speed: float = 0.6
    height_gain: float = 0.0
    apex_height: float = 1.0
    lateral_half_width: float = 0.1
    min_apex_speed: float = 0.1


@dataclass(frozen=True)
class ReferenceStep:
    """Single step the standalone DP table (dp-build, region) is built for."""

    foot_x: float = 1.2
    xd_apex: float = 0.6
    z_apex: float = 1.0
    s_initial: tuple = (1.1, 0.7)


@dataclass(frozen=True)
class ScenarioConfig:
    terrain: TerrainSpec = TerrainSpec()
    keyframes: KeyframeSpec = KeyframeSpec()
    robot: RobotParams = RobotParams()
    dp: DpParams = DpParams()
    reference: ReferenceStep = ReferenceStep()
    bundle: BundleSpec = BundleSpec()
    disturbances: DisturbanceSchedule = DisturbanceSchedule()
    dt: float = 1e-3
    guard: GuardKind = GuardKind.MANIFOLD
    recovery: bool = True
    dual_support_time: float = 0.0
    multicontact_fraction: float = 0.25
    out_dir: Path = Path("out")
    cache_dir: Path | None = None
    source: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not 0 <= self.multicontact_fraction < 1:
            raise ConfigError("multicontact_fraction must lie in [0, 1)")

    @property
    def n_steps(self) -> int:
        return self.terrain.n_steps

    def policy_dir(self) -> Path:
        if self.cache_dir is not None:
            return Path(self.cache_dir)
        base = self.source.parent if self.source is not None else Path(".")
        return base / "policy_cache"


def _section(doc: dict, name: str, allowed: set) -> dict:
    sec = doc.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    bad = set(sec) - allowed
    if bad:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
    return sec


def _pair(v, name):
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{name} must be a two-element list")
    return (float(v[0]), float(v[1]))


def _dp_section(raw: dict) -> tuple:
    """(DpParams, ReferenceStep, mass) from a DP mapping with aliased keys."""
    vals = {}
    for k, v in raw.items():
        canon = _LOOKUP.get(_norm(k))
        if canon is None:
            raise ConfigError(f"unknown DP parameter {k!r}")
        if canon in vals:
            raise ConfigError(f"DP parameter {canon!r} given twice")
        vals[canon] = v
    if "tau_ref" in vals and float(vals.pop("tau_ref")) != 0.0:
        raise ConfigError("only a zero nominal pitch torque is supported")
    ref = ReferenceStep()
    for k, conv in (("foot_x", float), ("xd_apex", float), ("z_apex", float)):
        if k in vals:
            ref = replace(ref, **{k: conv(vals.pop(k))})
    if "s_initial" in vals:
        ref = replace(ref, s_initial=_pair(vals.pop("s_initial"), "s_initial"))
    mass = vals.pop("mass", None)
    kw = {}
    for k, v in vals.items():
        if k.endswith("_range"):
            kw[k] = _pair(v, k)
        elif k == "omega_ref":
            kw[k] = None if v is None else float(v)
        else:
            kw[k] = float(v)
    try:
        dp = DpParams(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid DP parameters: {exc}") from exc
    return dp, ref, mass


def _disturbances(raw) -> DisturbanceSchedule:
    if raw is None:
        return DisturbanceSchedule()
    if not isinstance(raw, list):
        raise ConfigError("disturbances must be a list")
    items = []
    for d in raw:
        if isinstance(d, str):
            items.extend(DisturbanceSchedule.parse([d]).entries)
        elif isinstance(d, dict):
            bad = set(d) - {"zeta", "time", "dv"}
            if bad or ("zeta" in d) == ("time" in d):
                raise ConfigError(f"bad disturbance entry {d}")
            by = "zeta" if "zeta" in d else "time"
            items.append(Disturbance(float(d[by]), _pair(d["dv"], "dv"), by))
        else:
            raise ConfigError(f"bad disturbance entry {d!r}")
    items.sort(key=lambda e: (e.by, e.trigger))
    return DisturbanceSchedule(tuple(items))


def config_from_dict(doc: dict, source: Path | None = None) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    ver = doc.get("schema_version", SCHEMA_VERSION)
    if ver != SCHEMA_VERSION:
        raise ConfigError(f"schema_version {ver} is not supported (expected {SCHEMA_VERSION})")
    top = {"schema_version", "terrain", "keyframes", "robot", "dp", "bundle", "simulation",
           "disturbances", "output"}
    bad = set(doc) - top
    if bad:
        raise ConfigError(f"unknown top-level keys: {sorted(bad)}")

    ter = _section(doc, "terrain", set(TerrainSpec.__dataclass_fields__))
    kf = _section(doc, "keyframes", set(KeyframeSpec.__dataclass_fields__))
    rob = _section(doc, "robot", {"mass", "gravity"})
    bun = _section(doc, "bundle", {"epsilon", "zeta_trans", "ε"})
    sim = _section(doc, "simulation", {"dt", "guard", "recovery", "dual_support_time",
                                       "multicontact_fraction"})
    out = _section(doc, "output", {"dir", "cache_dir"})
    dp_raw = doc.get("dp") or {}
    if not isinstance(dp_raw, dict):
        raise ConfigError("section 'dp' must be a mapping")
    try:
        terrain = TerrainSpec(**ter)
        keyframes = KeyframeSpec(**{k: float(v) for k, v in kf.items()})
        dp, ref, dp_mass = _dp_section(dp_raw)
        if dp_mass is not None and "mass" in rob and float(rob["mass"]) != float(dp_mass):
            raise ConfigError("robot.mass and dp mass disagree")
        robot = RobotParams(float(rob.get("mass", dp_mass if dp_mass is not None else 1.0)),
                            float(rob.get("gravity", 9.81)))
        eps = bun.get("epsilon", bun.get("ε", 1e-3))
        bundle = BundleSpec(float(eps), float(bun.get("zeta_trans", 1.0)))
        src = Path(source) if source is not None else None
        base = src.parent if src is not None else Path(".")
        out_dir = Path(out.get("dir", "out"))
        if not out_dir.is_absolute():
            out_dir = base / out_dir
        cache = out.get("cache_dir")
        if cache is not None:
            cache = Path(cache)
            if not cache.is_absolute():
                cache = base / cache
        return ScenarioConfig(
            terrain=terrain, keyframes=keyframes, robot=robot, dp=dp, reference=ref,
            bundle=bundle, disturbances=_disturbances(doc.get("disturbances")),
            dt=float(sim.get("dt", 1e-3)), guard=GuardKind(sim.get("guard", "manifold")),
            recovery=bool(sim.get("recovery", True)),
            dual_support_time=float(sim.get("dual_support_time", 0.0)),
            multicontact_fraction=float(sim.get("multicontact_fraction", 0.25)),
            out_dir=out_dir, cache_dir=cache, source=src)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return config_from_dict(doc or {}, source=path)


def reference_dp(cfg: ScenarioConfig) -> DpParams:
    """DP parameters for the reference step; an unset omega_ref is derived
    from the apex height and the omega grid is centred on it."""
    dp = cfg.dp
    if dp.omega_ref is None:
        w = math.sqrt(cfg.robot.gravity / cfg.reference.z_apex)
        half = 0.5 * (dp.omega_range[1] - dp.omega_range[0])
        dp = replace(dp, omega_ref=w, omega_range=(w - half, w + half))
    return dp
