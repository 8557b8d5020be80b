"""Disturbance recovery: DP policy tables, boundary-layer control, re-planning.

The DP runs over sagittal position stages.  Within a stage the controls
(omega, tau_y) are held, the pendulum acceleration is affine in position,
so the end-of-stage speed follows exactly from
``v1^2 = v0^2 + 2 dx * w^2 (x_mid - x_foot - tau_y / (m g))``
and is snapped to the nearest speed cell.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .dynamics import PhaseState, RobotParams
from .errors import GridTooCoarse, InfeasibleApex, OutOfGrid, PolicyFormatError
from .manifold import (BundleSpec, ControlRanges, RegionGrid, RegionMap,
                       estimate_recoverable_region, sigma_apex)
from .planner import (StepPlan, _apex_time, _flow_time, search_lateral_foot_info,
                      to_local)

POLICY_FORMAT = "phasewalk-policy"
POLICY_VERSION = 1


def _count(lo: float, hi: float, res: float) -> int:
    return int(round((hi - lo) / res)) + 1


@dataclass(frozen=True)
class DpParams:
    stage_range: tuple = (0.9, 1.5)
    stage_res: float = 0.01
    state_range: tuple = (0.03, 1.5)
    state_res: float = 0.01
    omega_range: tuple = (2.83, 3.43)
    omega_res: float = 0.05
    tau_range: tuple = (-3.0, 3.0)
    tau_res: float = 0.5
    alpha: float = 100.0
    beta: float = 4e4
    gamma1: float = 5.0
    gamma2: float = 5.0
    eta: float = 1.0
    omega_ref: float | None = None

    def __post_init__(self):
        for name in ("stage_range", "state_range", "omega_range", "tau_range"):
            lo, hi = (float(v) for v in getattr(self, name))
            object.__setattr__(self, name, (lo, hi))
            if not hi >= lo:
                raise ValueError(f"{name} is empty")
        for name in ("stage_res", "state_res", "omega_res", "tau_res"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if min(self.alpha, self.beta, self.gamma1, self.gamma2) < 0:
            raise ValueError("weights must be non-negative")

    @classmethod
    def table_4_1(cls, omega_ref: float | None = None, **kw) -> "DpParams":
        """The published parameter set; the omega grid is centred on
        ``omega_ref`` when given so that it contains it exactly."""
        if omega_ref is not None:
            kw.setdefault("omega_range", (omega_ref - 0.3, omega_ref + 0.3))
            kw.setdefault("omega_ref", omega_ref)
        return cls(**kw)

    def stage_axis(self) -> np.ndarray:
        lo, hi = self.stage_range
        return np.linspace(lo, hi, _count(lo, hi, self.stage_res))

    def state_axis(self) -> np.ndarray:
        lo, hi = self.state_range
        return lo + self.state_res * np.arange(_count(lo, hi, self.state_res))

    def omega_axis(self) -> np.ndarray:
        lo, hi = self.omega_range
        return np.linspace(lo, hi, _count(lo, hi, self.omega_res))

    def tau_axis(self) -> np.ndarray:
        lo, hi = self.tau_range
        return np.linspace(lo, hi, _count(lo, hi, self.tau_res))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DpParams":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass(frozen=True)
class StepModel:
    """Sagittal step parameters a policy table is built for."""

    x_foot: float
    xd_apex: float
    omega_ref: float
    xd_pred: float
    mass: float
    gravity: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PolicyTable:
    stage_x: np.ndarray
    states: np.ndarray
    omegas: np.ndarray
    taus: np.ndarray
    values: np.ndarray
    policy: np.ndarray
    dp: DpParams
    step: StepModel
    build_hash: str
    region: RegionMap | None = field(default=None, compare=False)

    @property
    def state_res(self) -> float:
        return float(self.states[1] - self.states[0]) if len(self.states) > 1 else 1.0

    @property
    def stage_res(self) -> float:
        return float(self.stage_x[1] - self.stage_x[0]) if len(self.stage_x) > 1 else 1.0

    @property
    def policy_omega(self) -> np.ndarray:
        k2 = len(self.taus)
        idx = np.where(self.policy >= 0, self.policy // k2, 0)
        return np.where(self.policy >= 0, self.omegas[idx], np.nan)

    @property
    def policy_tau(self) -> np.ndarray:
        k2 = len(self.taus)
        idx = np.where(self.policy >= 0, self.policy % k2, 0)
        return np.where(self.policy >= 0, self.taus[idx], np.nan)

    @property
    def u_ref(self) -> tuple:
        return (self.step.omega_ref, 0.0)

    def kernel_cfg(self) -> np.ndarray:
        d, s = self.dp, self.step
        return np.array([s.x_foot, s.xd_apex, s.omega_ref, s.mass, s.gravity, d.beta,
                         d.gamma1, d.gamma2, d.alpha, d.eta, s.xd_pred])

    def grid(self) -> RegionGrid:
        return RegionGrid(self.stage_x, self.states)

    def with_region(self, bundle: BundleSpec, controls: ControlRanges | None = None) -> "PolicyTable":
        reg = estimate_recoverable_region(self.grid(), controls, bundle, self)
        return replace(self, region=reg)

    def relocated(self, x_foot: float) -> "PolicyTable":
        """Same table translated to a foot at sagittal position ``x_foot``."""
        d = x_foot - self.step.x_foot
        reg = self.region
        if reg is not None:
            reg = replace(reg, stage_x=reg.stage_x + d)
        return replace(self, stage_x=self.stage_x + d, step=replace(self.step, x_foot=x_foot),
                       region=reg)

    def sigma(self, x, xd):
        s = self.step
        return sigma_apex(x, xd, s.x_foot, s.xd_apex, s.omega_ref)


def stage_acceleration(xd_n: float, xd_next: float, dx: float) -> float:
    """Constant acceleration linking two stage speeds over ``dx``."""
    if not dx > 0:
        raise ValueError("dx must be positive")
    return (xd_next * xd_next - xd_n * xd_n) / (2.0 * dx)


def step_model(step, dp: DpParams, robot: RobotParams, xd_pred: float | None = None) -> StepModel:
    """Sagittal model of ``step`` (a StepSpec or a StepPlan) on its heading axis."""
    if isinstance(step, StepPlan):
        x_foot = step.manifold.x_foot
        w = step.omega
        xa = step.spec.apex_speed
        if xd_pred is None and abs(dp.stage_range[1] - step.transition[0]) < 1e-9:
            xd_pred = step.transition[1]
    else:
        x_foot = float(to_local(step.heading, step.foot[:2])[0])
        w = step.omega(robot)
        xa = step.apex_speed
    w_ref = dp.omega_ref if dp.omega_ref is not None else w
    if xd_pred is None:
        u = dp.stage_range[1] - x_foot
        xd_pred = math.sqrt(xa * xa + w_ref * w_ref * u * u)
    return StepModel(float(x_foot), float(xa), float(w_ref), float(xd_pred),
                     robot.mass, robot.gravity)


def _hash(dp: DpParams, model: StepModel) -> str:
    blob = json.dumps({"dp": dp.to_dict(), "step": model.to_dict()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def dp_build(params: DpParams, step, bundle: BundleSpec | None, robot: RobotParams,
             xd_pred: float | None = None, region: bool = False) -> PolicyTable:
    """Backward value iteration for the recovery policy of one step.

    ``region=True`` also attaches the recoverable-region map for ``bundle``.
    """
    model = step_model(step, params, robot, xd_pred)
    omegas = params.omega_axis()
    if np.min(np.abs(omegas - model.omega_ref)) > 1e-9:
        raise ValueError(f"omega grid {omegas[0]}..{omegas[-1]} does not contain "
                         f"omega_ref {model.omega_ref}")
    stage_x, states, taus = params.stage_axis(), params.state_axis(), params.tau_axis()
    if isinstance(step, StepPlan):
        s_e = step.local(step.entry)[0]
        lo, hi = params.stage_range
        if lo > s_e + 1e-9 or hi < step.transition[0] - 1e-9:
            raise ValueError("stage grid does not cover the step's sagittal extent")
    table_cfg = np.array([model.x_foot, model.xd_apex, model.omega_ref, model.mass,
                          model.gravity, params.beta, params.gamma1, params.gamma2,
                          params.alpha, params.eta, model.xd_pred])
    values, policy = kernels.dp_sweep(stage_x, states, float(states[0]), params.state_res,
                                      omegas, taus, table_cfg)
    for n in range(len(stage_x) - 1):
        if np.all(policy[n] < 0):
            raise GridTooCoarse(f"every cell of stage {n} leaves the speed grid")
    table = PolicyTable(stage_x, states, omegas, taus, values, policy, params, model,
                        _hash(params, model))
    if region:
        table = table.with_region(bundle or BundleSpec())
    return table


def _cell(table: PolicyTable, x: float, xd: float) -> tuple:
    n = kernels.snap_index(x, float(table.stage_x[0]), table.stage_res)
    i = kernels.snap_index(xd, float(table.states[0]), table.state_res)
    if not (0 <= n < len(table.stage_x) and 0 <= i < len(table.states)):
        raise OutOfGrid(f"({x}, {xd}) outside the policy grid")
    return n, i


def dp_lookup(table: PolicyTable, x: float, xd: float) -> tuple:
    """Controls of the nearest grid cell (ties go to the lower index).

    Queries up to half a cell outside the axes still snap to the edge cell.
    The final stage carries no decision and returns the reference controls.
    """
    n, i = _cell(table, x, xd)
    if n == len(table.stage_x) - 1:
        return table.u_ref
    c = int(table.policy[n, i])
    if c < 0:
        raise OutOfGrid(f"cell ({n}, {i}) is infeasible")
    k2 = len(table.taus)
    return float(table.omegas[c // k2]), float(table.taus[c % k2])


def saturated_control(sigma: float, eps: float, u_dp: tuple, u_eps: tuple, u_ref: tuple) -> tuple:
    """Boundary-layer blend: DP control outside the layer, a linear blend of
    the layer-entry control and the reference inside it."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    a = abs(sigma)
    if a > eps:
        return tuple(u_dp)
    lam = a / eps
    return tuple(lam * ue + ((eps - a) / eps) * ur for ue, ur in zip(u_eps, u_ref))


def replan_foot(x_trans: float, xd_trans: float, xd_apex_next: float, omega: float) -> float:
    """Next foot position giving apex speed ``xd_apex_next`` from the
    transition state (capture point when the apex speed is zero)."""
    r = xd_trans * xd_trans - xd_apex_next * xd_apex_next
    if not (xd_trans > 0 and r >= 0):
        raise InfeasibleApex(f"apex speed {xd_apex_next} unreachable from {xd_trans}")
    return x_trans + math.sqrt(r) / omega


def propagate(v: float, x0: float, x1: float, u: tuple, table: PolicyTable) -> float | None:
    """Exact end speed over [x0, x1] with held controls; None on stall."""
    s = table.step
    dx = x1 - x0
    w, tau = u
    acc = (w * w) * ((x0 + 0.5 * dx) - s.x_foot - tau / (s.mass * s.gravity))
    v2 = v * v + 2.0 * dx * acc
    return math.sqrt(v2) if v2 > 0 else None


def policy_rollout(table: PolicyTable, x: float, xd: float, eps: float) -> dict:
    """Stage-wise closed-loop prediction from an arbitrary state to the
    table's last stage under the boundary-layer policy."""
    xs, vs, sg = [x], [xd], [float(table.sigma(x, xd))]
    n = int(np.searchsorted(table.stage_x, x, side="right"))
    u_eps = None
    v = xd
    pos = x
    entered = abs(sg[0]) <= eps
    while n < len(table.stage_x):
        s_now = float(table.sigma(pos, v))
        if abs(s_now) <= eps:
            if u_eps is None:
                u_eps = table.u_ref
            entered = True
        try:
            u_dp = dp_lookup(table, pos, v)
        except OutOfGrid:
            if abs(s_now) > eps:
                return {"x": xs, "xd": vs, "sigma": sg, "entered": entered, "ok": False}
            u_dp = table.u_ref
        if abs(s_now) > eps:
            u_eps = u_dp
        u = saturated_control(s_now, eps, u_dp, u_eps or u_dp, table.u_ref)
        nxt = float(table.stage_x[n])
        v_new = propagate(v, pos, nxt, u, table)
        if v_new is None:
            return {"x": xs, "xd": vs, "sigma": sg, "entered": entered, "ok": False}
        pos, v = nxt, v_new
        xs.append(pos)
        vs.append(v)
        sg.append(float(table.sigma(pos, v)))
        entered = entered or abs(sg[-1]) <= eps
        n += 1
    return {"x": xs, "xd": vs, "sigma": sg, "entered": entered, "ok": True}


@dataclass(frozen=True)
class RecoveryAction:
    kind: str  # "none" | "continuous" | "replan" | "lateral"
    controls: tuple | None
    sigma: float
    next_foot: tuple | None = None
    predicted_transition: tuple | None = None
    lateral_disturbed: bool = False


def lateral_energy(plan: StepPlan, state: PhaseState) -> float:
    _, _, l_, ld = plan.local(state)
    u = l_ - plan.lateral_foot
    return ld * ld - plan.omega * plan.omega * u * u


def recover(state: PhaseState, plan: StepPlan, table: PolicyTable | None, bundle: BundleSpec,
            next_plan: StepPlan | None = None, lateral_tol: float = 1e-8) -> RecoveryAction:
    """Pick the recovery response to a detected disturbance.

    Sagittal deviations inside the table's recoverable region are handled by
    the DP servo alone.  Otherwise the next sagittal foot is re-planned from
    the predicted transition speed and the lateral foot is searched again.
    A purely lateral deviation only re-plans the next lateral foot.
    """
    s, sd, l_, ld = plan.local(state)
    sig = float(plan.sigma(state))
    eps = bundle.epsilon
    lat = abs(lateral_energy(plan, state) - lateral_energy(plan, plan.entry)) > lateral_tol
    s_t = plan.transition[0]

    if abs(sig) <= eps:
        if not lat:
            return RecoveryAction("none", None, sig)
        foot = None
        if next_plan is not None:
            foot = _predict_lateral(plan, next_plan, s, sd, l_, ld, s_t, plan.transition[1], None)
        return RecoveryAction("lateral", None, sig, foot, None, True)

    controls = None
    member = False
    if table is not None:
        try:
            controls = dp_lookup(table, s, sd)
        except OutOfGrid:
            controls = None
        reg = table.region if table.region is not None else table.with_region(bundle).region
        member = controls is not None and reg.contains(s, sd)
    if member:
        return RecoveryAction("continuous", controls, sig, None, None, lat)

    # predicted transition speed under the servo (or free flow without one)
    if table is not None and controls is not None:
        roll = policy_rollout(table, s, sd, eps)
        sd_t = roll["xd"][-1] if roll["ok"] else None
    else:
        sd_t = None
    if sd_t is None:
        m = plan.manifold
        u0 = s - m.x_foot
        v2 = sd * sd + m.omega * m.omega * ((s_t - m.x_foot) ** 2 - u0 * u0)
        sd_t = math.sqrt(v2) if v2 > 0 else 0.0
    foot = None
    if next_plan is not None:
        s_fn = replan_foot(s_t, sd_t, next_plan.spec.apex_speed, next_plan.omega)
        foot = _predict_lateral(plan, next_plan, s, sd, l_, ld, s_t, sd_t, s_fn)
    return RecoveryAction("replan", controls, sig, foot, (s_t, sd_t), lat)


def _predict_lateral(plan, next_plan, s, sd, l_, ld, s_t, sd_t, s_fn) -> tuple:
    """Global horizontal next-foot estimate: sagittal (re-planned or kept)
    plus a lateral foot searched from the predicted transition state."""
    w = plan.omega
    m = plan.manifold
    try:
        t_go = _flow_time(s - m.x_foot, sd, s_t - m.x_foot, w) if sd > 0 else 0.0
    except Exception:
        t_go = 0.0
    u = l_ - plan.lateral_foot
    l_t = u * math.cosh(w * t_go) + (ld / w) * math.sinh(w * t_go) + plan.lateral_foot
    ld_t = w * u * math.sinh(w * t_go) + ld * math.cosh(w * t_go)
    if s_fn is None:
        s_fn = next_plan.manifold.x_foot
    wn = next_plan.omega
    try:
        T = _apex_time(s_t - s_fn, sd_t, wn)
        bounds = (l_t - 0.8, l_t + 0.8)
        res = search_lateral_foot_info(l_t, ld_t, wn, bounds, 1e-9, 15, duration=T,
                                       y_guess=next_plan.lateral_foot)
        l_fn = res.y_foot
    except Exception:
        l_fn = next_plan.lateral_foot
    from .planner import to_global
    xy = to_global(plan.heading, (s_fn, l_fn))
    return float(xy[0]), float(xy[1])


# -- serialisation -----------------------------------------------------------

def _encode(a: np.ndarray) -> list:
    return [None if not math.isfinite(v) else float(v) for v in np.asarray(a, float).ravel()]


def save_policy(table: PolicyTable, path) -> Path:
    path = Path(path)
    doc = {
        "format": POLICY_FORMAT,
        "version": POLICY_VERSION,
        "header": {
            "stage_x": _encode(table.stage_x),
            "states": _encode(table.states),
            "omegas": _encode(table.omegas),
            "taus": _encode(table.taus),
            "shape": list(table.values.shape),
            "dp_params": table.dp.to_dict(),
            "step": table.step.to_dict(),
            "build_hash": table.build_hash,
        },
        "values": _encode(table.values),
        "policy": [int(v) for v in table.policy.ravel()],
    }
    if table.region is not None:
        doc["region"] = [int(v) for v in table.region.member.ravel()]
        doc["region_reach"] = [int(v) for v in table.region.reach.ravel()]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, separators=(",", ":")))
    return path


def load_policy(path) -> PolicyTable:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise PolicyFormatError(f"cannot read policy table {path}: {exc}") from exc
    if doc.get("format") != POLICY_FORMAT:
        raise PolicyFormatError(f"{path}: not a policy table")
    if doc.get("version") != POLICY_VERSION:
        raise PolicyFormatError(f"{path}: format version {doc.get('version')} != {POLICY_VERSION}")
    h = doc["header"]
    shape = tuple(h["shape"])

    def dec(a):
        return np.array([np.inf if v is None else v for v in a], dtype=float)

    stage_x, states = dec(h["stage_x"]), dec(h["states"])
    table = PolicyTable(stage_x, states, dec(h["omegas"]), dec(h["taus"]),
                        dec(doc["values"]).reshape(shape),
                        np.array(doc["policy"], dtype=np.int64).reshape(shape),
                        DpParams.from_dict(h["dp_params"]), StepModel(**h["step"]),
                        h["build_hash"])
    if "region" in doc:
        reg = RegionMap(stage_x, states, np.array(doc["region"], bool).reshape(shape),
                        np.array(doc["region_reach"], np.int64).reshape(shape))
        table = replace(table, region=reg)
    return table


class PolicyCache:
    """Builds policy tables per step on demand, optionally persisted.

    Steps that differ only by a translation along their heading share one
    table; the stage grid spans the step from entry to transition.
    """

    def __init__(self, template: DpParams, bundle: BundleSpec, robot: RobotParams,
                 directory=None, speed_margin: float = 1.0):
        self.template = template
        self.bundle = bundle
        self.robot = robot
        self.directory = Path(directory) if directory is not None else None
        self.speed_margin = speed_margin
        self._mem: dict = {}
        self.builds = 0

    def params_for(self, plan: StepPlan) -> DpParams:
        t = self.template
        s_e = plan.local(plan.entry)[0]
        s_t = plan.transition[0]
        lo, hi = (round(v, 9) for v in (s_e, s_t))
        vmax = max(t.state_range[1], plan.transition[1] + self.speed_margin)
        n_state = int(math.ceil((vmax - t.state_range[0]) / t.state_res - 1e-9))
        half = 0.5 * (t.omega_range[1] - t.omega_range[0])
        return replace(t, stage_range=(lo, hi),
                       state_range=(t.state_range[0], t.state_range[0] + n_state * t.state_res),
                       omega_range=(plan.omega - half, plan.omega + half),
                       omega_ref=plan.omega)

    def key(self, plan: StepPlan) -> str:
        dp = self.params_for(plan)
        f = plan.manifold.x_foot
        rel = replace(dp, stage_range=tuple(round(v - f, 9) for v in dp.stage_range))
        blob = json.dumps({"dp": rel.to_dict(), "apex": round(plan.spec.apex_speed, 12),
                           "pred": round(plan.transition[1], 12),
                           "eps": self.bundle.epsilon,
                           "robot": [self.robot.mass, self.robot.gravity]}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def get(self, plan: StepPlan) -> PolicyTable:
        k = self.key(plan)
        table = self._mem.get(k)
        if table is None and self.directory is not None:
            f = self.directory / f"policy_{k}.json"
            if f.exists():
                table = load_policy(f)
        if table is None:
            table = dp_build(self.params_for(plan), plan, self.bundle, self.robot,
                             xd_pred=plan.transition[1], region=True)
            self.builds += 1
            if self.directory is not None:
                save_policy(table, self.directory / f"policy_{k}.json")
        self._mem[k] = table
        f_new = plan.manifold.x_foot
        if abs(table.step.x_foot - f_new) > 0:
            table = table.relocated(f_new)
        return table


class RecoveryServo:
    """Sample-rate recovery controller for one step.

    Outside the bundle the DP control of the current stage is held until
    the next stage boundary; inside it the boundary-layer blend between the
    control held on entry and the reference is applied.
    """

    def __init__(self, table: PolicyTable, eps: float):
        self.table = table
        self.eps = float(eps)
        self._stage = None
        self._u_dp = None
        self._u_eps = None
        self.out_of_grid = False

    def stage_of(self, x: float) -> int:
        return int(math.floor((x - float(self.table.stage_x[0])) / self.table.stage_res))

    def control(self, x: float, xd: float) -> tuple:
        t = self.table
        sig = float(t.sigma(x, xd))
        if abs(sig) > self.eps:
            k = self.stage_of(x)
            if self._u_dp is None or k != self._stage:
                try:
                    self._u_dp = dp_lookup(t, x, xd)
                    self.out_of_grid = False
                except OutOfGrid:
                    self._u_dp = t.u_ref
                    self.out_of_grid = True
                self._stage = k
            self._u_eps = self._u_dp
            return self._u_dp
        self._stage = None
        u_eps = self._u_eps if self._u_eps is not None else t.u_ref
        return saturated_control(sig, self.eps, u_eps, u_eps, t.u_ref)


def closed_loop_rollout(table: PolicyTable, x: float, xd: float, bundle: BundleSpec,
                        dt: float = 1e-3, x_end: float | None = None) -> dict:
    """RK4 rollout of the sagittal pendulum under ``RecoveryServo`` from
    ``(x, xd)`` until ``x_end`` (default: the table's last stage)."""
    servo = RecoveryServo(table, bundle.epsilon)
    s = table.step
    x_end = float(table.stage_x[-1]) if x_end is None else float(x_end)
    st = np.array([x, 0.0, 0.0, xd, 0.0, 0.0])
    out = {k: [] for k in ("t", "x", "xd", "sigma", "omega", "tau")}
    t = 0.0
    n_max = int(1e6)
    for _ in range(n_max):
        w, tau = servo.control(st[0], st[3])
        out["t"].append(t)
        out["x"].append(st[0])
        out["xd"].append(st[3])
        out["sigma"].append(float(table.sigma(st[0], st[3])))
        out["omega"].append(w)
        out["tau"].append(tau)
        if st[0] >= x_end or st[3] <= 0.0:
            break
        p = np.array([w, 0.0, tau, 0.0, s.x_foot, 0.0, 0.0, 0.0, s.mass, s.gravity])
        st = kernels.rk4_path(st, p, dt, 1)[1]
        t += dt
    return {k: np.asarray(v) for k, v in out.items()}
