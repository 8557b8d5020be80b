"""Prismatic inverted pendulum on a linear CoM surface.

The CoM moves on the plane ``z = a x + b y + c`` while a point foot and a
flywheel torque act on it.  With ``z_apex`` the CoM height above the foot,
the pendulum frequency is ``omega = sqrt(g / z_apex)`` and the horizontal
accelerations are affine in the state, so the zero-torque flow has a
closed form (cosh/sinh) used throughout the planner.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import InconsistentOmega, MaxSamplesExceeded, NonPositiveApexHeight

OMEGA_RTOL = 1e-9


@dataclass(frozen=True)
class PhaseState:
    x: float
    y: float
    z: float
    xd: float
    yd: float
    zd: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise ValueError(f"non-finite phase state {self.as_tuple()}")

    def as_tuple(self) -> tuple:
        return (self.x, self.y, self.z, self.xd, self.yd, self.zd)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    @classmethod
    def from_array(cls, arr) -> "PhaseState":
        return cls(*(float(v) for v in arr))

    def with_velocity_jump(self, dxd: float = 0.0, dyd: float = 0.0,
                           surface: "ComSurface | None" = None) -> "PhaseState":
        """Instantaneous velocity impulse; keeps zd on the surface if given."""
        xd = self.xd + dxd
        yd = self.yd + dyd
        zd = self.zd if surface is None else surface.a * xd + surface.b * yd
        return PhaseState(self.x, self.y, self.z, xd, yd, zd)


@dataclass(frozen=True)
class ComSurface:
    a: float = 0.0
    b: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c)):
            raise ValueError("surface coefficients must be finite")

    def height(self, x: float, y: float) -> float:
        return self.a * x + self.b * y + self.c

    def apex_height(self, foot: Sequence[float]) -> float:
        return self.a * foot[0] + self.b * foot[1] + self.c - foot[2]

    def project(self, x: float, y: float, xd: float, yd: float) -> PhaseState:
        """State on the surface with the given horizontal components."""
        return PhaseState(x, y, self.height(x, y), xd, yd, self.a * xd + self.b * yd)


@dataclass(frozen=True)
class RobotParams:
    mass: float = 1.0
    gravity: float = 9.81

    def __post_init__(self):
        if not (self.mass > 0 and self.gravity > 0):
            raise ValueError("mass and gravity must be positive")

    @property
    def weight(self) -> float:
        return self.mass * self.gravity


@dataclass(frozen=True)
class ControlInput:
    omega: float
    tau_x: float = 0.0
    tau_y: float = 0.0
    tau_z: float = 0.0
    foot: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError(f"omega must be positive, got {self.omega}")
        for t in (self.tau_x, self.tau_y, self.tau_z):
            if not math.isfinite(t):
                raise ValueError("torques must be finite")
        object.__setattr__(self, "foot", tuple(float(v) for v in self.foot))
        if len(self.foot) != 3:
            raise ValueError("foot must be a 3-vector")

    @classmethod
    def nominal(cls, surface: ComSurface, foot, params: RobotParams) -> "ControlInput":
        return cls(omega_from_surface(surface, foot, params), foot=tuple(foot))

    def within(self, tau_limit: float) -> bool:
        return all(abs(t) <= tau_limit for t in (self.tau_x, self.tau_y, self.tau_z))

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, self.tau_x, self.tau_y, self.tau_z, *self.foot])


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples; ``states`` rows are (x, y, z, xd, yd, zd) and
    ``controls`` rows are (omega, tau_x, tau_y, tau_z, foot_x, foot_y, foot_z)."""

    t: np.ndarray
    states: np.ndarray
    controls: np.ndarray = field(default=None)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        s = np.asarray(self.states, dtype=float).reshape(-1, 6)
        if t.ndim != 1 or t.shape[0] < 1 or t.shape[0] != s.shape[0]:
            raise ValueError("trajectory needs >= 1 sample with matching shapes")
        if t.shape[0] > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("trajectory time stamps must be strictly increasing")
        c = self.controls
        c = np.zeros((t.shape[0], 7)) if c is None else np.asarray(c, dtype=float)
        if c.ndim == 1:
            c = np.broadcast_to(c, (t.shape[0], 7)).copy()
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "controls", c)

    def __len__(self):
        return self.t.shape[0]

    def state(self, i: int) -> PhaseState:
        return PhaseState.from_array(self.states[i])

    @property
    def first(self) -> PhaseState:
        return self.state(0)

    @property
    def last(self) -> PhaseState:
        return self.state(-1)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, "x y z xd yd zd".split().index(name)]

    def shifted(self, dt: float) -> "Trajectory":
        return Trajectory(self.t + dt, self.states, self.controls)


def omega_from_surface(surface: ComSurface, foot, params: RobotParams) -> float:
    z_apex = surface.apex_height(foot)
    if not z_apex > 0:
        raise NonPositiveApexHeight(f"apex height {z_apex} <= 0 at foot {tuple(foot)}")
    return math.sqrt(params.gravity / z_apex)


def check_omega(inp: ControlInput, surface: ComSurface, params: RobotParams) -> None:
    w = omega_from_surface(surface, inp.foot, params)
    if abs(inp.omega - w) > OMEGA_RTOL * w:
        raise InconsistentOmega(f"omega {inp.omega} vs surface value {w}")


def pipm_derivative(state: PhaseState, inp: ControlInput, surface: ComSurface,
                    params: RobotParams, recovery: bool = False) -> np.ndarray:
    """Time derivative (xd, yd, zd, xdd, ydd, zdd) of the pendulum state.

    ``recovery=True`` treats omega as a free control and skips the
    consistency check against the surface.
    """
    if not recovery:
        check_omega(inp, surface, params)
    k = inp.omega * inp.omega
    mg = params.mass * params.gravity
    fx, fy, _ = inp.foot
    xdd = k * (state.x - fx) - k * (inp.tau_y + surface.b * inp.tau_z) / mg
    ydd = k * (state.y - fy) - k * (inp.tau_x + surface.a * inp.tau_z) / mg
    zdd = surface.a * xdd + surface.b * ydd
    return np.array([state.xd, state.yd, state.zd, xdd, ydd, zdd])


def analytic_flow(x0: float, xd0: float, x_foot: float, omega: float, t) -> tuple:
    """Closed-form zero-torque flow; ``t`` may be negative or an array."""
    wt = omega * np.asarray(t, dtype=float)
    ch, sh = np.cosh(wt), np.sinh(wt)
    u0 = x0 - x_foot
    x = u0 * ch + (xd0 / omega) * sh + x_foot
    xd = omega * u0 * sh + xd0 * ch
    if np.ndim(x) == 0:
        return float(x), float(xd)
    return x, xd


# -- stop predicates -------------------------------------------------------

class StopCondition:
    """Vectorised stop predicate: ``mask(states, t)`` flags terminal rows."""

    def mask(self, states: np.ndarray, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, state: PhaseState, t: float = 0.0) -> bool:
        return bool(self.mask(state.as_array()[None, :], np.array([t]))[0])


class StopAtX(StopCondition):
    """Fires once x has reached ``x`` moving in ``direction`` (+1 / -1)."""

    def __init__(self, x: float, direction: int = 1):
        self.x, self.direction = float(x), 1 if direction >= 0 else -1

    def mask(self, states, t):
        return (states[:, 0] - self.x) * self.direction >= 0.0


class StopAfter(StopCondition):
    def __init__(self, duration: float):
        self.duration = abs(float(duration))

    def mask(self, states, t):
        return np.abs(t) >= self.duration - 1e-12


class StopWhen(StopCondition):
    """Wraps a per-sample callable ``f(PhaseState) -> bool``."""

    def __init__(self, fn: Callable[[PhaseState], bool]):
        self.fn = fn

    def mask(self, states, t):
        return np.array([bool(self.fn(PhaseState.from_array(r))) for r in states])


def _as_stop(stop) -> StopCondition:
    if isinstance(stop, StopCondition):
        return stop
    return StopWhen(stop)


def kernel_params(inp: ControlInput, surface: ComSurface, params: RobotParams) -> np.ndarray:
    return np.array([inp.omega, inp.tau_x, inp.tau_y, inp.tau_z, inp.foot[0], inp.foot[1],
                     surface.a, surface.b, params.mass, params.gravity])


def integrate(state: PhaseState, inp: ControlInput, surface: ComSurface,
              params: RobotParams, dt: float, stop, max_samples: int = 2_000_000,
              method: str = "rk4", recovery: bool = False, t0: float = 0.0) -> Trajectory:
    """Fixed-step rollout until the first sample satisfying ``stop``.

    A negative ``dt`` integrates backward in time; the returned trajectory is
    always in increasing time order, so for backward runs the terminal
    sample comes first.  ``method`` is ``"rk4"`` or ``"euler"``.
    """
    if dt == 0 or not math.isfinite(dt):
        raise ValueError("dt must be finite and nonzero")
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown method {method!r}")
    if not recovery:
        check_omega(inp, surface, params)
    cond = _as_stop(stop)
    p = kernel_params(inp, surface, params)
    euler = 1 if method == "euler" else 0

    s0 = state.as_array()
    chunks = [s0[None, :]]
    n_done = 0
    hit = None
    if cond.mask(s0[None, :], np.array([0.0]))[0]:
        hit = 0
    chunk = 256
    while hit is None:
        if n_done + 1 >= max_samples:
            raise MaxSamplesExceeded(f"stop condition not met within {max_samples} samples")
        n = min(chunk, max_samples - 1 - n_done)
        path = kernels.rk4_path(chunks[-1][-1], p, dt, n, euler)[1:]
        times = dt * np.arange(n_done + 1, n_done + n + 1)
        m = cond.mask(path, times)
        idx = np.flatnonzero(m)
        if idx.size:
            path = path[: idx[0] + 1]
            hit = n_done + idx[0] + 1
        chunks.append(path)
        n_done += path.shape[0]
        chunk = min(chunk * 2, 65536)

    states = np.concatenate(chunks, axis=0)
    t = t0 + dt * np.arange(states.shape[0])
    if dt < 0:
        states, t = states[::-1], t[::-1]
    return Trajectory(t, states, inp.as_array())
