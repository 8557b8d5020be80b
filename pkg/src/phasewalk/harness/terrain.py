"""Terrain scenarios and keyframe heuristics.

Random draws use numpy's ``Generator(PCG64(seed))``; the sequence of
``random()`` calls is fixed below so terrains are reproducible across
platforms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dynamics import ComSurface
from ..errors import ConfigError

KINDS = ("Flat", "StochasticStairs", "Inclined", "Disjointed")


@dataclass(frozen=True)
class TerrainSpec:
    kind: str = "Flat"
    n_steps: int = 10
    step_length: float = 0.5
    dh_min: float = 0.1
    dh_max: float = 0.3
    tilt_deg: float = 10.0
    seed: int = 0
    foot_offset: float = 0.0
    lateral_guess: float = 0.0
    ledge_height: float = 0.3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"terrain kind {self.kind!r} not in {KINDS}")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if not self.step_length > 0:
            raise ConfigError("step_length must be positive")
        if self.kind in ("StochasticStairs", "Inclined") and not (0 <= self.dh_min < self.dh_max):
            raise ConfigError("need 0 <= dh_min < dh_max")


@dataclass(frozen=True)
class TerrainStep:
    foot: tuple  # (x, y guess, z)
    surface: ComSurface
    dh: float  # height change from the previous foothold


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def sample_heights(spec: TerrainSpec) -> np.ndarray:
    """Foothold heights; the first foothold is at 0."""
    n = spec.n_steps
    xs = spec.foot_offset + spec.step_length * np.arange(n)
    h = np.zeros(n)
    if spec.kind == "Flat":
        return h
    if spec.kind == "Disjointed":
        h[n // 2:] = spec.ledge_height
        return h
    base = np.zeros(n)
    if spec.kind == "Inclined":
        base = math.tan(math.radians(spec.tilt_deg)) * (xs - xs[0])
    g = rng(spec.seed)
    steps = np.zeros(n)
    for k in range(1, n):
        u_sign, u_mag = g.random(), g.random()
        mag = spec.dh_min + (spec.dh_max - spec.dh_min) * u_mag
        steps[k] = mag if u_sign < 0.5 else -mag
    return base + np.cumsum(steps)


def sample_terrain(spec: TerrainSpec, apex_height: float = 1.0) -> list:
    """Footholds with CoM planes parallel to the local terrain slope.

    The slope at a foothold is the central difference of the neighbouring
    heights (one-sided at the ends); each plane sits ``apex_height`` above
    its foot.
    """
    n = spec.n_steps
    xs = spec.foot_offset + spec.step_length * np.arange(n)
    h = sample_heights(spec)
    out = []
    for k in range(n):
        lo, hi = max(k - 1, 0), min(k + 1, n - 1)
        a = 0.0 if hi == lo else float((h[hi] - h[lo]) / (xs[hi] - xs[lo]))
        c = float(h[k] + apex_height - a * xs[k])
        dh = 0.0 if k == 0 else float(h[k] - h[k - 1])
        out.append(TerrainStep((float(xs[k]), float(spec.lateral_guess), float(h[k])),
                               ComSurface(a, 0.0, c), dh))
    return out


def keyframe_speeds(terrain: list, base: float = 0.6, gain: float = 0.0,
                    floor: float = 0.1) -> list:
    """Apex speeds ``base + gain * dh`` clipped below at ``floor``."""
    return [max(floor, base + gain * s.dh) for s in terrain]
