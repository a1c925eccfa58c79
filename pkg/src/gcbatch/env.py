"""Planar locomotion simulators whose dynamics commute with rotations.

Two agents share one state layout:

* ``UNICYCLE`` keeps a scalar forward speed and always moves along its heading.
* ``THRUSTSHIP`` keeps a world-frame velocity vector and thrusts along its heading.

Rotating a state about any pivot and then stepping gives the same result as
stepping and then rotating, up to floating-point rounding.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels

UNICYCLE = "UNICYCLE"
THRUSTSHIP = "THRUSTSHIP"
KINDS = (UNICYCLE, THRUSTSHIP)
TWO_PI = kernels._pykernels.TWO_PI


class DegenerateGoalError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    kind: str = UNICYCLE
    dt: float = 0.1
    v_max: float = 1.0
    accel_max: float = 1.0
    turn_max: float = 1.5
    drag: float = 0.1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown environment kind {self.kind!r}")
        for name in ("dt", "v_max", "accel_max", "turn_max", "drag"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.drag * self.dt < 1.0:
            raise ValueError("drag * dt must be < 1 for stable integration")

    @property
    def kind_code(self):
        return KINDS.index(self.kind)

    @property
    def obs_dim(self):
        return 3 if self.kind == UNICYCLE else 4

    def params(self):
        return np.array([self.dt, self.v_max, self.accel_max, self.turn_max, self.drag])

    def to_dict(self):
        return {"kind": self.kind, "dt": self.dt, "v_max": self.v_max,
                "accel_max": self.accel_max, "turn_max": self.turn_max, "drag": self.drag}

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], dt=float(d["dt"]), v_max=float(d["v_max"]),
                   accel_max=float(d["accel_max"]), turn_max=float(d["turn_max"]),
                   drag=float(d["drag"]))


@dataclass(frozen=True)
class EnvState:
    position: tuple
    heading: float
    speed: float = 0.0
    velocity: tuple = (0.0, 0.0)
    step_index: int = 0


@dataclass(frozen=True)
class Action:
    thrust: float = 0.0
    steer: float = 0.0

    def clamped(self):
        return Action(min(1.0, max(-1.0, float(self.thrust))), min(1.0, max(-1.0, float(self.steer))))


def _state_from_kernel(cfg, pos, heading, motion, step_index):
    pos = (float(pos[0]), float(pos[1]))
    if cfg.kind == UNICYCLE:
        return EnvState(pos, float(heading), speed=float(motion[0]), step_index=step_index)
    return EnvState(pos, float(heading), velocity=(float(motion[0]), float(motion[1])),
                    step_index=step_index)


def motion_block(cfg, state):
    if cfg.kind == UNICYCLE:
        return np.array([state.speed, 0.0])
    return np.array(state.velocity, dtype=np.float64)


def env_reset(cfg, position=(0.0, 0.0), heading=0.0):
    vals = [float(position[0]), float(position[1]), float(heading)]
    if not all(math.isfinite(v) for v in vals):
        raise ArithmeticError("reset arguments must be finite")
    return EnvState((vals[0], vals[1]), kernels.norm_angle(vals[2]))


def env_step(cfg, state, action):
    """Advance one step; returns ``(next_state, one_step_goal)``."""
    a = action.clamped()
    pos, h, m = kernels.step_batch(
        cfg.kind_code, cfg.params(),
        np.array([state.position], dtype=np.float64), np.array([state.heading], dtype=np.float64),
        motion_block(cfg, state)[None, :], np.array([[a.thrust, a.steer]]),
    )
    nxt = _state_from_kernel(cfg, pos[0], h[0], m[0], state.step_index + 1)
    if not all(math.isfinite(v) for v in nxt.position):
        raise ArithmeticError("non-finite position after step")
    return nxt, nxt.position


def rotate_xy(xy, theta, pivot=(0.0, 0.0)):
    """Rotate points ``(..., 2)`` about ``pivot`` by ``theta``."""
    xy = np.asarray(xy, dtype=np.float64)
    c, s = math.cos(theta), math.sin(theta)
    dx = xy[..., 0] - pivot[0]
    dy = xy[..., 1] - pivot[1]
    return np.stack([pivot[0] + c * dx - s * dy, pivot[1] + s * dx + c * dy], axis=-1)


def rotate_state(state, theta, pivot=None):
    if theta == 0.0:
        return state
    pivot = state.position if pivot is None else pivot
    pos = rotate_xy(state.position, theta, pivot)
    v = rotate_xy(state.velocity, theta)
    vel = (float(v[0]), float(v[1]))
    return replace(state, position=(float(pos[0]), float(pos[1])),
                   heading=kernels.norm_angle(state.heading + theta), velocity=vel)


def observe(cfg, state):
    c, s = math.cos(state.heading), math.sin(state.heading)
    if cfg.kind == UNICYCLE:
        return np.array([c, s, state.speed])
    return np.array([c, s, state.velocity[0], state.velocity[1]])


def observe_batch(cfg, heading, motion):
    """Observations for arrays of headings ``(n,)`` and motion blocks ``(n, 2)``."""
    cols = [np.cos(heading), np.sin(heading), motion[:, 0]]
    if cfg.kind == THRUSTSHIP:
        cols.append(motion[:, 1])
    return np.stack(cols, axis=1)


def rotate_obs(cfg, obs, theta):
    """Rotate the oriented blocks (heading unit vector, velocity) of observations."""
    obs = np.array(obs, dtype=np.float64)
    obs[..., 0:2] = rotate_xy(obs[..., 0:2], theta)
    if cfg.kind == THRUSTSHIP:
        obs[..., 2:4] = rotate_xy(obs[..., 2:4], theta)
    return obs


def goal_input(position, goal_position):
    d = np.asarray(goal_position, dtype=np.float64) - np.asarray(position, dtype=np.float64)
    n = math.hypot(d[0], d[1])
    if n == 0.0:
        raise DegenerateGoalError("goal coincides with the agent position")
    return d / n


def goal_inputs(position, goal_position):
    """Row-wise unit vectors toward goals plus a mask of non-degenerate rows."""
    d = np.asarray(goal_position, dtype=np.float64) - np.asarray(position, dtype=np.float64)
    n = np.hypot(d[:, 0], d[:, 1])
    ok = n > 0.0
    out = np.zeros_like(d)
    out[ok] = d[ok] / n[ok, None]
    return out, ok
