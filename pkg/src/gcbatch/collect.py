"""Batch data collection with a non-goal-conditioned forward-walking expert."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .env import Action, EnvConfig, EnvState, env_reset, motion_block, observe_batch

ONPOLICY = "ONPOLICY"
RANDOM = "RANDOM"
EXPERT_GAIN = 2.0


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: Action
    one_step_goal: tuple
    agent_position: tuple


@dataclass
class Trajectory:
    """One episode stored column-wise: row ``t`` is the transition ``(s_t, a_t, g_t)``."""

    obs: np.ndarray
    act: np.ndarray
    pos: np.ndarray
    goal: np.ndarray
    initial_state: EnvState
    episode_id: int

    def __len__(self):
        return self.act.shape[0]

    @property
    def transitions(self):
        return [
            Transition(self.obs[t], Action(*self.act[t]), tuple(self.goal[t]), tuple(self.pos[t]))
            for t in range(len(self))
        ]

    def check_contiguous(self, tol=1e-12):
        return bool(np.all(np.abs(self.goal[:-1] - self.pos[1:]) <= tol))


@dataclass
class Dataset:
    env_config: EnvConfig
    trajectories: list
    seed: int
    collection_kind: str
    augmented: bool = False  # base + rotated twins flattened together

    @property
    def n_transitions(self):
        return sum(len(t) for t in self.trajectories)


def trajectory_from_rollout(cfg, initial_state, episode_id, pos, heading, motion, act):
    return Trajectory(
        obs=observe_batch(cfg, heading[:-1], motion[:-1]),
        act=np.ascontiguousarray(act, dtype=np.float64),
        pos=pos[:-1].copy(),
        goal=pos[1:].copy(),
        initial_state=initial_state,
        episode_id=episode_id,
    )


def expert_action(state, target_heading, noise_scale, rng):
    """Proportional heading controller at full thrust, plus uniform noise."""
    if noise_scale < 0:
        raise ValueError("noise_scale must be >= 0")
    n_thrust, n_steer = rng.uniform(-1.0, 1.0, size=2)
    thrust = min(1.0, max(-1.0, 1.0 + noise_scale * n_thrust))
    err = kernels.wrap_angle(target_heading - state.heading)
    steer = min(1.0, max(-1.0, EXPERT_GAIN * err + noise_scale * n_steer))
    return Action(thrust, steer)


def episode_rng(seed, episode_id):
    return np.random.default_rng([int(seed), int(episode_id)])


def _check_budget(episodes, horizon):
    if episodes < 1 or horizon < 1:
        raise ValueError("episodes and horizon must both be >= 1")


def noise_scales(episodes, start, end):
    if episodes == 1:
        return np.array([float(start)])
    return start + (end - start) * np.arange(episodes) / (episodes - 1)


def collect_onpolicy(cfg, episodes=500, horizon=200, noise_schedule=(0.5, 0.05), seed=0):
    """Expert walks along +x from the origin; noise anneals linearly across episodes.

    The anneal mimics a buffer gathered while a locomotion policy trained:
    early episodes are sloppy, late ones are clean.
    """
    _check_budget(episodes, horizon)
    scales = noise_scales(episodes, *noise_schedule)
    trajs = []
    for ep in range(episodes):
        rng = episode_rng(seed, ep)
        noise = rng.uniform(-1.0, 1.0, size=(horizon, 2))
        s0 = env_reset(cfg, (0.0, 0.0), 0.0)
        out = kernels.expert_rollout(cfg.kind_code, cfg.params(), np.array(s0.position), s0.heading,
                                     motion_block(cfg, s0), noise, float(scales[ep]), 0.0, EXPERT_GAIN)
        trajs.append(trajectory_from_rollout(cfg, s0, ep, *out))
    return Dataset(cfg, trajs, seed, ONPOLICY)


def collect_random(cfg, episodes=500, horizon=200, seed=0):
    """Uniform random actions from the same start configuration."""
    _check_budget(episodes, horizon)
    trajs = []
    for ep in range(episodes):
        rng = episode_rng(seed, ep)
        act = rng.uniform(-1.0, 1.0, size=(horizon, 2))
        s0 = env_reset(cfg, (0.0, 0.0), 0.0)
        pos, heading, motion = kernels.replay(cfg.kind_code, cfg.params(), np.array(s0.position),
                                              s0.heading, motion_block(cfg, s0), act)
        trajs.append(trajectory_from_rollout(cfg, s0, ep, pos, heading, motion, act))
    return Dataset(cfg, trajs, seed, RANDOM)
