"""Rotation augmentation: replay each trajectory's actions from a rotated start."""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .collect import Dataset, trajectory_from_rollout
from .env import TWO_PI, motion_block, rotate_obs, rotate_state, rotate_xy


class AugmentConfigError(ValueError):
    pass


class CorruptDatasetError(ValueError):
    pass


@dataclass
class PairedDataset:
    base: Dataset
    twins: list  # (Trajectory, theta), aligned with base.trajectories
    seed: int = 0

    @property
    def env_config(self):
        return self.base.env_config

    @property
    def n_transitions(self):
        return self.base.n_transitions + sum(len(t) for t, _ in self.twins)

    def flatten(self):
        """All base and twin trajectories as one dataset (the augmented batch)."""
        trajs = list(self.base.trajectories) + [t for t, _ in self.twins]
        return Dataset(self.base.env_config, trajs, self.base.seed, self.base.collection_kind, True)


def augment_trajectory(cfg, traj, theta, episode_id=None, source_cfg=None):
    """Rotate the start configuration by ``theta`` and re-simulate the same actions."""
    if source_cfg is not None and source_cfg != cfg:
        raise AugmentConfigError("trajectory was recorded under a different EnvConfig")
    if not (0.0 <= theta < TWO_PI):
        raise ValueError(f"theta must lie in [0, 2pi), got {theta}")
    s0 = rotate_state(traj.initial_state, theta, traj.initial_state.position)
    pos, heading, motion = kernels.replay(cfg.kind_code, cfg.params(), np.array(s0.position),
                                          s0.heading, motion_block(cfg, s0), traj.act)
    ep = traj.episode_id if episode_id is None else episode_id
    return trajectory_from_rollout(cfg, s0, ep, pos, heading, motion, traj.act.copy())


def draw_thetas(n, seed):
    return np.random.default_rng(seed).uniform(0.0, TWO_PI, size=n)


def augment_dataset(cfg, d, seed, twins_per_trajectory=1):
    """One rotated twin per trajectory (or ``twins_per_trajectory`` of them).

    Angles are drawn up front from ``seed`` so the result does not depend on
    the order in which trajectories are re-simulated.
    """
    if not d.trajectories:
        raise ValueError("cannot augment an empty dataset")
    n = len(d.trajectories)
    thetas = draw_thetas(n * twins_per_trajectory, seed)
    twins = []
    for k in range(twins_per_trajectory):
        for i, traj in enumerate(d.trajectories):
            th = float(thetas[k * n + i])
            twin = augment_trajectory(cfg, traj, th, episode_id=(k + 1) * n + traj.episode_id,
                                      source_cfg=d.env_config)
            twins.append((twin, th))
    return PairedDataset(d, twins, seed)


def pair_errors(cfg, base, twin, theta):
    """Largest deviation of a twin from the analytic rotation of its base trajectory.

    Returns ``(actions_identical, max_abs_error)``. Rotation is about the
    base trajectory's initial position.
    """
    if len(base) != len(twin):
        return False, math.inf
    pivot = base.initial_state.position
    same_actions = base.act.tobytes() == twin.act.tobytes()
    err = max(
        np.max(np.abs(rotate_xy(base.pos, theta, pivot) - twin.pos)),
        np.max(np.abs(rotate_xy(base.goal, theta, pivot) - twin.goal)),
        np.max(np.abs(rotate_obs(cfg, base.obs, theta) - twin.obs)),
    )
    return same_actions, float(err)


def verify_paired(paired, tol=1e-9):
    """Raise CorruptDatasetError unless every twin is a valid equivalent trajectory."""
    cfg = paired.env_config
    base = paired.base.trajectories
    if len(paired.twins) % len(base):
        raise CorruptDatasetError("twin count is not a multiple of the base count")
    worst = 0.0
    for j, (twin, theta) in enumerate(paired.twins):
        b = base[j % len(base)]
        same, err = pair_errors(cfg, b, twin, theta)
        if not same:
            raise CorruptDatasetError(f"twin {j}: action sequence differs from its base")
        if not err <= tol:
            raise CorruptDatasetError(f"twin {j}: deviates from analytic rotation by {err:.3g}")
        worst = max(worst, err)
    return worst
