import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gcbatch.augment import (
    AugmentConfigError, CorruptDatasetError, PairedDataset, augment_dataset, augment_trajectory,
    draw_thetas, pair_errors, verify_paired,
)
from gcbatch.collect import collect_onpolicy, collect_random
from gcbatch.env import THRUSTSHIP, UNICYCLE, EnvConfig, env_step, rotate_state, Action

KINDS = [UNICYCLE, THRUSTSHIP]


@pytest.fixture(scope="module", params=KINDS)
def small(request):
    cfg = EnvConfig(kind=request.param)
    return cfg, collect_onpolicy(cfg, episodes=12, horizon=80, seed=4)


def test_theta_zero_is_identity(small):
    cfg, d = small
    for traj in d.trajectories:
        twin = augment_trajectory(cfg, traj, 0.0)
        assert twin.act.tobytes() == traj.act.tobytes()
        if cfg.kind == UNICYCLE:
            assert twin.pos.tobytes() == traj.pos.tobytes()
            assert twin.obs.tobytes() == traj.obs.tobytes()
        np.testing.assert_allclose(twin.goal, traj.goal, atol=1e-12)


def test_theta_pi_mirrors_endpoint():
    cfg = EnvConfig()
    d = collect_onpolicy(cfg, episodes=1, horizon=200, noise_schedule=(0.0, 0.0))
    traj = d.trajectories[0]
    twin = augment_trajectory(cfg, traj, math.pi)
    np.testing.assert_allclose(twin.goal[-1], -traj.goal[-1], atol=1e-9)


def test_twins_match_step_by_step_resimulation(small):
    # oracle: rotate the start with rotate_state and step with env_step in Python
    cfg, d = small
    traj = d.trajectories[3]
    th = 1.234
    twin = augment_trajectory(cfg, traj, th)
    s = rotate_state(traj.initial_state, th, traj.initial_state.position)
    for t in range(len(traj)):
        s, g = env_step(cfg, s, Action(*traj.act[t]))
        np.testing.assert_allclose(twin.goal[t], g, atol=1e-12)


def test_analytic_rotation_oracle(small):
    cfg, d = small
    p = augment_dataset(cfg, d, seed=9)
    worst = verify_paired(p)
    assert worst <= 1e-9
    assert p.n_transitions == 2 * d.n_transitions
    assert len(p.twins) == len(d.trajectories)
    assert all(t.check_contiguous() for t, _ in p.twins)


def test_theta_range_and_config_mismatch(small):
    cfg, d = small
    with pytest.raises(ValueError):
        augment_trajectory(cfg, d.trajectories[0], 2 * math.pi)
    with pytest.raises(ValueError):
        augment_trajectory(cfg, d.trajectories[0], -0.1)
    other = EnvConfig(kind=cfg.kind, drag=0.2)
    with pytest.raises(AugmentConfigError):
        augment_trajectory(other, d.trajectories[0], 0.5, source_cfg=cfg)


def test_one_trajectory_one_twin():
    cfg = EnvConfig()
    d = collect_onpolicy(cfg, episodes=1, horizon=5)
    assert len(augment_dataset(cfg, d, 0).twins) == 1
    with pytest.raises(ValueError):
        augment_dataset(cfg, type(d)(cfg, [], 0, d.collection_kind), 0)


def test_determinism(small):
    cfg, d = small
    a, b = augment_dataset(cfg, d, 21), augment_dataset(cfg, d, 21)
    assert [t for _, t in a.twins] == [t for _, t in b.twins]
    assert all(x.pos.tobytes() == y.pos.tobytes() for (x, _), (y, _) in zip(a.twins, b.twins))
    c = augment_dataset(cfg, d, 22)
    assert [t for _, t in a.twins] != [t for _, t in c.twins]


def test_multiple_twins_per_trajectory(small):
    cfg, d = small
    p = augment_dataset(cfg, d, 5, twins_per_trajectory=3)
    assert len(p.twins) == 3 * len(d.trajectories)
    verify_paired(p)
    ids = [t.episode_id for t in d.trajectories] + [t.episode_id for t, _ in p.twins]
    assert len(set(ids)) == len(ids)


def test_theta_distribution_is_uniform():
    # one-sample Kolmogorov-Smirnov statistic against U[0, 2pi), computed by hand
    th = np.sort(draw_thetas(10_000, 7))
    n = len(th)
    cdf = th / (2 * math.pi)
    ks = max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n))
    assert ks < 0.02
    assert th.min() >= 0 and th.max() < 2 * math.pi


def test_verifier_catches_corruption(small):
    cfg, d = small
    p = augment_dataset(cfg, d, 3)
    twin, th = p.twins[0]
    bad_act = type(twin)(twin.obs, twin.act.copy(), twin.pos, twin.goal, twin.initial_state, twin.episode_id)
    bad_act.act[5, 0] += 1e-3
    with pytest.raises(CorruptDatasetError):
        verify_paired(PairedDataset(p.base, [(bad_act, th)] + p.twins[1:]))
    bad_pos = type(twin)(twin.obs, twin.act, twin.pos + 1e-6, twin.goal, twin.initial_state, twin.episode_id)
    with pytest.raises(CorruptDatasetError):
        verify_paired(PairedDataset(p.base, [(bad_pos, th)] + p.twins[1:]))
    with pytest.raises(CorruptDatasetError):
        verify_paired(PairedDataset(p.base, [(twin, th + 0.01)] + p.twins[1:]))


def test_flatten_is_augmented_batch(small):
    cfg, d = small
    flat = augment_dataset(cfg, d, 1).flatten()
    assert flat.augmented and flat.n_transitions == 2 * d.n_transitions


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(KINDS), st.integers(0, 2**31), st.floats(0.0, 2 * math.pi, exclude_max=True))
def test_property_random_trajectory_equivalence(kind, seed, theta):
    cfg = EnvConfig(kind=kind)
    d = collect_random(cfg, episodes=1, horizon=60, seed=seed)
    traj = d.trajectories[0]
    same, err = pair_errors(cfg, traj, augment_trajectory(cfg, traj, theta), theta)
    assert same and err <= 1e-9
