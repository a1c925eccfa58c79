import math

import numpy as np
import pytest

from gcbatch import _pykernels, kernels
from gcbatch.collect import collect_onpolicy
from gcbatch.env import EnvConfig, THRUSTSHIP, UNICYCLE
from gcbatch.learn import EquivModel, GcpModel, kernel_net
from gcbatch.nnmath import mlp_forward, mlp_init

needs_c = pytest.mark.skipif("cython" not in kernels.available(), reason="extension not built")
KINDS = [UNICYCLE, THRUSTSHIP]


def test_backend_selection():
    assert kernels.BACKEND in kernels.available()
    assert kernels.load("python") is _pykernels
    with pytest.raises(ValueError):
        kernels.load("fortran")


@pytest.mark.parametrize("a", [0.0, -1e-300, 2 * math.pi, -7.5, 1e6, math.pi])
def test_python_angle_helpers(a):
    n = _pykernels.norm_angle(a)
    assert 0.0 <= n < 2 * math.pi and math.cos(n) == pytest.approx(math.cos(a), abs=1e-9)
    w = _pykernels.wrap_angle(a)
    assert -math.pi <= w < math.pi and math.sin(w) == pytest.approx(math.sin(a), abs=1e-9)


@needs_c
@pytest.mark.parametrize("a", [0.0, -1e-300, 2 * math.pi, -7.5, 1e6, math.pi, -math.pi])
def test_angle_helpers_agree(a):
    c = kernels.load("cython")
    assert c.norm_angle(a) == _pykernels.norm_angle(a)
    assert c.wrap_angle(a) == _pykernels.wrap_angle(a)


def _inputs(kind, n, seed):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-5, 5, (n, 2))
    h = rng.uniform(0, 2 * math.pi, n)
    m = rng.uniform(-0.5, 0.5, (n, 2))
    if kind == UNICYCLE:
        m[:, 0] = np.abs(m[:, 0])
        m[:, 1] = 0.0
    return pos, h, m, rng.uniform(-1.5, 1.5, (n, 2))


@needs_c
@pytest.mark.parametrize("kind", KINDS)
def test_step_and_replay_bit_identical(kind):
    c = kernels.load("cython")
    cfg = EnvConfig(kind=kind)
    pos, h, m, act = _inputs(kind, 200, 1)
    for a, b in zip(c.step_batch(cfg.kind_code, cfg.params(), pos, h, m, act),
                    _pykernels.step_batch(cfg.kind_code, cfg.params(), pos, h, m, act)):
        assert np.asarray(a).tobytes() == np.asarray(b).tobytes()
    for a, b in zip(c.replay(cfg.kind_code, cfg.params(), pos[0], h[0], m[0], act),
                    _pykernels.replay(cfg.kind_code, cfg.params(), pos[0], h[0], m[0], act)):
        assert np.asarray(a).tobytes() == np.asarray(b).tobytes()


@needs_c
@pytest.mark.parametrize("kind", KINDS)
def test_expert_rollout_bit_identical(kind):
    c = kernels.load("cython")
    cfg = EnvConfig(kind=kind)
    noise = np.random.default_rng(2).uniform(-1, 1, (150, 2))
    args = (cfg.kind_code, cfg.params(), np.zeros(2), 0.0, np.zeros(2), noise, 0.3, 0.7, 2.0)
    for a, b in zip(c.expert_rollout(*args), _pykernels.expert_rollout(*args)):
        assert np.asarray(a).tobytes() == np.asarray(b).tobytes()


@needs_c
@pytest.mark.parametrize("kind", KINDS)
def test_collection_scale_bit_identical(kind):
    # 20k expert steps visit enough headings to expose last-ulp libm differences
    cfg = EnvConfig(kind=kind)
    before = kernels.BACKEND
    out = {}
    try:
        for b in ("cython", "python"):
            kernels.use(b)
            out[b] = collect_onpolicy(cfg, 100, 200)
    finally:
        kernels.use(before)
    for a, b in zip(out["cython"].trajectories, out["python"].trajectories):
        assert a.obs.tobytes() == b.obs.tobytes() and a.pos.tobytes() == b.pos.tobytes()


def _rollout_inputs(kind, n):
    cfg = EnvConfig(kind=kind)
    rng = np.random.default_rng(3)
    enc = mlp_init([cfg.obs_dim + 2, 16, 4], 1)
    pol = mlp_init([4, 12, 2], 2)
    pol.biases[-1][0] = 0.8
    model = EquivModel(enc, pol, cfg)
    h = rng.uniform(0, 2 * math.pi, n)
    goals = np.stack([3 * np.cos(h + 0.3), 3 * np.sin(h + 0.3)], 1)
    return cfg, model, np.zeros((n, 2)), h, np.zeros((n, 2)), goals


@needs_c
@pytest.mark.parametrize("kind", KINDS)
def test_policy_rollout_agrees(kind):
    c = kernels.load("cython")
    cfg, model, pos, h, m, goals = _rollout_inputs(kind, 40)
    args = (cfg.kind_code, cfg.params(), *kernel_net(model), pos, h, m, goals, 300, 0.5, True)
    cc, cr, cs, cp = c.policy_rollout(*args)
    pc, pr, ps, pp = _pykernels.policy_rollout(*args)
    np.testing.assert_allclose(cc, pc, rtol=0, atol=1e-9)
    np.testing.assert_array_equal(cr, pr)
    np.testing.assert_array_equal(cs, ps)
    np.testing.assert_allclose(cp, pp, rtol=0, atol=1e-9, equal_nan=True)


@pytest.mark.parametrize("kind", KINDS)
def test_python_rollout_forward_matches_nnmath(kind):
    # first action of the kernel rollout equals the nnmath forward pass on the same input
    cfg, model, pos, h, m, goals = _rollout_inputs(kind, 5)
    *_, paths = _pykernels.policy_rollout(cfg.kind_code, cfg.params(), *kernel_net(model),
                                          pos, h, m, goals, 1, 0.5, True)
    for i in range(5):
        u = goals[i] / np.linalg.norm(goals[i])
        obs = [math.cos(h[i]), math.sin(h[i]), 0.0] + ([0.0] if kind == THRUSTSHIP else [])
        a = np.clip(mlp_forward(model.policy, mlp_forward(model.encoder, np.array(obs + list(u)))), -1, 1)
        want_h = _pykernels.norm_angle(h[i] + cfg.turn_max * a[1] * cfg.dt)
        assert paths[i, 1, 2] == pytest.approx(want_h, abs=1e-12)


def test_gcp_model_packs_single_network():
    cfg = EnvConfig()
    shapes, acts, w, b = kernel_net(GcpModel(mlp_init([5, 8, 8, 2], 0), cfg))
    assert shapes.tolist() == [[5, 8], [8, 8], [8, 2]] and acts.tolist() == [1, 1, 0]
