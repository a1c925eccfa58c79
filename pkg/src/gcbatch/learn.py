"""Behaviour-cloned goal-conditioned policies.

``train_gcp`` fits a single network ``[obs, goal_dir] -> action``.
``train_equivalence`` fits a Siamese encoder on rotated pairs plus a policy
head that reads the mean pair embedding.
"""
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .env import Action, EnvConfig, goal_input, goal_inputs, observe
from .nnmath import (
    MlpParams, ShapeError, adam_init, adam_step, backward_cache, forward_cache, mlp_forward,
    mlp_init, sq_norm_loss,
)

log = logging.getLogger(__name__)

GCP = "gcp"
EQUIV = "equiv"
EVAL_CHUNK = 32768


class EmptyDatasetError(ValueError):
    pass


class CorruptPairsError(ValueError):
    pass


@dataclass
class TrainConfig:
    lam: float = 0.25
    embed_dim: int = 10
    lr: float = 0.001
    minibatch: int = 512
    epochs: int = 50
    hidden_dims: tuple = (64, 64)
    policy_hidden_dims: tuple = (50, 50)
    seed: int = 0

    def __post_init__(self):
        self.hidden_dims = tuple(int(v) for v in self.hidden_dims)
        self.policy_hidden_dims = tuple(int(v) for v in self.policy_hidden_dims)
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.embed_dim < 1 or self.minibatch < 1 or self.epochs < 1 or not self.lr > 0:
            raise ValueError("embed_dim, minibatch, epochs and lr must be positive")

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["hidden_dims"] = list(self.hidden_dims)
        d["policy_hidden_dims"] = list(self.policy_hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


@dataclass
class GcpModel:
    params: MlpParams
    env_config: EnvConfig
    train_config: TrainConfig = field(default_factory=TrainConfig)
    method: str = "gcp"
    trace: list = field(default_factory=list)          # (epoch, loss) on the full data
    minibatch_log: list = field(default_factory=list)  # (step, epoch, loss)
    skipped: int = 0

    kind = GCP

    def networks(self):
        return [self.params]


@dataclass
class EquivModel:
    encoder: MlpParams
    policy: MlpParams
    env_config: EnvConfig
    train_config: TrainConfig = field(default_factory=TrainConfig)
    method: str = "equivalence"
    trace: list = field(default_factory=list)          # (epoch, total, l_enc, l_pi)
    minibatch_log: list = field(default_factory=list)  # (step, epoch, total, l_enc, l_pi)
    skipped: int = 0

    kind = EQUIV

    def __post_init__(self):
        if self.encoder.layer_dims[-1] != self.policy.layer_dims[0]:
            raise ShapeError("encoder output dim must equal policy input dim")

    def networks(self):
        return [self.encoder, self.policy]

    def embed(self, x):
        return mlp_forward(self.encoder, x)


def build_input(transition, goal_position):
    return np.concatenate([transition.obs, goal_input(transition.agent_position, goal_position)])


def trajectory_inputs(traj):
    """Training inputs for one trajectory and a mask of non-degenerate rows."""
    u, ok = goal_inputs(traj.pos, traj.goal)
    return np.concatenate([traj.obs, u], axis=1), ok


def gcp_arrays(dataset):
    xs, ys, oks = [], [], []
    for traj in dataset.trajectories:
        x, ok = trajectory_inputs(traj)
        xs.append(x)
        ys.append(traj.act)
        oks.append(ok)
    X, Y, ok = np.concatenate(xs), np.concatenate(ys), np.concatenate(oks)
    skipped = int((~ok).sum())
    if skipped:
        log.warning("skipped %d stationary transitions (no goal direction)", skipped)
    return X[ok], Y[ok], skipped


def pair_arrays(paired):
    """Aligned ``(x, x_twin, action)`` rows for every base/twin transition pair."""
    base = paired.base.trajectories
    if not base or len(paired.twins) % len(base):
        raise CorruptPairsError("twins are not aligned with the base trajectories")
    xs, xts, ys, oks = [], [], [], []
    for j, (twin, _theta) in enumerate(paired.twins):
        b = base[j % len(base)]
        if len(b) != len(twin) or b.act.tobytes() != twin.act.tobytes():
            raise CorruptPairsError(f"twin {j} is not aligned with base episode {b.episode_id}")
        x, ok = trajectory_inputs(b)
        xt, okt = trajectory_inputs(twin)
        xs.append(x)
        xts.append(xt)
        ys.append(b.act)
        oks.append(ok & okt)
    X, Xt, Y, ok = (np.concatenate(v) for v in (xs, xts, ys, oks))
    skipped = int((~ok).sum())
    if skipped:
        log.warning("skipped %d stationary transition pairs (no goal direction)", skipped)
    return X[ok], Xt[ok], Y[ok], skipped


def _batches(n, size, rng):
    perm = rng.permutation(n)
    for i in range(0, n, size):
        yield perm[i:i + size]


def _chunked_mean(fn, n):
    total = 0.0
    for i in range(0, n, EVAL_CHUNK):
        sl = slice(i, min(n, i + EVAL_CHUNK))
        total += np.asarray(fn(sl)) * (sl.stop - sl.start)
    return total / n


def gcp_loss(params, X, Y):
    """Mean squared action error and its gradient bundle."""
    acts = forward_cache(params, X)
    loss, g = sq_norm_loss(acts[-1], Y)
    grads = backward_cache(params, acts, g)
    grads.loss_value = loss
    return loss, grads


def train_gcp(data, cfg=None):
    """Fit ``[obs, goal_dir] -> action`` by minibatch Adam on the squared action error."""
    cfg = cfg or TrainConfig()
    X, Y, skipped = gcp_arrays(data)
    if X.shape[0] == 0:
        raise EmptyDatasetError("no non-degenerate transitions to train on")
    env_cfg = data.env_config
    params = mlp_init([X.shape[1], *cfg.hidden_dims, 2], [cfg.seed, 1])
    state = adam_init(params, lr=cfg.lr)
    rng = np.random.default_rng([cfg.seed, 0])

    def full_loss(p):
        return float(_chunked_mean(
            lambda sl: np.sum((mlp_forward(p, X[sl]) - Y[sl]) ** 2) / (sl.stop - sl.start), len(X)))

    # row 0 is the full-data loss at initialisation; later rows average the epoch's minibatches
    trace = [(0, full_loss(params))]
    mb_log = []
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        first = len(mb_log)
        for idx in _batches(len(X), cfg.minibatch, rng):
            loss, grads = gcp_loss(params, X[idx], Y[idx])
            params, state = adam_step(params, grads, state)
            step += 1
            mb_log.append((step, epoch, loss))
        trace.append((epoch, float(np.mean([r[2] for r in mb_log[first:]]))))
        log.info("gcp epoch %d loss %.6f", epoch, trace[-1][1])
    return GcpModel(params, env_cfg, cfg, _method_name(data), trace, mb_log, skipped)


def _method_name(data):
    from .collect import RANDOM

    if data.collection_kind == RANDOM:
        return "random"
    if data.augmented:
        return "augmented"
    return "onpolicy"


def equivalence_terms(encoder, policy, X, Xt, A, lam, with_grads=True):
    """Joint Siamese loss on a batch of pairs.

    Both branches run through the same ``encoder`` object. Returns
    ``(total, l_enc, l_pi, enc_grads, pol_grads)``; gradients are ``None``
    when ``with_grads`` is false.
    """
    if X.shape != Xt.shape:
        raise ShapeError(f"pair inputs differ in shape: {X.shape} vs {Xt.shape}")
    acts_a = forward_cache(encoder, X)
    acts_b = forward_cache(encoder, Xt)
    h, ht = acts_a[-1], acts_b[-1]
    l_enc, g_enc = sq_norm_loss(h, ht)
    acts_p = forward_cache(policy, 0.5 * (h + ht))
    l_pi, g_pi = sq_norm_loss(acts_p[-1], A)
    total = lam * l_enc + (1.0 - lam) * l_pi
    if not with_grads:
        return total, l_enc, l_pi, None, None
    gp = backward_cache(policy, acts_p, (1.0 - lam) * g_pi)
    half = 0.5 * gp.input_grad
    ga = backward_cache(encoder, acts_a, lam * g_enc + half)
    gb = backward_cache(encoder, acts_b, -lam * g_enc + half)
    for arr, other in zip(ga.arrays(), gb.arrays()):
        arr += other
    ga.loss_value = gp.loss_value = total
    return total, l_enc, l_pi, ga, gp


def equivalence_loss(model, pair_inputs, action, lam):
    """``(total, l_enc, l_pi)`` for one pair or a batch of pairs."""
    x, xt = (np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in pair_inputs)
    a = action
    if isinstance(a, Action):
        a = [a.thrust, a.steer]
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    total, l_enc, l_pi, _, _ = equivalence_terms(model.encoder, model.policy, x, xt, a, lam,
                                                 with_grads=False)
    return total, l_enc, l_pi


def train_equivalence(paired, cfg=None):
    """Jointly fit encoder and policy head on aligned rotated pairs with Adam."""
    cfg = cfg or TrainConfig()
    X, Xt, A, skipped = pair_arrays(paired)
    if X.shape[0] == 0:
        raise EmptyDatasetError("no non-degenerate transition pairs to train on")
    enc = mlp_init([X.shape[1], *cfg.hidden_dims, cfg.embed_dim], [cfg.seed, 1])
    pol = mlp_init([cfg.embed_dim, *cfg.policy_hidden_dims, 2], [cfg.seed, 2])
    s_enc, s_pol = adam_init(enc, lr=cfg.lr), adam_init(pol, lr=cfg.lr)
    rng = np.random.default_rng([cfg.seed, 0])
    lam = cfg.lam

    def full_loss(e, p):
        return tuple(_chunked_mean(
            lambda sl: equivalence_terms(e, p, X[sl], Xt[sl], A[sl], lam, with_grads=False)[:3],
            len(X)))

    trace = [(0, *full_loss(enc, pol))]
    mb_log = []
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        first = len(mb_log)
        for idx in _batches(len(X), cfg.minibatch, rng):
            total, l_enc, l_pi, g_enc, g_pol = equivalence_terms(enc, pol, X[idx], Xt[idx], A[idx], lam)
            enc, s_enc = adam_step(enc, g_enc, s_enc)
            pol, s_pol = adam_step(pol, g_pol, s_pol)
            step += 1
            mb_log.append((step, epoch, total, l_enc, l_pi))
        rows = np.array([r[2:] for r in mb_log[first:]])
        trace.append((epoch, *(float(v) for v in rows.mean(axis=0))))
        log.info("equiv epoch %d total %.6f l_enc %.3g l_pi %.6f", epoch, *trace[-1][1:])
    return EquivModel(enc, pol, paired.env_config, cfg, "equivalence", trace, mb_log, skipped)


def _clamp_action(v):
    return Action(min(1.0, max(-1.0, float(v[0]))), min(1.0, max(-1.0, float(v[1]))))


def model_inputs(model, state, goal_position):
    return np.concatenate([observe(model.env_config, state), goal_input(state.position, goal_position)])


def infer_action(model, state, goal_position):
    """Clamped action toward ``goal_position``. Equivalence models feed ``E(x)`` to the head."""
    x = model_inputs(model, state, goal_position)
    if model.kind == GCP:
        return _clamp_action(mlp_forward(model.params, x))
    return _clamp_action(mlp_forward(model.policy, mlp_forward(model.encoder, x)))


def kernel_net(model):
    """Pack a model into the flat layout the rollout kernels consume."""
    shapes, acts, ws, bs = [], [], [], []
    for net in model.networks():
        n = net.n_layers
        for l, (w, b) in enumerate(zip(net.weights, net.biases)):
            shapes.append((w.shape[1], w.shape[0]))
            acts.append(1 if l < n - 1 else 0)
            ws.append(w.ravel())
            bs.append(b)
    return (np.array(shapes, dtype=np.int64), np.array(acts, dtype=np.int64),
            np.ascontiguousarray(np.concatenate(ws)), np.ascontiguousarray(np.concatenate(bs)))


def embedding_gap(model, paired, seed=0):
    """Mean squared embedding distance of equivalent pairs vs. randomly mismatched pairs.

    Returns ``(mean_sq_equiv, median_sq_mismatched, mean_equiv, median_mismatched)``.
    """
    X, Xt, _, _ = pair_arrays(paired)
    h = mlp_forward(model.encoder, X)
    ht = mlp_forward(model.encoder, Xt)
    perm = np.random.default_rng(seed).permutation(len(X))
    d_eq = np.sum((h - ht) ** 2, axis=1)
    d_mis = np.sum((h - ht[perm]) ** 2, axis=1)
    return float(d_eq.mean()), float(np.median(d_mis)), float(np.sqrt(d_eq).mean()), \
        float(np.median(np.sqrt(d_mis)))
