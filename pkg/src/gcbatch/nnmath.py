"""Dense tanh networks in float64: forward/backward, squared losses, Adam, gradient checks.

Hidden layers use tanh, the output layer is linear. Weights are stored
``(out, in)`` so that ``y = W @ x + b``.
"""
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


@dataclass
class MlpParams:
    layer_dims: list
    weights: list
    biases: list

    def __post_init__(self):
        self.layer_dims = [int(d) for d in self.layer_dims]
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ShapeError("layer count does not match layer_dims")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_dims[l + 1], self.layer_dims[l])
            if w.shape != want or b.shape != (want[0],):
                raise ShapeError(f"layer {l}: got {w.shape}/{b.shape}, expected {want}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NumericError(f"layer {l} has non-finite entries")

    @property
    def n_layers(self):
        return len(self.weights)

    def arrays(self):
        return [*self.weights, *self.biases]

    def copy(self):
        return MlpParams(list(self.layer_dims), [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    def to_bytes(self):
        return b"".join(a.tobytes() for a in self.arrays())

    def to_dict(self, meta=None):
        # repr() of a float64 round-trips exactly (17 significant digits max)
        return {
            "layer_dims": list(self.layer_dims),
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "meta": dict(meta or {}),
        }

    @classmethod
    def from_dict(cls, d):
        dims = [int(v) for v in d["layer_dims"]]
        weights = [np.asarray(w, dtype=np.float64).reshape(dims[l + 1], dims[l])
                   for l, w in enumerate(d["weights"])]
        biases = [np.asarray(b, dtype=np.float64) for b in d["biases"]]
        return cls(dims, weights, biases)


@dataclass
class AdamState:
    first_moment: list
    second_moment: list
    step_count: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass
class GradBundle:
    weights: list
    biases: list
    loss_value: float = 0.0
    input_grad: np.ndarray = field(default=None, repr=False)

    def arrays(self):
        return [*self.weights, *self.biases]


def mlp_init(layer_dims, seed):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    dims = list(layer_dims)
    if len(dims) < 2 or any(int(d) < 1 for d in dims):
        raise ConfigError(f"invalid layer_dims {dims!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for nin, nout in zip(dims[:-1], dims[1:]):
        lim = 1.0 / np.sqrt(nin)
        weights.append(rng.uniform(-lim, lim, size=(nout, nin)))
        biases.append(np.zeros(nout))
    return MlpParams(dims, weights, biases)


def zeros_like(params):
    return MlpParams(list(params.layer_dims), [np.zeros_like(w) for w in params.weights],
                     [np.zeros_like(b) for b in params.biases])


def _as_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != params.layer_dims[0]:
        raise ShapeError(f"input shape {x.shape} does not match input dim {params.layer_dims[0]}")
    return X, single


def forward_cache(params, X):
    """Batch forward returning every layer's activation (input first)."""
    acts = [X]
    z = X
    last = params.n_layers - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = z @ w.T + b
        if l < last:
            z = np.tanh(z)
        acts.append(z)
    return acts


def mlp_forward(params, x):
    """Forward pass for one input vector or a ``(batch, in)`` matrix."""
    X, single = _as_batch(params, x)
    out = forward_cache(params, X)[-1]
    return out[0] if single else out


def backward_cache(params, acts, upstream):
    """Reverse pass given cached activations; gradients are summed over the batch."""
    n = params.n_layers
    gw, gb = [None] * n, [None] * n
    delta = upstream
    for l in range(n - 1, -1, -1):
        if l < n - 1:
            delta = delta * (1.0 - acts[l + 1] ** 2)
        gw[l] = delta.T @ acts[l]
        gb[l] = delta.sum(axis=0)
        delta = delta @ params.weights[l]
    return GradBundle(gw, gb, 0.0, delta)


def mlp_backward(params, x, upstream_grad):
    X, single = _as_batch(params, x)
    G = np.asarray(upstream_grad, dtype=np.float64)
    G = G[None, :] if G.ndim == 1 else G
    if G.shape != (X.shape[0], params.layer_dims[-1]):
        raise ShapeError(f"upstream gradient shape {G.shape} does not match output")
    grads = backward_cache(params, forward_cache(params, X), G)
    if single:
        grads.input_grad = grads.input_grad[0]
    return grads


def mse(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def sq_norm_loss(pred, target):
    """Mean over rows of the squared L2 norm of ``pred - target``, and its gradient."""
    diff = pred - target
    m = diff.shape[0]
    return float(np.sum(diff * diff) / m), 2.0 * diff / m


def adam_init(params, lr=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
    return AdamState([np.zeros_like(a) for a in params.arrays()],
                     [np.zeros_like(a) for a in params.arrays()], 0, lr, beta1, beta2, epsilon)


def adam_step(params, grads, state):
    """One bias-corrected Adam update. Inputs are not modified."""
    p_arrs, g_arrs = params.arrays(), grads.arrays()
    if len(p_arrs) != len(g_arrs) or len(p_arrs) != len(state.first_moment):
        raise ShapeError("parameter, gradient and moment layouts differ")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(p_arrs, g_arrs, state.first_moment, state.second_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch {p.shape} / {g.shape} / {m.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_p.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon))
        new_m.append(m)
        new_v.append(v)
    n = params.n_layers
    out = MlpParams(list(params.layer_dims), new_p[:n], new_p[n:])
    return out, AdamState(new_m, new_v, t, state.lr, b1, b2, state.epsilon)


def grad_check(params, loss_fn, eps=1e-6, analytic=None):
    """Max over parameters of |analytic - central difference| / max(1, |analytic|).

    ``loss_fn(params)`` returns ``(loss, GradBundle)``; pass ``analytic``
    to check a precomputed gradient instead.
    """
    if not (0.0 < eps <= 1e-3):
        raise ConfigError(f"eps must lie in (0, 1e-3], got {eps}")
    loss, grads = loss_fn(params)
    if not np.isfinite(loss):
        raise NumericError("loss is not finite")
    grads = analytic if analytic is not None else grads
    probe = params.copy()
    worst = 0.0
    for arr, g in zip(probe.arrays(), grads.arrays()):
        flat = arr.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss_fn(probe)[0]
            flat[i] = orig - eps
            lm = loss_fn(probe)[0]
            flat[i] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NumericError("loss is not finite")
            fd = (lp - lm) / (2.0 * eps)
            worst = max(worst, abs(gflat[i] - fd) / max(1.0, abs(gflat[i])))
    return worst
