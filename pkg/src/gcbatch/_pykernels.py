"""Pure-Python/numpy fallback for the compiled rollout kernels.

Sequential kernels (``replay``, ``expert_rollout``) follow the compiled
operation order exactly, so both backends agree bit for bit there. The batch
kernels vectorise across episodes with numpy and agree to rounding.
"""
import math

import numpy as np

TWO_PI = 6.283185307179586
PI = 3.141592653589793


def norm_angle(a):
    r = math.fmod(a, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r -= TWO_PI
    return r


def wrap_angle(a):
    r = math.fmod(a + PI, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    return r - PI


def _clamp(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def _step(kind, p, st, thrust, steer):
    dt, vmax, accel, turn, drag = p
    thrust = _clamp(thrust, -1.0, 1.0)
    steer = _clamp(steer, -1.0, 1.0)
    nh = norm_angle(st[2] + turn * steer * dt)
    c = math.cos(nh)
    s = math.sin(nh)
    if kind == 0:
        sp = st[3] + accel * thrust * dt - drag * st[3] * dt
        sp = _clamp(sp, 0.0, vmax)
        st[3] = sp
        st[4] = 0.0
        st[0] = st[0] + sp * c * dt
        st[1] = st[1] + sp * s * dt
    else:
        vx = (1.0 - drag * dt) * st[3] + accel * thrust * dt * c
        vy = (1.0 - drag * dt) * st[4] + accel * thrust * dt * s
        n = math.sqrt(vx * vx + vy * vy)
        if n > vmax:
            vx = vx * (vmax / n)
            vy = vy * (vmax / n)
        st[3] = vx
        st[4] = vy
        st[0] = st[0] + vx * dt
        st[1] = st[1] + vy * dt
    st[2] = nh


def _norm_angle_arr(a):
    r = np.fmod(a, TWO_PI)
    r = np.where(r < 0.0, r + TWO_PI, r)
    return np.where(r >= TWO_PI, r - TWO_PI, r)


def _step_arr(kind, p, x, y, h, m0, m1, thrust, steer):
    dt, vmax, accel, turn, drag = (float(v) for v in p)
    thrust = np.clip(thrust, -1.0, 1.0)
    steer = np.clip(steer, -1.0, 1.0)
    nh = _norm_angle_arr(h + turn * steer * dt)
    c = np.cos(nh)
    s = np.sin(nh)
    if kind == 0:
        sp = np.clip(m0 + accel * thrust * dt - drag * m0 * dt, 0.0, vmax)
        return x + sp * c * dt, y + sp * s * dt, nh, sp, np.zeros_like(sp)
    vx = (1.0 - drag * dt) * m0 + accel * thrust * dt * c
    vy = (1.0 - drag * dt) * m1 + accel * thrust * dt * s
    n = np.sqrt(vx * vx + vy * vy)
    over = n > vmax
    scale = np.where(over, vmax / np.where(over, n, 1.0), 1.0)
    vx = np.where(over, vx * scale, vx)
    vy = np.where(over, vy * scale, vy)
    return x + vx * dt, y + vy * dt, nh, vx, vy


def step_batch(kind, params, pos, heading, motion, act):
    x, y, h, m0, m1 = _step_arr(kind, params, pos[:, 0], pos[:, 1], heading,
                                motion[:, 0], motion[:, 1], act[:, 0], act[:, 1])
    return np.stack([x, y], axis=1), h, np.stack([m0, m1], axis=1)


def _trace(kind, params, pos0, heading0, motion0, T, policy):
    p = [float(v) for v in params]
    st = [float(pos0[0]), float(pos0[1]), float(heading0), float(motion0[0]), float(motion0[1])]
    out_pos = np.empty((T + 1, 2))
    out_h = np.empty(T + 1)
    out_m = np.empty((T + 1, 2))
    out_a = np.empty((T, 2))
    out_pos[0] = st[0:2]
    out_h[0] = st[2]
    out_m[0] = st[3:5]
    for t in range(T):
        thrust, steer = policy(t, st)
        out_a[t] = thrust, steer
        _step(kind, p, st, thrust, steer)
        out_pos[t + 1] = st[0:2]
        out_h[t + 1] = st[2]
        out_m[t + 1] = st[3:5]
    return out_pos, out_h, out_m, out_a


def replay(kind, params, pos0, heading0, motion0, actions):
    acts = actions.tolist()
    out = _trace(kind, params, pos0, heading0, motion0, len(acts), lambda t, st: acts[t])
    return out[:3]


def expert_rollout(kind, params, pos0, heading0, motion0, noise, noise_scale, target_heading, kp):
    nz = noise.tolist()

    def policy(t, st):
        thrust = _clamp(1.0 + noise_scale * nz[t][0], -1.0, 1.0)
        steer = _clamp(kp * wrap_angle(target_heading - st[2]) + noise_scale * nz[t][1], -1.0, 1.0)
        return thrust, steer

    return _trace(kind, params, pos0, heading0, motion0, len(nz), policy)


def _unpack(shapes, w, b):
    layers = []
    wo = bo = 0
    for nin, nout in shapes:
        layers.append((w[wo:wo + nin * nout].reshape(nout, nin), b[bo:bo + nout]))
        wo += nin * nout
        bo += nout
    return layers


def policy_rollout(kind, params, shapes, acts, w, b, pos0, heading0, motion0, goals,
                   max_steps, threshold, record=False):
    """Closed-loop goal-reaching episodes, vectorised across episodes."""
    layers = _unpack(np.asarray(shapes), np.asarray(w), np.asarray(b))
    n = pos0.shape[0]
    x, y = pos0[:, 0].copy(), pos0[:, 1].copy()
    h = heading0.copy()
    m0, m1 = motion0[:, 0].copy(), motion0[:, 1].copy()
    closest = np.full(n, 1e308)
    reached = np.zeros(n, dtype=np.int8)
    steps = np.full(n, max_steps, dtype=np.int64)
    paths = np.full((n if record else 0, max_steps + 1 if record else 0, 3), np.nan)
    active = np.arange(n)
    for k in range(max_steps + 1):
        if active.size == 0:
            break
        if record:
            paths[active, k, 0] = x[active]
            paths[active, k, 1] = y[active]
            paths[active, k, 2] = h[active]
        dx = goals[active, 0] - x[active]
        dy = goals[active, 1] - y[active]
        d = np.sqrt(dx * dx + dy * dy)
        closest[active] = np.minimum(closest[active], d)
        if k == max_steps:
            break
        hit = d <= threshold
        reached[active[hit]] = 1
        steps[active[hit]] = k
        keep = ~hit
        active, dx, dy, d = active[keep], dx[keep], dy[keep], d[keep]
        if active.size == 0:
            break
        ha = h[active]
        if kind == 0:
            obs = [np.cos(ha), np.sin(ha), m0[active]]
        else:
            obs = [np.cos(ha), np.sin(ha), m0[active], m1[active]]
        z = np.stack(obs + [dx / d, dy / d], axis=1)
        for (W, bias), a in zip(layers, acts):
            z = z @ W.T + bias
            if a:
                z = np.tanh(z)
        nx, ny, nh, n0, n1 = _step_arr(kind, params, x[active], y[active], ha,
                                       m0[active], m1[active], z[:, 0], z[:, 1])
        x[active], y[active], h[active], m0[active], m1[active] = nx, ny, nh, n0, n1
    return closest, reached, steps, paths
