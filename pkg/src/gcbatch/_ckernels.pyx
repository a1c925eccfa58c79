# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled rollout kernels.

Every function here has a twin in ``_pykernels`` with the same signature and
the same floating-point operation order for the environment dynamics.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fmod, sqrt, tanh, floor

cnp.import_array()

cdef double TWO_PI = 6.283185307179586
cdef double PI = 3.141592653589793


cdef inline double _norm_angle(double a) noexcept nogil:
    cdef double r = fmod(a, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r -= TWO_PI
    return r


cdef inline double _wrap(double a) noexcept nogil:
    cdef double r = fmod(a + PI, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    return r - PI


cdef inline double _clamp(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline void _step(int kind, const double[::1] p, double* st,
                       double thrust, double steer) noexcept nogil:
    # st = [x, y, heading, m0, m1]
    cdef double dt = p[0], vmax = p[1], accel = p[2], turn = p[3], drag = p[4]
    cdef double nh, c, s, sp, vx, vy, n
    thrust = _clamp(thrust, -1.0, 1.0)
    steer = _clamp(steer, -1.0, 1.0)
    nh = _norm_angle(st[2] + turn * steer * dt)
    c = cos(nh)
    s = sin(nh)
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
        n = sqrt(vx * vx + vy * vy)
        if n > vmax:
            vx = vx * (vmax / n)
            vy = vy * (vmax / n)
        st[3] = vx
        st[4] = vy
        st[0] = st[0] + vx * dt
        st[1] = st[1] + vy * dt
    st[2] = nh


def norm_angle(double a):
    return _norm_angle(a)


def wrap_angle(double a):
    return _wrap(a)


def step_batch(int kind, const double[::1] params, const double[:, ::1] pos,
               const double[::1] heading, const double[:, ::1] motion,
               const double[:, ::1] act):
    cdef Py_ssize_t n = pos.shape[0], i
    out_pos = np.empty((n, 2))
    out_h = np.empty(n)
    out_m = np.empty((n, 2))
    cdef double[:, ::1] op = out_pos
    cdef double[::1] oh = out_h
    cdef double[:, ::1] om = out_m
    cdef double st[5]
    with nogil:
        for i in range(n):
            st[0] = pos[i, 0]; st[1] = pos[i, 1]; st[2] = heading[i]
            st[3] = motion[i, 0]; st[4] = motion[i, 1]
            _step(kind, params, st, act[i, 0], act[i, 1])
            op[i, 0] = st[0]; op[i, 1] = st[1]; oh[i] = st[2]
            om[i, 0] = st[3]; om[i, 1] = st[4]
    return out_pos, out_h, out_m


def replay(int kind, const double[::1] params, const double[::1] pos0, double heading0,
           const double[::1] motion0, const double[:, ::1] actions):
    cdef Py_ssize_t T = actions.shape[0], t
    out_pos = np.empty((T + 1, 2))
    out_h = np.empty(T + 1)
    out_m = np.empty((T + 1, 2))
    cdef double[:, ::1] op = out_pos
    cdef double[::1] oh = out_h
    cdef double[:, ::1] om = out_m
    cdef double st[5]
    st[0] = pos0[0]; st[1] = pos0[1]; st[2] = heading0; st[3] = motion0[0]; st[4] = motion0[1]
    with nogil:
        op[0, 0] = st[0]; op[0, 1] = st[1]; oh[0] = st[2]; om[0, 0] = st[3]; om[0, 1] = st[4]
        for t in range(T):
            _step(kind, params, st, actions[t, 0], actions[t, 1])
            op[t + 1, 0] = st[0]; op[t + 1, 1] = st[1]; oh[t + 1] = st[2]
            om[t + 1, 0] = st[3]; om[t + 1, 1] = st[4]
    return out_pos, out_h, out_m


def expert_rollout(int kind, const double[::1] params, const double[::1] pos0, double heading0,
                   const double[::1] motion0, const double[:, ::1] noise, double noise_scale,
                   double target_heading, double kp):
    cdef Py_ssize_t T = noise.shape[0], t
    out_pos = np.empty((T + 1, 2))
    out_h = np.empty(T + 1)
    out_m = np.empty((T + 1, 2))
    out_a = np.empty((T, 2))
    cdef double[:, ::1] op = out_pos
    cdef double[::1] oh = out_h
    cdef double[:, ::1] om = out_m
    cdef double[:, ::1] oa = out_a
    cdef double st[5]
    cdef double thrust, steer
    st[0] = pos0[0]; st[1] = pos0[1]; st[2] = heading0; st[3] = motion0[0]; st[4] = motion0[1]
    with nogil:
        op[0, 0] = st[0]; op[0, 1] = st[1]; oh[0] = st[2]; om[0, 0] = st[3]; om[0, 1] = st[4]
        for t in range(T):
            thrust = _clamp(1.0 + noise_scale * noise[t, 0], -1.0, 1.0)
            steer = _clamp(kp * _wrap(target_heading - st[2]) + noise_scale * noise[t, 1], -1.0, 1.0)
            oa[t, 0] = thrust; oa[t, 1] = steer
            _step(kind, params, st, thrust, steer)
            op[t + 1, 0] = st[0]; op[t + 1, 1] = st[1]; oh[t + 1] = st[2]
            om[t + 1, 0] = st[3]; om[t + 1, 1] = st[4]
    return out_pos, out_h, out_m, out_a


def _unpack(shapes, w, b):
    layers = []
    wo = bo = 0
    for nin, nout in shapes:
        layers.append((w[wo:wo + nin * nout].reshape(nout, nin), b[bo:bo + nout]))
        wo += nin * nout
        bo += nout
    return layers


def policy_rollout(int kind, const double[::1] params, shapes, acts, w, b,
                   const double[:, ::1] pos0, const double[::1] heading0,
                   const double[:, ::1] motion0, const double[:, ::1] goals,
                   long max_steps, double threshold, bint record=False):
    """Closed-loop goal-reaching episodes, stepped in lockstep across episodes.

    Dynamics, distance bookkeeping and input assembly run in C over the active
    set; the network is applied to the whole active batch with numpy matmuls,
    which beats a scalar matvec once more than a handful of episodes run.
    """
    layers = _unpack(np.asarray(shapes), np.asarray(w), np.asarray(b))
    act_flags = [bool(a) for a in np.asarray(acts)]
    cdef Py_ssize_t n = pos0.shape[0], e, i, k, na, nk
    cdef Py_ssize_t obs_dim = 3 if kind == 0 else 4
    state = np.empty((n, 5))
    cdef double[:, ::1] S = state
    for e in range(n):
        S[e, 0] = pos0[e, 0]; S[e, 1] = pos0[e, 1]; S[e, 2] = heading0[e]
        S[e, 3] = motion0[e, 0]; S[e, 4] = motion0[e, 1]
    closest = np.full(n, 1e308)
    reached = np.zeros(n, dtype=np.int8)
    steps = np.full(n, max_steps, dtype=np.int64)
    cdef double[::1] cl = closest
    cdef cnp.int8_t[::1] rc = reached
    cdef cnp.int64_t[::1] sk = steps
    cdef Py_ssize_t R = max_steps + 1 if record else 0
    paths = np.full((n if record else 0, R, 3), np.nan)
    cdef double[:, :, ::1] pv = paths
    active_arr = np.arange(n, dtype=np.int64)
    cdef cnp.int64_t[::1] active = active_arr
    zin = np.empty((n, obs_dim + 2))
    cdef double[:, ::1] Z = zin
    cdef double[:, ::1] out
    cdef double dx, dy, d
    na = n
    for k in range(max_steps + 1):
        if na == 0:
            break
        nk = 0
        with nogil:
            for i in range(na):
                e = active[i]
                if record:
                    pv[e, k, 0] = S[e, 0]; pv[e, k, 1] = S[e, 1]; pv[e, k, 2] = S[e, 2]
                dx = goals[e, 0] - S[e, 0]
                dy = goals[e, 1] - S[e, 1]
                d = sqrt(dx * dx + dy * dy)
                if d < cl[e]:
                    cl[e] = d
                if k == max_steps:
                    continue
                if d <= threshold:
                    rc[e] = 1
                    sk[e] = k
                    continue
                active[nk] = e
                Z[nk, 0] = cos(S[e, 2])
                Z[nk, 1] = sin(S[e, 2])
                Z[nk, 2] = S[e, 3]
                if obs_dim == 4:
                    Z[nk, 3] = S[e, 4]
                Z[nk, obs_dim] = dx / d
                Z[nk, obs_dim + 1] = dy / d
                nk += 1
        na = nk
        if na == 0 or k == max_steps:
            break
        z = zin[:na]
        for (W, bias), a in zip(layers, act_flags):
            z = z @ W.T + bias
            if a:
                z = np.tanh(z)
        out = np.ascontiguousarray(z)
        with nogil:
            for i in range(na):
                _step(kind, params, &S[active[i], 0], out[i, 0], out[i, 1])
    return closest, reached, steps, paths
