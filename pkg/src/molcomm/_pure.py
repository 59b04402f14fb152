"""Pure-numpy versions of the kernels in ``_speedups.pyx``.

The Brownian kernel walks all live particles one step at a time instead of one
particle at a time, but each particle still consumes its own splitmix stream in
the same order, so both backends draw the same trajectories.
"""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ._random import GAMMA, MIX1, MIX2, PARTICLE_MULT

_GAMMA = np.uint64(GAMMA)
_MIX1 = np.uint64(MIX1)
_MIX2 = np.uint64(MIX2)
_PMULT = np.uint64(PARTICLE_MULT)
_S11, _S27, _S30, _S31 = (np.uint64(s) for s in (11, 27, 30, 31))
_LOW7 = np.uint64(127)
TWO_M52 = 2.0**-52
TWO_M53 = 2.0**-53
BRIDGE_CUTOFF = 20.0
TINY = 1e-12


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def _next(state: np.ndarray, idx: np.ndarray) -> np.ndarray:
    state[idx] += _GAMMA
    return _mix(state[idx])


def _uniform(state: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return ((_next(state, idx) >> _S11).astype(np.float64) + 0.5) * TWO_M53


def _normals(state: np.ndarray, zx: np.ndarray, zr: np.ndarray) -> np.ndarray:
    """One ziggurat normal per stream; advances ``state`` in place."""
    out = np.empty(state.shape[0])
    pending = np.arange(state.shape[0])
    while pending.size:
        a = _next(state, pending)
        u = (a >> _S11).astype(np.int64).astype(np.float64) * TWO_M52 - 1.0 + TWO_M53
        layer = (a & _LOW7).astype(np.intp)
        fast = np.abs(u) < zr[layer]
        out[pending[fast]] = u[fast] * zx[layer[fast]]
        if fast.all():
            break
        slow = ~fast
        idx, u, layer = pending[slow], u[slow], layer[slow]

        tail = layer == 0
        if tail.any():
            t_idx, t_neg = idx[tail], u[tail] < 0.0
            t_val = np.empty(t_idx.shape[0])
            todo = np.arange(t_idx.shape[0])
            while todo.size:
                xs = np.log(_uniform(state, t_idx[todo])) / zx[1]
                ys = np.log(_uniform(state, t_idx[todo]))
                ok = -2.0 * ys >= xs * xs
                t_val[todo[ok]] = xs[ok]
                todo = todo[~ok]
            out[t_idx] = np.where(t_neg, t_val - zx[1], zx[1] - t_val)

        wedge = ~tail
        w_idx, w_u, w_layer = idx[wedge], u[wedge], layer[wedge]
        xs = w_u * zx[w_layer]
        f0 = np.exp(-0.5 * (zx[w_layer] * zx[w_layer] - xs * xs))
        f1 = np.exp(-0.5 * (zx[w_layer + 1] * zx[w_layer + 1] - xs * xs))
        ok = f1 + _uniform(state, w_idx) * (f0 - f1) < 1.0
        out[w_idx[ok]] = xs[ok]
        pending = w_idx[~ok]
    return out


def normal_stream(state: int, count: int, zx: np.ndarray, zr: np.ndarray):
    st = np.array([state], dtype=np.uint64)
    out = np.empty(count)
    for j in range(count):
        out[j] = _normals(st, zx, zr)[0]
    return out, int(st[0])


def brownian_slot_counts(base_key, pid_start, pid_end, n_steps, steps_per_slot, n_slots,
                         sigma, r0, rr, bridge, zx, zr):
    counts = np.zeros(n_slots, dtype=np.int64)
    if n_steps > n_slots * steps_per_slot:
        raise ValueError("n_steps exceeds n_slots * steps_per_slot")
    if sigma <= 0.0 or pid_end <= pid_start:
        return counts
    pids = np.arange(pid_start, pid_end, dtype=np.uint64)
    state = _mix(np.uint64(base_key) ^ (pids * _PMULT))
    size = state.shape[0]
    x = np.zeros(size)
    y = np.zeros(size)
    z = np.full(size, float(r0))
    d0 = np.full(size, float(r0 - rr))
    rr2 = rr * rr
    sig2 = sigma * sigma
    for step in range(n_steps):
        if state.shape[0] == 0:
            break
        x += sigma * _normals(state, zx, zr)
        y += sigma * _normals(state, zx, zr)
        z += sigma * _normals(state, zx, zr)
        r2 = x * x + y * y + z * z
        hit = r2 <= rr2
        if bridge:
            d1 = np.sqrt(r2) - rr
            near = np.flatnonzero(~hit & (d0 * d1 < BRIDGE_CUTOFF * sig2))
            if near.size:
                crossed = _uniform(state, near) < np.exp(-2.0 * d0[near] * d1[near] / sig2)
                hit[near[crossed]] = True
            d0 = d1
        n_hit = int(np.count_nonzero(hit))
        if n_hit:
            counts[step // steps_per_slot] += n_hit
            keep = ~hit
            state, x, y, z, d0 = state[keep], x[keep], y[keep], z[keep], d0[keep]
    return counts


def bp_decode(edge_var, chk_ptr, var_ptr, var_edges, llr_in, max_iter, clamp):
    n = llr_in.shape[0]
    llr = np.clip(np.asarray(llr_in, dtype=np.float64), -clamp, clamp)
    starts = chk_ptr[:-1]
    degree = np.diff(chk_ptr)
    top = 1.0 - TINY
    v2c = llr[edge_var]
    hard = np.zeros(n, dtype=np.uint8)
    ok = False
    it = 0
    while it < max_iter:
        it += 1
        t = np.tanh(0.5 * v2c)
        small = np.abs(t) < TINY
        t[small] = np.where(t[small] < 0.0, -TINY, TINY)
        prod = np.multiply.reduceat(t, starts)
        c2v = 2.0 * np.arctanh(np.clip(np.repeat(prod, degree) / t, -top, top))
        post = llr + np.bincount(edge_var, weights=c2v, minlength=n)
        hard = (post < 0.0).astype(np.uint8)
        v2c = post[edge_var] - c2v
        ok = not np.bitwise_xor.reduceat(hard[edge_var], starts).any()
        if ok:
            break
    return hard, it, ok


def mixture_llr(x, mu0, w0, c0, mu1, w1, c1, history, clamp, start=0):
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    out = np.empty(n)

    def lse(xs, h, mu, w, c):
        d = xs[:, None] - mu[None, :h]
        return logsumexp(c[None, :h] - d * d * w[None, :h], axis=1)

    head = min(max(history - start, 0), n)
    for i in range(head):
        h = 1 << (start + i)
        out[i] = (lse(x[i:i + 1], h, mu0, w0, c0) - lse(x[i:i + 1], h, mu1, w1, c1))[0]
    if n > head:
        h = 1 << history
        out[head:] = lse(x[head:], h, mu0, w0, c0) - lse(x[head:], h, mu1, w1, c1)
    return np.clip(out, -clamp, clamp)
