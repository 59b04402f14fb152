# cython: language_level=3
"""Compiled inner loops.  ``molcomm._pure`` mirrors every function here."""
import numpy as np

cimport numpy as cnp
from libc.math cimport atanh, exp, fabs, log, sqrt, tanh, INFINITY
from libc.stdint cimport int32_t, int64_t, uint64_t

cnp.import_array()

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL
cdef uint64_t PARTICLE_MULT = 0xD1B54A32D192ED03ULL
cdef double TWO_M52 = 2.220446049250313e-16
cdef double TWO_M53 = 1.1102230246251565e-16
cdef double BRIDGE_CUTOFF = 20.0
cdef double TINY = 1e-12


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline uint64_t next64(uint64_t* state) noexcept nogil:
    state[0] += GAMMA
    return mix64(state[0])


cdef inline double uniform(uint64_t* state) noexcept nogil:
    return (<double>(next64(state) >> 11) + 0.5) * TWO_M53


cdef inline double ziggurat(uint64_t* state, const double* zx, const double* zr) noexcept nogil:
    cdef uint64_t a
    cdef int i
    cdef double u, x, y, f0, f1
    while True:
        a = next64(state)
        u = <double>(<int64_t>(a >> 11)) * TWO_M52 - 1.0 + TWO_M53
        i = <int>(a & 127)
        if fabs(u) < zr[i]:
            return u * zx[i]
        if i == 0:
            while True:
                x = log(uniform(state)) / zx[1]
                y = log(uniform(state))
                if -2.0 * y >= x * x:
                    break
            return x - zx[1] if u < 0.0 else zx[1] - x
        x = u * zx[i]
        f0 = exp(-0.5 * (zx[i] * zx[i] - x * x))
        f1 = exp(-0.5 * (zx[i + 1] * zx[i + 1] - x * x))
        if f1 + uniform(state) * (f0 - f1) < 1.0:
            return x


def normal_stream(uint64_t state, Py_ssize_t count, const double[::1] zx, const double[::1] zr):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(count)
    cdef Py_ssize_t j
    for j in range(count):
        out[j] = ziggurat(&state, &zx[0], &zr[0])
    return out, state


def brownian_slot_counts(uint64_t base_key, int64_t pid_start, int64_t pid_end,
                         int64_t n_steps, int64_t steps_per_slot, int64_t n_slots,
                         double sigma, double r0, double rr, bint bridge,
                         const double[::1] zx, const double[::1] zr):
    """Absorption counts per slot for particles ``pid_start <= pid < pid_end``."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts_arr = np.zeros(n_slots, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    cdef int64_t pid, step
    cdef uint64_t state
    cdef double x, y, z, r2, d0, d1
    cdef double rr2 = rr * rr
    cdef double sig2 = sigma * sigma
    cdef const double* px = &zx[0]
    cdef const double* pr = &zr[0]
    if n_steps > n_slots * steps_per_slot:
        raise ValueError("n_steps exceeds n_slots * steps_per_slot")
    if sigma <= 0.0:
        return counts_arr
    with nogil:
        for pid in range(pid_start, pid_end):
            state = mix64(base_key ^ (<uint64_t>pid * PARTICLE_MULT))
            x = 0.0
            y = 0.0
            z = r0
            d0 = r0 - rr
            for step in range(n_steps):
                x = x + sigma * ziggurat(&state, px, pr)
                y = y + sigma * ziggurat(&state, px, pr)
                z = z + sigma * ziggurat(&state, px, pr)
                r2 = x * x + y * y + z * z
                if r2 <= rr2:
                    counts[step // steps_per_slot] += 1
                    break
                if bridge:
                    d1 = sqrt(r2) - rr
                    if d0 * d1 < BRIDGE_CUTOFF * sig2:
                        if uniform(&state) < exp(-2.0 * d0 * d1 / sig2):
                            counts[step // steps_per_slot] += 1
                            break
                    d0 = d1
    return counts_arr


def bp_decode(const int32_t[::1] edge_var, const int32_t[::1] chk_ptr,
              const int32_t[::1] var_ptr, const int32_t[::1] var_edges,
              const double[::1] llr_in, int max_iter, double clamp):
    """Flooding sum-product decoding; edges are stored check-major."""
    cdef Py_ssize_t n = llr_in.shape[0]
    cdef Py_ssize_t m = chk_ptr.shape[0] - 1
    cdef Py_ssize_t n_edges = edge_var.shape[0]
    cdef double[::1] llr = np.empty(n)
    cdef double[::1] v2c = np.empty(n_edges)
    cdef double[::1] c2v = np.empty(n_edges)
    cdef double[::1] th = np.empty(n_edges)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] hard_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] hard = hard_arr
    cdef Py_ssize_t v, c, e, j
    cdef int it
    cdef int parity
    cdef bint ok = False
    cdef double prod, t, ext, post, value
    cdef double top = 1.0 - TINY

    for v in range(n):
        value = llr_in[v]
        if value > clamp:
            value = clamp
        elif value < -clamp:
            value = -clamp
        llr[v] = value
    for e in range(n_edges):
        v2c[e] = llr[edge_var[e]]

    it = 0
    with nogil:
        while it < max_iter:
            it += 1
            for c in range(m):
                prod = 1.0
                for e in range(chk_ptr[c], chk_ptr[c + 1]):
                    t = tanh(0.5 * v2c[e])
                    if fabs(t) < TINY:
                        t = -TINY if t < 0.0 else TINY
                    th[e] = t
                    prod = prod * t
                for e in range(chk_ptr[c], chk_ptr[c + 1]):
                    ext = prod / th[e]
                    if ext > top:
                        ext = top
                    elif ext < -top:
                        ext = -top
                    c2v[e] = 2.0 * atanh(ext)
            for v in range(n):
                post = llr[v]
                for j in range(var_ptr[v], var_ptr[v + 1]):
                    post = post + c2v[var_edges[j]]
                hard[v] = 1 if post < 0.0 else 0
                for j in range(var_ptr[v], var_ptr[v + 1]):
                    e = var_edges[j]
                    v2c[e] = post - c2v[e]
            ok = True
            for c in range(m):
                parity = 0
                for e in range(chk_ptr[c], chk_ptr[c + 1]):
                    parity ^= hard[edge_var[e]]
                if parity:
                    ok = False
                    break
            if ok:
                break
    return hard_arr, it, bool(ok)


cdef inline double _logsumexp(double xi, const double* mu, const double* w,
                              const double* cst, double* buf, Py_ssize_t h) noexcept nogil:
    cdef Py_ssize_t j
    cdef double d, t, top = -INFINITY, s = 0.0
    for j in range(h):
        d = xi - mu[j]
        t = cst[j] - d * d * w[j]
        buf[j] = t
        if t > top:
            top = t
    for j in range(h):
        s += exp(buf[j] - top)
    return top + log(s)


def mixture_llr(const double[::1] x,
                const double[::1] mu0, const double[::1] w0, const double[::1] c0,
                const double[::1] mu1, const double[::1] w1, const double[::1] c1,
                int history, double clamp, Py_ssize_t start=0):
    """Per-position log-ratio of two Gaussian mixtures.

    ``x[i]`` sits at frame position ``start + i`` and uses the first
    ``2**min(start + i, history)`` table entries;
    ``w = 1/(2 var)`` and ``c = -log(2 pi var)/2`` are precomputed.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, h, pos
    cdef double a, b, value
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double[::1] buf = np.empty(mu0.shape[0])
    with nogil:
        for i in range(n):
            pos = start + i
            h = <Py_ssize_t>1 << (pos if pos < history else history)
            a = _logsumexp(x[i], &mu0[0], &w0[0], &c0[0], &buf[0], h)
            b = _logsumexp(x[i], &mu1[0], &w1[0], &c1[0], &buf[0], h)
            value = a - b
            if value > clamp:
                value = clamp
            elif value < -clamp:
                value = -clamp
            out[i] = value
    return out_arr
