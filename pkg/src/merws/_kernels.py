"""Compiled hot loops: random streams and the ensemble walk kernel.

Random streams
--------------
Every trajectory owns a private xoshiro256** generator.  Its 64-bit stream
seed is ``mix64(master_seed ^ trajectory_index)`` where ``mix64`` is the
SplitMix64 output function::

    z = (x + 0x9E3779B97F4A7C15) mod 2^64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    mix64(x) = z ^ (z >> 31)

The four xoshiro state words are the first four outputs of a SplitMix64
sequence started at the stream seed.

Step codes
----------
One byte per step: ``0`` is a stop, ``1 + 2*axis + s`` a move along ``axis``
(0-based) with sign ``+1`` when ``s == 0`` and ``-1`` when ``s == 1``.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

GENERATOR_NAME = "xoshiro256** (SplitMix64-seeded, mix64(master ^ index) streams)"

_GOLDEN = uint64(0x9E3779B97F4A7C15)
_M1 = uint64(0xBF58476D1CE4E5B9)
_M2 = uint64(0x94D049BB133111EB)
_MASK32 = uint64(0xFFFFFFFF)
_TWO32 = uint64(1) << uint64(32)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def mix64(x):
    z = uint64(x) + _GOLDEN
    z = (z ^ (z >> uint64(30))) * _M1
    z = (z ^ (z >> uint64(27))) * _M2
    return z ^ (z >> uint64(31))


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(cache=True)
def seed_state(stream_seed, state):
    x = uint64(stream_seed)
    for i in range(4):
        state[i] = mix64(x)
        x = x + _GOLDEN


@njit(cache=True, inline="always")
def next_u64(state):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    result = _rotl(s1 * uint64(5), 7) * uint64(9)
    t = s1 << uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return result


@njit(cache=True, inline="always")
def next_double(state):
    return float(next_u64(state) >> uint64(11)) * _INV53


@njit(cache=True, inline="always")
def bounded(state, n):
    """Unbiased integer in [0, n) for 1 <= n < 2**32 (Lemire's multiply-shift)."""
    nn = uint64(n)
    m = (next_u64(state) >> uint64(32)) * nn
    low = m & _MASK32
    if low < nn:
        threshold = (_TWO32 - nn) % nn
        while low < threshold:
            m = (next_u64(state) >> uint64(32)) * nn
            low = m & _MASK32
    return np.int64(m >> uint64(32))


@njit(cache=True, inline="always")
def memory_code(code, u, n_dir, t_stop, t_same, q):
    """Collapsed memory rule applied to a remembered step code, driven by one uniform."""
    if code == 0 or u < t_stop:
        return 0
    if u < t_same or q <= 0.0:
        return code
    k = np.int64((u - t_same) / q)
    if k > n_dir - 2:
        k = n_dir - 2
    j = code - 1
    if k >= j:
        k += 1
    return k + 1


@njit(cache=True, nogil=True)
def run_chunk(
    traj_ids,
    master_seed,
    n_steps,
    d,
    p,
    r,
    q,
    checkpoints,
    diag_coef,
    track_diagnostics,
    a,
    b,
    positions,
    grams,
    w_out,
    qv_out,
):
    """Simulate ``len(traj_ids)`` independent walks, writing checkpoint records in place.

    ``positions``/``grams`` have shape (n_traj, n_checkpoints, d).  When
    ``track_diagnostics`` is set, ``diag_coef[k]`` must hold the normalizer a_k
    for k = 0..n_steps, and ``w_out``/``qv_out`` (n_traj, n_checkpoints)
    receive w_n and the trace of the predictable quadratic variation (minus
    its initial identity part).
    """
    n_dir = 2 * d
    t_stop = r
    t_same = r + p
    history = np.empty(n_steps, dtype=np.uint8)
    state = np.empty(4, dtype=np.uint64)
    pos = np.zeros(d, dtype=np.int64)
    gram = np.zeros(d, dtype=np.int64)
    n_cp = checkpoints.shape[0]
    for t in range(traj_ids.shape[0]):
        seed_state(mix64(uint64(master_seed) ^ uint64(traj_ids[t])), state)
        for i in range(d):
            pos[i] = 0
            gram[i] = 0
        code = bounded(state, n_dir) + 1
        history[0] = code
        axis = (code - 1) >> 1
        pos[axis] += 1 - 2 * ((code - 1) & 1)
        gram[axis] += 1
        sigma2 = 1
        norm2 = 1
        w = 0.0
        qv = 0.0
        if track_diagnostics:
            w = diag_coef[1] * diag_coef[1]
        ci = 0
        n = 1
        while ci < n_cp and checkpoints[ci] == n:
            for i in range(d):
                positions[t, ci, i] = pos[i]
                grams[t, ci, i] = gram[i]
            if track_diagnostics:
                w_out[t, ci] = w
                qv_out[t, ci] = qv
            ci += 1
        while n < n_steps:
            if track_diagnostics:
                an1 = diag_coef[n + 1]
                inc = an1 * an1 * ((b / n) * sigma2 - (a / n) * (a / n) * norm2)
                qv += inc
            code = np.int64(history[bounded(state, n)])
            if code != 0:
                # a remembered stop yields a stop whatever the uniform; skip the draw
                code = memory_code(code, next_double(state), n_dir, t_stop, t_same, q)
            history[n] = code
            n += 1
            if code != 0:
                axis = (code - 1) >> 1
                s = 1 - 2 * ((code - 1) & 1)
                old = pos[axis]
                pos[axis] = old + s
                norm2 += 2 * s * old + 1
                gram[axis] += 1
                sigma2 += 1
            if track_diagnostics:
                an = diag_coef[n]
                w += an * an * sigma2 / n
            while ci < n_cp and checkpoints[ci] == n:
                for i in range(d):
                    positions[t, ci, i] = pos[i]
                    grams[t, ci, i] = gram[i]
                if track_diagnostics:
                    w_out[t, ci] = w
                    qv_out[t, ci] = qv
                ci += 1


@njit(cache=True)
def derive_seeds(master_seed, count):
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = mix64(uint64(master_seed) ^ uint64(i))
    return out


@njit(cache=True)
def stream_doubles(stream_seed, count):
    """First ``count`` uniforms of the stream started at ``stream_seed`` (for tests)."""
    state = np.empty(4, dtype=np.uint64)
    seed_state(stream_seed, state)
    out = np.empty(count)
    for i in range(count):
        out[i] = next_double(state)
    return out


@njit(cache=True)
def stream_bounded(stream_seed, n, count):
    state = np.empty(4, dtype=np.uint64)
    seed_state(stream_seed, state)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        out[i] = bounded(state, n)
    return out
