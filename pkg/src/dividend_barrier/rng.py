"""Counter-based normal streams for numba kernels.

Philox4x32-10 maps ``(counter, key)`` to four 32-bit words.  The key is the
seed and every path owns the stream equal to its id, so draws do not depend
on sharding or on the number of threads.  Normals use a 256-layer ziggurat on 64-bit words
(same layout as numpy's ``standard_normal``) because ``log``/``cos`` per
draw dominate the cost of a Box-Muller step.

Draws are produced in blocks: block ``m`` of stream ``s`` uses the Philox
counters ``(j, m, s, tag)``, so any block can be generated independently.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
MASK32 = 0xFFFFFFFF
ROUNDS = 10

ZIG_R = 3.6541528853610088
ZIG_V = 4.92867323399e-3


def philox4x32_reference(counter, key, rounds: int = ROUNDS):
    """Plain-Python Philox4x32; slow but obviously correct."""
    c0, c1, c2, c3 = (int(v) & MASK32 for v in counter)
    k0, k1 = (int(v) & MASK32 for v in key)
    for r in range(rounds):
        if r:
            k0 = (k0 + PHILOX_W0) & MASK32
            k1 = (k1 + PHILOX_W1) & MASK32
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        c0, c1, c2, c3 = ((p1 >> 32) ^ c1 ^ k0, p1 & MASK32,
                          (p0 >> 32) ^ c3 ^ k1, p0 & MASK32)
    return c0, c1, c2, c3


def _ziggurat_tables(n=256, r=ZIG_R, v=ZIG_V):
    m = 2.0 ** 52
    k = np.zeros(n, dtype=np.uint64)
    w = np.zeros(n)
    f = np.zeros(n)
    dn = tn = r
    q = v / math.exp(-0.5 * dn * dn)
    k[0] = int(dn / q * m)
    w[0] = q / m
    w[n - 1] = dn / m
    f[0] = 1.0
    f[n - 1] = math.exp(-0.5 * dn * dn)
    for i in range(n - 2, 0, -1):
        dn = math.sqrt(-2.0 * math.log(v / dn + math.exp(-0.5 * dn * dn)))
        k[i + 1] = int(dn / tn * m)
        tn = dn
        f[i] = math.exp(-0.5 * dn * dn)
        w[i] = dn / m
    return k, w, f


ZIG_K, ZIG_W, ZIG_F = _ziggurat_tables()


@nb.njit(inline="always")
def _mulhilo(a, b):
    p = np.uint64(a) * np.uint64(b)
    return np.uint32(p >> np.uint64(32)), np.uint32(p & np.uint64(0xFFFFFFFF))


@nb.njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on uint32 words; returns four uint32 words."""
    c0 = np.uint32(c0)
    c1 = np.uint32(c1)
    c2 = np.uint32(c2)
    c3 = np.uint32(c3)
    k0 = np.uint32(k0)
    k1 = np.uint32(k1)
    for r in range(ROUNDS):
        if r > 0:
            k0 = np.uint32(k0 + np.uint32(PHILOX_W0))
            k1 = np.uint32(k1 + np.uint32(PHILOX_W1))
        hi0, lo0 = _mulhilo(PHILOX_M0, c0)
        hi1, lo1 = _mulhilo(PHILOX_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def split_seed(seed: int) -> tuple[int, int]:
    """Map a seed in ``[0, 2**64)`` to the two 32-bit key words."""
    seed = int(seed)
    if seed < 0 or seed >= 1 << 64:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return seed & MASK32, (seed >> 32) & MASK32


@nb.njit(inline="always")
def _u53(hi, lo):
    bits = ((np.uint64(hi) << np.uint64(32)) | np.uint64(lo)) >> np.uint64(11)
    return np.float64(bits) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def fill_normals(out, block, stream, tag, k0, k1, zk, zw, zf):
    """Fill ``out`` with the normals of one block of a stream.

    The block owns counters ``(j, block, stream, tag)`` for ``j = 0, 1, ...``;
    rejected ziggurat proposals just consume more words.
    """
    j = 0
    have = 0
    spare = np.uint64(0)
    i = 0
    n = out.shape[0]
    while i < n:
        if have == 0:
            w0, w1, w2, w3 = philox4x32(j, block, stream, tag, k0, k1)
            j += 1
            r = (np.uint64(w0) << np.uint64(32)) | np.uint64(w1)
            spare = (np.uint64(w2) << np.uint64(32)) | np.uint64(w3)
            have = 1
        else:
            r = spare
            have = 0
        idx = np.int64(r & np.uint64(0xFF))
        r = r >> np.uint64(8)
        neg = (r & np.uint64(1)) == np.uint64(1)
        rabs = (r >> np.uint64(1)) & np.uint64(0x000FFFFFFFFFFFFF)
        x = np.float64(rabs) * zw[idx]
        if neg:
            x = -x
        if rabs < zk[idx]:
            out[i] = x
            i += 1
            continue
        # slow paths need two extra uniforms; take them from a fresh counter
        w0, w1, w2, w3 = philox4x32(j, block, stream, tag, k0, k1)
        j += 1
        u1 = _u53(w0, w1)
        u2 = _u53(w2, w3)
        if idx == 0:
            # tail beyond ZIG_R: exponential proposals
            xx = -math.log1p(-u1) / ZIG_R
            yy = -math.log1p(-u2)
            if yy + yy > xx * xx:
                out[i] = -(ZIG_R + xx) if neg else ZIG_R + xx
                i += 1
        elif (zf[idx - 1] - zf[idx]) * u1 + zf[idx] < math.exp(-0.5 * x * x):
            out[i] = x
            i += 1


@nb.njit(cache=True)
def fill_uniforms(out, block, stream, tag, k0, k1):
    """Uniforms on ``[0, 1)`` (53 bits), two per Philox call."""
    n = out.shape[0]
    for j in range((n + 1) // 2):
        w0, w1, w2, w3 = philox4x32(j, block, stream, tag, k0, k1)
        out[2 * j] = _u53(w0, w1)
        if 2 * j + 1 < n:
            out[2 * j + 1] = _u53(w2, w3)


def normals(seed: int, stream: int, n: int, tag: int = 0, block: int = 0) -> np.ndarray:
    """``n`` normals from one block of one stream."""
    k0, k1 = split_seed(seed)
    out = np.empty(n)
    fill_normals(out, block, stream, tag, k0, k1, ZIG_K, ZIG_W, ZIG_F)
    return out


def uniforms(seed: int, stream: int, n: int, tag: int = 0, block: int = 0) -> np.ndarray:
    k0, k1 = split_seed(seed)
    out = np.empty(n)
    fill_uniforms(out, block, stream, tag, k0, k1)
    return out
