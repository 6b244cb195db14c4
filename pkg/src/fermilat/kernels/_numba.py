"""numba-compiled kernels; signatures mirror ``_numpy``."""

import numpy as np
from numba import njit


@njit(cache=True)
def _popcount(v):
    c = 0
    while v:
        c += v & 1
        v >>= 1
    return c


@njit(cache=True)
def _parity_vector(n_bits, mask):
    n = 1 << n_bits
    out = np.empty(n, dtype=np.int8)
    for b in range(n):
        out[b] = _popcount(b & mask) & 1
    return out


def parity_vector(n_bits, mask):
    return _parity_vector(np.int64(n_bits), np.int64(mask))


@njit(cache=True)
def _layout(n_bits, positions):
    m = positions.shape[0]
    q = n_bits - m
    is_sub = np.zeros(n_bits, dtype=np.bool_)
    for t in range(m):
        is_sub[positions[t]] = True
    comp = np.empty(q, dtype=np.int64)
    j = 0
    for s in range(n_bits):
        if not is_sub[s]:
            comp[j] = s
            j += 1
    nk = 1 << m
    nc = 1 << q
    kk = np.zeros(nk, dtype=np.int64)
    for k in range(nk):
        v = 0
        for t in range(m):
            if (k >> t) & 1:
                v |= 1 << positions[t]
        kk[k] = v
    cc = np.zeros(nc, dtype=np.int64)
    for c in range(nc):
        v = 0
        for t in range(q):
            if (c >> t) & 1:
                v |= 1 << comp[t]
        cc[c] = v
    fmask = np.zeros(nk, dtype=np.int64)
    for d in range(nk):
        f = 0
        for ci in range(q):
            s = comp[ci]
            par = 0
            for t in range(m):
                if positions[t] > s and (d >> t) & 1:
                    par ^= 1
            f |= par << ci
        fmask[d] = f
    return kk, cc, fmask


@njit(cache=True)
def _embed(x, n_bits, positions):
    kk, cc, fmask = _layout(n_bits, positions)
    nk = kk.shape[0]
    nc = cc.shape[0]
    out = np.zeros((1 << n_bits, 1 << n_bits), dtype=np.complex128)
    for k in range(nk):
        for l in range(nk):
            val = x[k, l]
            if val == 0:
                continue
            f = fmask[k ^ l]
            for c in range(nc):
                if _popcount(f & c) & 1:
                    out[kk[k] | cc[c], kk[l] | cc[c]] = -val
                else:
                    out[kk[k] | cc[c], kk[l] | cc[c]] = val
    return out


def embed_matrix(x, n_bits, positions):
    return _embed(np.ascontiguousarray(x, dtype=np.complex128), np.int64(n_bits),
                  np.asarray(positions, dtype=np.int64))


@njit(cache=True)
def _slice(X, n_bits, positions):
    kk, cc, fmask = _layout(n_bits, positions)
    nk = kk.shape[0]
    nc = cc.shape[0]
    out = np.zeros((nk, nk), dtype=np.complex128)
    for k in range(nk):
        for l in range(nk):
            f = fmask[k ^ l]
            acc = 0j
            for c in range(nc):
                v = X[kk[k] | cc[c], kk[l] | cc[c]]
                if _popcount(f & c) & 1:
                    acc -= v
                else:
                    acc += v
            out[k, l] = acc / nc
    return out


def slice_matrix(X, n_bits, positions):
    return _slice(np.ascontiguousarray(X, dtype=np.complex128), np.int64(n_bits),
                  np.asarray(positions, dtype=np.int64))


@njit(cache=True)
def _subset_transform(stack, sign):
    out = stack.copy()
    n = out.shape[0]
    bit = 1
    while bit < n:
        for mask in range(n):
            if mask & bit:
                out[mask] += sign * out[mask ^ bit]
        bit <<= 1
    return out


def moebius_subsets(stack):
    return _subset_transform(np.ascontiguousarray(stack, dtype=np.complex128), -1.0)


def zeta_subsets(stack):
    return _subset_transform(np.ascontiguousarray(stack, dtype=np.complex128), 1.0)


@njit(cache=True)
def _surface_count_flat(flat, strides, points, offsets):
    count = 0
    nu = points.shape[1]
    for i in range(points.shape[0]):
        for o in range(offsets.shape[0]):
            idx = 0
            for d in range(nu):
                idx += (points[i, d] + offsets[o, d]) * strides[d]
            if not flat[idx]:
                count += 1
                break
    return count


def surface_count(grid, points, offsets):
    strides = np.array([s // grid.itemsize for s in grid.strides], dtype=np.int64)
    return int(_surface_count_flat(np.ascontiguousarray(grid).ravel(), strides,
                                   np.asarray(points, dtype=np.int64),
                                   np.asarray(offsets, dtype=np.int64)))


@njit(cache=True)
def _translate_count(points, a):
    nu = points.shape[1]
    lo = points[0].copy()
    hi = points[0].copy()
    for i in range(points.shape[0]):
        for d in range(nu):
            lo[d] = min(lo[d], points[i, d])
            hi[d] = max(hi[d], points[i, d])
    span = np.empty(nu, dtype=np.int64)
    total = 1
    for d in range(nu):
        span[d] = lo[d] - (hi[d] - a + 1) + 1
        if span[d] <= 0:
            return 0
        total *= span[d]
    count = 0
    corner = np.empty(nu, dtype=np.int64)
    for flat in range(total):
        r = flat
        for d in range(nu):
            corner[d] = hi[d] - a + 1 + r % span[d]
            r //= span[d]
        ok = True
        for i in range(points.shape[0]):
            for d in range(nu):
                if points[i, d] < corner[d] or points[i, d] > corner[d] + a - 1:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            count += 1
    return count


def translate_count(points, a):
    return int(_translate_count(np.asarray(points, dtype=np.int64), np.int64(a)))


# packing and covering run on small grids; numba offers little there
from ._numpy import greedy_cover, greedy_pack  # noqa: E402,F401
