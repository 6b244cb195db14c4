"""Pure-numpy reference implementations of the hot kernels.

Every function here has a twin with the same signature in ``_numba``.
Bit conventions: ambient basis index bit ``j`` is the occupation of the
``j``-th sorted site; ``positions`` lists the ambient bit of each sub-region
site in increasing order.
"""

import numpy as np


def popcount(values):
    v = np.asarray(values, dtype=np.int64).copy()
    count = np.zeros_like(v)
    while np.any(v):
        count += v & 1
        v >>= 1
    return count


def parity_vector(n_bits, mask):
    idx = np.arange(1 << n_bits, dtype=np.int64)
    return (popcount(idx & mask) & 1).astype(np.int8)


def _scatter_bits(values, positions):
    # place bit t of each value at ambient bit positions[t]
    out = np.zeros_like(values)
    for t, p in enumerate(positions):
        out |= ((values >> t) & 1) << p
    return out


def _string_masks(n_bits, positions):
    """For each flip pattern d on the sub-region, the complement-local mask of
    sites that see an odd number of flipped sub-region sites above them."""
    positions = np.asarray(positions, dtype=np.int64)
    comp = np.array([s for s in range(n_bits) if s not in set(positions.tolist())], dtype=np.int64)
    m = len(positions)
    d = np.arange(1 << m, dtype=np.int64)
    fmask = np.zeros_like(d)
    for c_idx, s in enumerate(comp):
        after = 0
        for t, p in enumerate(positions):
            if p > s:
                after |= 1 << t
        fmask |= (popcount(d & after) & 1) << c_idx
    return comp, fmask


def embed_matrix(x, n_bits, positions):
    positions = np.asarray(positions, dtype=np.int64)
    m = len(positions)
    comp, fmask = _string_masks(n_bits, positions)
    q = len(comp)
    k = np.arange(1 << m, dtype=np.int64)
    c = np.arange(1 << q, dtype=np.int64)
    kk = _scatter_bits(k, positions)
    cc = _scatter_bits(c, comp)
    rows = kk[:, None, None] | cc[None, None, :]
    cols = kk[None, :, None] | cc[None, None, :]
    flips = fmask[k[:, None] ^ k[None, :]]
    sign = 1 - 2 * (popcount(flips[:, :, None] & c[None, None, :]) & 1)
    out = np.zeros((1 << n_bits, 1 << n_bits), dtype=np.complex128)
    out[rows, cols] = np.asarray(x, dtype=np.complex128)[:, :, None] * sign
    return out


def slice_matrix(X, n_bits, positions):
    positions = np.asarray(positions, dtype=np.int64)
    m = len(positions)
    comp, fmask = _string_masks(n_bits, positions)
    q = len(comp)
    k = np.arange(1 << m, dtype=np.int64)
    c = np.arange(1 << q, dtype=np.int64)
    kk = _scatter_bits(k, positions)
    cc = _scatter_bits(c, comp)
    rows = kk[:, None, None] | cc[None, None, :]
    cols = kk[None, :, None] | cc[None, None, :]
    flips = fmask[k[:, None] ^ k[None, :]]
    sign = 1 - 2 * (popcount(flips[:, :, None] & c[None, None, :]) & 1)
    block = np.asarray(X, dtype=np.complex128)[rows, cols] * sign
    return block.sum(axis=2) / float(1 << q)


def moebius_subsets(stack):
    out = np.array(stack, dtype=np.complex128, copy=True)
    n = out.shape[0]
    bit = 1
    while bit < n:
        for mask in range(n):
            if mask & bit:
                out[mask] -= out[mask ^ bit]
        bit <<= 1
    return out


def zeta_subsets(stack):
    out = np.array(stack, dtype=np.complex128, copy=True)
    n = out.shape[0]
    bit = 1
    while bit < n:
        for mask in range(n):
            if mask & bit:
                out[mask] += out[mask ^ bit]
        bit <<= 1
    return out


def surface_count(grid, points, offsets):
    # grid is padded so every point + offset is a valid index
    count = 0
    for p in points:
        nb = p[None, :] + offsets
        if not np.all(grid[tuple(nb.T)]):
            count += 1
    return count


def translate_count(points, a):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    nu = points.shape[1]
    axes = [np.arange(hi[d] - a + 1, lo[d] + 1) for d in range(nu)]
    corners = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, nu)
    if corners.size == 0:
        return 0
    inside = (points[None, :, :] >= corners[:, None, :]) & (points[None, :, :] <= corners[:, None, :] + a - 1)
    return int(np.all(inside, axis=(1, 2)).sum())


def greedy_pack(grid, a):
    """Disjoint translates of the a-cube inside the boolean region grid,
    placed greedily in lexicographic order of their minimal corner."""
    free = grid.copy()
    count = 0
    shape = grid.shape
    for corner in np.ndindex(*[max(s - a + 1, 0) for s in shape]):
        sl = tuple(slice(c, c + a) for c in corner)
        if np.all(free[sl]):
            free[sl] = False
            count += 1
    return count


def greedy_cover(grid, a):
    """Translates of the a-cube covering the region, each anchored at the
    lexicographically first uncovered point (grid padded by a on the high side)."""
    todo = grid.copy()
    count = 0
    for idx in zip(*np.nonzero(grid)):
        if todo[idx]:
            sl = tuple(slice(c, c + a) for c in idx)
            todo[sl] = False
            count += 1
    return count
