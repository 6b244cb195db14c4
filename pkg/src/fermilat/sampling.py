"""Random operators, monomials and states for property checks.

Streams are keyed by ``(seed, index)`` through ``numpy.random.SeedSequence``
so a batch evaluates identically regardless of scheduling.
"""

import numpy as np

from .car import LocalOperator, annihilation, even_part, odd_part


def rng_for(seed, index=0):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def random_matrix(dim, rng):
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


def random_operator(region, rng, hermitian=False, parity=None):
    x = LocalOperator(region, random_matrix(1 << len(region), rng))
    if hermitian:
        x = (x + x.dag) * 0.5
    if parity == "even":
        x = even_part(x)
    elif parity == "odd":
        x = odd_part(x)
    return x


def random_monomial(region, rng, max_len=4):
    """Random product of creation/annihilation operators at sites of region."""
    out = LocalOperator(region, np.eye(1 << len(region)))
    if not len(region):
        return out
    for _ in range(rng.integers(1, max_len + 1)):
        s = region.sites[rng.integers(len(region))]
        a = annihilation(s, region)
        out = out @ (a if rng.random() < 0.5 else a.dag)
    return out


def random_density(region, rng, rank=None, even=False):
    """Random positive matrix normalized so that its normalized trace is 1."""
    d = 1 << len(region)
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = LocalOperator(region, g @ g.conj().T)
    if even:
        rho = even_part(rho)
    return rho * (d / np.trace(rho.matrix).real)
