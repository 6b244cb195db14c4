"""Tracial conditional expectations E_I and related maps."""

from __future__ import annotations

import itertools

import numpy as np

from . import kernels
from .car import (
    LocalOperator,
    Region,
    SizeGuardError,
    annihilation,
    cube,
    embed,
    matrix_units,
    op_norm,
    theta,
)
from .report import Report, inputs_hash
from .sampling import random_operator, rng_for

COMMUTANT_MAX_SITES = 5
RANK_TOL = 1e-8


def grade_average(x, I):
    """E^(1) = (id + Theta^{I^c}) / 2, the complement taken inside x's region."""
    comp = x.region - I
    return (x + theta(x, comp)) * 0.5


def cond_expect(x, I, method="slice"):
    """E_I(x) as an element of A(I & region(x)).

    ``method="slice"``: grade averaging over the complement followed by the
    normalized slice (partial trace). ``method="units"``: expansion
    2^|I| sum_{k,l} tau(u_lk x) u_kl in matrix units of I.
    """
    amb = x.region
    J = I & amb
    if method == "slice":
        y = grade_average(x, J)
        return LocalOperator(J, kernels.slice_matrix(y.matrix, len(amb), J.positions_in(amb)))
    if method == "units":
        mu = matrix_units(J, amb)
        local = matrix_units(J, J)
        n = mu.size
        out = np.zeros((n, n), dtype=np.complex128)
        xm = x.matrix
        for k in range(n):
            for l in range(n):
                c = np.sum(mu.unit(l, k).matrix.T * xm) / x.dim
                if c != 0:
                    out += n * c * local.unit(k, l).matrix
        return LocalOperator(J, out)
    raise ValueError(f"unknown method {method!r}")


def cond_expect_on(x, I):
    """E_I(x) embedded back into the region of x."""
    return embed(cond_expect(x, I), x.region)


def commuting_square_residual(I, J, samples, ambient, seed=0, tol=1e-10):
    worst_inter, worst_comm = [], []
    K = I & J
    for s in range(samples):
        x = random_operator(ambient, rng_for(seed, s))
        eij = cond_expect_on(cond_expect_on(x, J), I)
        eji = cond_expect_on(cond_expect_on(x, I), J)
        ek = cond_expect_on(x, K)
        worst_inter.append(op_norm(eij - ek))
        worst_comm.append(op_norm(eij - eji))
    return Report(
        "commuting_square",
        [max(worst_inter, default=0.0), max(worst_comm, default=0.0)],
        tol,
        inputs_hash(I, J, ambient, samples, seed),
        details={"I": repr(I), "J": repr(J)},
    )


def _generators(I, ambient, even_part_only):
    ops = {s: annihilation(s, ambient).matrix for s in I}
    if not even_part_only:
        gens = []
        for s in I:
            gens += [ops[s], ops[s].conj().T]
        return gens
    gens = []
    sites = list(I)
    for i, j in itertools.product(sites, repeat=2):
        gens.append(ops[i].conj().T @ ops[j])
    for i, j in itertools.combinations(sites, 2):
        gens.append(ops[i] @ ops[j])
        gens.append(ops[i].conj().T @ ops[j].conj().T)
    return gens


def commutant_basis(I, ambient, even_part_only=False):
    """tau-orthonormal basis of the relative commutant A(I)' (or A(I)_+') in A(ambient).

    Returns ``(basis, dimension)``; nullspace of the stacked commutator maps
    with singular-value cutoff ``RANK_TOL``.
    """
    if len(ambient) > COMMUTANT_MAX_SITES:
        raise SizeGuardError(f"commutant search limited to {COMMUTANT_MAX_SITES} sites")
    d = 1 << len(ambient)
    gens = _generators(I, ambient, even_part_only)
    if not gens:
        basis = [LocalOperator(ambient, np.sqrt(d) * e.reshape(d, d)) for e in np.eye(d * d)]
        return basis, d * d
    eye = np.eye(d)
    # row-major vec: vec(g x - x g) = (g (x) 1 - 1 (x) g^T) vec(x)
    maps = [np.kron(g, eye) - np.kron(eye, g.T) for g in gens]
    gram = sum(m.conj().T @ m for m in maps)
    w, v = np.linalg.eigh(gram)
    # the Gram matrix squares singular values; shortlist there, then apply the
    # cutoff to singular values of the stacked map on the shortlist
    cand = v[:, w <= 1e-6 * max(1.0, w[-1])]
    if cand.shape[1]:
        stacked = np.vstack([m @ cand for m in maps])
        _, s, wh = np.linalg.svd(stacked, full_matrices=False)
        null = cand @ wh.conj().T[:, s <= RANK_TOL]
    else:
        null = cand
    basis = [LocalOperator(ambient, np.sqrt(d) * null[:, c].reshape(d, d)) for c in range(null.shape[1])]
    return basis, null.shape[1]


def averaged_expectation(x, a):
    """E_a(x) = |C_a|^{-1} sum_{i in C_a} E_{C_a - i}(x), computed inside region(x).

    E_K(x) = E_{K & region(x)}(x) for x in A(region(x)), so the translates
    never need sites outside the region of x.
    """
    if a < 1:
        raise ValueError("cube size must be positive")
    amb = x.region
    nu = amb.nu
    ca = cube(a, nu)
    out = np.zeros_like(x.matrix)
    for i in ca:
        shifted = ca.translate(tuple(-c for c in i))
        out += cond_expect_on(x, shifted).matrix
    return LocalOperator(amb, out / len(ca))


def translates_containing(a, I: Region):
    """l(a, I): number of translates of C_a containing I (I nonempty)."""
    if not len(I):
        raise ValueError("l(a, I) is defined for nonempty I")
    return kernels.translate_count(I.points(), a)


__all__ = [
    "grade_average",
    "cond_expect",
    "cond_expect_on",
    "commuting_square_residual",
    "commutant_basis",
    "averaged_expectation",
    "translates_containing",
]
