"""Potentials, local Hamiltonians, Moebius inversion and derivations.

A potential is either an explicit finite table ``Region -> LocalOperator``
or a translation-covariant table keyed by anchored regions (minimal site at
the origin). Sums over infinitely many regions are truncated to a finite
ambient; for finite-range tables the truncation is exact once the ambient
contains the region expanded by the range.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import kernels
from .car import (
    EXACT_TOL,
    LocalOperator,
    Region,
    RegionError,
    annihilation,
    cube,
    embed,
    even_part,
    matrix_units,
    op_norm,
    tau,
    theta,
    v_unitary,
    zero,
)
from .expectations import cond_expect, cond_expect_on, translates_containing
from .report import Report, inputs_hash


class PotentialError(ValueError):
    pass


class InconsistentDerivationError(ValueError):
    pass


class Potential:
    """Map from finite regions to local operators.

    ``kind`` is ``"standard"`` or ``"general"``. Either ``terms`` (explicit
    regions) or ``generator`` (anchored translation-covariant table) is given.
    """

    def __init__(self, terms=None, kind="standard", generator=None, nu=1, name=""):
        if (terms is None) == (generator is None):
            raise PotentialError("give exactly one of terms or generator")
        if kind not in ("standard", "general"):
            raise PotentialError(f"unknown potential kind {kind!r}")
        self.kind = kind
        self.nu = nu
        self.name = name
        if generator is not None:
            table = {}
            for K, op in generator.items():
                if not len(K):
                    raise PotentialError("potential assigns a term to the empty region")
                if K.anchored() != K:
                    raise PotentialError(f"covariant term {K!r} is not anchored at the origin")
                if op.region != K:
                    op = cond_expect(op, K) if K <= op.region else embed(op, K)
                table[K] = op
            self.generator = table
            self.terms = None
        else:
            table = {}
            for K, op in terms.items():
                if not len(K):
                    raise PotentialError("potential assigns a term to the empty region")
                if op.region != K:
                    op = cond_expect(op, K) if K <= op.region else embed(op, K)
                table[K] = op
            self.terms = table
            self.generator = None

    @property
    def is_covariant(self):
        return self.generator is not None

    @property
    def range(self):
        table = self.generator if self.is_covariant else self.terms
        return max((K.diameter for K in table), default=0.0)

    def __repr__(self):
        n = len(self.generator if self.is_covariant else self.terms)
        mode = "covariant" if self.is_covariant else "explicit"
        return f"Potential({self.name or mode}, kind={self.kind}, {n} terms, range={self.range:g})"

    def term(self, K):
        if self.is_covariant:
            if not len(K):
                return None
            op = self.generator.get(K.anchored())
            return None if op is None else LocalOperator(K, op.matrix)
        return self.terms.get(K)

    def terms_in(self, ambient):
        """All (K, Phi(K)) with K a nonempty subset of ambient."""
        if not self.is_covariant:
            return [(K, op) for K, op in self.terms.items() if K <= ambient]
        out = []
        for K0, op in self.generator.items():
            for s in ambient:
                K = K0.translate(s)
                if K <= ambient:
                    out.append((K, LocalOperator(K, op.matrix)))
        return out

    def _map(self, fn):
        if self.is_covariant:
            return Potential(generator={K: fn(op) for K, op in self.generator.items()},
                             kind=self.kind, nu=self.nu)
        return Potential(terms={K: fn(op) for K, op in self.terms.items()}, kind=self.kind, nu=self.nu)

    def __mul__(self, c):
        if not isinstance(c, (int, float)):
            return NotImplemented
        return self._map(lambda op: op * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __add__(self, other):
        if self.is_covariant != other.is_covariant:
            raise PotentialError("cannot add covariant and explicit potentials")
        kind = "standard" if self.kind == other.kind == "standard" else "general"
        a = dict(self.generator if self.is_covariant else self.terms)
        b = other.generator if other.is_covariant else other.terms
        for K, op in b.items():
            a[K] = a[K] + op if K in a else op
        if self.is_covariant:
            return Potential(generator=a, kind=kind, nu=self.nu)
        return Potential(terms=a, kind=kind, nu=self.nu)

    def __sub__(self, other):
        return self + (-other)


def default_ambient(Phi, I):
    if not Phi.is_covariant:
        sites = set(I.sites)
        for K in Phi.terms:
            if any(s in sites for s in K):
                sites |= set(K.sites)
        return Region(tuple(sorted(sites)), I.nu)
    return I.expand(Phi.range)


# ---------------------------------------------------------------- builders

def field_potential(h, nu=1):
    """Phi({i}) = h v_i (standard: tau(v_i) = 0)."""
    site = cube(1, nu)
    return Potential(generator={site: h * v_unitary(site, site)}, nu=nu, name=f"field(h={h:g})")


def hopping_potential(t, h=0.0, nu=1):
    """Nearest-neighbour hopping t (a_i* a_j + a_j* a_i) plus field h v_i."""
    gen = {}
    origin = tuple([0] * nu)
    for d in range(nu):
        other = tuple(1 if k == d else 0 for k in range(nu))
        K = Region((origin, other), nu)
        a0 = annihilation(origin, K)
        a1 = annihilation(other, K)
        gen[K] = t * (a0.dag @ a1 + a1.dag @ a0)
    if h:
        site = cube(1, nu)
        gen[site] = h * v_unitary(site, site)
    return Potential(generator=gen, nu=nu, name=f"hopping(t={t:g},h={h:g})")


def standard_part(x):
    """Component of x in A(K) with E_J(.) = 0 for every proper J of K = region(x).

    Equals prod_{i in K} (1 - E_{K - {i}}) applied to x; the factors commute
    (commuting squares) and expand into sum_J (-1)^{|K - J|} E_J(x).
    """
    K = x.region
    out = np.zeros_like(x.matrix)
    for mask in range(1 << len(K)):
        J = K.subset(mask)
        sign = -1.0 if (len(K) - len(J)) % 2 else 1.0
        out += sign * cond_expect_on(x, J).matrix
    return LocalOperator(K, out)


def random_standard_potential(rng, nu=1, supports=None, scale=1.0):
    """Random covariant standard potential on the given anchored supports."""
    from .sampling import random_operator

    if supports is None:
        supports = [cube(1, nu), cube(2, nu)] if nu == 1 else [cube(1, nu)] + [
            Region((tuple([0] * nu), tuple(1 if k == d else 0 for k in range(nu))), nu) for d in range(nu)
        ]
    gen = {}
    for K in supports:
        x = random_operator(K, rng, hermitian=True, parity="even")
        gen[K] = standard_part(x) * scale
    return Potential(generator=gen, nu=nu, name="random-standard")


# ---------------------------------------------------------------- energies

def local_hamiltonian(Phi, I, ambient=None):
    """H_ambient(I) = sum of Phi(K) over K within ambient meeting I."""
    ambient = default_ambient(Phi, I) if ambient is None else ambient
    if not I <= ambient:
        raise RegionError(f"{I!r} is not contained in {ambient!r}")
    Iset = set(I.sites)
    out = np.zeros((1 << len(ambient),) * 2, dtype=np.complex128)
    for K, op in Phi.terms_in(ambient):
        if any(s in Iset for s in K):
            out += embed(op, ambient).matrix
    return LocalOperator(ambient, out)


def internal_energy(Phi, I):
    """U(I) = sum_{K subset I} Phi(K), as an element of A(I)."""
    out = np.zeros((1 << len(I),) * 2, dtype=np.complex128)
    for K, op in Phi.terms_in(I):
        out += embed(op, I).matrix
    return LocalOperator(I, out)


def surface_energy(Phi, I, ambient=None):
    """W(I) = H_ambient(I) - U(I): terms crossing from I into ambient - I."""
    ambient = default_ambient(Phi, I) if ambient is None else ambient
    return local_hamiltonian(Phi, I, ambient) - embed(internal_energy(Phi, I), ambient)


def _stack_on(I, table):
    d = 1 << len(I)
    stack = np.zeros((1 << len(I), d, d), dtype=np.complex128)
    for mask in range(1 << len(I)):
        op = table.get(I.subset(mask))
        if op is not None:
            stack[mask] = embed(op, I).matrix
    return stack


def internal_energy_table(Phi, I):
    """U(K) for every K subset of I (zeta transform over the subset lattice)."""
    phis = {K: op for K, op in Phi.terms_in(I)}
    stack = kernels.zeta_subsets(_stack_on(I, phis))
    return {I.subset(m): cond_expect(LocalOperator(I, stack[m]), I.subset(m)) for m in range(1 << len(I))}


def moebius_invert(U_table, I):
    """Phi(J) = sum_{K subset J} (-1)^{|J - K|} U(K) for all nonempty J subset I."""
    empty = U_table.get(I.subset(0))
    if empty is not None and op_norm(empty) > EXACT_TOL:
        raise PotentialError("U(empty) must vanish")
    stack = kernels.moebius_subsets(_stack_on(I, U_table))
    return {I.subset(m): cond_expect(LocalOperator(I, stack[m]), I.subset(m)) for m in range(1, 1 << len(I))}


# ---------------------------------------------------------------- validation

def validate_standard(Phi, ambient, tol=EXACT_TOL):
    """Residuals of the standard-potential conditions on the terms inside ambient.

    (a) no empty-region term, (b) self-adjointness, (c) evenness,
    (d) E_J(Phi(I)) = 0 for maximal proper J (equivalent to all proper J by
    the commuting-square property), (e) finite range (structural flag), (f)
    covariance (structural for anchored tables).
    """
    res = {"a": 0.0, "b": 0.0, "c": 0.0, "d": 0.0, "f": 0.0}
    for K, op in Phi.terms_in(ambient):
        res["b"] = max(res["b"], op_norm(op - op.dag))
        res["c"] = max(res["c"], op_norm(op - theta(op)))
        for s in K:
            J = K - Region((s,), K.nu)
            res["d"] = max(res["d"], op_norm(cond_expect(op, J)))
    if not Phi.is_covariant:
        for K, op in Phi.terms.items():
            for K2, op2 in Phi.terms.items():
                if K2 != K and K2.anchored() == K.anchored():
                    res["f"] = max(res["f"], float(np.abs(op.matrix - op2.matrix).max()))
    details = {
        "range": Phi.range,
        "e": "finite range table" if math.isfinite(Phi.range) else "untestable",
        "covariant": Phi.is_covariant,
    }
    return Report(
        "standard_potential",
        [res[k] for k in "abcdf"],
        tol,
        inputs_hash(repr(Phi), ambient),
        details={**details, **{f"phi-{k}": v for k, v in res.items()}},
    )


# ---------------------------------------------------------------- standardization

def standardize(Phi, I, ambient):
    """Standard potential on subsets of I with the same derivation as Phi.

    H^s(K) = H(K) - E_{K^c}(H(K)), U^s(K) = E_K(H^s(K)), then Moebius
    inversion. Returns ``(terms, C)`` with ``C = tau(H_ambient(I)) / |I|``.
    """
    r = Phi.range
    if not I.expand(r) <= ambient:
        raise PotentialError("ambient must contain I expanded by the potential range")
    U_s = {I.subset(0): zero(I.subset(0))}
    for mask in range(1, 1 << len(I)):
        K = I.subset(mask)
        H = local_hamiltonian(Phi, K, ambient)
        Hs = H - cond_expect_on(H, ambient - K)
        U_s[K] = cond_expect(Hs, K)
    terms = moebius_invert(U_s, I)
    C = tau(local_hamiltonian(Phi, I, ambient)).real / len(I)
    return terms, C


def standardize_covariant(Phi):
    """Covariant standard potential equivalent to a covariant general Phi."""
    if not Phi.is_covariant:
        raise PotentialError("covariant input required")
    r = Phi.range
    anchored = set()
    for K in Phi.generator:
        for mask in range(1, 1 << len(K)):
            anchored.add(K.subset(mask).anchored())
    gen = {}
    for J in sorted(anchored, key=lambda R: (len(R), R.sites)):
        amb = J.expand(r)
        U_s = {}
        for mask in range(1 << len(J)):
            K = J.subset(mask)
            if not len(K):
                U_s[K] = zero(K)
                continue
            H = local_hamiltonian(Phi, K, amb)
            U_s[K] = cond_expect(H - cond_expect_on(H, amb - K), K)
        op = moebius_invert(U_s, J)[J]
        if op_norm(op) > EXACT_TOL:
            gen[J] = op
    C = tau(local_hamiltonian(Phi, cube(1, Phi.nu))).real
    return Potential(generator=gen, kind="standard", nu=Phi.nu, name=f"std({Phi.name})"), C


# ---------------------------------------------------------------- derivations

def derivation_apply(Phi, A, I=None, ambient=None):
    """delta(A) = i [H_ambient(I), A] for A supported in I."""
    I = A.region if I is None else I
    if not A.region <= I:
        raise RegionError("support of A must lie in I")
    ambient = default_ambient(Phi, I) if ambient is None else ambient
    H = local_hamiltonian(Phi, I, ambient)
    Aa = embed(A, ambient)
    return LocalOperator(ambient, 1j * (H.matrix @ Aa.matrix - Aa.matrix @ H.matrix))


def derivation_images(Phi, I, ambient=None):
    """delta applied to every matrix unit u_kl of A(I), keyed by (k, l)."""
    ambient = default_ambient(Phi, I) if ambient is None else ambient
    H = local_hamiltonian(Phi, I, ambient).matrix
    mu = matrix_units(I, ambient)
    out = {}
    for k in range(mu.size):
        for l in range(mu.size):
            u = mu.unit(k, l).matrix
            out[(k, l)] = LocalOperator(ambient, 1j * (H @ u - u @ H))
    return out


def hamiltonian_from_derivation(delta_values, I, ambient, tol=1e-10):
    """Even self-adjoint H with E_{I^c}(H) = 0 and i[H, A] = delta(A) on A(I).

    Sakai's matrix-unit construction followed by evenization.
    """
    mu = matrix_units(I, ambient)
    n = mu.size
    units = [[mu.unit(k, l).matrix for l in range(n)] for k in range(n)]
    dv = {kl: v.matrix for kl, v in delta_values.items()}
    worst = 0.0
    for i, j, k in itertools.product(range(n), repeat=3):
        lhs = dv[(i, k)]
        rhs = dv[(i, j)] @ units[j][k] + units[i][j] @ dv[(j, k)]
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    for i, j in itertools.product(range(n), repeat=2):
        worst = max(worst, float(np.abs(dv[(j, i)] - dv[(i, j)].conj().T).max()))
    if worst > tol:
        raise InconsistentDerivationError(f"Leibniz/adjoint residual {worst:.3e} exceeds {tol:.1e}")
    scale = 1.0 / n
    trace_part = sum(units[l][m] @ dv[(m, l)] for l in range(n) for m in range(n))
    iH = np.zeros_like(units[0][0])
    for i in range(n):
        for j in range(n):
            h = sum(units[l][i] @ dv[(j, l)] for l in range(n))
            if i == j:
                h = h - scale * trace_part
            iH += units[i][j] @ h
    H = LocalOperator(ambient, -1j * iH)
    H = (H + H.dag) * 0.5
    return even_part(H)


def reconstruct_residual(H, delta_values, I, ambient):
    """max_{kl} || i[H, u_kl] - delta(u_kl) ||."""
    mu = matrix_units(I, ambient)
    Hm = H.matrix
    worst = 0.0
    for (k, l), v in delta_values.items():
        u = mu.unit(k, l).matrix
        worst = max(worst, op_norm(1j * (Hm @ u - u @ Hm) - v.matrix))
    return worst


# ---------------------------------------------------------------- norms

def potential_norm(Phi):
    """||Phi|| = ||H({0})||, covariant potentials only."""
    if not Phi.is_covariant:
        raise PotentialError("potential norm is defined for covariant potentials")
    return op_norm(local_hamiltonian(Phi, cube(1, Phi.nu)))


def finite_range_truncate(Phi, a):
    """Phi_a(I) = l(a, I) / |C_a| Phi(I); zero once I no longer fits in C_a."""
    if not Phi.is_covariant:
        raise PotentialError("covariant potential required")
    vol = a ** Phi.nu
    gen = {}
    for K, op in Phi.generator.items():
        l = translates_containing(a, K)
        if l:
            gen[K] = op * (l / vol)
    if not gen:
        gen = {cube(1, Phi.nu): zero(cube(1, Phi.nu))}
    return Potential(generator=gen, kind=Phi.kind, nu=Phi.nu, name=f"{Phi.name}_a{a}")


__all__ = [
    "Potential",
    "PotentialError",
    "InconsistentDerivationError",
    "field_potential",
    "hopping_potential",
    "standard_part",
    "random_standard_potential",
    "local_hamiltonian",
    "internal_energy",
    "surface_energy",
    "internal_energy_table",
    "moebius_invert",
    "validate_standard",
    "standardize",
    "standardize_covariant",
    "derivation_apply",
    "derivation_images",
    "hamiltonian_from_derivation",
    "reconstruct_residual",
    "potential_norm",
    "finite_range_truncate",
    "default_ambient",
]
