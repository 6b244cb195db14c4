"""Finite CAR algebra on lattice regions.

Basis convention: for a region with sorted sites ``s_1 < ... < s_m`` the
basis index ``b`` carries the occupation of ``s_j`` in bit ``j - 1``
(little-endian), single-site order ``(|empty>, |occupied>)``. The
annihilator at ``s_j`` is the Jordan-Wigner product
``Z^{(x) j-1} (x) sigma^- (x) 1`` with ``Z = diag(1, -1)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from numbers import Number

import numpy as np

from . import kernels

MAX_SITES = 12
DEFAULT_MAX_SITES = 10
EXACT_TOL = 1e-12
DEFAULT_TOL = 1e-9


class RegionError(ValueError):
    pass


class SizeGuardError(ValueError):
    pass


def _as_site(site, nu=None):
    if isinstance(site, (int, np.integer)):
        t = (int(site),)
    else:
        t = tuple(int(c) for c in site)
    if not t:
        raise RegionError("site with zero coordinates")
    if nu is not None and len(t) != nu:
        raise RegionError(f"site {t} does not have {nu} coordinates")
    return t


@dataclass(frozen=True)
class Region:
    """Finite, lexicographically sorted set of lattice sites."""

    sites: tuple = ()
    nu: int = 1

    def __post_init__(self):
        sites = tuple(_as_site(s, self.nu) for s in self.sites)
        for a, b in zip(sites, sites[1:]):
            if not a < b:
                raise RegionError(f"sites not strictly increasing at {a}, {b}")
        object.__setattr__(self, "sites", sites)

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, site):
        return _as_site(site) in self._index

    def __repr__(self):
        if self.nu == 1:
            return f"Region({[s[0] for s in self.sites]})"
        return f"Region({list(self.sites)})"

    @cached_property
    def _index(self):
        return {s: i for i, s in enumerate(self.sites)}

    def index(self, site):
        try:
            return self._index[_as_site(site)]
        except KeyError:
            raise RegionError(f"site {site} not in {self!r}") from None

    def __le__(self, other):
        return all(s in other._index for s in self.sites)

    def __lt__(self, other):
        return self <= other and len(self) < len(other)

    def __or__(self, other):
        return Region(tuple(sorted(set(self.sites) | set(other.sites))), self._common_nu(other))

    def __and__(self, other):
        return Region(tuple(s for s in self.sites if s in other._index), self._common_nu(other))

    def __sub__(self, other):
        return Region(tuple(s for s in self.sites if s not in other._index), self._common_nu(other))

    def _common_nu(self, other):
        if self.sites and other.sites and self.nu != other.nu:
            raise RegionError(f"lattice dimensions differ: {self.nu} vs {other.nu}")
        return self.nu if self.sites else other.nu

    def positions_in(self, ambient):
        return [ambient.index(s) for s in self.sites]

    def mask_in(self, ambient):
        m = 0
        for p in self.positions_in(ambient):
            m |= 1 << p
        return m

    def translate(self, shift):
        shift = _as_site(shift, self.nu)
        return Region(tuple(tuple(c + k for c, k in zip(s, shift)) for s in self.sites), self.nu)

    def anchored(self):
        """Translate so that the lexicographically minimal site sits at the origin."""
        if not self.sites:
            return self
        return self.translate(tuple(-c for c in self.sites[0]))

    def subset(self, mask):
        return Region(tuple(s for j, s in enumerate(self.sites) if (mask >> j) & 1), self.nu)

    def subsets(self):
        """All subsets, in bitmask order (bit j selects the j-th site)."""
        for mask in range(1 << len(self)):
            yield self.subset(mask)

    def points(self):
        return np.array(self.sites, dtype=np.int64).reshape(len(self), self.nu)

    @property
    def diameter(self):
        if len(self) < 2:
            return 0.0
        p = self.points().astype(float)
        d = p[:, None, :] - p[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    def expand(self, r):
        """All lattice sites within Euclidean distance ``r`` of the region."""
        rr = int(np.floor(r))
        offs = [o for o in itertools.product(range(-rr, rr + 1), repeat=self.nu)
                if sum(c * c for c in o) <= r * r + 1e-12]
        out = {tuple(c + k for c, k in zip(s, o)) for s in self.sites for o in offs}
        return Region(tuple(sorted(out)), self.nu)


def build_region(sites, nu=None):
    """Sorted region from a list of sites; duplicates are rejected."""
    tsites = [_as_site(s) for s in sites]
    if nu is None:
        nu = len(tsites[0]) if tsites else 1
    for s in tsites:
        if len(s) != nu:
            raise RegionError(f"site {s} does not have {nu} coordinates")
    seen, dup = set(), []
    for s in tsites:
        if s in seen and s not in dup:
            dup.append(s)
        seen.add(s)
    if dup:
        raise RegionError(f"duplicate sites: {dup}")
    return Region(tuple(sorted(tsites)), nu)


def cube(a, nu=1, origin=None):
    """The cube C_a = {0 <= x_i <= a-1}, optionally translated."""
    sites = itertools.product(range(a), repeat=nu)
    r = Region(tuple(sorted(sites)), nu) if a > 0 else Region((), nu)
    return r.translate(origin) if origin is not None else r


def box(shape, origin=None):
    nu = len(shape)
    sites = itertools.product(*[range(n) for n in shape])
    r = Region(tuple(sorted(sites)), nu)
    return r.translate(origin) if origin is not None else r


def check_size(n, limit=MAX_SITES):
    if n > limit:
        raise SizeGuardError(f"region of {n} sites exceeds the size guard of {limit}")


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """Dense 2^|region| matrix representing an element of A(region)."""

    region: Region
    matrix: np.ndarray

    def __post_init__(self):
        check_size(len(self.region))
        m = np.array(self.matrix, dtype=np.complex128)
        d = 1 << len(self.region)
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match region of {len(self.region)} sites")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def dag(self):
        return LocalOperator(self.region, self.matrix.conj().T)

    def on(self, ambient):
        return embed(self, ambient)

    def _lift(self, other):
        if isinstance(other, LocalOperator):
            if other.region == self.region:
                return self, other
            amb = self.region | other.region
            return embed(self, amb), embed(other, amb)
        if isinstance(other, Number):
            return self, LocalOperator(self.region, other * np.eye(self.dim))
        return NotImplemented

    def __add__(self, other):
        pair = self._lift(other)
        if pair is NotImplemented:
            return pair
        a, b = pair
        return LocalOperator(a.region, a.matrix + b.matrix)

    __radd__ = __add__

    def __sub__(self, other):
        pair = self._lift(other)
        if pair is NotImplemented:
            return pair
        a, b = pair
        return LocalOperator(a.region, a.matrix - b.matrix)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return LocalOperator(self.region, -self.matrix)

    def __mul__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return LocalOperator(self.region, scalar * self.matrix)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return LocalOperator(self.region, self.matrix / scalar)

    def __matmul__(self, other):
        a, b = self._lift(other)
        return LocalOperator(a.region, a.matrix @ b.matrix)

    def __repr__(self):
        return f"LocalOperator(region={self.region!r}, dim={self.dim})"


def identity(region):
    return LocalOperator(region, np.eye(1 << len(region)))


def zero(region):
    return LocalOperator(region, np.zeros((1 << len(region),) * 2))


def distance(x, y):
    """Operator-norm distance, embedding into the union region when needed."""
    return op_norm(x - y)


def allclose(x, y, tol=DEFAULT_TOL):
    return distance(x, y) <= tol


def annihilation(site, ambient):
    j = ambient.index(site)
    n = len(ambient)
    idx = np.arange(1 << n)
    sign = 1 - 2 * kernels.parity_vector(n, (1 << j) - 1).astype(np.int64)
    occ = (idx >> j) & 1 == 1
    m = np.zeros((1 << n, 1 << n), dtype=np.complex128)
    src = idx[occ]
    m[src ^ (1 << j), src] = sign[src]
    return LocalOperator(ambient, m)


def creation(site, ambient):
    return annihilation(site, ambient).dag


def number(site, ambient):
    a = annihilation(site, ambient)
    return a.dag @ a


def theta(x, I=None):
    """Grading automorphism restricted to I (default: the whole region of x)."""
    amb = x.region
    mask = (amb if I is None else I & amb).mask_in(amb)
    s = 1.0 - 2.0 * kernels.parity_vector(len(amb), mask)
    return LocalOperator(amb, x.matrix * np.outer(s, s))


def even_part(x):
    return (x + theta(x)) * 0.5


def odd_part(x):
    return (x - theta(x)) * 0.5


def tau(x):
    return complex(np.trace(x.matrix)) / x.dim


def v_unitary(I, ambient):
    """v_I = prod_{i in I} (a_i* a_i - a_i a_i*), diagonal in the occupation basis."""
    if not I <= ambient:
        raise RegionError(f"{I!r} is not contained in {ambient!r}")
    n = len(ambient)
    par = kernels.parity_vector(n, I.mask_in(ambient)).astype(np.int64)
    diag = (1 - 2 * ((len(I) - par) & 1)).astype(float)
    return LocalOperator(ambient, np.diag(diag))


def op_norm(x):
    m = x.matrix if isinstance(x, LocalOperator) else np.asarray(x)
    if m.size == 1:
        return float(abs(m.ravel()[0]))
    return float(np.linalg.norm(m, 2))


@dataclass(frozen=True, eq=False)
class MatrixUnitSystem:
    """Matrix units u_{kl} of A(inner_region) realised inside A(ambient).

    Bit j of k (or l) selects the occupied (1) or empty (0) unit on the
    j-th site of ``inner_region``.
    """

    inner_region: Region
    ambient: Region
    _site_units: tuple

    def unit(self, k, l):
        m = len(self.inner_region)
        out = np.eye(1 << len(self.ambient), dtype=np.complex128)
        for j in range(m):
            out = out @ self._site_units[j][(k >> j) & 1][(l >> j) & 1]
        return LocalOperator(self.ambient, out)

    def __getitem__(self, kl):
        return self.unit(*kl)

    @property
    def size(self):
        return 1 << len(self.inner_region)

    def sigma(self, k, l):
        return bin(k ^ l).count("1")


def matrix_units(I, ambient):
    """Jordan-Wigner string construction of a self-adjoint system of matrix units."""
    if not I <= ambient:
        raise RegionError(f"{I!r} is not contained in {ambient!r}")
    site_units = []
    for j, s in enumerate(I.sites):
        a = annihilation(s, ambient).matrix
        ad = a.conj().T
        v = v_unitary(I.subset((1 << j) - 1), ambient).matrix
        # index [k_bit][l_bit]; bit 1 = occupied
        site_units.append((
            (a @ ad, a @ v),
            (ad @ v, ad @ a),
        ))
    return MatrixUnitSystem(I, ambient, tuple(site_units))


def embed(x, ambient):
    """Image of x in the larger local algebra A(ambient)."""
    I = x.region
    if I == ambient:
        return x
    if not I <= ambient:
        raise RegionError(f"{I!r} is not contained in {ambient!r}")
    check_size(len(ambient))
    m = kernels.embed_matrix(x.matrix, len(ambient), I.positions_in(ambient))
    return LocalOperator(ambient, m)


def embed_by_matrix_units(x, ambient):
    """Reference embedding: expand in the I-local matrix units, reassemble in ambient."""
    I = x.region
    if not I <= ambient:
        raise RegionError(f"{I!r} is not contained in {ambient!r}")
    local = matrix_units(I, I)
    amb = matrix_units(I, ambient)
    out = np.zeros((1 << len(ambient),) * 2, dtype=np.complex128)
    n = local.size
    for k in range(n):
        for l in range(n):
            c = n * tau(local.unit(l, k) @ x)
            if c != 0:
                out += c * amb.unit(k, l).matrix
    return LocalOperator(ambient, out)
