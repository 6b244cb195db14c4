"""Local Gibbs states, finite-volume thermodynamic sequences and oracles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from . import kernels
from .car import (
    LocalOperator,
    Region,
    annihilation,
    check_size,
    cube,
    embed,
    op_norm,
    tau,
)
from .potentials import (
    PotentialError,
    internal_energy,
    local_hamiltonian,
    surface_energy,
)
from .report import Report, inputs_hash
from .states import (
    StateDensity,
    StateError,
    entropy,
    product_extension,
    relative_entropy,
    restrict,
)

LOG2 = math.log(2.0)


# ---------------------------------------------------------------- sequences

@dataclass(frozen=True)
class BoxSequence:
    """Increasing cube sizes C_a in dimension nu."""

    nu: int
    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if not sizes:
            raise ValueError("empty size list")
        if any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
            raise ValueError(f"sizes must be positive and strictly increasing: {sizes}")
        for s in sizes:
            check_size(s ** self.nu)

    def __iter__(self):
        return iter(self.sizes)

    def regions(self):
        return [cube(s, self.nu) for s in self.sizes]


@dataclass
class ThermoRow:
    size: int
    beta: float
    p: float
    P: float
    energy_density: float
    entropy_density: float
    surface_density: float
    residuals: dict = field(default_factory=dict)


# ---------------------------------------------------------------- Gibbs states

def _spectrum(U):
    w, v = np.linalg.eigh(0.5 * (U.matrix + U.matrix.conj().T))
    return w, v


def log_trace_exp(U, beta):
    """log tau(exp(-beta U)), stable in beta."""
    w, _ = _spectrum(U)
    return float(logsumexp(-beta * w) - math.log(len(w)))


def gibbs_density(U, beta):
    """Adjusted density exp(-beta U) / tau(exp(-beta U))."""
    w, v = _spectrum(U)
    x = -beta * w
    g = np.exp(x - x.max())
    g *= len(w) / g.sum()
    return StateDensity(LocalOperator(U.region, (v * g) @ v.conj().T))


def local_gibbs(Phi, beta, I):
    return gibbs_density(internal_energy(Phi, I), beta)


def finite_pressure(Phi, beta, I):
    """(p_I, P_I) with p_I = |I|^-1 log tau(exp(-beta U(I))) and P_I = p_I + log 2."""
    p = log_trace_exp(internal_energy(Phi, I), beta) / len(I)
    return p, p + LOG2


def finite_pressure_h(Phi, beta, I, ambient=None):
    """|I|^-1 log tau(exp(-beta H(I))), the boundary-term variant."""
    return log_trace_exp(local_hamiltonian(Phi, I, ambient), beta) / len(I)


def gibbs_variational_identity(Phi, beta, I, omega):
    """Relative entropy S(phi^c_I, omega_I) and the residual of its closed form."""
    U = internal_energy(Phi, I)
    gibbs = gibbs_density(U, beta)
    om = restrict(omega, I) if omega.region != I else omega
    relent = relative_entropy(gibbs, om)
    closed = -entropy(om)[1] + beta * om(U).real + log_trace_exp(U, beta)
    return relent, abs(relent - closed)


def variational_identity_residual(Phi, beta, I):
    """|log tau(e^{-beta U}) - S_hat(phi^c) + beta phi^c(U)| for the local Gibbs state."""
    U = internal_energy(Phi, I)
    g = gibbs_density(U, beta)
    return abs(log_trace_exp(U, beta) - entropy(g)[1] + beta * g(U).real)


# ---------------------------------------------------------------- mean quantities

def _site_density(rho1, site, nu):
    return StateDensity(LocalOperator(Region((site,), nu), rho1.rho_hat.matrix))


def product_state(rho1, region):
    """Translation-invariant product of the single-site density rho1."""
    return product_extension([_site_density(rho1, s, region.nu) for s in region])


def mean_energy_exact(Phi, restrict_to):
    """e = sum over anchored generator terms K of omega(Phi(K)).

    ``restrict_to(K)`` returns the restriction of a translation-invariant
    state to K.
    """
    if not Phi.is_covariant:
        raise PotentialError("mean energy needs a covariant potential")
    return sum(restrict_to(K)(op).real for K, op in Phi.generator.items())


def mean_quantities_product(rho1, Phi, boxes):
    """Entropy and energy densities of the product state along ``boxes``.

    Returns ``(s_seq, e_seq, e)`` where ``e_seq[n] = omega(U(C_n))/|C_n|``
    and ``e`` is the exact mean energy.
    """
    if len(rho1.region) != 1:
        raise StateError("single-site density required")
    if not rho1.is_even(1e-12):
        raise StateError("a translation-invariant product state needs an even single-site density")
    s_seq, e_seq = [], []
    for C in boxes.regions():
        om = product_state(rho1, C)
        s_seq.append(entropy(om)[0] / len(C))
        e_seq.append(om(internal_energy(Phi, C)).real / len(C))
    e = mean_energy_exact(Phi, lambda K: product_state(rho1, K))
    return s_seq, e_seq, e


# ---------------------------------------------------------------- periodized Gibbs state

def _tile_origin(site, a):
    return tuple((c // a) * a for c in site)


def periodized_gibbs(Phi, beta, a, J):
    """Restriction to J of the shift average of the C_a-tiled local Gibbs product."""
    check_size(a ** Phi.nu)
    check_size(len(J))
    base = local_gibbs(Phi, beta, cube(a, Phi.nu))
    cache = {}

    def tile_piece(origin, sub):
        key = (origin, sub.sites)
        if key not in cache:
            local = Region(tuple(tuple(c - o for c, o in zip(s, origin)) for s in sub), sub.nu)
            r = restrict(base, local)
            cache[key] = StateDensity(LocalOperator(sub, r.rho_hat.matrix))
        return cache[key]

    acc = np.zeros((1 << len(J),) * 2, dtype=np.complex128)
    shifts = list(cube(a, Phi.nu))
    for k in shifts:
        # tiles C_a + a m + k; group J's sites by tile
        groups = {}
        for s in J:
            rel = tuple(c - kk for c, kk in zip(s, k))
            o = tuple(t + kk for t, kk in zip(_tile_origin(rel, a), k))
            groups.setdefault(o, []).append(s)
        pieces = [tile_piece(o, Region(tuple(sorted(ss)), J.nu)) for o, ss in sorted(groups.items())]
        acc += embed(product_extension(pieces).rho_hat, J).matrix
    return StateDensity(LocalOperator(J, acc / len(shifts)))


def witness(Phi, beta, a, p_oracle=None):
    """Mean entropy, mean energy and gap of the periodized Gibbs state at tile size a.

    ``p_oracle`` is the infinite-volume pressure P; the gap is
    P - (s - beta e) and is non-negative by the variational principle.
    """
    Ca = cube(a, Phi.nu)
    s = entropy(local_gibbs(Phi, beta, Ca))[0] / len(Ca)
    e = mean_energy_exact(Phi, lambda K: periodized_gibbs(Phi, beta, a, K))
    value = s - beta * e
    gap = None if p_oracle is None else p_oracle - value
    return {"a": a, "s": s, "e": e, "value": value, "gap": gap}


# ---------------------------------------------------------------- tangent, surface, van Hove

def pressure_tangent(Phi, Psi, beta, I, step=1e-4):
    """Central difference of the finite pressure in direction Psi and its closed form."""
    U = internal_energy(Phi, I)
    V = internal_energy(Psi, I)
    f = lambda lam: log_trace_exp(U + V * lam, beta) / len(I)  # noqa: E731
    fd = (f(step) - f(-step)) / (2 * step)
    expct = -beta * gibbs_density(U, beta)(V).real / len(I)
    return fd, expct


def surface_density_sequence(Phi, boxes):
    return [op_norm(surface_energy(Phi, C)) / len(C) for C in boxes.regions()]


@dataclass(frozen=True)
class VanHove:
    surf_r: int
    n_minus: int
    n_plus: int
    l: int
    exact: bool
    n_minus_upper: int
    n_plus_lower: int


def _is_box(I):
    p = I.points()
    lo, hi = p.min(0), p.max(0)
    return len(I) == int(np.prod(hi - lo + 1))


def vanhove_diagnostics(I, r, a):
    """Surface count, packing/covering numbers and translate count.

    Packing and covering are exact for boxes. For other regions greedy
    values are returned (a lower bound on n_minus, an upper bound on n_plus)
    together with volume bounds in the other direction; ``exact`` is False.
    """
    if not len(I):
        return VanHove(0, 0, 0, 0, True, 0, 0)
    pts = I.points()
    rr = int(math.floor(r))
    pad = max(rr, a)
    rel = pts - pts.min(0) + pad
    shape = tuple(int(x) for x in rel.max(0) + pad + 1)
    grid = np.zeros(shape, dtype=bool)
    grid[tuple(rel.T)] = True
    offs = np.array([o for o in itertools.product(range(-rr, rr + 1), repeat=I.nu)
                     if sum(c * c for c in o) <= r * r + 1e-12], dtype=np.int64).reshape(-1, I.nu)
    surf = kernels.surface_count(grid, rel.astype(np.int64), offs)
    vol = a ** I.nu
    if _is_box(I):
        ext = pts.max(0) - pts.min(0) + 1
        n_minus = int(np.prod(ext // a))
        n_plus = int(np.prod(-(-ext // a)))
        exact = True
    else:
        n_minus = kernels.greedy_pack(grid, a)
        n_plus = kernels.greedy_cover(grid, a)
        exact = False
    return VanHove(
        surf_r=int(surf),
        n_minus=n_minus,
        n_plus=n_plus,
        l=int(kernels.translate_count(pts, a)),
        exact=exact,
        n_minus_upper=n_minus if exact else len(I) // vol,
        n_plus_lower=n_plus if exact else -(-len(I) // vol),
    )


def kay_check(states, tol=1e-10):
    """Entropy density non-increasing and entropy non-decreasing along nested regions."""
    S = [entropy(s)[0] for s in states]
    n = [len(s.region) for s in states]
    for a, b in zip(states, states[1:]):
        if not a.region <= b.region:
            raise ValueError("regions must be nested")
    dens = [x / k for x, k in zip(S, n)]
    up = max([d2 - d1 for d1, d2 in zip(dens, dens[1:])], default=0.0)
    down = max([s1 - s2 for s1, s2 in zip(S, S[1:])], default=0.0)
    return Report(
        "kay_monotonicity",
        [max(up, 0.0), max(down, 0.0)],
        tol,
        inputs_hash(*[s.region for s in states]),
        details={"entropy": S, "density": dens},
    )


# ---------------------------------------------------------------- free fermions

def hopping_matrix(t, N, boundary="open"):
    A = np.zeros((N, N))
    for i in range(N - 1):
        A[i, i + 1] = A[i + 1, i] = t
    if boundary == "periodic":
        if N < 3:
            raise ValueError("periodic chain needs N >= 3")
        A[0, N - 1] = A[N - 1, 0] = t
    elif boundary != "open":
        raise ValueError(f"unknown boundary {boundary!r}")
    return A


def _log_cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2 * x)) - LOG2


def free_fermion_oracle(t, mu, beta, N, boundary="open"):
    """p for H = sum_k eps_k (n_k - 1/2), eps the spectrum of hopping + mu."""
    eps = np.linalg.eigvalsh(hopping_matrix(t, N, boundary)) + mu
    return float(np.sum(_log_cosh(beta * eps / 2)) / N)


def free_fermion_infinite(t, mu, beta):
    """Infinite-chain P = log 2 + (2 pi)^-1 int log cosh(beta (mu + 2t cos k)/2) dk."""
    val, _ = integrate.quad(lambda k: _log_cosh(beta * (mu + 2 * t * math.cos(k)) / 2),
                            -math.pi, math.pi, epsabs=1e-13, epsrel=1e-13, limit=200)
    return LOG2 + val / (2 * math.pi)


def quadratic_pressure(H, beta, tol=1e-10):
    """Pressure |I|^-1 log tau(e^{-beta H}) for a number-conserving quadratic H.

    Extracts A_ij = 2 tau(a_i [H, a_j*]) and returns None when H is not of
    the form sum A_ij a_i* a_j + c.
    """
    I = H.region
    a = [annihilation(s, I) for s in I]
    n = len(a)
    A = np.zeros((n, n), dtype=np.complex128)
    for j in range(n):
        comm = H @ a[j].dag - a[j].dag @ H
        for i in range(n):
            A[i, j] = 2 * tau(a[i] @ comm)
    c = tau(H)
    rebuilt = LocalOperator(I, np.eye(1 << n) * c)
    for i in range(n):
        for j in range(n):
            if A[i, j] != 0:
                term = a[i].dag @ a[j]
                rebuilt = rebuilt + (term - tau(term)) * A[i, j]
    if op_norm(rebuilt - H) > tol * max(1.0, op_norm(H)):
        return None
    eps = np.linalg.eigvalsh(0.5 * (A + A.conj().T))
    return float((-beta * c.real + np.sum(_log_cosh(beta * eps / 2))) / n)


# ---------------------------------------------------------------- rows and extrapolation

def thermo_row(Phi, beta, size):
    C = cube(size, Phi.nu)
    check_size(len(C))
    U = internal_energy(Phi, C)
    g = gibbs_density(U, beta)
    lt = log_trace_exp(U, beta)
    p = lt / len(C)
    P = p + LOG2
    S_hat = entropy(g)[1]
    energy = g(U).real
    row = ThermoRow(
        size=size,
        beta=beta,
        p=p,
        P=P,
        energy_density=energy / len(C),
        entropy_density=entropy(g)[0] / len(C),
        surface_density=op_norm(surface_energy(Phi, C)) / len(C),
    )
    row.residuals["P-p-log2"] = abs(P - p - LOG2)
    row.residuals["variational"] = abs(lt - S_hat + beta * energy)
    return row


def extrapolate(sizes, values):
    """Linear fit value = c0 + c1 / size; returns (c0, c1, rms residual)."""
    x = 1.0 / np.asarray(sizes, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(x) < 2:
        return float(y[-1]), 0.0, 0.0
    c1, c0 = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((c0 + c1 * x - y) ** 2)))
    return float(c0), float(c1), rms


__all__ = [
    "BoxSequence",
    "ThermoRow",
    "VanHove",
    "log_trace_exp",
    "gibbs_density",
    "local_gibbs",
    "finite_pressure",
    "finite_pressure_h",
    "gibbs_variational_identity",
    "variational_identity_residual",
    "product_state",
    "mean_energy_exact",
    "mean_quantities_product",
    "periodized_gibbs",
    "witness",
    "pressure_tangent",
    "surface_density_sequence",
    "vanhove_diagnostics",
    "kay_check",
    "hopping_matrix",
    "free_fermion_oracle",
    "free_fermion_infinite",
    "quadratic_pressure",
    "thermo_row",
    "extrapolate",
]
