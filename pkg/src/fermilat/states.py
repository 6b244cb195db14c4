"""Positive functionals through adjusted densities, entropies and perturbations.

A functional on A(region) is stored as its adjusted density rho_hat with
respect to the tracial state: phi(x) = tau(rho_hat x). The matrix-trace
density is rho_hat / 2^|region|.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .car import (
    LocalOperator,
    RegionError,
    embed,
    identity,
    op_norm,
    tau,
    theta,
)
from .expectations import cond_expect

INF = float("inf")
PSD_TOL = 1e-12
SUPPORT_CUTOFF = 1e-12
DEFAULT_EPS = 1e-12
LOG_CLAMP = 1e-300


class StateError(ValueError):
    pass


class NotFaithfulError(StateError):
    pass


class DecompositionError(StateError):
    pass


def _herm_eig(m):
    m = 0.5 * (m + m.conj().T)
    return np.linalg.eigh(m)


def herm_fn(x, fn):
    """f(x) for Hermitian x via its eigendecomposition."""
    w, v = _herm_eig(x.matrix)
    return LocalOperator(x.region, (v * fn(w)) @ v.conj().T)


def expm_h(x):
    return herm_fn(x, np.exp)


def logm_h(x):
    return herm_fn(x, lambda w: np.log(np.clip(w, LOG_CLAMP, None)))


@dataclass(frozen=True, eq=False)
class StateDensity:
    """Positive functional phi(x) = tau(rho_hat x) on A(region).

    ``log_rho`` optionally carries log(rho_hat) when it is known exactly,
    as for perturbed functionals; it spares a matrix logarithm of an
    ill-conditioned density.
    """

    rho_hat: LocalOperator
    log_rho: LocalOperator | None = None

    def __post_init__(self):
        m = self.rho_hat.matrix
        if np.abs(m - m.conj().T).max() > 1e-10 * max(1.0, np.abs(m).max()):
            raise StateError("density is not self-adjoint")
        lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lo < -PSD_TOL * max(1.0, np.abs(m).max()):
            raise StateError(f"density has negative eigenvalue {lo:.3e}")

    @property
    def region(self):
        return self.rho_hat.region

    @property
    def weight(self):
        return tau(self.rho_hat).real

    @property
    def is_state(self):
        return abs(self.weight - 1.0) <= 1e-12

    def is_even(self, tol=1e-12):
        return op_norm(self.rho_hat - theta(self.rho_hat)) <= tol

    def __call__(self, x):
        """phi(x); x may live on any subregion."""
        x = embed(x, self.region) if x.region != self.region else x
        return complex(np.sum(self.rho_hat.matrix.T * x.matrix)) / x.dim

    @property
    def density_matrix(self):
        """Matrix-trace normalized density rho_hat / 2^|region|."""
        return self.rho_hat.matrix / self.rho_hat.dim

    @property
    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.rho_hat.matrix)[0])


def state_from_density_matrix(region, rho):
    rho = np.asarray(rho, dtype=np.complex128)
    return StateDensity(LocalOperator(region, rho * rho.shape[0]))


def tracial_state(region):
    return StateDensity(identity(region))


def normalize(phi):
    w = phi.weight
    log_rho = None if phi.log_rho is None else phi.log_rho - identity(phi.region) * np.log(w)
    return StateDensity(phi.rho_hat / w, log_rho)


def _log_density(phi):
    return phi.log_rho if phi.log_rho is not None else logm_h(phi.rho_hat)


def regularize(phi, eps=DEFAULT_EPS):
    """(1 - eps) phi + eps tau, faithful for any eps > 0."""
    return StateDensity(phi.rho_hat * (1.0 - eps) + identity(phi.region) * (eps * phi.weight))


def restrict(phi, J):
    """Restriction to A(J & region), density E_J(rho_hat)."""
    return StateDensity(cond_expect(phi.rho_hat, J))


def _eta_sum(w):
    w = w[w > 0]
    return float(-(w * np.log(w)).sum())


def entropy(phi):
    """(S, S_hat): von Neumann entropy and adjusted entropy S - |region| log 2."""
    if not phi.is_state:
        raise StateError(f"entropy needs a state, weight is {phi.weight!r}")
    w = np.linalg.eigvalsh(phi.density_matrix)
    if w[0] < -PSD_TOL:
        raise StateError(f"negative eigenvalue {w[0]:.3e}")
    S = _eta_sum(np.clip(w, 0, None))
    return S, S - len(phi.region) * np.log(2.0)


def _tau_eta(phi):
    """-tau(rho_hat log rho_hat)."""
    w = np.clip(np.linalg.eigvalsh(phi.rho_hat.matrix), 0, None)
    return _eta_sum(w) / phi.rho_hat.dim


def relative_entropy(psi, phi, eps=None):
    """S(psi, phi) = phi(log rho_hat_phi - log rho_hat_psi), or +inf.

    +inf when the support of phi is not inside the support of psi (cutoff
    ``SUPPORT_CUTOFF`` on eigenvalues). With ``eps`` both functionals are
    first replaced by (1 - eps) . + eps tau.
    """
    if psi.region != phi.region:
        raise RegionError(f"regions differ: {psi.region!r} vs {phi.region!r}")
    if eps is not None:
        psi, phi = regularize(psi, eps), regularize(phi, eps)
    if psi.log_rho is not None:
        # psi is faithful and its logarithm is exact
        first = phi(phi.log_rho).real if phi.log_rho is not None else -_tau_eta(phi)
        return float(first - phi(psi.log_rho).real)
    wq, vq = _herm_eig(psi.rho_hat.matrix)
    wp, vp = _herm_eig(phi.rho_hat.matrix)
    scale = max(1.0, float(np.abs(wq).max()))
    ker = wq <= SUPPORT_CUTOFF * scale
    if np.any(ker):
        pk = vq[:, ker]
        leak = np.abs(np.linalg.eigvalsh(pk.conj().T @ phi.rho_hat.matrix @ pk)).max()
        if leak > SUPPORT_CUTOFF * max(1.0, float(np.abs(wp).max())):
            return INF
    wp_c = np.clip(wp, 0, None)
    pos = wp_c > 0
    first = float((wp_c[pos] * np.log(wp_c[pos])).sum())
    logq = np.where(ker, 0.0, np.log(np.clip(wq, LOG_CLAMP, None)))
    # tau(rho_phi log rho_psi) in the psi eigenbasis
    diag = np.einsum("ij,jk,ki->i", vq.conj().T, phi.rho_hat.matrix, vq).real
    second = float((diag * logq).sum())
    d = phi.rho_hat.dim
    return (first - second) / d


def ssa_residual(psi, I, J):
    """S(psi_{I u J}) - S(psi_I) - S(psi_J) + S(psi_{I n J}); non-positive by SSA."""
    if not (I | J) <= psi.region:
        raise RegionError("I and J must lie in the state's region")
    S = lambda R: entropy(restrict(psi, R))[0]  # noqa: E731
    return S(I | J) - S(I) - S(J) + S(I & J)


def product_extension(factors):
    """Product state of factors on disjoint regions; at most one may be odd."""
    regions = [f.region for f in factors]
    for a, b in itertools.combinations(regions, 2):
        if len(a & b):
            raise RegionError(f"regions overlap: {a!r}, {b!r}")
    odd = [f for f in factors if not f.is_even(1e-10)]
    if len(odd) > 1:
        raise StateError("product extension needs all factors even with at most one exception")
    total = regions[0]
    for r in regions[1:]:
        total = total | r
    rho = identity(total)
    for f in factors:
        rho = rho @ embed(f.rho_hat, total)
    return StateDensity((rho + rho.dag) * 0.5)


def perturb(phi, h, eps=None):
    """Unnormalized perturbed functional with density exp(log rho_hat + h).

    Requires a faithful phi (minimal eigenvalue above ``SUPPORT_CUTOFF``);
    pass ``eps`` to regularize a non-faithful phi first.
    """
    if op_norm(h - h.dag) > 1e-10 * max(1.0, op_norm(h)):
        raise StateError("perturbation must be self-adjoint")
    if eps is not None:
        phi = regularize(phi, eps)
    if phi.min_eigenvalue <= SUPPORT_CUTOFF:
        raise NotFaithfulError("perturbation needs a faithful functional (or eps regularization)")
    h = embed(h, phi.region) if h.region != phi.region else h
    log_rho = _log_density(phi) + (h + h.dag) * 0.5
    log_rho = (log_rho + log_rho.dag) * 0.5
    return StateDensity(expm_h(log_rho), log_rho)


# ---------------------------------------------------------------- CNT functional

@dataclass(frozen=True, eq=False)
class Decomposition:
    """omega = sum over multi-indices of positive functionals ``parts``."""

    shape: tuple
    parts: dict

    @property
    def k(self):
        return len(self.shape)

    def check(self, omega, tol=1e-10):
        total = sum(p.rho_hat.matrix for p in self.parts.values())
        if np.abs(total - omega.rho_hat.matrix).max() > tol:
            raise DecompositionError("parts do not sum to omega")
        for idx in self.parts:
            if len(idx) != self.k or any(not 0 <= i < n for i, n in zip(idx, self.shape)):
                raise DecompositionError(f"bad multi-index {idx}")


def _eta(x):
    return 0.0 if x <= 0 else -x * np.log(x)


def cnt_functional(omega, decomposition, partition, tol=1e-10):
    """Value of the bracket in the algebraic (CNT) entropy for one decomposition.

    ``partition`` lists k disjoint regions J_1..J_k whose algebras enter.
    """
    decomposition.check(omega, tol)
    if len(partition) != decomposition.k:
        raise DecompositionError("partition length must equal the decomposition order")
    for a, b in itertools.combinations(partition, 2):
        if len(a & b):
            raise DecompositionError("partition regions must be disjoint")
    value = sum(_eta(p.weight) for p in decomposition.parts.values())
    for l, J in enumerate(partition):
        value += entropy(restrict(omega, J))[0]
        for i in range(decomposition.shape[l]):
            members = [p for idx, p in decomposition.parts.items() if idx[l] == i]
            if not members:
                continue
            rho = sum(p.rho_hat.matrix for p in members)
            marg = StateDensity(LocalOperator(omega.region, rho))
            w = marg.weight
            value -= _eta(w)
            if w > 0:
                value -= w * entropy(restrict(normalize(marg), J))[0]
    return float(value)


def trivial_decomposition(omega, k):
    return Decomposition(tuple([1] * k), {tuple([0] * k): omega})


def _parity_eigvecs(rho):
    """Eigenvectors of an even density chosen inside the parity sectors."""
    n = rho.dim
    par = np.array([bin(b).count("1") & 1 for b in range(n)])
    vals, vecs = [], []
    for p in (0, 1):
        idx = np.nonzero(par == p)[0]
        w, v = _herm_eig(rho.matrix[np.ix_(idx, idx)])
        full = np.zeros((n, len(idx)), dtype=np.complex128)
        full[idx] = v
        vals.append(w)
        vecs.append(full)
    return np.concatenate(vals), np.concatenate(vecs, axis=1)


def spectral_decomposition(omega, partition):
    """Decomposition of a product state by rank-one eigenprojections of each block."""
    blocks = []
    for J in partition:
        r = restrict(omega, J).rho_hat
        w, v = _parity_eigvecs(r)
        projs = [embed(LocalOperator(J, np.outer(v[:, i], v[:, i].conj())), omega.region).matrix
                 for i in range(len(w))]
        blocks.append(projs)
    shape = tuple(len(b) for b in blocks)
    rho = omega.rho_hat.matrix
    parts = {}
    for idx in itertools.product(*[range(n) for n in shape]):
        q = np.eye(rho.shape[0], dtype=np.complex128)
        for l, i in enumerate(idx):
            q = q @ blocks[l][i]
        part = q @ rho @ q.conj().T
        part = 0.5 * (part + part.conj().T)
        if np.abs(part).max() > 1e-15:
            parts[idx] = StateDensity(LocalOperator(omega.region, part))
    return Decomposition(shape, parts)


def random_decomposition(omega, shape, rng):
    """omega_i = rho^{1/2} M_i rho^{1/2} with a random POVM {M_i}."""
    d = omega.rho_hat.dim
    idxs = list(itertools.product(*[range(n) for n in shape]))
    gs = []
    for _ in idxs:
        g = rng.standard_normal((d, 2)) + 1j * rng.standard_normal((d, 2))
        gs.append(g @ g.conj().T + 1e-3 * np.eye(d))
    total = sum(gs)
    w, v = _herm_eig(total)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    ws, vs = _herm_eig(omega.rho_hat.matrix)
    sqrt_rho = (vs * np.sqrt(np.clip(ws, 0, None))) @ vs.conj().T
    parts = {}
    for idx, g in zip(idxs, gs):
        m = inv_sqrt @ g @ inv_sqrt
        part = sqrt_rho @ m @ sqrt_rho
        parts[idx] = StateDensity(LocalOperator(omega.region, 0.5 * (part + part.conj().T)))
    return Decomposition(tuple(shape), parts)


__all__ = [
    "INF",
    "StateDensity",
    "StateError",
    "NotFaithfulError",
    "DecompositionError",
    "Decomposition",
    "state_from_density_matrix",
    "tracial_state",
    "normalize",
    "regularize",
    "restrict",
    "entropy",
    "relative_entropy",
    "ssa_residual",
    "product_extension",
    "perturb",
    "cnt_functional",
    "trivial_decomposition",
    "spectral_decomposition",
    "random_decomposition",
    "expm_h",
    "logm_h",
    "herm_fn",
]
