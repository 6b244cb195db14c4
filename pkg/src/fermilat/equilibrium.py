"""Finite-volume KMS, dKMS, Gibbs-condition and product-form checks."""

from __future__ import annotations

import math

import numpy as np

from .car import (
    LocalOperator,
    annihilation,
    embed,
    op_norm,
    v_unitary,
)
from .expectations import commutant_basis
from .potentials import internal_energy, local_hamiltonian, surface_energy
from .report import Report, inputs_hash
from .sampling import random_operator, rng_for
from .states import (
    INF,
    NotFaithfulError,
    StateDensity,
    SUPPORT_CUTOFF,
    normalize,
    perturb,
    restrict,
)
from .thermo import gibbs_density

DEFAULT_TOL = 1e-9


def _on(x, region):
    return x if x.region == region else embed(x, region)


def _unitary_power(rho, t):
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return (v * np.exp(1j * t * np.log(w))) @ v.conj().T


def modular_flow(phi, t, x):
    """sigma_t(x) = rho_hat^{it} x rho_hat^{-it} for faithful phi."""
    if phi.min_eigenvalue <= SUPPORT_CUTOFF:
        raise NotFaithfulError("modular flow needs a faithful state")
    x = _on(x, phi.region)
    u = _unitary_power(phi.rho_hat.matrix, t)
    return LocalOperator(x.region, u @ x.matrix @ u.conj().T)


def inner_dynamics(H, t, x):
    """alpha_t(x) = e^{itH} x e^{-itH}."""
    x = _on(x, H.region)
    w, v = np.linalg.eigh(0.5 * (H.matrix + H.matrix.conj().T))
    u = (v * np.exp(1j * t * w)) @ v.conj().T
    return LocalOperator(x.region, u @ x.matrix @ u.conj().T)


def imaginary_shift(H, beta, x):
    """alpha_{i beta}(x) = e^{-beta H} x e^{beta H}."""
    x = _on(x, H.region)
    w, v = np.linalg.eigh(0.5 * (H.matrix + H.matrix.conj().T))
    # shift the spectrum to keep both exponentials finite
    w = w - 0.5 * (w.max() + w.min())
    left = (v * np.exp(-beta * w)) @ v.conj().T
    right = (v * np.exp(beta * w)) @ v.conj().T
    return LocalOperator(x.region, left @ x.matrix @ right)


def kms_residual(phi, H, beta, A, B):
    """|phi(A alpha_{i beta}(B)) - phi(B A)|."""
    R = phi.region
    H, A, B = _on(H, R), _on(A, R), _on(B, R)
    return abs(phi(A @ imaginary_shift(H, beta, B)) - phi(B @ A))


def s_function(x, y):
    """S(x, y) = y log y - y log x, with S(0, y > 0) = +inf and S(x, 0) = 0."""
    if x < 0 or y < 0:
        raise ValueError("S(x, y) needs x, y >= 0")
    if y == 0:
        return 0.0
    if x == 0:
        return INF
    return y * math.log(y) - y * math.log(x)


def derivation(H, A):
    """delta(A) = i [H, A]."""
    A = _on(A, H.region)
    return (H @ A - A @ H) * 1j


def dkms_check(phi, Phi, beta, I, ambient, sample_ops, tol=DEFAULT_TOL):
    """(C-1) |Re phi(A* delta A)| and (C-2) the margin of -i beta phi(A* delta A) over S.

    The reported residuals are the worst C-1 value and the worst C-2
    violation max(0, S - lhs); the details keep the raw margins.
    """
    H = local_hamiltonian(Phi, I, ambient)
    H = _on(H, phi.region)
    c1, c2, margins = [], [], []
    for A in sample_ops:
        A = _on(A, phi.region)
        val = phi(A.dag @ derivation(H, A))
        c1.append(abs(val.real))
        lhs = (-1j * beta * val).real
        x = max(phi(A @ A.dag).real, 0.0)
        y = max(phi(A.dag @ A).real, 0.0)
        # relative cutoff so roundoff on a vanishing expectation is not read as +inf
        scale = max(1.0, op_norm(A) ** 2)
        x = 0.0 if x <= 1e-14 * scale else x
        y = 0.0 if y <= 1e-14 * scale else y
        margin = lhs - s_function(x, y)
        margins.append(margin)
        c2.append(max(0.0, -margin))
    return Report(
        "dkms",
        [max(c1, default=0.0), max(c2, default=0.0)],
        tol,
        inputs_hash(phi.region, I, ambient, beta, len(sample_ops)),
        details={"c2_margins": margins},
    )


def _generators(I, ambient):
    out = []
    for s in I:
        a = annihilation(s, ambient)
        out += [a, a.dag]
    return out


def gibbs_condition_residual(phi, Phi, beta, I, ambient, tol=DEFAULT_TOL):
    """Centralizer, tracial-restriction and local-Gibbs residuals of the perturbed state."""
    if phi.min_eigenvalue <= SUPPORT_CUTOFF:
        raise NotFaithfulError("Gibbs condition needs a faithful state")
    H = _on(local_hamiltonian(Phi, I, ambient), phi.region)
    psi = normalize(perturb(phi, H * beta))
    rho = psi.rho_hat
    central = max((op_norm(rho @ g - g @ rho) for g in _generators(I, phi.region)), default=0.0)
    d = 1 << len(I)
    tracial = op_norm(restrict(psi, I).rho_hat - LocalOperator(I, np.eye(d)))
    W = _on(surface_energy(Phi, I, ambient), phi.region)
    psi_w = normalize(perturb(phi, W * beta))
    local = op_norm(restrict(psi_w, I).rho_hat - gibbs_density(internal_energy(Phi, I), beta).rho_hat)
    return Report(
        "gibbs_condition",
        [central, tracial, local],
        tol,
        inputs_hash(phi.region, I, ambient, beta),
        details={"names": ["centralizer", "tracial_restriction", "local_gibbs_restriction"]},
    )


def _unit(x):
    n = op_norm(x)
    return x if n == 0 else x / n


def product_form_residual(phi, Phi, beta, I, ambient, mode="complement", samples=20, seed=0):
    """max |psi(AB) - psi(A) psi(B)| for psi the normalized beta H(I)-perturbation.

    ``complement``: B runs over random elements of A(ambient - I) and the A
    side includes v_I next to random elements of A(I). ``commutant``: B runs
    over a basis of the relative commutant of A(I).
    """
    R = phi.region
    H = _on(local_hamiltonian(Phi, I, ambient), R)
    psi = normalize(perturb(phi, H * beta))
    comp = ambient - I
    A_list = [_unit(v_unitary(I, I))] + [
        _unit(random_operator(I, rng_for(seed, 2 * k))) for k in range(samples)
    ]
    if mode == "complement":
        if not len(comp):
            return 0.0
        B_list = [_unit(random_operator(comp, rng_for(seed, 2 * k + 1))) for k in range(samples)]
        B_list += [_unit(random_operator(comp, rng_for(seed, 10_000 + k), parity="odd")) for k in range(samples)]
    elif mode == "commutant":
        basis, _ = commutant_basis(I, ambient)
        B_list = [_unit(b) for b in basis]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    worst = 0.0
    for A in A_list:
        A = _on(A, R)
        pa = psi(A)
        for B in B_list:
            B = _on(B, R)
            worst = max(worst, abs(psi(A @ B) - pa * psi(B)))
    return worst


def finite_gibbs_state(Phi, beta, ambient):
    """Gibbs state of U(ambient), the finite-volume equilibrium reference."""
    return gibbs_density(internal_energy(Phi, ambient), beta)


def odd_perturbed_state(Phi, beta, I, ambient, eps=0.5, seed=0):
    """Faithful state that satisfies the Gibbs condition on I but is not even.

    Its beta H(I)-perturbation has density proportional to
    e^{-beta U'/2} (1 + eps v_I Y) e^{-beta U'/2} with U' = U(ambient - I)
    and Y odd and self-adjoint in A(ambient - I), ||Y|| = 1.
    """
    comp = ambient - I
    if not len(comp) or not len(I):
        raise ValueError("need nonempty I and complement")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    Y = _unit(random_operator(comp, rng_for(seed, 0), hermitian=True, parity="odd"))
    Up = embed(internal_energy(Phi, comp), ambient)
    w, v = np.linalg.eigh(Up.matrix)
    half = LocalOperator(ambient, (v * np.exp(-0.5 * beta * (w - w.min()))) @ v.conj().T)
    core = LocalOperator(ambient, np.eye(1 << len(ambient))) + embed(v_unitary(I, I), ambient) @ embed(Y, ambient) * eps
    psi = normalize(StateDensity(half @ core @ half))
    H = local_hamiltonian(Phi, I, ambient)
    return normalize(perturb(psi, H * (-beta)))


__all__ = [
    "modular_flow",
    "inner_dynamics",
    "imaginary_shift",
    "kms_residual",
    "s_function",
    "derivation",
    "dkms_check",
    "gibbs_condition_residual",
    "product_form_residual",
    "finite_gibbs_state",
    "odd_perturbed_state",
]
