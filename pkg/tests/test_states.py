import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermilat.car import (
    LocalOperator,
    RegionError,
    build_region,
    cube,
    embed,
    number,
    op_norm,
    theta,
)
from fermilat.expectations import cond_expect_on
from fermilat.sampling import random_density, random_operator, rng_for
from fermilat.states import (
    INF,
    Decomposition,
    DecompositionError,
    NotFaithfulError,
    StateDensity,
    StateError,
    cnt_functional,
    entropy,
    normalize,
    perturb,
    product_extension,
    random_decomposition,
    regularize,
    relative_entropy,
    restrict,
    spectral_decomposition,
    ssa_residual,
    state_from_density_matrix,
    tracial_state,
    trivial_decomposition,
)

R3 = cube(3)


def _state(region, seed, **kw):
    return StateDensity(random_density(region, rng_for(seed), **kw))


def _site_state(site, p):
    return state_from_density_matrix(build_region([site]), np.diag([1 - p, p]))


def test_density_validation():
    with pytest.raises(StateError):
        StateDensity(LocalOperator(cube(1), np.diag([2.0, -0.5])))
    with pytest.raises(StateError):
        StateDensity(LocalOperator(cube(1), np.array([[1, 1], [0, 1]])))


def test_entropy_examples():
    S, S_hat = entropy(tracial_state(R3))
    assert S == pytest.approx(3 * math.log(2)) and S_hat == pytest.approx(0, abs=1e-14)
    pure = state_from_density_matrix(cube(2), np.diag([0, 1, 0, 0]))
    assert entropy(pure)[0] == pytest.approx(0, abs=1e-14)
    for seed in range(5):
        S = entropy(_state(R3, seed))[0]
        assert -1e-12 <= S <= 3 * math.log(2) + 1e-12
    with pytest.raises(StateError):
        entropy(StateDensity(random_density(cube(1), rng_for(0)) * 2.0))


def test_restrict():
    J = build_region([0, 2])
    r = restrict(tracial_state(R3), J)
    assert op_norm(r.rho_hat - tracial_state(J).rho_hat) <= 1e-14
    phi = _state(R3, 1)
    assert restrict(phi, J).weight == pytest.approx(phi.weight)
    prod = product_extension([_site_state(0, 0.2), _site_state(1, 0.7), _site_state(2, 0.4)])
    expect = product_extension([_site_state(0, 0.2), _site_state(2, 0.4)])
    assert op_norm(restrict(prod, J).rho_hat - expect.rho_hat) <= 1e-12


def test_relative_entropy_examples():
    phi, psi = _state(R3, 2), _state(R3, 3)
    assert abs(relative_entropy(phi, phi)) <= 1e-12
    assert relative_entropy(tracial_state(R3), phi) == pytest.approx(-entropy(phi)[1])
    assert relative_entropy(psi, phi) >= 0
    J = build_region([0, 1])
    assert relative_entropy(restrict(psi, J), restrict(phi, J)) <= relative_entropy(psi, phi) + 1e-12
    # S_hat on A(I) minus S_hat on the full algebra equals S(phi o E_I, phi)
    I = build_region([1])
    phiE = StateDensity(cond_expect_on(phi.rho_hat, I))
    assert entropy(restrict(phi, I))[1] - entropy(phi)[1] == pytest.approx(relative_entropy(phiE, phi))


def test_relative_entropy_support_and_regions():
    pure = state_from_density_matrix(cube(1), np.diag([1.0, 0.0]))
    assert relative_entropy(pure, tracial_state(cube(1))) == INF
    assert np.isfinite(relative_entropy(tracial_state(cube(1)), pure))
    assert np.isfinite(relative_entropy(pure, tracial_state(cube(1)), eps=1e-6))
    with pytest.raises(RegionError):
        relative_entropy(tracial_state(cube(1)), tracial_state(cube(2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.booleans())
def test_ssa(seed, even):
    psi = _state(cube(4), seed, even=even)
    assert ssa_residual(psi, build_region([0, 1, 2]), build_region([1, 2, 3])) <= 1e-10
    assert ssa_residual(psi, build_region([0, 1]), build_region([2, 3])) <= 1e-10


def test_ssa_product_state_is_additive():
    prod = product_extension([_site_state(i, p) for i, p in enumerate([0.1, 0.5, 0.8])])
    assert abs(ssa_residual(prod, build_region([0, 1]), build_region([1, 2]))) <= 1e-12


def test_product_extension():
    f0, f1 = _site_state(0, 0.3), _site_state(1, 0.6)
    prod = product_extension([f0, f1])
    R = cube(2)
    n0n1 = number(0, R) @ number(1, R)
    assert prod(n0n1).real == pytest.approx(0.3 * 0.6)
    assert entropy(prod)[0] == pytest.approx(entropy(f0)[0] + entropy(f1)[0])
    assert prod.is_even()
    odd = StateDensity(LocalOperator(cube(1), np.array([[1.0, 0.5], [0.5, 1.0]])))
    odd1 = StateDensity(LocalOperator(build_region([1]), odd.rho_hat.matrix))
    mixed = product_extension([odd, f1])
    assert not mixed.is_even()
    with pytest.raises(StateError):
        product_extension([odd, odd1])
    with pytest.raises(RegionError):
        product_extension([f0, _site_state(0, 0.1)])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_perturbation_identities(seed):
    rng = rng_for(seed)
    phi = StateDensity(random_density(R3, rng))
    h1 = random_operator(R3, rng, hermitian=True)
    h2 = random_operator(R3, rng, hermitian=True)
    ph = perturb(phi, h1)
    assert relative_entropy(ph, phi) == pytest.approx(-phi(h1).real, abs=1e-9)
    assert math.log(ph.weight) <= op_norm(h1) + 1e-12
    assert op_norm(perturb(ph, h2).rho_hat - perturb(phi, h1 + h2).rho_hat) <= 1e-10 * max(1, op_norm(ph.rho_hat))
    assert op_norm(perturb(phi, h1 * 0).rho_hat - phi.rho_hat) <= 1e-10


def test_perturb_errors():
    pure = state_from_density_matrix(cube(1), np.diag([1.0, 0.0]))
    h = LocalOperator(cube(1), np.diag([0.3, -0.3]))
    with pytest.raises(NotFaithfulError):
        perturb(pure, h)
    assert perturb(pure, h, eps=1e-9).weight > 0
    with pytest.raises(StateError):
        perturb(tracial_state(cube(1)), LocalOperator(cube(1), np.array([[0, 1], [0, 0]])))
    reg = regularize(pure, 0.1)
    assert reg.min_eigenvalue == pytest.approx(0.1)
    assert normalize(perturb(reg, h)).is_state


def test_lipschitz_for_translation_invariant_products():
    """|s1 - s2| <= (log 2 / 2) ||w1 - w2||, the norm being the limit of box norms (2 here)."""
    from fermilat.thermo import product_state

    r1 = _site_state(0, 0.5)
    r2 = _site_state(0, 0.05)
    dists = []
    for n in (1, 2, 4, 8):
        C = cube(n)
        w1, w2 = product_state(r1, C), product_state(r2, C)
        diff = w1.density_matrix - w2.density_matrix
        dists.append(float(np.abs(np.linalg.eigvalsh(diff)).sum()))
    assert all(b >= a - 1e-12 for a, b in zip(dists, dists[1:])) and dists[-1] > 1.5
    s1, s2 = entropy(r1)[0], entropy(r2)[0]
    assert abs(s1 - s2) <= 0.5 * math.log(2) * 2.0


def test_cnt_trivial_and_spectral():
    parts = [build_region([i]) for i in range(3)]
    prod = product_extension([_site_state(i, p) for i, p in enumerate([0.2, 0.45, 0.9])])
    assert abs(cnt_functional(prod, trivial_decomposition(prod, 3), parts)) <= 1e-12
    d = spectral_decomposition(prod, parts)
    assert cnt_functional(prod, d, parts) == pytest.approx(entropy(prod)[0], abs=1e-9)


def test_cnt_random_bound():
    rng = rng_for(9)
    parts = [build_region([0, 1]), build_region([2])]
    omega = StateDensity(random_density(R3, rng, even=True))
    S = entropy(omega)[0]
    for k in range(10):
        d = random_decomposition(omega, (2, 3), rng_for(10, k))
        assert cnt_functional(omega, d, parts) <= S + 1e-9


def test_decomposition_check():
    omega = tracial_state(cube(1))
    bad = Decomposition((1,), {(0,): StateDensity(omega.rho_hat * 0.5)})
    with pytest.raises(DecompositionError):
        bad.check(omega)


def test_is_even():
    x = _state(R3, 4)
    assert not x.is_even()
    assert StateDensity((x.rho_hat + theta(x.rho_hat)) * 0.5).is_even()
    assert op_norm(embed(x.rho_hat, R3) - x.rho_hat) == 0
