import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anderson_lab.diagrams.residues import (exp_divided_difference, kernel_by_quadrature, kernel_nodes,
                                            residue_kernel, weighted_kernel_sq)


def test_matches_alpha_quadrature_on_random_tuples():
    rng = np.random.default_rng(0)
    worst = 0.0
    for i in range(100):
        k = i % 4
        z = rng.uniform(0, 6, k + 1) + 1j * rng.uniform(0.05, 0.5, k + 1)
        t = rng.uniform(0.5, 5)
        worst = max(worst, abs(residue_kernel(z, t) - kernel_by_quadrature(z, t)))
    assert worst < 1e-6


def test_single_pole_is_renormalized_decay():
    omega = np.array([3.0 - 0.02j])
    t = 40.0
    for eta in (0.0, 0.01, 0.03):
        assert weighted_kernel_sq(omega, t, eta) == pytest.approx(np.exp(-2 * t * 0.02), rel=1e-12)


def test_two_real_energies_closed_form():
    e1, e2, t, eta = 2.1, 3.4, 7.0, 0.05
    got = weighted_kernel_sq(np.array([e1, e2]), t, eta)
    expect = abs(np.exp(1j * t * e1) - np.exp(1j * t * e2)) ** 2 / (e1 - e2) ** 2
    assert got == pytest.approx(expect, rel=1e-10)
    z = kernel_nodes([e1, e2], eta)
    assert abs(residue_kernel(z, t) - kernel_by_quadrature(z, t)) < 1e-6


def test_independent_of_admissible_eta(rng):
    for k in range(1, 4):
        om = rng.uniform(0, 6, k + 1) - 1j * rng.uniform(0, 0.05, k + 1)
        a = weighted_kernel_sq(om, 20.0, 0.01)
        b = weighted_kernel_sq(om, 20.0, 0.005)
        assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


def test_confluent_nodes_use_derivatives():
    z, t = 2.5 + 0.1j, 3.0
    f1 = 1j * t * np.exp(1j * t * z)
    f2 = (1j * t) ** 2 * np.exp(1j * t * z) / 2
    assert abs(exp_divided_difference([z, z], t) - f1) < 1e-12
    assert abs(exp_divided_difference([z, z + 1e-11], t) - f1) < 1e-9
    assert abs(exp_divided_difference([z, z + 1e-12, z - 1e-12], t) - f2) < 1e-9


def test_clustered_nodes_stay_accurate():
    # a residue sum over nodes 1e-5 apart loses ~15 digits; the fallback must not
    z = np.array([3.0, 3.0 + 1e-5, 3.0 + 2e-5, 3.0 + 3e-5]) + 0.01j
    t = 2.0
    exact = (1j * t) ** 3 * np.exp(1j * t * z.mean()) / 6
    assert abs(exp_divided_difference(z, t) - exact) < 1e-6 * abs(exact)


def test_vectorized_over_leading_axes(rng):
    z = rng.uniform(0, 6, (5, 3)) + 0.1j
    out = exp_divided_difference(z, 4.0)
    assert out.shape == (5,)
    assert np.allclose(out, [exp_divided_difference(row, 4.0) for row in z])


def test_lower_half_plane_rejected():
    with pytest.raises(ValueError):
        residue_kernel([1.0 - 0.1j, 2.0], 1.0)


@settings(max_examples=30)
@given(st.lists(st.floats(0, 6), min_size=2, max_size=4), st.floats(0.1, 10))
def test_divided_difference_is_symmetric(es, t):
    z = np.asarray(es) + 0.05j
    base = exp_divided_difference(z, t)
    for perm in itertools.permutations(range(len(z))):
        assert abs(exp_divided_difference(z[list(perm)], t) - base) <= 1e-8 * max(1.0, abs(base))


@settings(max_examples=30)
@given(st.lists(st.floats(0, 6), min_size=1, max_size=4), st.floats(0.1, 10))
def test_divided_difference_bounded_by_simplex_volume(es, t):
    # |f[z0..zk]| <= sup |f^(k)| / k! and |f^(k)| = t^k exp(-t Im z) <= t^k on the real line
    z = np.asarray(es, dtype=complex)
    k = len(z) - 1
    bound = t**k / np.prod(np.arange(1, k + 1))
    assert abs(exp_divided_difference(z, t)) <= bound * (1 + 1e-6) + 1e-12


def _taylor_divided_difference(z, t, terms=80):
    """``sum_m f^(m)(c)/m! h_{m-k}(z - c)`` with complete homogeneous polynomials ``h``."""
    z = np.asarray(z, dtype=complex)
    c = z.mean()
    w = z - c
    k = len(z) - 1
    # h_j(w) by the recursion over nodes: h_j(w_0..w_i) = h_j(w_0..w_{i-1}) + w_i h_{j-1}(w_0..w_i)
    h = np.zeros(terms, dtype=complex)
    h[0] = 1
    for i, wi in enumerate(w):
        if i == 0:
            h = wi ** np.arange(terms)
            continue
        for j in range(1, terms):
            h[j] = h[j] + wi * h[j - 1]
    total = 0j
    fact = 1.0
    for m in range(terms):
        if m > 0:
            fact *= m
        if m >= k:
            total += (1j * t) ** m / fact * h[m - k]
    return np.exp(1j * t * c) * total


@pytest.mark.parametrize("spread", [1e-3, 1e-6, 1e-9])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_cluster_fallback_matches_taylor_oracle(spread, k, rng):
    z = 2.0 + 0.05j + spread * (rng.random(k + 1) + 1j * rng.random(k + 1))
    t = 5.0
    ref = _taylor_divided_difference(z, t)
    assert abs(exp_divided_difference(z, t) - ref) <= 1e-10 * abs(ref)
