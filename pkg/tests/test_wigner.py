import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anderson_lab.lattice import ComplexField, LatticeGrid, fourier_forward
from anderson_lab.wigner import (Observable, WignerError, wigner_continuity_gap, wigner_direct,
                                 wigner_transform)


def random_state(L, seed, normalize=True):
    g = LatticeGrid(L)
    r = np.random.default_rng(seed)
    v = r.standard_normal(g.shape) + 1j * r.standard_normal(g.shape)
    if normalize:
        v /= np.linalg.norm(v)
    return ComplexField(g, v)


def natural(psi):
    return np.fft.fftshift(psi.values)


def test_point_mass_is_flat_in_momentum():
    g = LatticeGrid(4)
    vals = np.zeros(g.shape)
    vals[0, 0, 0] = 1
    w = wigner_transform(ComplexField(g, vals))
    W = w.values()
    origin = (np.argmin(np.abs(w.x_coords())),) * 3
    assert np.allclose(W[origin], 8.0)
    rest = W.copy()
    rest[origin] = 0
    assert np.max(np.abs(rest)) < 1e-13
    assert w.total_mass() == pytest.approx(1.0, abs=1e-14)


def test_marginals_on_random_states():
    L = 8
    worst_v = worst_x = 0.0
    for seed in range(100):
        psi = random_state(L, seed)
        w = wigner_transform(psi)
        expect_v = np.zeros((2 * L,) * 3)
        expect_v[::2, ::2, ::2] = 8 * np.abs(natural(psi)) ** 2
        expect_x = np.abs(np.fft.fftn(natural(psi), s=(2 * L,) * 3, axes=(0, 1, 2))) ** 2
        worst_v = max(worst_v, np.max(np.abs(w.v_marginal() - expect_v)))
        worst_x = max(worst_x, np.max(np.abs(w.x_marginal() - expect_x)))
    assert worst_v < 1e-12
    assert worst_x < 1e-12


def test_unnormalized_state_scales_mass():
    psi = random_state(4, 0, normalize=False)
    assert wigner_transform(psi).total_mass() == pytest.approx(psi.norm2(), rel=1e-12)


@pytest.mark.parametrize("L", [2, 4])
def test_fft_path_matches_defining_sum(L):
    psi = random_state(L, 7)
    W = wigner_direct(psi)
    assert np.max(np.abs(W.imag)) < 1e-12
    assert np.max(np.abs(wigner_transform(psi).values() - W.real)) < 1e-12


def test_direct_sum_refuses_large_boxes():
    with pytest.raises(WignerError):
        wigner_direct(random_state(10, 0))


def test_momentum_representation_accepted():
    psi = random_state(4, 3)
    a = wigner_transform(psi).half
    b = wigner_transform(fourier_forward(psi)).half
    assert np.max(np.abs(a - b)) < 1e-12


def test_fourier_form_is_shifted_product():
    psi = random_state(4, 2)
    w = wigner_transform(psi)
    Wh = w.fourier()
    a = w.psi_hat
    # xi = 0 row: |psi_hat(v)|^2
    assert np.allclose(Wh[0, 0, 0], np.abs(a) ** 2)
    # xi_j = j / L shifts v by +-j/2L
    j = (1, 0, 3)
    k = (2, 5, 7)
    M = w.M
    lo = tuple((kk - jj) % M for kk, jj in zip(k, j))
    hi = tuple((kk + jj) % M for kk, jj in zip(k, j))
    assert Wh[j + k] == pytest.approx(np.conj(a[lo]) * a[hi], abs=1e-13)


def test_constant_observable_gives_norm():
    psi = random_state(8, 11, normalize=False)
    w = wigner_transform(psi)
    assert w.pair(Observable.constant()).real == pytest.approx(psi.norm2(), rel=1e-12)


def test_point_mass_pairing_evaluates_profile():
    g = LatticeGrid(8)
    vals = np.zeros(g.shape)
    vals[1, 2, 0] = 1  # site (1, 2, 0)
    obs = Observable.gaussian(1.5, center=(0.2, 0.0, -0.1))
    eps = 0.7
    got = wigner_transform(ComplexField(g, vals)).pair(obs, eps)
    expect = obs.x_part(eps * np.array([1.0, 2.0, 0.0]))
    assert got == pytest.approx(expect, abs=1e-13)


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.25])
def test_position_and_fourier_pairings_agree(eps):
    psi = random_state(8, 5)
    w = wigner_transform(psi)
    obs = Observable.gaussian((1.0, 2.0, 1.5), center=(0.3, -0.2, 0.1),
                              harmonics=(((0, 0, 0), 1.0), ((1, 0, 0), 0.5), ((0, -1, 2), 0.25j)))
    assert abs(w.pair(obs, eps) - w.pair_fourier(obs, eps)) < 1e-10


def test_wigner_is_real_and_antipodal_in_momentum():
    w = wigner_transform(random_state(4, 9))
    W = w.values()
    assert W.dtype.kind == "f"
    # complex conjugation of psi reflects v; real psi therefore gives W(x, -v) = W(x, v)
    g = LatticeGrid(4)
    real_psi = ComplexField(g, np.random.default_rng(1).standard_normal(g.shape))
    Wr = wigner_transform(real_psi).values()
    flip = np.roll(Wr[..., ::-1, ::-1, ::-1], 1, axis=(3, 4, 5))
    assert np.max(np.abs(Wr - flip)) < 1e-12


def test_continuity_gap_vanishes_without_perturbation():
    psi1 = random_state(4, 1)
    zero = psi1.with_values(np.zeros_like(psi1.values))
    gap = wigner_continuity_gap(psi1, zero, Observable.gaussian(2.0))
    assert gap.bound == 0 and gap.actual == pytest.approx(0, abs=1e-15)


def test_continuity_gap_holds_and_scales():
    obs = Observable.gaussian(2.0, harmonics=(((0, 0, 0), 1.0), ((1, 1, 0), 0.5)))
    psi1 = random_state(8, 2)
    d = random_state(8, 3)
    small = d.with_values(0.1 * d.values)
    half = d.with_values(0.05 * d.values)
    g1 = wigner_continuity_gap(psi1, small, obs)
    g2 = wigner_continuity_gap(psi1, half, obs)
    assert g1.holds and g2.holds
    # bound is A sqrt((|psi1|^2 + |psi2|^2) |psi2|^2); the |psi2|^2 inside the first factor is 1% here
    n1 = psi1.norm2()
    assert g2.bound / g1.bound == pytest.approx(0.5 * np.sqrt((n1 + 0.0025) / (n1 + 0.01)), rel=1e-12)


def test_grid_refinement_stability():
    # a wider observable at smaller eps sees the same macroscopic profile
    psi = random_state(8, 4)
    w = wigner_transform(psi)
    a = w.pair(Observable.gaussian(3.0), 1.0)
    b = w.pair(Observable.gaussian(1.5), 0.5)
    assert abs(a - b) < 1e-12


@settings(max_examples=15)
@given(st.integers(0, 2**31 - 1), st.floats(0.2, 3.0))
def test_pairing_of_real_observable_is_real(seed, width):
    w = wigner_transform(random_state(4, seed))
    val = w.pair(Observable.gaussian(width, harmonics=(((0, 0, 0), 1.0), ((1, 0, 0), 0.5), ((-1, 0, 0), 0.5))))
    assert abs(val.imag) < 1e-12 * max(1.0, abs(val.real))


def test_snapshot_mass(tmp_path):
    from anderson_lab.wigner import write_snapshot_csv

    w = wigner_transform(random_state(4, 6))
    rows = w.snapshot(1.0, np.linspace(-3, 3, 3), np.linspace(0, 6, 4))
    assert sum(r[-1] for r in rows) == pytest.approx(1.0, abs=1e-12)
    head = write_snapshot_csv(rows, tmp_path / "s.csv").read_text().splitlines()[0]
    assert head == "X1,X2,X3,ebin,value"


def test_rejects_non_unit_spacing():
    g = LatticeGrid(4, delta=0.5)
    with pytest.raises(WignerError):
        wigner_transform(ComplexField(g, np.ones(g.shape)))
