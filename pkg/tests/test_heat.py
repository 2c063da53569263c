import numpy as np
import pytest
from scipy import integrate

from anderson_lab.diagrams.ladder import MomentumProfile
from anderson_lab.heat import (HeatSolution, gaussian_overlap, heat_solution, initial_shell_mass,
                               pair_heat_with_observable, shell_average)
from anderson_lab.wigner import Observable


def test_solution_is_gaussian_with_covariance_2TD():
    D = np.diag([0.2, 0.3, 0.4])
    s = HeatSolution(2.0, 3.0, 0.7, D)
    assert np.allclose(s.covariance, 4 * D)
    assert s.fourier(np.zeros(3)) == pytest.approx(0.7)
    # mass by quadrature on a grid that covers +-8 standard deviations
    ax = [np.linspace(-8 * np.sqrt(c), 8 * np.sqrt(c), 121) for c in np.diag(s.covariance)]
    X = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)
    dv = np.prod([a[1] - a[0] for a in ax])
    assert s(X).sum() * dv == pytest.approx(0.7, rel=1e-8)
    with pytest.raises(ValueError):
        HeatSolution(0.0, 3.0, 1.0, D)(np.zeros(3))


def test_second_moment_matches_finite_difference_pde():
    """1D explicit stepping of f_T = D f_xx against the closed-form variance growth."""
    D, T = 0.35, 2.0
    x = np.linspace(-15, 15, 1201)
    h = x[1] - x[0]
    s0 = 0.5
    f = np.exp(-x**2 / (2 * s0**2))
    f /= f.sum() * h
    dt = 0.2 * h**2 / D
    steps = int(np.ceil(T / dt))
    dt = T / steps
    for _ in range(steps):
        f[1:-1] += dt * D * (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    var = np.sum(x**2 * f) * h
    c = HeatSolution(T, 3.0, 1.0, D * np.eye(3)).covariance[0, 0]
    assert var - s0**2 == pytest.approx(c, rel=0.01)


def test_gaussian_overlap_against_quadrature():
    obs = Observable.gaussian((1.0, 2.0, 0.5), center=(0.3, -0.4, 0.2))
    cov = np.diag([0.5, 1.5, 2.0])
    got = gaussian_overlap(obs, cov)

    def one(i):
        s2, c, v = np.diag(np.asarray(obs.cov))[i], obs.center[i], cov[i, i]
        f = lambda X: np.exp(-(X - c) ** 2 / (2 * s2)) * np.exp(-X**2 / (2 * v)) / np.sqrt(2 * np.pi * v)  # noqa: E731
        return integrate.quad(f, -np.inf, np.inf, epsabs=1e-14)[0]

    assert got == pytest.approx(np.prod([one(i) for i in range(3)]), rel=1e-6)


def test_gaussian_overlap_correlated_covariance():
    obs = Observable.gaussian(1.5, center=(0.5, 0.0, 0.0))
    cov = np.array([[1.0, 0.4, 0.0], [0.4, 1.2, 0.3], [0.0, 0.3, 0.8]])
    ax = np.linspace(-9, 9, 181)
    X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
    q = np.einsum("...i,ij,...j->...", X, np.linalg.inv(cov), X)
    dens = np.exp(-0.5 * q) / np.sqrt((2 * np.pi) ** 3 * np.linalg.det(cov))
    quad = np.sum(obs.x_part(X) * dens) * (ax[1] - ax[0]) ** 3
    assert gaussian_overlap(obs, cov) == pytest.approx(quad, rel=1e-6)
    assert gaussian_overlap(Observable.constant(), cov) == 1.0


def test_family_mass_conserved_in_time(small_tables):
    prof = MomentumProfile()
    fam = heat_solution(prof, small_tables, 0.5, n_diffusion=20_000)
    assert fam.total_mass() == pytest.approx(1.0, rel=0.02)
    assert fam.at_time(7.0).total_mass() == pytest.approx(fam.total_mass(), rel=1e-12)
    assert np.all(fam.energies >= prof.support[0]) and np.all(fam.energies <= prof.support[1])


def test_initial_mass_sampler_agrees_with_closed_form(small_tables):
    e = np.array([2.6, 3.0, 3.4])
    closed = initial_shell_mass(MomentumProfile(), e, small_tables)
    # a tilt of 1e-9 forces the surface sampler without changing the profile
    sampled = initial_shell_mass(MomentumProfile(tilt=1e-9), e, small_tables, n_per=200_000)
    assert np.allclose(sampled, closed, rtol=0.03)


def test_shell_average_of_cosine(small_tables):
    # sum_j (1 - cos 2 pi v_j) = e on the shell, so <cos 2 pi v_1>_e = 1 - e / 3
    obs = Observable.gaussian(1.0, harmonics=(((1, 0, 0), 0.5), ((-1, 0, 0), 0.5)))
    for e in (1.0, 2.5, 4.0):
        assert shell_average(obs, e, 200_000).real == pytest.approx(1 - e / 3, abs=5e-3)
    assert shell_average(Observable.constant(2.0), 3.0) == 2.0


def test_pairing_at_zero_time_and_long_time_decay(small_tables):
    prof = MomentumProfile()
    fam = heat_solution(prof, small_tables, 0.0, n_diffusion=20_000)
    obs = Observable.gaussian(2.0, center=(0.0, 0.0, 0.0))
    assert pair_heat_with_observable(fam, obs) == pytest.approx(fam.total_mass())
    late = pair_heat_with_observable(fam.at_time(400.0), obs)
    later = pair_heat_with_observable(fam.at_time(1600.0), obs)
    # the overlap of a fixed bump with a spreading Gaussian falls like T^-3/2
    assert abs(late / later) == pytest.approx(8.0, rel=0.02)
