import numpy as np
import pytest
from hypothesis import given, strategies as st

from anderson_lab import dispersion as disp
from anderson_lab.rng import stream
from anderson_lab.spectral import (SpectralError, SpectralTables, build_phi, cusp_exponent,
                                   diffusion_matrix, diffusion_scalar_surface, fit_theta_constants,
                                   integral_probe_log, ladder_integral_probe, phi_surface,
                                   renormalized_omega, shell_projection, shell_sample,
                                   shell_sample_exact, surface_proposal)


def sin2(axis):
    return lambda v: np.sin(2 * np.pi * v[:, axis]) ** 2


def test_phi_normalized_within_three_sigma(tables):
    total = np.sum(tables.phi) * tables.de
    # bins are multinomial counts; the normalization error is far below one bin's stderr
    err = np.sqrt(np.sum(tables.phi_stderr**2)) * tables.de
    assert abs(total - 1) <= 3 * err + 1e-12
    assert np.all(tables.phi >= 0)


def test_too_few_samples_rejected():
    with pytest.raises(SpectralError, match="at least"):
        build_phi(1000)


def test_phi_antipodal(tables):
    diff = tables.phi - tables.phi[::-1]
    err = np.hypot(tables.phi_stderr, tables.phi_stderr[::-1])
    inner = slice(2, -2)
    assert np.mean(np.abs(diff[inner]) <= 3 * err[inner] + 1e-12) > 0.99


def test_phi_cusp_exponent(tables):
    slope, _ = cusp_exponent(tables, 0.01, 0.2)
    assert slope == pytest.approx(0.5, abs=0.05)


def test_phi_at_three_by_two_methods(tables):
    surf, err = phi_surface(3.0, 400_000, seed=3)
    assert tables.phi_at(3.0) == pytest.approx(surf, rel=0.02)


def test_phi_derivative_bounded_inside(tables):
    sel = (tables.e > 0.5) & (tables.e < 5.5)
    # the raw histogram is noisy; smooth over 10 bins before differencing
    k = np.ones(10) / 10
    sm = np.convolve(tables.phi, k, mode="same")
    dphi = np.gradient(sm, tables.de)
    assert np.max(np.abs(dphi[sel])) < 1.0


def test_save_load_round_trip(tmp_path, small_tables):
    csv_path, side = small_tables.save(tmp_path / "phi.csv")
    assert csv_path.read_text().splitlines()[0] == "e,phi,phi_stderr,R,I"
    back = SpectralTables.load(csv_path)
    assert np.array_equal(back.phi, small_tables.phi)
    assert back.theta(2.2) == pytest.approx(small_tables.theta(2.2), abs=1e-12)
    assert back.metadata()["n_samples"] == small_tables.n_samples


def test_tables_deterministic_given_seed():
    a = build_phi(200_000, seed=9, timestamp="pinned")
    b = build_phi(200_000, seed=9, timestamp="pinned")
    assert np.array_equal(a.phi, b.phi)


@pytest.mark.parametrize("h,exact", [(lambda v: np.cos(2 * np.pi * v[:, 0]), 0.0),
                                     (lambda v: disp.energy(v), 3.0)])
def test_co_area_consistency(h, exact):
    n = 10_000_000
    # left side: int_0^6 [h](s) ds with the energy drawn uniformly as quadrature node
    rng = stream(11, "coarea")
    lhs_samples = []
    rhs_samples = []
    for b in range(10):
        s = rng.uniform(0, 6, n // 10)
        v, w = surface_proposal(s, rng)
        lhs_samples.append(6 * w * h(v))
        u = rng.random((n // 10, 3)) - 0.5
        rhs_samples.append(h(u))
    lhs = np.concatenate(lhs_samples)
    rhs = np.concatenate(rhs_samples)
    diff = lhs.mean() - rhs.mean()
    err = np.hypot(lhs.std() / np.sqrt(n), rhs.std() / np.sqrt(n))
    assert abs(diff) <= 3 * err
    assert abs(rhs.mean() - exact) <= 3 * rhs.std() / np.sqrt(n)


def test_shell_projection_of_one_is_phi(tables):
    vals, errs = shell_projection(lambda v: np.ones(len(v)), [1.5, 3.0], 200_000, seed=2)
    for e, val, err in zip([1.5, 3.0], vals, errs):
        assert abs(val - tables.phi_at(e)) <= 3 * np.hypot(err, tables.phi_stderr_at(e)) + 0.01 * val


def test_shell_sample_symmetries():
    s = shell_sample(3.0, 0.01, 100_000, seed=1)
    assert np.all(np.abs(disp.energy(s.points) - 3.0) < 0.005)
    m, err = s.mean(lambda v: np.sin(2 * np.pi * v[:, 0]))
    assert abs(m) <= 3 * err
    m1, e1 = s.mean(sin2(0))
    m2, e2 = s.mean(sin2(1))
    # stderr of the difference of correlated means is bounded by the sum
    assert abs(m1 - m2) <= 3 * (e1 + e2)


@pytest.mark.slow
def test_shell_width_refinement():
    wide = shell_sample(1.0, 0.05, 100_000, seed=4).mean(sin2(0))[0]
    thin = shell_sample(1.0, 0.01, 100_000, seed=5).mean(sin2(0))[0]
    assert abs(wide - thin) / thin < 0.01


def test_shell_sample_low_acceptance_aborts():
    with pytest.raises(SpectralError, match="acceptance"):
        shell_sample(1e-4, 1e-5, 10, seed=0, batch=100_000)


def test_exact_shell_matches_thin_shell():
    exact = shell_sample_exact(3.0, 100_000, stream(1, "t"))
    assert np.allclose(disp.energy(exact), 3.0, atol=1e-12)
    thin = shell_sample(3.0, 0.01, 100_000, seed=6)
    f = sin2(2)
    a, b = f(exact), f(thin.points)
    assert abs(a.mean() - b.mean()) <= 3 * np.hypot(a.std(), b.std()) / np.sqrt(100_000)


def test_exact_shell_refuses_critical_value():
    with pytest.raises(SpectralError):
        shell_sample_exact(2.0, 10, stream(0, "t"))


def test_theta_far_from_band(tables):
    assert tables.theta(100.0).real == pytest.approx(1 / 97, abs=1e-3)
    assert abs(tables.theta(100.0).imag) < 1e-12
    val = tables.theta(-10.0)
    assert np.isfinite(val) and val.imag == 0


@pytest.mark.parametrize("alpha", [1.0, 2.5, 3.0, 4.5, 5.0])
def test_im_theta_matches_surface_phi(tables, alpha):
    surf, err = phi_surface(alpha, 400_000, seed=8)
    im = tables.theta(alpha).imag
    assert abs(im + np.pi * surf) <= 3 * np.pi * np.hypot(err, float(tables.phi_stderr_at(alpha)))


def test_theta_eps_limit(tables):
    a = 2.3
    small = tables.theta(a, eps=1e-4)
    assert abs(small - tables.theta(a)) < 2e-3
    # epsilon > 0 lowers |Im| by smoothing the resonance
    assert tables.theta(a, eps=0.3).imag > tables.theta(a).imag - 0.05


def test_theta_antipodal_symmetry(tables, rng):
    for a in rng.uniform(0.1, 5.9, 10):
        lhs = tables.theta(a)
        rhs = -np.conj(tables.theta(6 - a))
        s1, s2 = tables.theta_stderr(a), tables.theta_stderr(6 - a)
        assert abs(lhs.real - rhs.real) <= 3 * np.hypot(s1.real, s2.real).item()
        assert abs(lhs.imag - rhs.imag) <= 3 * np.hypot(s1.imag, s2.imag).item()


def test_renormalized_omega(tables, rng):
    p = rng.uniform(-0.5, 0.5, (1000, 3))
    assert np.array_equal(renormalized_omega(p, 0.0, tables), disp.energy(p).astype(complex))
    shell = shell_sample_exact(3.0, 100, stream(0, "om"))
    assert np.all(renormalized_omega(shell, 0.1, tables).imag < 0)
    assert np.all(renormalized_omega(p, 0.3, tables).imag <= 0)


def test_theta_constants_are_finite(tables):
    c = fit_theta_constants(tables)
    assert 0 < c["c2"] < 5
    assert c["c1"] > 0 and c["c3"] > 0


@given(st.floats(0.05, 5.95))
def test_im_theta_nonpositive(alpha):
    t = _T()
    assert t.theta(alpha).imag <= 0
    assert t.theta_fast(alpha).imag <= 1e-15


_cache = {}


def _T():
    if "t" not in _cache:
        _cache["t"] = build_phi(200_000, seed=4, timestamp="pinned")
    return _cache["t"]


def test_diffusion_matrix_shape_and_errors(small_tables):
    shell = shell_sample(3.0, 0.01, 50_000, seed=2)
    D = diffusion_matrix(3.0, shell, small_tables)
    off = D.matrix - np.diag(np.diag(D.matrix))
    assert np.all(np.abs(off) <= 4 * D.stderr)
    with pytest.raises(SpectralError):
        diffusion_matrix(2.0, shell, small_tables)
    with pytest.raises(SpectralError):
        diffusion_matrix(6.5, shell, small_tables)


def test_surface_diffusion_matches_thin_shell(tables):
    shell = shell_sample(2.5, 0.01, 200_000, seed=7)
    D = diffusion_matrix(2.5, shell, tables)
    Ds, err = diffusion_scalar_surface(2.5, 400_000, seed=7)
    assert abs(D.scalar - Ds) <= 3 * np.hypot(D.scalar_stderr, err)


def test_log_probe_far_from_spectrum(tables):
    r = integral_probe_log(20.0, 0.1, 0.01**1.05, tables)
    assert r.value == pytest.approx(1 / 17, rel=0.05)


def test_ladder_probe_positive(tables):
    r = ladder_integral_probe(2.0, 4.0, (0.1, 0.0, 0.0), 0.2, 0.2**2.1, tables, n=20_000)
    assert r.value > 0 and r.stderr < r.value
