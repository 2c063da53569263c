import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from anderson_lab.lattice import (ComplexField, LatticeGrid, RepresentationError, fourier_forward,
                                  fourier_inverse, momentum_quadrature, read_field_csv, torus_add,
                                  torus_distance, wrap, write_field_csv)


def random_field(grid, rng):
    return ComplexField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def direct_dft(f: ComplexField) -> np.ndarray:
    """O(L^6) definition of the forward transform."""
    g = f.grid
    x = g.positions().reshape(-1, g.d)
    p = g.momenta().reshape(-1, g.d)
    kern = np.exp(-2j * np.pi * p @ x.T)
    return (g.position_weight * kern @ f.values.reshape(-1)).reshape(g.shape)


def test_delta_transforms_to_one():
    g = LatticeGrid(8)
    vals = np.zeros(g.shape)
    vals[0, 0, 0] = 1
    fh = fourier_forward(ComplexField(g, vals))
    assert np.allclose(fh.values, 1.0, atol=1e-15)


def test_plane_wave_is_single_momentum():
    g = LatticeGrid(8, delta=0.5)
    p0 = np.array([2, -1, 3]) / (g.delta * g.L)
    f = ComplexField(g, np.exp(2j * np.pi * g.positions() @ p0))
    fh = np.abs(fourier_forward(f).values)
    k = np.unravel_index(np.argmax(fh), g.shape)
    assert np.allclose(g.momenta()[k], p0)
    assert fh[k] == pytest.approx(g.L**3 * g.delta**3)
    assert np.sum(fh > 1e-9) == 1


def test_constant_momentum_is_delta():
    g = LatticeGrid(4)
    f = fourier_inverse(ComplexField(g, np.ones(g.shape), "momentum"))
    expect = np.zeros(g.shape)
    expect[0, 0, 0] = 1
    assert np.allclose(f.values, expect, atol=1e-15)


@pytest.mark.parametrize("L", [4, 8])
def test_forward_matches_direct_sum(L, rng):
    f = random_field(LatticeGrid(L), rng)
    assert np.max(np.abs(fourier_forward(f).values - direct_dft(f))) < 1e-10


@pytest.mark.parametrize("L", [4, 8, 16])
@pytest.mark.parametrize("delta", [1.0, 0.5])
def test_round_trip_and_parseval(L, delta, rng):
    g = LatticeGrid(L, delta)
    f = random_field(g, rng)
    fh = fourier_forward(f)
    back = fourier_inverse(fh)
    assert np.max(np.abs(back.values - f.values)) / np.max(np.abs(f.values)) < 1e-12
    lhs = g.position_weight * np.sum(np.abs(f.values) ** 2)
    rhs = momentum_quadrature(g, np.abs(fh.values) ** 2).real
    assert abs(lhs - rhs) / lhs < 1e-12


def test_momentum_measure_is_lebesgue():
    for L in (4, 8, 16):
        assert momentum_quadrature(LatticeGrid(L), np.ones((L,) * 3)) == pytest.approx(1.0, abs=1e-14)


def test_wrong_representation_rejected():
    g = LatticeGrid(4)
    f = ComplexField(g, np.zeros(g.shape))
    with pytest.raises(RepresentationError):
        fourier_inverse(f)
    with pytest.raises(RepresentationError):
        fourier_forward(ComplexField(g, f.values, "momentum"))


def test_odd_side_rejected():
    with pytest.raises(ValueError):
        LatticeGrid(5)


@pytest.mark.parametrize("p,q,expect", [
    ((0.1, 0.2, 0.3), (0.1, 0.2, 0.3), 0.0),
    ((0.49, 0, 0), (-0.49, 0, 0), 0.02),
    ((0.25, 0.25, 0), (0, 0, 0), np.sqrt(0.125)),
])
def test_torus_distance_examples(p, q, expect):
    assert torus_distance(p, q) == pytest.approx(expect, abs=1e-12)


def test_torus_distance_metric_on_random_triples(rng):
    p, q, r = (rng.uniform(-0.5, 0.5, (1000, 3)) for _ in range(3))
    assert np.allclose(torus_distance(p, q), torus_distance(q, p))
    assert np.all(torus_distance(p, r) <= torus_distance(p, q) + torus_distance(q, r) + 1e-14)


coords = arrays(float, 3, elements=st.floats(-5, 5, allow_nan=False))


@given(coords, coords)
def test_wrap_is_canonical(p, q):
    s = torus_add(p, q)
    assert np.all(s >= -0.5) and np.all(s < 0.5)
    assert np.allclose(np.cos(2 * np.pi * s), np.cos(2 * np.pi * (p + q)), atol=1e-9)
    assert np.allclose(wrap(wrap(p)), wrap(p))


def test_field_csv_round_trip(tmp_path, rng):
    f = random_field(LatticeGrid(4), rng)
    path = write_field_csv(f, tmp_path / "f.csv")
    assert path.read_text().splitlines()[0] == "x1,x2,x3,re,im"
    back = read_field_csv(path)
    assert np.array_equal(back.values, f.values)
