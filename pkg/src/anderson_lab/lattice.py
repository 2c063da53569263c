"""Lattice and torus geometry with the Fourier conventions used everywhere.

Conventions
-----------
Positions live on ``(delta * Z)^d`` restricted to a periodic box of ``L`` sites
per axis; the position integral is ``delta**d`` times the counting sum.
Momenta live on the torus ``[-1/2, 1/2)^d / delta`` with Lebesgue measure.

    f_hat(p) = delta**d * sum_x exp(-2 pi i p.x) f(x)
    f(x)     = int dp exp(2 pi i p.x) f_hat(p)

On the box this is ``delta**d * fftn`` and ``delta**-d * ifftn``. Arrays are
stored in row-major order indexed ``(x1, x2, x3)``; in the momentum
representation the index order is numpy's FFT order (``k = 0, 1, ..., -1``),
so grid momentum ``k / (delta * L)`` with ``k`` in ``[-L/2, L/2)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

POSITION = "position"
MOMENTUM = "momentum"


class RepresentationError(ValueError):
    """Raised when a field is handed to a transform in the wrong representation."""


def wrap(p):
    """Canonical torus representative in ``[-1/2, 1/2)`` componentwise."""
    p = np.asarray(p, dtype=float)
    return p - np.floor(p + 0.5)


def torus_add(p, q):
    return wrap(np.asarray(p) + np.asarray(q))


def torus_sub(p, q):
    return wrap(np.asarray(p) - np.asarray(q))


def torus_distance(p, q) -> np.ndarray | float:
    """Euclidean distance on the unit torus with componentwise wrap.

    Broadcasts over leading axes; the last axis holds the coordinates.
    """
    diff = wrap(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    out = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LatticeGrid:
    """Periodic box of ``L**d`` sites with spacing ``delta``."""

    L: int
    delta: float = 1.0
    d: int = 3

    def __post_init__(self):
        if self.L <= 0 or self.L % 2:
            raise ValueError(f"L must be a positive even integer, got {self.L}")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.d < 1:
            raise ValueError("d must be >= 1")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.d

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    @property
    def position_weight(self) -> float:
        """Measure of one lattice site, ``delta**d``."""
        return self.delta**self.d

    @property
    def momentum_weight(self) -> float:
        """Measure of one momentum grid cell; the grid sums to ``delta**-d``."""
        return 1.0 / (self.delta * self.L) ** self.d

    def axis_positions(self) -> np.ndarray:
        """Site coordinates along one axis, centred: ``delta * [0, ..., L/2-1, -L/2, ..., -1]``."""
        n = np.arange(self.L)
        return self.delta * np.where(n < self.L // 2, n, n - self.L)

    def axis_momenta(self) -> np.ndarray:
        """Grid momenta along one axis in FFT order."""
        return np.fft.fftfreq(self.L, d=self.delta)

    def positions(self) -> np.ndarray:
        """Array of shape ``shape + (d,)`` with centred site coordinates."""
        ax = self.axis_positions()
        return np.stack(np.meshgrid(*([ax] * self.d), indexing="ij"), axis=-1)

    def momenta(self) -> np.ndarray:
        ax = self.axis_momenta()
        return np.stack(np.meshgrid(*([ax] * self.d), indexing="ij"), axis=-1)

    def refined(self) -> "LatticeGrid":
        """Half-spacing grid of side ``2L`` covering the same box."""
        return LatticeGrid(2 * self.L, self.delta / 2, self.d)


@dataclass(frozen=True)
class ComplexField:
    grid: LatticeGrid
    values: np.ndarray = field(repr=False)
    representation: str = POSITION

    def __post_init__(self):
        if self.representation not in (POSITION, MOMENTUM):
            raise RepresentationError(f"unknown representation {self.representation!r}")
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def norm2(self) -> float:
        """Squared L2 norm in the measure of the current representation."""
        w = (self.grid.position_weight if self.representation == POSITION
             else self.grid.momentum_weight)
        return float(w * np.sum(np.abs(self.values) ** 2))

    def with_values(self, values) -> "ComplexField":
        return ComplexField(self.grid, values, self.representation)


def fourier_forward(f: ComplexField, workers: int | None = None) -> ComplexField:
    if f.representation != POSITION:
        raise RepresentationError("fourier_forward expects a position-space field")
    vals = f.grid.position_weight * sfft.fftn(f.values, workers=workers)
    return ComplexField(f.grid, vals, MOMENTUM)


def fourier_inverse(f: ComplexField, workers: int | None = None) -> ComplexField:
    if f.representation != MOMENTUM:
        raise RepresentationError("fourier_inverse expects a momentum-space field")
    vals = sfft.ifftn(f.values, workers=workers) / f.grid.position_weight
    return ComplexField(f.grid, vals, POSITION)


def momentum_quadrature(grid: LatticeGrid, values) -> complex:
    """Grid quadrature of a momentum-space function over ``(T/delta)^d``."""
    return grid.momentum_weight * np.sum(values)


def position_integral(grid: LatticeGrid, values) -> complex:
    return grid.position_weight * np.sum(values)


def write_field_csv(f: ComplexField, path) -> Path:
    """Dump a position-space field as ``x1,x2,x3,re,im`` rows (site units)."""
    if f.representation != POSITION:
        f = fourier_inverse(f)
    path = Path(path)
    n = np.arange(f.grid.L)
    centred = np.where(n < f.grid.L // 2, n, n - f.grid.L)
    idx = np.stack(np.meshgrid(*([centred] * f.grid.d), indexing="ij"), axis=-1).reshape(-1, f.grid.d)
    vals = f.values.reshape(-1)
    header = [f"x{j + 1}" for j in range(f.grid.d)] + ["re", "im"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for site, v in zip(idx, vals):
            w.writerow([*map(int, site), repr(float(v.real)), repr(float(v.imag))])
    return path


def read_field_csv(path, delta: float = 1.0) -> ComplexField:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = rows.shape[1] - 2
    L = round(len(rows) ** (1.0 / d))
    grid = LatticeGrid(L, delta, d)
    vals = np.zeros(grid.shape, dtype=complex)
    sites = rows[:, :d].astype(int) % L
    vals[tuple(sites.T)] = rows[:, d] + 1j * rows[:, d + 1]
    return ComplexField(grid, vals, POSITION)
