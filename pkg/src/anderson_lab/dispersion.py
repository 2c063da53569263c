"""Lattice dispersion relation, group velocity and critical-point geometry.

``e(p) = sum_j (1 - cos 2 pi p_j)`` on the torus ``[-1/2, 1/2)^d``. The gradient
is stored as ``grad e = 2 pi sin(2 pi p)``; the kinetic velocity that drives the
Boltzmann transport is ``sin(2 pi p) = grad e / (2 pi)`` and has its own accessor
so the two are never confused.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .lattice import torus_distance

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class DispersionValue:
    energy: np.ndarray | float
    gradient: np.ndarray


def energy(p) -> np.ndarray:
    """``e(p)``; the last axis of ``p`` holds the coordinates."""
    p = np.asarray(p, dtype=float)
    return np.sum(1.0 - np.cos(TWO_PI * p), axis=-1)


def gradient(p) -> np.ndarray:
    return TWO_PI * np.sin(TWO_PI * np.asarray(p, dtype=float))


def velocity(p) -> np.ndarray:
    """Boltzmann transport velocity ``sin(2 pi p) = grad e / 2 pi``."""
    return np.sin(TWO_PI * np.asarray(p, dtype=float))


def dispersion(p) -> DispersionValue:
    e = energy(p)
    return DispersionValue(float(e) if np.ndim(e) == 0 else e, gradient(p))


def critical_points(d: int = 3) -> np.ndarray:
    """The ``2**d`` momenta with every component in ``{0, 1/2}``."""
    return np.array(list(itertools.product((0.0, 0.5), repeat=d)))


def critical_values(d: int = 3) -> tuple[list[float], float]:
    """Critical energies ``0, 2, ..., 2d`` and the special flat value ``d``.

    The flat value is returned separately; for odd ``d`` it is not critical.
    """
    if d < 3:
        raise ValueError("critical-value geometry is only set up for d >= 3")
    return [2.0 * m for m in range(d + 1)], float(d)


def energy_triple_norm(alpha, d: int = 3):
    """Distance of ``alpha`` to the critical energies plus the flat value ``d``."""
    crit, special = critical_values(d)
    marks = np.array(sorted(set(crit) | {special}))
    a = np.asarray(alpha, dtype=float)
    out = np.min(np.abs(a[..., None] - marks), axis=-1)
    return float(out) if out.ndim == 0 else out


def momentum_triple_norm(p, eta: float = 0.0):
    """``eta`` plus the torus distance from ``p`` to the nearest critical momentum."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    p = np.asarray(p, dtype=float)
    crit = critical_points(p.shape[-1])
    dist = torus_distance(p[..., None, :], crit)
    out = eta + np.min(dist, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def distance_to_extremal_points(p):
    """Distance to the origin or the vertices ``(+-1/2, ..., +-1/2)``; the ``D(p)`` of the Im omega bound."""
    p = np.asarray(p, dtype=float)
    d = p.shape[-1]
    anchors = np.array([np.zeros(d), np.full(d, 0.5)])
    out = np.min(torus_distance(p[..., None, :], anchors), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def shell_min_gradient_sq(s: float, d: int = 3) -> float:
    """Minimum of ``sum_j sin^2(2 pi p_j)`` over the level set ``e(p) = s``.

    With ``c_j = cos(2 pi p_j)`` the constraint is ``sum c_j = d - s``; maximising
    ``sum c_j^2`` over the box ``[-1, 1]^d`` is attained at a vertex with at most
    one free coordinate, which gives the closed form below. Returns 0 on
    critical shells and ``nan`` outside ``[0, 2d]``.
    """
    if s < 0 or s > 2 * d:
        return float("nan")
    target = d - s
    best = None
    for signs in itertools.product((-1.0, 1.0), repeat=d - 1):
        c_free = target - sum(signs)
        if abs(c_free) <= 1.0:
            val = 1.0 - c_free**2
            best = val if best is None else min(best, val)
    return float(best)
