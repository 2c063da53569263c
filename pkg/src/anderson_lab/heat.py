"""Per-shell heat-equation solution and its pairing with phase-space observables.

On each energy shell the limit density solves ``dT f = sum_ij D_ij(e) dXi dXj f``
with ``f(0, X, e) = g(e) delta(X)``. In the Fourier convention
``f_hat(xi) = int exp(-2 pi i xi.X) f(X) dX`` the solution is

    f_hat(T, xi, e) = g(e) exp(-(2 pi)^2 T xi.D(e) xi),

so ``f(T, ., e)`` is ``g(e)`` times the centred Gaussian with covariance
``2 T D(e)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagrams.ladder import MomentumProfile
from .rng import stream
from .schrodinger import smooth_band_profile
from .spectral import SpectralTables, diffusion_scalar_surface, surface_proposal
from .wigner import Observable


@dataclass(frozen=True)
class HeatSolution:
    T: float
    e: float
    g: float
    D: np.ndarray = field(repr=False)

    @property
    def covariance(self) -> np.ndarray:
        return 2 * self.T * np.asarray(self.D)

    def fourier(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        q = np.einsum("...i,ij,...j->...", xi, np.asarray(self.D), xi)
        return self.g * np.exp(-4 * np.pi**2 * self.T * q)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.T == 0:
            raise ValueError("at T = 0 the solution is a point mass")
        S = self.covariance
        q = np.einsum("...i,ij,...j->...", X, np.linalg.inv(S), X)
        return self.g * np.exp(-0.5 * q) / np.sqrt((2 * np.pi) ** 3 * np.linalg.det(S))

    def mass(self) -> float:
        return self.g


@dataclass
class HeatFamily:
    """Heat solutions on a set of energy bins of width ``de``."""

    T: float
    de: float
    bins: list[HeatSolution]
    diffusion_stderr: list[float] = field(default_factory=list)

    @property
    def energies(self) -> np.ndarray:
        return np.array([b.e for b in self.bins])

    def total_mass(self) -> float:
        return float(sum(b.g for b in self.bins) * self.de)

    def at_time(self, T: float) -> "HeatFamily":
        return HeatFamily(T, self.de, [HeatSolution(T, b.e, b.g, b.D) for b in self.bins],
                          list(self.diffusion_stderr))


def initial_shell_mass(profile: MomentumProfile, energies, tables: SpectralTables,
                       n_per: int = 50_000, seed: int = 0) -> np.ndarray:
    """``g(e) = [|psi_hat_0|^2](e)``: closed form for energy-only profiles, surface sampler otherwise."""
    e = np.asarray(energies, dtype=float)
    if profile.tilt == 0:
        a = smooth_band_profile(e, profile.lo, profile.hi, profile.ramp)
        return a**2 * tables.phi_at(e) / profile.norm**2
    out = np.empty(len(e))
    for i, s in enumerate(e):
        rng = stream(seed, "shell_mass", i)
        v, w = surface_proposal(np.full(n_per, s), rng)
        out[i] = np.mean(w * np.abs(profile(v)) ** 2)
    return out


def heat_solution(profile: MomentumProfile, tables: SpectralTables, T: float, de: float = 0.05,
                  n_diffusion: int = 100_000, seed: int = 0) -> HeatFamily:
    """Heat solutions on the bins covering the profile's energy support; empty bins are skipped."""
    lo, hi = profile.support
    nb = max(1, int(np.ceil((hi - lo) / de - 1e-9)))
    step = (hi - lo) / nb
    centres = lo + step * (np.arange(nb) + 0.5)
    g = initial_shell_mass(profile, centres, tables, seed=seed)
    bins, errs = [], []
    for e, gi in zip(centres, g):
        if gi <= 0:
            continue
        D, err = diffusion_scalar_surface(float(e), n_diffusion, seed)
        bins.append(HeatSolution(T, float(e), float(gi), D * np.eye(3)))
        errs.append(err)
    return HeatFamily(T, step, bins, errs)


def gaussian_overlap(obs: Observable, cov) -> float:
    """``int G(X) N(X; 0, cov) dX`` for the peak-one Gaussian ``G`` of ``obs``."""
    if obs.cov is None:
        return 1.0
    S = np.asarray(obs.cov, dtype=float)
    C = S + np.asarray(cov, dtype=float)
    c = np.asarray(obs.center, dtype=float)
    return float(np.sqrt(np.linalg.det(S) / np.linalg.det(C)) * np.exp(-0.5 * c @ np.linalg.solve(C, c)))


def shell_average(obs: Observable, e: float, n: int = 50_000, seed: int = 0) -> complex:
    """``<H>_e``, the normalized shell average of the momentum part of ``obs``."""
    if all(tuple(m) == (0, 0, 0) for m, _ in obs.harmonics):
        return complex(sum(c for _, c in obs.harmonics))
    rng = stream(seed, "shell_average", int(round(e * 1e6)))
    v, w = surface_proposal(np.full(n, e), rng)
    return complex(np.sum(w * obs.v_part(v)) / np.sum(w))


def pair_heat_with_observable(family: HeatFamily, obs: Observable, n_shell: int = 50_000,
                              seed: int = 0) -> complex:
    """``sum_e g(e) de <O(X, .)>_e`` integrated against the shell's heat Gaussian."""
    total = 0j
    for b in family.bins:
        if family.T == 0:
            spatial = float(obs.x_part(np.zeros(3)))
        else:
            spatial = gaussian_overlap(obs, b.covariance)
        total += b.g * family.de * shell_average(obs, b.e, n_shell, seed) * spatial
    return complex(total)
