"""Ladder diagram values by Monte Carlo over energies and shell momenta.

The alpha and beta contour integrals factor into ``K * conj(K)`` and are
done by residues. Because ``exp(2 t eta) |K|^2`` does not depend on
``eta`` the estimators evaluate the kernels at ``eta = 0`` directly.

Sampling: the first momentum ``v_1`` sits on a shell drawn uniformly from
the energy support of the initial profile; each later momentum sits on a
shell drawn from a Cauchy mixture centred on the previous energy and on
``e(v_1)``, with the width of the renormalized resonance
``max(lam^2 pi Phi, 1/t)``, plus a uniform floor. Shell points come from
the surface sampler, whose weights turn torus integrals into shell sums.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .. import dispersion as disp
from ..lattice import ComplexField, LatticeGrid, fourier_inverse
from ..rng import stream
from ..schrodinger import smooth_band_profile
from ..spectral import SpectralTables, surface_proposal
from ..wigner import Observable
from .residues import exp_divided_difference

TWO_PI = 2 * np.pi
EMAX = 6.0


class LadderError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentScale:
    """Weak-coupling scaling. Derived quantities are always recomputed from the inputs."""

    lam: float
    T: float
    kappa: float = 1.0 / 12
    delta: float = 1.0
    eta_override: float | None = None

    def __post_init__(self):
        if not (0 < self.lam < 1):
            raise ValueError("lam must lie in (0, 1)")
        if self.T < 0 or self.kappa <= 0 or self.delta <= 0:
            raise ValueError("T >= 0, kappa > 0 and delta > 0 are required")
        if self.eta_override is not None:
            lo, hi = self.lam ** (2 + 4 * self.kappa), self.lam ** (2 + self.kappa)
            if not (lo * (1 - 1e-12) <= self.eta_override <= hi * (1 + 1e-12)):
                raise ValueError(f"eta override must lie in [{lo:.3g}, {hi:.3g}]")

    @property
    def eps(self) -> float:
        return self.lam ** (2 + self.kappa / 2)

    @property
    def eta(self) -> float:
        if self.eta_override is not None:
            return self.eta_override
        return self.lam ** (2 + self.kappa)

    @property
    def t(self) -> float:
        return self.lam ** (-2 - self.kappa) * self.T

    @property
    def K(self) -> int:
        return int(np.floor(self.lam ** (-self.delta) * self.lam**2 * self.t))

    def as_dict(self) -> dict:
        return {"lam": self.lam, "T": self.T, "kappa": self.kappa, "delta": self.delta,
                "eps": self.eps, "eta": self.eta, "t": self.t, "K": self.K}


@dataclass(frozen=True)
class MomentumProfile:
    """``psi_hat_0(p) = a(e(p)) (1 + tilt sin 2 pi p_1) exp(-2 pi i p.center) / norm``.

    ``a`` is the smooth band bump on ``[lo, hi]`` with ramps of width ``ramp``.
    A nonzero ``tilt`` gives the state a net drift along the first axis.
    """

    lo: float = 2.5
    hi: float = 3.5
    ramp: float = 0.25
    tilt: float = 0.0
    center: tuple = (0.0, 0.0, 0.0)
    norm_grid: int = 64

    @property
    def support(self) -> tuple[float, float]:
        return max(self.lo - self.ramp, 0.0), min(self.hi + self.ramp, EMAX)

    def _raw(self, p):
        p = np.asarray(p, dtype=float)
        a = smooth_band_profile(disp.energy(p), self.lo, self.hi, self.ramp)
        if self.tilt:
            a = a * (1 + self.tilt * np.sin(TWO_PI * p[..., 0]))
        phase = np.exp(-2j * np.pi * (p @ np.asarray(self.center, dtype=float)))
        return a * phase

    @property
    def norm(self) -> float:
        # periodic trapezoid rule; spectrally accurate for the smooth bump
        n = self.norm_grid
        ax = (np.arange(n) + 0.5) / n - 0.5
        P = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
        return float(np.sqrt(np.mean(np.abs(self._raw(P)) ** 2)))

    def __call__(self, p):
        return self._raw(p) / self.norm

    def on_grid(self, grid: LatticeGrid) -> ComplexField:
        """The position-space box state with these momentum amplitudes."""
        return fourier_inverse(ComplexField(grid, self._raw(grid.momenta()) / self.norm, "momentum"))


class LadderEstimate(NamedTuple):
    value: complex
    stderr: float

    @property
    def flagged(self) -> bool:
        """``True`` when the relative standard error exceeds 50%."""
        return bool(self.stderr > 0.5 * abs(self.value))


def _cauchy_pdf(x, center, scale, lo, hi):
    Flo = np.arctan((lo - center) / scale)
    Fhi = np.arctan((hi - center) / scale)
    return scale / ((x - center) ** 2 + scale**2) / (Fhi - Flo)


def _cauchy_mixture(rng, centers, scales, lo, hi, frac_uniform):
    """Equal mixture of truncated Cauchy laws (one per centre) plus a uniform floor."""
    n = len(centers[0])
    pick = rng.integers(0, len(centers), n)
    c = np.choose(pick, centers)
    g = np.choose(pick, scales)
    Flo = np.arctan((lo - c) / g)
    Fhi = np.arctan((hi - c) / g)
    x = c + g * np.tan(Flo + rng.random(n) * (Fhi - Flo))
    uni = rng.random(n) < frac_uniform
    x = np.clip(np.where(uni, lo + (hi - lo) * rng.random(n), x), lo, hi)
    pdf = sum(_cauchy_pdf(x, ci, gi, lo, hi) for ci, gi in zip(centers, scales))
    pdf = (1 - frac_uniform) * pdf / len(centers) + frac_uniform / (hi - lo)
    return x, pdf


def _next_energy(rng, prev, e1, scale, tables, frac_uniform):
    # one component follows the chain, one stays on the initial shell
    centers = (prev, e1)
    scales = tuple(_resonance_width(c, scale, tables) for c in centers)
    return _cauchy_mixture(rng, centers, scales, 0.0, EMAX, frac_uniform)


def _resonance_width(e, scale: ExperimentScale, tables: SpectralTables):
    return np.maximum(scale.lam**2 * np.pi * tables.phi_at(e), 1.0 / scale.t)


def _node(e, scale, tables):
    return np.conj(tables.omega_of_energy(e, scale.lam))


def _stderr(vals) -> float:
    return float(np.std(vals, ddof=1) / np.sqrt(len(vals)))


def free_decay_value(scale: ExperimentScale, profile: MomentumProfile, tables: SpectralTables) -> float:
    """``int |psi_hat_0(p)|^2 exp(-2 t lam^2 I(e(p))) dp`` on the periodic trapezoid grid."""
    n = profile.norm_grid
    ax = (np.arange(n) + 0.5) / n - 0.5
    P = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
    dens = np.abs(profile(P)) ** 2
    decay = np.exp(2 * scale.t * scale.lam**2 * tables.theta_fast(disp.energy(P)).imag)
    return float(np.mean(dens * decay))


def ladder_value(k: int, scale: ExperimentScale, profile: MomentumProfile, tables: SpectralTables,
                 n: int = 100_000, seed: int = 0, frac_uniform: float = 0.2,
                 batch: int = 50_000) -> LadderEstimate:
    """``V(t, k) = lam^(2k) int |psi_hat_0(p_1)|^2 prod dp_j exp(2 t eta) |K(t, p)|^2``.

    The integrand depends on ``p_2..p_{k+1}`` only through their energies, so
    those integrals run over energies with ``Phi`` weights.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return LadderEstimate(free_decay_value(scale, profile, tables), 0.0)
    lo, hi = profile.support
    vals = []
    for b, start in enumerate(range(0, n, batch)):
        m = min(batch, n - start)
        rng = stream(seed, "ladder", b)
        e1 = lo + (hi - lo) * rng.random(m)
        v1, w1 = surface_proposal(e1, rng)
        weight = (hi - lo) * w1 * np.abs(profile(v1)) ** 2
        nodes = [_node(e1, scale, tables)]
        s = e1
        for _ in range(k):
            s, q = _next_energy(rng, s, e1, scale, tables, frac_uniform)
            weight = weight * tables.phi_at(s) / q
            nodes.append(_node(s, scale, tables))
        dd = exp_divided_difference(np.stack(nodes, axis=-1), scale.t)
        vals.append(scale.lam ** (2 * k) * weight * np.abs(dd) ** 2)
    vals = np.concatenate(vals)
    return LadderEstimate(float(vals.mean()), _stderr(vals))


def _xi_samples(obs: Observable, scale: ExperimentScale, rng, m: int):
    """``xi`` drawn from ``|G_hat|``; returns the samples and ``G_hat / |G_hat|`` restricted to ``|xi| <= lam^-delta``."""
    if obs.cov is None:
        return np.zeros((m, 3)), np.ones(m, dtype=complex)
    xi = obs.sample_xi(rng, m)
    phase = np.exp(-2j * np.pi * (xi @ np.asarray(obs.center)))
    keep = np.linalg.norm(xi, axis=-1) <= scale.lam ** (-scale.delta)
    return xi, np.where(keep, phase, 0.0)


def ladder_observable_value(k: int, scale: ExperimentScale, profile: MomentumProfile,
                            obs: Observable, tables: SpectralTables, n: int = 100_000,
                            seed: int = 0, frac_uniform: float = 0.2,
                            batch: int = 50_000) -> LadderEstimate:
    """``W(t, k, O)``: the ladder pairing of the rescaled Wigner function with ``O``.

    ``k = 0`` uses the free formula ``int d xi dv O_hat conj(W_hat) exp(i t eps xi.grad e(v))
    exp(2 t lam^2 Im theta(v))``. For ``k >= 1`` the kernels at ``v_j + eps xi / 2`` and
    ``v_j - eps xi / 2`` pair the two sides; ``O_hat`` takes the last momentum.
    A constant observable reduces to :func:`ladder_value`.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    lo, hi = profile.support
    t, eps = scale.t, scale.eps
    vals = []
    for b, start in enumerate(range(0, n, batch)):
        m = min(batch, n - start)
        rng = stream(seed, "ladder_obs", b)
        xi, phase = _xi_samples(obs, scale, rng, m)
        half = 0.5 * eps * xi
        e1 = lo + (hi - lo) * rng.random(m)
        v1, w1 = surface_proposal(e1, rng)
        init = profile(v1 - half) * np.conj(profile(v1 + half))
        weight = phase * (hi - lo) * w1 * init
        if k == 0:
            drift = t * TWO_PI * np.sum((eps * xi) * np.sin(TWO_PI * v1), axis=-1)
            decay = np.exp(2 * t * scale.lam**2 * tables.theta_fast(e1).imag)
            vals.append(weight * obs.v_part(v1) * np.exp(1j * drift) * decay)
            continue
        plus = [_node(disp.energy(v1 + half), scale, tables)]
        minus = [_node(disp.energy(v1 - half), scale, tables)]
        v, s = v1, e1
        for _ in range(k):
            s, q = _next_energy(rng, s, e1, scale, tables, frac_uniform)
            v, w = surface_proposal(s, rng)
            weight = weight * w / q
            plus.append(_node(disp.energy(v + half), scale, tables))
            minus.append(_node(disp.energy(v - half), scale, tables))
        dp = exp_divided_difference(np.stack(plus, axis=-1), t)
        dm = exp_divided_difference(np.stack(minus, axis=-1), t)
        vals.append(scale.lam ** (2 * k) * weight * obs.v_part(v) * dp * np.conj(dm))
    vals = np.concatenate(vals)
    err = float(np.hypot(np.std(vals.real, ddof=1), np.std(vals.imag, ddof=1)) / np.sqrt(len(vals)))
    return LadderEstimate(complex(vals.mean()), err)


def ladder_sum(scale: ExperimentScale, profile: MomentumProfile, tables: SpectralTables,
               obs: Observable | None = None, n: int = 100_000, seed: int = 0,
               k_max: int | None = None) -> list[LadderEstimate]:
    """Ladder terms ``k = 0 .. K-1`` (or ``k_max``); the same seed is shared across ``k`` and ``lam``."""
    kk = scale.K if k_max is None else k_max
    out = []
    for k in range(max(kk, 1)):
        if obs is None:
            out.append(ladder_value(k, scale, profile, tables, n, seed))
        else:
            out.append(ladder_observable_value(k, scale, profile, obs, tables, n, seed))
    return out


def sum_estimates(terms) -> LadderEstimate:
    return LadderEstimate(sum(e.value for e in terms), float(np.sqrt(sum(e.stderr**2 for e in terms))))


def write_ladder_csv(terms, scale: ExperimentScale, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "V", "stderr", "lambda", "T", "eta"])
        for k, est in enumerate(terms):
            w.writerow([k, repr(float(np.real(est.value))), repr(est.stderr), repr(scale.lam),
                        repr(scale.T), repr(scale.eta)])
    return path
