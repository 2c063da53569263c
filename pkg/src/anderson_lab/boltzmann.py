"""Linear Boltzmann dynamics on a fixed energy shell.

Two realizations of the same kinetic equation:

* a momentum-jump Monte Carlo: particles fly with velocity ``sin(2 pi V)``,
  jump at rate ``2 pi Phi(a)`` and redraw ``V`` from the shell measure;
* a deterministic histogram solver for the ``X1``-marginal of the phase-space
  density with spectral transport and energy-binned relaxation.

Times and positions here are kinetic (macroscopic) units.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import dispersion as disp
from .rng import stream
from .spectral import SpectralTables, shell_sample_exact

TWO_PI = 2.0 * np.pi


class BoltzmannError(RuntimeError):
    pass


@dataclass
class TrajectorySet:
    """Ragged jump logs for ``N`` particles started at ``X = 0``.

    Particle ``i`` owns rows ``offsets[i]:offsets[i+1]`` of ``times`` (segment
    start times, the first being 0), ``momenta`` (momentum on that segment)
    and ``starts`` (position at the segment start).
    """

    a: float
    rate: float
    T_max: float
    seed: int
    offsets: np.ndarray
    times: np.ndarray
    momenta: np.ndarray
    starts: np.ndarray = field(repr=False)

    @property
    def n_particles(self) -> int:
        return len(self.offsets) - 1

    @property
    def njumps(self) -> np.ndarray:
        return np.diff(self.offsets) - 1

    def _segment(self, T: float) -> np.ndarray:
        if T < 0 or T > self.T_max * (1 + 1e-12):
            raise BoltzmannError(f"time {T} outside [0, {self.T_max}]")
        lo, hi = self.offsets[:-1], self.offsets[1:]
        # index of the last segment starting at or before T, per particle
        key = self.times + self.T_max * 4.0 * np.repeat(np.arange(self.n_particles), np.diff(self.offsets))
        q = T + self.T_max * 4.0 * np.arange(self.n_particles)
        idx = np.searchsorted(key, q, side="right") - 1
        return np.clip(idx, lo, hi - 1)

    def momenta_at(self, T: float) -> np.ndarray:
        return self.momenta[self._segment(T)]

    def positions_at(self, T: float) -> np.ndarray:
        s = self._segment(T)
        return self.starts[s] + disp.velocity(self.momenta[s]) * (T - self.times[s])[:, None]

    def jump_counts_at(self, T: float) -> np.ndarray:
        return self._segment(T) - self.offsets[:-1]

    def energy_drift(self) -> float:
        return float(np.max(np.abs(disp.energy(self.momenta) - self.a)))

    def write_summary_csv(self, path, T: float | None = None) -> Path:
        T = self.T_max if T is None else T
        X = self.positions_at(T)
        nj = self.jump_counts_at(T)
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["particle", "T", "X1", "X2", "X3", "njumps"])
            for i in range(self.n_particles):
                w.writerow([i, repr(float(T)), *(repr(float(c)) for c in X[i]), int(nj[i])])
        return path


def simulate_jump_process(a: float, n: int, T_max: float, seed: int = 0,
                          tables: SpectralTables | None = None, rate: float | None = None,
                          block: int = 8192, initial_momenta=None) -> TrajectorySet:
    """Simulate ``n`` independent jump trajectories on the shell ``e = a``.

    Particles are processed in fixed blocks, each with its own stream
    ``("jump", block_index)``, so the result does not depend on how blocks
    are scheduled. ``initial_momenta`` (shape ``(n, 3)``) replaces the
    uniform shell draw for the first segment only.
    """
    if rate is None:
        if tables is None:
            raise BoltzmannError("need spectral tables or an explicit jump rate")
        phi = float(tables.phi_at(a))
        if not phi > 0:
            raise BoltzmannError(f"Phi({a}) = {phi} is not positive")
        rate = TWO_PI * phi
    if rate <= 0:
        raise BoltzmannError("jump rate must be positive")
    d = 3
    pieces = []
    for b, start in enumerate(range(0, n, block)):
        m = min(block, n - start)
        rng = stream(seed, "jump", b)
        t = np.zeros(m)
        first = (shell_sample_exact(a, m, rng, d) if initial_momenta is None
                 else np.asarray(initial_momenta, dtype=float)[start:start + m])
        rows_p, rows_t, rows_v = [np.arange(m)], [t.copy()], [first]
        alive = np.arange(m)
        while alive.size:
            t_next = t[alive] + rng.exponential(1.0 / rate, alive.size)
            keep = t_next <= T_max
            alive, t_next = alive[keep], t_next[keep]
            if not alive.size:
                break
            t[alive] = t_next
            rows_p.append(alive)
            rows_t.append(t_next)
            rows_v.append(shell_sample_exact(a, alive.size, rng, d))
        p = np.concatenate(rows_p) + start
        tt = np.concatenate(rows_t)
        vv = np.concatenate(rows_v)
        order = np.lexsort((tt, p))
        pieces.append((p[order], tt[order], vv[order]))
    pid = np.concatenate([x[0] for x in pieces])
    times = np.concatenate([x[1] for x in pieces])
    moms = np.concatenate([x[2] for x in pieces])
    counts = np.bincount(pid, minlength=n)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    # positions at segment starts
    dur = np.empty_like(times)
    dur[:-1] = times[1:] - times[:-1]
    last = offsets[1:] - 1
    dur[last] = 0.0
    step = disp.velocity(moms) * dur[:, None]
    cum = np.cumsum(step, axis=0)
    base = np.repeat(cum[offsets[:-1]] - step[offsets[:-1]], counts, axis=0)
    starts = cum - step - base
    return TrajectorySet(float(a), float(rate), float(T_max), int(seed), offsets, times, moms, starts)


# --------------------------------------------------------------------------
# estimators


@dataclass
class Autocorrelation:
    lags: np.ndarray
    C: np.ndarray
    stderr: np.ndarray

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lag"] + [f"C{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)] + ["stderr"])
            for lag, c, s in zip(self.lags, self.C, self.stderr):
                w.writerow([repr(float(lag)), *(repr(float(x)) for x in c.reshape(-1)), repr(float(s))])
        return path


def velocity_autocorrelation(traj: TrajectorySet, lags) -> Autocorrelation:
    """``<sin(2 pi v_i(t)) sin(2 pi v_j(0))>`` over particles; ``stderr`` is for the diagonal mean."""
    lags = np.asarray(lags, dtype=float)
    if np.any(lags > traj.T_max * (1 + 1e-12)) or np.any(lags < 0):
        raise BoltzmannError("autocorrelation lag outside the simulated window")
    s0 = disp.velocity(traj.momenta[traj.offsets[:-1]])
    n = traj.n_particles
    Cs, errs = [], []
    for lag in lags:
        st = disp.velocity(traj.momenta_at(float(lag)))
        prod = st[:, :, None] * s0[:, None, :]
        Cs.append(prod.mean(axis=0))
        diag = np.einsum("nii->n", prod) / 3
        errs.append(diag.std(ddof=1) / np.sqrt(n))
    return Autocorrelation(lags, np.array(Cs), np.array(errs))


def fit_decay_rate(ac: Autocorrelation, min_snr: float = 5.0) -> tuple[float, float]:
    """Weighted log-linear fit of the diagonal autocorrelation; returns rate and stderr."""
    y = np.trace(ac.C, axis1=1, axis2=2) / 3
    ok = y > min_snr * ac.stderr
    if ok.sum() < 3:
        raise BoltzmannError("too few resolved lags to fit the decay")
    x, ly, w = ac.lags[ok], np.log(y[ok]), y[ok] / ac.stderr[ok]
    coef, cov = np.polyfit(x, ly, 1, w=w, cov="unscaled")
    return float(-coef[0]), float(np.sqrt(cov[0, 0]))


def integrate_autocorrelation(ac: Autocorrelation, tail_rate: float | None = None) -> np.ndarray:
    """Trapezoid integral over the lags with an exponential tail completion."""
    if tail_rate is None:
        tail_rate, _ = fit_decay_rate(ac)
    body = np.trapezoid(ac.C, ac.lags, axis=0)
    return body + ac.C[-1] / tail_rate


@dataclass
class MSDResult:
    times: np.ndarray
    msd: np.ndarray
    stderr: np.ndarray

    def diffusion_ratio(self, d: int = 3) -> tuple[np.ndarray, np.ndarray]:
        """``MSD / (2 d T)`` with its standard error."""
        return self.msd / (2 * d * self.times), self.stderr / (2 * d * self.times)


def mean_square_displacement(traj: TrajectorySet, times) -> MSDResult:
    times = np.asarray(times, dtype=float)
    m, s = [], []
    for T in times:
        r2 = np.sum(traj.positions_at(float(T)) ** 2, axis=1)
        m.append(r2.mean())
        s.append(r2.std(ddof=1) / np.sqrt(len(r2)))
    return MSDResult(times, np.array(m), np.array(s))


def diffusion_from_msd(traj: TrajectorySet, start_free_times: float = 10.0, npts: int = 20,
                       d: int = 3) -> tuple[float, float]:
    """Slope fit of MSD against time from ``start_free_times`` mean free times on.

    The slope is ``2 d D`` exactly for the jump process once the ballistic
    transient is over; the returned error is from the fit residuals.
    """
    t0 = start_free_times / traj.rate
    if t0 >= traj.T_max:
        raise BoltzmannError("trajectories are too short for the fit window")
    ts = np.linspace(t0, traj.T_max, npts)
    res = mean_square_displacement(traj, ts)
    coef, cov = np.polyfit(ts, res.msd, 1, w=1 / res.stderr, cov=True)
    return float(coef[0] / (2 * d)), float(np.sqrt(cov[0, 0]) / (2 * d))


def excess_kurtosis(x) -> tuple[np.ndarray, np.ndarray]:
    """Per-column excess kurtosis with its large-sample standard error ``sqrt(24/n)``."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean(axis=0)
    k = np.mean(x**4, axis=0) / np.mean(x**2, axis=0) ** 2 - 3.0
    return k, np.full_like(k, np.sqrt(24.0 / len(x)))


# --------------------------------------------------------------------------
# histogram solver on the X1 marginal


@dataclass
class PhaseSpaceGrid:
    """Periodic ``X1`` grid of length ``length`` times a uniform ``nv**3`` momentum grid."""

    nx: int
    length: float
    nv: int
    energy_bin: float = 0.1

    def __post_init__(self):
        v = (np.arange(self.nv) + 0.5) / self.nv - 0.5
        V = np.stack(np.meshgrid(v, v, v, indexing="ij"), axis=-1).reshape(-1, 3)
        self.momenta = V
        self.energies = disp.energy(V)
        self.bins = np.minimum((self.energies / self.energy_bin).astype(int), int(round(6 / self.energy_bin)) - 1)
        nb = int(self.bins.max()) + 1
        self.bin_counts = np.bincount(self.bins, minlength=nb)
        cell = 1.0 / self.nv**3
        # density of states seen by the grid, consistent with the redistribution
        self.phi_bins = self.bin_counts * cell / self.energy_bin
        self.x = (np.arange(self.nx) - self.nx // 2) * self.length / self.nx
        self.dx = self.length / self.nx
        self.cell = cell

    def rates(self) -> np.ndarray:
        return TWO_PI * self.phi_bins[self.bins]


def bin_means(F: np.ndarray, grid: PhaseSpaceGrid) -> np.ndarray:
    """Per-X average of ``F`` over each energy bin of the momentum grid, broadcast back."""
    nb = len(grid.bin_counts)
    sums = np.stack([np.bincount(grid.bins, weights=row, minlength=nb) for row in F])
    cnt = np.maximum(grid.bin_counts, 1)
    return (sums / cnt)[:, grid.bins]


def evolve_phase_space_density(F0: np.ndarray, grid: PhaseSpaceGrid, T: float, dt: float,
                               collisions: bool = True, record_every: int = 0):
    """Lie splitting: spectral transport in ``X1``, then exact relaxation per energy bin.

    ``F0`` has shape ``(nx, nv**3)``. The collision step sets
    ``F <- m + (F - m) exp(-r dt)`` with ``m`` the bin average and ``r = 2 pi Phi``,
    which is the exact solution of the gain-loss equation with bin-uniform
    redistribution; it conserves mass in every energy bin.

    Returns the final density and, if ``record_every > 0``, a list of
    ``(time, F)`` snapshots.
    """
    F = np.array(F0, dtype=float)
    if F.shape != (grid.nx, grid.nv**3):
        raise BoltzmannError(f"density has shape {F.shape}, expected {(grid.nx, grid.nv ** 3)}")
    if F.min() < -1e-12 * max(F.max(), 1e-300):
        raise BoltzmannError("initial density must be nonnegative")
    rates = grid.rates()
    if collisions and dt * rates.max() >= 0.1:
        raise BoltzmannError(f"dt * 2 pi Phi_max = {dt * rates.max():.3f} must stay below 0.1")
    nsteps = int(round(T / dt))
    k = sfft.fftfreq(grid.nx, d=grid.dx)
    shift = np.exp(-2j * np.pi * k[:, None] * disp.velocity(grid.momenta)[None, :, 0] * dt)
    decay = np.exp(-rates * dt)
    mass0 = F.sum()
    snaps = []
    for step in range(nsteps):
        F = sfft.ifft(sfft.fft(F, axis=0) * shift, axis=0).real
        if collisions:
            m = bin_means(F, grid)
            F = m + (F - m) * decay[None, :]
        if F.min() < -1e-12 * max(F.max(), 1e-300):
            raise BoltzmannError(f"negative density {F.min():.3e} at step {step}")
        if record_every and (step + 1) % record_every == 0:
            snaps.append(((step + 1) * dt, F.copy()))
    drift = abs(F.sum() - mass0) / mass0
    if drift > 1e-10 * max(nsteps, 1):
        raise BoltzmannError(f"mass drift {drift:.2e} exceeds tolerance")
    return (F, snaps) if record_every else F


def x_marginal_moments(F: np.ndarray, grid: PhaseSpaceGrid) -> tuple[float, float]:
    rho = F.sum(axis=1)
    w = rho / rho.sum()
    mean = float(np.sum(w * grid.x))
    return mean, float(np.sum(w * (grid.x - mean) ** 2))


def shell_l1_distance(F: np.ndarray, grid: PhaseSpaceGrid) -> float:
    """L1 distance of each bin's momentum profile from its bin-uniform average."""
    m = bin_means(F, grid)
    return float(np.sum(np.abs(F - m)) / np.sum(F))
