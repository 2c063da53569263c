"""Random potentials and unitary evolution of ``i d/dt psi = (H0 + lam V) psi`` on a periodic box.

``H0`` acts in momentum space as multiplication by ``e(p)``. Evolution is by
Strang splitting; tiny boxes can also be propagated exactly through a dense
eigendecomposition, which serves as the reference for the splitting.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from . import dispersion as disp
from .lattice import POSITION, ComplexField, LatticeGrid, fourier_forward, fourier_inverse
from .rng import stream, substream_seed

DISTRIBUTIONS = ("rademacher", "gaussian", "custom")


class EvolutionError(RuntimeError):
    pass


class MarginError(EvolutionError):
    pass


@dataclass(frozen=True)
class RandomPotential:
    grid: LatticeGrid
    values: np.ndarray = field(repr=False)
    distribution: str
    seed: int

    def sample_moments(self, orders=(1, 2, 3, 4, 5, 6)) -> dict:
        v = self.values.reshape(-1)
        return {k: float(np.mean(v**k)) for k in orders}

    def moment_check(self, nsigma: float = 4.0) -> bool:
        """First and second sample moments within ``nsigma`` standard errors of 0 and 1."""
        v = self.values.reshape(-1)
        n = v.size
        m = self.sample_moments((1, 2, 4))
        ok1 = abs(m[1]) <= nsigma * np.sqrt(m[2] / n)
        ok2 = abs(m[2] - 1) <= nsigma * np.sqrt(max(m[4] - m[2] ** 2, 1e-300) / n)
        return bool(ok1 and ok2)


def sample_potential(grid: LatticeGrid, distribution: str = "rademacher", seed: int = 0,
                     index: int = 0, sampler: Callable | None = None) -> RandomPotential:
    """Site-i.i.d. potential. ``custom`` needs ``sampler(rng, shape)`` with the symmetric unit-variance law."""
    rng = stream(seed, "potential", index)
    if distribution == "rademacher":
        vals = np.where(rng.random(grid.shape) < 0.5, -1.0, 1.0)
    elif distribution == "gaussian":
        vals = rng.standard_normal(grid.shape)
    elif distribution == "custom":
        if sampler is None:
            raise ValueError("custom distribution needs a sampler")
        vals = np.asarray(sampler(rng, grid.shape), dtype=float)
    else:
        raise ValueError(f"unknown potential distribution {distribution!r}; choose from {DISTRIBUTIONS}")
    vals.setflags(write=False)
    return RandomPotential(grid, vals, distribution, int(seed))


@dataclass(frozen=True)
class EvolutionConfig:
    lam: float
    t: float
    dt: float = 0.05
    L: int = 16
    scheme: str = "strang"
    enforce_margin: bool = True

    def __post_init__(self):
        if self.scheme not in ("strang", "exact"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.t < 0 or self.dt <= 0:
            raise ValueError("need t >= 0 and dt > 0")

    @property
    def nsteps(self) -> int:
        return max(int(np.ceil(self.t / self.dt - 1e-9)), 1) if self.t > 0 else 0


def support_diameter(psi: ComplexField, tol: float = 1e-12) -> float:
    """Largest per-axis extent (in sites) of the set where ``|psi|`` exceeds ``tol * max``."""
    a = np.abs(psi.values)
    mask = a > tol * a.max()
    L = psi.grid.L
    ext = 0
    for ax in range(psi.grid.d):
        occ = np.any(mask, axis=tuple(i for i in range(psi.grid.d) if i != ax))
        idx = np.flatnonzero(occ)
        # smallest arc covering the occupied sites on the circle
        gaps = np.diff(np.concatenate([idx, [idx[0] + L]]))
        ext = max(ext, L - gaps.max())
    return float(ext)


def check_margin(psi: ComplexField, cfg: EvolutionConfig) -> None:
    need = 2 * cfg.t + support_diameter(psi)
    if cfg.L <= need:
        raise MarginError(f"box side {cfg.L} does not exceed 2 t + diam(supp psi0) = {need:.1f}; "
                          "wrap-around would contaminate the evolution")


def kinetic_phase(grid: LatticeGrid, dt: float) -> np.ndarray:
    """``exp(-i dt e(p))`` on the FFT momentum grid."""
    return np.exp(-1j * dt * disp.energy(grid.momenta()))


def hamiltonian_matrix(V: RandomPotential, lam: float) -> np.ndarray:
    """Dense ``H0 + lam V`` in the site basis (tiny boxes only)."""
    g = V.grid
    n = g.n_sites
    if n > 4096:
        raise EvolutionError("dense Hamiltonian refused above 4096 sites")
    # H0 columns are the inverse DFT of e(p) applied to unit vectors
    kern = sfft.ifftn(disp.energy(g.momenta())).reshape(-1)
    idx = np.stack(np.unravel_index(np.arange(n), g.shape), axis=-1)
    diff = (idx[:, None, :] - idx[None, :, :]) % g.L
    H = kern[np.ravel_multi_index(tuple(np.moveaxis(diff, -1, 0)), g.shape)]
    H = 0.5 * (H + H.conj().T) + np.diag(lam * V.values.reshape(-1))
    return H


def evolve(psi0: ComplexField, V: RandomPotential, cfg: EvolutionConfig,
           check_norm: bool = True) -> ComplexField:
    """Propagate ``psi0`` to time ``cfg.t``.

    Strang step: ``exp(-i dt/2 lam V) F^-1 exp(-i dt e) F exp(-i dt/2 lam V)``.
    The steps are uniform with ``dt' = t / ceil(t / dt)``.
    """
    if psi0.representation != POSITION:
        psi0 = fourier_inverse(psi0)
    if V.grid != psi0.grid:
        raise EvolutionError("potential and wave function live on different grids")
    if cfg.L != psi0.grid.L:
        raise EvolutionError(f"config says L={cfg.L} but the field has L={psi0.grid.L}")
    if cfg.enforce_margin:
        check_margin(psi0, cfg)
    if cfg.scheme == "exact":
        H = hamiltonian_matrix(V, cfg.lam)
        w, U = np.linalg.eigh(H)
        x = psi0.values.reshape(-1)
        out = U @ (np.exp(-1j * cfg.t * w) * (U.conj().T @ x))
        return psi0.with_values(out.reshape(psi0.grid.shape))
    n = cfg.nsteps
    if n == 0:
        return psi0
    h = cfg.t / n
    kin = kinetic_phase(psi0.grid, h)
    half = np.exp(-0.5j * h * cfg.lam * V.values)
    full = half * half
    psi = psi0.values * half
    norm0 = np.vdot(psi0.values, psi0.values).real
    for i in range(n):
        psi = sfft.ifftn(kin * sfft.fftn(psi))
        psi *= full if i < n - 1 else half
    if not np.all(np.isfinite(psi)):
        raise EvolutionError("non-finite amplitude during evolution")
    if check_norm:
        drift = abs(np.vdot(psi, psi).real - norm0) / max(norm0, 1e-300)
        if drift > 1e-12 * max(n, 1) + 1e-13:
            raise EvolutionError(f"norm drift {drift:.2e} after {n} steps")
    return psi0.with_values(psi)


def free_evolution(psi0: ComplexField, t: float) -> ComplexField:
    """``exp(-i t H0) psi0`` exactly, through one FFT pair."""
    ph = fourier_forward(psi0)
    return fourier_inverse(ph.with_values(ph.values * np.exp(-1j * t * disp.energy(psi0.grid.momenta()))))


# --------------------------------------------------------------------------
# initial states


def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        g = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return f / (f + g)


def smooth_band_profile(e, lo: float, hi: float, ramp: float = 0.05):
    """C-infinity bump equal to 1 on ``[lo, hi]``, vanishing outside ``[lo - ramp, hi + ramp]``."""
    e = np.asarray(e, dtype=float)
    return _smooth_step((e - lo + ramp) / ramp) * _smooth_step((hi + ramp - e) / ramp)


def band_state(grid: LatticeGrid, lo: float, hi: float, center=None, width: float | None = None,
               ramp: float = 0.05, normalize: bool = True) -> ComplexField:
    """Momentum-space energy-band state, optionally localized by a position Gaussian of ``width`` sites."""
    ph = smooth_band_profile(disp.energy(grid.momenta()), lo, hi, ramp).astype(complex)
    if center is not None:
        c = np.asarray(center, dtype=float)
        ph = ph * np.exp(-2j * np.pi * grid.momenta() @ c)
    psi = fourier_inverse(ComplexField(grid, ph, "momentum"))
    vals = psi.values
    if width is not None:
        x = grid.positions()
        c = np.zeros(grid.d) if center is None else np.asarray(center, dtype=float)
        dx = x - c
        dx = dx - grid.L * np.round(dx / grid.L)
        vals = vals * np.exp(-np.sum(dx**2, axis=-1) / (2 * width**2))
    f = ComplexField(grid, vals, POSITION)
    if normalize:
        f = f.with_values(vals / np.sqrt(f.norm2()))
    return f


def gaussian_packet(grid: LatticeGrid, width: float, p0=None, center=None) -> ComplexField:
    """Position Gaussian envelope times the plane wave ``exp(2 pi i p0.x)``, unit norm."""
    x = grid.positions().astype(float)
    c = np.zeros(grid.d) if center is None else np.asarray(center, dtype=float)
    p0 = np.zeros(grid.d) if p0 is None else np.asarray(p0, dtype=float)
    vals = np.exp(-np.sum((x - c) ** 2, axis=-1) / (4 * width**2) + 2j * np.pi * (x @ p0))
    f = ComplexField(grid, vals, POSITION)
    return f.with_values(vals / np.sqrt(f.norm2()))


def point_state(grid: LatticeGrid, site=None) -> ComplexField:
    vals = np.zeros(grid.shape, dtype=complex)
    vals[tuple(np.zeros(grid.d, dtype=int) if site is None else np.asarray(site) % grid.L)] = 1.0
    return ComplexField(grid, vals, POSITION)


# --------------------------------------------------------------------------
# observables


def norm_squared(psi: ComplexField) -> float:
    return psi.norm2()


def position_variance(psi: ComplexField) -> float:
    """Total position variance (sum over axes) of ``|psi|^2`` with centred box coordinates."""
    p = np.abs(psi.values) ** 2
    p = p / p.sum()
    x = psi.grid.positions()
    mean = np.tensordot(p, x, axes=psi.grid.d)
    second = np.tensordot(p, np.sum(x**2, axis=-1), axes=psi.grid.d)
    return float(second - mean @ mean)


def circular_variance(psi: ComplexField) -> float:
    """Total variance from the first circular moment on each axis.

    ``sigma^2 = -(L^2 / 2 pi^2) log |<exp(2 pi i x / L)>|`` is exact for a wrapped
    Gaussian and insensitive to which periodic image is used, so it stays
    meaningful after the packet has wrapped around the box.
    """
    p = np.abs(psi.values) ** 2
    p = p / p.sum()
    L = psi.grid.L
    total = 0.0
    for ax in range(psi.grid.d):
        marg = p.sum(axis=tuple(i for i in range(psi.grid.d) if i != ax))
        z = np.sum(marg * np.exp(2j * np.pi * np.arange(L) / L))
        total += -(L**2) / (2 * np.pi**2) * np.log(max(abs(z), 1e-300))
    return float(total)


def energy_distribution(psi: ComplexField, edges) -> np.ndarray:
    """Mass of ``|psi_hat|^2`` per energy bin (grid quadrature)."""
    ph = fourier_forward(psi) if psi.representation == POSITION else psi
    w = np.abs(ph.values) ** 2 * psi.grid.momentum_weight
    e = disp.energy(psi.grid.momenta())
    hist, _ = np.histogram(e.reshape(-1), bins=edges, weights=w.reshape(-1))
    return hist


OBSERVABLES: dict[str, Callable[[ComplexField], float]] = {
    "norm2": norm_squared,
    "position_variance": position_variance,
    "circular_variance": circular_variance,
}


# --------------------------------------------------------------------------
# ensembles


@dataclass
class EnsembleRecord:
    config: dict
    observables: dict
    realization_seeds: list
    times: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path


def _realization(args):
    psi0, cfg, r, seed, distribution, observables, checkpoints = args
    V = sample_potential(psi0.grid, distribution, seed, index=r)
    vals = []
    psi, t_prev = psi0, 0.0
    for t in checkpoints:
        step = EvolutionConfig(cfg.lam, t - t_prev, cfg.dt, cfg.L, cfg.scheme, enforce_margin=False)
        psi = evolve(psi, V, step) if t > t_prev else psi
        t_prev = t
        row = []
        for name in observables:
            fn = OBSERVABLES[name] if isinstance(name, str) else name
            try:
                val = np.asarray(fn(psi), dtype=float)
            except Exception as exc:  # noqa: BLE001
                raise EvolutionError(f"observable {name!r} failed on realization {r}: {exc}") from exc
            row.append(val)
        vals.append(row)
    return vals


def run_ensemble(psi0: ComplexField, cfg: EvolutionConfig, R: int, observables: Sequence,
                 seed: int = 0, distribution: str = "rademacher", checkpoints=None,
                 pool=None) -> EnsembleRecord:
    """Evolve ``R`` independent realizations and average each observable.

    ``checkpoints`` is a list of times at which every observable is evaluated
    (default: ``[cfg.t]``). Realization ``r`` uses potential stream
    ``("potential", r)`` of ``seed`` regardless of scheduling. ``pool`` may be
    any object with an ordered ``map``.
    """
    if R < 1:
        raise ValueError("need at least one realization")
    if cfg.enforce_margin:
        check_margin(psi0, cfg)
    checkpoints = [cfg.t] if checkpoints is None else sorted(float(t) for t in checkpoints)
    tasks = [(psi0, cfg, r, seed, distribution, list(observables), checkpoints) for r in range(R)]
    mapper = map if pool is None else pool.map
    results = list(mapper(_realization, tasks))
    out = {}
    for j, name in enumerate(observables):
        key = name if isinstance(name, str) else getattr(name, "__name__", f"obs{j}")
        arr = np.array([[res[c][j] for c in range(len(checkpoints))] for res in results], dtype=float)
        mean = arr.mean(axis=0)
        err = arr.std(axis=0, ddof=1) / np.sqrt(R) if R > 1 else np.zeros_like(mean)
        out[key] = {"mean": mean.tolist(), "stderr": err.tolist()}
    cfg_echo = asdict(cfg) | {"R": R, "seed": seed, "distribution": distribution}
    seeds = [substream_seed(seed, "potential", r) for r in range(R)]
    return EnsembleRecord(cfg_echo, out, seeds, checkpoints)
