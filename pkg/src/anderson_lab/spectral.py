"""Density of states, shell measures, self-energy and the diffusion matrix.

The density of states ``Phi`` is the pushforward density of the uniform torus
measure under ``e``, so a histogram of ``e(U)`` for uniform ``U`` estimates it
without meshing any level surface. Shell averages ``<h>_a`` are estimated
either from thin-shell rejection samples or from an exact surface sampler
(:func:`surface_proposal`) that places points directly on ``{e = s}``.

The self-energy is ``Theta(alpha) = int Phi(s) / (alpha - s + i0) ds``. With
``Phi`` piecewise linear between table nodes both the ``eps > 0`` integral and
the principal value have closed forms per segment; the principal value is
taken after subtracting ``Phi(alpha)`` so the remaining integrand is regular.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dispersion as disp
from .rng import stream

TWO_PI = 2.0 * np.pi
MIN_PHI_SAMPLES = 100_000
CUSP_CUT = 0.01
CUSP_FIT_HI = 0.1


class SpectralError(ValueError):
    pass


# --------------------------------------------------------------------------
# histogram table


@dataclass
class SpectralTables:
    """Tabulated ``Phi``, ``R = Re Theta`` and ``I = -Im Theta`` on ``[0, 2d]``.

    ``e`` holds bin centres. ``phi`` is the histogram density with the two edge
    bins replaced by the local power-law fit; ``phi_stderr`` is the binomial
    standard error of the raw bins.
    """

    e: np.ndarray
    phi: np.ndarray
    phi_stderr: np.ndarray
    de: float
    n_samples: int
    seed: int
    d: int = 3
    cusp_fit: dict = field(default_factory=dict)
    timestamp: str = ""
    R: np.ndarray | None = None
    I: np.ndarray | None = None

    def __post_init__(self):
        self.emax = 2.0 * self.d
        self._build_nodes()
        if self.R is None or self.I is None:
            th = self.theta(self.e)
            self.R, self.I = th.real.copy(), -th.imag.copy()
        self._theta_grid = self.theta(self._nodes)

    # -- interpolation nodes ------------------------------------------------
    def _cusp(self, x):
        c = self.cusp_fit
        return np.exp(c["log_amp"]) * np.power(np.maximum(x, 0.0), c["exponent"])

    def _build_nodes(self):
        inner = self.e >= CUSP_CUT
        inner &= self.e <= self.emax - CUSP_CUT
        lo = np.geomspace(1e-6, CUSP_CUT, 24)
        nodes = np.concatenate([[0.0], lo, self.e[inner], self.emax - lo[::-1], [self.emax]])
        vals = np.concatenate([[0.0], self._cusp(lo), self.phi[inner], self._cusp(lo[::-1]), [0.0]])
        order = np.argsort(nodes, kind="stable")
        nodes, vals = nodes[order], vals[order]
        keep = np.concatenate([[True], np.diff(nodes) > 1e-12])
        self._nodes, self._node_phi = nodes[keep], vals[keep]
        # map bin index -> node index for error propagation
        self._bin_to_node = np.full(len(self.e), -1)
        pos = np.searchsorted(self._nodes, self.e[inner])
        self._bin_to_node[np.flatnonzero(inner)] = pos

    def phi_at(self, s):
        """Piecewise-linear ``Phi`` between nodes, zero outside ``[0, 2d]``."""
        s = np.asarray(s, dtype=float)
        return np.interp(s, self._nodes, self._node_phi, left=0.0, right=0.0)

    # -- self-energy --------------------------------------------------------
    def _theta_coefficients(self, alpha: float, eps: float) -> np.ndarray:
        """Weights ``c`` with ``Theta_eps(alpha) = c @ node_phi`` (exact for the interpolant)."""
        x = self._nodes
        a, b = x[:-1], x[1:]
        h = b - a
        coef = np.zeros(len(x), dtype=complex)
        if eps > 0:
            z = alpha + 1j * eps
            lg = np.log(z - a) - np.log(z - b)
            coef[:-1] += ((b - z) * lg + h) / h
            coef[1:] += ((z - a) * lg - h) / h
            return coef
        # Subtract Phi(alpha): on a segment where Phi = A + B s the integrand
        # becomes -B + (A + B alpha - Phi(alpha)) / (alpha - s), whose second
        # part vanishes on segments touching alpha.
        touch = (a <= alpha) & (alpha <= b)
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.log(np.abs(alpha - a)) - np.log(np.abs(alpha - b))
        lg = np.where(touch, 0.0, lg)
        coef[:-1] += 1.0 + (b - alpha) / h * lg
        coef[1:] += -1.0 + (alpha - a) / h * lg
        w_alpha = self._interp_weights(alpha)
        if w_alpha.any():
            coef += w_alpha * (np.log(alpha / (self.emax - alpha)) - lg.sum())
            coef -= 1j * np.pi * w_alpha
        return coef

    def _interp_weights(self, alpha: float) -> np.ndarray:
        w = np.zeros(len(self._nodes))
        if alpha <= 0.0 or alpha >= self.emax:
            return w
        i = np.searchsorted(self._nodes, alpha, side="right") - 1
        i = min(max(i, 0), len(self._nodes) - 2)
        t = (alpha - self._nodes[i]) / (self._nodes[i + 1] - self._nodes[i])
        w[i], w[i + 1] = 1.0 - t, t
        return w

    def theta(self, alpha, eps: float = 0.0):
        """Self-energy ``Theta_eps(alpha)``; ``eps = 0`` gives the boundary value."""
        if eps < 0:
            raise SpectralError("eps must be >= 0")
        alpha = np.asarray(alpha, dtype=float)
        if np.any(~np.isfinite(alpha)):
            raise SpectralError("non-finite energy passed to theta")
        out = np.array([self._theta_coefficients(float(a), eps) @ self._node_phi
                        for a in alpha.reshape(-1)], dtype=complex)
        out = out.reshape(alpha.shape)
        return complex(out) if out.ndim == 0 else out

    def theta_stderr(self, alpha, eps: float = 0.0):
        """Standard error of ``Theta`` propagated linearly from the histogram bins."""
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        var_re, var_im = [], []
        sel = self._bin_to_node >= 0
        for a in alpha:
            c = self._theta_coefficients(float(a), eps)[self._bin_to_node[sel]]
            s2 = self.phi_stderr[sel] ** 2
            var_re.append(np.sum(c.real**2 * s2))
            var_im.append(np.sum(c.imag**2 * s2))
        return np.sqrt(var_re) + 1j * np.sqrt(var_im)

    def theta_fast(self, alpha):
        """``Theta(alpha)`` by linear interpolation of a precomputed node table."""
        a = np.asarray(alpha, dtype=float)
        re = np.interp(a, self._nodes, self._theta_grid.real)
        im = np.interp(a, self._nodes, self._theta_grid.imag, left=0.0, right=0.0)
        return re + 1j * im

    def phi_stderr_at(self, s):
        return np.interp(np.asarray(s, dtype=float), self.e, self.phi_stderr, left=0.0, right=0.0)

    def omega(self, p, lam: float):
        """Renormalized dispersion ``e(p) + lam**2 Theta(e(p))``."""
        e = disp.energy(p)
        if lam == 0:
            return e.astype(complex)
        return e + lam**2 * self.theta_fast(e)

    def omega_of_energy(self, s, lam: float):
        s = np.asarray(s, dtype=float)
        return s + lam**2 * self.theta_fast(s)

    # -- persistence --------------------------------------------------------
    def metadata(self) -> dict:
        return {
            "n_samples": int(self.n_samples),
            "de": float(self.de),
            "seed": int(self.seed),
            "d": int(self.d),
            "cusp_fit": {k: float(v) for k, v in self.cusp_fit.items()},
            "build_timestamp": self.timestamp,
        }

    def save(self, path) -> tuple[Path, Path]:
        path = Path(path)
        data = np.column_stack([self.e, self.phi, self.phi_stderr, self.R, self.I])
        np.savetxt(path, data, delimiter=",", header="e,phi,phi_stderr,R,I", comments="", fmt="%.17g")
        side = path.with_suffix(".json")
        side.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return path, side

    @classmethod
    def load(cls, path) -> "SpectralTables":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        meta = json.loads(path.with_suffix(".json").read_text())
        return cls(e=data[:, 0], phi=data[:, 1], phi_stderr=data[:, 2], de=meta["de"],
                   n_samples=meta["n_samples"], seed=meta["seed"], d=meta.get("d", 3),
                   cusp_fit=meta["cusp_fit"], timestamp=meta.get("build_timestamp", ""),
                   R=data[:, 3], I=data[:, 4])


def _fit_cusp(centres, density, stderr, lo=CUSP_CUT, hi=CUSP_FIT_HI):
    sel = (centres - 0.5 * (centres[1] - centres[0]) >= lo - 1e-12) & (centres <= hi) & (density > 0)
    x, y = np.log(centres[sel]), np.log(density[sel])
    w = density[sel] / np.maximum(stderr[sel], 1e-300)
    slope, intercept = np.polyfit(x, y, 1, w=w)
    return {"exponent": float(slope), "log_amp": float(intercept)}


def build_phi(n_samples: int = 10_000_000, de: float = 0.01, seed: int = 0, d: int = 3,
              batch: int = 2_000_000, symmetrize: bool = False, timestamp: str | None = None) -> SpectralTables:
    """Histogram estimate of the density of states from uniform torus samples.

    Parameters
    ----------
    n_samples : int
        Total number of uniform momenta (at least ``1e5``).
    de : float
        Energy bin width; ``2d / de`` must be an integer.
    seed : int
        Master seed; batch ``i`` uses stream ``("phi", i)``.
    symmetrize : bool
        Also histogram ``2d - e`` (exact antipodal symmetry, halves the noise
        of symmetric quantities). Off by default so symmetry can be tested.
    """
    if n_samples < MIN_PHI_SAMPLES:
        raise SpectralError(f"build_phi needs at least {MIN_PHI_SAMPLES} samples, got {n_samples}")
    emax = 2.0 * d
    nbins = int(round(emax / de))
    if abs(nbins * de - emax) > 1e-9:
        raise SpectralError("2d / de must be an integer")
    counts = np.zeros(nbins, dtype=np.int64)
    done, i = 0, 0
    while done < n_samples:
        m = min(batch, n_samples - done)
        u = stream(seed, "phi", i).random((m, d)) - 0.5
        e = disp.energy(u)
        counts += np.bincount(np.minimum((e / de).astype(np.int64), nbins - 1), minlength=nbins)
        if symmetrize:
            counts += np.bincount(np.minimum(((emax - e) / de).astype(np.int64), nbins - 1), minlength=nbins)
        done += m
        i += 1
    n_eff = n_samples * (2 if symmetrize else 1)
    frac = counts / n_eff
    phi = frac / de
    stderr = np.sqrt(frac * (1 - frac) / n_eff) / de
    centres = (np.arange(nbins) + 0.5) * de
    fit = _fit_cusp(centres, phi, stderr)
    phi = phi.copy()
    # edge bins are noise dominated; replace them by the power-law fit
    edge = centres < CUSP_CUT
    phi[edge] = np.exp(fit["log_amp"]) * centres[edge] ** fit["exponent"]
    phi[centres > emax - CUSP_CUT] = np.exp(fit["log_amp"]) * (emax - centres[centres > emax - CUSP_CUT]) ** fit["exponent"]
    if timestamp is None:
        timestamp = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return SpectralTables(e=centres, phi=phi, phi_stderr=stderr, de=de, n_samples=n_samples,
                          seed=seed, d=d, cusp_fit=fit, timestamp=timestamp)


def cusp_exponent(tables: SpectralTables, lo: float = 0.01, hi: float = 0.2) -> tuple[float, float]:
    """Log-log slope of the raw histogram on ``[lo, hi]`` with its standard error."""
    c = tables.e
    sel = (c - tables.de / 2 >= lo - 1e-12) & (c + tables.de / 2 <= hi + 1e-12)
    x, y = np.log(c[sel]), np.log(tables.phi[sel])
    sig = tables.phi_stderr[sel] / tables.phi[sel]
    coef, cov = np.polyfit(x, y, 1, w=1 / sig, cov="unscaled")
    return float(coef[0]), float(np.sqrt(cov[0, 0]))


# --------------------------------------------------------------------------
# shell sampling


@dataclass
class ShellSample:
    points: np.ndarray
    a: float
    delta: float
    acceptance: float = float("nan")

    def mean(self, h):
        """Empirical ``<h>`` with standard error; ``h`` maps ``(n, d)`` points to ``(n, ...)``."""
        vals = np.asarray(h(self.points))
        n = len(vals)
        return vals.mean(axis=0), vals.std(axis=0, ddof=1) / np.sqrt(n)


def shell_sample(a: float, delta: float, n: int, seed: int = 0, d: int = 3,
                 batch: int = 4_000_000, min_acceptance: float = 1e-6,
                 max_draws: int | None = None) -> ShellSample:
    """Uniform points on the thin shell ``|e(v) - a| < delta/2`` by rejection.

    Raises
    ------
    SpectralError
        If the observed acceptance rate falls below ``min_acceptance``.
    """
    if n < 1:
        raise SpectralError("n must be >= 1")
    if delta <= 0:
        raise SpectralError("shell width must be positive")
    out, drawn, got, i = [], 0, 0, 0
    max_draws = max_draws or int(50 * n / max(min_acceptance, 1e-12))
    while got < n:
        u = stream(seed, "shell", i).random((batch, d)) - 0.5
        i += 1
        drawn += batch
        keep = u[np.abs(disp.energy(u) - a) < delta / 2]
        out.append(keep)
        got += len(keep)
        if drawn >= 10 * batch and got / drawn < min_acceptance:
            raise SpectralError(f"acceptance {got / drawn:.2e} below {min_acceptance:.0e} at a={a}; "
                                "energy is too close to the band edge")
        if drawn > max_draws:
            raise SpectralError("shell sampling exceeded its draw budget")
    pts = np.concatenate(out)[:n]
    return ShellSample(pts, float(a), float(delta), got / drawn)


def surface_proposal(s, rng: np.random.Generator, d: int = 3):
    """Points placed exactly on ``{e = s}`` by solving for one random axis.

    For each target energy draw an axis ``j``, the remaining coordinates
    uniformly, and solve ``e(v) = s`` for ``v_j`` (random sign). The induced
    measure on the shell is ``(pi/d) * sum_j |sin 2 pi v_j|`` times the co-area
    measure ``delta(s - e(v)) dv``, so the returned weight

        w = d / (pi * sum_j |sin 2 pi v_j|)       (0 where no root exists)

    makes ``E[w h(v)] = int h(v) delta(s - e(v)) dv = [h](s)`` and
    ``E[w] = Phi(s)``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    n = len(s)
    axis = rng.integers(0, d, size=n)
    v = rng.random((n, d)) - 0.5
    rows = np.arange(n)
    v[rows, axis] = 0.0
    e_rest = disp.energy(v)
    c = 1.0 - (s - e_rest)
    ok = np.abs(c) <= 1.0
    root = np.arccos(np.clip(c, -1.0, 1.0)) / TWO_PI
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    v[rows, axis] = sign * root
    v = v - np.floor(v + 0.5)
    ssum = np.sum(np.abs(np.sin(TWO_PI * v)), axis=-1)
    with np.errstate(divide="ignore"):
        w = np.where(ok & (ssum > 0), d / (np.pi * ssum), 0.0)
    return v, w


def surface_density(v, s_density, d: int = 3):
    """Torus density of :func:`surface_proposal` when ``s`` is drawn from ``s_density``."""
    v = np.asarray(v, dtype=float)
    e = disp.energy(v)
    return s_density(e) * (np.pi / d) * np.sum(np.abs(np.sin(TWO_PI * v)), axis=-1)


def phi_surface(s: float, n: int, seed: int = 0, d: int = 3) -> tuple[float, float]:
    """Independent estimate of ``Phi(s)`` from the surface sampler (mean weight)."""
    rng = stream(seed, "phi_surface", int(round(s * 1e6)))
    _, w = surface_proposal(np.full(n, s), rng, d)
    return float(w.mean()), float(w.std(ddof=1) / np.sqrt(n))


def shell_sample_exact(a: float, n: int, rng: np.random.Generator, d: int = 3,
                       batch: int | None = None) -> np.ndarray:
    """Exact draws from ``<.>_a`` (zero shell width) by thinning the surface proposal.

    The weight is bounded on a noncritical shell by ``d / (pi sqrt(S_min))`` with
    ``S_min`` the minimum of ``|grad e / 2 pi|^2`` there.
    """
    smin = disp.shell_min_gradient_sq(a, d)
    if not smin > 0:
        raise SpectralError(f"energy {a} is a critical value or outside the band")
    wmax = d / (np.pi * np.sqrt(smin))
    out, got = [], 0
    batch = batch or max(1024, int(4 * n))
    while got < n:
        v, w = surface_proposal(np.full(batch, a), rng, d)
        keep = v[rng.random(batch) * wmax < w]
        out.append(keep)
        got += len(keep)
    return np.concatenate(out)[:n]


def shell_projection(h, energies, n_per: int, seed: int = 0, d: int = 3):
    """``[h](e)`` at each energy via the surface sampler; returns values and stderrs."""
    vals, errs = [], []
    for i, s in enumerate(np.atleast_1d(energies)):
        rng = stream(seed, "projection", i)
        v, w = surface_proposal(np.full(n_per, s), rng, d)
        x = w * np.asarray(h(v))
        vals.append(x.mean())
        errs.append(x.std(ddof=1) / np.sqrt(n_per))
    return np.array(vals), np.array(errs)


# --------------------------------------------------------------------------
# diffusion matrix


@dataclass
class DiffusionMatrix:
    a: float
    matrix: np.ndarray
    stderr: np.ndarray
    scalar: float
    scalar_stderr: float


def diffusion_matrix(a: float, shell: ShellSample, tables: SpectralTables) -> DiffusionMatrix:
    """``D_ij(a) = <sin(2 pi v_i) sin(2 pi v_j)>_a / (2 pi Phi(a))`` from shell samples."""
    d = tables.d
    if not 0 < a < 2 * d:
        raise SpectralError("energy must lie strictly inside the band")
    if a in disp.critical_values(d)[0]:
        raise SpectralError(f"degenerate shell at critical energy {a}")
    phi = float(tables.phi_at(a))
    if phi <= 0:
        raise SpectralError("Phi(a) must be positive")
    sv = disp.velocity(shell.points)
    prod = sv[:, :, None] * sv[:, None, :]
    n = len(sv)
    mean = prod.mean(axis=0)
    err = prod.std(axis=0, ddof=1) / np.sqrt(n)
    phi_rel = float(tables.phi_stderr_at(a)) / phi
    mat = mean / (TWO_PI * phi)
    mat_err = np.sqrt((err / (TWO_PI * phi)) ** 2 + (mat * phi_rel) ** 2)
    diag = sv**2
    sc = diag.mean() / (TWO_PI * phi)
    # per-particle average over axes keeps the estimator's samples independent
    sc_err = np.hypot(diag.mean(axis=1).std(ddof=1) / np.sqrt(n) / (TWO_PI * phi), sc * phi_rel)
    return DiffusionMatrix(float(a), mat, mat_err, float(sc), float(sc_err))


def diffusion_scalar_surface(a: float, n: int, seed: int = 0, d: int = 3) -> tuple[float, float]:
    """``D_a`` with both shell average and ``Phi`` taken from the surface sampler (no table)."""
    rng = stream(seed, "diffusion_surface", int(round(a * 1e6)))
    v, w = surface_proposal(np.full(n, a), rng, d)
    num = w * np.mean(disp.velocity(v) ** 2, axis=-1)
    A, B = num.mean(), w.mean()
    # D = <h> / (2 pi Phi) = A / (2 pi B^2); delta-method error
    cov = np.cov(num, w)
    var = (cov[0, 0] / B**4 - 4 * A * cov[0, 1] / B**5 + 4 * A**2 * cov[1, 1] / B**6) / n
    return float(A / (TWO_PI * B**2)), float(np.sqrt(max(var, 0.0)) / TWO_PI)


# --------------------------------------------------------------------------
# renormalized dispersion and propagator integrals


def renormalized_omega(p, lam: float, tables: SpectralTables):
    return tables.omega(p, lam)


def fit_theta_constants(tables: SpectralTables, n: int = 10_000, seed: int = 0) -> dict:
    """Empirical constants of the self-energy bounds on random momenta.

    Reports ``c2 = max |theta(p)|``, and ``c1, c3`` as the smallest ratios
    ``-Im theta(p) / |p|^(d-2)`` on the fundamental domain and
    ``-Im theta(p) / D(p)^(d-2)`` on the whole torus.
    """
    rng = stream(seed, "theta_constants")
    d = tables.d
    p = rng.random((n, d)) - 0.5
    th = tables.theta_fast(disp.energy(p))
    c2 = float(np.max(np.abs(th)))
    # fundamental domain: 0 <= p1 <= p2 <= ... and sum p <= d/4
    q = np.sort(np.abs(p), axis=1)
    dom = np.sum(q, axis=1) <= d / 4
    thq = tables.theta_fast(disp.energy(q[dom]))
    r = np.linalg.norm(q[dom], axis=1) ** (d - 2)
    ratio1 = -thq.imag / r
    dist = disp.distance_to_extremal_points(p) ** (d - 2)
    ratio3 = -th.imag / dist
    return {"c1": float(np.min(ratio1)), "c2": c2, "c2_imag_upper": float(np.max(ratio1)),
            "c3": float(np.min(ratio3)), "n": n}


def _cauchy_mixture(center, scale, lo, hi, frac_uniform=0.1):
    """Truncated Cauchy + uniform mixture on ``[lo, hi]``: sampler and density."""
    from scipy import stats

    cd = stats.cauchy(loc=center, scale=scale)
    mass = cd.cdf(hi) - cd.cdf(lo)

    def sample(rng, n):
        u = rng.random(n)
        x = cd.ppf(cd.cdf(lo) + u * mass)
        uni = rng.random(n) < frac_uniform
        x[uni] = lo + (hi - lo) * rng.random(int(uni.sum()))
        return np.clip(x, lo, hi)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        inside = (x >= lo) & (x <= hi)
        return np.where(inside, (1 - frac_uniform) * cd.pdf(x) / mass + frac_uniform / (hi - lo), 0.0)

    return sample, pdf


@dataclass
class ProbeResult:
    value: float
    stderr: float
    n: int
    params: dict = field(default_factory=dict)


def integral_probe_log(alpha: float, lam: float, eta: float, tables: SpectralTables,
                       n: int = 200_000, seed: int = 0) -> ProbeResult:
    """Monte Carlo estimate of ``int dp / |alpha - omega(p) + i eta|``.

    The integrand depends on ``p`` only through ``e(p)``, so the estimate runs
    over energies with ``Phi`` weights and a Cauchy proposal centred on the
    resonance.
    """
    rng = stream(seed, "probe_log", int(1e6 * lam))
    width = lam**2 * max(float(np.pi * tables.phi_at(alpha)), 1e-3) + eta
    sample, pdf = _cauchy_mixture(alpha, width, 0.0, tables.emax, 0.2)
    s = sample(rng, n)
    f = tables.phi_at(s) / np.abs(alpha - tables.omega_of_energy(s, lam) + 1j * eta) / pdf(s)
    return ProbeResult(float(f.mean()), float(f.std(ddof=1) / np.sqrt(n)), n,
                       {"alpha": alpha, "lam": lam, "eta": eta})


def ladder_integral_probe(alpha: float, beta: float, r, lam: float, eta: float,
                          tables: SpectralTables, n: int = 200_000, seed: int = 0,
                          index: int = 0) -> ProbeResult:
    """``lam^2 int dp / (|alpha - conj omega(p+r) - i eta| |beta - omega(p-r) + i eta|)``.

    Multiple importance sampling: half the points sit near the shell
    ``e(p+r) ~ alpha``, half near ``e(p-r) ~ beta``, combined with the balance
    heuristic using the closed-form surface-sampler density.
    """
    d = tables.d
    r = np.asarray(r, dtype=float)
    rng = stream(seed, "probe_ladder", index)
    props = []
    for c in (alpha, beta):
        width = lam**2 * max(float(np.pi * tables.phi_at(c)), 1e-3) + eta
        props.append(_cauchy_mixture(min(max(c, 0.0), tables.emax), width, 0.0, tables.emax, 0.2))
    m = n // 2
    sa = props[0][0](rng, m)
    ua, _ = surface_proposal(sa, rng, d)
    pa = ua - r
    sb = props[1][0](rng, n - m)
    ub, _ = surface_proposal(sb, rng, d)
    pb = ub + r
    p = np.concatenate([pa, pb])
    p = p - np.floor(p + 0.5)
    dens = 0.5 * surface_density(p + r, props[0][1], d) + 0.5 * surface_density(p - r, props[1][1], d)
    om_a = np.conj(tables.omega(p + r, lam))
    om_b = tables.omega(p - r, lam)
    f = lam**2 / (np.abs(alpha - om_a - 1j * eta) * np.abs(beta - om_b + 1j * eta))
    x = np.where(dens > 0, f / np.where(dens > 0, dens, 1.0), 0.0)
    return ProbeResult(float(x.mean()), float(x.std(ddof=1) / np.sqrt(n)), n,
                       {"alpha": alpha, "beta": beta, "r": r.tolist(), "lam": lam, "eta": eta})
