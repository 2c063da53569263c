"""Lattice Wigner transform on the half-lattice and pairing with phase-space observables.

For ``psi`` supported on a box of ``L`` sites per axis the transform

    W(x, v) = 2^d sum_{y + z = 2x} exp(2 pi i v.(y - z)) conj(psi(y)) psi(z)

lives on ``2L - 1`` half-lattice points per axis and is a trigonometric
polynomial in ``v`` of degree below ``L``. Sampling ``v`` on the grid
``k / 2L`` therefore integrates it exactly, and ``W(x, v + e_a / 2) =
(-1)^(2 x_a) W(x, v)`` means the ``L^d`` values with ``k < L`` per axis
determine the rest. :class:`WignerField` stores those values and expands
them on demand.

Coordinates: site ``j`` of the natural-order box carries coordinate
``j - L/2``, the half-lattice point ``n`` carries ``x = n/2 - L/2``.
"""
from __future__ import annotations

import csv
from functools import lru_cache
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from numpy.lib.stride_tricks import as_strided

from .lattice import POSITION, ComplexField, fourier_inverse


class WignerError(RuntimeError):
    pass


def _natural(psi: ComplexField) -> np.ndarray:
    if psi.representation != POSITION:
        psi = fourier_inverse(psi)
    if psi.grid.d != 3:
        raise WignerError("the Wigner transform is implemented for d = 3")
    if psi.grid.delta != 1.0:
        raise WignerError("the Wigner transform expects a unit-spacing lattice field")
    return np.fft.fftshift(psi.values)


# --------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class Observable:
    """``O(X, v) = G(X) * sum_m c_m exp(2 pi i m.v)``.

    ``G`` is the peak-one Gaussian with the given centre and covariance, or
    the constant 1 when ``cov`` is ``None``.
    """

    center: tuple = (0.0, 0.0, 0.0)
    cov: tuple | None = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    harmonics: tuple = (((0, 0, 0), 1.0),)

    @classmethod
    def gaussian(cls, width, center=(0.0, 0.0, 0.0), harmonics=(((0, 0, 0), 1.0),)):
        w = np.broadcast_to(np.asarray(width, dtype=float), (3,))
        cov = tuple(tuple(float(x) for x in row) for row in np.diag(w**2))
        return cls(tuple(float(c) for c in center), cov, tuple(harmonics))

    @classmethod
    def constant(cls, value: float = 1.0):
        return cls((0.0, 0.0, 0.0), None, (((0, 0, 0), value),))

    @property
    def _cov(self):
        return None if self.cov is None else np.asarray(self.cov, dtype=float)

    def x_part(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.cov is None:
            return np.ones(X.shape[:-1])
        dx = X - np.asarray(self.center)
        q = np.einsum("...i,ij,...j->...", dx, np.linalg.inv(self._cov), dx)
        return np.exp(-0.5 * q)

    def v_part(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape[:-1], dtype=complex)
        for m, c in self.harmonics:
            out = out + c * np.exp(2j * np.pi * (v @ np.asarray(m, dtype=float)))
        return out

    def __call__(self, X, v):
        return self.x_part(X) * self.v_part(v)

    def fourier_x(self, xi) -> np.ndarray:
        """``int dX exp(-2 pi i xi.X) G(X)``."""
        xi = np.asarray(xi, dtype=float)
        if self.cov is None:
            raise WignerError("the constant observable has a delta Fourier transform")
        S = self._cov
        pref = (2 * np.pi) ** 1.5 * np.sqrt(np.linalg.det(S))
        q = np.einsum("...i,ij,...j->...", xi, S, xi)
        return pref * np.exp(-2j * np.pi * (xi @ np.asarray(self.center)) - 2 * np.pi**2 * q)

    def fourier(self, xi, v):
        return self.fourier_x(xi) * self.v_part(v)

    def sample_xi(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draws from the density ``|G_hat(xi)| / int |G_hat|`` (a centred Gaussian)."""
        cov_xi = np.linalg.inv(self._cov) / (4 * np.pi**2)
        return rng.multivariate_normal(np.zeros(3), cov_xi, size=n)

    def fourier_abs_integral(self) -> float:
        """``int sup_v |O_hat(xi, v)| d xi`` upper-bounded by ``sum |c_m|`` (exact int |G_hat| = 1)."""
        return float(sum(abs(c) for _, c in self.harmonics))

    def shell_average_v(self, v_samples) -> complex:
        return complex(np.mean(self.v_part(v_samples)))


# --------------------------------------------------------------------------
# transform


@dataclass
class WignerField:
    """Compact exact storage of ``W(x, v)`` for a box-supported state.

    ``half[n, kappa]`` is ``W(x_n, kappa / 2L)`` for ``kappa`` in ``[0, L)^3``;
    ``psi_hat`` is the zero-padded transform ``psi_hat(k / 2L)`` on ``(2L)^3``.
    """

    L: int
    half: np.ndarray
    psi_hat: np.ndarray

    @property
    def M(self) -> int:
        return 2 * self.L

    def x_coords(self) -> np.ndarray:
        return np.arange(self.M) / 2 - self.L / 2

    def v_coords(self) -> np.ndarray:
        return np.fft.fftfreq(self.M)

    def _signs(self) -> np.ndarray:
        """``s[n, b] = (-1)^(n b)`` per axis."""
        n = np.arange(self.M)
        return np.where((n[:, None] * np.arange(2)[None, :]) % 2 == 0, 1.0, -1.0)

    def values(self) -> np.ndarray:
        """Full real array ``W[n1, n2, n3, k1, k2, k3]`` (``(2L)^6`` entries)."""
        M, L = self.M, self.L
        s = self._signs()
        S = s[:, None, None, :, None, None] * s[None, :, None, None, :, None] * s[None, None, :, None, None, :]
        out = np.empty((M, M, M, 2, L, 2, L, 2, L))
        out[...] = self.half[:, :, :, None, :, None, :, None, :] * S[:, :, :, :, None, :, None, :, None]
        return out.reshape((M,) * 6)

    def fourier(self) -> np.ndarray:
        """``W_hat(xi_j, v_k) = conj(psi_hat(v_k - xi_j / 2)) psi_hat(v_k + xi_j / 2)`` with ``xi_j = j / L``."""
        M = self.M
        j = np.arange(M)
        km = (j[None, :] - j[:, None]) % M  # [j, k] -> k - j
        kp = (j[None, :] + j[:, None]) % M
        a = self.psi_hat
        lo = a[km[:, None, None, :, None, None], km[None, :, None, None, :, None], km[None, None, :, None, None, :]]
        hi = a[kp[:, None, None, :, None, None], kp[None, :, None, None, :, None], kp[None, None, :, None, None, :]]
        return np.conj(lo) * hi

    def v_marginal(self) -> np.ndarray:
        """``int W(x, v) dv`` on the half-lattice, indexed by ``n``."""
        s = self._signs().sum(axis=1) / 2  # 1 for even n, 0 for odd
        mean = self.half.mean(axis=(3, 4, 5))
        return mean * s[:, None, None] * s[None, :, None] * s[None, None, :]

    def _sign_matrix(self) -> np.ndarray:
        """Row ``b`` holds ``prod_a (-1)^(n_a b_a)`` over the half-lattice, ``b`` in ``{0,1}^3``."""
        s = self._signs()
        rows = [(s[:, b1][:, None, None] * s[:, b2][None, :, None] * s[:, b3][None, None, :]).reshape(-1)
                for b1 in range(2) for b2 in range(2) for b3 in range(2)]
        return np.array(rows)

    def x_marginal(self) -> np.ndarray:
        """``2^-3 sum_x W(x, v)`` on the ``(2L)^3`` momentum grid (FFT order)."""
        L = self.L
        flat = self.half.reshape(self.M**3, L**3)
        part = (self._sign_matrix() @ flat / 8).reshape(2, 2, 2, L, L, L)
        return part.transpose(0, 3, 1, 4, 2, 5).reshape(self.M, self.M, self.M)

    def total_mass(self) -> float:
        return float(self.v_marginal().sum() / 8)

    # -- pairing -----------------------------------------------------------
    def _v_contracted(self, obs: Observable) -> np.ndarray:
        """``C[n] = (2L)^-3 sum_k H(v_k) W(x_n, v_k)``."""
        L = self.L
        v = self.v_coords()
        V = np.stack(np.meshgrid(v, v, v, indexing="ij"), axis=-1)
        H = obs.v_part(V).reshape(2, L, 2, L, 2, L)
        s = self._signs()
        flat = self.half.reshape(self.M**3, L**3)
        C = np.zeros((self.M,) * 3, dtype=complex)
        for b1 in range(2):
            for b2 in range(2):
                for b3 in range(2):
                    w = s[:, b1][:, None, None] * s[:, b2][None, :, None] * s[:, b3][None, None, :]
                    hb = H[b1, :, b2, :, b3, :].reshape(-1)
                    C += w * (flat @ hb).reshape(C.shape)
        return C / self.M**3

    def pair(self, obs: Observable, eps: float = 1.0) -> complex:
        """``<O, W^eps> = 2^-d sum_x int dv O(eps x, v) W(x, v)``."""
        x = self.x_coords()
        X = eps * np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
        return complex(np.sum(obs.x_part(X) * self._v_contracted(obs)) / 8)

    def _observable_dft(self, obs: Observable, eps: float):
        """Half-lattice DFT of ``O(eps x, .)`` restricted to the support window, on ``xi_j = j / L``."""
        x = self.x_coords()
        X = eps * np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
        g = obs.x_part(X)
        # g_hat(xi_j) = 2^-3 sum_n exp(-2 pi i xi_j x_n) g(x_n) with x_n = n/2 - L/2
        M, L = self.M, self.L
        ph = np.exp(2j * np.pi * np.arange(M) / L * (L / 2))
        G = sfft.fftn(g) / 8
        return G * ph[:, None, None] * ph[None, :, None] * ph[None, None, :]

    def pair_fourier(self, obs: Observable, eps: float = 1.0) -> complex:
        """Fourier-side pairing ``int d xi int dv conj(O_hat) W_hat`` by grid quadrature."""
        L, M = self.L, self.M
        Gh = self._observable_dft(obs, eps)
        v = self.v_coords()
        V = np.stack(np.meshgrid(v, v, v, indexing="ij"), axis=-1)
        H = obs.v_part(V)
        What = self.fourier()
        inner = np.tensordot(What, H, axes=3) / M**3
        return complex(np.sum(np.conj(Gh) * inner) / L**3)

    def observable_weight(self, obs: Observable, eps: float) -> float:
        """Grid analogue of ``int sup_v |O_hat(xi, v)| d xi``."""
        Gh = self._observable_dft(obs, eps)
        v = self.v_coords()
        V = np.stack(np.meshgrid(v, v, v, indexing="ij"), axis=-1)
        hmax = float(np.max(np.abs(obs.v_part(V))))
        return float(np.sum(np.abs(Gh)) * hmax / self.L**3)

    # -- output ------------------------------------------------------------
    def snapshot(self, eps: float, x_edges, e_edges) -> list[tuple]:
        """Coarse ``(X, e(v))`` histogram of ``W^eps`` with phase-space measure."""
        from .dispersion import energy

        W = self.values()
        x = self.x_coords() * eps
        v = self.v_coords()
        V = np.stack(np.meshgrid(v, v, v, indexing="ij"), axis=-1)
        ne = len(e_edges) - 1
        ev = energy(V).reshape(-1)
        eb = np.digitize(ev, e_edges) - 1
        eb[np.isclose(ev, e_edges[-1])] = ne - 1  # closed top edge
        nx = len(x_edges) - 1
        xb = np.digitize(x, x_edges) - 1
        xb[x == x_edges[-1]] = nx - 1
        # measure: 2^-3 per half-lattice point times (2L)^-3 per momentum cell
        w = W.reshape(self.M**3, self.M**3)
        okv = (eb >= 0) & (eb < ne)
        per_e = np.zeros((self.M**3, ne))
        for b in range(ne):
            per_e[:, b] = w[:, okv & (eb == b)].sum(axis=1)
        per_e = per_e.reshape(self.M, self.M, self.M, ne) / (8 * self.M**3)
        centres = 0.5 * (np.asarray(x_edges)[1:] + np.asarray(x_edges)[:-1])
        ecent = 0.5 * (np.asarray(e_edges)[1:] + np.asarray(e_edges)[:-1])
        rows = []
        for i in range(nx):
            for j in range(nx):
                for k in range(nx):
                    sel = per_e[xb == i][:, xb == j][:, :, xb == k]
                    tot = sel.sum(axis=(0, 1, 2))
                    for b in range(ne):
                        rows.append((centres[i], centres[j], centres[k], ecent[b], float(tot[b])))
        return rows


def write_snapshot_csv(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["X1", "X2", "X3", "ebin", "value"])
        for r in rows:
            w.writerow([repr(float(c)) for c in r])
    return path


@lru_cache(maxsize=4)
def _half_phase(L: int) -> np.ndarray:
    """``8 L^3 exp(-2 pi i (n . k) / 2L)`` for ``n1 < L``, read-only."""
    M = 2 * L
    ph = np.exp(-2j * np.pi * np.outer(np.arange(M), np.arange(L)) / M)
    out = (8.0 * L**3) * (ph[:L, None, None, :, None, None] * ph[None, :, None, None, :, None]
                          * ph[None, None, :, None, None, :])
    out.flags.writeable = False
    return out


def _alternating(L: int) -> np.ndarray:
    return np.where(np.arange(L) % 2 == 0, 1.0, -1.0)


def wigner_transform(psi: ComplexField) -> WignerField:
    """Wigner transform of a box-supported lattice field."""
    p = _natural(psi)
    L = psi.grid.L
    M = 2 * L
    Q = np.zeros((3 * L,) * 3, dtype=complex)
    Q[L:2 * L, L:2 * L, L:2 * L] = p[::-1, ::-1, ::-1]
    s = Q.strides
    # view[n, y] = psi(n - y) (zero outside the box) without copying
    view = as_strided(Q[2 * L - 1:, 2 * L - 1:, 2 * L - 1:], shape=(M, M, M, L, L, L),
                      strides=(-s[0], -s[1], -s[2], s[0], s[1], s[2]), writeable=False)
    cp = np.conj(p)
    # W is real and the phase for n1 + L is the one for n1 times (-1)^k1, so the
    # two slabs n1 < L and n1 >= L share one complex transform as real/imag parts
    Z = view[:L] * cp
    Z += view[L:] * (1j * cp)
    D = sfft.ifftn(Z, axes=(3, 4, 5), overwrite_x=True, workers=-1)
    D *= _half_phase(L)
    half = np.empty((M, M, M, L, L, L))
    half[:L] = D.real
    half[L:] = D.imag * _alternating(L)[:, None, None]
    # psi_hat(k / 2L) = sum_c exp(-2 pi i k c / 2L) psi(c), c = j - L/2
    a = sfft.fftn(p, s=(M, M, M))
    sh = np.exp(1j * np.pi * np.arange(M) / 2)
    a = a * sh[:, None, None] * sh[None, :, None] * sh[None, None, :]
    return WignerField(L, half, a)


def wigner_direct(psi: ComplexField) -> np.ndarray:
    """The defining double sum on the ``(2L)^3 x (2L)^3`` grid; test oracle for ``L <= 8``."""
    p = _natural(psi)
    L = psi.grid.L
    if L > 8:
        raise WignerError("direct Wigner sum refused above L = 8")
    M = 2 * L
    v = np.fft.fftfreq(M)
    c = np.arange(L) - L / 2
    W = np.zeros((M,) * 6, dtype=complex)
    ys = np.stack(np.meshgrid(np.arange(L), np.arange(L), np.arange(L), indexing="ij"), -1).reshape(-1, 3)
    E = np.exp(2j * np.pi * v)  # per-axis base
    for y in ys:
        py = np.conj(p[tuple(y)])
        if py == 0:
            continue
        # every z in the box: n = y + z
        for z in ys:
            amp = py * p[tuple(z)]
            if amp == 0:
                continue
            dyz = c[y] - c[z]
            phase = (E[:, None, None] ** dyz[0]) * (E[None, :, None] ** dyz[1]) * (E[None, None, :] ** dyz[2])
            n = y + z
            W[n[0], n[1], n[2]] += amp * phase
    return 8 * W


@dataclass
class ContinuityGap:
    bound: float
    actual: float
    sharp_bound: float

    @property
    def holds(self) -> bool:
        return self.actual <= self.bound * (1 + 1e-12) + 1e-15


def wigner_continuity_gap(psi1: ComplexField, psi2: ComplexField, obs: Observable,
                          eps: float = 1.0) -> ContinuityGap:
    """Compare ``|<O, W_psi> - <O, W_psi1>|`` for ``psi = psi1 + psi2`` with its quadratic bound.

    ``bound`` is ``A sqrt((|psi1|^2 + |psi2|^2) |psi2|^2)`` and ``sharp_bound`` is the
    elementary Cauchy-Schwarz bound ``A |psi2| (|psi| + |psi1|)``, where ``A`` is
    the grid weight of the observable. Exceeding the sharp bound means a bug.
    """
    n1, n2 = psi1.norm2(), psi2.norm2()
    psi = psi1.with_values(psi1.values + psi2.values)
    w = wigner_transform(psi)
    w1 = wigner_transform(psi1)
    actual = abs(w.pair(obs, eps) - w1.pair(obs, eps))
    A = w.observable_weight(obs, eps)
    bound = A * np.sqrt((n1 + n2) * n2)
    sharp = A * np.sqrt(n2) * (np.sqrt(psi.norm2()) + np.sqrt(n1))
    if actual > sharp * (1 + 1e-9) + 1e-14:
        raise WignerError(f"continuity gap {actual:.3e} exceeds the Cauchy-Schwarz bound {sharp:.3e}")
    return ContinuityGap(float(bound), float(actual), float(sharp))
