"""The contour integral ``(2 pi)^-1 int e^{i alpha t} prod_j (alpha - z_j)^-1 d alpha``.

For ``t > 0`` and every ``Im z_j > 0`` closing the contour in the upper half
plane gives ``i * f[z_0, ..., z_k]``, the divided difference of
``f(z) = exp(i t z)``. Well separated nodes use the residue sum; clustered
nodes, where the residues cancel catastrophically, use the Opitz identity
``f(J)[0, k] = f[z_0, ..., z_k]`` for the bidiagonal matrix ``J`` with the
nodes on the diagonal and ones above it.
"""
from __future__ import annotations

import numpy as np
from scipy import integrate

CANCELLATION_LIMIT = 1e6


def _residue_sum(z: np.ndarray, t: float):
    m = z.shape[-1]
    diff = z[..., :, None] - z[..., None, :]
    idx = np.arange(m)
    diff[..., idx, idx] = 1.0
    denom = np.prod(diff, axis=-1)
    # coincident nodes give inf/nan here; the caller falls back to expm
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = np.exp(1j * t * z) / denom
        total = terms.sum(axis=-1)
        ratio = np.sum(np.abs(terms), axis=-1) / np.abs(total)
    return total, ratio


def _opitz(z: np.ndarray, t: float) -> np.ndarray:
    """``expm(J)[0, k]`` by Taylor series plus squaring.

    scipy's ``expm`` recomputes the superdiagonal of triangular input with a
    closed form that loses about six digits on nearly equal nodes, so the
    bidiagonal exponential is done here directly.
    """
    m = z.shape[-1]
    c = z.mean(axis=-1)
    J = np.zeros(z.shape + (m,), dtype=complex)
    idx = np.arange(m)
    J[..., idx, idx] = 1j * t * (z - c[..., None])
    J[..., idx[:-1], idx[1:]] = 1j * t
    norm = np.abs(J).sum(axis=-2).max(axis=-1)
    s = np.maximum(0, np.ceil(np.log2(np.maximum(norm, 1e-300)) + 1)).astype(int)
    A = J / (2.0 ** s)[..., None, None]
    E = np.broadcast_to(np.eye(m, dtype=complex), J.shape).copy()
    term = E.copy()
    for n in range(1, 40):
        term = term @ A / n
        E = E + term
    for i in range(int(s.max(initial=0))):
        sq = s > i
        E[sq] = E[sq] @ E[sq]
    return np.exp(1j * t * c) * E[..., 0, m - 1]


def exp_divided_difference(z, t: float) -> np.ndarray:
    """``f[z_0..z_k]`` for ``f(z) = exp(i t z)``; the last axis of ``z`` indexes the nodes."""
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] == 1:
        return np.exp(1j * t * z[..., 0])
    if t == 0:
        raise ValueError("t must be positive")
    total, ratio = _residue_sum(z, t)
    bad = ~np.isfinite(ratio) | (ratio > CANCELLATION_LIMIT) | ~np.isfinite(total)
    if np.any(bad):
        total = np.array(total, copy=True)
        total[bad] = _opitz(z[bad], t)
    return total


def residue_kernel(z, t: float) -> np.ndarray:
    """``K(t, z) = i sum_j exp(i t z_j) prod_{l != j} (z_j - z_l)^-1`` with confluent fallback."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag < 0):
        raise ValueError("all poles must lie in the closed upper half plane")
    return 1j * exp_divided_difference(z, t)


def kernel_nodes(omega_values, eta: float) -> np.ndarray:
    """Poles ``conj(omega(p_j)) + i eta`` of the ``alpha`` integral."""
    return np.conj(np.asarray(omega_values, dtype=complex)) + 1j * eta


def weighted_kernel_sq(omega_values, t: float, eta: float = 0.0) -> np.ndarray:
    """``exp(2 t eta) |K(t, p)|^2``, which does not depend on ``eta``."""
    K = residue_kernel(kernel_nodes(omega_values, eta), t)
    return np.exp(2 * t * eta) * np.abs(K) ** 2


def kernel_by_quadrature(z, t: float, cutoff: float = 50.0) -> complex:
    """Direct ``alpha`` quadrature: ``[-cutoff, cutoff]`` plus Fourier-weighted tails.

    Test oracle only; the oscillatory tails use QUADPACK's Fourier-integral rules.
    """
    z = np.asarray(z, dtype=complex)

    def g(a):
        return 1.0 / np.prod(a - z)

    def part(fn, lo, hi, weight):
        kw = dict(weight=weight, wvar=t, limit=400)
        return integrate.quad(fn, lo, hi, **kw)[0]

    gr = lambda a: g(a).real  # noqa: E731
    gi = lambda a: g(a).imag  # noqa: E731
    body = (part(gr, -cutoff, cutoff, "cos") - part(gi, -cutoff, cutoff, "sin")
            + 1j * (part(gr, -cutoff, cutoff, "sin") + part(gi, -cutoff, cutoff, "cos")))
    # tails: alpha > cutoff directly; alpha < -cutoff after alpha -> -alpha
    grm = lambda a: g(-a).real  # noqa: E731
    gim = lambda a: g(-a).imag  # noqa: E731
    tail = (part(gr, cutoff, np.inf, "cos") - part(gi, cutoff, np.inf, "sin")
            + 1j * (part(gr, cutoff, np.inf, "sin") + part(gi, cutoff, np.inf, "cos")))
    tail += (part(grm, cutoff, np.inf, "cos") + part(gim, cutoff, np.inf, "sin")
             + 1j * (-part(grm, cutoff, np.inf, "sin") + part(gim, cutoff, np.inf, "cos")))
    return complex((body + tail) / (2 * np.pi))
