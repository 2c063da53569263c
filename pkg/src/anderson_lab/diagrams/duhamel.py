"""Fully expanded Duhamel terms on a small box, for brute-force checks.

``psi_n(t) = (-i)^n int_{simplex} e^{-i s_{n+1} H0} V' ... V' e^{-i s_1 H0} psi_0``
is generated by the nested recursion

    phi_0(s) = e^{-i s H0} psi_0,
    phi_n(s) = -i int_0^s e^{-i (s - u) H0} V' phi_{n-1}(u) du,

with each nesting level integrated by the composite trapezoid rule on a
common time grid (second order). Terms are kept in momentum representation;
the potential acts in position space via FFT.
"""
from __future__ import annotations

import numpy as np

from .. import dispersion as disp
from ..lattice import ComplexField, fourier_forward, fourier_inverse
from ..schrodinger import RandomPotential
from ..spectral import SpectralTables

MAX_ORDER = 3


class DuhamelError(RuntimeError):
    pass


def _symbols(grid, lam, renormalized, tables):
    e = disp.energy(grid.momenta())
    if not renormalized:
        return e.astype(complex), np.zeros_like(e, dtype=complex)
    if tables is None:
        raise DuhamelError("the renormalized split needs spectral tables")
    theta = tables.theta_fast(e)
    return e + lam**2 * theta, lam**2 * theta


def duhamel_terms(psi0: ComplexField, V: RandomPotential, n: int, t: float, steps: int,
                  lam: float, renormalized: bool = False, tables: SpectralTables | None = None,
                  counterterm: bool = True) -> list[ComplexField]:
    """All terms ``psi_0(t) .. psi_n(t)`` in position representation.

    ``renormalized`` uses ``H0 = omega(p)`` and ``V' = lam V - lam^2 theta``;
    ``counterterm=False`` drops the ``theta`` piece of ``V'`` so that the
    terms carry potential labels only (the non-repetition part at order one).
    """
    if n > MAX_ORDER:
        raise DuhamelError(f"order {n} exceeds the brute-force limit {MAX_ORDER}")
    if steps < 1 or t < 0:
        raise DuhamelError("need steps >= 1 and t >= 0")
    grid = psi0.grid
    if grid.L > 16:
        raise DuhamelError("the Duhamel oracle is meant for boxes with L <= 16")
    h = t / steps
    H0, theta = _symbols(grid, lam, renormalized, tables)
    U = np.exp(-1j * h * H0)
    Vx = np.asarray(V.values)
    w_x = grid.position_weight

    def apply_v(f_hat):
        x = np.fft.ifftn(f_hat) / w_x
        out = np.fft.fftn(lam * Vx * x) * w_x
        if renormalized and counterterm:
            out = out - theta * f_hat
        return out

    phi = [fourier_forward(psi0).values.astype(complex)]
    phi += [np.zeros_like(phi[0]) for _ in range(n)]
    vphi = [apply_v(p) for p in phi[:n]]
    for _ in range(steps):
        new = [U * phi[0]]
        new_v = [apply_v(new[0])] if n else []
        for m in range(1, n + 1):
            nxt = U * phi[m] - 0.5j * h * (U * vphi[m - 1] + new_v[m - 1])
            new.append(nxt)
            if m < n:
                new_v.append(apply_v(nxt))
        phi, vphi = new, new_v
    return [fourier_inverse(ComplexField(grid, p, "momentum")) for p in phi]


def duhamel_term(psi0: ComplexField, V: RandomPotential, n: int, t: float, steps: int,
                 lam: float, **kw) -> ComplexField:
    return duhamel_terms(psi0, V, n, t, steps, lam, **kw)[n]


def duhamel_checked(psi0, V, n, t, steps, lam, rtol=1e-3, **kw) -> ComplexField:
    """``duhamel_term`` with a step-halving check; raises when the two grids disagree."""
    a = duhamel_term(psi0, V, n, t, steps, lam, **kw)
    b = duhamel_term(psi0, V, n, t, 2 * steps, lam, **kw)
    diff = np.sqrt(a.with_values(a.values - b.values).norm2())
    size = np.sqrt(b.norm2())
    if diff > rtol * max(size, 1e-300):
        raise DuhamelError(f"step halving changed order-{n} term by {diff / size:.2e} (relative)")
    return b


def box_first_order_mean(psi0: ComplexField, t: float, lam: float, tables: SpectralTables,
                         renormalized: bool = True) -> float:
    """Exact disorder mean of ``||psi_1(t)||^2`` on the box for unit-variance site potentials.

    ``lam^2 L^-3 sum_q |psi_hat_0(q)|^2 L^-3 sum_p |e^{-i t w(q)} - e^{-i t w(p)}|^2 / |w(q) - w(p)|^2``
    with ``w = omega`` (renormalized) or ``e``.
    """
    grid = psi0.grid
    e = disp.energy(grid.momenta()).ravel()
    w = tables.omega_of_energy(e, lam) if renormalized else e.astype(complex)
    a = np.abs(fourier_forward(psi0).values.ravel()) ** 2
    N = grid.n_sites
    diff = w[:, None] - w[None, :]
    ex = np.exp(-1j * t * w)
    num = ex[:, None] - ex[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ker = np.abs(num / diff) ** 2
    # coincident frequencies: |d/dw e^{-i t w}|^2 = t^2 e^{2 t Im w}
    close = np.abs(diff) < 1e-10
    ker[close] = (t**2 * np.exp(2 * t * w.imag))[np.nonzero(close)[0]]
    return float(lam**2 * np.sum(a[:, None] * ker) / N**2)
