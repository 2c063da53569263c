"""Numerical laboratory for the weak-disorder Anderson model on Z^3.

Subpackages cover the lattice and dispersion, spectral tables, the linear
Boltzmann jump process, discrete Schrodinger evolution, Wigner transforms,
ladder-diagram integrals and the diffusive comparison against the heat flow.
"""
__version__ = "0.1.0"
