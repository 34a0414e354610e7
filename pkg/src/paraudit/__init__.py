"""Numerical audit of a log-free bilinear estimate for the diagonal paraproduct.

Modules: spectral (fields on the torus), dyadic (frequency and angular
projections), phase (resonance geometry), window (time windows and kernels),
paraproduct (measured experiments), ledger (exact exponent bookkeeping),
harness and cli (sweeps and the command line).
"""

__version__ = "0.1.0"
