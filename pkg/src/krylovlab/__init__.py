"""Krylov solvability of linear inverse problems in Hilbert space: operators,
subspaces, solvers, truncations, subspace gaps and perturbation checks."""

__version__ = "0.1.0"
