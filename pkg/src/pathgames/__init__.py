"""Numerical toolkit for path-dependent PDEs and zero-sum path-dependent games.

Modules
-------
path_space            discretized stopped paths, sup norm, d_inf metric, flat extension
gauge                 smooth gauge functionals and their pathwise derivatives
functional_calculus   pathwise (Dupire) derivatives and the functional Itô residual
variational           certified gauge-perturbed maximization on finite path domains
dynamics              Euler-Maruyama simulation of controlled path-dependent SDEs
bsde                  least-squares Monte Carlo BSDE solver and backward semigroup
game                  Hamiltonians, Isaacs checks and DPP-based game values
viscosity             residual, consistency, comparison and stability harnesses
catalog               built-in test problems with known oracles
cli                   scenario runner
"""
__version__ = "0.1.0"

from .path_space import Grid, Path, PathError, dist_dinfty, flat_extend, sup_norm  # noqa: E402

__all__ = ["Grid", "Path", "PathError", "dist_dinfty", "flat_extend", "sup_norm", "__version__"]
