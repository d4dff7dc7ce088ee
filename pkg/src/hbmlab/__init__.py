"""Numerical toolkit for the Hilbert-Brunn-Minkowski operator of convex bodies.

Modules
-------
spherical_basis
    Harmonic bases, quadrature and exact differentiation on S^1 and S^2.
body_geometry
    Support functions, curvature measures, mixed volumes, S_2 isotropization.
hbm_spectrum
    Galerkin discretization and spectrum of the operator -L_K.
inequality_lab
    Both sides of local Brunn-Minkowski type inequalities and their stability forms.
minkowski_solver
    Planar branch classification and Newton solver for h^{1-p} det(D^2 h) = 1.
corpus
    Seeded random body corpora.
"""

from .errors import HBMError

__version__ = "0.1.0"

__all__ = ["HBMError", "__version__"]
