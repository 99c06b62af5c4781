"""Hermite-function spectral toolkit for the Stokes and Hermite-Stokes operators on R^3.

Submodules: ``basis`` (1D Hermite functions, quadrature, transforms),
``field``, ``operators``, ``estimates``, ``dissipativity``, ``evolution``
and ``cli``. The pointwise kernels come from a compiled extension when it
is built and fall back to numpy otherwise (``kernels.BACKEND``).
"""
__version__ = "0.1.0"

from .basis import BasisTable, build_basis, fourier_diagonal, hermite_analyze, hermite_synthesize
from .field import GridField, SpectralField, norm_H, norm_V, random_field
from .operators import OperatorCache, apply_A, apply_B, apply_frac, get_cache, leray_project, nonlinear_C
from .space import HermiteSpace, get_space

__all__ = [
    "BasisTable", "build_basis", "fourier_diagonal", "hermite_analyze", "hermite_synthesize",
    "GridField", "SpectralField", "norm_H", "norm_V", "random_field",
    "OperatorCache", "apply_A", "apply_B", "apply_frac", "get_cache", "leray_project", "nonlinear_C",
    "HermiteSpace", "get_space",
]
