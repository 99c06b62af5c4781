"""Vector fields on R^3 in Hermite coefficient and grid form, and their norms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import hermite_analyze, hermite_synthesize, mode_sum
from .rng import generator

DIV_TOL = 1e-8


class DivergenceError(ValueError):
    """Input field is not (discretely) divergence-free."""


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Velocity field as a (3, N, N, N) array of Hermite coefficients.

    Instances are immutable; arithmetic returns new fields. The
    ``divergence_free`` tag is carried through linear combinations and is
    re-checked numerically by every operator that requires it.
    """

    coeffs: np.ndarray
    space: object
    divergence_free: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64)
        if c.shape != self.space.shape:
            raise ValueError(f"coefficient shape {c.shape} != {self.space.shape}")
        if not np.all(np.isfinite(c)):
            raise FloatingPointError("non-finite Hermite coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, space):
        return cls(np.zeros(space.shape), space, True)

    def _combine(self, other, coeffs):
        if isinstance(other, SpectralField):
            if other.space is not self.space:
                raise ValueError("fields live on different spaces")
            df = self.divergence_free and other.divergence_free
        else:
            df = self.divergence_free
        return SpectralField(coeffs, self.space, df)

    def __add__(self, other):
        return self._combine(other, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self._combine(other, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.coeffs * float(scalar), self.space, self.divergence_free)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __neg__(self):
        return self * -1.0

    def inner(self, other):
        return float(np.vdot(self.coeffs, other.coeffs))

    def norm(self):
        return float(np.linalg.norm(self.coeffs))

    def to_grid(self, basis=None):
        basis = self.space.basis if basis is None else basis
        return GridField(hermite_synthesize(self.coeffs, basis), self.space, basis)


@dataclass(frozen=True, eq=False)
class GridField:
    """Point values of a vector field on the tensor quadrature grid."""

    values: np.ndarray
    space: object
    basis: object = None

    def __post_init__(self):
        if self.basis is None:
            object.__setattr__(self, "basis", self.space.basis)
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("non-finite grid values")

    def to_spectral(self):
        return SpectralField(hermite_analyze(self.values, self.basis), self.space)


def norm_H(u):
    """L2 norm; by Parseval the Euclidean norm of the coefficients."""
    return u.norm()


def divergence(u):
    """Scalar coefficients of d1 u1 + d2 u2 + d3 u3 (truncated recurrences)."""
    return u.space.divergence(u.coeffs)


def divergence_residual(u):
    """||div u|| / ||u|| (0 for the zero field)."""
    n = u.norm()
    d = float(np.linalg.norm(divergence(u)))
    return d / n if n > 0 else d


def require_divergence_free(u, what="operation"):
    r = divergence_residual(u)
    if r > DIV_TOL:
        raise DivergenceError(f"{what} needs a divergence-free field (relative divergence {r:.3e})")
    return u


def norm_V(u, ops=None):
    """||A^{1/2} u||; uses the dense cache when given, else the k-grid route."""
    require_divergence_free(u, "norm_V")
    if ops is not None:
        return float(np.linalg.norm(ops.frac_coords("A", 0.5, ops.coords(u.coeffs))))
    return u.space.stokes_norm(u.coeffs, 0.5)


def norm_A(u):
    """Graph norm ||A u|| (k-grid route)."""
    return u.space.stokes_norm(u.coeffs, 1.0)


def envelope(space, decay_rate):
    return (1.0 + mode_sum(space.n_modes)) ** (-float(decay_rate))


def random_field(seed, space, decay_rate=1.5, divergence_free=True, stream=0):
    """Seeded Gaussian coefficients with envelope (1 + n1 + n2 + n3)^-decay_rate.

    With ``divergence_free`` the Leray projection is applied and the result
    re-verified.
    """
    if decay_rate <= 0:
        raise ValueError("decay_rate must be positive")
    g = generator(seed, stream)
    c = g.standard_normal(space.shape) * envelope(space, decay_rate)
    if divergence_free:
        c = space.leray(c)
        u = SpectralField(c, space, True)
        require_divergence_free(u, "random_field")
        return u
    return SpectralField(c, space, False)
