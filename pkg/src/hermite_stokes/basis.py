"""Hermite function basis on the real line and its tensor product on R^3.

The 1D functions are the L2-normalised Hermite functions

    h_n(x) = (2^n n! sqrt(pi))^{-1/2} H_n(x) exp(-x^2/2),

which are eigenfunctions of the oscillator 1/2(-d^2/dx^2 + x^2) with
eigenvalue n + 1/2 and of the unitary Fourier transform with eigenvalue
i^n (kernel exp(+i x y), no 2*pi factors).

Three-dimensional arrays are always indexed ``(..., n1, n2, n3)``; the
separable transforms act on the last three axes so that leading axes (velocity
component, batch) broadcast for free.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import kernels

__all__ = [
    "BasisTable",
    "ProductGrid",
    "build_basis",
    "build_product_grid",
    "gauss_hermite",
    "hermite_functions",
    "hermite_analyze",
    "hermite_synthesize",
    "fourier_diagonal",
    "derivative_matrix",
    "position_matrix",
    "apply_1d_recurrences",
    "apply_along_axes",
    "mode_sum",
]


def hermite_functions(n_modes, x):
    """Values ``h_n(x)`` for ``n < n_modes`` as an array of shape (n_modes, len(x)).

    Uses the three-term recurrence on the normalised functions themselves,
    so neither H_n nor exp(-x^2/2) is ever formed separately.
    """
    return kernels.hermite_values(int(n_modes), np.ascontiguousarray(x, dtype=np.float64))


def gauss_hermite(n):
    """Golub-Welsch nodes/weights for the weight exp(-x^2) on R.

    Returns ``(nodes, weights, scaled_weights)`` where ``scaled_weights`` are
    ``weights * exp(nodes**2)``, obtained from the Christoffel function so they
    never overflow.
    """
    if n < 1:
        raise ValueError("need at least one quadrature node")
    off = np.sqrt(np.arange(1, n) / 2.0)
    nodes, vecs = eigh_tridiagonal(np.zeros(n), off)
    # exact symmetry about the origin
    nodes = 0.5 * (nodes - nodes[::-1])
    if n % 2:
        nodes[n // 2] = 0.0
    h = hermite_functions(n, nodes)
    scaled = 1.0 / np.sum(h * h, axis=0)
    scaled = 0.5 * (scaled + scaled[::-1])
    weights = scaled * np.exp(-nodes**2)
    del vecs
    return nodes, weights, scaled


@dataclass(frozen=True, eq=False)
class BasisTable:
    """Tabulated 1D Hermite data shared by every 3D operation.

    ``values[n, j] = h_n(nodes[j])``; ``analysis[n, j] = values[n, j] *
    scaled_weights[j]`` so that ``analysis @ values.T`` is the identity on
    coefficient space when ``n_quad >= n_modes``.
    """

    n_modes: int
    n_quad: int
    nodes: np.ndarray
    weights: np.ndarray
    scaled_weights: np.ndarray
    values: np.ndarray
    eigs_1d: np.ndarray
    scale: float = 1.0
    analysis: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        for name in ("nodes", "weights", "scaled_weights", "values", "eigs_1d"):
            getattr(self, name).setflags(write=False)
        if self.analysis is None:
            an = np.ascontiguousarray(self.values * self.scaled_weights[None, :])
            an.setflags(write=False)
            object.__setattr__(self, "analysis", an)

    @property
    def shape(self):
        n = self.n_modes
        return (n, n, n)

    @property
    def grid_shape(self):
        q = self.n_quad
        return (q, q, q)

    def gram(self):
        """Discrete Gram matrix of the 1D functions (identity when exact)."""
        return self.analysis @ self.values.T

    def key(self):
        return (self.n_modes, self.n_quad, self.scale)


def build_basis(n_modes, n_quad=None, scale=1.0):
    """Tabulate Hermite functions at the ``n_quad`` Gauss-Hermite nodes.

    ``n_quad`` defaults to ceil(3 n_modes / 2). ``scale`` dilates the physical
    coordinate (x -> x / scale); the operators in this package use 1.
    """
    n_modes = int(n_modes)
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    if n_quad is None:
        n_quad = -(-3 * n_modes // 2)
    n_quad = int(n_quad)
    if n_quad < n_modes:
        raise ValueError(
            f"n_quad={n_quad} < n_modes={n_modes}: the discrete transform would alias"
        )
    nodes, weights, scaled = gauss_hermite(n_quad)
    values = hermite_functions(n_modes, nodes)
    if scale != 1.0:
        nodes = nodes * scale
        values = values / math.sqrt(scale)
        weights = weights * scale
        scaled = scaled * scale
    eigs = np.arange(n_modes, dtype=np.float64) + 0.5
    return BasisTable(n_modes, n_quad, nodes, weights, scaled, values, eigs, float(scale))


@dataclass(frozen=True, eq=False)
class ProductGrid:
    """Quadrature grid that integrates triple products of basis functions exactly.

    A product of three functions from span{h_0..h_{N-1}} is a polynomial of
    degree <= 3N-3 times exp(-3x^2/2); substituting y = sqrt(3/2) x turns that
    into a Gauss-Hermite integral, exact with ceil(3N/2) nodes.
    """

    n_modes: int
    n_quad: int
    nodes: np.ndarray
    scaled_weights: np.ndarray
    values: np.ndarray
    analysis: np.ndarray


def build_product_grid(n_modes, n_quad=None):
    n_modes = int(n_modes)
    if n_quad is None:
        n_quad = -(-3 * n_modes // 2)
    if 2 * n_quad - 1 < 3 * n_modes - 3:
        raise ValueError(
            f"n_quad={n_quad} too small for exact triple products of {n_modes} modes"
        )
    y, _, scaled = gauss_hermite(n_quad)
    s = math.sqrt(1.5)
    nodes = y / s
    sw = scaled / s
    values = hermite_functions(n_modes, nodes)
    analysis = np.ascontiguousarray(values * sw[None, :])
    for arr in (nodes, sw, values, analysis):
        arr.setflags(write=False)
    return ProductGrid(n_modes, int(n_quad), nodes, sw, values, analysis)


def apply_along_axes(mat, arr):
    """Apply the matrix ``mat`` (m x n) along each of the last three axes of ``arr``.

    Three batched GEMMs; leading axes are treated as a batch.
    """
    mat = np.asarray(mat)
    a, b, c = arr.shape[-3:]
    lead = arr.shape[:-3]
    m = mat.shape[0]
    out = arr @ mat.T  # axis -1
    out = np.matmul(mat, out)  # axis -2
    out = out.reshape(lead + (a, m * m))
    out = np.matmul(mat, out)  # axis -3
    return out.reshape(lead + (m, m, m))


def _check_trailing(arr, shape, what):
    if arr.shape[-3:] != tuple(shape):
        raise ValueError(f"{what}: trailing shape {arr.shape[-3:]} != expected {tuple(shape)}")


def hermite_analyze(grid_values, basis):
    """Hermite coefficients <f, h_n1 h_n2 h_n3> from samples at the tensor nodes."""
    grid_values = np.asarray(grid_values)
    _check_trailing(grid_values, (basis.n_quad,) * 3, "hermite_analyze")
    return apply_along_axes(basis.analysis, grid_values)


def hermite_synthesize(coeffs, basis):
    """Field values at the tensor nodes from Hermite coefficients."""
    coeffs = np.asarray(coeffs)
    _check_trailing(coeffs, (basis.n_modes,) * 3, "hermite_synthesize")
    return apply_along_axes(basis.values.T, coeffs)


def mode_sum(n_modes):
    """Array ``n1 + n2 + n3`` of shape (N, N, N)."""
    n = np.arange(n_modes)
    return n[:, None, None] + n[None, :, None] + n[None, None, :]


_I_POWERS = np.array([1, 1j, -1, -1j])


def fourier_diagonal(coeffs, inverse=False):
    """Fourier transform in coefficient space: multiply mode (n1,n2,n3) by i^(n1+n2+n3).

    With ``inverse=True`` the conjugate phase is used.
    """
    coeffs = np.asarray(coeffs)
    n = coeffs.shape[-1]
    phase = _I_POWERS[mode_sum(n) % 4]
    if inverse:
        phase = phase.conj()
    return coeffs * phase


def derivative_matrix(n_modes):
    """Truncated matrix of d/dx on span{h_0..h_{N-1}}: h_n' = sqrt(n/2) h_{n-1} - sqrt((n+1)/2) h_{n+1}."""
    d = np.zeros((n_modes, n_modes))
    k = np.arange(1, n_modes)
    r = np.sqrt(k / 2.0)
    d[k - 1, k] = r
    d[k, k - 1] = -r
    return d


def position_matrix(n_modes):
    """Truncated matrix of multiplication by x (the Jacobi matrix)."""
    x = np.zeros((n_modes, n_modes))
    k = np.arange(1, n_modes)
    r = np.sqrt(k / 2.0)
    x[k - 1, k] = r
    x[k, k - 1] = r
    return x


def apply_1d_recurrences(coeffs, which, axis):
    """Apply d/dx_axis or x_axis in coefficient space.

    ``axis`` is 0, 1 or 2 and refers to the last three axes of ``coeffs``.
    The outflow into mode N (from mode N-1) is dropped.
    """
    coeffs = np.asarray(coeffs)
    n = coeffs.shape[-1]
    if which == "derivative":
        mat = derivative_matrix(n)
    elif which == "position":
        mat = position_matrix(n)
    else:
        raise ValueError(f"unknown recurrence {which!r}")
    ax = coeffs.ndim - 3 + axis
    moved = np.moveaxis(coeffs, ax, -1)
    out = moved @ mat.T
    return np.moveaxis(out, -1, ax)
