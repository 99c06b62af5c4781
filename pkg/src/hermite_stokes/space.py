"""Pseudo-spectral machinery on truncated Hermite coefficient arrays.

Everything here works on raw arrays of shape ``(..., 3, N, N, N)`` (vector
fields) or ``(..., N, N, N)`` (scalars). Two grids are used:

* the *collocation* grid: N Gauss-Hermite nodes per axis. The discrete
  transform on it is unitary, and its nodes are exactly the eigenvalues of
  the truncated position matrix, so pointwise multipliers in k-space
  (Leray symbol, |k|^2, heat kernel) are exact operators on coefficient
  space and the discrete divergence vanishes identically on the range of
  the projection;
* the *product* grid: ceil(3N/2) nodes scaled for weight exp(-3x^2/2), which
  integrates triple products of basis functions exactly (dealiasing).
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .basis import (
    apply_along_axes,
    build_basis,
    build_product_grid,
    derivative_matrix,
    fourier_diagonal,
    mode_sum,
    position_matrix,
)

_SPACES = {}


class HermiteSpace:
    """Truncated tensor Hermite space with ``n_modes`` modes per axis."""

    def __init__(self, n_modes, n_quad=None):
        n_modes = int(n_modes)
        if n_modes < 2:
            raise ValueError("need n_modes >= 2 for a nontrivial vector field space")
        self.n_modes = n_modes
        self.basis = build_basis(n_modes, n_quad)
        self.n_quad = self.basis.n_quad
        self.coll = build_basis(n_modes, n_modes)
        self.product = build_product_grid(n_modes, self.n_quad)
        self.D = derivative_matrix(n_modes)
        self.X = position_matrix(n_modes)
        k = self.coll.nodes
        self.ksq = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
        self.osc = mode_sum(n_modes) + 1.5
        self.shape = (3, n_modes, n_modes, n_modes)
        self.size = 3 * n_modes**3

    def __repr__(self):
        return f"HermiteSpace(n_modes={self.n_modes}, n_quad={self.n_quad})"

    @property
    def key(self):
        return (self.n_modes, self.n_quad)

    # -- k-grid (collocation) transforms -------------------------------------
    def to_kgrid(self, c):
        """Fourier transform then sample on the collocation k-grid (complex)."""
        return apply_along_axes(self.coll.values.T, fourier_diagonal(c))

    def from_kgrid(self, g, real=True):
        out = fourier_diagonal(apply_along_axes(self.coll.analysis, g), inverse=True)
        return out.real.copy() if real else out

    def kgrid_weights(self):
        w = self.coll.scaled_weights
        return w[:, None, None] * w[None, :, None] * w[None, None, :]

    # -- linear operators ------------------------------------------------------
    def leray(self, c):
        """Leray projection: I - k k^T/|k|^2 applied on the k-grid."""
        return self.from_kgrid(kernels.leray_pointwise(self.to_kgrid(c), self.coll.nodes))

    def leray_fourier_side(self, g_coeffs):
        """Leray symbol applied to Fourier-side coefficients (no transform conjugation)."""
        grid = apply_along_axes(self.coll.values.T, g_coeffs)
        grid = kernels.leray_pointwise(grid, self.coll.nodes)
        return apply_along_axes(self.coll.analysis, grid)

    def stokes(self, c):
        """A c = -P Lap c via the |k|^2 multiplier."""
        g = self.to_kgrid(c) * self.ksq
        return self.from_kgrid(kernels.leray_pointwise(g, self.coll.nodes))

    def stokes_power(self, c, s):
        """A^s c through the k-grid for s >= 0 (exact on the divergence-free subspace)."""
        if s < 0:
            raise ValueError("negative powers need the dense cache (A has a k=0 node)")
        g = self.to_kgrid(c) * self.ksq**s
        return self.from_kgrid(kernels.leray_pointwise(g, self.coll.nodes))

    def heat(self, c, t, nu):
        """exp(-nu t A) c via the pointwise heat multiplier."""
        g = self.to_kgrid(c) * np.exp(-nu * t * self.ksq)
        return self.from_kgrid(kernels.leray_pointwise(g, self.coll.nodes))

    def resolvent(self, c, t, nu):
        """(I + nu t A)^{-1} c, the implicit Euler diffusion step."""
        g = self.to_kgrid(c) / (1.0 + nu * t * self.ksq)
        return self.from_kgrid(kernels.leray_pointwise(g, self.coll.nodes))

    def oscillator(self, c):
        """Component-wise 1/2(-Lap + |x|^2), diagonal in the Hermite basis."""
        return c * self.osc

    def hermite_stokes(self, c):
        """B c = P 1/2(-Lap + |x|^2) c."""
        return self.leray(self.oscillator(c))

    def laplacian_recurrence(self, c):
        """Componentwise Lap c built from the truncated derivative recurrences."""
        d2 = self.D @ self.D
        return apply_axis(d2, c, 0) + apply_axis(d2, c, 1) + apply_axis(d2, c, 2)

    def position_sq_recurrence(self, c):
        """Componentwise |x|^2 c from the truncated position recurrences."""
        x2 = self.X @ self.X
        return apply_axis(x2, c, 0) + apply_axis(x2, c, 1) + apply_axis(x2, c, 2)

    # -- differential operators -------------------------------------------------
    def grad(self, c):
        """``out[..., j, i, :, :, :] = d_j c_i`` for vector fields of shape (..., 3, N, N, N)."""
        return np.stack([apply_axis(self.D, c, j) for j in range(3)], axis=-5)

    def divergence(self, c):
        return (apply_axis(self.D, c[..., 0, :, :, :], 0)
                + apply_axis(self.D, c[..., 1, :, :, :], 1)
                + apply_axis(self.D, c[..., 2, :, :, :], 2))

    def gradient_scalar(self, q):
        return np.stack([apply_axis(self.D, q, j) for j in range(3)], axis=-4)

    # -- nonlinear term ---------------------------------------------------------
    def nonlinear(self, u, v, form="skew", project=True):
        """P of the advection of ``v`` by ``u`` (single fields, shape (3, N, N, N)).

        ``form="skew"`` evaluates 1/2[(u.grad)v + div(u (x) v)], whose Galerkin
        trilinear form is exactly antisymmetric in its last two slots;
        ``form="advective"`` evaluates (u.grad)v alone. Both coincide for
        exactly divergence-free continuum fields.
        """
        pg = self.product
        q = pg.n_quad
        syn = pg.values.T
        dv = self.grad(v)  # (j, i, N, N, N)
        ug = apply_along_axes(syn, u).reshape(3, -1)
        gg = apply_along_axes(syn, dv).reshape(3, 3, -1)
        vg = apply_along_axes(syn, v).reshape(3, -1)
        adv, flux = kernels.advect_products(ug, gg, vg)
        adv_c = apply_along_axes(pg.analysis, adv.reshape(3, q, q, q))
        if form == "advective":
            out = adv_c
        elif form == "skew":
            flux_c = apply_along_axes(pg.analysis, flux.reshape(3, 3, q, q, q))
            div_flux = sum(apply_axis(self.D, flux_c[j], j) for j in range(3))
            out = 0.5 * (adv_c + div_flux)
        else:
            raise ValueError(f"unknown form {form!r}")
        return self.leray(out) if project else out

    # -- norms --------------------------------------------------------------------
    def stokes_norm(self, c, s):
        """||A^s c|| for a divergence-free field, from the k-grid (s >= 0)."""
        g = self.to_kgrid(c)
        w = self.kgrid_weights()
        amp = np.sum(np.abs(g) ** 2, axis=-4) * w * self.ksq ** (2 * s)
        return float(np.sqrt(amp.sum()))


def apply_axis(mat, arr, axis):
    """Apply ``mat`` along axis 0/1/2 of the trailing three axes."""
    ax = arr.ndim - 3 + axis
    moved = np.moveaxis(arr, ax, -1)
    return np.moveaxis(moved @ mat.T, -1, ax)


def get_space(n_modes, n_quad=None):
    """Shared (cached) space for a given truncation."""
    key = (int(n_modes), None if n_quad is None else int(n_quad))
    sp = _SPACES.get(key)
    if sp is None:
        sp = _SPACES[key] = HermiteSpace(n_modes, n_quad)
    return sp
