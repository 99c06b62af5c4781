"""Leray projection, Stokes operator A, Hermite-Stokes operator B, fractional
powers of A, B and AB, and the nonlinear term C(u, v) = P (u.grad) v.

Two independent routes exist for the linear operators:

* pseudo-spectral (``leray_project``, ``apply_A``, ``apply_B``) through the
  k-grid, see :mod:`hermite_stokes.space`;
* dense Galerkin matrices on an explicit orthonormal basis of the discrete
  divergence-free subspace (:class:`OperatorCache`), assembled from the
  derivative recurrences and the diagonal oscillator.

Fractional powers always go through the cache. AB is not symmetric; its
powers are defined through the similarity AB = A^{1/2} (A^{1/2} B A^{1/2}) A^{-1/2}.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .container import read_container, write_container
from .field import SpectralField, random_field, require_divergence_free
from .space import HermiteSpace

log = logging.getLogger(__name__)

RANK_TOL = 1e-10


def leray_project(u):
    return SpectralField(u.space.leray(u.coeffs), u.space, True)


def apply_A(u):
    require_divergence_free(u, "apply_A")
    return SpectralField(u.space.stokes(u.coeffs), u.space, True)


def apply_B(u):
    require_divergence_free(u, "apply_B")
    return SpectralField(u.space.hermite_stokes(u.coeffs), u.space, True)


def nonlinear_C(u, v, form="skew"):
    """C(u, v) = P (u.grad) v, evaluated in skew-symmetric form by default."""
    require_divergence_free(u, "nonlinear_C")
    return SpectralField(u.space.nonlinear(u.coeffs, v.coeffs, form=form), u.space, True)


def apply_frac(op, exponent, u, cache):
    """op^exponent u for op in {"A", "B", "AB"} via the cached eigendecompositions."""
    require_divergence_free(u, "apply_frac")
    y = cache.frac_coords(op, exponent, cache.coords(u.coeffs))
    return SpectralField(cache.field(y), u.space, True)


@dataclass(eq=False)
class Eig:
    values: np.ndarray
    vectors: np.ndarray


@dataclass(eq=False)
class OperatorCache:
    """Dense Galerkin data on the truncated divergence-free subspace.

    Immutable after construction apart from an internal memo of fractional
    power matrices.
    """

    space: HermiteSpace
    P_basis: np.ndarray
    A_df: np.ndarray
    B_df: np.ndarray
    eig_A: Eig
    eig_B: Eig
    eig_AB_sym: Eig
    _memo: dict = field(default_factory=dict, repr=False)

    @property
    def d_df(self):
        return self.P_basis.shape[1]

    @property
    def lambda1_B(self):
        return float(self.eig_B.values[0])

    @property
    def muN_A(self):
        return float(self.eig_A.values[0])

    # -- coordinates ---------------------------------------------------------------
    def coords(self, c):
        c = np.asarray(c)
        lead = c.shape[:-4]
        return c.reshape(lead + (self.space.size,)) @ self.P_basis

    def field(self, y):
        y = np.asarray(y)
        lead = y.shape[:-1]
        return (y @ self.P_basis.T).reshape(lead + self.space.shape)

    def to_field(self, y):
        return SpectralField(self.field(y), self.space, True)

    # -- matrix functions ---------------------------------------------------------
    def frac_matrix(self, op, s):
        """Matrix of op^s in subspace coordinates (memoised)."""
        key = (op, float(s))
        m = self._memo.get(key)
        if m is not None:
            return m
        if s == 0:
            m = np.eye(self.d_df)
        elif op in ("A", "B"):
            e = self.eig_A if op == "A" else self.eig_B
            m = (e.vectors * e.values**s) @ e.vectors.T
        elif op == "AB":
            e = self.eig_AB_sym
            inner = (e.vectors * e.values**s) @ e.vectors.T
            m = self.frac_matrix("A", 0.5) @ inner @ self.frac_matrix("A", -0.5)
        else:
            raise ValueError(f"unknown operator {op!r}")
        if not np.all(np.isfinite(m)):
            raise FloatingPointError(f"non-finite {op}^{s}")
        m.setflags(write=False)
        self._memo[key] = m
        return m

    def frac_coords(self, op, s, y):
        """Apply op^s to coordinate vectors ``y`` (..., d_df)."""
        return y @ self.frac_matrix(op, s).T

    def apply(self, op, s, c):
        """op^s on raw coefficient arrays (..., 3, N, N, N)."""
        return self.field(self.frac_coords(op, s, self.coords(c)))

    def op_norm(self, op, s):
        """Operator 2-norm of op^s (largest singular value)."""
        return float(sla.norm(self.frac_matrix(op, s), 2))

    def a_constant(self, delta):
        """a with a^{-(1+delta)} = ||(AB)^{-(1+delta)}||."""
        key = ("a", float(delta))
        if key not in self._memo:
            self._memo[key] = self.op_norm("AB", -(1.0 + delta)) ** (-1.0 / (1.0 + delta))
        return self._memo[key]

    def eigenspace_probe(self, op="B", which="lowest", tol=1e-8):
        """Unit coefficient array in the lowest/highest eigenspace of A or B.

        The extreme eigenvalues are degenerate, so a fixed reference field is
        projected onto the whole eigenspace; the result does not depend on the
        eigenvector basis returned by the solver.
        """
        e = self.eig_B if op == "B" else self.eig_A
        target = e.values[0] if which == "lowest" else e.values[-1]
        V = e.vectors[:, np.abs(e.values - target) <= tol * abs(target)]
        ref = self.coords(random_field(0, self.space, 1.0, divergence_free=True).coeffs)
        y = V @ (V.T @ ref)
        return self.field(y / np.linalg.norm(y))

    def lowest_B_vector(self):
        return self.to_field(self.coords(self.eigenspace_probe("B")))

    def lowest_A_vector(self):
        return self.to_field(self.coords(self.eigenspace_probe("A")))

    def summary(self, delta=None):
        out = {
            "n_modes": self.space.n_modes,
            "n_quad": self.space.n_quad,
            "d_df": self.d_df,
            "lambda1_B": self.lambda1_B,
            "muN_A": self.muN_A,
        }
        if delta is not None:
            out["delta"] = float(delta)
            out["a"] = self.a_constant(delta)
        return out


def projector_matrix(space, chunk=512):
    """Dense matrix of the pseudo-spectral Leray projection on coefficient space."""
    n = space.size
    P = np.empty((n, n))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        E = np.zeros((stop - start, n))
        E[np.arange(stop - start), np.arange(start, stop)] = 1.0
        P[:, start:stop] = space.leray(E.reshape((-1,) + space.shape)).reshape(-1, n).T
    return P


def divergence_free_basis(space, rank_tol=RANK_TOL):
    """Orthonormal basis of range(P) by pivoted QR of the projected unit vectors."""
    P = projector_matrix(space)
    P = 0.5 * (P + P.T)
    q, r, _ = sla.qr(P, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > rank_tol * d[0]))
    return np.ascontiguousarray(q[:, :rank])


def _stokes_galerkin(space, Q):
    """Q^T (-Lap) Q with -Lap assembled from the derivative recurrence."""
    n = space.n_modes
    eye = np.eye(n)
    d2 = space.D @ space.D
    lap = (np.kron(np.kron(d2, eye), eye) + np.kron(np.kron(eye, d2), eye)
           + np.kron(np.kron(eye, eye), d2))
    m = n**3
    Qc = Q.reshape(3, m, -1)
    A = sum(Qc[c].T @ (-lap) @ Qc[c] for c in range(3))
    return 0.5 * (A + A.T)


def _oscillator_galerkin(space, Q):
    osc = np.broadcast_to(space.osc, space.shape).reshape(-1)
    B = Q.T @ (osc[:, None] * Q)
    return 0.5 * (B + B.T)


def _eig(M):
    w, v = np.linalg.eigh(M)
    if w[0] <= 0:
        raise np.linalg.LinAlgError(f"operator not positive on the subspace (min eig {w[0]:.3e})")
    return Eig(w, v)


def build_cache(space):
    """Assemble P_basis, A_df, B_df and the three eigendecompositions."""
    Q = divergence_free_basis(space)
    A = _stokes_galerkin(space, Q)
    B = _oscillator_galerkin(space, Q)
    eA = _eig(A)
    eB = _eig(B)
    a_half = (eA.vectors * np.sqrt(eA.values)) @ eA.vectors.T
    ab = a_half @ B @ a_half
    eAB = _eig(0.5 * (ab + ab.T))
    log.info("operator cache n_modes=%d d_df=%d lambda1_B=%.6g muN_A=%.6g",
             space.n_modes, Q.shape[1], eB.values[0], eA.values[0])
    return OperatorCache(space, Q, A, B, eA, eB, eAB)


_CACHES = {}


def get_cache(space):
    """Process-wide memo of built caches, keyed by the space."""
    c = _CACHES.get(space.key)
    if c is None or c.space is not space:
        c = _CACHES[space.key] = build_cache(space)
    return c


def save_cache(path, cache, delta=None):
    arrays = {
        "P_basis": cache.P_basis,
        "A_df": cache.A_df,
        "B_df": cache.B_df,
        "eig_A_values": cache.eig_A.values,
        "eig_A_vectors": cache.eig_A.vectors,
        "eig_B_values": cache.eig_B.values,
        "eig_B_vectors": cache.eig_B.vectors,
        "eig_AB_sym_values": cache.eig_AB_sym.values,
        "eig_AB_sym_vectors": cache.eig_AB_sym.vectors,
    }
    write_container(path, arrays, cache.space.key, meta=cache.summary(delta))


def load_cache(path, space=None):
    arrays, header = read_container(path)
    b = header["basis"]
    if space is None:
        space = HermiteSpace(b["n_modes"], b["n_quad"])
    elif (space.n_modes, space.n_quad) != (b["n_modes"], b["n_quad"]):
        raise ValueError(f"cache built for {b}, space is {space!r}")
    return OperatorCache(
        space,
        arrays["P_basis"],
        arrays["A_df"],
        arrays["B_df"],
        Eig(arrays["eig_A_values"], arrays["eig_A_vectors"]),
        Eig(arrays["eig_B_values"], arrays["eig_B_vectors"]),
        Eig(arrays["eig_AB_sym_values"], arrays["eig_AB_sym_vectors"]),
    )


def delta_from_epsilon(epsilon):
    if not (0.0 < epsilon < 0.5):
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    return 0.25 + 0.5 * epsilon


__all__ = [
    "leray_project", "apply_A", "apply_B", "apply_frac", "nonlinear_C",
    "OperatorCache", "build_cache", "get_cache", "save_cache", "load_cache",
    "projector_matrix", "divergence_free_basis", "delta_from_epsilon",
]
