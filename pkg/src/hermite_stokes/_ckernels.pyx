# cython: language_level=3
"""Compiled pointwise kernels; same contracts as ``_pykernels``."""
cimport cython
import numpy as np
from libc.math cimport exp, sqrt, M_PI, pow

cdef double PI_M14 = pow(M_PI, -0.25)


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def hermite_values(int n_modes, const double[::1] x):
    cdef Py_ssize_t nx = x.shape[0], j
    cdef int n
    out_arr = np.empty((n_modes, nx))
    cdef double[:, ::1] out = out_arr
    cdef double xj, h0, h1, h2, s2 = sqrt(2.0)
    if n_modes == 0:
        return out_arr
    for j in range(nx):
        xj = x[j]
        h0 = PI_M14 * exp(-0.5 * xj * xj)
        out[0, j] = h0
        if n_modes > 1:
            h1 = s2 * xj * h0
            out[1, j] = h1
            for n in range(1, n_modes - 1):
                h2 = sqrt(2.0 / (n + 1)) * xj * h1 - sqrt(<double>n / (n + 1)) * h0
                out[n + 1, j] = h2
                h0 = h1
                h1 = h2
    return out_arr


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def _leray_batch(double complex[:, :, :, :, ::1] f, const double[::1] nodes):
    cdef Py_ssize_t nb = f.shape[0], q = nodes.shape[0]
    cdef Py_ssize_t b, a, c, d
    cdef double k1, k2, k3, ksq, inv
    cdef double complex kd
    for b in range(nb):
        for a in range(q):
            k1 = nodes[a]
            for c in range(q):
                k2 = nodes[c]
                for d in range(q):
                    k3 = nodes[d]
                    ksq = k1 * k1 + k2 * k2 + k3 * k3
                    if ksq == 0.0:
                        f[b, 0, a, c, d] = 0.0
                        f[b, 1, a, c, d] = 0.0
                        f[b, 2, a, c, d] = 0.0
                        continue
                    inv = 1.0 / ksq
                    kd = (k1 * f[b, 0, a, c, d] + k2 * f[b, 1, a, c, d]
                          + k3 * f[b, 2, a, c, d]) * inv
                    f[b, 0, a, c, d] = f[b, 0, a, c, d] - k1 * kd
                    f[b, 1, a, c, d] = f[b, 1, a, c, d] - k2 * kd
                    f[b, 2, a, c, d] = f[b, 2, a, c, d] - k3 * kd


def leray_pointwise(field, nodes):
    arr = np.array(field, dtype=np.complex128, order="C", copy=True)
    shape = arr.shape
    q = shape[-1]
    flat = arr.reshape((-1, 3, q, q, q))
    _leray_batch(flat, np.ascontiguousarray(nodes, dtype=np.float64))
    out = flat.reshape(shape)
    if not np.iscomplexobj(field):
        return out.real.copy()
    return out


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def _advect(const double[:, ::1] u, const double[:, :, ::1] g, const double[:, ::1] v,
            double[:, ::1] adv, double[:, :, ::1] flux):
    cdef Py_ssize_t p, n = u.shape[1], i, j
    cdef double ujp
    # point index innermost: every array is walked contiguously
    for i in range(3):
        for p in range(n):
            adv[i, p] = 0.0
    for j in range(3):
        for i in range(3):
            for p in range(n):
                ujp = u[j, p]
                adv[i, p] += ujp * g[j, i, p]
                flux[j, i, p] = ujp * v[i, p]


def advect_products(u, grad_v, v):
    u = np.ascontiguousarray(u, dtype=np.float64)
    grad_v = np.ascontiguousarray(grad_v, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    n = u.shape[1]
    adv = np.empty((3, n))
    flux = np.empty((3, 3, n))
    _advect(u, grad_v, v, adv, flux)
    return adv, flux
