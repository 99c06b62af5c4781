"""Reference numpy implementations of the pointwise grid kernels.

These are used when the compiled ``_ckernels`` extension is unavailable and
serve as the oracle the compiled versions are tested against.
"""
import math

import numpy as np

_PI_M14 = math.pi ** -0.25


def hermite_values(n_modes, x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((n_modes, x.size))
    if n_modes == 0:
        return out
    out[0] = _PI_M14 * np.exp(-0.5 * x * x)
    if n_modes > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, n_modes - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def _k_grid(nodes):
    k1 = nodes[:, None, None]
    k2 = nodes[None, :, None]
    k3 = nodes[None, None, :]
    return k1, k2, k3


def leray_pointwise(field, nodes):
    """Apply I - k k^T/|k|^2 at every node of a (..., 3, Q, Q, Q) array; k = 0 maps to 0."""
    k1, k2, k3 = _k_grid(nodes)
    ksq = k1 * k1 + k2 * k2 + k3 * k3
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(ksq > 0.0, 1.0 / ksq, 0.0)
    kdotu = (k1 * field[..., 0, :, :, :] + k2 * field[..., 1, :, :, :]
             + k3 * field[..., 2, :, :, :]) * inv
    out = np.empty_like(field)
    out[..., 0, :, :, :] = field[..., 0, :, :, :] - k1 * kdotu
    out[..., 1, :, :, :] = field[..., 1, :, :, :] - k2 * kdotu
    out[..., 2, :, :, :] = field[..., 2, :, :, :] - k3 * kdotu
    zero = ksq == 0.0
    if zero.any():
        out[..., zero] = 0.0
    return out


def advect_products(u, grad_v, v):
    """Pointwise ``adv_i = sum_j u_j d_j v_i`` and ``flux_ji = u_j v_i``.

    ``u``, ``v``: (3, P); ``grad_v``: (3, 3, P) with ``grad_v[j, i] = d_j v_i``.
    """
    adv = np.einsum("jp,jip->ip", u, grad_v)
    flux = u[:, None, :] * v[None, :, :]
    return adv, flux
