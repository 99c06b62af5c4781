import os
import subprocess
import sys

import numpy as np
import pytest

from hermite_stokes import _pykernels, kernels

compiled = pytest.importorskip("hermite_stokes._ckernels", reason="extension not built")


def test_backend_selected():
    assert kernels.BACKEND == "compiled"


def test_pure_env_forces_fallback():
    out = subprocess.run(
        [sys.executable, "-c", "from hermite_stokes import kernels; print(kernels.BACKEND)"],
        env=dict(os.environ, HERMITE_STOKES_PURE="1"), capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_hermite_values_agree():
    x = np.linspace(-9, 9, 101)
    np.testing.assert_allclose(compiled.hermite_values(30, x), _pykernels.hermite_values(30, x),
                               rtol=0, atol=1e-15)


@pytest.mark.parametrize("dtype", [float, complex])
def test_leray_agree(dtype):
    rng = np.random.default_rng(1)
    q = 7
    nodes = np.sort(rng.standard_normal(q))
    nodes[q // 2] = 0.0
    f = rng.standard_normal((2, 3, q, q, q)).astype(dtype)
    if dtype is complex:
        f = f + 1j * rng.standard_normal(f.shape)
    a = compiled.leray_pointwise(f, nodes)
    b = _pykernels.leray_pointwise(f, nodes)
    assert a.dtype == b.dtype
    np.testing.assert_allclose(a, b, atol=1e-14)
    # the k = 0 node maps to zero
    assert np.all(a[..., q // 2, q // 2, q // 2] == 0)


def test_leray_readonly_input():
    nodes = np.linspace(-1, 1, 5)
    f = np.ones((3, 5, 5, 5))
    f.setflags(write=False)
    np.testing.assert_allclose(compiled.leray_pointwise(f, nodes), _pykernels.leray_pointwise(f, nodes))


def test_advect_agree():
    rng = np.random.default_rng(2)
    p = 50
    u, g, v = rng.standard_normal((3, p)), rng.standard_normal((3, 3, p)), rng.standard_normal((3, p))
    a1, f1 = compiled.advect_products(u, g, v)
    a2, f2 = _pykernels.advect_products(u, g, v)
    np.testing.assert_allclose(a1, a2, atol=1e-14)
    np.testing.assert_allclose(f1, f2, atol=1e-14)
    np.testing.assert_allclose(a2, np.einsum("jp,jip->ip", u, g), atol=1e-14)
    np.testing.assert_allclose(f2, np.einsum("jp,ip->jip", u, v), atol=1e-14)
