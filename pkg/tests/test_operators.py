import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermite_stokes.basis import build_basis, hermite_synthesize
from hermite_stokes.field import DivergenceError, SpectralField, divergence_residual, random_field
from hermite_stokes.operators import (
    apply_A,
    apply_B,
    apply_frac,
    delta_from_epsilon,
    leray_project,
    load_cache,
    nonlinear_C,
    save_cache,
)

from conftest import rel


def _fields(space, n, df=True, start=0):
    return [random_field(start + i, space, divergence_free=df) for i in range(n)]


# -- projection ---------------------------------------------------------------------

def test_projection_idempotent_symmetric(space8):
    us = _fields(space8, 20, df=False)
    vs = _fields(space8, 20, df=False, start=100)
    for u, v in zip(us, vs):
        pu = leray_project(u)
        assert rel(leray_project(pu).coeffs, pu.coeffs) < 1e-12
        assert abs(pu.inner(v) - u.inner(leray_project(v))) <= 1e-12 * u.norm() * v.norm()
        assert abs(pu.inner(u - pu)) <= 1e-12 * u.norm() ** 2
        assert divergence_residual(pu) < 1e-12


def gaussian_bump_gradient(space, center, width):
    """Coefficients of grad q, q a Gaussian bump, projected onto the truncation."""
    b = build_basis(space.n_modes, 3 * space.n_modes)
    x = b.nodes
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"))
    r2 = sum((X[i] - center[i]) ** 2 for i in range(3))
    q = np.exp(-r2 / (2 * width**2))
    grad = np.stack([-(X[i] - center[i]) / width**2 * q for i in range(3)])
    from hermite_stokes.basis import hermite_analyze

    return hermite_analyze(grad, b)


def test_projection_kills_truncated_gradients(space8):
    rng = np.random.default_rng(5)
    for _ in range(10):
        q = rng.standard_normal(space8.shape[1:]) * (1 + np.arange(8))[:, None, None] ** -1.0
        g = space8.gradient_scalar(q)
        assert np.linalg.norm(space8.leray(g)) <= 1e-12 * np.linalg.norm(g)
    # a genuine Gaussian bump, truncated after differentiation: limited by truncation
    g = gaussian_bump_gradient(space8, (0.2, -0.1, 0.0), 1.0)
    # only the top-mode truncation of the derivative leaks through
    assert np.linalg.norm(space8.leray(g)) <= 1e-2 * np.linalg.norm(g)


def test_leray_zero_and_real(space6):
    z = np.zeros(space6.shape)
    assert np.all(space6.leray(z) == 0)
    assert space6.leray(random_field(0, space6, divergence_free=False).coeffs).dtype == np.float64


# -- A and B ------------------------------------------------------------------------

def test_cache_invariants(cache6):
    A, B = cache6.A_df, cache6.B_df
    assert np.abs(A - A.T).max() <= 1e-10 * np.abs(A).max()
    assert cache6.eig_A.values[0] > 0 and cache6.eig_B.values[0] > 0
    ab = np.sort(np.linalg.eigvals(A @ B).real)
    np.testing.assert_allclose(ab, cache6.eig_AB_sym.values, rtol=1e-8)
    P = cache6.P_basis
    np.testing.assert_allclose(P.T @ P, np.eye(cache6.d_df), atol=1e-12)
    assert cache6.d_df == 432


def test_pseudo_spectral_matches_dense(cache6):
    sp = cache6.space
    for u in _fields(sp, 10):
        y = cache6.coords(u.coeffs)
        assert rel(apply_A(u).coeffs, cache6.field(cache6.A_df @ y)) < 1e-10
        assert rel(apply_B(u).coeffs, cache6.field(cache6.B_df @ y)) < 1e-10


def test_eigenvectors(cache6):
    for k in (0, 7, -1):
        u = cache6.to_field(cache6.eig_A.vectors[:, k])
        assert rel(apply_A(u).coeffs, cache6.eig_A.values[k] * u.coeffs) < 1e-8
        v = cache6.to_field(cache6.eig_B.vectors[:, k])
        assert rel(apply_B(v).coeffs, cache6.eig_B.values[k] * v.coeffs) < 1e-8


def test_lambda1_above_unprojected_bound(cache8):
    # projection raises the bottom of the spectrum above 3/2
    assert cache8.lambda1_B > 1.5
    assert cache8.lambda1_B == pytest.approx(2.4608099059845467, rel=1e-9)


def test_zero_maps_to_zero(space6):
    z = SpectralField.zeros(space6)
    assert apply_A(z).norm() == 0 and apply_B(z).norm() == 0


def test_self_adjoint_positive(cache6):
    us = _fields(cache6.space, 10)
    vs = _fields(cache6.space, 10, start=50)
    for u, v in zip(us, vs):
        for op in (apply_A, apply_B):
            assert abs(op(u).inner(v) - u.inner(op(v))) <= 1e-9 * op(u).norm() * v.norm()
        assert apply_A(u).inner(u) > 0
        assert apply_B(u).inner(u) >= cache6.lambda1_B * u.norm() ** 2 * (1 - 1e-12)
        assert divergence_residual(apply_B(u)) < 1e-10


def test_operators_reject_non_solenoidal(space6):
    u = random_field(0, space6, divergence_free=False)
    for op in (apply_A, apply_B):
        with pytest.raises(DivergenceError):
            op(u)
    with pytest.raises(DivergenceError):
        nonlinear_C(u, u)


# -- fractional powers --------------------------------------------------------------

def test_frac_consistency(cache6):
    u = random_field(2, cache6.space)
    assert rel(apply_frac("A", 0, u, cache6).coeffs, u.coeffs) < 1e-12
    assert rel(apply_frac("A", 1, u, cache6).coeffs, apply_A(u).coeffs) < 1e-8
    assert rel(apply_frac("B", 1, u, cache6).coeffs, apply_B(u).coeffs) < 1e-8
    ab = apply_A(apply_B(u))
    assert rel(apply_frac("AB", 1, u, cache6).coeffs, ab.coeffs) < 1e-8
    with pytest.raises(ValueError):
        cache6.frac_matrix("C", 1)


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.sampled_from(["A", "B", "AB"]))
def test_frac_group_law(s, t, op):
    from hermite_stokes.operators import get_cache
    from hermite_stokes.space import get_space

    cache = get_cache(get_space(4))
    u = random_field(4, cache.space)
    lhs = apply_frac(op, s, apply_frac(op, t, u, cache), cache)
    assert rel(lhs.coeffs, apply_frac(op, s + t, u, cache).coeffs) < 1e-8


def test_frac_group_law_grid(cache6):
    u = random_field(4, cache6.space)
    for op in ("A", "B", "AB"):
        for s, t in [(0.5, 0.5), (-1.375, 0.375), (-0.3, 1.1), (0.25, -1.0)]:
            lhs = apply_frac(op, s, apply_frac(op, t, u, cache6), cache6)
            rhs = apply_frac(op, s + t, u, cache6)
            assert rel(lhs.coeffs, rhs.coeffs) < 1e-8


def test_negative_power_of_AB_against_pseudo_spectral(cache6):
    # A(B((AB)^{-1} u)) with A and B applied on the k-grid must return u
    u = random_field(9, cache6.space)
    w = apply_frac("AB", -1, u, cache6)
    assert rel(apply_A(apply_B(w)).coeffs, u.coeffs) < 1e-7
    d = delta_from_epsilon(0.25)
    w = apply_frac("AB", -(1 + d), u, cache6)
    back = apply_frac("AB", d, apply_A(apply_B(w)), cache6)
    assert rel(back.coeffs, u.coeffs) < 1e-7


def test_b_negative_power_bound(cache6):
    lam1 = cache6.lambda1_B
    for beta in (0.5, 11 / 8):
        for h in _fields(cache6.space, 100):
            assert apply_frac("B", -beta, h, cache6).norm() <= lam1**-beta * h.norm() * (1 + 1e-12)


def test_a_constant(cache8):
    a = cache8.a_constant(0.375)
    assert a ** -1.375 == pytest.approx(cache8.op_norm("AB", -1.375), rel=1e-12)
    assert a == pytest.approx(1.8613, rel=1e-4)


def test_delta_from_epsilon():
    assert delta_from_epsilon(0.25) == 0.375
    for bad in (0.0, 0.5, 0.6, -1):
        with pytest.raises(ValueError, match="1/2"):
            delta_from_epsilon(bad)


def test_cache_persistence(tmp_path, cache4):
    p = tmp_path / "cache.hsf"
    save_cache(p, cache4, delta=0.375)
    c2 = load_cache(p, cache4.space)
    np.testing.assert_array_equal(c2.A_df, cache4.A_df)
    np.testing.assert_array_equal(c2.eig_B.vectors, cache4.eig_B.vectors)
    from hermite_stokes.container import read_container

    _, header = read_container(p)
    meta = header["meta"]
    assert meta["d_df"] == cache4.d_df and meta["delta"] == 0.375
    assert meta["a"] == pytest.approx(cache4.a_constant(0.375))
    from hermite_stokes.space import HermiteSpace

    with pytest.raises(ValueError):
        load_cache(p, HermiteSpace(5))


def test_eigenspace_probe_is_basis_invariant(cache8):
    p = cache8.eigenspace_probe("B")
    y = cache8.coords(p)
    # rotate the degenerate eigenbasis: the probe must not change
    e = cache8.eig_B
    sel = np.abs(e.values - e.values[0]) < 1e-8 * e.values[0]
    assert sel.sum() == 3
    V = e.vectors[:, sel]
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
    V2 = V @ Q
    ref = cache8.coords(random_field(0, cache8.space, 1.0).coeffs)
    y2 = V2 @ (V2.T @ ref)
    np.testing.assert_allclose(y, y2 / np.linalg.norm(y2), atol=1e-12)
    assert np.linalg.norm(cache8.B_df @ y - e.values[0] * y) < 1e-10


# -- nonlinear term -----------------------------------------------------------------

def big_grid_trilinear(space, u, v, w, nq=40):
    """\\int (u.grad v).w dx by a standard Gauss-Hermite grid (not the product grid)."""
    b = build_basis(space.n_modes, nq)
    wts = b.scaled_weights
    W = wts[:, None, None] * wts[None, :, None] * wts[None, None, :]
    ug = hermite_synthesize(u, b)
    wg = hermite_synthesize(w, b)
    dv = space.grad(v)
    dvg = hermite_synthesize(dv, b)
    return float(np.sum(np.einsum("jabc,jiabc,iabc->abc", ug, dvg, wg) * W))


def test_trilinear_against_quadrature_oracle(space6):
    us = _fields(space6, 5)
    vs = _fields(space6, 5, start=20)
    ws = _fields(space6, 5, start=40)
    for u, v, w in zip(us, vs, ws):
        adv = float(np.vdot(space6.nonlinear(u.coeffs, v.coeffs, form="advective"), w.coeffs))
        assert adv == pytest.approx(big_grid_trilinear(space6, u.coeffs, v.coeffs, w.coeffs), rel=1e-10)
        skew = nonlinear_C(u, v).inner(w)
        oracle = 0.5 * (big_grid_trilinear(space6, u.coeffs, v.coeffs, w.coeffs)
                        - big_grid_trilinear(space6, u.coeffs, w.coeffs, v.coeffs))
        assert skew == pytest.approx(oracle, rel=1e-9, abs=1e-14)


def test_trilinear_antisymmetry(space8):
    us = _fields(space8, 20)
    vs = _fields(space8, 20, start=200)
    ws = _fields(space8, 20, start=400)
    for u, v, w in zip(us, vs, ws):
        scale = u.norm() * v.norm() * w.norm()
        assert abs(nonlinear_C(u, v).inner(v)) <= 1e-12 * u.norm() * v.norm() ** 2
        assert abs(nonlinear_C(u, v).inner(w) + nonlinear_C(u, w).inner(v)) <= 1e-12 * scale


def test_advective_form_skew_defect_is_truncation(space8):
    # the plain advective form leaks energy through the top mode; measured, not hidden
    u, v = _fields(space8, 2)
    defect = abs(np.vdot(space8.nonlinear(u.coeffs, v.coeffs, form="advective"), v.coeffs))
    assert 1e-6 < defect / (u.norm() * v.norm() ** 2) < 1e-2


def test_nonlinear_bilinear_and_solenoidal(space8):
    u, v = _fields(space8, 2)
    z = SpectralField.zeros(space8)
    assert nonlinear_C(z, v).norm() == 0
    assert nonlinear_C(u, z).norm() == 0
    c = nonlinear_C(u, v)
    assert c.divergence_free and divergence_residual(c) < 1e-12
    assert rel(nonlinear_C(u * 2, v * 3).coeffs, 6 * c.coeffs) < 1e-13
    with pytest.raises(ValueError):
        space8.nonlinear(u.coeffs, v.coeffs, form="bogus")
