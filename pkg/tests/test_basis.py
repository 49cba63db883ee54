import math

import numpy as np
from hypothesis import given, settings, strategies as st
from numpy.polynomial.hermite_e import hermegauss

from mcflab import basis as bs


def test_hermite_monic_and_orthogonal():
    """H_n has leading coefficient 1 and <H_m, H_n> = delta * n! 2^n
    under the weight e^{-y^2/4} (normalized by the weight mass)."""
    table = bs.build_hermite(10)
    x, w = hermegauss(80)
    y = math.sqrt(2.0) * x
    vals = table.values(y)
    mass = w.sum()
    for n in range(11):
        fit = np.polyfit(y, vals[n], n)
        assert abs(fit[0] - 1.0) < 1e-10
        for m in range(n + 1):
            inner = (w * vals[m] * vals[n]).sum() / mass
            expect = math.factorial(n) * 2.0**n if m == n else 0.0
            scale = math.sqrt(math.factorial(m) * 2.0**m
                              * math.factorial(n) * 2.0**n)
            assert abs(inner - expect) <= 1e-10 * scale


def test_hermite_three_term_recursion():
    table = bs.build_hermite(8)
    y = np.linspace(-3, 3, 11)
    vals = table.values(y)
    for n in range(1, 8):
        np.testing.assert_allclose(vals[n + 1], y * vals[n] - 2 * n * vals[n - 1],
                                   atol=1e-9)


def test_eigenvalue_table():
    assert bs.eigenvalue_L(2, 0) == 0.0
    assert bs.eigenvalue_L(0, 0) == -1.0
    assert bs.eigenvalue_L(1, 0) == -0.5
    assert bs.eigenvalue_L(2, 1) == 0.5
    assert abs(bs.eigenvalue_L(4, 2) - (1.0 + 8.0 / 6.0)) < 1e-15
    for n in range(11):
        for k in range(5):
            assert abs(bs.eigenvalue_L(n, k)
                       - ((n - 2) / 2.0 + k * (k + 2) / 6.0)) < 1e-15


def test_harmonics_are_laplace_eigenfunctions():
    """grad_perp tables satisfy the intrinsic Laplacian identity
    trace(hess) f_{k,l} = -k(k+2) f_{k,l} on the sphere."""
    harm = bs.build_s3_harmonics(4)
    rng = np.random.default_rng(3)
    om = rng.normal(size=(40, 4))
    om /= np.linalg.norm(om, axis=1, keepdims=True)
    for k, l, p in harm.flat():
        f = bs.poly_eval(p, om)
        lap = np.zeros(40)
        for b in range(4):
            G = bs.poly_add(bs.poly_diff(p, b), bs.poly_mul_var(p, b),
                            scale=-float(k))
            dG = bs.poly_diff(G, b)
            lap += bs.poly_eval(dG, om)
            # subtract the radial part of the extension derivative
            lap -= om[:, b] * sum(om[:, a] * bs.poly_eval(bs.poly_diff(G, a), om)
                                  for a in range(4))
        np.testing.assert_allclose(lap, -k * (k + 2) * f, atol=1e-10)


def test_harmonic_orthonormality_quadrature():
    grid = bs.build_grid(8, 4)
    harm = bs.build_s3_harmonics(4)
    polys = [p for _, _, p in harm.flat()]
    vals = np.stack([bs.poly_eval(p, grid.s3_nodes) for p in polys])
    G = np.einsum("fq,q,gq->fg", vals, grid.s3_weights, vals)
    off = G - np.diag(np.diag(G))
    assert np.abs(off).max() < 1e-10 * np.diag(G).max()


def test_quadrature_moments():
    """The y quadrature integrates moments of e^{-y^2/4} exactly."""
    grid = bs.build_grid(12, 0)
    y, w = grid.y_nodes, grid.y_weights
    mass = w.sum()
    moment = 1.0
    for j in range(1, 10):
        moment *= (2 * j - 1) * 2.0  # (2j-1)!! 2^j
        measured = (w * y ** (2 * j)).sum() / mass
        assert abs(measured / moment - 1.0) < 1e-12


def test_tangent_frame_orthonormal():
    rng = np.random.default_rng(11)
    for _ in range(25):
        om = rng.normal(size=4)
        om /= np.linalg.norm(om)
        E = bs.tangent_frame(om)
        np.testing.assert_allclose(E @ E.T, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(E @ om, 0.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(-2, 2), st.floats(-2, 2))
def test_poly_product_rule(b, x0, x1, x2, x3):
    """d/dx_b (x_b p) = p + x_b dp/dx_b for the monomial-dict polynomials."""
    p = {(2, 0, 0, 0): 1.5, (0, 1, 1, 0): -0.7, (1, 0, 0, 1): 2.0}
    x = np.array([x0, x1, x2, x3])
    lhs = bs.poly_eval(bs.poly_diff(bs.poly_mul_var(p, b), b), x)
    rhs = bs.poly_eval(p, x) + x[b] * bs.poly_eval(bs.poly_diff(p, b), x)
    assert abs(lhs - rhs) < 1e-9 * (1.0 + abs(rhs))


def test_inner_g_weighting(basis16):
    """inner_g reproduces coefficient norms for basis functions."""
    grid = basis16.grid
    f5 = basis16.Hs[5]
    h3 = basis16.By[3]
    vals = np.outer(h3, f5)
    ip = bs.inner_g(vals, vals, grid)
    expect = basis16.herm_norms[3] * basis16.harm_norms[5]
    assert abs(ip / expect - 1.0) < 1e-10
