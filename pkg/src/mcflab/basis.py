"""Tensor basis on R x S^3 and Gaussian-weighted quadrature.

The one-dimensional factor uses monic Hermite polynomials orthogonal for
the weight exp(-y^2/4); the angular factor uses spherical harmonics on the
unit 3-sphere, realized as harmonic homogeneous polynomials in four
variables restricted to |omega| = 1.
"""

import math
from dataclasses import dataclass, field

import numpy as np

SQRT_PI = np.sqrt(np.pi)
S3_AREA = 2.0 * np.pi**2


# ---------------------------------------------------------------------------
# Hermite polynomials, monic convention, weight exp(-y^2/4)
# ---------------------------------------------------------------------------

@dataclass
class HermiteTable:
    """Monic Hermite polynomials H_n for the weight exp(-y^2/4).

    coeffs[n] holds the monomial coefficients of H_n in ascending powers,
    as exact integers cast to float.  norms[n] = int H_n^2 exp(-y^2/4) dy
    = 2 sqrt(pi) 2^n n!.
    """

    max_degree: int
    coeffs: list
    coeffs_int: list
    norms: np.ndarray

    def values(self, y):
        """Evaluate H_0..H_max on an array of points, shape (max+1, len(y))."""
        y = np.asarray(y, dtype=float)
        out = np.empty((self.max_degree + 1,) + y.shape)
        out[0] = 1.0
        if self.max_degree >= 1:
            out[1] = y
        for n in range(1, self.max_degree):
            out[n + 1] = y * out[n] - 2.0 * n * out[n - 1]
        return out


def build_hermite(max_degree):
    """Build the monic Hermite table via H_{n+1} = y H_n - 2n H_{n-1}."""
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    coeffs_int = [[1]]
    if max_degree >= 1:
        coeffs_int.append([0, 1])
    for n in range(1, max_degree):
        prev, cur = coeffs_int[n - 1], coeffs_int[n]
        nxt = [0] * (n + 2)
        for j, c in enumerate(cur):
            nxt[j + 1] += c
        for j, c in enumerate(prev):
            nxt[j] -= 2 * n * c
        coeffs_int.append(nxt)
    norms = np.array([2.0 * SQRT_PI * (2.0**n) * float(math.factorial(n))
                      for n in range(max_degree + 1)])
    coeffs = [np.array(c, dtype=float) for c in coeffs_int]
    return HermiteTable(max_degree, coeffs, coeffs_int, norms)


# ---------------------------------------------------------------------------
# Polynomials in four variables (plain dict representation)
# ---------------------------------------------------------------------------

def poly_add(p, q, scale=1.0):
    out = dict(p)
    for e, c in q.items():
        out[e] = out.get(e, 0.0) + scale * c
        if out[e] == 0.0:
            del out[e]
    return out

def poly_scale(p, s):
    return {e: s * c for e, c in p.items()}

def poly_diff(p, b):
    out = {}
    for e, c in p.items():
        if e[b] > 0:
            e2 = list(e)
            e2[b] -= 1
            out[tuple(e2)] = out.get(tuple(e2), 0.0) + c * e[b]
    return out

def poly_mul_var(p, b):
    out = {}
    for e, c in p.items():
        e2 = list(e)
        e2[b] += 1
        out[tuple(e2)] = out.get(tuple(e2), 0.0) + c
    return out

def poly_laplacian(p):
    out = {}
    for b in range(4):
        out = poly_add(out, poly_diff(poly_diff(p, b), b))
    return out

def poly_eval(p, x):
    """Evaluate at points x of shape (..., 4)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for e, c in p.items():
        term = np.full(x.shape[:-1], float(c))
        for b in range(4):
            if e[b]:
                term = term * x[..., b] ** e[b]
        out += term
    return out


def _monomials(degree):
    """Exponent tuples of total degree `degree`, descending lexicographic."""
    out = []
    for e1 in range(degree, -1, -1):
        for e2 in range(degree - e1, -1, -1):
            for e3 in range(degree - e1 - e2, -1, -1):
                out.append((e1, e2, e3, degree - e1 - e2 - e3))
    return out


# ---------------------------------------------------------------------------
# Spherical harmonics on S^3
# ---------------------------------------------------------------------------

@dataclass
class HarmonicBasis:
    """Harmonic homogeneous polynomials in 4 variables, per degree k <= K.

    polys[k][l] are mutually orthogonal on S^3 in each degree and across
    degrees, scaled so the first nonzero monomial coefficient (descending
    lexicographic order) equals 1 ("raw" normalization: f_{0,1} = 1 and
    f_{1,l} = omega_l).  norms[k][l] = int_{S^3} f^2 dS.
    """

    max_degree: int
    polys: list
    norms: list
    rational_kernels: list = field(repr=False, default=None)

    @property
    def multiplicities(self):
        return [len(p) for p in self.polys]

    def flat(self):
        """List of (k, l, poly) over all degrees, l starting at 1."""
        out = []
        for k, ps in enumerate(self.polys):
            for l, p in enumerate(ps):
                out.append((k, l + 1, p))
        return out

    def values(self, omega):
        """Evaluate all basis polynomials at points (..., 4); (n_harm, ...)."""
        return np.stack([poly_eval(p, omega) for _, _, p in self.flat()])


def _harmonic_kernel(degree):
    """Exact rational basis of harmonic homogeneous polynomials of a degree."""
    import sympy

    mons = _monomials(degree)
    if degree < 2:
        polys = [{m: 1.0} for m in mons]
        return mons, polys, [sympy.eye(len(mons))[:, i] for i in range(len(mons))]
    low = _monomials(degree - 2)
    low_index = {m: i for i, m in enumerate(low)}
    A = sympy.zeros(len(low), len(mons))
    for j, e in enumerate(mons):
        for b in range(4):
            if e[b] >= 2:
                e2 = list(e)
                e2[b] -= 2
                A[low_index[tuple(e2)], j] += e[b] * (e[b] - 1)
    null = A.nullspace()
    polys = []
    for vec in null:
        p = {}
        for j, m in enumerate(mons):
            if vec[j] != 0:
                p[m] = float(vec[j])
        polys.append(p)
    return mons, polys, null


def s3_product_rule(degree):
    """Product quadrature on S^3, exact for polynomials up to `degree`.

    Coordinates: omega = (cos t1, sin t1 cos t2, sin t1 sin t2 cos p,
    sin t1 sin t2 sin p), dS = sin^2 t1 sin t2 dt1 dt2 dp.  The polar
    directions use Chebyshev (second kind) and Gauss-Legendre rules in
    cos t1 and cos t2; the azimuth uses the uniform trapezoid rule.
    """
    n1 = degree // 2 + 2
    j = np.arange(1, n1 + 1)
    x1 = np.cos(j * np.pi / (n1 + 1))
    w1 = np.pi / (n1 + 1) * np.sin(j * np.pi / (n1 + 1)) ** 2
    n2 = degree // 2 + 2
    x2, w2 = np.polynomial.legendre.leggauss(n2)
    nphi = degree + 2
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    wphi = np.full(nphi, 2.0 * np.pi / nphi)

    s1 = np.sqrt(1.0 - x1**2)
    s2 = np.sqrt(1.0 - x2**2)
    nodes = np.empty((n1, n2, nphi, 4))
    nodes[..., 0] = x1[:, None, None]
    nodes[..., 1] = (s1[:, None] * x2[None, :])[:, :, None]
    nodes[..., 2] = s1[:, None, None] * s2[None, :, None] * np.cos(phi)[None, None, :]
    nodes[..., 3] = s1[:, None, None] * s2[None, :, None] * np.sin(phi)[None, None, :]
    weights = w1[:, None, None] * w2[None, :, None] * wphi[None, None, :]
    return nodes.reshape(-1, 4), weights.reshape(-1)


def build_s3_harmonics(max_degree, quad_degree=None):
    """Orthogonal spherical-harmonic basis up to `max_degree` on S^3.

    Exact rational kernels of the Laplacian constraint are orthogonalized
    per degree by modified Gram-Schmidt (with reorthogonalization) in the
    S^3 inner product, then rescaled so the leading monomial coefficient
    is 1.  Ordering is deterministic (lexicographic before the sweep).
    """
    if quad_degree is None:
        quad_degree = 2 * max_degree + 8
    nodes, weights = s3_product_rule(quad_degree)
    polys_out, norms_out, kernels = [], [], []

    def ip(u, v):
        return float(np.sum(weights * u * v))

    for k in range(max_degree + 1):
        _, polys, null = _harmonic_kernel(k)
        kernels.append(null)
        vals = [poly_eval(p, nodes) for p in polys]
        kept_p, kept_v, norms = [], [], []
        for p, v in zip(polys, vals):
            q, w = dict(p), v.copy()
            for _ in range(2):  # one reorthogonalization pass
                for bp, bv, bn in zip(kept_p, kept_v, norms):
                    c = ip(w, bv) / bn
                    q = poly_add(q, bp, -c)
                    w = w - c * bv
            # raw scaling: first significant (descending-lex) coefficient 1
            qmax = max(abs(c) for c in q.values())
            lead = None
            for m in _monomials(k):
                if m in q and abs(q[m]) > 1e-8 * qmax:
                    lead = q[m]
                    break
            q = poly_scale(q, 1.0 / lead)
            w = w / lead
            kept_p.append(q)
            kept_v.append(w)
            norms.append(ip(w, w))
        assert len(kept_p) == (k + 1) ** 2
        polys_out.append(kept_p)
        norms_out.append(norms)
    return HarmonicBasis(max_degree, polys_out, norms_out, kernels)


# ---------------------------------------------------------------------------
# Quadrature grid and the Gaussian-weighted inner product
# ---------------------------------------------------------------------------

@dataclass
class QuadratureGrid:
    """Tensor quadrature for int_R int_{S^3} exp(-y^2/4) f g dy dS(omega).

    The y-weights absorb the Gaussian factor: sum W_i F(y_i) approximates
    int F(y) exp(-y^2/4) dy exactly for polynomials up to y_degree.
    """

    y_nodes: np.ndarray
    y_weights: np.ndarray
    s3_nodes: np.ndarray
    s3_weights: np.ndarray
    y_degree: int
    s3_degree: int

    @property
    def shape(self):
        return (len(self.y_nodes), len(self.s3_weights))


def build_grid(n_y, k_omega, n_q=None, s3_degree=None):
    """Quadrature grid sized for degree-4 products of a (n_y, k_omega) field."""
    if n_q is None:
        n_q = 2 * n_y + 16
    if s3_degree is None:
        s3_degree = 2 * k_omega + 8
    t, w = np.polynomial.hermite.hermgauss(n_q)
    s3n, s3w = s3_product_rule(s3_degree)
    return QuadratureGrid(2.0 * t, 2.0 * w, s3n, s3w, 2 * n_q - 1, s3_degree)


def inner_g(f_vals, g_vals, grid):
    """Gaussian-weighted inner product of two grid-value arrays."""
    return float(np.einsum("i,j,ij,ij->", grid.y_weights, grid.s3_weights,
                           f_vals, g_vals))


def eigenvalue_L(n, k):
    """Decay rate of the mode H_n f_{k,l} under the linearized flow."""
    return (n - 2) / 2.0 + k * (k + 2) / 6.0


def tangent_frame(omega):
    """Deterministic orthonormal tangent frame of S^3 at a point.

    Returns an array (3, 4).  Start vectors are the coordinate directions
    ordered by increasing |omega_i| so the projection never degenerates.
    """
    omega = np.asarray(omega, dtype=float)
    order = np.argsort(np.abs(omega), kind="stable")
    frame = []
    for i in order:
        v = np.zeros(4)
        v[i] = 1.0
        v = v - np.dot(v, omega) * omega
        for u in frame:
            v = v - np.dot(v, u) * u
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            frame.append(v / nv)
        if len(frame) == 3:
            break
    return np.array(frame)


def dump_basis_tables(path, hermite, harmonics):
    """Write basis records (degree, coefficients, norms) to a text file."""
    with open(path, "w") as fh:
        for n in range(hermite.max_degree + 1):
            cs = "\t".join("%.17g" % c for c in hermite.coeffs[n])
            fh.write("hermite\t%d\t%.17g\t%s\n" % (n, hermite.norms[n], cs))
        for k, (ps, ns) in enumerate(zip(harmonics.polys, harmonics.norms)):
            for l, (p, nrm) in enumerate(zip(ps, ns), start=1):
                cs = "\t".join("%d,%d,%d,%d:%.17g" % (e + (c,))
                               for e, c in sorted(p.items(), reverse=True))
                fh.write("harmonic\t%d\t%d\t%.17g\t%s\n" % (k, l, nrm, cs))
