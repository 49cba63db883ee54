"""Spectral fields on R x S^3: synthesis, analysis, calculus, cutoffs.

A field g(y, omega) is stored as coefficients c[n][k][l] on the tensor
basis H_n(y) f_{k,l}(omega).  Derivative operators act exactly on
coefficients where possible (d/dy, the S^3 Laplacian) and through
precomputed node tables for tangential gradients.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.special import betainc
from scipy.optimize import brentq

from . import basis as basis_mod
from .basis import poly_add, poly_diff, poly_eval, poly_mul_var, poly_scale


def harm_count(k_max):
    """Total number of harmonics of degree <= k_max: sum (k+1)^2."""
    return (k_max + 1) * (k_max + 2) * (2 * k_max + 3) // 6


@dataclass
class SpectralField:
    """Coefficients on H_n f_{k,l}, n <= n_y, harmonic degree k <= k_omega."""

    coeffs: np.ndarray  # shape (n_y+1, harm_count(k_omega))
    n_y: int
    k_omega: int

    def copy(self):
        return SpectralField(self.coeffs.copy(), self.n_y, self.k_omega)

    def __add__(self, other):
        assert self.coeffs.shape == other.coeffs.shape
        return SpectralField(self.coeffs + other.coeffs, self.n_y, self.k_omega)

    def __sub__(self, other):
        assert self.coeffs.shape == other.coeffs.shape
        return SpectralField(self.coeffs - other.coeffs, self.n_y, self.k_omega)

    def __mul__(self, s):
        return SpectralField(self.coeffs * s, self.n_y, self.k_omega)

    __rmul__ = __mul__

    def norm(self):
        return float(np.sqrt(np.sum(self.coeffs**2)))


def zero_field(n_y, k_omega):
    return SpectralField(np.zeros((n_y + 1, harm_count(k_omega))), n_y, k_omega)


class BasisSet:
    """Bundled Hermite/harmonic tables, quadrature grid, and value caches.

    The internal tables extend the nominal truncation (n_y, k_omega) by a
    dealiasing headroom (+8 Hermite degrees, +4 harmonic degrees); products
    are formed on the grid and re-analyzed inside the nominal truncation.
    """

    def __init__(self, n_y, k_omega, herm_headroom=8, harm_headroom=4):
        self.n_y = n_y
        self.k_omega = k_omega
        self.n_ext = n_y + herm_headroom
        self.k_ext = k_omega + harm_headroom
        self.hermite = basis_mod.build_hermite(self.n_ext)
        self.harmonics = basis_mod.build_s3_harmonics(self.k_ext)
        self.grid = basis_mod.build_grid(n_y, self.k_ext,
                                         n_q=2 * n_y + 16,
                                         s3_degree=2 * self.k_ext + 8)
        self.By = self.hermite.values(self.grid.y_nodes)          # (n_ext+1, nq)
        self.Hs = self.harmonics.values(self.grid.s3_nodes)       # (n_harm_ext, ns)
        self.harm_kl = [(k, l) for k, l, _ in self.harmonics.flat()]
        self.harm_k = np.array([k for k, _ in self.harm_kl])
        self.harm_polys = [p for _, _, p in self.harmonics.flat()]
        self.harm_norms = np.array([n for ns in self.harmonics.norms for n in ns])
        self.herm_norms = self.hermite.norms
        self._grad_polys = {}
        self._hess_polys = {}
        self._G1 = None
        self._G2 = None

    # -- index helpers ------------------------------------------------------

    def flat_index(self, k, l):
        """Flat harmonic index for degree k, label l (l starts at 1)."""
        return harm_count(k - 1) + (l - 1) if k > 0 else 0

    def n_harm(self, k_max=None):
        return harm_count(self.k_omega if k_max is None else k_max)

    # -- tangential derivative tables --------------------------------------

    def grad_polys(self, f):
        """Polynomials G_b with e_b . grad_perp f_{k,l} = G_b on the sphere."""
        if f not in self._grad_polys:
            k = self.harm_k[f]
            P = self.harm_polys[f]
            out = []
            for b in range(4):
                out.append(poly_add(poly_diff(P, b),
                                    poly_mul_var(P, b), scale=-float(k)))
            self._grad_polys[f] = out
        return self._grad_polys[f]

    def hess_polys(self, f):
        """Partial-derivative polynomials dG_b/dx_a of the gradient extension."""
        if f not in self._hess_polys:
            G = self.grad_polys(f)
            self._hess_polys[f] = [[poly_diff(G[b], a) for b in range(4)]
                                   for a in range(4)]
        return self._hess_polys[f]

    def harm_values_at(self, omega, count=None):
        count = self.n_harm() if count is None else count
        return np.stack([poly_eval(self.harm_polys[f], omega)
                         for f in range(count)])

    def harm_grad_at(self, omega, count=None):
        """Tangential gradients, shape (count, ..., 4)."""
        count = self.n_harm() if count is None else count
        omega = np.asarray(omega, dtype=float)
        out = np.empty((count,) + omega.shape)
        for f in range(count):
            G = self.grad_polys(f)
            for b in range(4):
                out[f, ..., b] = poly_eval(G[b], omega)
        return out

    def harm_hess_at(self, omega, count=None):
        """Second tangential derivatives e_a . grad_perp(grad_perp f . e_b).

        Shape (count, ..., 4, 4); index order (a, b).
        """
        count = self.n_harm() if count is None else count
        omega = np.asarray(omega, dtype=float)
        out = np.empty((count,) + omega.shape[:-1] + (4, 4))
        for f in range(count):
            dG = self.hess_polys(f)
            raw = np.empty(omega.shape[:-1] + (4, 4))
            for a in range(4):
                for b in range(4):
                    raw[..., a, b] = poly_eval(dG[a][b], omega)
            radial = np.einsum("...c,...cb->...b", omega, raw)
            out[f] = raw - omega[..., :, None] * radial[..., None, :]
        return out

    @property
    def G1(self):
        if self._G1 is None:
            self._G1 = self.harm_grad_at(self.grid.s3_nodes)
        return self._G1

    @property
    def G2(self):
        if self._G2 is None:
            self._G2 = self.harm_hess_at(self.grid.s3_nodes)
        return self._G2

    # -- synthesis / analysis ----------------------------------------------

    def synthesize(self, fld):
        """Grid values of a field, shape (nq, ns)."""
        c = fld.coeffs
        n1, nh = c.shape
        return (self.By[:n1].T @ c) @ self.Hs[:nh]

    def analyze(self, values, n_y=None, k_omega=None):
        """Project grid values onto the basis inside the truncation."""
        n_y = self.n_y if n_y is None else n_y
        k_omega = self.k_omega if k_omega is None else k_omega
        nh = harm_count(k_omega)
        By = self.By[:n_y + 1] * self.grid.y_weights
        Hs = self.Hs[:nh] * self.grid.s3_weights
        c = (By @ values) @ Hs.T
        c /= np.outer(self.herm_norms[:n_y + 1], self.harm_norms[:nh])
        return SpectralField(c, n_y, k_omega)

    def eval_at(self, fld, y, omega):
        """Field values at arbitrary points (broadcast y against omega rows)."""
        c = fld.coeffs
        Hy = self.hermite.values(np.asarray(y, dtype=float))[:c.shape[0]]
        Ho = np.stack([poly_eval(self.harm_polys[f], omega)
                       for f in range(c.shape[1])])
        return np.einsum("nf,n...,f...->...", c, Hy, Ho)

    # -- exact coefficient operators ---------------------------------------

    def diff_y(self, fld):
        """d/dy in coefficients: H_n' = n H_{n-1} exactly."""
        c = fld.coeffs
        out = np.zeros_like(c)
        n = np.arange(1, c.shape[0])
        out[:-1] = n[:, None] * c[1:]
        return SpectralField(out, fld.n_y, fld.k_omega)

    def mul_y(self, fld):
        """Multiplication by y: y H_n = H_{n+1} + 2n H_{n-1} (needs headroom)."""
        c = fld.coeffs
        out = np.zeros((c.shape[0] + 1, c.shape[1]))
        out[1:] += c
        n = np.arange(1, c.shape[0])
        out[:-2] += 2 * n[:, None] * c[1:]
        return SpectralField(out, fld.n_y + 1, fld.k_omega)

    def laplace_s3(self, fld):
        k = self.harm_k[:fld.coeffs.shape[1]]
        return SpectralField(fld.coeffs * (-k * (k + 2.0)), fld.n_y, fld.k_omega)

    def grad_perp_values(self, fld, active=None):
        """Tangential gradient on the grid, shape (nq, ns, 4)."""
        c = fld.coeffs
        if active is None:
            active = np.nonzero(np.any(c != 0.0, axis=0))[0]
        if len(active) == 0:
            return np.zeros(self.grid.shape + (4,))
        cy = self.By[:c.shape[0]].T @ c[:, active]       # (nq, n_active)
        return np.einsum("ia,amb->imb", cy, self.G1[active])

    def grad_perp(self, fld, direction):
        """e_j . grad_perp as a SpectralField (one harmonic degree headroom)."""
        vals = self.grad_perp_values(fld)[..., direction]
        return self.analyze(vals, fld.n_y, min(fld.k_omega + 1, self.k_ext))

    def hess_perp_values(self, fld, active=None):
        """Second tangential derivatives on the grid, shape (nq, ns, 4, 4)."""
        c = fld.coeffs
        if active is None:
            active = np.nonzero(np.any(c != 0.0, axis=0))[0]
        if len(active) == 0:
            return np.zeros(self.grid.shape + (4, 4))
        cy = self.By[:c.shape[0]].T @ c[:, active]
        return np.einsum("ia,amcb->imcb", cy, self.G2[active])


_BASIS_CACHE = {}


def get_basis(n_y, k_omega):
    """Memoized BasisSet constructor (tables are expensive to build)."""
    key = (n_y, k_omega)
    if key not in _BASIS_CACHE:
        _BASIS_CACHE[key] = BasisSet(n_y, k_omega)
    return _BASIS_CACHE[key]


# ---------------------------------------------------------------------------
# Cutoff functions
# ---------------------------------------------------------------------------

@dataclass
class CutoffSpec:
    """Smooth compactly supported cutoff profiles.

    kind 'chi_R' / 'chi_Z': even profile, 1 on |x| <= scale, 0 beyond
    (1+eps) * scale.  kind 'chi_two_sided': separate left/right scales.
    The transition uses the polynomial bump q(s) = 1 - I(s)/I(1) with
    I(s) = int_0^s t^p (1-t)^p dt, so the first p derivatives vanish at
    both edges and the j-th derivative behaves like C_j (1-s)^(p-j) at
    the outer edge.
    """

    kind: str = "chi_R"
    p: int = 30
    eps: float = 0.25
    left_scale: float = 1.0
    right_scale: float = 1.0

    def profile(self, s):
        """The base bump q on [0, 1] (1 at s<=0, 0 at s>=1)."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        return 1.0 - betainc(self.p + 1, self.p + 1, s)

    def __call__(self, x, scale=None):
        x = np.asarray(x, dtype=float)
        if self.kind == "chi_two_sided":
            sc = np.where(x >= 0, self.right_scale, self.left_scale)
        else:
            sc = scale if scale is not None else self.right_scale
        return self.profile((np.abs(x) / sc - 1.0) / self.eps)


def apply_cutoff(values, cutoff, scale, y_nodes):
    """Multiply grid values (nq, ...) by chi(y/scale) along the y axis."""
    chi = cutoff(y_nodes, scale)
    return values * chi.reshape((-1,) + (1,) * (np.ndim(values) - 1))


# ---------------------------------------------------------------------------
# Region schedules
# ---------------------------------------------------------------------------

EXP_HALF = 0.5 + 0.05  # the exponent 1/2 + 1/20 used by all region radii


@dataclass
class RegionSchedule:
    """Growing spatial regions R, Z_m, Z~_m, Y_{T2} for a degenerate order m."""

    m: int
    T1: float

    def __post_init__(self):
        f = lambda t: self.z_tilde(t) - t**EXP_HALF
        hi = self.T1 + 1.0
        while f(hi) < 0:
            hi += 1.0
        self.T2 = brentq(f, self.T1, hi, xtol=1e-12)

    def R(self, tau):
        return 8.0 * np.asarray(tau, dtype=float) ** EXP_HALF

    def z_tilde(self, tau):
        dt = np.maximum(np.asarray(tau, dtype=float) - self.T1, 0.0)
        return np.exp((self.m - 2) * dt / (2.0 * self.m)) * np.exp(10.0 * np.sqrt(dt))

    def Z(self, tau):
        return self.z_tilde(tau) + 5.0 * np.asarray(tau, dtype=float) ** EXP_HALF

    def Y(self, tau):
        dt = np.maximum(np.asarray(tau, dtype=float) - self.T2, 0.0)
        return np.exp(20.0 * self.m * np.sqrt(dt))


# ---------------------------------------------------------------------------
# Snapshot files
# ---------------------------------------------------------------------------

def save_field(path, fld, tau, basis_set):
    """Write a field snapshot: header (truncation, tau), then (n,k,l,c) rows."""
    with open(path, "w") as fh:
        fh.write("# n_y=%d k_omega=%d tau=%.17g\n" % (fld.n_y, fld.k_omega, tau))
        for n in range(fld.coeffs.shape[0]):
            for f in range(fld.coeffs.shape[1]):
                c = fld.coeffs[n, f]
                if c != 0.0:
                    k, l = basis_set.harm_kl[f]
                    fh.write("%d\t%d\t%d\t%.17g\n" % (n, k, l, c))


def load_field(path):
    """Read a snapshot written by save_field; returns (field, tau)."""
    with open(path) as fh:
        header = fh.readline().strip()
        parts = dict(tok.split("=") for tok in header.lstrip("# ").split())
        n_y, k_omega = int(parts["n_y"]), int(parts["k_omega"])
        tau = float(parts["tau"])
        fld = zero_field(n_y, k_omega)
        for line in fh:
            if not line.strip():
                continue
            n, k, l, c = line.split("\t")
            f = harm_count(int(k) - 1) + int(l) - 1 if int(k) > 0 else 0
            fld.coeffs[int(n), f] = float(c)
    return fld, tau
