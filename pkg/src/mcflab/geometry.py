"""Cylindrical-graph geometry: axis polynomials, embeddings, the full
first/second-derivative term algebra of the graph equation over a curved
axis, curvature by finite differences, and level-set oracles.

A surface is the graph u(z, omega, t) over a (possibly curved) axis
z -> (z, Pi(z,t)) in R^5, parametrized by

    Phi(z, omega) = (z, Pi(z,t)) + u(z,omega,t) (-(d_z Pi . omega), omega).

All angular calculus uses the 0-homogeneous extension of functions on S^3;
tangential gradients and Hessians are extension independent.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import basis as basis_mod

_HERMITE = basis_mod.build_hermite(16)


def _hermite_deriv_coeffs(n, order):
    c = _HERMITE.coeffs[n]
    return np.polynomial.polynomial.polyder(c, order) if order else c


def _hermite_eval(n, order, x):
    return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float),
                                            _hermite_deriv_coeffs(n, order))


class AxisPolynomial:
    """Axis perturbation with coefficient vectors a[n] in R^4, 2 <= n <= N.

    Rescaled form      Q(y, tau) = sum_n H_n(y) exp(-(n-1) tau / 2) a_n,
    physical form      Pi(z, t)  = sum_n H_n(z/s) s^n a_n,  s = sqrt(T-t),
    related by Q(y, tau) = Pi(z, t)/s under y = z/s, tau = -ln(T-t).
    """

    def __init__(self, a=None, T=1.0):
        self.a = {int(n): np.asarray(v, dtype=float) for n, v in (a or {}).items()
                  if np.any(np.asarray(v) != 0.0)}
        for n in self.a:
            if n < 2:
                raise ValueError("axis coefficients start at degree 2")
        self.T = float(T)

    @property
    def degree(self):
        return max(self.a, default=0)

    def is_zero(self):
        return not self.a

    def Q(self, y, tau, dy=0, dtau=0):
        """Derivatives d^dy/dy^dy d^dtau/dtau^dtau of Q; shape (..., 4)."""
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape + (4,))
        for n, an in self.a.items():
            rate = -(n - 1) / 2.0
            amp = rate**dtau * np.exp(rate * tau)
            out += (_hermite_eval(n, dy, y) * amp)[..., None] * an
        return out

    def Pi(self, z, t, dz=0, dt=0):
        """Physical axis and derivatives; dt in {0, 1}; shape (..., 4)."""
        z = np.asarray(z, dtype=float)
        s = math.sqrt(self.T - t)
        w = z / s
        out = np.zeros(z.shape + (4,))
        for n, an in self.a.items():
            if dt == 0:
                val = _hermite_eval(n, dz, w) * s ** (n - dz)
            else:
                # d/dt [s^(n-dz) H^(dz)(z/s)] with ds/dt = -1/(2s)
                h = _hermite_eval(n, dz, w)
                hp = _hermite_eval(n, dz + 1, w)
                val = 0.5 * s ** (n - dz - 2) * (w * hp - (n - dz) * h)
            out += val[..., None] * an
        return out


def embed(Q, v, y, omega, tau, frame="rescaled"):
    """Embedding point(s) in R^5 of the rescaled graph over the axis Q.

    frame='physical' returns the physical-frame point exp(-tau/2) * Psi.
    """
    y = np.asarray(y, dtype=float)
    omega = np.asarray(omega, dtype=float)
    v = np.asarray(v, dtype=float)
    Qv = Q.Q(y, tau)
    Qy = Q.Q(y, tau, dy=1)
    out = np.empty(np.broadcast(y, v, omega[..., 0]).shape + (5,))
    out[..., 0] = y - v * np.einsum("...b,...b->...", Qy, omega)
    out[..., 1:] = Qv + v[..., None] * omega
    if frame == "physical":
        out = out * math.exp(-tau / 2.0)
    elif frame != "rescaled":
        raise ValueError("frame must be 'rescaled' or 'physical'")
    return out


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------

def tangent_frames(omega):
    """Orthonormal tangent frames at points of S^3; (..., 4) -> (..., 3, 4).

    Coordinate directions are taken in order of increasing |omega_i| so the
    Gram-Schmidt projections never degenerate; the choice is deterministic.
    """
    omega = np.asarray(omega, dtype=float)
    order = np.argsort(np.abs(omega), axis=-1, kind="stable")
    frames = np.empty(omega.shape[:-1] + (3, 4))
    for i in range(3):
        v = np.zeros_like(omega)
        np.put_along_axis(v, order[..., i:i + 1], 1.0, axis=-1)
        v = v - np.einsum("...b,...b->...", v, omega)[..., None] * omega
        for j in range(i):
            u = frames[..., j, :]
            v = v - np.einsum("...b,...b->...", v, u)[..., None] * u
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        frames[..., i, :] = v
    return frames


def fd_jet_provider(u_fn, h1=1e-5, h2=1e-3):
    """Jet provider from a plain callable u(z, omega, t).

    Angular derivatives are finite differences of the 0-homogeneous
    extension u(z, x/|x|, t); the tangential Hessian uses the identity
    e_a . grad_perp(grad_perp u . e_b) = Hess_ab + omega_a (grad u)_b
    valid for that extension.  Returns a dict jet evaluable on arrays.
    """

    def ext(z, x, t):
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return u_fn(z, x / r, t)

    def provider(z, omega, t):
        z = np.asarray(z, dtype=float)
        omega = np.asarray(omega, dtype=float)
        hz = h1 * (1.0 + np.abs(z))
        hzz = h2 * (1.0 + np.abs(z))
        jet = {}
        jet["u"] = u_fn(z, omega, t)
        jet["u_z"] = (u_fn(z + hz, omega, t) - u_fn(z - hz, omega, t)) / (2 * hz)
        jet["u_zz"] = (u_fn(z + hzz, omega, t) - 2 * jet["u"]
                       + u_fn(z - hzz, omega, t)) / hzz**2
        jet["u_t"] = (u_fn(z, omega, t + h1) - u_fn(z, omega, t - h1)) / (2 * h1)

        eye = np.eye(4)
        grad = np.empty(omega.shape)
        grad_z = np.empty(omega.shape)
        for b in range(4):
            xp, xm = omega + h1 * eye[b], omega - h1 * eye[b]
            grad[..., b] = (ext(z, xp, t) - ext(z, xm, t)) / (2 * h1)
            grad_z[..., b] = ((ext(z + hz, xp, t) - ext(z + hz, xm, t))
                              - (ext(z - hz, xp, t) - ext(z - hz, xm, t))) \
                / (4 * h1 * hz)
        # clean projection: the extension gradient is tangent analytically
        for g in (grad, grad_z):
            g -= np.einsum("...b,...b->...", g, omega)[..., None] * omega
        jet["gp"] = grad
        jet["gp_z"] = grad_z

        hess = np.empty(omega.shape[:-1] + (4, 4))
        for a in range(4):
            xp, xm = omega + h2 * eye[a], omega - h2 * eye[a]
            hess[..., a, a] = (ext(z, xp, t) - 2 * jet["u"] + ext(z, xm, t)) / h2**2
            for b in range(a + 1, 4):
                pp = ext(z, omega + h2 * (eye[a] + eye[b]), t)
                pm = ext(z, omega + h2 * (eye[a] - eye[b]), t)
                mp = ext(z, omega - h2 * (eye[a] - eye[b]), t)
                mm = ext(z, omega - h2 * (eye[a] + eye[b]), t)
                hess[..., a, b] = hess[..., b, a] = (pp - pm - mp + mm) / (4 * h2**2)
        hess = hess + omega[..., :, None] * grad[..., None, :]
        jet["hess"] = hess
        return jet

    return provider


def analytic_jet_provider(u, u_z, u_zz, u_t=None):
    """Jet provider for an angular-independent (radial) surface u(z, t)."""

    def provider(z, omega, t):
        z = np.asarray(z, dtype=float)
        omega = np.asarray(omega, dtype=float)
        shape = np.broadcast(z, omega[..., 0]).shape
        jet = {
            "u": np.broadcast_to(np.asarray(u(z, t), dtype=float), shape).copy(),
            "u_z": np.broadcast_to(np.asarray(u_z(z, t), dtype=float), shape).copy(),
            "u_zz": np.broadcast_to(np.asarray(u_zz(z, t), dtype=float), shape).copy(),
            "gp": np.zeros(shape + (4,)),
            "gp_z": np.zeros(shape + (4,)),
            "hess": np.zeros(shape + (4, 4)),
        }
        if u_t is not None:
            jet["u_t"] = np.broadcast_to(np.asarray(u_t(z, t), dtype=float),
                                         shape).copy()
        return jet

    return provider


@dataclass
class JetPoint:
    """A surface/axis jet at a base point, with its generating provider.

    The provider is retained because the second-derivative terms of the
    graph equation involve z- and omega-derivatives of composite
    quantities, which require re-evaluating the jet at displaced points.
    """

    provider: object
    axis: AxisPolynomial
    z: np.ndarray
    omega: np.ndarray
    t: float
    jet: dict = dc_field(default=None, repr=False)

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        if self.jet is None:
            self.jet = self.provider(self.z, self.omega, self.t)

    @property
    def u(self):
        return self.jet["u"]


# ---------------------------------------------------------------------------
# Appendix term algebra
# ---------------------------------------------------------------------------

def _dot(a, b):
    return np.einsum("...b,...b->...", a, b)


def _p_perp(omega, A):
    return A - _dot(omega, A)[..., None] * omega


def _axis_jet(axis, z, t):
    return {
        "Pi": axis.Pi(z, t),
        "Piz": axis.Pi(z, t, dz=1),
        "Pizz": axis.Pi(z, t, dz=2),
        "Pit": axis.Pi(z, t, dt=1),
        "Pizt": axis.Pi(z, t, dz=1, dt=1),
    }


def _lde(jet, ax, omega, r):
    """The auxiliary scalars L, D and vectors E, G at given |x~| = r."""
    u, uz = jet["u"], jet["u_z"]
    gp = jet["gp"]
    Piz = ax["Piz"]
    Pizz_w = _dot(ax["Pizz"], omega)
    Piz_w = _dot(Piz, omega)
    Pp = _p_perp(omega, Piz)
    Pp2 = _dot(Pp, Pp)
    gp_Piz = _dot(gp, Piz)

    L = (-uz * (uz * Piz_w + Pizz_w * u) - Piz_w) \
        + (uz * (u * Pp2 + Piz_w * gp_Piz) + gp_Piz) / r
    D = (u / r) * Pp2 - uz * Piz_w - Pizz_w * u + (Piz_w / r) * gp_Piz
    G = u[..., None] * Pp + Piz_w[..., None] * gp
    E = -(Piz_w + uz)[..., None] * G + (gp_Piz / r)[..., None] * G
    return L, D, E, G


class _Composites:
    """Scalar composites C1 = L/(1+D), C2_b = E_b/(r(1+D)), C3_b = E_b/(1+D)
    as functions of (z, omega, r), with finite-difference z-, r- and
    tangential derivatives obtained by re-evaluating the jet."""

    def __init__(self, provider, axis, t, h1=1e-5):
        self.provider = provider
        self.axis = axis
        self.t = t
        self.h1 = h1

    def raw(self, z, omega, r, jet=None):
        if jet is None:
            jet = self.provider(z, omega, self.t)
        ax = _axis_jet(self.axis, z, self.t)
        L, D, E, _ = _lde(jet, ax, omega, r)
        C1 = L / (1.0 + D)
        C2 = E / (r * (1.0 + D))[..., None]
        C3 = E / (1.0 + D)[..., None]
        return C1, C2, C3

    @staticmethod
    def _diffs(plus, minus, h):
        h = np.asarray(h)
        out = []
        for a, b in zip(plus, minus):
            hh = h[..., None] if a.ndim > h.ndim else h
            out.append((a - b) / (2.0 * hh))
        return tuple(out)

    def dz(self, z, omega, r):
        h = self.h1 * (1.0 + np.abs(z))
        return self._diffs(self.raw(z + h, omega, r),
                           self.raw(z - h, omega, r), h)

    def dr(self, z, omega, r, jet=None):
        if jet is None:
            jet = self.provider(z, omega, self.t)
        h = self.h1 * (1.0 + np.abs(r))
        return self._diffs(self.raw(z, omega, r + h, jet=jet),
                           self.raw(z, omega, r - h, jet=jet), h)

    def grad_perp(self, z, omega, r):
        """Tangential gradients; shapes (...,4), (...,4,4), (...,4,4) with
        the derivative direction as the last axis."""
        frames = tangent_frames(omega)
        h = self.h1
        g1 = np.zeros(omega.shape)
        g2 = np.zeros(omega.shape[:-1] + (4, 4))
        g3 = np.zeros(omega.shape[:-1] + (4, 4))
        for i in range(3):
            tv = frames[..., i, :]
            op = omega + h * tv
            om = omega - h * tv
            op /= np.linalg.norm(op, axis=-1, keepdims=True)
            om /= np.linalg.norm(om, axis=-1, keepdims=True)
            cp = self.raw(z, op, r)
            cm = self.raw(z, om, r)
            d1 = (cp[0] - cm[0]) / (2 * h)
            d2 = (cp[1] - cm[1]) / (2 * h)
            d3 = (cp[2] - cm[2]) / (2 * h)
            g1 += d1[..., None] * tv
            g2 += d2[..., :, None] * tv[..., None, :]
            g3 += d3[..., :, None] * tv[..., None, :]
        return g1, g2, g3


@dataclass
class AppendixASample:
    """Every term-algebra quantity at one (batch of) evaluation point(s)."""

    D: np.ndarray
    L: np.ndarray
    E: np.ndarray
    G: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    Omega: np.ndarray       # (..., 5)
    Sigma: np.ndarray       # (..., 5)
    Omega2: np.ndarray      # (..., 5, 5), symmetric
    Sigma2: np.ndarray      # (..., 5, 5), symmetric
    N_tilde: np.ndarray
    V_tilde: np.ndarray
    asym_residual: float    # worst symmetry defect before symmetrization
    x_norm: np.ndarray


def appendix_a(jet_point, x_norm=None, h1=1e-5):
    """Evaluate the full graph-equation term algebra at a jet point.

    x_norm substitutes |x~|; the defaults N(u), V_Pi(u) use x_norm = u.
    """
    jp = jet_point.jet
    omega = jet_point.omega
    z, t = jet_point.z, jet_point.t
    r = jp["u"] if x_norm is None else np.asarray(x_norm, dtype=float)
    if np.any(r <= 0):
        raise ValueError("x_norm must be positive")
    ax = _axis_jet(jet_point.axis, z, t)
    L, D, E, G = _lde(jp, ax, omega, r)
    if np.any(np.abs(1.0 + D) < 1e-8):
        raise FloatingPointError("degenerate frame: |1+D| < 1e-8")

    u, uz, uzz = jp["u"], jp["u_z"], jp["u_zz"]
    gp, gpz, hess = jp["gp"], jp["gp_z"], jp["hess"]
    Piz, Pit = ax["Piz"], ax["Pit"]
    Piz_w = _dot(Piz, omega)
    gp_Piz = _dot(gp, Piz)
    shape = np.broadcast(z, omega[..., 0]).shape

    Om = np.empty(shape + (5,))
    Om[..., 0] = -uz
    Om[..., 1:] = omega - gp / r[..., None]
    Om2 = np.empty(shape + (5, 5))
    Om2[..., 0, 0] = -uzz
    Om2[..., 0, 1:] = Om2[..., 1:, 0] = -gpz / r[..., None]
    eye = np.eye(4)
    pperp = eye - omega[..., :, None] * omega[..., None, :]
    Om2[..., 1:, 1:] = (pperp / r[..., None, None]
                        - hess / r[..., None, None]**2
                        + omega[..., :, None] * gp[..., None, :]
                        / r[..., None, None]**2)

    Si = np.empty(shape + (5,))
    Si[..., 0] = L / (1.0 + D)
    Si[..., 1:] = E / (r * (1.0 + D))[..., None]

    axis_zero = jet_point.axis.is_zero()
    if axis_zero:
        Si2 = np.zeros(shape + (5, 5))
        Q1 = np.zeros(shape)
        Q2 = np.zeros(shape)
        Si[...] = 0.0
    else:
        # Second derivatives of f = |x~| - u assembled by the chain rule on
        # the composites F1 = -u_z + L/(1+D), Fk = Omega_k + E_k/(r(1+D)),
        # which are functions of the independent triple (z, omega, |x~|),
        # using the displacement identities for d/dq and d/dx_k.
        comp = _Composites(jet_point.provider, jet_point.axis, t, h1=h1)
        dzC1, dzC2, _ = comp.dz(z, omega, r)
        drC1, drC2, _ = comp.dr(z, omega, r, jet=jp)
        gpC1, gpC2, _ = comp.grad_perp(z, omega, r)

        rr = r[..., None]
        Ppiz = _p_perp(omega, Piz)
        dq_z = 1.0 / (1.0 + D)
        dq_om = -Ppiz / ((1.0 + D) * r)[..., None]
        dq_r = -Piz_w / (1.0 + D)
        gamma = G / (r * (1.0 + D))[..., None]                    # dz/dx_l
        dx_r = omega - gamma * Piz_w[..., None]                   # d|x~|/dx_l
        dx_om = (pperp - gamma[..., :, None] * Ppiz[..., None, :]) \
            / r[..., None, None]                                  # (l, dir)

        dzF1 = -uzz + dzC1
        gpF1 = -gpz + gpC1
        dzFk = -gpz / rr + dzC2
        # (k, dir): P_perp e_k . e_b - hess[b,k]/r + gpC2[k,b]
        gpFk = pperp - hess.swapaxes(-1, -2) / rr[..., None] + gpC2
        drFk = gp / rr**2 + drC2

        f11 = dq_z * dzF1 + _dot(dq_om, gpF1) + dq_r * drC1
        f1k = (dq_z[..., None] * dzFk
               + np.einsum("...b,...kb->...k", dq_om, gpFk)
               + dq_r[..., None] * drFk)
        flk = (gamma[..., :, None] * dzFk[..., None, :]
               + np.einsum("...lb,...kb->...lk", dx_om, gpFk)
               + dx_r[..., :, None] * drFk[..., None, :])

        Si2 = np.empty(shape + (5, 5))
        Si2[..., 0, 0] = f11 - Om2[..., 0, 0]
        Si2[..., 0, 1:] = Si2[..., 1:, 0] = f1k - Om2[..., 0, 1:]
        Si2[..., 1:, 1:] = flk - Om2[..., 1:, 1:]

        Q1 = (Piz_w**2 + uz * Piz_w - gp_Piz * Piz_w / r) / (1.0 + D)
        Q2 = (-_dot(omega, Pit) + _dot(Pit, gp) / r
              + (-Piz_w - uz + gp_Piz / r) / (1.0 + D)
              * (-_dot(Piz_w[..., None] * gp + u[..., None] * Piz,
                       _p_perp(omega, Pit)) / r
                 + u * _dot(ax["Pizt"], omega)))

    # symmetry defect diagnostic, then exact symmetrization
    asym = float(np.max(np.abs(Om2 - Om2.swapaxes(-1, -2))))
    asym = max(asym, float(np.max(np.abs(Si2 - Si2.swapaxes(-1, -2)))))
    Om2 = 0.5 * (Om2 + Om2.swapaxes(-1, -2))
    Si2 = 0.5 * (Si2 + Si2.swapaxes(-1, -2))

    def quotient(V, M):
        num = np.einsum("...l,...j,...lj->...", V, V, M)
        den = np.einsum("...l,...l->...", V, V)
        return num / den

    N_tilde = quotient(Om, Om2)
    if axis_zero:
        V_tilde = np.zeros(shape)
    else:
        W_full = quotient(Om + Si, Om2 + Si2)
        tr_full = np.einsum("...kk->...", Om2 + Si2)
        tr_Si = np.einsum("...kk->...", Si2)
        V_tilde = (Q2 / (1.0 + Q1)
                   + Q1 / (1.0 + Q1) * (tr_full - W_full)
                   - tr_Si + W_full - N_tilde)

    return AppendixASample(D=D, L=L, E=E, G=G, Q1=Q1, Q2=Q2,
                           Omega=Om, Sigma=Si, Omega2=Om2, Sigma2=Si2,
                           N_tilde=N_tilde, V_tilde=V_tilde,
                           asym_residual=asym, x_norm=r)


def u_rhs(jet_point, sample=None):
    """Right-hand side of the physical graph equation:

        d_t u = d_z^2 u + u^{-2} Lap_{S^3} u - 3/u + N(u) + V_Pi(u).
    """
    jp = jet_point.jet
    if sample is None:
        sample = appendix_a(jet_point)
    u = jp["u"]
    lap = np.einsum("...aa->...", jp["hess"])
    return jp["u_zz"] + lap / u**2 - 3.0 / u + sample.N_tilde + sample.V_tilde


# ---------------------------------------------------------------------------
# Level-set oracle
# ---------------------------------------------------------------------------

def _solve_z(u_fn, axis, q, x_tilde_plus_pi, t, tol=1e-12, max_iter=50):
    """Newton-solve q = z - u(z, omega(z), t) (d_z Pi . omega(z)) for z.

    x_tilde_plus_pi is the angular coordinate block x_2..x_5; omega(z) =
    (x - Pi(z,t)) / |x - Pi(z,t)|.  Initial guess z = q.
    """
    z = np.array(q, dtype=float, copy=True)
    h = 1e-7 * (1.0 + np.abs(np.asarray(q)))

    def resid(zv):
        xt = x_tilde_plus_pi - axis.Pi(zv, t)
        r = np.linalg.norm(xt, axis=-1)
        omega = xt / r[..., None]
        uval = u_fn(zv, omega, t)
        return q - zv + uval * _dot(axis.Pi(zv, t, dz=1), omega)

    for _ in range(max_iter):
        f0 = resid(z)
        if np.max(np.abs(f0)) < tol:
            return z
        df = (resid(z + h) - resid(z - h)) / (2 * h)
        z = z - f0 / df
    res = float(np.max(np.abs(resid(z))))
    if res > 1e-9:
        raise RuntimeError("Newton for z(q, omega, t) stalled, residual %.3e" % res)
    return z


def verify_level_set(u_fn, axis, points, t=0.0, h=1e-4, provider=None):
    """Compare finite differences of f = |x~| - u against the term algebra.

    points: array (..., 5) of base points (z, omega).  Returns a dict of
    worst relative errors for the three identity families: first spatial
    derivatives ('kf'), second derivatives ('klf'), time derivative ('tf'),
    plus the per-sample table.
    """
    points = np.asarray(points, dtype=float)
    z0 = points[..., 0]
    omega0 = points[..., 1:]
    omega0 = omega0 / np.linalg.norm(omega0, axis=-1, keepdims=True)
    if provider is None:
        provider = fd_jet_provider(u_fn)
    jp = JetPoint(provider, axis, z0, omega0, t)
    sample = appendix_a(jp)
    u0 = jp.u
    x0 = axis.Pi(z0, t) + u0[..., None] * omega0          # x_2..x_5 block
    q0 = z0 - u0 * _dot(axis.Pi(z0, t, dz=1), omega0)

    def f_of(q, x, tt):
        zz = _solve_z(u_fn, axis, q, x, tt)
        xt = x - axis.Pi(zz, tt)
        r = np.linalg.norm(xt, axis=-1)
        omega = xt / r[..., None]
        return r - u_fn(zz, omega, tt)

    # first derivatives, 5 coordinates (q, x_2..x_5)
    fd1 = np.empty(z0.shape + (5,))
    for k in range(5):
        dq = h if k == 0 else 0.0
        dx = np.zeros(4)
        if k > 0:
            dx[k - 1] = h
        fd1[..., k] = (f_of(q0 + dq, x0 + dx, t) - f_of(q0 - dq, x0 - dx, t)) / (2 * h)
    formula1 = sample.Omega + sample.Sigma
    err1 = np.abs(fd1 - formula1) / np.maximum(np.abs(formula1), 1.0)

    # second derivatives at a coarser step
    h2 = max(h, 1e-4) * 10.0
    fd2 = np.empty(z0.shape + (5, 5))
    steps = [np.zeros(5) for _ in range(5)]
    for k in range(5):
        steps[k][k] = h2
    f00 = f_of(q0, x0, t)

    def f_step(s):
        return f_of(q0 + s[0], x0 + s[1:], t)

    for k in range(5):
        fd2[..., k, k] = (f_step(steps[k]) - 2 * f00 + f_step(-steps[k])) / h2**2
        for l in range(k + 1, 5):
            pp = f_step(steps[k] + steps[l])
            pm = f_step(steps[k] - steps[l])
            mp = f_step(-steps[k] + steps[l])
            mm = f_step(-steps[k] - steps[l])
            fd2[..., k, l] = fd2[..., l, k] = (pp - pm - mp + mm) / (4 * h2**2)
    formula2 = sample.Omega2 + sample.Sigma2
    err2 = np.abs(fd2 - formula2) / np.maximum(np.abs(formula2), 1.0)

    # time derivative
    ht = 1e-5
    fdt = (f_of(q0, x0, t + ht) - f_of(q0, x0, t - ht)) / (2 * ht)
    u_t = jp.jet["u_t"]
    formulat = -(1.0 + sample.Q1) * u_t + sample.Q2
    errt = np.abs(fdt - formulat) / np.maximum(np.abs(formulat), 1.0)

    return {
        "kf": float(np.max(err1)),
        "klf": float(np.max(err2)),
        "tf": float(np.max(errt)),
        "fd1": fd1, "formula1": formula1,
        "fd2": fd2, "formula2": formula2,
        "fdt": fdt, "formulat": formulat,
        "sample": sample,
    }


# ---------------------------------------------------------------------------
# Curvature and Gaussian density
# ---------------------------------------------------------------------------

@dataclass
class CurvatureReport:
    mean_curvature: float
    second_form_norm_sq: float
    normal: np.ndarray


def curvature(patch, center, h=1e-4, inward_point=None):
    """Mean curvature and |A|^2 of a 4-parameter patch in R^5 at `center`.

    patch: callable mapping parameter 4-vectors to points of R^5.  First
    and second fundamental forms are assembled from central differences;
    the normal is the singular direction orthogonal to the tangents,
    oriented toward `inward_point` (default: the origin), so the round
    sphere and the round cylinder about an axis through that point have
    positive mean curvature.
    """
    center = np.asarray(center, dtype=float)
    eye = np.eye(4)
    X0 = patch(center)
    Xi = np.empty((4, 5))
    Xij = np.empty((4, 4, 5))
    for i in range(4):
        Xi[i] = (patch(center + h * eye[i]) - patch(center - h * eye[i])) / (2 * h)
        Xij[i, i] = (patch(center + h * eye[i]) - 2 * X0
                     + patch(center - h * eye[i])) / h**2
        for j in range(i + 1, 4):
            pp = patch(center + h * (eye[i] + eye[j]))
            pm = patch(center + h * (eye[i] - eye[j]))
            mp = patch(center - h * (eye[i] - eye[j]))
            mm = patch(center - h * (eye[i] + eye[j]))
            Xij[i, j] = Xij[j, i] = (pp - pm - mp + mm) / (4 * h**2)
    g = Xi @ Xi.T
    if np.linalg.det(g) < 1e-12:
        raise RuntimeError("singular patch: degenerate metric")
    _, _, vt = np.linalg.svd(Xi, full_matrices=True)
    normal = vt[-1]
    if inward_point is None:
        inward_point = np.zeros(5)
    if np.dot(normal, X0 - np.asarray(inward_point, dtype=float)) > 0:
        normal = -normal
    b = np.einsum("ijb,b->ij", Xij, normal)
    shape_op = np.linalg.solve(g, b)
    hmean = float(np.trace(shape_op))
    a2 = float(np.trace(shape_op @ shape_op))
    return CurvatureReport(hmean, a2, normal)


def gaussian_density(patch, param_nodes, param_weights, x0, t0, h=1e-4):
    """Gaussian density (4 pi t0)^{-2} int exp(-|x-x0|^2 / (4 t0)) dmu.

    The measure uses the area element sqrt(det g) from finite-difference
    tangents of the patch at each parameter node.  Returns (value,
    coverage), where coverage is the smallest Gaussian weight on the
    boundary nodes of the parameter set (a truncation diagnostic).
    """
    param_nodes = np.asarray(param_nodes, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    eye = np.eye(4)
    total = 0.0
    weights_seen = []
    for p, w in zip(param_nodes, param_weights):
        Xi = np.empty((4, 5))
        for i in range(4):
            Xi[i] = (patch(p + h * eye[i]) - patch(p - h * eye[i])) / (2 * h)
        g = Xi @ Xi.T
        area = math.sqrt(max(np.linalg.det(g), 0.0))
        x = patch(p)
        gauss = math.exp(-float(np.sum((x - x0) ** 2)) / (4 * t0))
        weights_seen.append(gauss)
        total += w * gauss * area
    total /= (4 * math.pi * t0) ** 2
    return total, min(weights_seen)
