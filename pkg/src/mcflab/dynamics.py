"""Right-hand side of the rescaled graph flow in spectral space, exponential
time integrators, run recording, and the reduced single-mode ODE.

The evolved unknown is xi = v^2 - 6, the deviation of the squared radius from
the cylinder value.  On the Hermite x spherical-harmonic basis the linear part
of the flow is exactly diagonal with rates -lambda_{n,k}; the nonlinearity is
assembled pointwise on the quadrature grid and re-projected.
"""

import json
import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .basis import eigenvalue_L
from .field import CutoffSpec, SpectralField, get_basis, save_field
from .geometry import AxisPolynomial, JetPoint, appendix_a

V_MIN_DEFAULT = 0.5


class PinchError(RuntimeError):
    """Raised when the graph radius drops below the pinch threshold."""

    def __init__(self, tau, y, value):
        super().__init__(
            "pinch: v = %.6g <= v_min at y = %.6g, tau = %.6g" % (value, y, tau))
        self.tau = tau
        self.y = y
        self.value = value


class AbortError(RuntimeError):
    """Raised on NaN/inf during stepping; carries the last valid state."""

    def __init__(self, message, last_state):
        super().__init__(message)
        self.last_state = last_state


@dataclass
class GraphState:
    """Snapshot of the rescaled flow: time tau, axis polynomial, and the
    spectral coefficients of xi = v^2 - 6.

    Physical time is t = axis.T - exp(-tau), so sqrt(T - t) = exp(-tau/2).
    """

    tau: float
    axis: AxisPolynomial
    xi: SpectralField
    v_min: float = V_MIN_DEFAULT
    meta: dict = dc_field(default_factory=dict)

    @property
    def scale(self):
        """sqrt(T - t) = exp(-tau/2)."""
        return math.exp(-self.tau / 2.0)

    @property
    def t(self):
        return self.axis.T - math.exp(-self.tau)

    def basis(self):
        return get_basis(self.xi.n_y, self.xi.k_omega)

    def is_radial(self):
        return self.axis.is_zero() and not np.any(self.xi.coeffs[:, 1:])

    def copy(self):
        return GraphState(self.tau, self.axis, self.xi.copy(), self.v_min,
                          dict(self.meta))


@dataclass
class LinearOperatorSpec:
    """Diagonal rates lambda_{n,k} over a truncation."""

    rates: np.ndarray  # shape (n_y+1, n_harm)
    n_y: int
    k_omega: int


def linear_rates(basis):
    """Rate array lambda[n, f] for the basis truncation."""
    n1 = basis.n_y + 1
    nh = basis.n_harm()
    k = basis.harm_k[:nh]
    n = np.arange(n1)
    return (n[:, None] - 2) / 2.0 + (k * (k + 2.0) / 6.0)[None, :]


def linear_operator_spec(n_y, k_omega):
    basis = get_basis(n_y, k_omega)
    return LinearOperatorSpec(linear_rates(basis), n_y, k_omega)


# ---------------------------------------------------------------------------
# Jets from the spectral state
# ---------------------------------------------------------------------------

PINCH_CORE_RADIUS = 10.0


def _v_jet_from_xi(xiv, xyv, xyyv, g, gxy, hx, v_min, tau, y_of_node=None):
    """Radius jet (v, v_y, v_yy, grad v, grad v_y, hess v) from the xi jet.

    Positivity is enforced where the truncated Hermite sum is pointwise
    trustworthy (|y| within the core radius); farther out the partial sum
    can stray from the solution while carrying negligible quadrature
    weight, so the squared radius is clamped there instead of aborting.
    """
    vt = 6.0 + xiv
    floor = v_min**2
    bad = vt <= floor
    if np.any(bad):
        if y_of_node is None:
            y_abs = np.zeros(vt.shape)
        else:
            y_abs = np.abs(np.broadcast_to(y_of_node, vt.shape))
        core_bad = bad & (y_abs <= PINCH_CORE_RADIUS)
        if np.any(core_bad):
            masked = np.where(core_bad, vt, np.inf)
            idx = np.unravel_index(np.argmin(masked), vt.shape)
            y_bad = (float(np.broadcast_to(y_of_node, vt.shape)[idx])
                     if y_of_node is not None else float("nan"))
            raise PinchError(tau, y_bad, math.sqrt(max(float(vt[idx]), 0.0)))
        vt = np.where(bad, floor + 1e-6, vt)
    v = np.sqrt(vt)
    inv2v = 0.5 / v
    inv4v3 = 0.25 / v**3
    vy = xyv * inv2v
    vyy = xyyv * inv2v - xyv**2 * inv4v3
    gv = g * inv2v[..., None]
    gvy = gxy * inv2v[..., None] - (xyv * inv4v3)[..., None] * g
    hv = (hx * inv2v[..., None, None]
          - inv4v3[..., None, None] * g[..., :, None] * g[..., None, :])
    return v, vy, vyy, gv, gvy, hv


class _LazyJet(dict):
    """Jet dict whose expensive entries are computed on first access."""

    def __init__(self, base, makers):
        super().__init__(base)
        self._makers = makers

    def __missing__(self, key):
        value = self._makers[key]()
        self[key] = value
        return value


def _factorized(z, omega):
    """Detect outer-product structure: z constant along columns, omega
    constant along rows.  The composite finite differences of the term
    algebra only displace one factor at a time, so every evaluation during
    a right-hand-side assembly keeps this structure."""
    z = np.asarray(z, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if z.ndim != 2 or omega.ndim != 3:
        return None
    if not np.array_equal(z, np.broadcast_to(z[:, :1], z.shape)):
        return None
    if not np.array_equal(omega, np.broadcast_to(omega[:1], omega.shape)):
        return None
    return z[:, 0], omega[0]


def state_jet_provider(state):
    """Physical-frame jet provider u(z, omega, t) reconstructed from the
    rescaled spectral state, evaluable at arbitrary points.

    Relations at s = sqrt(T - t): u = s v, u_z = v_y, u_zz = v_yy / s,
    grad u = s grad v, d_z grad u = grad v_y, hess u = s hess v, with the
    rescaled point y = z / s.  The angular Hessian entry is computed
    lazily; the composite-term finite differences never read it.
    """
    basis = state.basis()
    s = state.scale
    xi = state.xi
    xy = basis.diff_y(xi)
    xyy = basis.diff_y(xy)
    n1, nh = xi.coeffs.shape
    angular_cache = {}

    def angular_tables(om1):
        key = om1.tobytes()
        if key not in angular_cache:
            if len(angular_cache) >= 16:
                angular_cache.clear()
            angular_cache[key] = (basis.harm_values_at(om1, nh),
                                  basis.harm_grad_at(om1, nh))
        return angular_cache[key]

    def provider(z, omega, t):
        z = np.asarray(z, dtype=float)
        omega = np.asarray(omega, dtype=float)
        fact = _factorized(z, omega)
        if fact is not None:
            z1, om1 = fact
            y1 = z1 / s
            Hy = basis.hermite.values(y1)[:n1]            # (n1, nq)
            Ho, Go = angular_tables(om1)                  # (nh,ns), (nh,ns,4)
            cy_xi = Hy.T @ xi.coeffs                      # (nq, nh)
            cy_xy = Hy.T @ xy.coeffs
            cy_xyy = Hy.T @ xyy.coeffs
            xiv = cy_xi @ Ho
            xyv = cy_xy @ Ho
            xyyv = cy_xyy @ Ho
            g = np.einsum("if,fsb->isb", cy_xi, Go)
            gxy = np.einsum("if,fsb->isb", cy_xy, Go)

            def hess_maker():
                To = basis.harm_hess_at(om1, nh)
                hx = np.einsum("if,fsab->isab", cy_xi, To)
                _, _, _, _, _, hv = _v_jet_from_xi(
                    xiv, xyv, xyyv, g, gxy, hx, state.v_min, state.tau,
                    y1[:, None])
                return s * hv

            zeros2 = np.zeros(xiv.shape + (4, 4))
            v, vy, vyy, gv, gvy, _ = _v_jet_from_xi(
                xiv, xyv, xyyv, g, gxy, zeros2, state.v_min, state.tau,
                y1[:, None])
            return _LazyJet({"u": s * v, "u_z": vy, "u_zz": vyy / s,
                             "gp": s * gv, "gp_z": gvy},
                            {"hess": hess_maker})

        y = z / s
        Hy = basis.hermite.values(y)[:n1]
        Ho = basis.harm_values_at(omega, nh)
        Go = basis.harm_grad_at(omega, nh)
        To = basis.harm_hess_at(omega, nh)

        def val(c):
            return np.einsum("nf,n...,f...->...", c, Hy, Ho)

        xiv, xyv, xyyv = val(xi.coeffs), val(xy.coeffs), val(xyy.coeffs)
        g = np.einsum("nf,n...,f...b->...b", xi.coeffs, Hy, Go)
        gxy = np.einsum("nf,n...,f...b->...b", xy.coeffs, Hy, Go)
        hx = np.einsum("nf,n...,f...ab->...ab", xi.coeffs, Hy, To)
        v, vy, vyy, gv, gvy, hv = _v_jet_from_xi(
            xiv, xyv, xyyv, g, gxy, hx, state.v_min, state.tau, y)
        return {
            "u": s * v, "u_z": vy, "u_zz": vyy / s,
            "gp": s * gv, "gp_z": gvy, "hess": s * hv,
        }

    return provider


# ---------------------------------------------------------------------------
# Nonlinearity
# ---------------------------------------------------------------------------

_TAPER = CutoffSpec("chi_R")


def _taper(basis):
    """Mask and smooth profile restricting pointwise evaluation to the
    resolvable part of the grid.

    Edge nodes of the Gauss quadrature carry weights far below roundoff of
    the projections, so truncation/roundoff tails of the coefficient
    vector dominate pointwise values there; the nonlinearity is evaluated
    only where the representation is trustworthy, which perturbs the
    projections below quadrature roundoff."""
    y = basis.grid.y_nodes
    scale = 0.7 * float(np.max(np.abs(y)))
    chi = _TAPER(y, scale)
    return chi > 0.0, chi


def _radial_nonlinearity(state, basis):
    """Pointwise nonlinearity on the y nodes for a radial (omega-independent,
    straight-axis) state; returns a 1-D array over y nodes."""
    mask, chi = _taper(basis)
    y = basis.grid.y_nodes[mask]
    c = state.xi.coeffs[:, 0]
    By = basis.By[:len(c)][:, mask]
    xiv = By.T @ c
    dc = np.zeros_like(c)
    dc[:-1] = np.arange(1, len(c)) * c[1:]
    ddc = np.zeros_like(c)
    ddc[:-1] = np.arange(1, len(c)) * dc[1:]
    xyv = By.T @ dc
    xyyv = By.T @ ddc
    zeros = np.zeros(y.shape + (4,))
    zeros2 = np.zeros(y.shape + (4, 4))
    v, vy, vyy, _, _, _ = _v_jet_from_xi(
        xiv, xyv, xyyv, zeros, zeros, zeros2, state.v_min, state.tau, y)

    s = state.scale
    omega = np.zeros(y.shape + (4,))
    omega[..., 0] = 1.0
    jet = {"u": s * v, "u_z": vy, "u_zz": vyy / s,
           "gp": zeros, "gp_z": zeros, "hess": zeros2}
    jp = JetPoint(None, AxisPolynomial({}, T=state.axis.T),
                  s * y, omega, state.t, jet=jet)
    sample = appendix_a(jp)
    nl = np.zeros(basis.grid.y_nodes.shape)
    nl[mask] = chi[mask] * (-0.5 * xyv**2 / v**2
                            + 2.0 * v * s * sample.N_tilde)
    return nl


def _grid_tables(state, basis):
    """xi value/derivative tables on the full quadrature grid."""
    xi = state.xi
    xy = basis.diff_y(xi)
    xyy = basis.diff_y(xy)
    tabs = {
        "xi": basis.synthesize(xi),
        "xi_y": basis.synthesize(xy),
        "xi_yy": basis.synthesize(xyy),
        "lap": basis.synthesize(basis.laplace_s3(xi)),
        "g": basis.grad_perp_values(xi),
        "g_y": basis.grad_perp_values(xy),
        "hess": basis.hess_perp_values(xi),
    }
    return tabs


def _grid_nonlinearity(state, basis, tabs=None, want_parts=False):
    """Pointwise nonlinearity on the full grid (tapered y rows zeroed);
    optionally the v jet and evaluation mask too."""
    if tabs is None:
        tabs = _grid_tables(state, basis)
    mask, chi = _taper(basis)
    grid = basis.grid
    ym = grid.y_nodes[mask][:, None]
    sub = {key: tabs[key][mask] for key in tabs}
    v, vy, vyy, gv, gvy, hv = _v_jet_from_xi(
        sub["xi"], sub["xi_y"], sub["xi_yy"], sub["g"], sub["g_y"],
        sub["hess"], state.v_min, state.tau,
        np.broadcast_to(ym, sub["xi"].shape))
    vt = v**2
    s = state.scale
    z = s * ym * np.ones_like(sub["xi"])
    omega = np.broadcast_to(grid.s3_nodes, sub["xi"].shape + (4,)).copy()
    jet = {"u": s * v, "u_z": vy, "u_zz": vyy / s,
           "gp": s * gv, "gp_z": gvy, "hess": s * hv}
    provider = None if state.axis.is_zero() else state_jet_provider(state)
    jp = JetPoint(provider, state.axis, z, omega, state.t, jet=jet)
    sample = appendix_a(jp)
    g2 = np.einsum("...b,...b->...", sub["g"], sub["g"])
    nl_sub = ((1.0 / vt - 1.0 / 6.0) * sub["lap"]
              - 0.5 * g2 / vt**2
              - 0.5 * sub["xi_y"]**2 / vt
              + 2.0 * v * s * (sample.N_tilde + sample.V_tilde))
    nl = np.zeros(grid.shape)
    nl[mask] = chi[mask][:, None] * nl_sub
    if want_parts:
        vjet = {"v": v, "v_y": vy, "v_yy": vyy, "gv": gv, "gvy": gvy, "hv": hv}
        return nl, vjet, sample, mask, chi
    return nl


def nonlinear_coeffs(state, basis=None):
    """Spectral coefficients of the full nonlinearity (RHS minus -L xi)."""
    if basis is None:
        basis = state.basis()
    out = np.zeros_like(state.xi.coeffs)
    if state.is_radial():
        nl = _radial_nonlinearity(state, basis)
        By = basis.By[:state.xi.coeffs.shape[0]] * basis.grid.y_weights
        out[:, 0] = (By @ nl) / basis.herm_norms[:state.xi.coeffs.shape[0]]
    else:
        nl = _grid_nonlinearity(state, basis)
        out[:] = basis.analyze(nl).coeffs
    return out


def rhs_xi(state):
    """Spectral coefficients of d xi / d tau."""
    basis = state.basis()
    lam = linear_rates(basis)
    c = -lam * state.xi.coeffs + nonlinear_coeffs(state, basis)
    return SpectralField(c, state.xi.n_y, state.xi.k_omega)


# ---------------------------------------------------------------------------
# Term-by-term breakdown
# ---------------------------------------------------------------------------

@dataclass
class RhsBreakdown:
    """Named pointwise contributions on the quadrature grid.

    linear + K1 + K2 + I1 + J1..J10 + remainder equals the full pointwise
    right-hand side exactly; the named terms are the structurally dominant
    monomials, the remainder collects everything else.
    """

    linear: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    I1: np.ndarray
    J: dict  # keys 1..10
    remainder: np.ndarray

    def total(self):
        return (self.linear + self.K1 + self.K2 + self.I1
                + sum(self.J.values()) + self.remainder)


def rhs_breakdown(state):
    basis = state.basis()
    nl, vjet, _, mask, chi = _grid_nonlinearity(state, basis, want_parts=True)
    lam = linear_rates(basis)
    lin = basis.synthesize(
        SpectralField(-lam * state.xi.coeffs, state.xi.n_y, state.xi.k_omega))

    v, vy, vyy = vjet["v"], vjet["v_y"], vjet["v_yy"]
    gv, gvy, hv = vjet["gv"], vjet["gvy"], vjet["hv"]
    tau = state.tau
    y = basis.grid.y_nodes[mask][:, None]
    omega = basis.grid.s3_nodes
    Qy = state.axis.Q(np.broadcast_to(y, v.shape), tau, dy=1)
    Qyy = state.axis.Q(np.broadcast_to(y, v.shape), tau, dy=2)
    om = _omega_like(omega, v.shape)
    Qy_w = np.einsum("...b,...b->...", Qy, om)
    Qyy_w = np.einsum("...b,...b->...", Qyy, om)
    xi_y = 2.0 * v * vy

    sub = {}
    sub["K1"] = v * vy**2 * vyy
    sub["K2"] = np.einsum("...b,...b->...", gv, gv) / v**2
    sub["I1"] = xi_y**2 / v
    J = {}
    J[1] = vy * Qy_w
    J[2] = np.einsum("...b,...b->...", gv, Qy) * Qy_w / v
    J[3] = np.einsum("...a,...b,...ab->...", Qy, Qy, hv) / v
    J[4] = v * vyy * Qy_w**2
    J[5] = v**2 * vyy * Qyy_w
    J[6] = np.einsum("...b,...b->...", Qy, gvy)
    Qy_perp = Qy - Qy_w[..., None] * om
    J[7] = np.einsum("...b,...b->...", Qy_perp, Qy_perp)
    J[8] = Qy_w**2
    J[9] = v * Qyy_w
    J[10] = v * _axis_drift_term(state.axis, y, om, tau)

    shape = basis.grid.shape
    taper = chi[mask][:, None]

    def embed_rows(values):
        out = np.zeros(shape)
        out[mask] = taper * values
        return out

    K1, K2, I1 = (embed_rows(sub[k]) for k in ("K1", "K2", "I1"))
    Jfull = {k: embed_rows(val) for k, val in J.items()}
    named = K1 + K2 + I1 + sum(Jfull.values())
    remainder = nl - named
    return RhsBreakdown(linear=lin, K1=K1, K2=K2, I1=I1, J=Jfull,
                        remainder=remainder)


def _omega_like(s3_nodes, shape):
    return np.broadcast_to(s3_nodes, shape + (4,))


def _axis_drift_term(axis, y, omega, tau):
    """The axis-drift source: for each axis degree n the polynomial
    sum_k k h_{n-2k,n} y^{n-2k} (omega . a_n) e^{-(n-1)tau/2}, where h_{j,n}
    are the coefficients of the degree-n monic Hermite polynomial."""
    from .geometry import _HERMITE
    out = np.zeros(np.broadcast(y, omega[..., 0]).shape)
    for n, an in axis.a.items():
        amp = math.exp(-(n - 1) * tau / 2.0)
        om_a = np.einsum("...b,b->...", omega, an)
        h = _HERMITE.coeffs[n]
        poly = np.zeros(y.shape)
        for k in range(1, n // 2 + 1):
            poly = poly + k * h[n - 2 * k] * y ** (n - 2 * k)
        out += amp * poly * om_a
    return out


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

def _phi1(z):
    out = np.ones_like(z)
    nz = z != 0.0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def _phi2(z):
    out = np.full_like(z, 0.5)
    nz = np.abs(z) > 1e-7
    out[nz] = (np.expm1(z[nz]) - z[nz]) / z[nz]**2
    small = ~nz & (z != 0.0)
    out[small] = 0.5 + z[small] / 6.0
    return out


def step(state, h, scheme="etdrk2", gauge_modes=None):
    """Advance one step with an exponential integrator.

    exp_euler: c(tau+h) = E c + h phi1 NL(c);  etdrk2 adds the standard
    second-stage correction h phi2 (NL(a) - NL(c)).  E = exp(-lambda h) is
    exact, so purely linear data propagates exactly.

    gauge_modes: list of (n, k, l) whose coefficients are projected to
    zero after the step.  Projecting out the non-decaying low modes plays
    the role of continuously re-fitting the free parameters of the
    blow-up ansatz (time, center, axis) that those directions encode.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    if scheme not in ("exp_euler", "etdrk2"):
        raise ValueError("unknown scheme %r" % (scheme,))
    basis = state.basis()
    lam = linear_rates(basis)
    z = -lam * h
    E = np.exp(z)
    c = state.xi.coeffs
    nl1 = nonlinear_coeffs(state, basis)
    a = E * c + h * _phi1(z) * nl1
    if scheme == "etdrk2":
        mid = GraphState(state.tau + h, state.axis,
                         SpectralField(a, state.xi.n_y, state.xi.k_omega),
                         state.v_min, state.meta)
        nl2 = nonlinear_coeffs(mid, basis)
        new = a + h * _phi2(z) * (nl2 - nl1)
    else:
        new = a
    if not np.all(np.isfinite(new)):
        raise AbortError("non-finite coefficients at tau = %.6g"
                         % (state.tau + h), state)
    if gauge_modes:
        for (n, k, l) in gauge_modes:
            new[n, basis.flat_index(k, l)] = 0.0
    return GraphState(state.tau + h, state.axis,
                      SpectralField(new, state.xi.n_y, state.xi.k_omega),
                      state.v_min, state.meta)


# ---------------------------------------------------------------------------
# Evolution driver and run recording
# ---------------------------------------------------------------------------

def _default_track(n_y, k_omega):
    track = []
    for n in range(2, min(6, n_y) + 1):
        track.append((n, 0, 1))
    if k_omega >= 1:
        for l in range(1, 5):
            track.append((2, 1, l))
    if k_omega >= 2:
        for l in range(1, 10):
            track.append((2, 2, l))
    return track


def evolve(initial, schedule, run_dir=None):
    """Run the flow to schedule['tau_end'] and record a trajectory.

    schedule keys: tau_end (required), h (default 1e-3), scheme
    ('etdrk2' default), snapshot_stride (tau units, default 1.0), track
    (list of (n,k,l), default low modes), cutoff_scale (mode-extraction
    cutoff; None means plain projection).

    Returns a record dict; if run_dir is given, writes config.json,
    trajectory.csv, snapshots/, and events.log there.  A pinch or abort
    preserves the partial record.
    """
    from . import analysis

    tau_end = float(schedule["tau_end"])
    h = float(schedule.get("h", 1e-3))
    scheme = schedule.get("scheme", "etdrk2")
    stride = float(schedule.get("snapshot_stride", 1.0))
    track = [tuple(m) for m in
             schedule.get("track", _default_track(initial.xi.n_y,
                                                  initial.xi.k_omega))]
    cutoff_scale = schedule.get("cutoff_scale")
    gauge = [tuple(m) for m in schedule.get("gauge", [(0, 0, 1), (1, 0, 1)])]
    labels = ["alpha_%d_%d_%d" % m for m in track]

    events = []
    taus = []
    rows = []
    snapshots = []
    state = initial.copy()
    basis = state.basis()

    if run_dir is not None:
        os.makedirs(run_dir, exist_ok=True)
        os.makedirs(os.path.join(run_dir, "snapshots"), exist_ok=True)
        cfg = dict(schedule)
        cfg["n_y"] = initial.xi.n_y
        cfg["k_omega"] = initial.xi.k_omega
        cfg["tau_start"] = initial.tau
        cfg["v_min"] = initial.v_min
        cfg["axis"] = {str(n): list(map(float, a))
                       for n, a in initial.axis.a.items()}
        cfg["track"] = [list(m) for m in track]
        cfg["gauge"] = [list(m) for m in gauge]
        with open(os.path.join(run_dir, "config.json"), "w") as f:
            json.dump(cfg, f, indent=2, sort_keys=True)

    def extract(st):
        alphas = analysis.mode_coefficients(st, track, scale=cutoff_scale)
        taus.append(st.tau)
        rows.append(alphas)

    def snapshot(st):
        snapshots.append((st.tau, st.copy()))
        if run_dir is not None:
            path = os.path.join(run_dir, "snapshots", "tau=%.6f.field" % st.tau)
            save_field(path, st.xi, st.tau, basis)

    status = "complete"
    error = None
    try:
        extract(state)
        snapshot(state)
        next_snap = state.tau + stride
        n_steps = int(round((tau_end - state.tau) / h))
        for _ in range(n_steps):
            state = step(state, h, scheme, gauge_modes=gauge)
            extract(state)
            if state.tau >= next_snap - 1e-12:
                snapshot(state)
                next_snap += stride
    except PinchError as exc:
        status = "pinch"
        error = exc
        events.append("tau=%.17g pinch y=%.17g v=%.17g"
                      % (exc.tau, exc.y, exc.value))
    except AbortError as exc:
        status = "abort"
        error = exc
        state = exc.last_state
        events.append("tau=%.17g abort %s" % (state.tau, exc))
    else:
        if not snapshots or snapshots[-1][0] < state.tau - 1e-12:
            snapshot(state)
        events.append("tau=%.17g run-complete" % state.tau)

    record = {
        "taus": np.array(taus),
        "alphas": {lab: np.array([r[i] for r in rows])
                   for i, lab in enumerate(labels)},
        "track": track,
        "snapshots": snapshots,
        "final": state,
        "status": status,
        "error": error,
        "events": list(events),
    }
    if run_dir is not None:
        with open(os.path.join(run_dir, "trajectory.csv"), "w") as f:
            f.write("tau, " + ", ".join(labels) + "\n")
            for tv, row in zip(taus, rows):
                f.write(", ".join("%.17g" % x for x in [tv] + list(row)) + "\n")
        with open(os.path.join(run_dir, "events.log"), "w") as f:
            for line in events:
                f.write(line + "\n")
    return record


def reduced_mode_ode(b0, taus):
    """Closed-form solution of db/dtau = -b^2/3 from b(taus[0]) = b0."""
    if b0 <= 0:
        raise ValueError("b0 must be positive")
    taus = np.asarray(taus, dtype=float)
    return 1.0 / (1.0 / b0 + (taus - taus[0]) / 3.0)
