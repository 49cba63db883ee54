"""Axis fitting and reparametrization over a new curved cylinder.

The graph parametrization over an axis polynomial Q is

    Psi_{Q,v}(y, omega) = (y, Q(y, tau)) + v(y, omega) (-d_yQ . omega, omega)

in R^5.  `reparametrize` rewrites a state as a graph over a different axis
by solving the matching equation node by node, and `fit_axis` chooses the
degree-n axis coefficients that remove the H_n omega_l directions from the
graph function.
"""

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .basis import tangent_frame
from .geometry import AxisPolynomial
from .dynamics import GraphState, PinchError, PINCH_CORE_RADIUS


class ReparametrizationError(Exception):
    """Newton failed to converge at some grid nodes."""

    def __init__(self, nodes):
        self.nodes = nodes
        super().__init__("reparametrization Newton failed at %d node(s): %s"
                         % (len(nodes), nodes[:5]))


def _harm_table(basis, count):
    """Monomial exponent/coefficient arrays for the first `count` harmonics."""
    polys = basis.harm_polys[:count]
    exps = sorted({e for p in polys for e in p})
    coefs = np.zeros((len(polys), len(exps)))
    index = {e: i for i, e in enumerate(exps)}
    for f, p in enumerate(polys):
        for e, c in p.items():
            coefs[f, index[e]] = c
    return np.array(exps), coefs


def _harm_values(exps, coefs, omega):
    """Values of all harmonics at points omega, shape (n_harm, m)."""
    pmax = int(exps.max())
    pw = np.ones((pmax + 1,) + omega.shape)
    for p in range(1, pmax + 1):
        pw[p] = pw[p - 1] * omega
    mono = (pw[exps[:, 0], :, 0] * pw[exps[:, 1], :, 1]
            * pw[exps[:, 2], :, 2] * pw[exps[:, 3], :, 3])
    return coefs @ mono


def _embed_new(y, omega, v_new, qn, qn_y):
    """Right-hand side of the matching equation, shape (m, 5)."""
    out = np.empty(y.shape + (5,))
    out[..., 0] = y - v_new * np.einsum("...b,...b->...", qn_y, omega)
    out[..., 1:] = qn + v_new[..., None] * omega
    return out


def reparametrize(state, axis_new, tol=1e-11, max_iter=40):
    """Rewrite a state as a graph over a new axis polynomial.

    For each grid node (y, omega) of the new parametrization this solves

        Psi_{Q_old, v_old}(y_old, omega_old)
            = (y, Q_new(y)) + v_new (-d_yQ_new . omega, omega)

    for (y_old, omega_old, v_new) by Newton iteration; omega_old is
    parametrized by a 3-dimensional tangent chart around omega so the
    system is square.  Returns a state at the same tau over axis_new.
    """
    basis = state.basis()
    tau = state.tau
    y_nodes = basis.grid.y_nodes
    om_nodes = basis.grid.s3_nodes

    qy_max = np.abs(axis_new.Q(y_nodes, tau, dy=1)).max()
    if qy_max > 0.1:
        raise ValueError("graph condition violated: max |d_yQ| = %.3g > 0.1"
                         % qy_max)

    ny, ns = y_nodes.size, om_nodes.shape[0]
    y = np.repeat(y_nodes, ns)
    omega = np.tile(om_nodes, (ny, 1))
    frames = np.array([tangent_frame(w) for w in om_nodes])  # (ns, 3, 4)
    frame = np.tile(frames, (ny, 1, 1))                      # (m, 3, 4)
    m = y.size

    qn = np.repeat(axis_new.Q(y_nodes, tau), ns, axis=0)
    qn_y = np.repeat(axis_new.Q(y_nodes, tau, dy=1), ns, axis=0)
    target = _embed_new(y, omega, np.zeros(m), qn, qn_y)
    frame_dir = np.empty((m, 5))
    frame_dir[:, 0] = -np.einsum("mb,mb->m", qn_y, omega)
    frame_dir[:, 1:] = omega

    axis_old = state.axis
    coeffs = state.xi.coeffs
    hermite = basis.hermite
    exps, hcoefs = _harm_table(basis, coeffs.shape[1])

    def xi_old(yo, wo):
        Hy = hermite.values(yo)[:coeffs.shape[0]]
        Ho = _harm_values(exps, hcoefs, wo)
        return np.einsum("nf,nm,fm->m", coeffs, Hy, Ho)

    def v_old(yo, wo):
        return np.sqrt(np.maximum(6.0 + xi_old(yo, wo), 0.0))

    def residual(x, idx):
        yo = x[:, 0]
        wo = omega[idx] + np.einsum("mc,mcb->mb", x[:, 1:4], frame[idx])
        wo = wo / np.linalg.norm(wo, axis=-1, keepdims=True)
        vo = v_old(yo, wo)
        qo = axis_old.Q(yo, tau)
        qo_y = axis_old.Q(yo, tau, dy=1)
        out = np.empty((idx.size, 5))
        out[:, 0] = yo - vo * np.einsum("mb,mb->m", qo_y, wo)
        out[:, 1:] = qo + vo[:, None] * wo
        return out - (target[idx] + x[:, 4:5] * frame_dir[idx])

    def jacobian(x, idx, F):
        J = np.empty((idx.size, 5, 5))
        for j in range(5):
            h = 1e-7 * (1.0 + np.abs(x[:, j]))
            xp = x.copy()
            xp[:, j] += h
            J[:, :, j] = (residual(xp, idx) - F) / h[:, None]
        return J

    x = np.zeros((m, 5))
    x[:, 0] = y
    x[:, 4] = v_old(y, omega)
    scale = 1.0 + np.abs(y)
    # Edge nodes where the truncated expansion has already left the graph
    # regime carry negligible quadrature weight but make the clamped sqrt
    # non-differentiable; keep their direct values and solve the rest.
    vt0 = 6.0 + xi_old(y, omega)
    bad = vt0 <= state.v_min**2
    core_bad = bad & (np.abs(y) <= PINCH_CORE_RADIUS)
    if np.any(core_bad):
        i = int(np.argmin(np.where(core_bad, vt0, np.inf)))
        raise PinchError(tau, float(y[i]),
                         float(np.sqrt(max(vt0[i], 0.0))))
    idx = np.arange(m)[~bad]
    F = residual(x[idx], idx)
    J = jacobian(x[idx], idx, F)
    prev_err = np.inf
    for it in range(max_iter):
        dx = np.linalg.solve(J, F[:, :, None])[:, :, 0]
        x[idx] -= dx
        F_all = residual(x[idx], idx)
        err = np.abs(F_all).max(axis=1) / scale[idx]
        keep = err > tol
        if not keep.any():
            idx = idx[:0]
            break
        worst = err.max()
        idx = idx[keep]
        F = F_all[keep]
        J = J[keep]
        # The Jacobian is frozen while Newton contracts; refresh on stall.
        if worst > 0.5 * prev_err:
            J = jacobian(x[idx], idx, F)
        prev_err = worst
    if idx.size:
        nodes = [(float(y[i]), int(i % ns)) for i in idx]
        raise ReparametrizationError(nodes)

    v_new = x[:, 4]
    core = np.abs(y) <= PINCH_CORE_RADIUS
    if np.any(core & (v_new <= state.v_min)):
        masked = np.where(core, v_new, np.inf)
        i = int(np.argmin(masked))
        raise PinchError(tau, float(y[i]), float(v_new[i]))

    xi_vals = (v_new**2 - 6.0).reshape(ny, ns)
    xi_new = basis.analyze(xi_vals)
    return GraphState(tau, axis_new, xi_new, state.v_min, dict(state.meta))


@dataclass
class NormalFormFit:
    """Result of fitting the degree-n axis coefficients.

    `a` is the fitted coefficient vector in R^4; `pre` and `post` are the
    extracted H_n omega_l coefficient vectors before and after the fit.
    """

    degree: int
    a: np.ndarray
    pre: np.ndarray
    post: np.ndarray
    iterations: int
    converged: bool
    state: GraphState
    log: list = dc_field(default_factory=list)

    def to_dict(self):
        return {
            "degree": self.degree,
            "a": list(self.a),
            "pre_residual": list(self.pre),
            "post_residual": list(self.post),
            "iterations": self.iterations,
            "converged": self.converged,
            "log": self.log,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def extract_mode_vector(state, degree):
    """Coefficients of H_degree f_{1,l}, l = 1..4, of the graph field."""
    basis = state.basis()
    return state.xi.coeffs[degree, basis.flat_index(1, 1):
                           basis.flat_index(1, 4) + 1].copy()


def fit_axis(state, degree, noise_floor=1e-14, tol_factor=1e-3,
             max_iter=20):
    """Fit the degree-n axis coefficients that zero the H_n omega_l modes.

    Solves the 4-dimensional root problem a -> d(a) = 0, where d(a) is the
    H_n omega_l coefficient vector extracted after reparametrizing over
    the axis augmented by H_n(y) e^{-(n-1)tau/2} a.  Newton iteration with
    a finite-difference Jacobian; the linear response is nearly diagonal
    so convergence is fast.
    """
    d_pre = extract_mode_vector(state, degree)
    target = tol_factor * max(np.abs(d_pre).max(), noise_floor)

    a_base = dict(state.axis.a)

    def axis_with(a):
        coeffs = dict(a_base)
        coeffs[degree] = coeffs.get(degree, np.zeros(4)) + a
        return AxisPolynomial(coeffs, state.axis.T)

    def d_of(a):
        new = reparametrize(state, axis_with(a))
        return extract_mode_vector(new, degree), new

    a = np.zeros(4)
    log = []
    if np.abs(d_pre).max() <= noise_floor:
        return NormalFormFit(degree, a, d_pre, d_pre.copy(), 0, True,
                             state.copy(), log)

    d, best_state = d_of(a)
    best = (np.abs(d).max(), a.copy(), d.copy(), best_state)
    it = 0
    for it in range(1, max_iter + 1):
        J = np.empty((4, 4))
        for j in range(4):
            h = 1e-6 * (1.0 + abs(a[j]))
            ap = a.copy()
            ap[j] += h
            J[:, j] = (d_of(ap)[0] - d) / h
        a = a - np.linalg.solve(J, d)
        d, st = d_of(a)
        log.append({"iteration": it, "a": list(a),
                    "residual": float(np.abs(d).max())})
        if np.abs(d).max() < best[0]:
            best = (np.abs(d).max(), a.copy(), d.copy(), st)
        if np.abs(d).max() <= target:
            break
    res, a, d, st = best
    return NormalFormFit(degree, a, d_pre, d, it, bool(res <= target), st,
                         log)
