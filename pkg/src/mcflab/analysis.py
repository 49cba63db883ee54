"""Mode extraction with cutoff-weighted orthogonality, trajectory
diagnostics, weighted sup norms, profile checks, and singularity
classification."""

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import (CutoffSpec, SpectralField, apply_cutoff, get_basis,
                    harm_count, zero_field)
from .geometry import embed, tangent_frames, curvature


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------

def decompose(state, n_max=None, k_max=None, scale=None, cutoff=None):
    """Extract mode amplitudes alpha_{n,k,l} with a y-cutoff orthogonality
    condition: chi * (xi - sum alpha H_n f_{k,l}) is G-orthogonal to every
    retained basis function.  scale=None means no cutoff (plain
    projection).  Returns (alpha dict keyed (n,k,l), eta residual field).
    """
    basis = state.basis()
    xi = state.xi
    n_max = xi.n_y if n_max is None else n_max
    k_max = xi.k_omega if k_max is None else k_max
    if n_max > xi.n_y or k_max > xi.k_omega:
        raise ValueError("requested modes exceed the truncation")
    nh = harm_count(k_max)
    c = xi.coeffs

    if scale is None:
        alpha_mat = c[:n_max + 1, :nh].copy()
    else:
        y = basis.grid.y_nodes
        if scale > np.max(np.abs(y)):
            raise ValueError("cutoff scale outside grid support")
        chi = (cutoff or CutoffSpec("chi_R"))(y, scale)
        w = basis.grid.y_weights
        By_all = basis.By[:c.shape[0]]
        By_ret = basis.By[:n_max + 1]
        # Gram and cross matrices of the y-factor; the harmonic factor is
        # exactly orthogonal, so the system decouples per harmonic index.
        Y = (By_ret * (w * chi)) @ By_ret.T
        cross = (By_ret * (w * chi)) @ By_all.T
        cond = np.linalg.cond(Y)
        if cond > 1e12:
            raise RuntimeError(
                "ill-conditioned mode Gram system (cond %.3g); increase the "
                "cutoff scale or reduce the truncation" % cond)
        alpha_mat = np.linalg.solve(Y, cross @ c[:, :nh])

    eta = xi.copy()
    eta.coeffs[:n_max + 1, :nh] -= alpha_mat
    alpha = {}
    for n in range(n_max + 1):
        for f in range(nh):
            k, l = basis.harm_kl[f]
            alpha[(n, k, l)] = float(alpha_mat[n, f])
    return alpha, eta


def mode_coefficients(state, track, scale=None):
    """Amplitudes of the tracked (n,k,l) modes as a flat list."""
    if scale is None:
        basis = state.basis()
        return [float(state.xi.coeffs[n, basis.flat_index(k, l)])
                for (n, k, l) in track]
    n_max = max(n for n, _, _ in track)
    k_max = max(k for _, k, _ in track)
    alpha, _ = decompose(state, n_max, k_max, scale)
    return [alpha[m] for m in track]


# ---------------------------------------------------------------------------
# Trajectories and fits
# ---------------------------------------------------------------------------

@dataclass
class ModeTrajectory:
    """Time series of mode amplitudes from a run."""

    taus: np.ndarray
    alpha: dict  # (n,k,l) -> array over taus
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        if np.any(np.diff(self.taus) <= 0):
            raise ValueError("tau samples must be strictly increasing")

    @classmethod
    def from_record(cls, record):
        alpha = {}
        for label, series in record["alphas"].items():
            _, n, k, l = label.split("_")
            alpha[(int(n), int(k), int(l))] = np.asarray(series, dtype=float)
        return cls(record["taus"], alpha)

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = [h.strip() for h in fh.readline().split(",")]
            rows = [[float(x) for x in line.split(",")]
                    for line in fh if line.strip()]
        data = np.asarray(rows)
        alpha = {}
        for i, label in enumerate(header):
            if label == "tau":
                continue
            _, n, k, l = label.split("_")
            alpha[(int(n), int(k), int(l))] = data[:, i]
        return cls(data[:, header.index("tau")], alpha)


@dataclass
class FitResult:
    d: float
    residual: float
    conclusive: bool
    window: tuple


def extrapolate_d(traj, n, k, l, rate, window=None):
    """Fit alpha_{n,k,l}(tau) * exp(rate * tau) to a constant over the
    window (tau_lo, tau_hi); the plateau value estimates the asymptotic
    prefactor of the exp(-rate tau) decay."""
    taus = traj.taus
    series = traj.alpha[(n, k, l)]
    if window is None:
        window = (taus[0], taus[-1])
    mask = (taus >= window[0]) & (taus <= window[1])
    if not np.any(mask):
        raise ValueError("empty fit window")
    vals = series[mask] * np.exp(rate * taus[mask])
    d = float(np.mean(vals))
    residual = float(np.max(np.abs(vals - d))) if len(vals) else 0.0
    conclusive = residual <= 0.2 * abs(d) or abs(d) < 1e-14
    return FitResult(d, residual, conclusive, window)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

@dataclass
class ClassificationReport:
    verdict: str          # 'Nondegenerate' | 'Degenerate' | 'Undecided'
    m: int = None
    d_m: float = None
    type_one_consistent: bool = True
    diagnostics: dict = dc_field(default_factory=dict)

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "m": self.m,
            "d_m": self.d_m,
            "type_one_consistent": bool(self.type_one_consistent),
            "diagnostics": _jsonable(self.diagnostics),
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


DEFAULT_THRESHOLDS = {
    "tol": 0.15,          # relative tolerance on the 1/alpha_2 slope 1/3
    "transient": 5.0,     # tau units discarded at the start
    "noise_factor": 10.0, # noise floor = factor * next-faster-mode residual
    "m_max": 6,
    "fit_span": 10.0,     # tau-length of the degenerate-mode fit window
}


def classify(traj, thresholds=None):
    """Decide between the generic inverse-linear decay of the quadratic
    mode and a pure exponential mode-m decay; see ClassificationReport.

    Nondegenerate: 1/alpha_{2,0,1} grows linearly with slope near 1/3.
    Degenerate(m, d_m): the smallest m >= 3 with a plateau of
    alpha_{m,0,1} e^{(m-2) tau / 2} above the noise floor.  The Type-I
    consistency flag is cleared when m is odd with |d_m| above threshold,
    or m is even with d_m below -threshold.
    """
    th = dict(DEFAULT_THRESHOLDS)
    th.update(thresholds or {})
    taus = traj.taus
    t_start = taus[0] + th["transient"]
    if taus[-1] - t_start < 10.0:
        raise ValueError("trajectory must span >= 10 tau units past the "
                         "transient window")
    window = (t_start, taus[-1])
    mask = taus >= t_start
    # The exponential fits amplify the tail by e^{rate tau}, so once a mode
    # decays to the roundoff floor the plateau estimate blows up.  Bound the
    # fit window to a fixed span right after the transient.
    fit_window = (t_start, min(t_start + th["fit_span"], taus[-1]))
    diag = {"window": window, "fit_window": fit_window}

    a2 = traj.alpha.get((2, 0, 1))
    if a2 is not None and np.all(a2[mask] > 0):
        slope, intercept = np.polyfit(taus[mask], 1.0 / a2[mask], 1)
        diag["inv_alpha2_slope"] = slope
        target = 1.0 / 3.0
        if abs(slope - target) <= th["tol"] * target:
            diag["alpha2_tau_final"] = float(a2[-1] * taus[-1])
            return ClassificationReport("Nondegenerate", m=None, d_m=None,
                                        type_one_consistent=True,
                                        diagnostics=diag)

    modes = sorted(m for (m, k, l) in traj.alpha
                   if k == 0 and l == 1 and 3 <= m <= th["m_max"])
    fits = {}
    for m in modes:
        fits[m] = extrapolate_d(traj, m, 0, 1, (m - 2) / 2.0, fit_window)
        diag["d_%d" % m] = {"d": fits[m].d, "residual": fits[m].residual}
    for m in modes:
        faster = [mm for mm in modes if mm > m]
        ref = fits[faster[0]].residual if faster else fits[m].residual
        floor = th["noise_factor"] * ref
        diag["d_%d" % m]["noise_floor"] = floor
        if abs(fits[m].d) > floor and fits[m].conclusive:
            consistent = not (m % 2 == 1 or (m % 2 == 0 and fits[m].d < -floor))
            return ClassificationReport("Degenerate", m=m, d_m=fits[m].d,
                                        type_one_consistent=consistent,
                                        diagnostics=diag)
    return ClassificationReport("Undecided", diagnostics=diag)


# ---------------------------------------------------------------------------
# Profile and norm diagnostics
# ---------------------------------------------------------------------------

def profile_check(state, b=None, m=None, d_m=None):
    """Compare v against the expected asymptotic profile on the natural
    growing region, clipped to the grid.

    Nondegenerate (pass b): target sqrt(6 + b y^2) on |y| <= 10 tau^0.55.
    Degenerate (pass m, d_m): target sqrt(6 + d_m e^{-(m-2)tau/2} H_m(y))
    on |y| <= e^{(m-2)tau/(2m) + 8 sqrt(tau)}.  Also reports the sups of
    v^{j-1} |d_y^j grad^i v| for j + i = 1, 2.
    """
    basis = state.basis()
    tau = state.tau
    y = basis.grid.y_nodes
    if b is not None:
        radius = 10.0 * max(tau, 0.0) ** 0.55
        target = np.sqrt(6.0 + b * y**2)
    elif m is not None:
        radius = math.exp((m - 2) * tau / (2 * m) + 8.0 * math.sqrt(max(tau, 0.0)))
        hm = basis.By[m] if m <= basis.n_ext else None
        if hm is None:
            raise ValueError("profile degree exceeds the Hermite table")
        prof = 6.0 + d_m * math.exp(-(m - 2) * tau / 2.0) * hm
        if np.any(prof[np.abs(y) <= radius] <= 0):
            raise ValueError("degenerate profile non-positive on the region")
        target = np.sqrt(np.maximum(prof, 0.0))
    else:
        raise ValueError("supply either b or (m, d_m)")

    clipped = radius > np.max(np.abs(y))
    mask = np.abs(y) <= radius
    xi = state.xi
    vt = np.maximum(6.0 + basis.synthesize(xi), 1e-12)
    v = np.sqrt(vt)
    resid = np.max(np.abs(v[mask] - target[mask][:, None]))

    xy = basis.diff_y(xi)
    xyy = basis.diff_y(xy)
    vy = basis.synthesize(xy) / (2 * v)
    vyy = basis.synthesize(xyy) / (2 * v) - basis.synthesize(xy)**2 / (4 * v**3)
    g = basis.grad_perp_values(xi) / (2 * v[..., None])
    gy = (basis.grad_perp_values(xy) / (2 * v[..., None])
          - basis.synthesize(xy)[..., None] * basis.grad_perp_values(xi)
          / (4 * v[..., None]**3))
    gnorm = np.sqrt(np.einsum("...b,...b->...", g, g))
    gynorm = np.sqrt(np.einsum("...b,...b->...", gy, gy))
    hx = basis.hess_perp_values(xi)
    hv = (hx / (2 * v[..., None, None])
          - g[..., :, None] * g[..., None, :] / v[..., None, None])
    hnorm = np.sqrt(np.einsum("...ab,...ab->...", hv, hv))

    sups = {
        (1, 0): float(np.max(np.abs(vy[mask]))),
        (0, 1): float(np.max(gnorm[mask])),
        (2, 0): float(np.max(np.abs(v[mask] * vyy[mask]))),
        (1, 1): float(np.max(v[mask] * gynorm[mask])),
        (0, 2): float(np.max(v[mask] * hnorm[mask])),
    }
    return {
        "profile_sup": float(resid),
        "derivative_sups": sups,
        "region_radius": float(radius),
        "region_clipped": bool(clipped),
    }


def projections(fld, N=0):
    """Split a field into: K1 = spherical average, K2 = odd-in-y part of
    the spherical average, and the harmonic degrees above N."""
    basis = get_basis(fld.n_y, fld.k_omega)
    k1 = zero_field(fld.n_y, fld.k_omega)
    k1.coeffs[:, 0] = fld.coeffs[:, 0]
    k2 = zero_field(fld.n_y, fld.k_omega)
    k2.coeffs[1::2, 0] = fld.coeffs[1::2, 0]
    high = zero_field(fld.n_y, fld.k_omega)
    cut = harm_count(N)
    high.coeffs[:, cut:] = fld.coeffs[:, cut:]
    return {"K1": k1, "K2": k2, "P_omega": high}


def weighted_sup_norm(fld, n=0, j=0, s=0, schedule=None, tau=None,
                      scale=None, cutoff=None):
    """sup over y of <y>^{-n} || (-Lap_S3 + 1)^s d_y^j (chi_Z field) ||_{L2(S3)}.

    The cutoff scale comes from schedule.Z(tau) when a schedule is given,
    from `scale` otherwise; with neither, no cutoff is applied.
    """
    basis = get_basis(fld.n_y, fld.k_omega)
    y = basis.grid.y_nodes
    work = fld
    if schedule is not None or scale is not None:
        sc = float(schedule.Z(tau)) if schedule is not None else float(scale)
        sc = min(sc, 0.95 * float(np.max(np.abs(y))))
        chi = (cutoff or CutoffSpec("chi_Z"))(y, sc)
        vals = basis.synthesize(fld) * chi[:, None]
        work = basis.analyze(vals)
    for _ in range(j):
        work = basis.diff_y(work)
    c = work.coeffs
    nh = c.shape[1]
    k = basis.harm_k[:nh]
    mult = (k * (k + 2.0) + 1.0) ** s
    gy = basis.By[:c.shape[0]].T @ (c * mult)       # (nq, nh)
    l2 = np.sqrt(np.einsum("if,if,f->i", gy, gy, basis.harm_norms[:nh]))
    weight = (1.0 + y**2) ** (-n / 2.0)
    return float(np.max(weight * l2))


# ---------------------------------------------------------------------------
# Mean convexity
# ---------------------------------------------------------------------------

def mean_convexity_scan(state, y_range, n_y=9, n_omega=6, h=1e-3):
    """Minimum mean curvature of the rescaled surface over a sample
    lattice of (y, omega); returns (min value, report list)."""
    basis = state.basis()
    xi = state.xi
    tau = state.tau
    axis = state.axis
    ys = np.linspace(y_range[0], y_range[1], n_y)
    rng = np.random.default_rng(7)
    oms = rng.normal(size=(n_omega, 4))
    oms /= np.linalg.norm(oms, axis=-1, keepdims=True)
    frames = tangent_frames(oms)

    radial = not np.any(xi.coeffs[:, 1:])
    reports = []
    worst = np.inf
    for io, om0 in enumerate(oms):
        fr = frames[io]

        def patch(p):
            yv = p[0]
            x = om0 + p[1] * fr[0] + p[2] * fr[1] + p[3] * fr[2]
            omega = x / np.linalg.norm(x)
            if radial:
                hy = basis.hermite.values(np.asarray([yv]))[:xi.coeffs.shape[0]]
                xival = float(hy[:, 0] @ xi.coeffs[:, 0])
            else:
                xival = float(basis.eval_at(xi, np.asarray(yv), omega))
            v = math.sqrt(6.0 + xival)
            return embed(axis, np.asarray(v), np.asarray(yv), omega, tau)[...]

        for yv in ys:
            center = np.array([yv, 0.0, 0.0, 0.0])
            inward = np.zeros(5)
            inward[0] = yv
            inward[1:] = axis.Q(np.asarray(yv), tau)
            rep = curvature(patch, center, h=h, inward_point=inward)
            reports.append((float(yv), io, rep.mean_curvature))
            worst = min(worst, rep.mean_curvature)
        if radial and io == 0:
            break  # identical for every omega by symmetry
    return worst, reports
