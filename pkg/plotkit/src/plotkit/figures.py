"""Figure rendering from parsed run directories.

All figures are static files written with the Agg backend; rendering is
deterministic for fixed inputs and a fixed matplotlib version.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .runview import RunView, Snapshot, hermite_values, radial_profile

DPI = 150


def linear_rate(n, k):
    """Decay rate of the (n, k, l) coefficient in the linear regime."""
    return (n - 2) / 2.0 + k * (k + 2) / 6.0


def _figures_dir(view, out_dir):
    out = out_dir if out_dir is not None \
        else os.path.join(view.run_dir, "figures")
    os.makedirs(out, exist_ok=True)
    return out


def _split_selection(view, groups):
    """Resolve selection groups into lists of (name, (n, k, l)) pairs.

    Each group is a comma separated list of column names.  Returns
    (resolved groups, missing names); missing columns are skipped.
    """
    if groups is None:
        return [view.mode_columns()] if view.mode_columns() else [], []
    resolved, missing = [], []
    for group in groups:
        cols = []
        for name in (tok.strip() for tok in group.split(",")):
            if not name:
                continue
            if name in view.columns:
                cols.append((name, _triple_or_none(name)))
            else:
                missing.append(name)
        cols = [(name, nkl) for name, nkl in cols if nkl is not None]
        if cols:
            resolved.append(cols)
    return resolved, missing


def _triple_or_none(name):
    from .runview import parse_mode_label
    try:
        return parse_mode_label(name)
    except ValueError:
        return None


def plot_trajectories(view, groups=None, out_dir=None, fmt="png"):
    """Write one log-|coefficient| vs tau figure per selection group.

    groups is a list of comma separated column-name strings; None selects
    all mode columns as a single group.  Each curve gets a dashed
    reference line at its linear decay rate, and the quadratic mode of a
    run classified Nondegenerate also gets the inverse-linear 3/tau law.
    Returns (written paths, missing column names).  An empty selection
    writes nothing.
    """
    resolved, missing = _split_selection(view, groups)
    written = []
    for i, cols in enumerate(resolved):
        fig, ax = plt.subplots(figsize=(7.0, 4.5))
        taus = view.taus
        for name, (n, k, _l) in cols:
            vals = np.abs(view.columns[name])
            line, = ax.plot(taus, np.where(vals > 0, vals, np.nan),
                            label=name)
            anchor = np.flatnonzero(vals > 0)
            if anchor.size:
                j = anchor[0]
                rate = linear_rate(n, k)
                ax.plot(taus, vals[j] * np.exp(-rate * (taus - taus[j])),
                        linestyle="--", linewidth=0.8,
                        color=line.get_color(),
                        label="%s rate %.3g" % (name, rate))
            if (n, k) == (2, 0) and view.verdict() == "Nondegenerate":
                pos = taus > 0
                ax.plot(taus[pos], 3.0 / taus[pos], linestyle=":",
                        linewidth=1.0, color="black", label="3/tau")
        ax.set_yscale("log")
        ax.set_xlabel("tau")
        ax.set_ylabel("|coefficient|")
        ax.legend(fontsize=7, loc="best")
        ax.grid(True, alpha=0.3)
        suffix = "" if len(resolved) == 1 else "_%d" % i
        path = os.path.join(_figures_dir(view, out_dir),
                            "trajectories%s.%s" % (suffix, fmt))
        fig.savefig(path, dpi=DPI)
        plt.close(fig)
        written.append(path)
    return written, missing


def _overlay(view, tau, y):
    """Reference profile sqrt(6 + model) chosen from the classification.

    Nondegenerate: b y^2 with b the quadratic coefficient at the snapshot
    time.  Degenerate(m, d_m): d_m e^{-(m-2) tau / 2} H_m(y).  Otherwise
    the flat cylinder radius sqrt(6).
    """
    verdict = view.verdict()
    if verdict == "Nondegenerate" and "alpha_2_0_1" in view.columns \
            and view.taus.size:
        b = float(np.interp(tau, view.taus, view.columns["alpha_2_0_1"]))
        return 6.0 + b * y**2, "sqrt(6 + b y^2), b=%.3g" % b
    if verdict == "Degenerate" and view.classification.get("m") is not None:
        m = int(view.classification["m"])
        d_m = float(view.classification["d_m"])
        amp = d_m * np.exp(-(m - 2) / 2.0 * tau)
        model = 6.0 + amp * hermite_values(m, y)[m]
        return model, "sqrt(6 + d_%d e^{-%.3g tau} H_%d)" % (m, (m - 2) / 2.0, m)
    return np.full_like(y, 6.0), "sqrt(6)"


def plot_profile(view, tau=None, out_dir=None, fmt="png"):
    """Write the radial profile v(y) of one snapshot with a model overlay.

    tau selects the nearest snapshot (latest when None).  The overlay is
    picked from the classification record; a residual inset shows
    profile minus overlay.  Returns the written path.
    """
    snap_tau, snap_path = view.select_snapshot(tau)
    snap = Snapshot(snap_path)
    half = min(4.0 * np.sqrt(max(snap.n_y, 1)), 14.0)
    y = np.linspace(-half, half, 801)
    v = radial_profile(snap, y)

    model2, label = _overlay(view, snap.tau, y)
    model = np.full_like(y, np.nan)
    ok = model2 > 0
    model[ok] = np.sqrt(model2[ok])

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.plot(y, v, label="v(y) at tau=%.4g" % snap.tau)
    ax.plot(y, model, linestyle="--", label=label)
    ax.set_xlabel("y")
    ax.set_ylabel("radius")
    ax.legend(fontsize=8, loc="best")
    ax.grid(True, alpha=0.3)

    inset = ax.inset_axes([0.12, 0.12, 0.35, 0.28])
    inset.plot(y, v - model, linewidth=0.8)
    inset.set_title("residual", fontsize=7)
    inset.tick_params(labelsize=6)

    path = os.path.join(_figures_dir(view, out_dir),
                        "profile_tau=%.6f.%s" % (snap_tau, fmt))
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path
