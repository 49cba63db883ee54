"""Parsing of mcflab run directories.

A run directory contains:

  trajectory.csv        header ``tau, alpha_<n>_<k>_<l>, ...``; rows of
                        comma separated floats
  snapshots/            files named ``tau=<value>.field``; first line
                        ``# n_y=<int> k_omega=<int> tau=<float>`` then
                        tab separated ``n k l c`` coefficient rows
  classification.json   verdict record (optional)
  config.json           run configuration (optional)

Everything here is pure file-format interpretation; no flow quantities
are recomputed.
"""

import json
import os
import re

import numpy as np

_SNAPSHOT_RE = re.compile(r"^tau=(-?[0-9.]+)\.field$")


class SnapshotError(ValueError):
    """Raised when a snapshot file cannot be parsed; message names the path."""


def _parse_trajectory(path):
    """Return (taus, {column_name: array}) from a trajectory CSV."""
    with open(path) as fh:
        header = [tok.strip() for tok in fh.readline().split(",")]
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            vals = [float(tok) for tok in line.split(",")]
            if len(vals) != len(header):
                raise ValueError("%s: line %d has %d fields, expected %d"
                                 % (path, lineno, len(vals), len(header)))
            rows.append(vals)
    data = (np.array(rows) if rows
            else np.empty((0, len(header))))
    if not header or header[0] != "tau":
        raise ValueError("%s: first column must be 'tau'" % path)
    columns = {name: data[:, i] for i, name in enumerate(header[1:], start=1)}
    return data[:, 0], columns


def parse_mode_label(name):
    """Split ``alpha_<n>_<k>_<l>`` into the integer triple (n, k, l)."""
    parts = name.split("_")
    if len(parts) != 4 or parts[0] != "alpha":
        raise ValueError("not a mode column name: %r" % name)
    return tuple(int(p) for p in parts[1:])


class Snapshot:
    """One parsed field snapshot: truncation, time, coefficient rows."""

    def __init__(self, path):
        self.path = path
        try:
            with open(path) as fh:
                header = fh.readline().strip()
                if not header.startswith("#"):
                    raise ValueError("missing '#' header line")
                fields = dict(tok.split("=")
                              for tok in header.lstrip("# ").split())
                self.n_y = int(fields["n_y"])
                self.k_omega = int(fields["k_omega"])
                self.tau = float(fields["tau"])
                self.rows = []
                for line in fh:
                    if not line.strip():
                        continue
                    n, k, l, c = line.split("\t")
                    self.rows.append((int(n), int(k), int(l), float(c)))
        except (OSError, ValueError, KeyError) as exc:
            raise SnapshotError("cannot parse snapshot %s: %s" % (path, exc))

    def radial_coefficients(self):
        """Coefficients c_n of the axially symmetric (k = 0) part."""
        c = np.zeros(self.n_y + 1)
        for n, k, _l, val in self.rows:
            if k == 0 and n < c.size:
                c[n] = val
        return c


def hermite_values(n_max, y):
    """Monic Hermite polynomials H_0..H_n_max on the points y.

    This is the coefficient convention of the snapshot format:
    H_0 = 1, H_1 = y, H_{k+1} = y H_k - 2 k H_{k-1}.
    Returns an array of shape (n_max + 1, len(y)).
    """
    y = np.asarray(y, dtype=float)
    out = np.zeros((n_max + 1, y.size))
    out[0] = 1.0
    if n_max >= 1:
        out[1] = y
    for k in range(1, n_max):
        out[k + 1] = y * out[k] - 2.0 * k * out[k - 1]
    return out


def radial_profile(snapshot, y):
    """The radius v(y) of the axially symmetric part of a snapshot.

    Evaluates v = sqrt(6 + sum_n c_n H_n(y)); points where the expansion
    drops to or below zero radius are returned as NaN.
    """
    c = snapshot.radial_coefficients()
    xi = c @ hermite_values(c.size - 1, y)
    v2 = 6.0 + xi
    out = np.full_like(v2, np.nan)
    ok = v2 > 0.0
    out[ok] = np.sqrt(v2[ok])
    return out


class RunView:
    """Parsed contents of one run directory.

    Attributes: taus and columns (the trajectory table), snapshots
    (tau-sorted list of (tau, path) pairs; empty if none were written),
    classification and config (dicts, or None when the file is absent).
    """

    def __init__(self, run_dir):
        self.run_dir = run_dir
        traj = os.path.join(run_dir, "trajectory.csv")
        if not os.path.exists(traj):
            raise FileNotFoundError("no trajectory.csv in %s" % run_dir)
        self.taus, self.columns = _parse_trajectory(traj)

        self.snapshots = []
        snap_dir = os.path.join(run_dir, "snapshots")
        if os.path.isdir(snap_dir):
            for name in sorted(os.listdir(snap_dir)):
                match = _SNAPSHOT_RE.match(name)
                if match:
                    self.snapshots.append((float(match.group(1)),
                                           os.path.join(snap_dir, name)))
            self.snapshots.sort()

        self.classification = self._read_json("classification.json")
        self.config = self._read_json("config.json")

    def _read_json(self, name):
        path = os.path.join(self.run_dir, name)
        if not os.path.exists(path):
            return None
        with open(path) as fh:
            return json.load(fh)

    def mode_columns(self):
        """Trajectory columns that look like mode coefficients, in header
        order, as a list of (name, (n, k, l)) pairs."""
        out = []
        for name in self.columns:
            try:
                out.append((name, parse_mode_label(name)))
            except ValueError:
                continue
        return out

    def select_snapshot(self, tau=None):
        """The (tau, path) pair nearest the requested time, or the latest
        snapshot when tau is None.  Raises if no snapshots exist."""
        if not self.snapshots:
            raise FileNotFoundError("no snapshots in %s" % self.run_dir)
        if tau is None:
            return self.snapshots[-1]
        return min(self.snapshots, key=lambda item: abs(item[0] - tau))

    def verdict(self):
        """Classification verdict string, or None if unavailable."""
        if self.classification is None:
            return None
        return self.classification.get("verdict")
