import json
import os

import numpy as np
import pytest


def write_run_dir(root, verdict="Degenerate", m=4, d_m=0.01,
                  with_snapshots=True, with_classification=True):
    """Build a synthetic run directory following the documented formats."""
    os.makedirs(root, exist_ok=True)
    taus = np.arange(0.0, 12.0, 0.1)
    a2 = 1.0 / (1.0 / 0.05 + taus / 3.0)
    a4 = d_m * np.exp(-taus)
    a3 = 1e-6 * np.exp(-0.5 * taus)
    with open(os.path.join(root, "trajectory.csv"), "w") as fh:
        fh.write("tau, alpha_2_0_1, alpha_3_0_1, alpha_4_0_1\n")
        for row in zip(taus, a2, a3, a4):
            fh.write(", ".join("%.17g" % x for x in row) + "\n")

    if with_snapshots:
        snap_dir = os.path.join(root, "snapshots")
        os.makedirs(snap_dir, exist_ok=True)
        for tau in (0.0, 6.0, 12.0):
            path = os.path.join(snap_dir, "tau=%.6f.field" % tau)
            with open(path, "w") as fh:
                fh.write("# n_y=8 k_omega=0 tau=%.17g\n" % tau)
                fh.write("4\t0\t1\t%.17g\n" % (d_m * np.exp(-tau)))

    if with_classification:
        record = {"verdict": verdict, "m": m, "d_m": d_m,
                  "type_one_consistent": True, "diagnostics": {}}
        with open(os.path.join(root, "classification.json"), "w") as fh:
            json.dump(record, fh)

    with open(os.path.join(root, "config.json"), "w") as fh:
        json.dump({"scenario": {"name": "degenerate", "m": m,
                                "amplitude": d_m}}, fh)
    return root


@pytest.fixture
def run_dir(tmp_path):
    return write_run_dir(str(tmp_path / "run"))


@pytest.fixture
def make_run_dir(tmp_path):
    def _make(name="run", **kwargs):
        return write_run_dir(str(tmp_path / name), **kwargs)
    return _make
