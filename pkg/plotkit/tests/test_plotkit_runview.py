import numpy as np
import pytest

from plotkit import (RunView, Snapshot, SnapshotError, hermite_values,
                     parse_mode_label, radial_profile)


def test_trajectory_columns(run_dir):
    view = RunView(run_dir)
    assert view.taus.size == 120
    assert set(view.columns) == {"alpha_2_0_1", "alpha_3_0_1", "alpha_4_0_1"}
    np.testing.assert_allclose(view.columns["alpha_2_0_1"][0], 0.05)
    assert [nkl for _, nkl in view.mode_columns()] == \
        [(2, 0, 1), (3, 0, 1), (4, 0, 1)]


def test_parse_mode_label():
    assert parse_mode_label("alpha_2_0_1") == (2, 0, 1)
    with pytest.raises(ValueError):
        parse_mode_label("tau")


def test_snapshot_index_and_selection(run_dir):
    view = RunView(run_dir)
    assert [t for t, _ in view.snapshots] == [0.0, 6.0, 12.0]
    assert view.select_snapshot()[0] == 12.0
    assert view.select_snapshot(5.2)[0] == 6.0


def test_missing_snapshots_tolerated(make_run_dir):
    root = make_run_dir("r", with_snapshots=False,
                         with_classification=False)
    view = RunView(root)
    assert view.snapshots == []
    assert view.classification is None and view.verdict() is None
    with pytest.raises(FileNotFoundError):
        view.select_snapshot()


def test_missing_trajectory_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        RunView(str(tmp_path))


def test_snapshot_parse_and_profile(run_dir):
    view = RunView(run_dir)
    snap = Snapshot(view.select_snapshot(0.0)[1])
    assert (snap.n_y, snap.k_omega, snap.tau) == (8, 0, 0.0)
    y = np.linspace(-2.0, 2.0, 11)
    # field is 0.01 H_4; H_4 = y^4 - 12 y^2 + 12 in the monic convention
    h4 = y**4 - 12.0 * y**2 + 12.0
    np.testing.assert_allclose(radial_profile(snap, y),
                               np.sqrt(6.0 + 0.01 * h4), atol=1e-12)


def test_hermite_values_recursion():
    y = np.linspace(-3.0, 3.0, 7)
    h = hermite_values(5, y)
    np.testing.assert_allclose(h[2], y**2 - 2.0, atol=1e-12)
    np.testing.assert_allclose(h[5], y * h[4] - 8.0 * h[3], atol=1e-9)


def test_malformed_snapshot_names_path(tmp_path):
    bad = tmp_path / "tau=1.000000.field"
    bad.write_text("no header\n")
    with pytest.raises(SnapshotError, match=str(bad)):
        Snapshot(str(bad))
