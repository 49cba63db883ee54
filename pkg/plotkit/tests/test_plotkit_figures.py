import os

import pytest

from plotkit import RunView, SnapshotError, plot_profile, plot_trajectories


def _nonempty(path):
    return os.path.exists(path) and os.path.getsize(path) > 0


def test_plot_trajectories_default_group(run_dir):
    view = RunView(run_dir)
    written, missing = plot_trajectories(view)
    assert missing == []
    assert len(written) == 1 and _nonempty(written[0])
    assert written[0].startswith(os.path.join(run_dir, "figures"))


def test_plot_trajectories_groups_and_missing(run_dir):
    view = RunView(run_dir)
    written, missing = plot_trajectories(
        view, groups=["alpha_2_0_1,alpha_9_0_1", "alpha_4_0_1"])
    assert missing == ["alpha_9_0_1"]
    assert len(written) == 2 and all(_nonempty(p) for p in written)


def test_plot_trajectories_empty_selection(run_dir):
    view = RunView(run_dir)
    written, missing = plot_trajectories(view, groups=["alpha_9_9_9"])
    assert written == [] and missing == ["alpha_9_9_9"]
    assert not os.path.exists(os.path.join(run_dir, "figures"))


def test_plot_profile_degenerate_overlay(run_dir):
    view = RunView(run_dir)
    path = plot_profile(view, tau=6.0)
    assert _nonempty(path) and "tau=6.000000" in path


def test_plot_profile_flat_overlay_without_classification(make_run_dir):
    root = make_run_dir("r", with_classification=False)
    path = plot_profile(RunView(root))
    assert _nonempty(path)


def test_plot_profile_nondegenerate_overlay(make_run_dir):
    root = make_run_dir("r", verdict="Nondegenerate")
    path = plot_profile(RunView(root), tau=0.0)
    assert _nonempty(path)


def test_plot_profile_parse_failure_names_path(run_dir):
    bad = os.path.join(run_dir, "snapshots", "tau=3.000000.field")
    with open(bad, "w") as fh:
        fh.write("garbage\n")
    with pytest.raises(SnapshotError, match="tau=3.000000.field"):
        plot_profile(RunView(run_dir), tau=3.0)


def test_outputs_deterministic(run_dir, tmp_path):
    view = RunView(run_dir)
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        written, _ = plot_trajectories(view, out_dir=out)
        prof = plot_profile(view, out_dir=out)
        with open(written[0], "rb") as fh:
            traj_bytes = fh.read()
        with open(prof, "rb") as fh:
            prof_bytes = fh.read()
        outs.append((traj_bytes, prof_bytes))
    assert outs[0] == outs[1]
