import os

from plotkit.cli import EXIT_ERROR, EXIT_OK, main


def _images(run_dir):
    fig_dir = os.path.join(run_dir, "figures")
    if not os.path.isdir(fig_dir):
        return []
    return [os.path.join(fig_dir, n) for n in sorted(os.listdir(fig_dir))]


def test_default_invocation(run_dir, capsys):
    assert main([run_dir]) == EXIT_OK
    images = _images(run_dir)
    assert len(images) == 2
    assert all(os.path.getsize(p) > 0 for p in images)
    out = capsys.readouterr().out.strip().splitlines()
    assert sorted(out) == sorted(images)


def test_modes_selection_and_missing_warning(run_dir, capsys):
    code = main([run_dir, "--modes", "alpha_4_0_1,alpha_7_0_1",
                 "--snapshot", "6.0"])
    assert code == EXIT_OK
    err = capsys.readouterr().err
    assert "alpha_7_0_1" in err
    assert any("trajectories" in p for p in _images(run_dir))
    assert any("tau=6.000000" in p for p in _images(run_dir))


def test_empty_selection_exits_zero(run_dir, capsys):
    code = main([run_dir, "--modes", "alpha_9_9_9", "--snapshot", "0.0"])
    assert code == EXIT_OK
    assert all("trajectories" not in p for p in _images(run_dir))


def test_missing_run_dir_exits_error(tmp_path, capsys):
    assert main([str(tmp_path / "nope")]) == EXIT_ERROR
    assert "trajectory.csv" in capsys.readouterr().err


def test_no_snapshots_skips_profile(make_run_dir, capsys):
    root = make_run_dir("r", with_snapshots=False)
    assert main([root]) == EXIT_OK
    assert all("profile" not in p for p in _images(root))


def test_requested_snapshot_without_snapshots_errors(make_run_dir, capsys):
    root = make_run_dir("r", with_snapshots=False)
    assert main([root, "--snapshot", "1.0"]) == EXIT_ERROR
    assert "no snapshots" in capsys.readouterr().err


def test_svg_format(run_dir):
    assert main([run_dir, "--format", "svg"]) == EXIT_OK
    assert any(p.endswith(".svg") for p in _images(run_dir))
