"""Command line entry point: render figures for one run directory.

    plotkit <run dir> [--modes GROUP ...] [--snapshot TAU] [--format EXT]

Writes into <run dir>/figures/.  By default all mode columns go into one
trajectory figure and the latest snapshot (if any) into a profile
figure.  --modes restricts the trajectory figures, one figure per GROUP
(a comma separated list of column names); --snapshot picks the snapshot
nearest TAU for the profile.  Exit code 0 on success (including an
empty selection), 2 on unreadable input.
"""

import argparse
import sys

from .figures import plot_profile, plot_trajectories
from .runview import RunView, SnapshotError

EXIT_OK = 0
EXIT_ERROR = 2


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render trajectory and profile figures from a run "
                    "directory.")
    parser.add_argument("run_dir", help="directory written by a solver run")
    parser.add_argument("--modes", action="append", default=None,
                        metavar="GROUP",
                        help="comma separated mode columns; repeatable, one "
                             "figure per group (default: all modes, one "
                             "figure)")
    parser.add_argument("--snapshot", type=float, default=None, metavar="TAU",
                        help="profile the snapshot nearest this time "
                             "(default: the latest snapshot)")
    parser.add_argument("--format", default="png", choices=("png", "svg"),
                        help="image format (default png)")
    args = parser.parse_args(argv)

    try:
        view = RunView(args.run_dir)
    except (OSError, ValueError) as exc:
        print("plotkit: %s" % exc, file=sys.stderr)
        return EXIT_ERROR

    written, missing = plot_trajectories(view, groups=args.modes,
                                         fmt=args.format)
    if missing:
        print("plotkit: skipped missing columns: %s" % ", ".join(missing),
              file=sys.stderr)
    for path in written:
        print(path)

    want_profile = args.snapshot is not None or bool(view.snapshots)
    if want_profile:
        try:
            path = plot_profile(view, tau=args.snapshot, fmt=args.format)
        except (FileNotFoundError, SnapshotError) as exc:
            print("plotkit: %s" % exc, file=sys.stderr)
            return EXIT_ERROR
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
