"""Post-hoc figure generation from solver run directories."""

from .figures import linear_rate, plot_profile, plot_trajectories
from .runview import (RunView, Snapshot, SnapshotError, hermite_values,
                      parse_mode_label, radial_profile)

__all__ = [
    "RunView", "Snapshot", "SnapshotError", "hermite_values",
    "parse_mode_label", "radial_profile", "linear_rate",
    "plot_trajectories", "plot_profile",
]

__version__ = "0.1.0"
