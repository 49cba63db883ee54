"""Full artifact pipeline: run a scenario through the solver CLI, then
render figures from the run directory with plotkit.

Both steps go through the console scripts, exactly as a user would.

Run:  python3 demos/render_figures.py [output-dir]
"""

import json
import os
import subprocess
import sys

out_root = sys.argv[1] if len(sys.argv) > 1 else "demo_run"
os.makedirs(out_root, exist_ok=True)

config = os.path.join(out_root, "config.json")
with open(config, "w") as fh:
    json.dump({
        "scenario": {"name": "nondegenerate", "b0": 0.1},
        "truncation": {"n_y": 16, "k_omega": 0},
        "stepper": {"h": 2e-3, "tau_end": 20.0, "stride": 1.0},
    }, fh, indent=2)

run_dir = os.path.join(out_root, "run")
subprocess.run(["mcflab", "run", "--config", config, "--out", run_dir],
               check=True)
subprocess.run(["plotkit", run_dir], check=True)

fig_dir = os.path.join(run_dir, "figures")
print("figures written:")
for name in sorted(os.listdir(fig_dir)):
    print(" ", os.path.join(fig_dir, name))
