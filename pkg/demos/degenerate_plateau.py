"""Degenerate mode decay: inject the H_4 direction, gauge away the
slower radial modes, and watch alpha_4 e^tau settle on a plateau.

The plateau sits below the injected amplitude a by about 24 a^2, the
quadratic self-interaction of the H_4 mode.

Run:  python3 demos/degenerate_plateau.py
"""

import numpy as np

from mcflab.analysis import ModeTrajectory, classify
from mcflab.dynamics import GraphState, evolve
from mcflab.field import zero_field
from mcflab.geometry import AxisPolynomial

A = 0.01
TAU_END = 16.0

xi = zero_field(16, 0)
xi.coeffs[4, 0] = A
state = GraphState(0.0, AxisPolynomial({}, T=1.0), xi)

record = evolve(state, {
    "h": 1e-3, "tau_end": TAU_END,
    "gauge": [(0, 0, 1), (1, 0, 1), (2, 0, 1), (3, 0, 1)],
})
taus = record["taus"]
a4 = record["alphas"]["alpha_4_0_1"]
compensated = a4 * np.exp(taus)

late = taus > taus[-1] - 5.0
plateau = compensated[late].mean()
print("injected amplitude:      %.6f" % A)
print("plateau of alpha_4 e^tau: %.6f" % plateau)
print("quadratic shift estimate: %.6f (24 a^2 = %.6f)"
      % (A - plateau, 24.0 * A**2))

report = classify(ModeTrajectory.from_record(record))
print("verdict: %s(m=%s, d_m=%.6f)" % (report.verdict, report.m, report.d_m))
