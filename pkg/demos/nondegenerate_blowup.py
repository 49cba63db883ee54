"""Quadratic-mode blowup: seed the H_2 direction and watch the
inverse-linear law 1/alpha_2 ~ tau/3 emerge.

Run:  python3 demos/nondegenerate_blowup.py
"""

import numpy as np

from mcflab.analysis import ModeTrajectory, classify
from mcflab.dynamics import GraphState, evolve
from mcflab.field import zero_field
from mcflab.geometry import AxisPolynomial

B0 = 0.05
TAU_END = 30.0

xi = zero_field(16, 0)
xi.coeffs[2, 0] = B0
state = GraphState(0.0, AxisPolynomial({}, T=1.0), xi)

record = evolve(state, {"h": 2e-3, "tau_end": TAU_END})
taus = record["taus"]
a2 = record["alphas"]["alpha_2_0_1"]

mask = taus > 5.0
slope = np.polyfit(taus[mask], 1.0 / a2[mask], 1)[0]
print("fitted slope of 1/alpha_2 vs tau: %.4f (target 1/3 = %.4f)"
      % (slope, 1.0 / 3.0))

report = classify(ModeTrajectory.from_record(record))
print("verdict:", report.verdict)
