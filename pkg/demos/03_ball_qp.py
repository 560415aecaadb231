"""
The per-unit subproblem in closed form
======================================

Each block update maximizes ``abar ||x||^2 + 2 Re{b^H x}`` over the unit's
power ball. The answer is either the unconstrained maximizer or the scaled
linear term. An iterative projected-gradient solver agrees and is much
slower.
"""

import time

import numpy as np

from trtc_beamforming import projected_gradient_oracle, solve_ball_qp
from trtc_beamforming.subproblem import ball_qp_objective

print(solve_ball_qp(-2.0, np.array([0.5, 0.0]), 1.0))  # interior: [0.25, 0]
print(solve_ball_qp(-1.0, np.array([2.0, 0.0]), 1.0))  # boundary: [1, 0]

rng = np.random.default_rng(1)
abar = -3.0
b = rng.standard_normal(8) + 1j * rng.standard_normal(8)

t0 = time.perf_counter()
x_cf = solve_ball_qp(abar, b, 0.5)
t1 = time.perf_counter()
x_pg = projected_gradient_oracle(abar, b, 0.5)
t2 = time.perf_counter()

print(f"closed form  {ball_qp_objective(abar, b, x_cf):.12f}  ({1e6 * (t1 - t0):.0f} us)")
print(f"proj. grad.  {ball_qp_objective(abar, b, x_pg):.12f}  ({1e6 * (t2 - t1):.0f} us)")
