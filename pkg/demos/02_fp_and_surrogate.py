"""
From rates to a quadratic minorant
==================================

The optimizer never touches the log-of-ratio rates directly. It works on

1. a transformed rate with auxiliaries (gamma, omega) that is tight at the
   current beams,
2. its quadratic form in the beams of one TRTC unit,
3. a smooth lower bound of the per-cell minimum, and
4. a concave quadratic minorant with a single curvature per cell.

Each step is checked numerically below.
"""

import numpy as np

from trtc_beamforming import SystemConfig, assemble_coefficients, drop_users, generate_channels
from trtc_beamforming import rate_report, reduce_to_subvector
from trtc_beamforming.fp import transformed_rates, update_auxiliaries
from trtc_beamforming.optimizer import initial_beams
from trtc_beamforming.subproblem import build_mm_surrogate, smoothed_per_cell

cfg = SystemConfig()
ch = generate_channels(cfg, drop_users(cfg, 3), 3)
beams = initial_beams(ch, cfg)

# 1. tightness
aux = update_auxiliaries(ch, beams, cfg)
gap = transformed_rates(ch, beams, aux, cfg) - rate_report(ch, beams, cfg).rate
print("transformed - true rate:", np.abs(gap).max())

# 2. freeze everything but unit n = 5 of cell g = 0
coeffs = assemble_coefficients(ch, aux, cfg)
sub = reduce_to_subvector(coeffs, beams, 0, 5)
rng = np.random.default_rng(0)
x = 0.05 * (rng.standard_normal(cfg.K) + 1j * rng.standard_normal(cfg.K))
direct = transformed_rates(ch, beams.with_subvector(0, 5, x), aux, cfg)
print("block quadratic vs direct:", np.abs(sub.values(x) - direct).max())

# 3.-4. minorant of sum_j softmin_k at the current block value
x0 = beams.subvector(0, 5)
sur = build_mm_surrogate(sub, x0, cfg.smoothing_mu, cfg.unit_power_max)
print("curvature per cell:", sur.alpha)
print("touches at x0:", np.abs(sur.value_per_cell(x0) - smoothed_per_cell(sub, x0, cfg.smoothing_mu)).max())

# the minorant stays below the smoothed objective anywhere in the power ball
worst = -np.inf
for _ in range(500):
    y = rng.standard_normal(cfg.K) + 1j * rng.standard_normal(cfg.K)
    y *= np.sqrt(cfg.unit_power_max) * rng.uniform() / np.linalg.norm(y)
    worst = max(worst, np.max(sur.value_per_cell(y) - smoothed_per_cell(sub, y, cfg.smoothing_mu)))
print("largest minorant excess over 500 points:", worst)
