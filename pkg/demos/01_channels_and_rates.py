"""
Channels, beams and rates
=========================

Drop users in two cells, draw Rician channels and look at the rates that a
simple matched-filter beamformer delivers.
"""

import numpy as np

from trtc_beamforming import SystemConfig, drop_users, generate_channels, rate_report
from trtc_beamforming.optimizer import initial_beams

# defaults: 2 cells, 2 users per cell, 16 TRTC units, 10 dBm per unit
cfg = SystemConfig()
drop = drop_users(cfg, 7)
channels = generate_channels(cfg, drop, 7)

# h[i, g, k] is the channel from the TRTC of cell i to user k of cell g
print("channel array:", channels.h.shape)
print("distances to own TRTC (m):")
print(np.round(channels.distances[[0, 1], [0, 1]], 1))

# every unit at full power, phases aligned with the user's own channel
beams = initial_beams(channels, cfg)
print("per-unit power (W):", np.unique(np.round(beams.unit_powers(), 12)))

report = rate_report(channels, beams, cfg)
print("SINR (dB):")
print(np.round(10 * np.log10(report.sinr), 2))
print("worst user per cell:", report.argmin)
print(f"sum of cell minima: {report.objective:.3f} nats = {report.objective_bits:.3f} bit/s/Hz")
