"""
Monte-Carlo sweeps and the runtime benchmark
============================================

Same thing the ``trtc-beam sweep`` and ``trtc-beam bench`` commands do,
from Python. Every swept value reuses the same user drops and fading
(common random numbers), so differences come from the parameter alone.
"""

from trtc_beamforming.experiments import SweepSpec, bench_runtime, build_config, run_sweep

spec = SweepSpec(param="unit_power_dBm", values=[0, 5, 10, 15], trials=5, schemes=["trtc", "baseline"])
summary, trials = run_sweep(spec, {"max_outer_iters": 30})
for row in summary:
    print(f"{row['value']:>4} dBm  {row['scheme']:<8}  {row['mean_sumrate_bps_hz']:.3f} "
          f"+- {row['std_sumrate']:.3f} bit/s/Hz  ({row['mean_iters']:.0f} iterations)")

rep = bench_runtime(build_config({"num_units": 25}), trials=5)
print(f"closed form is {rep['speedup']:.0f}x faster than projected gradient "
      f"on {rep['instances_per_trial']} subproblems")
