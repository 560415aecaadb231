"""Max-min fair beamforming for TRTC-enabled multi-cell MISO downlinks.

Solver-free pipeline: FP reformulation of the rates, log-sum-exp smoothing
of the per-cell minimum, a quadratic MM minorant per TRTC unit solved in
closed form over the unit's power ball, and SQUAREM-accelerated block
coordinate ascent.
"""

from .system_model import (
    ChannelSet,
    ConfigError,
    SystemConfig,
    UserDrop,
    drop_users,
    generate_channels,
    path_loss,
)
from .rates import BeamformerSet, FeasibilityError, RateReport, rate_report, sinr
from .fp import AuxiliaryState, QuadraticCoefficients, assemble_coefficients, update_auxiliaries
from .subproblem import reduce_to_subvector, softmin, softmin_weights, solve_ball_qp
from .optimizer import IterationTrace, run
from .baselines import projected_gradient_oracle, solve_sum_power_baseline

__version__ = "0.1.0"
