"""Sum-power baseline and an iterative oracle for the ball-constrained QP."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .optimizer import run
from .rates import BeamformerSet
from .subproblem import ball_qp_objective, project_ball
from .system_model import ChannelSet, SystemConfig

__all__ = ["OracleSettings", "OracleError", "projected_gradient_oracle", "solve_sum_power_baseline"]


@dataclass(frozen=True)
class OracleSettings:
    initial_step: float = 1.0
    shrink: float = 0.5
    max_iters: int = 10_000
    tol: float = 1e-12  # on the gradient-mapping norm, relative to 1 + ||b8||

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


class OracleError(RuntimeError):
    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


def projected_gradient_oracle(abar: float, b8, P_t: float,
                              settings: Optional[OracleSettings] = None) -> np.ndarray:
    """Projected gradient ascent with Armijo backtracking on ``abar ||x||^2 + 2 Re{b8^H x}``.

    Starts from zero, projects onto ``||x||^2 <= P_t`` and stops when the
    gradient mapping ``||x+ - x|| / t`` is below ``tol * (1 + ||b8||)``.
    The step found at one iteration seeds the next (doubled).
    """
    s = settings or OracleSettings()
    if not abar < 0:
        raise ValueError(f"oracle needs a concave objective, got abar={abar!r}")
    b8 = np.asarray(b8, dtype=complex)
    x = np.zeros_like(b8)
    if not np.any(b8):
        return x
    tol = s.tol * (1.0 + np.linalg.norm(b8))
    phi = ball_qp_objective(abar, b8, x)
    step = s.initial_step
    for _ in range(s.max_iters):
        grad = 2.0 * (abar * x + b8)  # real gradient, packed as a complex vector
        while True:
            x_new = project_ball(x + step * grad, P_t)
            d = x_new - x
            phi_new = ball_qp_objective(abar, b8, x_new)
            model = phi + np.real(np.vdot(grad, d)) - np.vdot(d, d).real / (2.0 * step)
            if phi_new >= model:
                break
            step *= s.shrink
        if np.linalg.norm(d) / step <= tol:
            return x_new
        x, phi = x_new, phi_new
        step /= s.shrink
    raise OracleError(f"projected gradient did not converge in {s.max_iters} iterations", x)


def solve_sum_power_baseline(channels: ChannelSet, cfg: SystemConfig,
                             init: Optional[BeamformerSet] = None, **kwargs):
    """Same FP / smoothing / MM pipeline with one ``||f_g||^2 <= N P_t`` constraint per cell.

    Each cell's whole beamformer is a single block, so the ball QP is solved
    once per cell per sweep with radius ``N * P_t``.
    """
    return run(channels, cfg, init=init, block="cell", **kwargs)
