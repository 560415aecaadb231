"""Outer block-coordinate-ascent loop with SQUAREM-accelerated MM block updates.

One outer iteration refreshes the FP auxiliaries once, then sweeps every
block ``(g, n)``: two fixed-point map evaluations, a SQUAREM extrapolation
projected back onto the power ball, and backtracking on the true max-min
objective so that it never decreases.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fp import (
    AuxiliaryState,
    QuadraticCoefficients,
    assemble_coefficients,
    transformed_rates,
    update_auxiliaries,
)
from .rates import BeamformerSet, inner_products, rates_from_inner, sum_min_rate
from .subproblem import (
    build_mm_surrogate,
    mm_alpha,
    project_ball,
    reduce_to_subvector,
    solve_ball_qp,
)
from .system_model import ChannelSet, SystemConfig

__all__ = [
    "AccelState",
    "IterationTrace",
    "initial_beams",
    "smoothing_parameter",
    "fixed_point_map",
    "squarem_step",
    "backtrack",
    "fixed_point_residual",
    "run",
]

QPSolver = Callable[[float, np.ndarray, float], np.ndarray]

_J2_EPS = 1e-14


@dataclass
class AccelState:
    """Diagnostics of one accelerated block update."""

    f1: np.ndarray
    f2: np.ndarray
    j1: np.ndarray
    j2: np.ndarray
    tau: float
    tau_init: float
    backtrack_count: int = 0
    fallback: str = ""  # "", "double_step", "single_step" or "keep"


@dataclass
class IterationTrace:
    """Per-outer-iteration record. Index 0 holds the initial point."""

    objective: list = field(default_factory=list)
    rates: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    backtracks: list = field(default_factory=list)
    aux_delta: list = field(default_factory=list)
    max_power: list = field(default_factory=list)
    fallbacks: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    qp_instances: list = field(default_factory=list, repr=False)

    @property
    def iterations(self) -> int:
        return len(self.objective) - 1

    def rows(self):
        for t, obj in enumerate(self.objective):
            yield {
                "iteration": t,
                "objective_nats": obj,
                "min_rate_nats": float(np.min(self.rates[t])),
                "wall_time_s": self.wall_time[t],
                "backtracks": self.backtracks[t],
                "aux_delta": self.aux_delta[t],
            }


def smoothing_parameter(cfg: SystemConfig, t: int) -> float:
    if cfg.mu_schedule == "fixed":
        return cfg.smoothing_mu
    return min(cfg.mu_max, cfg.smoothing_mu * 1.5**t)


def initial_beams(channels: ChannelSet, cfg: SystemConfig, kind: Optional[str] = None) -> BeamformerSet:
    """Feasible starting point with every unit at full power.

    ``"matched"``: co-phased per-unit matched filter,
    ``f[g,k,n] = sqrt(P_t/K) h_{g,g,k}[n] / |h_{g,g,k}[n]|``.
    ``"random"``: random phases and power split, seeded by ``cfg.rng_seed``.
    """
    kind = kind or cfg.init
    G, K, N = channels.G, channels.K, channels.N
    P = cfg.unit_power_max
    if kind == "matched":
        own = channels.h[np.arange(G), np.arange(G)]  # (G, K, N)
        mag = np.abs(own)
        phase = np.where(mag > 0, own / np.where(mag > 0, mag, 1.0), 1.0)
        return BeamformerSet(np.sqrt(P / K) * phase)
    if kind == "random":
        rng = np.random.default_rng([cfg.rng_seed, 7])
        f = rng.standard_normal((G, K, N)) + 1j * rng.standard_normal((G, K, N))
        f *= np.sqrt(P / np.sum(np.abs(f) ** 2, axis=1, keepdims=True))
        return BeamformerSet(f)
    raise ValueError(f"unknown init {kind!r}")


class _Block:
    """Everything one block update needs, with the rest of the beams frozen."""

    def __init__(self, channels, coeffs, beams_f, cfg, g, units, mu, radius, qp_solver):
        self.g = g
        self.units = np.atleast_1d(units)
        self.mu = mu
        self.radius = radius
        self.qp_solver = qp_solver
        self.noise = cfg.noise_power
        self.K = beams_f.shape[1]
        self.sub = reduce_to_subvector(coeffs, BeamformerSet(beams_f), g, self.units)
        self.alpha, self.tc = mm_alpha(self.sub, mu, radius, return_tc=True)

        h = channels.h
        frozen = np.ones(h.shape[3], dtype=bool)
        frozen[self.units] = False
        self.h_block = h[g][..., self.units]
        self.z = inner_products(h, beams_f)
        self.z_frozen = np.einsum("jkz,mz->jkm", h[g][..., frozen].conj(), beams_f[g][:, frozen])
        self.instances = []

    def fixed_point(self, x):
        sur = build_mm_surrogate(self.sub, x, self.mu, self.radius, self.alpha, self.tc)
        abar, b8 = sur.abar, sur.b8
        self.instances.append((abar, b8))
        return self.qp_solver(abar, b8, self.radius)

    def objective(self, x) -> float:
        z = self.z.copy()
        z[self.g] = self.z_frozen + np.einsum(
            "jkl,ml->jkm", self.h_block.conj(), np.asarray(x).reshape(self.K, -1)
        )
        return sum_min_rate(rates_from_inner(z, self.noise)[1])


def fixed_point_map(beams: BeamformerSet, aux: AuxiliaryState, channels: ChannelSet, cfg: SystemConfig,
                    g: int, n, mu: Optional[float] = None, qp_solver: QPSolver = solve_ball_qp,
                    radius: Optional[float] = None) -> np.ndarray:
    """One MM step on block ``(g, n)`` from the current beams; returns the new block value."""
    mu = cfg.smoothing_mu if mu is None else mu
    radius = cfg.unit_power_max if radius is None else radius
    coeffs = assemble_coefficients(channels, aux, cfg)
    blk = _Block(channels, coeffs, beams.f, cfg, g, n, mu, radius, qp_solver)
    return blk.fixed_point(beams.f[g][:, blk.units].reshape(-1))


def squarem_step(x, fp_map: Callable[[np.ndarray], np.ndarray], radius: float):
    """Squared extrapolation from ``x``; returns ``(candidate, AccelState)``.

    The step length is ``tau = -||j1|| / ||j2||`` capped at ``-1`` (``tau = -1``
    reproduces the plain double step ``F(F(x))``).
    """
    x = np.asarray(x, dtype=complex)
    f1 = fp_map(x)
    f2 = fp_map(f1)
    j1 = f1 - x
    j2 = f2 - f1 - j1
    n2 = np.linalg.norm(j2)
    if n2 < _J2_EPS:
        return f2, AccelState(f1, f2, j1, j2, tau=-1.0, tau_init=-1.0)
    tau = min(-np.linalg.norm(j1) / n2, -1.0)
    cand = project_ball(x - 2.0 * tau * j1 + tau**2 * j2, radius)
    return cand, AccelState(f1, f2, j1, j2, tau=tau, tau_init=tau)


def backtrack(x_old, candidate, state: AccelState, objective_fn: Callable[[np.ndarray], float],
              radius: float, max_backtracks: int):
    """Pull the extrapolation toward ``tau = -1`` until the true objective does not drop.

    If the budget runs out the double step ``F(F(x))`` is used; should that
    still lower the objective (possible: the map ascends the smoothed,
    stale-auxiliary surrogate, not the true objective) the single step and
    finally ``x_old`` itself are used. The returned point never has a lower
    objective than ``x_old``.
    """
    x_old = np.asarray(x_old, dtype=complex)
    r_old = objective_fn(x_old)
    r = objective_fn(candidate)
    tau = state.tau
    while r < r_old and state.backtrack_count < max_backtracks and tau < -1.0:
        tau = (tau - 1.0) / 2.0
        candidate = project_ball(x_old - 2.0 * tau * state.j1 + tau**2 * state.j2, radius)
        r = objective_fn(candidate)
        state.backtrack_count += 1
    state.tau = tau
    if r >= r_old:
        return candidate, state
    for label, x in (("double_step", state.f2), ("single_step", state.f1)):
        if objective_fn(x) >= r_old:
            state.fallback = label
            state.tau = -1.0
            return x, state
    state.fallback = "keep"
    return x_old, state


def _blocks(cfg: SystemConfig, block: str):
    if block == "unit":
        return [(g, np.array([n])) for g in range(cfg.G) for n in range(cfg.N)], cfg.unit_power_max
    if block == "cell":
        return [(g, np.arange(cfg.N)) for g in range(cfg.G)], cfg.N * cfg.unit_power_max
    raise ValueError(f"unknown block layout {block!r}")


def fixed_point_residual(channels: ChannelSet, beams: BeamformerSet, cfg: SystemConfig,
                         block: str = "unit", mu: Optional[float] = None) -> float:
    """``max ||F(x) - x||`` over blocks, auxiliaries refreshed at ``beams``."""
    mu = cfg.smoothing_mu if mu is None else mu
    aux = update_auxiliaries(channels, beams, cfg)
    coeffs = assemble_coefficients(channels, aux, cfg)
    blocks, radius = _blocks(cfg, block)
    worst = 0.0
    for g, units in blocks:
        blk = _Block(channels, coeffs, beams.f, cfg, g, units, mu, radius, solve_ball_qp)
        x = beams.f[g][:, units].reshape(-1)
        worst = max(worst, float(np.linalg.norm(blk.fixed_point(x) - x)))
    return worst


def _fp_objective(channels, beams, aux, cfg) -> float:
    return float(np.sum(np.min(transformed_rates(channels, beams, aux, cfg), axis=1)))


def run(channels: ChannelSet, cfg: SystemConfig, init: Optional[BeamformerSet] = None,
        qp_solver: QPSolver = solve_ball_qp, block: str = "unit",
        record_qp_instances: bool = False):
    """Run the low-complexity algorithm; returns ``(BeamformerSet, IterationTrace)``.

    ``block="unit"`` enforces the per-unit cap with one block per unit;
    ``block="cell"`` treats each cell's whole beamformer as one block under
    the sum-power cap ``N * P_t``.
    """
    blocks, radius = _blocks(cfg, block)
    beams = initial_beams(channels, cfg) if init is None else init
    f = np.array(beams.f, dtype=complex)
    K = cfg.K

    def evaluate(f):
        return rates_from_inner(inner_products(channels.h, f), cfg.noise_power)[1]

    trace = IterationTrace()
    r0 = evaluate(f)
    trace.objective.append(sum_min_rate(r0))
    trace.rates.append(r0)
    trace.wall_time.append(0.0)
    trace.backtracks.append(0)
    trace.aux_delta.append(0.0)
    trace.max_power.append(float(np.max(_powers(f, block))))
    trace.fallbacks.append(0)
    trace.mu.append(float("nan"))

    aux_prev = None
    start = time.perf_counter()
    for t in range(cfg.max_outer_iters):
        mu = smoothing_parameter(cfg, t)
        current = BeamformerSet(f)
        aux = update_auxiliaries(channels, current, cfg)
        delta = 0.0
        if aux_prev is not None:
            delta = _fp_objective(channels, current, aux, cfg) - _fp_objective(channels, current, aux_prev, cfg)
        aux_prev = aux
        coeffs = assemble_coefficients(channels, aux, cfg)

        n_bt = 0
        n_fb = 0
        for g, units in blocks:
            blk = _Block(channels, coeffs, f, cfg, g, units, mu, radius, qp_solver)
            x0 = f[g][:, units].reshape(-1)
            cand, state = squarem_step(x0, blk.fixed_point, radius)
            x_new, state = backtrack(x0, cand, state, blk.objective, radius, cfg.max_backtracks)
            f[g][:, units] = x_new.reshape(K, -1)
            n_bt += state.backtrack_count
            n_fb += bool(state.fallback and state.fallback != "double_step")
            if record_qp_instances:
                trace.qp_instances.extend((a, b, radius) for a, b in blk.instances)

        r = evaluate(f)
        trace.objective.append(sum_min_rate(r))
        trace.rates.append(r)
        trace.wall_time.append(time.perf_counter() - start)
        trace.backtracks.append(n_bt)
        trace.aux_delta.append(delta)
        trace.max_power.append(float(np.max(_powers(f, block))))
        trace.fallbacks.append(n_fb)
        trace.mu.append(mu)
        if trace.objective[-1] - trace.objective[-2] < cfg.convergence_tol:
            break
    return BeamformerSet(f), trace


def _powers(f, block):
    if block == "unit":
        return np.sum(np.abs(f) ** 2, axis=1)
    return np.sum(np.abs(f) ** 2, axis=(1, 2))
