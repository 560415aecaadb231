"""SINR, per-user rates and the max-min network objective."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .system_model import ChannelSet, SystemConfig

__all__ = [
    "FeasibilityError",
    "BeamformerSet",
    "RateReport",
    "inner_products",
    "sinr",
    "sinr_matrix",
    "rates_from_inner",
    "rate_report",
    "sum_min_rate",
    "FEAS_REL_TOL",
]

FEAS_REL_TOL = 1e-9


class FeasibilityError(ValueError):
    """Beamformers violate a power constraint; ``worst`` is ``(g, n, power)``."""

    def __init__(self, worst, limit):
        g, n, p = worst
        super().__init__(f"power constraint violated at cell {g}, unit {n}: {p:.6e} > {limit:.6e}")
        self.worst = worst
        self.limit = limit


@dataclass(frozen=True)
class BeamformerSet:
    """Beamformers of all cells stored as ``f[g, k, n]``.

    The stacked vector ``f_g`` (user-major, length ``N*K``) is
    ``f[g].reshape(-1)``; the per-unit subvector is ``f[g, :, n]``.
    """

    f: np.ndarray

    def __post_init__(self):
        f = np.array(self.f, dtype=complex)
        if f.ndim != 3:
            raise ValueError(f"beamformers must have shape (G, K, N), got {f.shape}")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    @classmethod
    def from_stacked(cls, stacked, num_users: int) -> "BeamformerSet":
        """Build from a list of user-major stacked vectors ``f_g`` of length ``N*K``."""
        arr = np.asarray(stacked, dtype=complex)
        return cls(arr.reshape(arr.shape[0], num_users, -1))

    @classmethod
    def zeros(cls, G: int, K: int, N: int) -> "BeamformerSet":
        return cls(np.zeros((G, K, N), dtype=complex))

    def stacked(self, g: int) -> np.ndarray:
        return self.f[g].reshape(-1)

    def subvector(self, g: int, n: int) -> np.ndarray:
        return self.f[g, :, n].copy()

    def with_subvector(self, g: int, n: int, x) -> "BeamformerSet":
        f = self.f.copy()
        f[g, :, n] = x
        return BeamformerSet(f)

    def unit_powers(self) -> np.ndarray:
        """Per-unit transmit powers, shape (G, N)."""
        return np.sum(np.abs(self.f) ** 2, axis=1)

    def cell_powers(self) -> np.ndarray:
        return np.sum(np.abs(self.f) ** 2, axis=(1, 2))

    def check_unit_power(self, p_max: float, rel_tol: float = FEAS_REL_TOL) -> None:
        p = self.unit_powers()
        limit = p_max * (1 + rel_tol)
        if np.any(p > limit):
            g, n = np.unravel_index(np.argmax(p), p.shape)
            raise FeasibilityError((int(g), int(n), float(p[g, n])), limit)

    def check_sum_power(self, p_total: float, rel_tol: float = FEAS_REL_TOL) -> None:
        p = self.cell_powers()
        limit = p_total * (1 + rel_tol)
        if np.any(p > limit):
            g = int(np.argmax(p))
            raise FeasibilityError((g, -1, float(p[g])), limit)


@dataclass(frozen=True)
class RateReport:
    """Per-user SINR and rate (nats), per-cell minimum and the network objective."""

    sinr: np.ndarray
    rate: np.ndarray
    cell_min: np.ndarray
    argmin: np.ndarray
    objective: float

    @property
    def objective_bits(self) -> float:
        return self.objective / np.log(2.0)


def inner_products(h: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``z[i, g, k, m] = h_{i,g,k}^H f_{i,m}``."""
    return np.einsum("igkn,imn->igkm", h.conj(), f)


@lru_cache(maxsize=None)
def _masks(G: int, K: int):
    g_idx = np.arange(G)
    k_idx = np.arange(K)
    off_k = 1.0 - np.eye(K)
    off_g = (1.0 - np.eye(G))[:, :, None, None]
    return g_idx, k_idx, off_k, off_g


def _signal_interference(z: np.ndarray):
    G, _, K, _ = z.shape
    g_idx, k_idx, off_k, off_g = _masks(G, K)
    p = z.real**2 + z.imag**2
    own = p[g_idx, g_idx]  # (G, K, K): own TRTC, [g, k, m]
    signal = own[:, k_idx, k_idx]
    # masked sums rather than total minus signal: keeps exact zeros exact
    intra = (own * off_k).sum(axis=2)
    inter = (p * off_g).sum(axis=(0, 3))
    return signal, intra, inter


def rates_from_inner(z: np.ndarray, noise: np.ndarray):
    """(sinr, rate) arrays of shape (G, K) from inner products ``z``."""
    signal, intra, inter = _signal_interference(z)
    s = signal / (intra + inter + noise)
    return s, np.log1p(s)


def sinr_matrix(channels: ChannelSet, beams: BeamformerSet, cfg: SystemConfig) -> np.ndarray:
    return rates_from_inner(inner_products(channels.h, beams.f), cfg.noise_power)[0]


def sinr(channels: ChannelSet, beams: BeamformerSet, cfg: SystemConfig, g: int, k: int) -> float:
    """SINR of user ``k`` in cell ``g``.

    Intra-cell interference uses the user's own serving channel; inter-cell
    interference from TRTC ``i`` uses ``h_{i,g,k}``.
    """
    return float(sinr_matrix(channels, beams, cfg)[g, k])


def sum_min_rate(rate: np.ndarray) -> float:
    return float(rate.min(axis=1).sum())


def rate_report(
    channels: ChannelSet,
    beams: BeamformerSet,
    cfg: SystemConfig,
    constraint: str = "unit",
) -> RateReport:
    """Evaluate SINRs, rates (nats) and ``sum_g min_k R_{g,k}``.

    ``constraint`` selects the feasibility check: ``"unit"`` (per-unit power
    cap ``P_t``), ``"sum"`` (``||f_g||^2 <= N P_t``) or ``"none"``.
    """
    if constraint == "unit":
        beams.check_unit_power(cfg.unit_power_max)
    elif constraint == "sum":
        beams.check_sum_power(cfg.N * cfg.unit_power_max)
    elif constraint != "none":
        raise ValueError(f"unknown constraint {constraint!r}")
    s, r = rates_from_inner(inner_products(channels.h, beams.f), cfg.noise_power)
    return RateReport(
        sinr=s,
        rate=r,
        cell_min=r.min(axis=1),
        argmin=np.argmin(r, axis=1),
        objective=sum_min_rate(r),
    )
