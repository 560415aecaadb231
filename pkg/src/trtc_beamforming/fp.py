"""Fractional-programming reformulation of the per-user rate.

The rate ``log(1 + S/I)`` is replaced by

    log(1+gamma) - gamma + 2 sqrt(1+gamma) Re{conj(omega) h^H f_k}
        - |omega|^2 (sum_i sum_j |h_i^H f_{i,j}|^2 + sigma^2)

which is concave quadratic in the beamformers for fixed auxiliaries and
equals the rate at the closed-form ``gamma``/``omega`` updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import BeamformerSet, inner_products, rates_from_inner
from .system_model import ChannelSet, SystemConfig

__all__ = [
    "AuxiliaryState",
    "QuadraticCoefficients",
    "update_gamma",
    "update_omega",
    "update_auxiliaries",
    "transformed_rates",
    "eval_transformed_rate",
    "assemble_coefficients",
]


@dataclass(frozen=True)
class AuxiliaryState:
    gamma: np.ndarray  # (G, K), >= 0
    omega: np.ndarray  # (G, K), complex

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        omega = np.asarray(self.omega, dtype=complex)
        if gamma.shape != omega.shape:
            raise ValueError("gamma and omega must have the same shape")
        if np.any(gamma < 0) or not np.all(np.isfinite(gamma)) or not np.all(np.isfinite(omega)):
            raise ValueError("auxiliaries must be finite with gamma >= 0")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "omega", omega)


def update_gamma(channels: ChannelSet, beams: BeamformerSet, cfg: SystemConfig) -> np.ndarray:
    """Closed-form gamma: the SINR of every user at the current beams."""
    s, _ = rates_from_inner(inner_products(channels.h, beams.f), cfg.noise_power)
    return s


def update_omega(channels: ChannelSet, beams: BeamformerSet, gamma, cfg: SystemConfig) -> np.ndarray:
    """Closed-form omega: ``sqrt(1+gamma) h^H f_k / (total received power + sigma^2)``."""
    gamma = np.asarray(gamma, dtype=float)
    z = inner_products(channels.h, beams.f)
    G, _, K, _ = z.shape
    desired = z[np.arange(G), np.arange(G)][:, np.arange(K), np.arange(K)]
    total = np.sum(np.abs(z) ** 2, axis=(0, 3)) + cfg.noise_power
    return np.sqrt(1.0 + gamma) * desired / total


def update_auxiliaries(channels: ChannelSet, beams: BeamformerSet, cfg: SystemConfig) -> AuxiliaryState:
    gamma = update_gamma(channels, beams, cfg)
    return AuxiliaryState(gamma, update_omega(channels, beams, gamma, cfg))


def _transformed_from_inner(z, aux: AuxiliaryState, noise) -> np.ndarray:
    G, _, K, _ = z.shape
    desired = z[np.arange(G), np.arange(G)][:, np.arange(K), np.arange(K)]
    total = np.sum(np.abs(z) ** 2, axis=(0, 3)) + noise
    gamma, omega = aux.gamma, aux.omega
    return (
        np.log1p(gamma)
        - gamma
        + 2.0 * np.sqrt(1.0 + gamma) * np.real(np.conj(omega) * desired)
        - np.abs(omega) ** 2 * total
    )


def transformed_rates(channels: ChannelSet, beams: BeamformerSet, aux: AuxiliaryState,
                      cfg: SystemConfig) -> np.ndarray:
    """Transformed rate of every user, shape (G, K)."""
    return _transformed_from_inner(inner_products(channels.h, beams.f), aux, cfg.noise_power)


def eval_transformed_rate(channels, beams, aux, cfg, g: int, k: int) -> float:
    return float(transformed_rates(channels, beams, aux, cfg)[g, k])


@dataclass(frozen=True)
class QuadraticCoefficients:
    """Per-user quadratic form of the transformed rate.

    ``R(f) = -sum_i f_i^H B1[i,g,k] f_i + 2 Re{b1[g,k]^H f_g} + c1[g,k]``.

    ``B1[i,g,k]`` is block diagonal with ``K`` identical rank-one blocks
    ``w w^H``, ``w = w_vec[i, g, k]``. ``b1[g, k]`` is stored as a (K, N)
    user-major array and is nonzero only in row ``k``.
    """

    c1: np.ndarray  # (G, K)
    b1: np.ndarray  # (G, K, K, N)
    w_vec: np.ndarray  # (G_i, G, K, N)
    aux: AuxiliaryState

    def b1_stacked(self, g: int, k: int) -> np.ndarray:
        return self.b1[g, k].reshape(-1)

    def dense_B1(self, i: int, g: int, k: int) -> np.ndarray:
        K = self.b1.shape[1]
        w = self.w_vec[i, g, k]
        return np.kron(np.eye(K), np.outer(w, w.conj()))

    def evaluate(self, beams: BeamformerSet) -> np.ndarray:
        """Quadratic-form value for every user, shape (G, K)."""
        f = beams.f
        # sum_i f_i^H B1[i,g,k] f_i = sum_i sum_m |w_{i,g,k}^H f_{i,m}|^2
        quad = np.sum(np.abs(np.einsum("igkn,imn->igkm", self.w_vec.conj(), f)) ** 2, axis=(0, 3))
        lin = np.einsum("gkmn,gmn->gk", self.b1.conj(), f)
        return -quad + 2.0 * np.real(lin) + self.c1


def assemble_coefficients(channels: ChannelSet, aux: AuxiliaryState, cfg: SystemConfig) -> QuadraticCoefficients:
    h = channels.h
    G, _, K, N = h.shape
    gamma, omega = aux.gamma, aux.omega
    c1 = np.log1p(gamma) - gamma - np.abs(omega) ** 2 * cfg.noise_power
    b1 = np.zeros((G, K, K, N), dtype=complex)
    for g in range(G):
        for k in range(K):
            # omega (not its conjugate) so that b1^H f_g = sqrt(1+gamma) conj(omega) h^H f_{g,k}
            b1[g, k, k] = np.sqrt(1.0 + gamma[g, k]) * omega[g, k] * h[g, g, k]
    w_vec = np.abs(omega)[None, :, :, None] * h
    return QuadraticCoefficients(c1=c1, b1=b1, w_vec=w_vec, aux=aux)
