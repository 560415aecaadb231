"""Scenario configuration, user drops and channel generation.

All dB/dBm quantities are converted to linear scale once, inside
:meth:`SystemConfig.from_dict`. Everything downstream works in watts and
linear gains.

Random draws are keyed per user / per link (``default_rng([seed, tag, ...])``)
so that scenarios which differ only in a swept parameter share their user
positions and small-scale fading (common random numbers). Growing ``N``,
``K`` or ``G`` keeps the draws of the smaller scenario as a prefix.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

__all__ = [
    "ConfigError",
    "SystemConfig",
    "UserDrop",
    "ChannelSet",
    "db_to_linear",
    "dbm_to_watt",
    "path_loss",
    "drop_users",
    "generate_channels",
    "steering_vector",
]

_DROP_TAG = 0
_FADING_TAG = 1
_REF_DISTANCE = 1.0  # d0 in metres


class ConfigError(ValueError):
    """Invalid scenario configuration. ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def dbm_to_watt(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Scenario scalars and solver knobs, all in linear units.

    Use :meth:`from_dict` to build one from dB-valued input (config files,
    CLI overrides). Direct construction expects linear values.
    """

    num_cells: int = 2
    num_users_per_cell: int = 2
    num_units: int = 16
    unit_power_max: float = 1e-2  # 10 dBm
    noise_power: Any = 1e-11  # -80 dBm; scalar or (G, K)
    pathloss_ref: float = 1e-3  # -30 dB at d0 = 1 m
    pathloss_exponent: float = 3.2
    rician_factor: float = float(10 ** 0.5)  # 5 dB
    trtc_positions: Any = None  # None -> TRTCs on the x axis, cell_spacing apart
    cell_spacing: float = 140.0
    trtc_height: float = 4.5
    cell_radius: float = 100.0
    user_height: float = 1.5
    array: str = "ula"
    smoothing_mu: float = 20.0
    mu_schedule: str = "fixed"
    mu_max: float = 200.0
    max_outer_iters: int = 100
    convergence_tol: float = 1e-4
    max_backtracks: int = 10
    init: str = "matched"
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("num_cells", "num_users_per_cell", "num_units"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(name, f"must be a positive integer, got {v!r}")
        if not self.unit_power_max > 0:
            raise ConfigError("unit_power_max", "must be > 0")
        if not self.smoothing_mu > 0:
            raise ConfigError("smoothing_mu", "must be > 0")
        if not self.pathloss_ref > 0:
            raise ConfigError("pathloss_ref", "must be > 0")
        if self.rician_factor < 0:
            raise ConfigError("rician_factor", "must be >= 0")
        if self.cell_radius < 0:
            raise ConfigError("cell_radius", "must be >= 0")
        if self.array not in ("ula", "upa"):
            raise ConfigError("array", "must be 'ula' or 'upa'")
        if self.array == "upa" and int(round(np.sqrt(self.num_units))) ** 2 != self.num_units:
            raise ConfigError("array", "upa requires a perfect-square num_units")
        if self.mu_schedule not in ("fixed", "geometric"):
            raise ConfigError("mu_schedule", "must be 'fixed' or 'geometric'")
        if self.init not in ("matched", "random"):
            raise ConfigError("init", "must be 'matched' or 'random'")
        if self.max_outer_iters < 1:
            raise ConfigError("max_outer_iters", "must be >= 1")
        if self.max_backtracks < 0:
            raise ConfigError("max_backtracks", "must be >= 0")
        if self.convergence_tol < 0:
            raise ConfigError("convergence_tol", "must be >= 0")

        noise = np.broadcast_to(
            np.asarray(self.noise_power, dtype=float), (self.num_cells, self.num_users_per_cell)
        ).copy()
        if not np.all(noise > 0):
            raise ConfigError("noise_power", "all noise powers must be > 0")
        noise.setflags(write=False)
        object.__setattr__(self, "noise_power", noise)

        if self.trtc_positions is None:
            pos = np.array(
                [[g * self.cell_spacing, 0.0, self.trtc_height] for g in range(self.num_cells)]
            )
        else:
            pos = np.asarray(self.trtc_positions, dtype=float)
            if pos.shape != (self.num_cells, 3):
                raise ConfigError(
                    "trtc_positions",
                    f"need {self.num_cells} 3-D coordinates, got shape {pos.shape}",
                )
        pos.setflags(write=False)
        object.__setattr__(self, "trtc_positions", pos)

    @property
    def G(self) -> int:
        return self.num_cells

    @property
    def K(self) -> int:
        return self.num_users_per_cell

    @property
    def N(self) -> int:
        return self.num_units

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "SystemConfig":
        """Build a config from file-style keys (dB / dBm units).

        Recognised unit-bearing keys: ``unit_power_dbm``, ``noise_power_dbm``,
        ``pathloss_ref_db``, ``rician_factor_db`` (``"inf"`` allowed). Every
        other key must be a :class:`SystemConfig` field name. Unknown keys
        raise :class:`ConfigError`.
        """
        raw = dict(raw)
        kw: dict[str, Any] = {}
        conversions = {
            "unit_power_dbm": ("unit_power_max", dbm_to_watt),
            "noise_power_dbm": ("noise_power", dbm_to_watt),
            "pathloss_ref_db": ("pathloss_ref", db_to_linear),
            "rician_factor_db": ("rician_factor", db_to_linear),
        }
        names = {f.name for f in dataclasses.fields(cls)}
        for key, value in raw.items():
            if key in conversions:
                target, conv = conversions[key]
                try:
                    converted = conv(float(value) if np.isscalar(value) or isinstance(value, str) else value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(key, f"not numeric: {value!r}") from exc
                kw[target] = float(converted) if np.ndim(converted) == 0 else converted
            elif key in names:
                kw[key] = value
            else:
                raise ConfigError(key, "unknown configuration key")
        for name in ("num_cells", "num_users_per_cell", "num_units", "max_outer_iters",
                     "max_backtracks", "rng_seed"):
            if name in kw:
                try:
                    kw[name] = int(kw[name])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(name, f"not an integer: {kw[name]!r}") from exc
        for name in ("convergence_tol", "smoothing_mu", "cell_radius", "pathloss_exponent",
                     "cell_spacing", "user_height", "trtc_height", "mu_max"):
            if name in kw:
                try:
                    kw[name] = float(kw[name])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(name, f"not numeric: {kw[name]!r}") from exc
        return cls(**kw)


@dataclass(frozen=True)
class UserDrop:
    """User positions, ``positions[g, k]`` is a 3-D point in metres."""

    positions: np.ndarray


@dataclass(frozen=True)
class ChannelSet:
    """Channel vectors ``h[i, g, k]`` from the TRTC of cell ``i`` to user ``k`` of cell ``g``."""

    h: np.ndarray
    distances: np.ndarray = field(repr=False, default=None)

    @property
    def shape(self):
        return self.h.shape

    @property
    def G(self) -> int:
        return self.h.shape[0]

    @property
    def K(self) -> int:
        return self.h.shape[2]

    @property
    def N(self) -> int:
        return self.h.shape[3]


def path_loss(d, cfg: SystemConfig):
    """Large-scale power gain ``C0 * (d / d0) ** -alpha`` (linear)."""
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError(f"invalid distance(s): path loss needs d > 0, got {d[~(d > 0)]!r}")
    out = cfg.pathloss_ref * (d / _REF_DISTANCE) ** (-cfg.pathloss_exponent)
    return float(out) if out.ndim == 0 else out


def _seed_of(rng) -> int:
    if rng is None:
        raise TypeError("rng must be an int seed or numpy Generator")
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(2**63 - 1))
    return int(rng)


def drop_users(cfg: SystemConfig, rng) -> UserDrop:
    """Place every user uniformly on the disk around its serving TRTC.

    ``rng`` is an integer seed or a ``numpy.random.Generator`` (one integer
    is drawn from it and used as the seed).
    """
    seed = _seed_of(rng)
    pos = np.empty((cfg.G, cfg.K, 3))
    for g in range(cfg.G):
        for k in range(cfg.K):
            r_u, phi_u = np.random.default_rng([seed, _DROP_TAG, g, k]).random(2)
            r = cfg.cell_radius * np.sqrt(r_u)
            phi = 2.0 * np.pi * phi_u
            cx, cy, _ = cfg.trtc_positions[g]
            pos[g, k] = (cx + r * np.cos(phi), cy + r * np.sin(phi), cfg.user_height)
    return UserDrop(pos)


def _element_offsets(cfg: SystemConfig) -> np.ndarray:
    """Element positions in half-wavelength units, shape (N, 3)."""
    n = np.arange(cfg.N)
    if cfg.array == "ula":
        return np.stack([n, np.zeros(cfg.N), np.zeros(cfg.N)], axis=1).astype(float)
    side = int(round(np.sqrt(cfg.N)))
    return np.stack([n // side, np.zeros(cfg.N), n % side], axis=1).astype(float)


def steering_vector(direction, cfg: SystemConfig) -> np.ndarray:
    """Unit-modulus array response toward ``direction`` (half-wavelength spacing)."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    return np.exp(1j * np.pi * (_element_offsets(cfg) @ u))


def generate_channels(cfg: SystemConfig, drop: UserDrop, rng) -> ChannelSet:
    """Rician channels for every (TRTC, cell, user) triple.

    ``h = sqrt(PL) * (sqrt(k/(1+k)) a_LOS + sqrt(1/(1+k)) g)`` with ``g`` i.i.d.
    CN(0, 1); ``rician_factor = inf`` gives the pure LOS channel.
    """
    seed = _seed_of(rng)
    G, K, N = cfg.G, cfg.K, cfg.N
    kappa = cfg.rician_factor
    if np.isinf(kappa):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los, w_nlos = np.sqrt(kappa / (1 + kappa)), np.sqrt(1 / (1 + kappa))

    h = np.empty((G, G, K, N), dtype=complex)
    dist = np.empty((G, G, K))
    for i in range(G):
        for g in range(G):
            for k in range(K):
                delta = drop.positions[g, k] - cfg.trtc_positions[i]
                d = float(np.linalg.norm(delta))
                dist[i, g, k] = d
                z = np.random.default_rng([seed, _FADING_TAG, i, g, k]).standard_normal((N, 2))
                nlos = (z[:, 0] + 1j * z[:, 1]) / np.sqrt(2.0)
                h[i, g, k] = np.sqrt(path_loss(d, cfg)) * (
                    w_los * steering_vector(delta, cfg) + w_nlos * nlos
                )
    h.setflags(write=False)
    return ChannelSet(h, dist)
