import sys
import numpy as np
import pytest

from trtc_beamforming import BeamformerSet, ChannelSet, SystemConfig, drop_users, generate_channels


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_instance(rng, G=2, K=2, N=4, noise=0.5, P=1.0):
    """Unit-scale channels so that relative tolerances are meaningful."""
    cfg = SystemConfig(num_cells=G, num_users_per_cell=K, num_units=N,
                       unit_power_max=P, noise_power=noise)
    return cfg, ChannelSet(crandn(rng, G, G, K, N))


def random_feasible_beams(rng, G, K, N, P=1.0):
    f = crandn(rng, G, K, N)
    scale = rng.uniform(0.1, 1.0, size=(G, 1, N))
    f *= np.sqrt(P * scale / np.sum(np.abs(f) ** 2, axis=1, keepdims=True))
    return BeamformerSet(f)


def random_in_ball(rng, dim, P):
    x = crandn(rng, dim)
    return x / np.linalg.norm(x) * np.sqrt(P) * rng.uniform() ** (1.0 / (2 * dim))


def scenario(cfg, seed):
    return generate_channels(cfg, drop_users(cfg, seed), seed)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
