"""Shared fixtures: reference kernels, channels, and config documents."""

import math

import numpy as np
import pytest
from hypothesis import settings

from mapq.channel import ChannelSpec, capacity_kernel
from mapq.copulas import one_param_frechet, transition_from_copula
from mapq.laws import Constant, DiscretePmf, gaussian_quantized
from mapq.spectral import MapKernel, single_state_kernel

settings.register_profile("suite", max_examples=25, deadline=None, derandomize=True)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def toy_service():
    """Single-state service with cgf -3*theta + theta^2 (Gaussian-equivalent)."""
    return single_state_kernel(gaussian_quantized(3.0, math.sqrt(2.0)))


@pytest.fixture(scope="session")
def toy_arrival():
    return single_state_kernel(Constant(1.0), label="const")


@pytest.fixture(scope="session")
def delay_figure_channel():
    """Rayleigh channel of the delay-tail figure: W=20, SNR rows e^0.5 / 0.7e^0.5."""
    s = math.exp(0.5)
    return ChannelSpec(20.0, np.array([[s, s], [0.7 * s, 0.7 * s]]), ("hi", "lo"))


@pytest.fixture(scope="session")
def power_control_channel():
    """High-contrast channel of the power-control figure: SNR rows 1e4 / 10."""
    return ChannelSpec(20.0, np.array([[1e4, 1e4], [10.0, 10.0]]), ("hi", "lo"))


def frechet_capacity_kernel(channel, alpha, varpi=(0.3, 0.7)):
    """Capacity kernel whose state chain realizes a one-parameter Frechet copula."""
    varpi = np.asarray(varpi, dtype=float)
    p, _ = transition_from_copula(one_param_frechet(alpha), varpi)
    k = capacity_kernel(p, channel)
    return MapKernel(k.state_labels, k.transition, k.increments, varpi)


def random_kernel(rng, n, mean_offset=0.0, spread=1.0):
    """Random irreducible kernel with 3-atom discrete increments per transition."""
    while True:
        p = rng.dirichlet(np.ones(n) * 2.0, size=n)
        if np.all(p > 1e-3):
            break
    laws = tuple(
        tuple(
            DiscretePmf(
                tuple(sorted(mean_offset + spread * rng.normal(0.0, 1.0, 3))),
                (0.3, 0.4, 0.3),
            )
            for _ in range(n)
        )
        for _ in range(n)
    )
    return MapKernel(tuple(f"s{i}" for i in range(n)), p, laws, np.full(n, 1.0 / n))


@pytest.fixture
def toy_config_text():
    return """\
arrival:
  constant: 1.0
service:
  kernel:
    states: [only]
    transition: [[1.0]]
    increments: [[{law: normal, mean: 3.0, std: 1.4142135623730951}]]
    initial_dist: [1.0]
simulation:
  horizon: 120
  replications: 3000
  seed: 7
  levels: [1, 2]
output:
  directory: out
"""
