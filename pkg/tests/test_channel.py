"""Fading-channel service kernels and controlled capacity paths."""

import math

import numpy as np
import pytest

from mapq.channel import (
    ChannelSpec,
    capacity_kernel,
    controlled_capacity_process,
    instantaneous_capacity,
    quantize_capacity,
)
from mapq.copulas import dependence_control, one_param_frechet
from mapq.laws import RayleighCapacity
from mapq.spectral import mean_rate


def test_channel_spec_validation():
    with pytest.raises(ValueError):
        ChannelSpec(0.0, np.eye(2) + 1.0, ("a", "b"))
    with pytest.raises(ValueError):
        ChannelSpec(20.0, np.ones((3, 3)), ("a", "b"))
    with pytest.raises(ValueError):
        ChannelSpec(20.0, np.array([[1.0, -1.0], [1.0, 1.0]]), ("a", "b"))


def test_instantaneous_capacity_formula():
    assert instantaneous_capacity(3.0, 1.0, 20.0) == pytest.approx(40.0, rel=1e-14)
    assert instantaneous_capacity(0.0, 5.0, 20.0) == 0.0
    with pytest.raises(ValueError):
        instantaneous_capacity(-1.0, 1.0, 1.0)


def test_capacity_kernel_maps_snr_entries(delay_figure_channel):
    p = np.array([[0.3, 0.7], [0.4, 0.6]])
    k = capacity_kernel(p, delay_figure_channel)
    assert np.array_equal(k.transition, p)
    for i in range(2):
        for j in range(2):
            law = k.law(i, j)
            assert isinstance(law, RayleighCapacity)
            assert law.snr == pytest.approx(delay_figure_channel.snr_matrix[i, j])
    # starts at the stationary distribution of the state chain
    assert np.allclose(k.initial_dist @ p, k.initial_dist, atol=1e-9)


def test_capacity_kernel_mean_rate_mixes_states(delay_figure_channel):
    p = np.array([[0.3, 0.7], [0.3, 0.7]])
    k = capacity_kernel(p, delay_figure_channel)
    hi = RayleighCapacity(20.0, math.exp(0.5)).mean()
    lo = RayleighCapacity(20.0, 0.7 * math.exp(0.5)).mean()
    assert mean_rate(k) == pytest.approx(0.3 * hi + 0.7 * lo, rel=1e-9)


def test_quantize_capacity_mean_accuracy():
    law = RayleighCapacity(20.0, 10.0)
    q = quantize_capacity(10.0, 20.0, 256)
    assert q.mean() == pytest.approx(law.mean(), rel=1e-2)
    assert len(q.support) == 256


def test_controlled_capacity_process_reproducible(power_control_channel):
    plan = dependence_control([one_param_frechet(0.5)], [np.array([0.3, 0.7])], 1)
    a = controlled_capacity_process(plan, power_control_channel, 500, 42)
    b = controlled_capacity_process(plan, power_control_channel, 500, 42)
    assert np.array_equal(a.capacity, b.capacity)
    assert np.array_equal(a.states, b.states)
    assert a.capacity.shape == (500,)
    assert a.transient.shape == (500,)
    assert a.transient[-1] == pytest.approx(a.capacity.mean(), rel=1e-12)


def test_controlled_capacity_state_occupancy(power_control_channel):
    plan = dependence_control([one_param_frechet(0.0)], [np.array([0.3, 0.7])], 1)
    path = controlled_capacity_process(plan, power_control_channel, 20_000, 3)
    assert np.mean(path.states == 0) == pytest.approx(0.3, abs=0.02)
