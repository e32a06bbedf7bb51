"""Spike nonlinearity, surrogate kernel, and firing-rate instrumentation."""

import math
from fractions import Fraction

import numpy as np
import pytest

from sharessm.errors import DimensionError, ParameterError
from sharessm.spiking import (SpikeTensor, SurrogateConfig, ThresholdParams,
                              if_neuron, smoothed_step, spike_backward,
                              spike_forward, surrogate_kernel)


class TestSpikeForward:
    def test_boundary_fires(self):
        theta = ThresholdParams(np.array([0.5, 1.0]))
        v = np.array([[0.5, 1.0], [0.4999999, 0.9999999]])
        out = spike_forward(v, theta)
        np.testing.assert_array_equal(out.values, [[1.0, 1.0], [0.0, 0.0]])

    def test_deeply_subthreshold_is_silent(self):
        theta = ThresholdParams(np.zeros(3))
        out = spike_forward(np.full((10, 3), -1e12), theta)
        assert out.spike_count == 0
        assert out.firing_rate == 0.0

    def test_uniform_inputs_fire_at_half_rate(self):
        rng = np.random.default_rng(0)
        v = rng.random((1000, 100))
        out = spike_forward(v, ThresholdParams(np.full(100, 0.5)))
        assert abs(out.firing_rate - 0.5) < 0.02

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            spike_forward(np.zeros((4, 3)), ThresholdParams(np.zeros(2)))

    def test_if_neuron_is_stateless_thresholding(self):
        rng = np.random.default_rng(1)
        v = rng.normal(size=(7, 4))
        theta = ThresholdParams(rng.random(4))
        np.testing.assert_array_equal(if_neuron(v, theta).values,
                                      spike_forward(v, theta).values)


class TestSurrogateKernel:
    def test_peak_value(self):
        cfg = SurrogateConfig()
        expect = ((1.0 + cfg.h) / (cfg.sigma * math.sqrt(2.0 * math.pi))
                  - 2.0 * cfg.h / (6.0 * cfg.sigma * math.sqrt(2.0 * math.pi)))
        np.testing.assert_allclose(surrogate_kernel(0.0, cfg), expect, rtol=1e-14)

    def test_far_tail_vanishes(self):
        # the wide lobe has scale 6*sigma, so decay is gauged against it
        cfg = SurrogateConfig()
        wide = 6.0 * cfg.sigma
        x = np.array([10.0 * wide, -12.0 * wide, 40.0])
        assert np.all(np.abs(surrogate_kernel(x, cfg)) <= 1e-8)

    def test_integral_is_one_minus_h(self):
        cfg = SurrogateConfig()
        span = 20.0 * 6.0 * cfg.sigma  # cover both lobes
        x = np.linspace(-span, span, 1_200_001)
        integral = np.trapezoid(surrogate_kernel(x, cfg), x)
        np.testing.assert_allclose(integral, 1.0 - cfg.h, atol=1e-6)

    def test_kernel_is_derivative_of_smoothed_step(self):
        cfg = SurrogateConfig()
        rng = np.random.default_rng(2)
        x = rng.uniform(-2.0, 2.0, 8)
        h = 1e-6
        numeric = (smoothed_step(x + h, cfg) - smoothed_step(x - h, cfg)) / (2.0 * h)
        analytic = surrogate_kernel(x, cfg)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4)

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            SurrogateConfig(sigma=0.0)
        with pytest.raises(ParameterError):
            SurrogateConfig(h=1.0)


class TestSpikeBackward:
    def test_gradients_shapes_and_values(self):
        cfg = SurrogateConfig(scale=2.0)
        rng = np.random.default_rng(3)
        v = rng.normal(size=(5, 3))
        theta = ThresholdParams(rng.random(3))
        upstream = rng.normal(size=(5, 3))
        grad_v, grad_theta = spike_backward(v, theta, upstream, cfg)
        kernel = cfg.scale * surrogate_kernel(v - theta.theta, cfg)
        np.testing.assert_allclose(grad_v, upstream * kernel, rtol=1e-14)
        np.testing.assert_allclose(grad_theta, -(upstream * kernel).sum(axis=0),
                                   rtol=1e-14)

    def test_zero_upstream_gives_zero(self):
        v = np.zeros((4, 2))
        theta = ThresholdParams(np.ones(2))
        grad_v, grad_theta = spike_backward(v, theta, np.zeros((4, 2)))
        assert not grad_v.any() and not grad_theta.any()

    def test_upstream_shape_checked(self):
        with pytest.raises(DimensionError):
            spike_backward(np.zeros((4, 2)), ThresholdParams(np.ones(2)),
                           np.zeros((3, 2)))


class TestSpikeTensor:
    def test_rejects_non_binary(self):
        with pytest.raises(DimensionError):
            SpikeTensor(np.array([[0.0, 0.5]]))

    def test_exact_firing_rate(self):
        values = np.zeros((4, 8))
        values[0, :3] = 1.0
        t = SpikeTensor(values)
        assert t.firing_rate_exact == Fraction(3, 32)
        assert t.spike_count == 3
