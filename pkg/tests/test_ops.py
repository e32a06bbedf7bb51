"""Accumulate-only spike products and the multiply census."""

import numpy as np
import pytest

from sharessm import ops
from sharessm.layers import Context
from sharessm.network import ModelConfig, build_model


class TestSpikeMatmul:
    def test_matches_dense_product(self):
        rng = np.random.default_rng(0)
        weights = rng.normal(size=(5, 7))
        spikes = (rng.random((3, 11, 7)) < 0.4).astype(float)
        fast = ops.spike_matmul(weights, spikes)
        with ops.op_counting():
            counted = ops.spike_matmul(weights, spikes)
        np.testing.assert_allclose(counted, fast, rtol=1e-12, atol=1e-12)

    def test_counting_backend_never_multiplies_spikes(self):
        rng = np.random.default_rng(1)
        weights = rng.normal(size=(4, 6))
        spikes = (rng.random((9, 6)) < 0.5).astype(float)
        with ops.op_counting() as counter:
            ops.spike_matmul(weights, spikes)
            ops.spike_gate(rng.normal(size=6), spikes)
        assert counter.spike_operand_multiplies == 0
        assert counter.accumulates > 0

    def test_counting_backend_rejects_real_operand(self):
        with ops.op_counting():
            with pytest.raises(ValueError):
                ops.spike_matmul(np.eye(2), np.array([[0.5, 1.0]]))

    def test_spike_gate_selects(self):
        gate = np.array([2.0, -3.0, 0.5])
        spikes = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        with ops.op_counting():
            out = ops.spike_gate(gate, spikes)
        np.testing.assert_array_equal(out, [[2.0, 0.0, 0.5], [0.0, -3.0, 0.0]])

    def test_dense_matmul_counts_multiplies(self):
        rng = np.random.default_rng(2)
        with ops.op_counting() as counter:
            ops.dense_matmul(rng.normal(size=(3, 4)), rng.normal(size=(5, 4)))
        assert counter.dense_multiplies == 5 * 3 * 4

    def test_no_nesting(self):
        with ops.op_counting():
            with pytest.raises(RuntimeError):
                with ops.op_counting():
                    pass


class TestModelMultiplicationFreedom:
    def test_forward_pass_spike_products_are_accumulate_only(self):
        cfg = ModelConfig(n_blocks=2, hidden=6, state=4)
        graph = build_model(cfg, in_channels=2, seed=0)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 16, 2))
        with ops.op_counting() as counter:
            out = graph.forward(x, Context(training=False))
        assert counter.spike_operand_multiplies == 0
        # dense multiplies exist only in the encoder input map and decoder pool
        assert counter.dense_multiplies > 0
        ref = graph.forward(x, Context(training=False))
        np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)
