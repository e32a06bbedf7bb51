"""Scan core: associativity, sequential/parallel equivalence, work bounds."""

import numpy as np
import pytest

from sharessm.errors import DimensionError
from sharessm.scan import (Block2, BlockDiagRecurrence, ScanCounter,
                           ScanElement, adjoint_scan, combine, parallel_scan,
                           scan, sequential_scan)


def random_contracting_blocks(rng, p, radius=0.99):
    blocks = rng.uniform(-1.0, 1.0, (p, 2, 2))
    for j in range(p):
        r = np.abs(np.linalg.eigvals(blocks[j])).max()
        if r > radius:
            blocks[j] *= radius / r
    return blocks


class TestCombine:
    def test_identity_is_two_sided(self):
        rng = np.random.default_rng(0)
        p = 4
        elem = ScanElement(rng.normal(size=(p, 2, 2)), rng.normal(size=(p, 2)))
        ident = ScanElement.identity(p)
        for result in (combine(elem, ident), combine(ident, elem)):
            np.testing.assert_allclose(result.mat, elem.mat, rtol=0, atol=0)
            np.testing.assert_allclose(result.vec, elem.vec, rtol=0, atol=0)

    def test_hand_case_single_block(self):
        # a then b: mat = b.mat @ a.mat, vec = b.mat @ a.vec + b.vec
        a = ScanElement(np.array([[[2.0, 0.0], [0.0, 2.0]]]), np.array([[1.0, 1.0]]))
        b = ScanElement(np.array([[[1.0, 1.0], [0.0, 1.0]]]), np.array([[0.0, 0.0]]))
        out = combine(a, b)
        np.testing.assert_allclose(out.mat[0], [[2.0, 2.0], [0.0, 2.0]])
        np.testing.assert_allclose(out.vec[0], [2.0, 1.0])

    def test_associativity_random_triples(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            p = int(rng.integers(1, 17))
            elems = [ScanElement(rng.uniform(-1, 1, (p, 2, 2)),
                                 rng.uniform(-1, 1, (p, 2))) for _ in range(3)]
            left = combine(combine(elems[0], elems[1]), elems[2])
            right = combine(elems[0], combine(elems[1], elems[2]))
            np.testing.assert_allclose(left.mat, right.mat, rtol=1e-12, atol=1e-14)
            np.testing.assert_allclose(left.vec, right.vec, rtol=1e-12, atol=1e-14)

    def test_state_size_mismatch(self):
        a = ScanElement.identity(2)
        b = ScanElement.identity(3)
        with pytest.raises(DimensionError):
            combine(a, b)


class TestScan:
    def test_identity_recurrence_holds_state(self):
        p, length = 3, 20
        blocks = np.tile(np.eye(2), (p, 1, 1))
        rec = BlockDiagRecurrence(blocks, np.zeros((length, p, 2)))
        s0 = np.arange(2 * p, dtype=float).reshape(p, 2)
        for mode in ("sequential", "parallel"):
            out = scan(rec, s0, mode=mode)
            np.testing.assert_array_equal(out, np.broadcast_to(s0, out.shape))

    def test_memoryless_recurrence_returns_forcing(self):
        rng = np.random.default_rng(2)
        p, length = 2, 9
        forcing = rng.normal(size=(length, p, 2))
        rec = BlockDiagRecurrence(np.zeros((p, 2, 2)), forcing)
        for mode in ("sequential", "parallel"):
            np.testing.assert_allclose(scan(rec, np.zeros((p, 2)), mode=mode),
                                       forcing, rtol=0, atol=0)

    @pytest.mark.parametrize("length", [1, 2, 3, 64, 65, 127, 1000, 1025])
    def test_parallel_matches_sequential(self, length):
        rng = np.random.default_rng(length)
        p = int(rng.integers(1, 33))
        rec = BlockDiagRecurrence(random_contracting_blocks(rng, p),
                                  rng.normal(size=(length, p, 2)))
        s0 = rng.normal(size=(p, 2))
        seq = scan(rec, s0, mode="sequential")
        par = scan(rec, s0, mode="parallel")
        np.testing.assert_allclose(par, seq, rtol=1e-9, atol=1e-12)

    def test_batched_forcing(self):
        rng = np.random.default_rng(3)
        p, length, batch = 4, 70, 5
        blocks = random_contracting_blocks(rng, p)
        forcing = rng.normal(size=(length, batch, p, 2))
        s0 = rng.normal(size=(batch, p, 2))
        seq = sequential_scan(blocks, forcing, s0)
        par = parallel_scan(blocks, forcing, s0)
        np.testing.assert_allclose(par, seq, rtol=1e-9, atol=1e-12)
        # each batch lane must equal its own unbatched scan
        for b in range(batch):
            rec = BlockDiagRecurrence(blocks, forcing[:, b])
            np.testing.assert_allclose(seq[:, b], scan(rec, s0[b]), rtol=1e-12,
                                       atol=1e-14)

    def test_closed_form_small_case(self):
        # element n must equal M^n s0 + sum_k M^(n-k) F_k
        rng = np.random.default_rng(4)
        p, length = 2, 6
        blocks = random_contracting_blocks(rng, p)
        forcing = rng.normal(size=(length, p, 2))
        rec = BlockDiagRecurrence(blocks, forcing)
        s0 = rng.normal(size=(p, 2))
        out = scan(rec, s0, mode="parallel")
        for n in range(1, length + 1):
            expect = np.zeros((p, 2))
            for j in range(p):
                m_pow = np.linalg.matrix_power(blocks[j], n)
                acc = m_pow @ s0[j]
                for k in range(1, n + 1):
                    acc += np.linalg.matrix_power(blocks[j], n - k) @ forcing[k - 1, j]
                expect[j] = acc
            np.testing.assert_allclose(out[n - 1], expect, rtol=1e-10, atol=1e-12)

    def test_empty_sequence_rejected(self):
        with pytest.raises(DimensionError):
            BlockDiagRecurrence(np.zeros((1, 2, 2)), np.zeros((0, 1, 2)))

    def test_nonfinite_s0_rejected(self):
        rec = BlockDiagRecurrence(np.zeros((1, 2, 2)), np.zeros((3, 1, 2)))
        with pytest.raises(DimensionError):
            scan(rec, np.array([[np.nan, 0.0]]))

    def test_auto_mode_thresholds(self):
        rng = np.random.default_rng(5)
        p = 2
        blocks = random_contracting_blocks(rng, p)
        for length in (10, 2000):
            rec = BlockDiagRecurrence(blocks, rng.normal(size=(length, p, 2)))
            auto = scan(rec, np.zeros((p, 2)), mode="auto")
            seq = scan(rec, np.zeros((p, 2)), mode="sequential")
            np.testing.assert_allclose(auto, seq, rtol=1e-9, atol=1e-12)

    def test_parallel_deterministic(self):
        rng = np.random.default_rng(6)
        p, length = 8, 300
        rec = BlockDiagRecurrence(random_contracting_blocks(rng, p),
                                  rng.normal(size=(length, p, 2)))
        one = scan(rec, np.zeros((p, 2)), mode="parallel")
        two = scan(rec, np.zeros((p, 2)), mode="parallel")
        assert np.array_equal(one, two)


class TestWorkBounds:
    @pytest.mark.parametrize("length", [2, 3, 5, 64, 100, 1000, 1025, 4096])
    def test_combine_count_at_most_2l(self, length):
        rng = np.random.default_rng(length)
        p = 3
        rec = BlockDiagRecurrence(random_contracting_blocks(rng, p),
                                  rng.normal(size=(length, p, 2)))
        counter = ScanCounter()
        scan(rec, np.zeros((p, 2)), mode="parallel", counter=counter)
        assert counter.combines <= 2 * length

    def test_per_combine_cost_linear_in_state_size(self):
        # block_ops == combines * P certifies no dense 2P x 2P product
        rng = np.random.default_rng(7)
        length = 257
        for p in (2, 4, 8):
            rec = BlockDiagRecurrence(random_contracting_blocks(rng, p),
                                      rng.normal(size=(length, p, 2)))
            counter = ScanCounter()
            scan(rec, np.zeros((p, 2)), mode="parallel", counter=counter)
            assert counter.block_ops == counter.combines * p


class TestAdjoint:
    def test_matches_geometric_sum_for_constant_blocks(self):
        # gradient of sum_n s_n with respect to s0 is sum_n (M^T)^n
        rng = np.random.default_rng(8)
        p, length = 3, 12
        blocks = random_contracting_blocks(rng, p)
        ones = np.ones((length, p, 2))
        lam = adjoint_scan(blocks, ones)
        bt = np.swapaxes(blocks, -1, -2)
        grad_s0 = np.einsum("pij,pj->pi", bt, lam[0])
        expect = np.zeros((p, 2))
        for j in range(p):
            acc = np.zeros(2)
            for n in range(1, length + 1):
                acc += np.linalg.matrix_power(bt[j], n) @ np.ones(2)
            expect[j] = acc
        np.testing.assert_allclose(grad_s0, expect, rtol=1e-10, atol=1e-12)

    def test_adjoint_modes_agree(self):
        rng = np.random.default_rng(9)
        p, length = 4, 500
        blocks = random_contracting_blocks(rng, p)
        upstream = rng.normal(size=(length, p, 2))
        seq = adjoint_scan(blocks, upstream, mode="sequential")
        par = adjoint_scan(blocks, upstream, mode="parallel")
        np.testing.assert_allclose(par, seq, rtol=1e-9, atol=1e-12)


class TestTypes:
    def test_block2_round_trip(self):
        b = Block2(1.0, 2.0, 3.0, 4.0)
        np.testing.assert_array_equal(b.as_array(), [[1.0, 2.0], [3.0, 4.0]])
        assert Block2.from_array(b.as_array()) == b

    def test_recurrence_from_block2_list(self):
        blocks = [Block2(1.0, 0.0, 0.0, 1.0), Block2(0.5, -0.5, 0.5, 0.5)]
        rec = BlockDiagRecurrence(blocks, np.zeros((4, 2, 2)))
        assert rec.state_size == 2
        assert rec.length == 4

    def test_nonfinite_blocks_rejected(self):
        with pytest.raises(DimensionError):
            BlockDiagRecurrence(np.full((1, 2, 2), np.inf), np.zeros((2, 1, 2)))

    def test_forcing_state_mismatch(self):
        with pytest.raises(DimensionError):
            BlockDiagRecurrence(np.zeros((2, 2, 2)), np.zeros((4, 3, 2)))
