"""Arithmetic backends for products with binary (spike) operands.

Binary activations let a weight/activation product degenerate into a gather
and accumulate: for each output unit we sum the weight entries whose input
spiked, and never multiply.  The fast backend uses BLAS matmuls; the counting
backend routes every spike-operand product through an honest accumulate-only
path and keeps a census of floating-point multiplies so tests can assert that
none are attributable to spike operands.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np


@dataclass
class OpCounter:
    """Census of floating-point work, split by operand kind."""

    spike_operand_multiplies: int = 0
    dense_multiplies: int = 0
    accumulates: int = 0
    notes: list = field(default_factory=list)


_ACTIVE_COUNTER: OpCounter | None = None


@contextmanager
def op_counting():
    """Run the enclosed block on the accumulate-only spike backend.

    Yields the :class:`OpCounter` collecting the census.  Nesting is not
    supported; the counting backend is meant for small verification passes,
    not for throughput.
    """
    global _ACTIVE_COUNTER
    if _ACTIVE_COUNTER is not None:
        raise RuntimeError("op_counting contexts do not nest")
    counter = OpCounter()
    _ACTIVE_COUNTER = counter
    try:
        yield counter
    finally:
        _ACTIVE_COUNTER = None


def active_counter() -> OpCounter | None:
    return _ACTIVE_COUNTER


def is_binary(x: np.ndarray) -> bool:
    return bool(np.all((x == 0.0) | (x == 1.0)))


def spike_matmul(weights: np.ndarray, spikes: np.ndarray) -> np.ndarray:
    """Product ``spikes @ weights.T`` for a binary ``spikes`` operand.

    weights: (f_out, f_in); spikes: (..., f_in) with entries in {0, 1}.
    Returns (..., f_out).  Under the counting backend the result is computed
    by summing selected weight columns (accumulate-only) and the counter
    records zero spike-operand multiplies.
    """
    counter = _ACTIVE_COUNTER
    if counter is None:
        return spikes @ weights.T

    if not is_binary(spikes):
        raise ValueError("spike_matmul requires a binary spike operand")
    lead = spikes.shape[:-1]
    flat = spikes.reshape(-1, spikes.shape[-1]).astype(bool)
    out = np.zeros((flat.shape[0], weights.shape[0]), dtype=weights.dtype)
    for row, mask in enumerate(flat):
        if mask.any():
            # gather-accumulate: sum of selected columns, no multiply
            out[row] = weights[:, mask].sum(axis=1)
            counter.accumulates += int(mask.sum()) * weights.shape[0]
    return out.reshape(*lead, weights.shape[0])


def spike_gate(gate: np.ndarray, spikes: np.ndarray) -> np.ndarray:
    """Elementwise ``gate * spikes`` with a binary ``spikes`` operand.

    Reduces to a select (gate where spiking, zero elsewhere); no multiply.
    """
    counter = _ACTIVE_COUNTER
    if counter is None:
        return gate * spikes
    if not is_binary(spikes):
        raise ValueError("spike_gate requires a binary spike operand")
    counter.accumulates += int(np.count_nonzero(spikes))
    return np.where(spikes != 0.0, gate, 0.0)


def dense_matmul(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Product ``x @ weights.T`` for real-valued operands (MAC-priced)."""
    counter = _ACTIVE_COUNTER
    if counter is not None:
        n = int(np.prod(x.shape[:-1])) if x.ndim > 1 else 1
        counter.dense_multiplies += n * weights.shape[0] * weights.shape[1]
    return x @ weights.T
