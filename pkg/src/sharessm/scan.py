"""Linear recurrences over block-diagonal 2x2 systems via associative scans.

The recurrence ``s_n = M s_{n-1} + F_n`` is evaluated either by a direct
sequential loop or by a work-efficient parallel prefix scan over the
associative operator

    (a1, a2) . (b1, b2) = (b1 a1, b1 a2 + b2)

where the matrix parts are block-diagonal with 2x2 blocks, so every product
costs O(P) for state size P.  States are stored pairwise: a "2P vector" is an
array of shape (..., P, 2) holding (u_j, v_j) per block j.

The parallel path is the recursive halving form of the up-sweep/down-sweep
scan: combine adjacent pairs, scan the half-length stream, then patch the
remaining positions.  For a power-of-two length this performs exactly the
Blelloch schedule; for other lengths it needs no padding and keeps the total
number of pairwise combines below 2L.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

DEFAULT_SEQUENTIAL_THRESHOLD = 1024


@dataclass
class ScanCounter:
    """Instrumentation for scan work accounting.

    ``combines`` counts pairwise element combinations (one per sequence
    position, whatever the batch shape).  ``block_ops`` counts 2x2 block
    products, which is combines x P by construction: no dense 2P x 2P
    product is ever formed.
    """

    combines: int = 0
    block_ops: int = 0


@dataclass(frozen=True)
class Block2:
    """One 2x2 transition block coupling a (u_j, v_j) state pair."""

    a11: float
    a12: float
    a21: float
    a22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]], dtype=np.float64)

    @classmethod
    def from_array(cls, m: np.ndarray) -> "Block2":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (2, 2):
            raise DimensionError(f"expected a 2x2 block, got shape {m.shape}")
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))


def blocks_to_array(blocks) -> np.ndarray:
    """Normalize a block collection to a float array of shape (P, 2, 2)."""
    if isinstance(blocks, np.ndarray):
        arr = np.asarray(blocks, dtype=np.float64)
    else:
        arr = np.stack([b.as_array() if isinstance(b, Block2) else np.asarray(b, dtype=np.float64)
                        for b in blocks])
    if arr.ndim != 3 or arr.shape[-2:] != (2, 2):
        raise DimensionError(f"blocks must have shape (P, 2, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("block entries must be finite")
    return arr


@dataclass
class BlockDiagRecurrence:
    """A block-diagonal recurrence: constant transition blocks plus forcing.

    blocks: (P, 2, 2) transition blocks (or a sequence of Block2).
    forcing: (L, P, 2) paired forcing vectors (f_u, f_v) per step.
    """

    blocks: np.ndarray
    forcing: np.ndarray

    def __post_init__(self):
        self.blocks = blocks_to_array(self.blocks)
        self.forcing = np.asarray(self.forcing, dtype=self.blocks.dtype)
        if self.forcing.ndim != 3 or self.forcing.shape[-1] != 2:
            raise DimensionError(
                f"forcing must have shape (L, P, 2), got {self.forcing.shape}")
        if self.forcing.shape[1] != self.state_size:
            raise DimensionError(
                f"forcing is for {self.forcing.shape[1]} state pairs, "
                f"blocks declare {self.state_size}")
        if self.length < 1:
            raise DimensionError("recurrence needs at least one step")

    @property
    def state_size(self) -> int:
        return self.blocks.shape[0]

    @property
    def length(self) -> int:
        return self.forcing.shape[0]


@dataclass
class ScanElement:
    """One element of the scan stream: block-diagonal matrix plus vector."""

    mat: np.ndarray  # (P, 2, 2)
    vec: np.ndarray  # (P, 2)

    def __post_init__(self):
        self.mat = blocks_to_array(self.mat)
        self.vec = np.asarray(self.vec, dtype=self.mat.dtype)
        if self.vec.shape != (self.mat.shape[0], 2):
            raise DimensionError(
                f"vec shape {self.vec.shape} does not match {self.mat.shape[0]} blocks")

    @classmethod
    def identity(cls, state_size: int) -> "ScanElement":
        return cls(np.tile(np.eye(2), (state_size, 1, 1)), np.zeros((state_size, 2)))


def _matmat(m2: np.ndarray, m1: np.ndarray) -> np.ndarray:
    """Blockwise 2x2 product m2 @ m1 on (..., P, 2, 2) arrays."""
    b11, b12 = m2[..., 0, 0], m2[..., 0, 1]
    b21, b22 = m2[..., 1, 0], m2[..., 1, 1]
    a11, a12 = m1[..., 0, 0], m1[..., 0, 1]
    a21, a22 = m1[..., 1, 0], m1[..., 1, 1]
    out = np.empty(np.broadcast_shapes(m2.shape, m1.shape), dtype=m1.dtype)
    out[..., 0, 0] = b11 * a11 + b12 * a21
    out[..., 0, 1] = b11 * a12 + b12 * a22
    out[..., 1, 0] = b21 * a11 + b22 * a21
    out[..., 1, 1] = b21 * a12 + b22 * a22
    return out


def _matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Blockwise 2x2 matrix-vector product on (..., P, 2) states."""
    u = m[..., 0, 0] * v[..., 0] + m[..., 0, 1] * v[..., 1]
    w = m[..., 1, 0] * v[..., 0] + m[..., 1, 1] * v[..., 1]
    out = np.empty(np.broadcast_shapes(m.shape[:-2] + (2,), v.shape), dtype=v.dtype)
    out[..., 0] = u
    out[..., 1] = w
    return out


def _combine_arrays(m1, v1, m2, v2, counter: ScanCounter | None):
    """Combine element streams: apply elements-1 first, then elements-2.

    m*: (k, P, 2, 2); v*: (k, ..., P, 2) with optional batch axes between the
    sequence axis and the state axes.
    """
    if counter is not None:
        counter.combines += m1.shape[0]
        counter.block_ops += m1.shape[0] * m1.shape[-3]
    m = _matmat(m2, m1)
    extra = v1.ndim - m2.ndim + 1
    m2b = m2.reshape(m2.shape[:1] + (1,) * extra + m2.shape[1:]) if extra > 0 else m2
    v = _matvec(m2b, v1) + v2
    return m, v


def combine(a: ScanElement, b: ScanElement, counter: ScanCounter | None = None) -> ScanElement:
    """Associative composition of two scan elements (a applied first)."""
    if a.mat.shape[0] != b.mat.shape[0]:
        raise DimensionError(
            f"state sizes differ: {a.mat.shape[0]} vs {b.mat.shape[0]}")
    m, v = _combine_arrays(a.mat[None], a.vec[None], b.mat[None], b.vec[None], counter)
    return ScanElement(m[0], v[0])


def _inclusive_prefix(mats, vecs, counter):
    """Inclusive prefix combine along axis 0.  Work <= 2L - 2 combines."""
    L = mats.shape[0]
    if L == 1:
        return mats, vecs
    npairs = L // 2
    pm, pv = _combine_arrays(mats[0 : 2 * npairs : 2], vecs[0 : 2 * npairs : 2],
                             mats[1 : 2 * npairs : 2], vecs[1 : 2 * npairs : 2],
                             counter)
    sm, sv = _inclusive_prefix(pm, pv, counter)
    out_m = np.empty_like(mats)
    out_v = np.empty_like(vecs)
    out_m[0], out_v[0] = mats[0], vecs[0]
    out_m[1::2], out_v[1::2] = sm, sv
    n_even = (L + 1) // 2 - 1  # positions 2, 4, ...
    if n_even > 0:
        em, ev = _combine_arrays(sm[:n_even], sv[:n_even],
                                 mats[2::2], vecs[2::2], counter)
        out_m[2::2], out_v[2::2] = em, ev
    return out_m, out_v


def sequential_scan(blocks: np.ndarray, forcing: np.ndarray, s0: np.ndarray) -> np.ndarray:
    """Direct evaluation of s_n = M s_{n-1} + F_n.

    blocks: (P, 2, 2); forcing: (L, ..., P, 2); s0: (..., P, 2) broadcastable
    against one forcing step.  Returns states of the same shape as forcing.
    """
    m11, m12 = blocks[:, 0, 0], blocks[:, 0, 1]
    m21, m22 = blocks[:, 1, 0], blocks[:, 1, 1]
    out = np.empty_like(forcing)
    u = np.broadcast_to(s0[..., 0], forcing.shape[1:-1]).copy()
    v = np.broadcast_to(s0[..., 1], forcing.shape[1:-1]).copy()
    for n in range(forcing.shape[0]):
        u, v = (m11 * u + m12 * v + forcing[n, ..., 0],
                m21 * u + m22 * v + forcing[n, ..., 1])
        out[n, ..., 0] = u
        out[n, ..., 1] = v
    return out


def parallel_scan(blocks: np.ndarray, forcing: np.ndarray, s0: np.ndarray,
                  counter: ScanCounter | None = None) -> np.ndarray:
    """Prefix-scan evaluation of the same recurrence, O(log L) combine depth."""
    L = forcing.shape[0]
    mats = np.broadcast_to(blocks, (L,) + blocks.shape).copy()
    pm, pv = _inclusive_prefix(mats, forcing.copy(), counter)
    if np.any(s0):
        extra = forcing.ndim - pm.ndim + 1
        pmb = pm.reshape(pm.shape[:1] + (1,) * extra + pm.shape[1:]) if extra > 0 else pm
        return _matvec(pmb, s0) + pv
    return pv


def scan(rec: BlockDiagRecurrence, s0: np.ndarray, mode: str = "auto",
         sequential_threshold: int = DEFAULT_SEQUENTIAL_THRESHOLD,
         counter: ScanCounter | None = None) -> np.ndarray:
    """Evaluate a block-diagonal recurrence from an initial state.

    mode: "sequential", "parallel", or "auto" (sequential below the length
    threshold).  Both modes return the full state sequence, shape (L, P, 2);
    element n equals M^n s0 + sum_k M^(n-k) F_k.  The operation is pure and
    deterministic for a fixed mode.
    """
    s0 = np.asarray(s0, dtype=rec.forcing.dtype)
    if s0.shape[-2:] != (rec.state_size, 2):
        raise DimensionError(
            f"s0 must end in shape (P={rec.state_size}, 2), got {s0.shape}")
    if not np.all(np.isfinite(s0)):
        raise DimensionError("s0 must be finite")
    if mode == "auto":
        mode = "sequential" if rec.length < sequential_threshold else "parallel"
    if mode == "sequential":
        return sequential_scan(rec.blocks, rec.forcing, s0)
    if mode == "parallel":
        return parallel_scan(rec.blocks, rec.forcing, s0, counter)
    raise ValueError(f"unknown scan mode {mode!r}")


def adjoint_scan(blocks: np.ndarray, upstream: np.ndarray, mode: str = "auto",
                 sequential_threshold: int = DEFAULT_SEQUENTIAL_THRESHOLD) -> np.ndarray:
    """Solve the adjoint recurrence lam_n = M^T lam_{n+1} + g_n backwards in time.

    upstream: (L, ..., P, 2) per-step gradients g_n.  Returns lam with the
    same shape.  Reversing time turns this into the forward recurrence with
    transposed blocks, so it is evaluable by the same parallel scan.
    """
    bt = np.swapaxes(blocks, -1, -2)
    rev = upstream[::-1]
    zeros = np.zeros(upstream.shape[1:], dtype=upstream.dtype)
    if mode == "auto":
        mode = "sequential" if upstream.shape[0] < sequential_threshold else "parallel"
    if mode == "sequential":
        lam = sequential_scan(bt, rev, zeros)
    else:
        lam = parallel_scan(bt, np.ascontiguousarray(rev), zeros)
    return lam[::-1]
