"""Operation counts and energy estimates for ANN vs spiking blocks.

Counts follow the standard 45nm figures: a multiply-accumulate costs
4.6 pJ, a plain accumulate 0.9 pJ.  A layer whose input is a spike train
performs SOPs(n) = f_r * FLOPs(n) accumulate-only operations, where f_r is
the input firing rate; everything real-valued stays at MAC cost.

Block inventories at sequence length L, hidden width H, state size P:

    both kinds    B: L*P*H, C: L*P*H, D: L*H, scan: P*ceil(log2 L)
    ann (glu)     gelu: 14*L*H, glu: 2*L*H^2
    spiking       linear: L*H^2, batchnorm: 2*L*H  (folded at inference)

The scan operates on real-valued states in both models, so it is charged at
MAC cost on both sides.  ``share_ssm_only`` is the spiking block variant
without the dense linear stage; the published efficiency sweep brackets
correspond to that variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .layers import Context
from .network import ModelGraph

E_MAC_PJ = 4.6
E_AC_PJ = 0.9
GELU_FLOPS_PER_ELEM = 14
GLU_MULTIPLIER = 2

BLOCK_KINDS = ("linoss", "share", "share_ssm_only")

# layers whose input is a spike train in the spiking block
SPIKE_DRIVEN = ("B", "C", "D", "linear")


@dataclass(frozen=True)
class EnergyModel:
    e_mac: float = E_MAC_PJ
    e_ac: float = E_AC_PJ
    gelu_flops_per_elem: int = GELU_FLOPS_PER_ELEM
    glu_multiplier: int = GLU_MULTIPLIER


@dataclass
class LayerEnergy:
    name: str
    flops: int
    sops: float
    pj: float


@dataclass
class EnergyReport:
    """Per-layer tally for one block kind plus the ANN/SNN comparison."""

    kind: str
    seq_len: int
    hidden: int
    state: int
    firing_rate: float
    layers: list = field(default_factory=list)
    total_flops: int = 0
    total_pj: float = 0.0
    ann_pj: float = 0.0
    snn_pj: float = 0.0
    ratio: float = 0.0


def count_block_flops(kind: str, seq_len: int, hidden: int, state: int) -> dict:
    """FLOP (MAC) inventory per layer of one block, as exact integers."""
    if kind not in BLOCK_KINDS:
        raise ParameterError(f"unknown block kind {kind!r}; choose from {BLOCK_KINDS}")
    if seq_len < 1 or hidden < 1 or state < 1:
        raise ParameterError("seq_len, hidden, state must all be >= 1")
    table = {
        "B": seq_len * state * hidden,
        "C": seq_len * state * hidden,
        "D": seq_len * hidden,
        "scan": state * math.ceil(math.log2(seq_len)) if seq_len > 1 else state,
    }
    if kind == "linoss":
        table["gelu"] = GELU_FLOPS_PER_ELEM * seq_len * hidden
        table["glu"] = GLU_MULTIPLIER * seq_len * hidden * hidden
    elif kind == "share":
        table["linear"] = seq_len * hidden * hidden
        table["batchnorm"] = 2 * seq_len * hidden
    return table


def estimate(kind: str, seq_len: int, hidden: int, state: int, firing_rate: float,
             verbose_bn: bool = False) -> EnergyReport:
    """Energy for one block of the given kind, plus the ANN/SNN ratio.

    ANN blocks pay MAC price on every FLOP.  Spiking blocks pay the AC price
    on f_r * FLOPs for the spike-driven layers and MAC price on the scan,
    which updates real-valued states.  Batch norm is folded into the linear
    layer at inference unless ``verbose_bn``.
    """
    if not 0.0 <= firing_rate <= 1.0:
        raise ParameterError("firing_rate must lie in [0, 1]")
    report = EnergyReport(kind=kind, seq_len=seq_len, hidden=hidden, state=state,
                          firing_rate=firing_rate)
    table = count_block_flops(kind, seq_len, hidden, state)
    spiking = kind != "linoss"
    for name, flops in table.items():
        if name == "batchnorm" and spiking and not verbose_bn:
            sops, pj = 0.0, 0.0  # folded into the linear weights
        elif spiking and name in SPIKE_DRIVEN:
            sops = firing_rate * flops
            pj = E_AC_PJ * sops
        else:
            sops = 0.0
            pj = E_MAC_PJ * flops
        report.layers.append(LayerEnergy(name=name, flops=flops, sops=sops, pj=pj))
    report.total_flops = sum(entry.flops for entry in report.layers)
    report.total_pj = sum(entry.pj for entry in report.layers)

    counterpart = "linoss" if spiking else "share"
    other = _total_pj(counterpart, seq_len, hidden, state, firing_rate, verbose_bn)
    if spiking:
        report.snn_pj, report.ann_pj = report.total_pj, other
    else:
        report.ann_pj, report.snn_pj = report.total_pj, other
    report.ratio = report.ann_pj / report.snn_pj if report.snn_pj > 0 else float("inf")
    return report


def _total_pj(kind, seq_len, hidden, state, firing_rate, verbose_bn=False) -> float:
    table = count_block_flops(kind, seq_len, hidden, state)
    total = 0.0
    spiking = kind != "linoss"
    for name, flops in table.items():
        if name == "batchnorm" and spiking and not verbose_bn:
            continue
        if spiking and name in SPIKE_DRIVEN:
            total += E_AC_PJ * firing_rate * flops
        else:
            total += E_MAC_PJ * flops
    return total


def ratio_sweep(seq_len: int, hidden: int, firing_rate: float,
                p_over_h: list, snn_kind: str = "share_ssm_only"):
    """ANN/SNN energy ratio as the state-to-hidden ratio varies.

    Returns rows (p_over_h, state, ann_pj, snn_pj, ratio).  The spiking side
    defaults to the scan-pathway block (no dense linear stage), the variant
    whose sweep brackets the published efficiency range.
    """
    rows = []
    for r in p_over_h:
        state = max(1, int(round(r * hidden)))
        ann = _total_pj("linoss", seq_len, hidden, state, firing_rate)
        snn = _total_pj(snn_kind, seq_len, hidden, state, firing_rate)
        rows.append((r, state, ann, snn, ann / snn))
    return rows


def measure_firing_rates(graph: ModelGraph, x: np.ndarray) -> list:
    """Exact per-block input firing rates for a forward pass over ``x``."""
    graph.forward(np.asarray(x, dtype=np.float64), Context(training=False))
    return [float(rate) for rate in graph.block_input_rates]
