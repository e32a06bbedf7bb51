"""Model assembly: encoder -> N spiking resonator blocks -> task decoder.

Every block maps binary input spikes x (width W) to binary output spikes of
width W + H by concatenation, so block n receives width n*H when the encoder
emits H features.  All inter-block traffic is binary; the real-valued
resonator states live only inside a block.

Block pipeline (widths in parentheses):

    drive = B x                    (P)   accumulate-only, x is binary
    v     = resonator(drive)       (P)   scan under the chosen scheme
    z     = step(v - theta_c)      (P)
    y     = C z + trunc(D * x)     (H)   spike mixing
    y     = drop(step(y - theta_d))(H)
    y     = batchnorm(linear(y))   (H)   skipped in ssm_only mode
    y     = drop(step(y - theta))  (H)   skipped in ssm_only mode
    out   = concat(x, y)           (W+H)

Trainable parameter count for n_blocks N, hidden H, state P, input width C:

    encoder              H*C + 4*H
    block n (W = n*H)    3*P + P*W + H*P + W + H   [+ H*H + 4*H unless ssm_only]
    classifier           (N+1)*H*K + K             (K classes)
    regressor            (N+1)*H*D + D + D*ksize   (D outputs)
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import ops
from .dynamics import Scheme
from .errors import DataError, DimensionError, ParameterError
from .layers import (BatchNorm, Context, DTYPE, Linear, Parameter, Resonator,
                     SpikeDropout, SpikeGate)
from .spiking import SurrogateConfig

ABLATABLE_COMPONENTS = ("theta_encoder", "omega", "B", "C", "D", "dt",
                        "theta_C", "theta_D")

HOMOGENEOUS_VALUES = {
    "theta_encoder": 1.0,
    "omega": 1.0,
    "B": 0.0,
    "C": 0.0,
    "D": 0.0,
    "dt": 1.0,
    "theta_C": 1.0,
    "theta_D": 1.0,
}


@dataclass(frozen=True)
class InitLaw:
    """An initialization law: uniform on (low, high], normal, fan-scaled
    uniform on (-fan^-1/2, fan^-1/2), or a constant."""

    kind: str
    a: float = 0.0
    b: float = 1.0

    @classmethod
    def uniform_open(cls, low=0.0, high=1.0):
        return cls("uniform_open", low, high)

    @classmethod
    def normal(cls, mean=0.0, std=1.0):
        return cls("normal", mean, std)

    @classmethod
    def constant(cls, value):
        return cls("constant", value)

    @classmethod
    def fan_scaled(cls):
        return cls("fan_scaled")

    def sample(self, rng: np.random.Generator, shape, fan_in: int | None = None):
        if self.kind == "uniform_open":
            # half-open on the left: values in (a, b]
            return self.b - (self.b - self.a) * rng.random(shape)
        if self.kind == "normal":
            return rng.normal(self.a, self.b, shape)
        if self.kind == "constant":
            return np.full(shape, self.a, dtype=DTYPE)
        if self.kind == "fan_scaled":
            if fan_in is None:
                raise ParameterError("fan_scaled law needs a fan-in")
            bound = fan_in ** -0.5
            return rng.uniform(-bound, bound, shape)
        raise ParameterError(f"unknown init law {self.kind!r}")


@dataclass(frozen=True)
class HeterogeneitySpec:
    """Per-component initialization laws, each overridable to a constant.

    Homogenizing a component replaces its law with the constant from the
    ablation table; the parameter remains trainable.  A component pinned to
    zero that sits behind another zeroed component (B and C together) never
    receives gradient and so stays dead.
    """

    theta_encoder: InitLaw = InitLaw.uniform_open()
    omega: InitLaw = InitLaw.uniform_open()
    dt: InitLaw = InitLaw.uniform_open()
    B: InitLaw = InitLaw.fan_scaled()
    C: InitLaw = InitLaw.fan_scaled()
    D: InitLaw = InitLaw.normal()
    theta_C: InitLaw = InitLaw.uniform_open()
    theta_D: InitLaw = InitLaw.uniform_open()
    theta_out: InitLaw = InitLaw.uniform_open()

    def homogenized(self, components) -> "HeterogeneitySpec":
        """Pin the named components to their homogeneous constants."""
        updates = {}
        for name in components:
            if name not in ABLATABLE_COMPONENTS:
                raise ParameterError(
                    f"unknown component {name!r}; choose from {ABLATABLE_COMPONENTS}")
            updates[name] = InitLaw.constant(HOMOGENEOUS_VALUES[name])
        return replace(self, **updates)


@dataclass
class ModelConfig:
    """Architecture and task description for one model."""

    n_blocks: int = 2
    hidden: int = 16
    state: int = 16
    scheme: Scheme = Scheme.IMEX
    task: str = "classification"
    num_classes: int = 2
    out_dim: int = 1
    kernel_size: int = 64
    dropout: float = 0.0
    ssm_only: bool = False
    scan_mode: str = "auto"
    heterogeneity: HeterogeneitySpec = field(default_factory=HeterogeneitySpec)
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)

    def __post_init__(self):
        if isinstance(self.scheme, str):
            self.scheme = Scheme.from_string(self.scheme)
        if self.n_blocks < 1:
            raise ParameterError("n_blocks must be >= 1")
        if self.hidden < 1 or self.state < 1:
            raise ParameterError("hidden and state must be >= 1")
        if self.task not in ("classification", "regression"):
            raise ParameterError(f"unknown task {self.task!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError("dropout must lie in [0, 1)")
        k = self.kernel_size
        if k < 1 or (k & (k - 1)) != 0:
            raise ParameterError("kernel_size must be a power of two")


class Encoder:
    """Per-timestep linear map, batch norm, and a stateless IF threshold."""

    def __init__(self, in_channels: int, hidden: int, het: HeterogeneitySpec,
                 surrogate: SurrogateConfig, rng: np.random.Generator):
        self.linear = Linear("encoder.linear", in_channels, hidden, rng)
        self.bn = BatchNorm("encoder.bn", hidden)
        self.gate = SpikeGate("encoder", het.theta_encoder.sample(rng, hidden), surrogate)

    def parameters(self):
        return self.linear.parameters() + self.bn.parameters() + self.gate.parameters()

    def buffers(self):
        return self.bn.buffers()

    def forward(self, x, ctx):
        return self.gate.forward(self.bn.forward(self.linear.forward(x, ctx), ctx), ctx)

    def backward(self, gout):
        return self.linear.backward(self.bn.backward(self.gate.backward(gout)))


class Block:
    """One spiking resonator block; input width grows by ``hidden`` per block."""

    def __init__(self, index: int, in_width: int, hidden: int, state: int,
                 scheme: Scheme, dropout: float, ssm_only: bool,
                 het: HeterogeneitySpec, surrogate: SurrogateConfig,
                 scan_mode: str, rng: np.random.Generator):
        name = f"block{index}"
        self.in_width = in_width
        self.hidden = hidden
        self.resonator = Resonator(
            name,
            het.omega.sample(rng, state), het.dt.sample(rng, state), scheme,
            scan_mode=scan_mode)
        self.B = Parameter(f"{name}.B", het.B.sample(rng, (state, in_width), in_width))
        self.C = Parameter(f"{name}.C", het.C.sample(rng, (hidden, state), state))
        self.D = Parameter(f"{name}.D", het.D.sample(rng, in_width))
        self.gate_c = SpikeGate(f"{name}.c", het.theta_C.sample(rng, state), surrogate)
        self.gate_d = SpikeGate(f"{name}.d", het.theta_D.sample(rng, hidden), surrogate)
        self.drop_d = SpikeDropout(dropout)
        self.ssm_only = ssm_only
        if not ssm_only:
            self.linear = Linear(f"{name}.linear", hidden, hidden, rng, spike_input=True)
            self.bn = BatchNorm(f"{name}.bn", hidden)
            self.gate_out = SpikeGate(f"{name}.out", het.theta_out.sample(rng, hidden),
                                      surrogate)
            self.drop_out = SpikeDropout(dropout)
        self._cache = None

    def parameters(self):
        params = (self.resonator.parameters() + [self.B, self.C, self.D]
                  + self.gate_c.parameters() + self.gate_d.parameters())
        if not self.ssm_only:
            params += (self.linear.parameters() + self.bn.parameters()
                       + self.gate_out.parameters())
        return params

    def buffers(self):
        return [] if self.ssm_only else self.bn.buffers()

    def forward(self, x, ctx):
        if x.shape[-1] != self.in_width:
            raise DimensionError(
                f"block expects input width {self.in_width}, got {x.shape[-1]}")
        if ctx.smooth:
            drive = ops.dense_matmul(self.B.value, x)
            mixed = self.D.value * x
        else:
            drive = ops.spike_matmul(self.B.value, x)
            mixed = ops.spike_gate(self.D.value, x)
        v = self.resonator.forward(drive, ctx)
        z = self.gate_c.forward(v, ctx)
        if ctx.smooth:
            cz = ops.dense_matmul(self.C.value, z)
        else:
            cz = ops.spike_matmul(self.C.value, z)
        y = cz + mixed[..., : self.hidden]
        y = self.drop_d.forward(self.gate_d.forward(y, ctx), ctx)
        if not self.ssm_only:
            y = self.bn.forward(self.linear.forward(y, ctx), ctx)
            y = self.drop_out.forward(self.gate_out.forward(y, ctx), ctx)
        self._cache = (x, z)
        return np.concatenate([x, y], axis=-1)

    def backward(self, gout):
        x, z = self._cache
        gx = gout[..., : self.in_width].copy()
        gy = gout[..., self.in_width :]
        if not self.ssm_only:
            gy = self.gate_out.backward(self.drop_out.backward(gy))
            gy = self.linear.backward(self.bn.backward(gy))
        gy = self.gate_d.backward(self.drop_d.backward(gy))

        # mixing: y = C z + (D * x)[:hidden]
        batch_axes = tuple(range(gy.ndim - 1))
        if self.C.trainable:
            self.C.grad += np.tensordot(gy, z, axes=(batch_axes, batch_axes))
        gz = gy @ self.C.value
        gmix = np.zeros_like(x)
        gmix[..., : self.hidden] = gy
        if self.D.trainable:
            self.D.grad += (gmix * x).sum(axis=batch_axes)
        gx += gmix * self.D.value

        gv = self.gate_c.backward(gz)
        gdrive = self.resonator.backward(gv)
        if self.B.trainable:
            self.B.grad += np.tensordot(gdrive, x, axes=(batch_axes, batch_axes))
        gx += gdrive @ self.B.value
        return gx


class ClassifierDecoder:
    """Mean-pool spikes over time, then a linear map to class logits."""

    def __init__(self, in_width: int, num_classes: int, rng: np.random.Generator):
        self.linear = Linear("decoder.linear", in_width, num_classes, rng)
        self._steps = None

    def parameters(self):
        return self.linear.parameters()

    def buffers(self):
        return []

    def forward(self, spikes, ctx):
        self._steps = spikes.shape[1]
        pooled = spikes.mean(axis=1)  # rates are real-valued
        return self.linear.forward(pooled, ctx)

    def backward(self, glogits):
        gpooled = self.linear.backward(glogits)
        g = np.repeat(gpooled[:, None, :], self._steps, axis=1) / self._steps
        return g


class RegressionDecoder:
    """Project spikes per step, then convolve causally with a learnable kernel.

    The kernel starts as a normalized exponential decay (a leaky-integrator
    impulse response), k_i = a^i / sum_j a^j with a = 0.9, so at init the
    decoder smooths rates without changing their scale.
    """

    DECAY = 0.9

    def __init__(self, in_width: int, out_dim: int, kernel_size: int,
                 rng: np.random.Generator):
        self.linear = Linear("decoder.linear", in_width, out_dim, rng, spike_input=True)
        taps = self.DECAY ** np.arange(kernel_size)
        taps = taps / taps.sum()
        self.kernel = Parameter("decoder.kernel",
                                np.tile(taps, (out_dim, 1)), kind="kernel")
        self._proj = None

    def parameters(self):
        return [self.linear.weight, self.linear.bias, self.kernel]

    def buffers(self):
        return []

    def forward(self, spikes, ctx):
        ksize = self.kernel.value.shape[1]
        if ksize > spikes.shape[1]:
            raise ParameterError(
                f"kernel size {ksize} exceeds sequence length {spikes.shape[1]}")
        proj = self.linear.forward(spikes, ctx)  # (B, L, out)
        self._proj = proj
        out = np.zeros_like(proj)
        for i in range(ksize):
            if i == 0:
                out += self.kernel.value[:, 0] * proj
            else:
                out[:, i:, :] += self.kernel.value[:, i] * proj[:, :-i, :]
        return out

    def backward(self, gout):
        proj = self._proj
        ksize = self.kernel.value.shape[1]
        gproj = np.zeros_like(proj)
        for i in range(ksize):
            if i == 0:
                self.kernel.grad[:, 0] += (gout * proj).sum(axis=(0, 1))
                gproj += self.kernel.value[:, 0] * gout
            else:
                self.kernel.grad[:, i] += (gout[:, i:, :] * proj[:, :-i, :]).sum(axis=(0, 1))
                gproj[:, :-i, :] += self.kernel.value[:, i] * gout[:, i:, :]
        return self.linear.backward(gproj)


class ModelGraph:
    """The assembled model with a registry of named trainable parameters."""

    def __init__(self, config: ModelConfig, in_channels: int, seed: int = 0):
        self.config = config
        self.in_channels = in_channels
        self.seed = seed
        rng = np.random.default_rng(seed)
        het = config.heterogeneity
        self.encoder = Encoder(in_channels, config.hidden, het, config.surrogate, rng)
        self.blocks = []
        width = config.hidden
        for i in range(config.n_blocks):
            self.blocks.append(Block(
                i, width, config.hidden, config.state, config.scheme,
                config.dropout, config.ssm_only, het, config.surrogate,
                config.scan_mode, rng))
            width += config.hidden
        if config.task == "classification":
            self.decoder = ClassifierDecoder(width, config.num_classes, rng)
        else:
            self.decoder = RegressionDecoder(width, config.out_dim,
                                             config.kernel_size, rng)
        self.block_input_rates: list[Fraction] = []

    # -- parameter registry -------------------------------------------------

    def parameters(self) -> list[Parameter]:
        params = self.encoder.parameters()
        for block in self.blocks:
            params += block.parameters()
        params += self.decoder.parameters()
        return params

    def trainable_parameters(self) -> list[Parameter]:
        return [p for p in self.parameters() if p.trainable]

    def named_arrays(self):
        """All state needed to restore the model: parameters plus buffers."""
        arrays = [(p.name, p.value) for p in self.parameters()]
        arrays += self.encoder.buffers()
        for block in self.blocks:
            arrays += block.buffers()
        arrays += self.decoder.buffers()
        return arrays

    def load_arrays(self, named):
        lookup = dict(self.named_arrays())
        for name, value in named.items():
            if name not in lookup:
                raise ParameterError(f"checkpoint has unknown tensor {name!r}")
            if lookup[name].shape != value.shape:
                raise DimensionError(
                    f"{name}: checkpoint shape {value.shape} != model {lookup[name].shape}")
            lookup[name][...] = value

    def num_parameters(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    # -- execution ------------------------------------------------------------

    def forward(self, x: np.ndarray, ctx: Context | None = None) -> np.ndarray:
        ctx = ctx or Context()
        x = np.asarray(x, dtype=DTYPE)
        if x.ndim != 3 or x.shape[-1] != self.in_channels:
            raise DimensionError(
                f"expected input of shape (batch, time, {self.in_channels}), "
                f"got {x.shape}")
        if np.isnan(x).any():
            raise DataError("input contains NaN")
        h = self.encoder.forward(x, ctx)
        self.block_input_rates = []
        for block in self.blocks:
            if not ctx.smooth and not ops.is_binary(h):
                raise AssertionError("non-binary tensor at a block boundary")
            self.block_input_rates.append(
                Fraction(int(np.count_nonzero(h)), h.size))
            h = block.forward(h, ctx)
        if not ctx.smooth and not ops.is_binary(h):
            raise AssertionError("non-binary tensor at the decoder boundary")
        return self.decoder.forward(h, ctx)

    def backward(self, gout: np.ndarray):
        g = self.decoder.backward(np.asarray(gout, dtype=DTYPE))
        for block in reversed(self.blocks):
            g = block.backward(g)
        return self.encoder.backward(g)


def build_model(config: ModelConfig, in_channels: int, seed: int = 0) -> ModelGraph:
    return ModelGraph(config, in_channels, seed)
