"""Differentiable building blocks with explicit forward/backward passes.

Each layer caches what its backward pass needs on the instance, so a graph
is used single-threaded in the usual forward-then-backward rhythm.  Batched
activations carry shape (batch, time, feature); the resonator core works
time-major internally.

The ``smooth`` context flag replaces every spike threshold by the shifted
identity (v - theta) so the whole network becomes a smooth map; this is the
configuration under which analytic gradients are checked against finite
differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .dynamics import Scheme, forcing_coefficients, transition_blocks
from .errors import DimensionError
from .scan import adjoint_scan, parallel_scan, sequential_scan
from .spiking import SurrogateConfig, surrogate_kernel

DTYPE = np.float64


class Parameter:
    """A named trainable tensor with an accumulated gradient.

    ``kind`` tags the parameter for optimizer-side projection rules
    (e.g. "omega" and "dt" are clamped back to their stability ranges,
    "threshold" is kept away from zero).
    """

    __slots__ = ("name", "value", "grad", "trainable", "kind")

    def __init__(self, name: str, value, trainable: bool = True, kind: str = "weight"):
        self.name = name
        self.value = np.asarray(value, dtype=DTYPE)
        self.grad = np.zeros_like(self.value)
        self.trainable = trainable
        self.kind = kind

    def zero_grad(self):
        self.grad[...] = 0.0


@dataclass
class Context:
    """Per-forward-pass switches shared by all layers."""

    training: bool = False
    smooth: bool = False
    rng: np.random.Generator | None = None


def _batch_axes(x: np.ndarray) -> tuple:
    return tuple(range(x.ndim - 1))


class Linear:
    """Affine map on the feature axis: x @ W.T + b."""

    def __init__(self, name: str, in_features: int, out_features: int,
                 rng: np.random.Generator, spike_input: bool = False):
        bound = 1.0 / np.sqrt(in_features)
        self.weight = Parameter(f"{name}.weight",
                                rng.uniform(-bound, bound, (out_features, in_features)))
        self.bias = Parameter(f"{name}.bias", np.zeros(out_features), kind="bias")
        self.spike_input = spike_input
        self._x = None

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, ctx: Context) -> np.ndarray:
        self._x = x
        if self.spike_input and not ctx.smooth:
            out = ops.spike_matmul(self.weight.value, x)
        else:
            out = ops.dense_matmul(self.weight.value, x)
        return out + self.bias.value

    def backward(self, gout: np.ndarray) -> np.ndarray:
        x = self._x
        self.weight.grad += np.tensordot(gout, x, axes=(_batch_axes(gout), _batch_axes(x)))
        self.bias.grad += gout.sum(axis=_batch_axes(gout))
        return gout @ self.weight.value


class BatchNorm:
    """Feature-wise normalization over (batch x time) with running statistics."""

    def __init__(self, name: str, num_features: int, momentum: float = 0.1,
                 eps: float = 1e-5):
        self.gamma = Parameter(f"{name}.gamma", np.ones(num_features), kind="bn")
        self.beta = Parameter(f"{name}.beta", np.zeros(num_features), kind="bn")
        self.running_mean = np.zeros(num_features, dtype=DTYPE)
        self.running_var = np.ones(num_features, dtype=DTYPE)
        self.momentum = momentum
        self.eps = eps
        self.name = name
        self._cache = None

    def parameters(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return [(f"{self.name}.running_mean", self.running_mean),
                (f"{self.name}.running_var", self.running_var)]

    def forward(self, x: np.ndarray, ctx: Context) -> np.ndarray:
        axes = _batch_axes(x)
        if ctx.training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (var - self.running_var)
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, ctx.training, x.size // x.shape[-1])
        return self.gamma.value * xhat + self.beta.value

    def backward(self, gout: np.ndarray) -> np.ndarray:
        xhat, inv_std, was_training, m = self._cache
        axes = _batch_axes(gout)
        self.gamma.grad += (gout * xhat).sum(axis=axes)
        self.beta.grad += gout.sum(axis=axes)
        gxhat = gout * self.gamma.value
        if not was_training:
            return gxhat * inv_std
        return (inv_std / m) * (m * gxhat - gxhat.sum(axis=axes)
                                - xhat * (gxhat * xhat).sum(axis=axes))


class SpikeGate:
    """Threshold nonlinearity with a learnable theta and surrogate backward."""

    def __init__(self, name: str, theta_init: np.ndarray, surrogate: SurrogateConfig,
                 trainable: bool = True):
        self.theta = Parameter(f"{name}.theta", theta_init, trainable=trainable,
                               kind="threshold")
        self.surrogate = surrogate
        self._cache = None

    def parameters(self):
        return [self.theta]

    def forward(self, v: np.ndarray, ctx: Context) -> np.ndarray:
        if v.shape[-1] != self.theta.value.shape[0]:
            raise DimensionError(
                f"{self.theta.name}: feature width {v.shape[-1]} does not match "
                f"threshold length {self.theta.value.shape[0]}")
        shifted = v - self.theta.value
        self._cache = (shifted, ctx.smooth)
        if ctx.smooth:
            return shifted
        return (shifted >= 0.0).astype(DTYPE)

    def backward(self, gout: np.ndarray) -> np.ndarray:
        shifted, smooth = self._cache
        if smooth:
            g = gout
        else:
            g = gout * self.surrogate.scale * surrogate_kernel(shifted, self.surrogate)
        self.theta.grad += -g.sum(axis=_batch_axes(g))
        return g


class SpikeDropout:
    """Zero spikes with probability p, independent per entry, no rescaling.

    Skipping the usual 1/(1-p) rescale keeps activations binary; batch norm
    downstream absorbs the rate shift.
    """

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise DimensionError("dropout probability must lie in [0, 1)")
        self.p = p
        self._mask = None

    def parameters(self):
        return []

    def forward(self, x: np.ndarray, ctx: Context) -> np.ndarray:
        if not ctx.training or self.p == 0.0:
            self._mask = None
            return x
        if ctx.rng is None:
            raise DimensionError("dropout in training mode needs a generator")
        self._mask = (ctx.rng.random(x.shape) >= self.p).astype(DTYPE)
        return x * self._mask

    def backward(self, gout: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return gout
        return gout * self._mask


class Resonator:
    """Bank of driven resonator pairs evaluated by scan; exposes the v states.

    Forward maps a drive (batch, time, P) to v (batch, time, P).  Backward
    solves the adjoint recurrence (transposed blocks, reversed time) and
    chains into omega, dt, and the drive.
    """

    def __init__(self, name: str, omega_init: np.ndarray, dt_init: np.ndarray,
                 scheme: Scheme, scan_mode: str = "auto",
                 trainable_omega: bool = True, trainable_dt: bool = True):
        self.omega = Parameter(f"{name}.omega", omega_init, trainable=trainable_omega,
                               kind="omega")
        self.dt = Parameter(f"{name}.dt", dt_init, trainable=trainable_dt, kind="dt")
        self.scheme = scheme
        self.scan_mode = scan_mode
        self._cache = None

    def parameters(self):
        return [self.omega, self.dt]

    def _scan(self, blocks, forcing):
        L = forcing.shape[0]
        mode = self.scan_mode
        if mode == "auto":
            mode = "sequential" if L < 1024 else "parallel"
        s0 = np.zeros(forcing.shape[1:], dtype=DTYPE)
        if mode == "sequential":
            return sequential_scan(blocks, forcing, s0)
        return parallel_scan(blocks, forcing, s0)

    def forward(self, drive: np.ndarray, ctx: Context) -> np.ndarray:
        om, dt = self.omega.value, self.dt.value
        blocks = transition_blocks(om, dt, self.scheme)
        c_u, c_v = forcing_coefficients(om, dt, self.scheme)
        d_t = np.ascontiguousarray(np.swapaxes(drive, 0, 1))  # (L, B, P)
        forcing = np.stack([c_u * d_t, c_v * d_t], axis=-1)
        states = self._scan(blocks, forcing)  # (L, B, P, 2)
        self._cache = (d_t, blocks, states)
        return np.swapaxes(states[..., 1], 0, 1)  # v, (B, L, P)

    def backward(self, gv: np.ndarray) -> np.ndarray:
        d_t, blocks, states = self._cache
        om, dt = self.omega.value, self.dt.value
        c_u, c_v = forcing_coefficients(om, dt, self.scheme)

        delta = np.zeros_like(states)
        delta[..., 1] = np.swapaxes(gv, 0, 1)
        lam = adjoint_scan(blocks, delta, mode=self.scan_mode)

        # drive and forcing-coefficient gradients
        lam_u, lam_v = lam[..., 0], lam[..., 1]
        gdrive = c_u * lam_u + c_v * lam_v
        reduce_axes = tuple(range(lam_u.ndim - 1))
        g_cu = (lam_u * d_t).sum(axis=reduce_axes)
        g_cv = (lam_v * d_t).sum(axis=reduce_axes)

        # transition-block gradient: sum of lam_n (outer) s_{n-1}
        s_prev = np.concatenate([np.zeros_like(states[:1]), states[:-1]], axis=0)
        flat_l = lam.reshape(-1, lam.shape[-2], 2)
        flat_s = s_prev.reshape(-1, lam.shape[-2], 2)
        g_m = np.einsum("kpi,kpj->pij", flat_l, flat_s)

        g_om, g_dt = self._chain_scheme_partials(g_m, g_cu, g_cv)
        if self.omega.trainable:
            self.omega.grad += g_om
        if self.dt.trainable:
            self.dt.grad += g_dt
        return np.swapaxes(gdrive, 0, 1)

    def _chain_scheme_partials(self, g_m, g_cu, g_cv):
        """Chain block/forcing gradients into omega and dt."""
        om, dt = self.omega.value, self.dt.value
        zeros = np.zeros_like(om)
        if self.scheme is Scheme.IM:
            s = 1.0 / (1.0 + dt * dt * om)
            ds_dom = -(dt ** 2) * s ** 2
            ds_ddt = -2.0 * dt * om * s ** 2
            dm_dom = {
                (0, 0): ds_dom,
                (0, 1): -dt * (s + om * ds_dom),
                (1, 0): dt * ds_dom,
                (1, 1): -(dt ** 2) * (s + om * ds_dom),
            }
            dm_ddt = {
                (0, 0): ds_ddt,
                (0, 1): -om * (s + dt * ds_ddt),
                (1, 0): s + dt * ds_ddt,
                (1, 1): -om * (2.0 * dt * s + dt ** 2 * ds_ddt),
            }
            dcu_dom, dcu_ddt = dt * ds_dom, s + dt * ds_ddt
            dcv_dom, dcv_ddt = dt ** 2 * ds_dom, 2.0 * dt * s + dt ** 2 * ds_ddt
        elif self.scheme is Scheme.IMEX:
            dm_dom = {(0, 0): zeros, (0, 1): -dt, (1, 0): zeros, (1, 1): -(dt ** 2)}
            dm_ddt = {(0, 0): zeros, (0, 1): -om, (1, 0): np.ones_like(om),
                      (1, 1): -2.0 * dt * om}
            dcu_dom, dcu_ddt = zeros, np.ones_like(om)
            dcv_dom, dcv_ddt = zeros, 2.0 * dt
        else:  # explicit Euler
            dm_dom = {(0, 0): zeros, (0, 1): -dt, (1, 0): zeros, (1, 1): zeros}
            dm_ddt = {(0, 0): zeros, (0, 1): -om, (1, 0): np.ones_like(om),
                      (1, 1): zeros}
            dcu_dom, dcu_ddt = zeros, np.ones_like(om)
            dcv_dom, dcv_ddt = zeros, zeros

        g_om = g_cu * dcu_dom + g_cv * dcv_dom
        g_dt = g_cu * dcu_ddt + g_cv * dcv_ddt
        for (i, j), partial in dm_dom.items():
            g_om = g_om + g_m[:, i, j] * partial
        for (i, j), partial in dm_ddt.items():
            g_dt = g_dt + g_m[:, i, j] * partial
        return g_om, g_dt
