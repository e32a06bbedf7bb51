"""Spike nonlinearities and their surrogate gradients.

The forward nonlinearity is the hard step z = 1[v >= theta] with no membrane
reset, so it acts pointwise across time.  For training, the step's gradient
is replaced by a double-Gaussian surrogate kernel

    g(x) = (1 + h) N(x; 0, sigma^2) - 2 h N(x; 0, (6 sigma)^2)

a narrow positive bump with shallow negative side lobes; its integral is
1 - h.  Thresholds receive the negated kernel summed over time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DimensionError, ParameterError


@dataclass
class SurrogateConfig:
    """Shape of the double-Gaussian surrogate kernel."""

    sigma: float = 0.5   # width of the primary Gaussian
    h: float = 0.15      # side-lobe weight
    scale: float = 1.0   # overall gradient gain

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError("sigma must be positive")
        if not 0.0 <= self.h < 1.0:
            raise ParameterError("h must lie in [0, 1)")


@dataclass
class ThresholdParams:
    """Firing thresholds, one per feature."""

    theta: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=np.float64))
        if not np.all(np.isfinite(self.theta)):
            raise ParameterError("thresholds must be finite")


class SpikeTensor:
    """A binary activation tensor whose last two axes are (time, feature).

    Wraps the raw array and keeps exact spike counts so the firing rate is
    available as an exact rational.
    """

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if not np.all((values == 0.0) | (values == 1.0)):
            raise DimensionError("spike tensor entries must be exactly 0 or 1")
        self.values = values

    @property
    def spike_count(self) -> int:
        return int(np.count_nonzero(self.values))

    @property
    def firing_rate_exact(self) -> Fraction:
        return Fraction(self.spike_count, self.values.size)

    @property
    def firing_rate(self) -> float:
        return float(self.firing_rate_exact)

    @property
    def shape(self):
        return self.values.shape


def _check_threshold_shape(v: np.ndarray, theta: np.ndarray):
    if theta.shape[0] != v.shape[-1]:
        raise DimensionError(
            f"threshold length {theta.shape[0]} does not match "
            f"feature width {v.shape[-1]}")


def spike_forward(v: np.ndarray, theta: ThresholdParams) -> SpikeTensor:
    """Threshold a membrane tensor: 1 where v >= theta, else 0.

    The boundary v == theta fires.  No state is reset.
    """
    v = np.asarray(v, dtype=np.float64)
    _check_threshold_shape(v, theta.theta)
    return SpikeTensor((v >= theta.theta).astype(np.float64))


def if_neuron(pre_activation: np.ndarray, theta: ThresholdParams) -> SpikeTensor:
    """Stateless integrate-and-fire: identical to spike_forward per step."""
    return spike_forward(pre_activation, theta)


def surrogate_kernel(x: np.ndarray, cfg: SurrogateConfig | None = None) -> np.ndarray:
    """Double-Gaussian surrogate g(x); integrates to 1 - h."""
    cfg = cfg or SurrogateConfig()
    s1 = cfg.sigma
    s2 = 6.0 * cfg.sigma
    x = np.asarray(x, dtype=np.float64)
    n1 = np.exp(-0.5 * (x / s1) ** 2) / (s1 * math.sqrt(2.0 * math.pi))
    n2 = np.exp(-0.5 * (x / s2) ** 2) / (s2 * math.sqrt(2.0 * math.pi))
    return (1.0 + cfg.h) * n1 - 2.0 * cfg.h * n2


def smoothed_step(x: np.ndarray, cfg: SurrogateConfig | None = None) -> np.ndarray:
    """Antiderivative of the surrogate kernel (the smoothed step function)."""
    cfg = cfg or SurrogateConfig()
    x = np.asarray(x, dtype=np.float64)
    phi = np.vectorize(math.erf)
    c1 = 0.5 * (1.0 + phi(x / (cfg.sigma * math.sqrt(2.0))))
    c2 = 0.5 * (1.0 + phi(x / (6.0 * cfg.sigma * math.sqrt(2.0))))
    return (1.0 + cfg.h) * c1 - 2.0 * cfg.h * c2


def spike_backward(v: np.ndarray, theta: ThresholdParams, upstream: np.ndarray,
                   cfg: SurrogateConfig | None = None):
    """Surrogate gradients of the spike nonlinearity.

    Returns (grad_v, grad_theta): grad_v = upstream * scale * g(v - theta),
    grad_theta the negated kernel-weighted upstream summed over every axis
    except the feature axis.
    """
    cfg = cfg or SurrogateConfig()
    v = np.asarray(v, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    _check_threshold_shape(v, theta.theta)
    if upstream.shape != v.shape:
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match input {v.shape}")
    g = cfg.scale * surrogate_kernel(v - theta.theta, cfg)
    grad_v = upstream * g
    grad_theta = -np.sum(upstream * g, axis=tuple(range(v.ndim - 1)))
    return grad_v, grad_theta
