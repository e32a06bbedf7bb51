"""Discrete-time dynamics of driven harmonic resonator state pairs.

Each state pair (u_j, v_j) follows the continuous system

    u' = -omega_j v - 2 b_j u + x(t)
    v' = u

discretized by one of three schemes.  The implicit scheme (IM) damps the
dynamics through the diagonal factor S = 1/(1 + dt^2 omega) and keeps every
eigenvalue inside the unit circle.  The implicit-explicit scheme (IMEX)
places the eigenvalues exactly on the unit circle whenever dt^2 omega <= 4
and conserves a discrete quadratic energy.  The fully explicit scheme is
included because it is the textbook default and demonstrably diverges.

``omega`` throughout is the squared angular frequency of the resonator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, PreconditionError
from .scan import BlockDiagRecurrence, scan

__all__ = [
    "Scheme", "OscillatorParams", "transition_blocks", "forcing_coefficients",
    "build_recurrence", "eigenvalues_closed_form", "eigenvalue_moment",
    "simulate_neuron", "discrete_energy", "NeuronTrace", "spectral_sweep",
]


class Scheme(enum.Enum):
    EXPLICIT_EULER = "euler"
    IM = "im"
    IMEX = "imex"

    @classmethod
    def from_string(cls, name: str) -> "Scheme":
        for member in cls:
            if member.value == name.lower():
                return member
        raise ParameterError(f"unknown scheme {name!r}; choose from "
                             f"{[m.value for m in cls]}")


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be a scalar or 1-d vector")
    return arr


@dataclass
class OscillatorParams:
    """Per-state resonator parameters.

    omega: squared angular frequencies, >= 0.
    dt: time steps, > 0.
    damping: damping coefficients, >= 0 (default 0; the network never sets it).
    """

    omega: np.ndarray
    dt: np.ndarray
    damping: np.ndarray | None = None

    def __post_init__(self):
        self.omega = _as_vector(self.omega, "omega")
        self.dt = _as_vector(self.dt, "dt")
        if self.damping is None:
            self.damping = np.zeros_like(self.omega)
        else:
            self.damping = _as_vector(self.damping, "damping")
        p = self.omega.shape[0]
        if self.dt.shape[0] != p or self.damping.shape[0] != p:
            raise ParameterError("omega, dt, damping must have equal length")
        if not np.all(np.isfinite(self.omega)) or np.any(self.omega < 0):
            raise ParameterError("omega must be finite and nonnegative")
        if not np.all(np.isfinite(self.dt)) or np.any(self.dt <= 0):
            raise ParameterError("dt must be finite and positive")
        if not np.all(np.isfinite(self.damping)) or np.any(self.damping < 0):
            raise ParameterError("damping must be finite and nonnegative")

    @property
    def state_size(self) -> int:
        return self.omega.shape[0]


def transition_blocks(omega, dt, scheme: Scheme, damping=None) -> np.ndarray:
    """Per-state 2x2 transition blocks for the chosen scheme, shape (P, 2, 2).

    State order is (u, v).  With zero damping the blocks reduce to

        euler: ((1, -dt*om), (dt, 1))
        im:    ((S, -S*dt*om), (S*dt, S)),  S = 1/(1 + dt^2 om)
        imex:  ((1, -dt*om), (dt, 1 - dt^2 om))
    """
    om = _as_vector(omega, "omega")
    dt = _as_vector(dt, "dt")
    b = np.zeros_like(om) if damping is None else _as_vector(damping, "damping")
    blocks = np.empty((om.shape[0], 2, 2), dtype=np.float64)
    if scheme is Scheme.EXPLICIT_EULER:
        blocks[:, 0, 0] = 1.0 - 2.0 * b * dt
        blocks[:, 0, 1] = -dt * om
        blocks[:, 1, 0] = dt
        blocks[:, 1, 1] = 1.0
    elif scheme is Scheme.IM:
        s = 1.0 / (1.0 + 2.0 * b * dt + dt * dt * om)
        blocks[:, 0, 0] = s
        blocks[:, 0, 1] = -s * dt * om
        blocks[:, 1, 0] = s * dt
        blocks[:, 1, 1] = 1.0 - s * dt * dt * om
    elif scheme is Scheme.IMEX:
        decay = 1.0 - 2.0 * b * dt
        blocks[:, 0, 0] = decay
        blocks[:, 0, 1] = -dt * om
        blocks[:, 1, 0] = dt * decay
        blocks[:, 1, 1] = 1.0 - dt * dt * om
    else:
        raise ParameterError(f"unknown scheme {scheme!r}")
    return blocks


def forcing_coefficients(omega, dt, scheme: Scheme, damping=None):
    """Coefficients (c_u, c_v) mapping a drive d_n to forcing (c_u d, c_v d)."""
    om = _as_vector(omega, "omega")
    dt = _as_vector(dt, "dt")
    b = np.zeros_like(om) if damping is None else _as_vector(damping, "damping")
    if scheme is Scheme.EXPLICIT_EULER:
        return dt, np.zeros_like(dt)
    if scheme is Scheme.IM:
        s = 1.0 / (1.0 + 2.0 * b * dt + dt * dt * om)
        return s * dt, s * dt * dt
    if scheme is Scheme.IMEX:
        return dt, dt * dt
    raise ParameterError(f"unknown scheme {scheme!r}")


def build_recurrence(params: OscillatorParams, scheme: Scheme,
                     drive: np.ndarray) -> BlockDiagRecurrence:
    """Assemble the discrete recurrence for a drive sequence (L, P)."""
    drive = np.asarray(drive, dtype=np.float64)
    if drive.ndim != 2 or drive.shape[1] != params.state_size:
        raise ParameterError(
            f"drive must have shape (L, P={params.state_size}), got {drive.shape}")
    if drive.shape[0] < 1:
        raise ParameterError("drive must contain at least one step")
    blocks = transition_blocks(params.omega, params.dt, scheme, params.damping)
    c_u, c_v = forcing_coefficients(params.omega, params.dt, scheme, params.damping)
    forcing = np.stack([c_u * drive, c_v * drive], axis=-1)
    return BlockDiagRecurrence(blocks, forcing)


def eigenvalues_closed_form(params: OscillatorParams, scheme: Scheme) -> np.ndarray:
    """Closed-form eigenvalue pairs of the transition blocks, shape (P, 2).

    im:   lambda = s +- i dt s sqrt(omega),  s = 1/(1 + dt^2 omega),
          so |lambda| = sqrt(s) <= 1.
    imex: lambda = (2 - a)/2 +- i sqrt(a (4 - a))/2 with a = dt^2 omega <= 4,
          so |lambda| = 1; at a = 4 the pair degenerates to -1 (double).
    """
    if np.any(params.damping != 0.0):
        raise ParameterError("closed-form eigenvalues assume zero damping")
    om, dt = params.omega, params.dt
    if scheme is Scheme.IM:
        s = 1.0 / (1.0 + dt * dt * om)
        imag = dt * s * np.sqrt(om)
        return np.stack([s + 1j * imag, s - 1j * imag], axis=-1)
    if scheme is Scheme.IMEX:
        a = dt * dt * om
        if np.any(a > 4.0):
            raise PreconditionError(
                "imex eigenvalues require dt^2 * omega <= 4 "
                f"(max found {float(np.max(a)):g})")
        real = 0.5 * (2.0 - a)
        imag = 0.5 * np.sqrt(a * (4.0 - a))
        return np.stack([real + 1j * imag, real - 1j * imag], axis=-1)
    raise ParameterError("closed-form eigenvalues exist for IM and IMEX only")


def eigenvalue_moment(order: float, dt: float, omega_max: float) -> float:
    """Moment E|lambda|^order of an IM eigenvalue under omega ~ U(0, omega_max].

    Equals ((1 + dt^2 omega_max)^(1 - order/2) - 1) / (dt^2 omega_max (1 - order/2)),
    continued across order = 2 by its limit log(1 + dt^2 omega_max) / (dt^2 omega_max).
    """
    if not (order > 0):
        raise ParameterError("moment order must be positive")
    if not (dt > 0) or not (omega_max > 0):
        raise ParameterError("dt and omega_max must be positive")
    a = dt * dt * omega_max
    q = 1.0 - order / 2.0
    if abs(q) < 1e-12:
        return float(np.log1p(a) / a)
    return float(np.expm1(q * np.log1p(a)) / (a * q))


def discrete_energy(u, v, omega, dt) -> np.ndarray:
    """Quadratic form u^2 + omega v^2 - dt omega u v, invariant under IMEX."""
    return u * u + omega * v * v - dt * omega * u * v


@dataclass
class NeuronTrace:
    """Impulse response of a single resonator: state and energy per step."""

    scheme: Scheme
    omega: float
    dt: float
    u: np.ndarray
    v: np.ndarray
    energy: np.ndarray

    @property
    def amplitude(self) -> np.ndarray:
        # energy-weighted norm; for omega = 1 this is the plain state norm
        return np.sqrt(np.maximum(self.u ** 2 + self.omega * self.v ** 2, 0.0))


def simulate_neuron(params: OscillatorParams, scheme: Scheme, steps: int,
                    impulse: float = 1.0) -> NeuronTrace:
    """Simulate a single resonator (P = 1) hit by an impulse at the first step.

    The state starts at rest (zero phase); the impulse enters through the
    drive at step 1.  Returns the (u_n, v_n) trace for n = 0..steps together
    with the discrete energy at every step.
    """
    if params.state_size != 1:
        raise ParameterError("simulate_neuron expects a single state pair")
    if steps < 1:
        raise ParameterError("steps must be >= 1")
    drive = np.zeros((steps, 1))
    drive[0, 0] = impulse
    rec = build_recurrence(params, scheme, drive)
    states = scan(rec, np.zeros((1, 2)))
    u = np.concatenate([[0.0], states[:, 0, 0]])
    v = np.concatenate([[0.0], states[:, 0, 1]])
    om, dt = float(params.omega[0]), float(params.dt[0])
    energy = discrete_energy(u, v, om, dt)
    return NeuronTrace(scheme=scheme, omega=om, dt=dt, u=u, v=v, energy=energy)


def spectral_sweep(n_samples: int, scheme: Scheme, seed: int = 0):
    """Sample (omega, dt) ~ U(0, 1]^2 and return closed-form eigenvalue pairs.

    Returns (omega, dt, eigs) with eigs of shape (n_samples, 2).
    """
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    omega = 1.0 - rng.random(n_samples)  # (0, 1]
    dt = 1.0 - rng.random(n_samples)
    eigs = eigenvalues_closed_form(OscillatorParams(omega, dt), scheme)
    return omega, dt, eigs
