"""Fixed-step propagation of the nonlinear model with open-loop input profiles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .dynamics import (
    SingularityError,
    assemble,
    check_singularity,
    mass_kinematics,
    solve_accel,
    tensions,
    wrenches,
)
from .frames import batch_cross, quat_derivative, quat_to_dcm
from .system import ExternalInputs, ForceFrame, SloshSystem, SystemState


class PropagationError(RuntimeError):
    """Non-finite state encountered during propagation."""

    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"{message} at t = {time:.17g} s")


def _samples(data, name: str) -> np.ndarray | None:
    if data is None:
        return None
    a = np.asarray(data, dtype=float)
    if a.ndim != 2 or a.shape[1] != 4:
        raise ValueError(f"{name} must be rows of [t, x, y, z]")
    if a.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(np.diff(a[:, 0]) <= 0):
        raise ValueError(f"{name} timestamps must be strictly increasing")
    return a


@dataclass(frozen=True)
class InputProfile:
    """Time-stamped force and torque samples.

    ``force`` and ``torque`` are ``(k, 4)`` arrays of ``[t, x, y, z]`` rows;
    ``None`` means identically zero. Values are clamped outside the sampled
    span.
    """

    force: np.ndarray | None = None
    torque: np.ndarray | None = None
    force_frame: ForceFrame = "inertial"
    interpolation: Literal["linear", "zoh"] = "linear"

    def __post_init__(self):
        object.__setattr__(self, "force", _samples(self.force, "force profile"))
        object.__setattr__(self, "torque", _samples(self.torque, "torque profile"))
        if self.interpolation not in ("linear", "zoh"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if self.force_frame not in ("inertial", "body"):
            raise ValueError(f"unknown force frame {self.force_frame!r}")


def _interp(samples: np.ndarray | None, t: float, mode: str) -> np.ndarray:
    if samples is None:
        return np.zeros(3)
    ts = samples[:, 0]
    if mode == "zoh":
        k = int(np.searchsorted(ts, t, side="right")) - 1
        return samples[max(k, 0), 1:].copy()
    return np.array([np.interp(t, ts, samples[:, j]) for j in (1, 2, 3)])


def eval_inputs(profile: InputProfile, t: float, gravity=(0.0, 0.0, 0.0)) -> ExternalInputs:
    """Loads at time ``t``. Body-frame forces stay in body axes here."""
    return ExternalInputs(
        force=_interp(profile.force, t, profile.interpolation),
        torque=_interp(profile.torque, t, profile.interpolation),
        gravity=gravity,
        force_frame=profile.force_frame,
    )


@dataclass(frozen=True)
class SimSettings:
    t0: float = 0.0
    tf: float = 10.0
    dt: float = 1e-3
    integrator: Literal["rk4"] = "rk4"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.tf > self.t0:
            raise ValueError("tf must be greater than t0")
        ratio = (self.tf - self.t0) / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"(tf - t0)/dt = {ratio!r} is not an integer")
        if self.integrator != "rk4":
            raise ValueError(f"unsupported integrator {self.integrator!r}")

    @property
    def steps(self) -> int:
        return int(round((self.tf - self.t0) / self.dt))

    def grid(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to run the nonlinear model."""

    system: SloshSystem
    initial: SystemState
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inputs: InputProfile = field(default_factory=InputProfile)
    settings: SimSettings = field(default_factory=SimSettings)


@dataclass(frozen=True)
class Diagnostics:
    energy: float
    momentum: np.ndarray
    angular_momentum: np.ndarray


def diagnostics(state: SystemState, system: SloshSystem, gravity) -> Diagnostics:
    """Total mechanical energy, linear momentum and angular momentum about the inertial origin.

    Potential energy is ``-m g . r`` for every mass, so it is defined up to
    the choice of origin.
    """
    g = np.asarray(gravity, dtype=float)
    R_IB = quat_to_dcm(state.attitude)
    body = system.body
    v, w = state.velocity, state.omega
    energy = 0.5 * body.mass * v @ v + 0.5 * w @ body.inertia @ w - body.mass * g @ state.position
    p = body.mass * v
    L = body.mass * batch_cross(state.position, v) + R_IB @ (body.inertia @ w)
    if system.n:
        m = system.arrays.mass
        r_p, v_p = mass_kinematics(state, system)
        energy += 0.5 * m @ np.einsum("ni,ni->n", v_p, v_p) - m @ (r_p @ g)
        p = p + m @ v_p
        L = L + m @ batch_cross(r_p, v_p)
    return Diagnostics(float(energy), p, L)


def rk4_step(derivative: Callable, state, t: float, dt: float):
    """One classical Runge-Kutta step.

    ``derivative(state, t)`` returns the time derivative in the same shape
    as ``state``. For :class:`SystemState` the attitude quaternion is
    renormalized after the step.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if isinstance(state, SystemState):
        n = state.n

        def f(x, tt):
            return derivative(SystemState.from_vector(x, n), tt).to_vector()

        x = _rk4(f, state.to_vector(), t, dt)
        x[6:10] /= np.linalg.norm(x[6:10])
        return SystemState.from_vector(x, n)
    return _rk4(derivative, np.asarray(state, dtype=float), t, dt)


def _rk4(f, y, t, dt, k1=None):
    if k1 is None:
        k1 = f(y, t)
    k2 = f(y + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(y + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(y + dt * k3, t + dt)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class Trajectory:
    """Uniformly sampled propagation output.

    ``states`` rows follow :meth:`SystemState.to_vector`; accelerations rows
    follow :attr:`Accelerations.vector`. Forces are inertial, torques are
    body-axis torques about B.
    """

    n: int
    t: np.ndarray
    states: np.ndarray
    accelerations: np.ndarray
    tensions: np.ndarray
    wrench_forces: np.ndarray
    wrench_torques: np.ndarray
    energy: np.ndarray
    momentum: np.ndarray
    angular_momentum: np.ndarray

    def state(self, k: int) -> SystemState:
        return SystemState.from_vector(self.states[k], self.n)

    @property
    def final(self) -> SystemState:
        return self.state(-1)


def _input_source(profile: InputProfile, gravity):
    if profile.force is None and profile.torque is None:
        constant = ExternalInputs(gravity=gravity, force_frame=profile.force_frame)
        return lambda t: constant
    return lambda t: eval_inputs(profile, t, gravity)


def _vector_derivative(x, t, system, inputs_at, n):
    state = SystemState.from_vector(x, n)
    sys = assemble(state, system, inputs_at(t))
    acc = solve_accel(sys)
    return _pack_derivative(state, acc), sys, acc


def _pack_derivative(state, acc):
    return np.concatenate(
        [state.velocity, acc.rdd, quat_derivative(state.attitude, state.omega), acc.omega_dot,
         state.rates.reshape(-1), acc.pend.reshape(-1)]
    )


def propagate(scenario: Scenario) -> Trajectory:
    """Integrate the body-CoM nonlinear model on the uniform grid of ``scenario.settings``.

    Raises
    ------
    SingularityError
        With ``index`` and ``time`` set, if a swing angle reaches the guard.
    PropagationError
        If the state becomes non-finite.
    """
    system, settings = scenario.system, scenario.settings
    gravity = np.asarray(scenario.gravity, dtype=float)
    profile = scenario.inputs
    n = system.n
    ts = settings.grid()
    K = ts.size
    dt = settings.dt

    states = np.empty((K, 13 + 4 * n))
    accels = np.empty((K, 6 + 2 * n))
    tens = np.empty((K, n))
    forces = np.empty((K, n, 3))
    torques = np.empty((K, n, 3))
    energy = np.empty(K)
    mom = np.empty((K, 3))
    angmom = np.empty((K, 3))

    inputs_at = _input_source(profile, gravity)

    def f(y, t):
        return _vector_derivative(y, t, system, inputs_at, n)[0]

    x = scenario.initial.to_vector()
    for k, t in enumerate(ts):
        state = SystemState.from_vector(x, n)
        check_singularity(state, float(t))
        try:
            k1, sys, acc = _vector_derivative(x, t, system, inputs_at, n)
        except SingularityError as exc:
            raise SingularityError(exc.index, exc.theta, float(t)) from None
        except FloatingPointError as exc:
            raise PropagationError(str(exc), float(t)) from None
        states[k] = x
        accels[k] = acc.vector
        tens[k] = tensions(sys, acc)
        w = wrenches(sys, acc)
        forces[k] = w[:, :3]
        torques[k] = w[:, 3:]
        d = diagnostics(state, system, gravity)
        energy[k], mom[k], angmom[k] = d.energy, d.momentum, d.angular_momentum
        if k == K - 1:
            break
        try:
            x = _rk4(f, x, t, dt, k1=k1)
        except SingularityError as exc:
            raise SingularityError(exc.index, exc.theta, float(t)) from None
        except FloatingPointError as exc:
            raise PropagationError(str(exc), float(t)) from None
        x[6:10] /= np.linalg.norm(x[6:10])
        if not np.all(np.isfinite(x)):
            raise PropagationError("non-finite state", float(ts[k + 1]))
    return Trajectory(n, ts, states, accels, tens, forces, torques, energy, mom, angmom)


def relative_drift(series: np.ndarray, scale: float | None = None) -> float:
    """``max |x(t) - x(0)| / scale`` (scale defaults to ``|x(0)|``)."""
    series = np.asarray(series, dtype=float)
    dev = np.abs(series - series[0])
    if dev.ndim > 1:
        dev = np.linalg.norm(series - series[0], axis=-1)
    if scale is None:
        scale = float(np.linalg.norm(series[0]))
    return float(dev.max() / scale) if scale > 0 else float(dev.max())


__all__ = [
    "InputProfile",
    "SimSettings",
    "Scenario",
    "Trajectory",
    "Diagnostics",
    "PropagationError",
    "eval_inputs",
    "diagnostics",
    "rk4_step",
    "propagate",
    "relative_drift",
]
