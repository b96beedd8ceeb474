"""Physical description of a rigid body carrying spherical pendulums, and its state."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .frames import as_unit_quat, is_rotation, skew

ForceFrame = Literal["inertial", "body"]


def _vec3(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be 3 finite numbers, got {v!r}")
    return a


def _spd3(J, name: str) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    if J.shape != (3, 3) or not np.all(np.isfinite(J)):
        raise ValueError(f"{name} must be a finite 3x3 matrix")
    if not np.allclose(J, J.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(J).max())):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(J).min() <= 0.0:
        raise ValueError(f"{name} must be positive definite")
    return J


@dataclass(frozen=True)
class RigidBody:
    """Hub body: mass [kg] and inertia about its own center of mass B, body axes [kg m^2]."""

    mass: float
    inertia: np.ndarray

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"body mass must be positive, got {self.mass!r}")
        object.__setattr__(self, "inertia", _spd3(self.inertia, "body inertia"))


@dataclass(frozen=True)
class Pendulum:
    """Spherical pendulum attached to the body.

    Attributes
    ----------
    mass : float
        Point mass [kg].
    length : float
        Rod length [m].
    fulcrum : ndarray (3,)
        Fulcrum position Q relative to the body center of mass B, body axes [m].
    fulcrum_dcm : ndarray (3, 3)
        Constant rotation ``R_BQ`` from the fulcrum frame to the body frame.
    damping : float
        Proportional damping ``q`` on the swing rates [kg m/s].
    """

    mass: float
    length: float
    fulcrum: np.ndarray
    fulcrum_dcm: np.ndarray = field(default_factory=lambda: np.eye(3))
    damping: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"pendulum mass must be positive, got {self.mass!r}")
        if not self.length > 0:
            raise ValueError(f"pendulum length must be positive, got {self.length!r}")
        if not self.damping >= 0:
            raise ValueError(f"pendulum damping must be non-negative, got {self.damping!r}")
        object.__setattr__(self, "fulcrum", _vec3(self.fulcrum, "fulcrum"))
        R = np.asarray(self.fulcrum_dcm, dtype=float)
        if not is_rotation(R):
            raise ValueError("fulcrum_dcm must be a proper rotation matrix")
        object.__setattr__(self, "fulcrum_dcm", R)

    @property
    def nominal_offset(self) -> np.ndarray:
        """Mass position relative to the fulcrum at zero swing, body axes."""
        return -self.length * self.fulcrum_dcm[:, 2]


class PendulumArrays(NamedTuple):
    mass: np.ndarray
    length: np.ndarray
    fulcrum: np.ndarray
    fulcrum_dcm: np.ndarray
    damping: np.ndarray


@dataclass(frozen=True)
class SloshSystem:
    """A rigid body and its pendulums.

    All positions are stored relative to the body center of mass B. The
    nominal center of mass ``Gbar`` is the composite center of mass with every
    pendulum at zero swing; it is fixed in the body frame.
    """

    body: RigidBody
    pendulums: tuple[Pendulum, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pendulums", tuple(self.pendulums))

    @classmethod
    def from_gbar(
        cls,
        body_mass: float,
        inertia_gbar,
        pendulums: Sequence[Pendulum],
    ) -> "SloshSystem":
        """Build from data referenced to the nominal center of mass.

        ``inertia_gbar`` is the body-only inertia about Gbar and every
        pendulum ``fulcrum`` is measured from Gbar.
        """
        J_g = _spd3(inertia_gbar, "inertia about Gbar")
        arms = sum((p.mass * (p.fulcrum + p.nominal_offset) for p in pendulums), np.zeros(3))
        r_bg = arms / body_mass
        J_b = J_g + body_mass * skew(r_bg) @ skew(r_bg)
        shifted = [replace(p, fulcrum=p.fulcrum + r_bg) for p in pendulums]
        return cls(RigidBody(body_mass, J_b), tuple(shifted))

    @property
    def n(self) -> int:
        return len(self.pendulums)

    @property
    def ndof(self) -> int:
        return 6 + 2 * self.n

    @property
    def total_mass(self) -> float:
        return self.body.mass + sum(p.mass for p in self.pendulums)

    @property
    def com_shift(self) -> np.ndarray:
        """``r_BGbar``: nominal composite CoM relative to B, body axes."""
        moment = sum(
            (p.mass * (p.fulcrum + p.nominal_offset) for p in self.pendulums), np.zeros(3)
        )
        return moment / self.total_mass

    @property
    def inertia_gbar(self) -> np.ndarray:
        """Body-only inertia about Gbar (parallel-axis shift of ``J_B``)."""
        r = self.com_shift
        return self.body.inertia - self.body.mass * skew(r) @ skew(r)

    def fulcrum_from_gbar(self, i: int) -> np.ndarray:
        return self.pendulums[i].fulcrum - self.com_shift

    def mass_from_gbar(self, i: int) -> np.ndarray:
        """Nominal mass position relative to Gbar."""
        p = self.pendulums[i]
        return p.fulcrum + p.nominal_offset - self.com_shift

    @cached_property
    def arrays(self) -> "PendulumArrays":
        """Pendulum parameters stacked along a leading pendulum axis."""
        ps = self.pendulums
        return PendulumArrays(
            mass=np.array([p.mass for p in ps], dtype=float),
            length=np.array([p.length for p in ps], dtype=float),
            fulcrum=np.array([p.fulcrum for p in ps], dtype=float).reshape(-1, 3),
            fulcrum_dcm=np.array([p.fulcrum_dcm for p in ps], dtype=float).reshape(-1, 3, 3),
            damping=np.array([p.damping for p in ps], dtype=float),
        )

    def with_damping(self, q: Sequence[float]) -> "SloshSystem":
        return replace(
            self, pendulums=tuple(replace(p, damping=float(qi)) for p, qi in zip(self.pendulums, q))
        )


@dataclass(frozen=True)
class ExternalInputs:
    """External loads and uniform gravity.

    ``force`` acts at the reference point of the formulation (B, or Gbar for
    the nominal-CoM model), in the frame named by ``force_frame``. ``torque``
    is in body axes.
    """

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    force_frame: ForceFrame = "inertial"

    def __post_init__(self):
        for name in ("force", "torque", "gravity"):
            object.__setattr__(self, name, _vec3(getattr(self, name), name))
        if self.force_frame not in ("inertial", "body"):
            raise ValueError(f"force_frame must be 'inertial' or 'body', got {self.force_frame!r}")

    def force_inertial(self, R_IB: np.ndarray) -> np.ndarray:
        return R_IB @ self.force if self.force_frame == "body" else self.force


@dataclass(frozen=True)
class SystemState:
    """Minimal-coordinate state.

    ``position``/``velocity`` are of the formulation reference point (B by
    default) in inertial axes; ``attitude`` is the body-to-inertial quaternion;
    ``omega`` is the body rate in body axes; ``angles`` and ``rates`` are
    ``(n, 2)`` arrays of ``(theta, phi)`` and their rates.
    """

    position: np.ndarray
    velocity: np.ndarray
    attitude: np.ndarray
    omega: np.ndarray
    angles: np.ndarray
    rates: np.ndarray

    @classmethod
    def rest(cls, n: int) -> "SystemState":
        return cls(
            np.zeros(3), np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3),
            np.zeros((n, 2)), np.zeros((n, 2)),
        )

    @classmethod
    def create(
        cls,
        n: int,
        position=(0.0, 0.0, 0.0),
        velocity=(0.0, 0.0, 0.0),
        attitude=(1.0, 0.0, 0.0, 0.0),
        omega=(0.0, 0.0, 0.0),
        angles=None,
        rates=None,
    ) -> "SystemState":
        angles = np.zeros((n, 2)) if angles is None else np.asarray(angles, dtype=float).reshape(n, 2)
        rates = np.zeros((n, 2)) if rates is None else np.asarray(rates, dtype=float).reshape(n, 2)
        return cls(
            _vec3(position, "position"),
            _vec3(velocity, "velocity"),
            as_unit_quat(attitude),
            _vec3(omega, "omega"),
            angles,
            rates,
        )

    @property
    def n(self) -> int:
        return self.angles.shape[0]

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.position, self.velocity, self.attitude, self.omega,
             self.angles.reshape(-1), self.rates.reshape(-1)]
        )

    @classmethod
    def from_vector(cls, x: np.ndarray, n: int) -> "SystemState":
        x = np.asarray(x, dtype=float)
        return cls(
            x[0:3].copy(), x[3:6].copy(), x[6:10].copy(), x[10:13].copy(),
            x[13 : 13 + 2 * n].reshape(n, 2).copy(),
            x[13 + 2 * n : 13 + 4 * n].reshape(n, 2).copy(),
        )
