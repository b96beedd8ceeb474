"""Analytic linear models about a thrusting, non-rotating nominal.

All models use the nominal composite center of mass Gbar as translational
reference, the small body rotation vector as attitude coordinate and a
fixed coordinate ordering::

    (dx, dy, dz, dtheta_x, dtheta_y, dtheta_z, <pair 1>, <pair 2>, ...)

where each pair is ``(theta_i, phi_i)`` in physical coordinates or
``(eta_theta_i, eta_phi_i)`` in modal coordinates. The models satisfy
``M xdd + D xd + K x = B_f (dF, dtau)`` with ``B_f = [I_6; 0]``.

The nominal is the state with zero swing angles, identity attitude and a
constant force ``Fz_bar`` along ``+z`` (inertial or body axes). No control
torque is needed to hold it: the pendulum tensions pass through Gbar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .frames import E_Z, skew
from .system import ForceFrame, SloshSystem

RIGID_LABELS = ("x", "y", "z", "theta_x", "theta_y", "theta_z")

#: Tolerance on ``R_BQ - I`` for builders that require aligned fulcrum frames.
ALIGNMENT_TOL = 1e-12

_SKEW_EZ = skew(E_Z)
# maps the body rotation rates onto the pendulum's relative swing rates
_SWING_FROM_BODY = np.array([[0.0, 0.0, 0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, -1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class NominalConfig:
    """Nominal longitudinal force ``Fz_bar`` [N] and the frame it is fixed in."""

    Fz_bar: float
    force_frame: ForceFrame = "inertial"

    def __post_init__(self):
        if not (math.isfinite(self.Fz_bar) and self.Fz_bar >= 0.0):
            raise ValueError(f"Fz_bar must be finite and >= 0, got {self.Fz_bar!r}")
        if self.force_frame not in ("inertial", "body"):
            raise ValueError(f"force_frame must be 'inertial' or 'body', got {self.force_frame!r}")

    @property
    def kappa(self) -> float:
        return 1.0 if self.force_frame == "body" else 0.0


@dataclass(frozen=True)
class ModalConstants:
    m_Gbar: float
    omega0_sq: np.ndarray
    tau0: np.ndarray
    I_B: np.ndarray


@dataclass(frozen=True)
class LinearModel:
    """Second-order model ``M xdd + D xd + K x = B_f w``.

    ``L`` holds the 2x6 modal participation matrix of every pendulum (or
    spring mass); it is a property of the geometry and is attached in both
    coordinate forms.
    """

    M: np.ndarray
    D: np.ndarray
    K: np.ndarray
    labels: tuple[str, ...]
    B_f: np.ndarray = None
    L: tuple[np.ndarray, ...] = ()
    form: str = "modal"

    def __post_init__(self):
        size = len(self.labels)
        for name in ("M", "D", "K"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (size, size):
                raise ValueError(f"{name} must be {size}x{size}, got {a.shape}")
            object.__setattr__(self, name, a)
        if self.B_f is None:
            object.__setattr__(self, "B_f", input_map(size))
        else:
            object.__setattr__(self, "B_f", np.asarray(self.B_f, dtype=float).reshape(size, -1))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "L", tuple(np.asarray(x, dtype=float) for x in self.L))

    @property
    def size(self) -> int:
        return len(self.labels)


def input_map(size: int) -> np.ndarray:
    """``[I_6; 0]``: external force and torque enter the rigid rows only."""
    B = np.zeros((size, 6))
    B[:6, :6] = np.eye(6)
    return B


class MsdParams(NamedTuple):
    """Linearized spring-mass slosh element (positions relative to Gbar, body axes)."""

    m_P: float
    k: float
    r_GbarP_bar: np.ndarray
    N_z_bar: float
    x0: float
    y0: float


class DampingMap(NamedTuple):
    q: np.ndarray
    xi: np.ndarray
    D: np.ndarray


# --- geometry --------------------------------------------------------------


def com_shift(body_mass: float, masses: Sequence[float], offsets) -> np.ndarray:
    """``r_BGbar = (1/m_B) sum m_i rbar_GbarP_i`` from Gbar-relative nominal mass positions."""
    offsets = np.asarray(offsets, dtype=float).reshape(-1, 3)
    return np.asarray(masses, dtype=float) @ offsets / body_mass


def nominal_accel(system: SloshSystem, cfg: NominalConfig, gravity=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Acceleration of Gbar along the nominal: ``g + (Fz_bar / m_Gbar) e_z``."""
    return np.asarray(gravity, dtype=float) + cfg.Fz_bar / system.total_mass * E_Z


def _require_aligned(system: SloshSystem) -> None:
    for i, p in enumerate(system.pendulums):
        if np.abs(p.fulcrum_dcm - np.eye(3)).max() > ALIGNMENT_TOL:
            raise ValueError(f"pendulum {i}: fulcrum frame must be aligned with the body frame")


def _require_thrust(cfg: NominalConfig) -> None:
    if not cfg.Fz_bar > 0.0:
        raise ValueError(f"pendulum models need Fz_bar > 0, got {cfg.Fz_bar!r}")


def _gbar_fulcrums(system: SloshSystem) -> np.ndarray:
    return np.array([system.fulcrum_from_gbar(i) for i in range(system.n)]).reshape(-1, 3)


def _lever_rows(r: np.ndarray) -> np.ndarray:
    """``[[1,0,0,0,z,-y],[0,1,0,-z,0,x]]`` for a point ``r`` relative to Gbar."""
    x, y, z = r
    return np.array([[1.0, 0.0, 0.0, 0.0, z, -y], [0.0, 1.0, 0.0, -z, 0.0, x]])


def participation(system: SloshSystem) -> tuple[np.ndarray, ...]:
    """Modal participation matrices ``L_i = sqrt(m_i) [[1,0,0,0,z,-y],[0,1,0,-z,0,x]]`` of the fulcrums."""
    r = _gbar_fulcrums(system)
    return tuple(math.sqrt(p.mass) * _lever_rows(r[i]) for i, p in enumerate(system.pendulums))


def modal_constants(system: SloshSystem, cfg: NominalConfig) -> ModalConstants:
    _require_thrust(cfg)
    p = system.arrays
    m_g = system.total_mass
    r = _gbar_fulcrums(system)
    I_B = system.inertia_gbar.copy()
    for i in range(system.n):
        S = skew(r[i])
        I_B -= p.mass[i] * S @ S
    return ModalConstants(
        m_Gbar=m_g,
        omega0_sq=cfg.Fz_bar / (m_g * p.length),
        tau0=p.mass / m_g * cfg.Fz_bar * p.length,
        I_B=I_B,
    )


def coordinate_labels(n: int, pair: tuple[str, str]) -> tuple[str, ...]:
    out = list(RIGID_LABELS)
    for i in range(1, n + 1):
        out += [f"{pair[0]}_{i}", f"{pair[1]}_{i}"]
    return tuple(out)


# --- pendulum models -------------------------------------------------------


def build_physical_single(system: SloshSystem, cfg: NominalConfig) -> LinearModel:
    """8x8 model in ``(dr, dtheta_IB, dtheta, dphi)`` for a single pendulum."""
    if system.n != 1:
        raise ValueError(f"the physical-coordinate model supports exactly one pendulum, got {system.n}")
    _require_aligned(system)
    _require_thrust(cfg)
    pend = system.pendulums[0]
    m, l, q = pend.mass, pend.length, pend.damping
    m_b = system.body.mass
    J = system.inertia_gbar
    x, y, zq = system.fulcrum_from_gbar(0)
    zp = zq - l

    M = np.zeros((8, 8))
    M[0, :] = [m_b, 0, 0, 0, -m * zp, m * y, 0, 0]
    M[1, :] = [0, m_b, 0, m * zp, 0, -m * x, 0, 0]
    M[2, 2] = m_b + m
    M[3, :6] = [0, m * zp, 0, J[0, 0] + m * y * y, J[0, 1] - m * x * y, J[0, 2]]
    M[4, :6] = [-m * zp, 0, 0, J[0, 1] - m * x * y, J[1, 1] + m * x * x, J[1, 2]]
    M[5, :6] = [m * y, -m * x, 0, J[0, 2], J[1, 2], J[2, 2]]
    M[6, :] = [m, 0, 0, 0, m * zp, -m * y, m * l, 0]
    M[7, :] = [0, m, 0, -m * zp, 0, m * x, 0, m * l]

    f = cfg.Fz_bar * m / (m_b + m)
    K = np.zeros((8, 8))
    K[0, 4], K[0, 6] = f, -f
    K[1, 3], K[1, 7] = -f, -f
    K[3, 3], K[3, 7] = f * zp, f * zq
    K[4, 4], K[4, 6] = f * zp, -f * zq
    K[5, 3], K[5, 4], K[5, 6], K[5, 7] = -f * x, -f * y, f * y, -f * x
    K[6, 4], K[6, 6] = -f, f
    K[7, 3], K[7, 7] = f, f
    K[:3, 3:6] += cfg.kappa * cfg.Fz_bar * _SKEW_EZ

    D = np.zeros((8, 8))
    D[6, 6] = D[7, 7] = q
    return LinearModel(M, D, K, coordinate_labels(1, ("theta", "phi")), L=participation(system), form="physical")


def modal_transforms(system: SloshSystem) -> tuple[np.ndarray, np.ndarray]:
    """Row operator ``E`` and coordinate map ``S`` taking a physical model to modal form.

    ``x_physical = S x_modal`` with ``theta_i = eta_theta/(sqrt(m) l) + dtheta_IBy`` and
    ``phi_i = eta_phi/(sqrt(m) l) - dtheta_IBx``. ``E`` adds ``G_i^T`` times the
    pendulum rows to the rigid rows, then scales pendulum rows by ``1/sqrt(m_i)``.
    """
    n = system.n
    size = 6 + 2 * n
    r = _gbar_fulcrums(system)
    E = np.eye(size)
    S = np.eye(size)
    for i, p in enumerate(system.pendulums):
        k = slice(6 + 2 * i, 8 + 2 * i)
        sm = math.sqrt(p.mass)
        E[:6, k] = _lever_rows(r[i]).T
        E[k, :] /= sm
        S[k, k] = np.eye(2) / (sm * p.length)
        S[k, :6] = _SWING_FROM_BODY
    return E, S


def to_modal(model: LinearModel, system: SloshSystem) -> LinearModel:
    """Apply the physical-to-modal change of coordinates and row operations."""
    if model.size != system.ndof:
        raise ValueError(f"model has {model.size} coordinates, system has {system.ndof}")
    E, S = modal_transforms(system)
    return LinearModel(
        E @ model.M @ S, E @ model.D @ S, E @ model.K @ S,
        coordinate_labels(system.n, ("eta_theta", "eta_phi")),
        B_f=E @ model.B_f, L=participation(system), form="modal",
    )


def build_modal(system: SloshSystem, cfg: NominalConfig) -> tuple[LinearModel, ModalConstants]:
    """Modal model for any number of pendulums with aligned fulcrum frames.

    Swing damping ``q_i`` acts on the swing rate relative to the body, so
    beyond ``q_i/(m_i l_i) = 2 xi_i omega0_i`` on the modal diagonal it also
    couples the modal coordinates to the body rates.
    """
    _require_aligned(system)
    c = modal_constants(system, cfg)
    p = system.arrays
    n = system.n
    size = 6 + 2 * n
    r = _gbar_fulcrums(system)
    L = participation(system)
    ml = float(p.mass @ p.length)

    M = np.zeros((size, size))
    M[:3, :3] = c.m_Gbar * np.eye(3)
    M[:3, 3:6] = -ml * _SKEW_EZ
    M[3:6, :3] = ml * _SKEW_EZ
    M[3:6, 3:6] = c.I_B
    K = np.zeros((size, size))
    K[:3, 3:6] = cfg.kappa * cfg.Fz_bar * _SKEW_EZ
    K[3:6, 3:6] = c.tau0.sum() * _SKEW_EZ @ _SKEW_EZ
    D = np.zeros((size, size))
    for i in range(n):
        k = slice(6 + 2 * i, 8 + 2 * i)
        M[:6, k] = L[i].T
        M[k, :6] = L[i]
        M[k, k] = np.eye(2)
        K[k, k] = c.omega0_sq[i] * np.eye(2)
        q, m, l = p.damping[i], p.mass[i], p.length[i]
        D[k, k] = q / (m * l) * np.eye(2)
        D[k, :6] = q / math.sqrt(m) * _SWING_FROM_BODY
        D[:6, k] = q / (m * l) * L[i].T
        D[:6, :6] += q * _lever_rows(r[i]).T @ _SWING_FROM_BODY
    model = LinearModel(M, D, K, coordinate_labels(n, ("eta_theta", "eta_phi")), L=L, form="modal")
    return model, c


def modal_transform_check(physical: LinearModel, modal: LinearModel, system: SloshSystem) -> float:
    """Largest entry-wise difference between ``to_modal(physical)`` and ``modal``."""
    if physical.size != modal.size:
        raise ValueError(f"dimension mismatch: {physical.size} vs {modal.size}")
    t = to_modal(physical, system)
    return float(max(np.abs(t.M - modal.M).max(), np.abs(t.D - modal.D).max(), np.abs(t.K - modal.K).max()))


def damping_map(system: SloshSystem, cfg: NominalConfig, xi=None, q=None) -> DampingMap:
    """Convert between swing damping ``q`` [kg m/s] and modal damping ratio ``xi``.

    ``q = 2 xi m sqrt(Fz_bar l / m_Gbar)``. Exactly one of ``xi`` and ``q`` is
    given (scalar or one value per pendulum). Also returns the modal damping
    matrix of the system with that damping.
    """
    _require_thrust(cfg)
    if (xi is None) == (q is None):
        raise ValueError("give exactly one of xi and q")
    p = system.arrays
    scale = 2.0 * p.mass * np.sqrt(cfg.Fz_bar * p.length / system.total_mass)
    given = np.broadcast_to(np.asarray(xi if q is None else q, dtype=float), p.mass.shape).copy()
    if np.any(given < 0) or not np.all(np.isfinite(given)):
        raise ValueError(f"damping must be finite and non-negative, got {given!r}")
    if q is None:
        xi_arr, q_arr = given, given * scale
    else:
        q_arr, xi_arr = given, given / scale
    model, _ = build_modal(system.with_damping(q_arr), cfg)
    return DampingMap(q_arr, xi_arr, model.D)


# --- mass-spring-damper equivalent ----------------------------------------


def msd_params(system: SloshSystem, cfg: NominalConfig, k) -> tuple[MsdParams, ...]:
    """Spring-mass elements placed at the nominal pendulum mass positions."""
    p = system.arrays
    k = np.broadcast_to(np.asarray(k, dtype=float), p.mass.shape)
    if not np.all(k > 0):
        raise ValueError(f"spring stiffness must be positive, got {k!r}")
    out = []
    for i in range(system.n):
        r = system.mass_from_gbar(i)
        N = p.mass[i] / system.total_mass * cfg.Fz_bar
        out.append(MsdParams(float(p.mass[i]), float(k[i]), r, N, float(r[0]), float(r[1])))
    return tuple(out)


def build_msd_physical(system: SloshSystem, cfg: NominalConfig, k) -> LinearModel:
    """Spring-mass model in ``(dr, dtheta_IB, dx_i, dy_i)``.

    Each mass slides in the body x-y plane at the nominal pendulum mass
    position, restrained by a spring ``k_i`` and pressed along ``z_B`` by
    the nominal normal force ``N_i = (m_i / m_Gbar) Fz_bar``.

    Damping is a damper ``q_i / l_i`` between body and mass, so its
    reaction acts on the body. The pendulum swing damping has no such
    reaction, which is why only ``M`` and ``K`` of the two models coincide.
    """
    params = msd_params(system, cfg, k)
    n = system.n
    size = 6 + 2 * n
    M = np.zeros((size, size))
    M[:3, :3] = system.total_mass * np.eye(3)
    M[3:6, 3:6] = system.inertia_gbar
    K = np.zeros((size, size))
    K[:3, 3:6] = cfg.kappa * cfg.Fz_bar * _SKEW_EZ
    D = np.zeros((size, size))
    for i, e in enumerate(params):
        k_ = slice(6 + 2 * i, 8 + 2 * i)
        S = skew(e.r_GbarP_bar)
        M[3:6, 3:6] -= e.m_P * S @ S
        M[:3, k_] = e.m_P * np.eye(3)[:, :2]
        M[k_, :3] = e.m_P * np.eye(3)[:2, :]
        M[3:6, k_] = e.m_P * S[:, :2]
        M[k_, 3:6] = -e.m_P * S[:2, :]
        M[k_, k_] = e.m_P * np.eye(2)
        SN = skew(e.N_z_bar * E_Z)
        K[3:6, k_] = -SN[:, :2]
        K[k_, 3:6] = SN[:2, :]
        K[k_, k_] = e.k * np.eye(2)
        D[k_, k_] = system.pendulums[i].damping / system.pendulums[i].length * np.eye(2)
    return LinearModel(M, D, K, coordinate_labels(n, ("x", "y")), L=_msd_participation(params, cfg), form="physical")


def _msd_participation(params: Sequence[MsdParams], cfg: NominalConfig) -> tuple[np.ndarray, ...]:
    out = []
    for e in params:
        c = e.N_z_bar / e.k
        out.append(math.sqrt(e.m_P) * _lever_rows(e.r_GbarP_bar + c * E_Z))
    return tuple(out)


def build_msd_modal(system: SloshSystem, cfg: NominalConfig, k) -> LinearModel:
    """Spring-mass model in modal coordinates.

    ``eta_x = sqrt(m) (dx - c dtheta_IBy)``, ``eta_y = sqrt(m) (dy + c dtheta_IBx)``
    with ``c = N_z_bar / k``; the transformation is a congruence, so
    ``M`` stays symmetric. With ``k = m omega0^2`` the result coincides with
    :func:`build_modal`; with ``Fz_bar = 0`` it is the zero-force model.
    """
    phys = build_msd_physical(system, cfg, k)
    params = msd_params(system, cfg, k)
    size = phys.size
    T = np.eye(size)
    for i, e in enumerate(params):
        k_ = slice(6 + 2 * i, 8 + 2 * i)
        sm = math.sqrt(e.m_P)
        T[k_, k_] = np.eye(2) / sm
        T[k_, :6] = (e.N_z_bar / e.k) * _SWING_FROM_BODY
    return LinearModel(
        T.T @ phys.M @ T, T.T @ phys.D @ T, T.T @ phys.K @ T,
        coordinate_labels(system.n, ("eta_x", "eta_y")),
        B_f=T.T @ phys.B_f, L=phys.L, form="modal",
    )


def zero_g_participation(system: SloshSystem) -> tuple[np.ndarray, ...]:
    """``L_0g = sqrt(m) [I_3 | -skew(rbar_GbarP)]`` for each mass (3x6)."""
    return tuple(
        math.sqrt(p.mass) * np.hstack([np.eye(3), -skew(system.mass_from_gbar(i))])
        for i, p in enumerate(system.pendulums)
    )


__all__ = [
    "NominalConfig",
    "ModalConstants",
    "LinearModel",
    "MsdParams",
    "DampingMap",
    "RIGID_LABELS",
    "input_map",
    "coordinate_labels",
    "com_shift",
    "nominal_accel",
    "participation",
    "modal_constants",
    "build_physical_single",
    "modal_transforms",
    "to_modal",
    "build_modal",
    "modal_transform_check",
    "damping_map",
    "msd_params",
    "build_msd_physical",
    "build_msd_modal",
    "zero_g_participation",
]
