"""Nonlinear equations of motion of a rigid body with n spherical pendulums.

The coupled dynamics are written as ``M(x) xdd = u(x, xd)`` with the
acceleration vector ordered ``(r_dd, omega_dot, theta_dd_1, phi_dd_1, ...)``.
Each pendulum contributes a rank-one block ``A_i`` to the 6x6 rigid-body
block, a 2x6 coupling block ``B_i`` and a diagonal 2x2 block ``C_i``, so the
system is solved by one 6x6 factorization followed by n diagonal solves.

Two formulations are provided. :func:`assemble` uses the body center of mass
B as the translational reference point; :func:`assemble_comG` uses the
nominal composite center of mass Gbar, which is fixed in the body frame.

Per-pendulum quantities are computed for all pendulums at once as stacked
arrays (leading axis = pendulum index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frames import (
    PendulumAngles,
    batch_cross,
    pend_angular_accel,
    pend_rates,
    quat_derivative,
    quat_to_dcm,
    rot_qp,
    skew,
)
from .system import ExternalInputs, SloshSystem, SystemState

#: Swing angles closer than this to +-pi/2 are rejected [rad].
SINGULARITY_MARGIN = 1e-6


class SingularityError(ValueError):
    """A pendulum reached ``|theta| >= pi/2 - SINGULARITY_MARGIN``."""

    def __init__(self, index: int, theta: float, time: float | None = None):
        self.index = index
        self.theta = theta
        self.time = time
        where = "" if time is None else f" at t = {time:.17g} s"
        super().__init__(
            f"pendulum {index} singular{where}: |theta| = {abs(theta):.17g} rad "
            f">= pi/2 - {SINGULARITY_MARGIN:g}"
        )


class SingularSystemError(np.linalg.LinAlgError):
    """The reduced 6x6 rigid-body block could not be factorized."""

    def __init__(self, cond: float):
        self.cond = cond
        super().__init__(f"rigid-body block is singular (condition number {cond:.3e})")


@dataclass(frozen=True)
class PendulumTerms:
    """Auxiliary blocks of one pendulum plus the geometry they were built from."""

    A: np.ndarray  # (6, 6)
    B: np.ndarray  # (2, 6)
    C: np.ndarray  # (2,) diagonal of C_i
    a: np.ndarray  # (6,)
    b: np.ndarray  # (2,)
    v: np.ndarray  # (3,) velocity-dependent acceleration terms, P axes
    R_BP: np.ndarray
    R_IP: np.ndarray
    r_ref_p: np.ndarray  # mass position from the reference point, body axes
    g_p: np.ndarray  # gravity in P axes

    @property
    def lever(self) -> np.ndarray:
        """``r x z_P`` in body axes."""
        return np.cross(self.r_ref_p, self.R_BP[:, 2])


@dataclass(frozen=True)
class PendulumBlocks:
    """Stacked per-pendulum blocks; ``A_i = mass_i * col_i col_i^T``."""

    mass: np.ndarray  # (n,)
    col: np.ndarray  # (n, 6): (z_P^I, r x z_P^B)
    B: np.ndarray  # (n, 2, 6)
    C: np.ndarray  # (n, 2)
    a: np.ndarray  # (n, 6)
    b: np.ndarray  # (n, 2)
    v: np.ndarray  # (n, 3)
    R_BP: np.ndarray  # (n, 3, 3)
    R_IP: np.ndarray  # (n, 3, 3)
    r_ref_p: np.ndarray  # (n, 3)
    g_p: np.ndarray  # (n, 3)

    def __len__(self) -> int:
        return self.mass.shape[0]

    def A(self, i: int) -> np.ndarray:
        return self.mass[i] * np.outer(self.col[i], self.col[i])

    def __getitem__(self, i: int) -> PendulumTerms:
        return PendulumTerms(
            A=self.A(i), B=self.B[i], C=self.C[i], a=self.a[i], b=self.b[i], v=self.v[i],
            R_BP=self.R_BP[i], R_IP=self.R_IP[i], r_ref_p=self.r_ref_p[i], g_p=self.g_p[i],
        )


@dataclass(frozen=True)
class AssembledSystem:
    """``M xdd = u`` in block form.

    ``M_rigid = M_R + sum A_i`` and ``u_rigid = u_R + sum a_i``; the full
    matrices are available as :attr:`M` and :attr:`u`.
    """

    M_rigid: np.ndarray
    u_rigid: np.ndarray
    blocks: PendulumBlocks

    @property
    def n(self) -> int:
        return len(self.blocks)

    @property
    def terms(self) -> list[PendulumTerms]:
        return [self.blocks[i] for i in range(self.n)]

    @property
    def M(self) -> np.ndarray:
        n = self.n
        M = np.zeros((6 + 2 * n, 6 + 2 * n))
        M[:6, :6] = self.M_rigid
        for i in range(n):
            k = 6 + 2 * i
            M[k : k + 2, :6] = self.blocks.B[i]
            M[k, k], M[k + 1, k + 1] = self.blocks.C[i]
        return M

    @property
    def u(self) -> np.ndarray:
        return np.concatenate([self.u_rigid, self.blocks.b.reshape(-1)])


@dataclass(frozen=True)
class Accelerations:
    """Solution of ``M xdd = u``.

    ``rdd`` is the translational acceleration of the reference point in
    inertial axes, ``omega_dot`` the body angular acceleration in body axes.
    """

    rdd: np.ndarray
    omega_dot: np.ndarray
    pend: np.ndarray  # (n, 2): theta_dd, phi_dd

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.rdd, self.omega_dot, self.pend.reshape(-1)])

    @property
    def rigid(self) -> np.ndarray:
        return np.concatenate([self.rdd, self.omega_dot])


@dataclass(frozen=True)
class PendulumWrench:
    """Load of one pendulum on the body: force (inertial), torque about the reference point (body)."""

    force: np.ndarray
    torque: np.ndarray
    tension: float


def check_singularity(state: SystemState, time: float | None = None) -> None:
    limit = 0.5 * math.pi - SINGULARITY_MARGIN
    for i, theta in enumerate(state.angles[:, 0]):
        if not abs(theta) < limit:
            raise SingularityError(i, float(theta), time)


def _geometry(system: SloshSystem, angles: np.ndarray, R_IB: np.ndarray, ref):
    """Frames and mass positions of all pendulums."""
    p = system.arrays
    th, ph = angles[:, 0], angles[:, 1]
    st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
    R_QP = np.empty((th.shape[0], 3, 3))
    R_QP[:, 0, 0], R_QP[:, 0, 1], R_QP[:, 0, 2] = ct, 0.0, -st
    R_QP[:, 1, 0], R_QP[:, 1, 1], R_QP[:, 1, 2] = -st * sp, cp, -ct * sp
    R_QP[:, 2, 0], R_QP[:, 2, 1], R_QP[:, 2, 2] = st * cp, sp, ct * cp
    R_BP = p.fulcrum_dcm @ R_QP
    R_IP = R_IB @ R_BP
    r_bp = p.fulcrum - p.length[:, None] * R_BP[:, :, 2]
    if ref is not None:
        r_bp = r_bp - ref
    return st, ct, R_BP, R_IP, r_bp


def pendulum_blocks(
    state: SystemState,
    system: SloshSystem,
    inputs: ExternalInputs,
    ref: np.ndarray | None = None,
    R_IB: np.ndarray | None = None,
) -> PendulumBlocks:
    """Auxiliary blocks of every pendulum.

    ``ref`` is the reference point relative to B in body axes (``None`` for
    B itself, ``r_BGbar`` for the nominal-CoM formulation); lever arms are
    measured from it. Swing damping enters ``b`` as ``-q * (theta_dot, phi_dot)``.
    """
    check_singularity(state)
    if R_IB is None:
        R_IB = quat_to_dcm(state.attitude)
    p = system.arrays
    m, l = p.mass, p.length
    omega = state.omega
    thd, phd = state.rates[:, 0], state.rates[:, 1]
    st, ct, R_BP, R_IP, r_bp = _geometry(system, state.angles, R_IB, ref)

    n = m.shape[0]
    w_qp = np.empty((n, 3))
    w_qp[:, 0], w_qp[:, 1], w_qp[:, 2] = phd * ct, -thd, -phd * st
    r_qp = np.zeros((n, 3))
    r_qp[:, 2] = -l
    w_ib_p = np.einsum("nji,j->ni", R_BP, omega)
    g_p = np.einsum("nji,j->ni", R_IP, inputs.gravity)

    centripetal = batch_cross(omega, batch_cross(omega, r_bp))
    w_x_r = batch_cross(w_qp, r_qp)
    v = -np.einsum("nji,nj->ni", R_BP, centripetal) - 2.0 * batch_cross(w_ib_p, w_x_r) - batch_cross(w_qp, w_x_r)
    v[:, 1] += l * thd * phd * st

    col = np.concatenate([R_IP[:, :, 2], batch_cross(r_bp, R_BP[:, :, 2])], axis=1)
    B = np.empty((n, 2, 6))
    B[:, 0, :3] = R_IP[:, :, 0]
    B[:, 0, 3:] = batch_cross(r_bp, R_BP[:, :, 0])
    B[:, 1, :3] = R_IP[:, :, 1]
    B[:, 1, 3:] = batch_cross(r_bp, R_BP[:, :, 1])
    B *= m[:, None, None]
    C = np.empty((n, 2))
    C[:, 0] = m * l
    C[:, 1] = m * l * ct
    a = (m * (g_p[:, 2] + v[:, 2]))[:, None] * col
    b = m[:, None] * (g_p[:, :2] + v[:, :2]) - p.damping[:, None] * state.rates
    return PendulumBlocks(m, col, B, C, a, b, v, R_BP, R_IP, r_bp, g_p)


def aux_terms(
    state: SystemState,
    system: SloshSystem,
    inputs: ExternalInputs,
    i: int,
    ref: np.ndarray | None = None,
) -> PendulumTerms:
    """Blocks ``A_i, B_i, C_i, a_i, b_i, v_i`` of pendulum ``i``."""
    return pendulum_blocks(state, system, inputs, ref=ref)[i]


def _rigid_block(system: SloshSystem, inertia: np.ndarray, omega, R_IB, inputs: ExternalInputs):
    m_b = system.body.mass
    M = np.zeros((6, 6))
    M[0, 0] = M[1, 1] = M[2, 2] = m_b
    M[3:, 3:] = inertia
    u = np.concatenate(
        [
            inputs.force_inertial(R_IB) + m_b * inputs.gravity,
            inputs.torque - batch_cross(omega, inertia @ omega),
        ]
    )
    return M, u


def _add_blocks(M, u, blocks: PendulumBlocks):
    M += np.einsum("n,ni,nj->ij", blocks.mass, blocks.col, blocks.col)
    u += blocks.a.sum(axis=0)


def assemble(state: SystemState, system: SloshSystem, inputs: ExternalInputs) -> AssembledSystem:
    """Mass matrix and right-hand side with B as the reference point.

    ``inputs.force`` acts at B, ``inputs.torque`` is the external torque.
    """
    R_IB = quat_to_dcm(state.attitude)
    M, u = _rigid_block(system, system.body.inertia, state.omega, R_IB, inputs)
    blocks = pendulum_blocks(state, system, inputs, R_IB=R_IB)
    _add_blocks(M, u, blocks)
    return AssembledSystem(M, u, blocks)


def assemble_comG(state: SystemState, system: SloshSystem, inputs: ExternalInputs) -> AssembledSystem:
    """Mass matrix and right-hand side with the nominal CoM Gbar as reference.

    ``state.position``/``velocity`` are those of Gbar, ``inputs.force`` is
    applied at Gbar and ``inputs.torque`` is the external torque about Gbar.
    The body inertia used is the body-only inertia about Gbar. Compared with
    :func:`assemble` this adds the coupling of the body mass offset
    ``r_BGbar`` (inertial coupling, centrifugal load and gravity torque).
    """
    R_IB = quat_to_dcm(state.attitude)
    r_bg = system.com_shift
    m_b = system.body.mass
    omega = state.omega
    M, u = _rigid_block(system, system.inertia_gbar, omega, R_IB, inputs)
    S = skew(r_bg)
    M[:3, 3:] += m_b * R_IB @ S
    M[3:, :3] -= m_b * S @ R_IB.T
    u[:3] += m_b * R_IB @ batch_cross(omega, batch_cross(omega, r_bg))
    u[3:] -= m_b * batch_cross(r_bg, R_IB.T @ inputs.gravity)
    blocks = pendulum_blocks(state, system, inputs, ref=r_bg, R_IB=R_IB)
    _add_blocks(M, u, blocks)
    return AssembledSystem(M, u, blocks)


def solve_accel(sys: AssembledSystem) -> Accelerations:
    """Block solve: the 6x6 rigid system first, then each pendulum's diagonal block."""
    if not (np.all(np.isfinite(sys.u_rigid)) and np.all(np.isfinite(sys.blocks.b))):
        raise FloatingPointError("non-finite loads in the equations of motion")
    try:
        rigid = np.linalg.solve(sys.M_rigid, sys.u_rigid)
    except np.linalg.LinAlgError:
        raise SingularSystemError(float(np.linalg.cond(sys.M_rigid))) from None
    if not np.all(np.isfinite(rigid)):
        raise SingularSystemError(float(np.linalg.cond(sys.M_rigid)))
    blk = sys.blocks
    pend = (blk.b - np.einsum("nkj,j->nk", blk.B, rigid)) / blk.C
    return Accelerations(rigid[:3], rigid[3:], pend)


def tensions(sys: AssembledSystem, acc: Accelerations) -> np.ndarray:
    """Rod tension of every pendulum (positive when the rod pulls the mass toward the fulcrum).

    Takes no damping input: swing damping acts orthogonally to the rod.
    """
    blk = sys.blocks
    return blk.mass * (blk.col @ acc.rigid - blk.g_p[:, 2] - blk.v[:, 2])


def tension(sys: AssembledSystem, acc: Accelerations, i: int) -> float:
    return float(tensions(sys, acc)[i])


def pendulum_wrench(sys: AssembledSystem, acc: Accelerations, i: int) -> PendulumWrench:
    """Force and torque pendulum ``i`` applies to the body, from ``a_i - A_i xdd_rigid``."""
    blk = sys.blocks
    w = blk.a[i] - blk.A(i) @ acc.rigid
    return PendulumWrench(w[:3], w[3:], tension(sys, acc, i))


def wrenches(sys: AssembledSystem, acc: Accelerations) -> np.ndarray:
    """``(n, 6)`` stacked pendulum wrenches."""
    return -tensions(sys, acc)[:, None] * sys.blocks.col


def wrench_from_tension(terms: PendulumTerms, N: float, lever_arm=None) -> np.ndarray:
    """``-N (z_P^I ; r x z_P^B)``.

    ``lever_arm`` defaults to the mass position; the fulcrum position gives
    the same torque since the two differ by a vector along the rod.
    """
    r = terms.r_ref_p if lever_arm is None else np.asarray(lever_arm, dtype=float)
    return -N * np.concatenate([terms.R_IP[:, 2], np.cross(r, terms.R_BP[:, 2])])


def mass_acceleration(
    state: SystemState, system: SloshSystem, acc: Accelerations, i: int, ref: np.ndarray | None = None
) -> np.ndarray:
    """Inertial acceleration of pendulum mass ``i`` from rigid-body kinematics.

    Built directly from the absolute acceleration kinematics (transport,
    Coriolis and relative terms), independently of the assembled blocks.
    """
    p = system.pendulums[i]
    theta, phi = state.angles[i]
    angles = PendulumAngles(theta, phi, *state.rates[i])
    R_IB = quat_to_dcm(state.attitude)
    R_BP = p.fulcrum_dcm @ rot_qp(theta, phi)
    R_IP = R_IB @ R_BP
    r_qp = np.array([0.0, 0.0, -p.length])
    r_bp = p.fulcrum + R_BP @ r_qp
    if ref is not None:
        r_bp = r_bp - ref
    W, Wd = skew(state.omega), skew(acc.omega_dot)
    w_qp, _ = pend_rates(angles)
    wd_qp = pend_angular_accel(angles, *acc.pend[i])
    S_qp, Sd_qp = skew(w_qp), skew(wd_qp)
    return (
        acc.rdd
        + R_IB @ (W @ W + Wd) @ r_bp
        + 2.0 * R_IB @ W @ R_BP @ S_qp @ r_qp
        + R_IP @ (S_qp @ S_qp + Sd_qp) @ r_qp
    )


def mass_kinematics(state: SystemState, system: SloshSystem, ref: np.ndarray | None = None):
    """Inertial positions and velocities ``(n, 3)`` of all pendulum masses."""
    R_IB = quat_to_dcm(state.attitude)
    p = system.arrays
    st, ct, R_BP, R_IP, r_bp = _geometry(system, state.angles, R_IB, ref)
    thd, phd = state.rates[:, 0], state.rates[:, 1]
    # relative velocity of the mass in P axes: omega_QP x (0, 0, -l)
    v_rel = np.zeros((thd.shape[0], 3))
    v_rel[:, 0], v_rel[:, 1] = p.length * thd, p.length * phd * ct
    pos = state.position + r_bp @ R_IB.T
    vel = (
        state.velocity
        + batch_cross(state.omega, r_bp) @ R_IB.T
        + np.einsum("nij,nj->ni", R_IP, v_rel)
    )
    return pos, vel


def body_state_to_gbar(state: SystemState, system: SloshSystem) -> SystemState:
    """Re-reference a body-CoM state to the nominal CoM Gbar."""
    R_IB = quat_to_dcm(state.attitude)
    r = system.com_shift
    return SystemState(
        state.position + R_IB @ r,
        state.velocity + R_IB @ np.cross(state.omega, r),
        state.attitude, state.omega, state.angles, state.rates,
    )


def gbar_state_to_body(state: SystemState, system: SloshSystem) -> SystemState:
    R_IB = quat_to_dcm(state.attitude)
    r = system.com_shift
    return SystemState(
        state.position - R_IB @ r,
        state.velocity - R_IB @ np.cross(state.omega, r),
        state.attitude, state.omega, state.angles, state.rates,
    )


def body_accel_from_gbar(state_g: SystemState, system: SloshSystem, acc: Accelerations) -> np.ndarray:
    """Acceleration of B given the Gbar-referenced solution."""
    R_IB = quat_to_dcm(state_g.attitude)
    r = system.com_shift
    w = state_g.omega
    return acc.rdd - R_IB @ (np.cross(w, np.cross(w, r)) + np.cross(acc.omega_dot, r))


def state_derivative(state: SystemState, system: SloshSystem, inputs: ExternalInputs) -> SystemState:
    """First-order time derivative for propagation (body-CoM formulation).

    The result reuses :class:`SystemState` as a container: ``attitude``
    holds the quaternion derivative, ``angles`` the swing rates and
    ``rates`` the swing accelerations.
    """
    acc = solve_accel(assemble(state, system, inputs))
    return SystemState(
        state.velocity.copy(),
        acc.rdd,
        quat_derivative(state.attitude, state.omega),
        acc.omega_dot,
        state.rates.copy(),
        acc.pend,
    )
