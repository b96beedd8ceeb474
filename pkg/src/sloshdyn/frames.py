"""Frame conventions, small-matrix primitives and pendulum kinematics.

Conventions
-----------
``R_AB`` maps components from frame B to frame A (``v_A = R_AB @ v_B``).
Attitude quaternions are scalar-first ``(w, x, y, z)`` and represent the
body-to-inertial rotation ``R_IB``.

The pendulum frame P is reached from the fulcrum frame Q by a rotation of
``phi`` about ``x_Q`` followed by a rotation of ``theta`` about ``-y_P``. The
point mass sits at ``-l * z_P`` from the fulcrum.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

E_X = np.array([1.0, 0.0, 0.0])
E_Y = np.array([0.0, 1.0, 0.0])
E_Z = np.array([0.0, 0.0, 1.0])

#: Quaternion norm tolerance used by :func:`as_unit_quat`.
QUAT_NORM_TOL = 1e-12


class PendulumAngles(NamedTuple):
    """Pendulum swing angles and rates [rad, rad/s]."""

    theta: float
    phi: float
    theta_dot: float = 0.0
    phi_dot: float = 0.0


def skew(v) -> np.ndarray:
    """Cross-product matrix, ``skew(v) @ u == cross(v, u)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def batch_cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product along the last axis with broadcasting.

    Equivalent to ``np.cross`` but much cheaper for the small stacks used
    in the equations of motion.
    """
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def dyad(a, b) -> np.ndarray:
    """Dyadic (outer) product ``a b^T``."""
    return np.outer(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def rot_qp(theta: float, phi: float) -> np.ndarray:
    """DCM from the pendulum frame P to the fulcrum frame Q."""
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    return np.array(
        [
            [ct, 0.0, -st],
            [-st * sp, cp, -ct * sp],
            [st * cp, sp, ct * cp],
        ]
    )


def pend_position(theta: float, phi: float, length: float) -> np.ndarray:
    """Position of the pendulum mass relative to its fulcrum, in Q axes."""
    if not length > 0.0:
        raise ValueError(f"pendulum length must be positive, got {length!r}")
    ct = math.cos(theta)
    return length * np.array(
        [math.sin(theta), ct * math.sin(phi), -ct * math.cos(phi)]
    )


def pend_rates(angles: PendulumAngles) -> tuple[np.ndarray, np.ndarray]:
    """Angular rate of P relative to Q, in P axes, and its acceleration-free part.

    Returns
    -------
    omega_qp : ndarray (3,)
    omega_dot_partial : ndarray (3,)
        The part of ``d/dt omega_qp`` that does not multiply ``theta_ddot`` or
        ``phi_ddot``.
    """
    theta, _, theta_dot, phi_dot = angles
    st, ct = math.sin(theta), math.cos(theta)
    omega = np.array([phi_dot * ct, -theta_dot, -phi_dot * st])
    partial = np.array([-phi_dot * theta_dot * st, 0.0, -phi_dot * theta_dot * ct])
    return omega, partial


def pend_angular_accel(angles: PendulumAngles, theta_ddot: float, phi_ddot: float) -> np.ndarray:
    """Full ``d/dt omega_qp`` in P axes for given swing accelerations."""
    theta = angles.theta
    _, partial = pend_rates(angles)
    return partial + np.array(
        [phi_ddot * math.cos(theta), -theta_ddot, -phi_ddot * math.sin(theta)]
    )


# --- quaternions ------------------------------------------------------------


def quat_to_dcm(q) -> np.ndarray:
    """DCM of a unit quaternion ``(w, x, y, z)``; rotates body to inertial."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def dcm_to_quat(R) -> np.ndarray:
    """Quaternion ``(w, x, y, z)`` with ``w >= 0`` for a proper rotation matrix."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    # Shepperd: pivot on the largest of (w, x, y, z) for stability
    k = int(np.argmax([tr, R[0, 0], R[1, 1], R[2, 2]]))
    if k == 0:
        s = 2.0 * math.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_multiply(p, q) -> np.ndarray:
    """Hamilton product ``p * q`` (so that ``R(p*q) = R(p) @ R(q)``)."""
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ]
    )


def quat_derivative(q, omega_body) -> np.ndarray:
    """Time derivative of ``q`` for a body angular rate given in body axes."""
    return 0.5 * quat_multiply(q, (0.0, *omega_body))


def quat_from_rotvec(rv) -> np.ndarray:
    """Quaternion of the rotation vector ``rv`` (axis times angle)."""
    rv = np.asarray(rv, dtype=float)
    angle = float(np.linalg.norm(rv))
    if angle < 1e-8:
        # second-order series keeps the step exact for finite-difference stencils
        half = 0.5 * rv
        q = np.array([1.0 - 0.125 * angle * angle, *half])
        return q / np.linalg.norm(q)
    axis = rv / angle
    return np.array([math.cos(0.5 * angle), *(math.sin(0.5 * angle) * axis)])


def as_unit_quat(q) -> np.ndarray:
    """Validate that ``q`` is a finite unit quaternion and return it as an array."""
    q = np.asarray(q, dtype=float)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise ValueError(f"attitude quaternion must be 4 finite numbers, got {q!r}")
    if abs(np.linalg.norm(q) - 1.0) > QUAT_NORM_TOL:
        raise ValueError(f"attitude quaternion must have unit norm, |q| = {np.linalg.norm(q)!r}")
    return q


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(np.allclose(R @ R.T, np.eye(3), atol=tol) and abs(np.linalg.det(R) - 1.0) < tol)
