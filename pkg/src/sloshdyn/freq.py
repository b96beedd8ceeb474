"""Frequency response, eigenmodes and the finite-difference linearization oracle."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import assemble_comG
from .frames import quat_from_rotvec, quat_multiply
from .linmodel import RIGID_LABELS, LinearModel, NominalConfig, coordinate_labels, nominal_accel
from .system import ExternalInputs, SloshSystem, SystemState

#: Dynamic stiffness matrices above this condition number are treated as singular.
SINGULAR_COND = 1e12

INPUT_LABELS = ("Fx", "Fy", "Fz", "Tx", "Ty", "Tz")


class ResonanceError(np.linalg.LinAlgError):
    def __init__(self, omega: float, cond: float):
        self.omega = omega
        self.cond = cond
        super().__init__(f"dynamic stiffness singular at omega = {omega:.17g} rad/s (cond {cond:.3e})")


class FdAccuracyError(RuntimeError):
    """Step-halving disagreement too large for the finite-difference result to be trusted."""


@dataclass(frozen=True)
class FreqGrid:
    """``points`` logarithmically spaced frequencies on ``[wmin, wmax]`` [rad/s]."""

    wmin: float
    wmax: float
    points: int

    def __post_init__(self):
        if not (self.wmin > 0 and np.isfinite(self.wmax)):
            raise ValueError(f"frequency bounds must be positive and finite, got {self.wmin!r}, {self.wmax!r}")
        if int(self.points) != self.points or self.points < 1:
            raise ValueError(f"points must be a positive integer, got {self.points!r}")
        if self.points > 1 and not self.wmax > self.wmin:
            raise ValueError("wmax must exceed wmin")

    @property
    def omega(self) -> np.ndarray:
        if self.points == 1:
            return np.array([float(self.wmin)])
        return np.logspace(np.log10(self.wmin), np.log10(self.wmax), int(self.points))


@dataclass(frozen=True)
class BodeData:
    """Complex gains ``gain[k, out, in]`` over ``omega``; ``valid`` is False at flagged points."""

    omega: np.ndarray
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    gain: np.ndarray
    valid: np.ndarray
    output_labels: tuple[str, ...] = RIGID_LABELS

    @property
    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            mag = 20.0 * np.log10(np.abs(self.gain))
        mag[~self.valid] = np.nan
        return mag

    def channel_names(self) -> list[str]:
        return [
            f"mag_db_{self.output_labels[o]}_{INPUT_LABELS[i]}" for o in self.outputs for i in self.inputs
        ]


@dataclass(frozen=True)
class FdSettings:
    """Central-difference steps per coordinate class."""

    position: float = 1e-6
    angle: float = 1e-6
    rate: float = 1e-6
    accel: float = 1e-6
    central: bool = True
    halving_tol: float = 1e-6

    def __post_init__(self):
        for name in ("position", "angle", "rate", "accel", "halving_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} step must be positive")

    def halved(self) -> "FdSettings":
        return FdSettings(self.position / 2, self.angle / 2, self.rate / 2, self.accel / 2,
                          self.central, self.halving_tol)


@dataclass(frozen=True)
class Eigenmodes:
    values: np.ndarray
    vectors: np.ndarray

    def count_nonzero(self, tol: float = 1e-6) -> int:
        return int(np.sum(np.abs(self.values) > tol))

    def frequencies(self, tol: float = 1e-6) -> np.ndarray:
        """Sorted natural frequencies ``|lambda|`` of the oscillatory pairs (``Im > 0``)."""
        lam = self.values
        osc = lam[(lam.imag > tol) & (np.abs(lam) > tol)]
        return np.sort(np.abs(osc))


def dynamic_stiffness(model: LinearModel, omega: float) -> np.ndarray:
    return -omega**2 * model.M + 1j * omega * model.D + model.K


def second_order_gain(model: LinearModel, omega: float) -> np.ndarray:
    """Response ``X`` to unit harmonic inputs: ``(-w^2 M + i w D + K) X = B_f``."""
    Z = dynamic_stiffness(model, omega)
    cond = float(np.linalg.cond(Z))
    if not cond <= SINGULAR_COND:
        raise ResonanceError(float(omega), cond)
    return np.linalg.solve(Z, model.B_f.astype(complex))


def bode_sweep(
    model: LinearModel,
    grid: FreqGrid,
    inputs: Sequence[int] = range(6),
    outputs: Sequence[int] = range(6),
) -> BodeData:
    """Gains of the selected channels; singular points are flagged, not raised."""
    inputs, outputs = tuple(inputs), tuple(outputs)
    for idx, bound, name in ((inputs, model.B_f.shape[1], "input"), (outputs, model.size, "output")):
        if not idx or min(idx) < 0 or max(idx) >= bound:
            raise ValueError(f"{name} indices {idx} out of range 0..{bound - 1}")
    w = grid.omega
    gain = np.full((w.size, len(outputs), len(inputs)), np.nan + 0j)
    valid = np.zeros(w.size, dtype=bool)
    for k, wk in enumerate(w):
        try:
            X = second_order_gain(model, wk)
        except ResonanceError:
            continue
        gain[k] = X[np.ix_(outputs, inputs)]
        valid[k] = True
    return BodeData(w, inputs, outputs, gain, valid, model.labels)


def gain_relative_error(a: BodeData, b: BodeData, floor: float = 1e-6) -> np.ndarray:
    """Per-point, per-channel ``|G_a - G_b| / max(|G_a|, floor * max_channel |G_a|)``.

    The floor keeps structurally zero channels from dividing by round-off.
    Points flagged in either sweep are NaN.
    """
    mag = np.abs(a.gain)
    ref = np.maximum(mag, floor * np.nanmax(mag, axis=(1, 2), keepdims=True))
    err = np.abs(a.gain - b.gain) / ref
    err[~(a.valid & b.valid)] = np.nan
    return err


def eigenmodes(model: LinearModel) -> Eigenmodes:
    """Eigen-decomposition of the companion matrix ``[[0, I], [-M^-1 K, -M^-1 D]]``."""
    n = model.size
    cond = float(np.linalg.cond(model.M))
    if not cond <= SINGULAR_COND:
        raise np.linalg.LinAlgError(f"mass matrix is singular (condition number {cond:.3e})")
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -np.linalg.solve(model.M, model.K)
    A[n:, n:] = -np.linalg.solve(model.M, model.D)
    values, vectors = np.linalg.eig(A)
    order = np.lexsort((values.imag, values.real))
    return Eigenmodes(values[order], vectors[:, order])


# --- finite-difference oracle ---------------------------------------------


def _residual_fn(system: SloshSystem, cfg: NominalConfig, gravity):
    n = system.n
    g = np.asarray(gravity, dtype=float)
    inputs = ExternalInputs(force=(0.0, 0.0, cfg.Fz_bar), gravity=g, force_frame=cfg.force_frame)
    q_bar = np.array([1.0, 0.0, 0.0, 0.0])
    acc_bar = np.zeros(6 + 2 * n)
    acc_bar[:3] = nominal_accel(system, cfg, g)

    def residual(x, xd, xdd):
        state = SystemState(
            x[:3].copy(), xd[:3].copy(),
            quat_multiply(quat_from_rotvec(x[3:6]), q_bar),
            xd[3:6].copy(),
            x[6:].reshape(n, 2).copy(), xd[6:].reshape(n, 2).copy(),
        )
        sys = assemble_comG(state, system, inputs)
        return sys.M @ (acc_bar + xdd) - sys.u

    return residual


def _jacobian(f, size: int, steps: np.ndarray, central: bool) -> np.ndarray:
    J = np.empty((size, size))
    base = None if central else f(np.zeros(size))
    for j in range(size):
        e = np.zeros(size)
        e[j] = steps[j]
        if central:
            J[:, j] = (f(e) - f(-e)) / (2.0 * steps[j])
        else:
            J[:, j] = (f(e) - base) / steps[j]
    return J


def _fd_matrices(system, cfg, gravity, settings: FdSettings):
    size = system.ndof
    res = _residual_fn(system, cfg, gravity)
    z = np.zeros(size)
    coord = np.full(size, settings.angle)
    coord[:3] = settings.position
    rate = np.full(size, settings.rate)
    accel = np.full(size, settings.accel)
    K = _jacobian(lambda d: res(d, z, z), size, coord, settings.central)
    D = _jacobian(lambda d: res(z, d, z), size, rate, settings.central)
    M = _jacobian(lambda d: res(z, z, d), size, accel, settings.central)
    return M, D, K, res(z, z, z)


def fd_linearize(
    system: SloshSystem,
    cfg: NominalConfig,
    gravity=(0.0, 0.0, 0.0),
    settings: FdSettings = FdSettings(),
) -> LinearModel:
    """Numerical ``(M, D, K)`` of the nonlinear Gbar model about the nominal.

    The result is in physical coordinates ``(dr, dtheta_IB, theta_i, phi_i)``
    for any number of pendulums; attitude perturbations are applied as
    small rotations ``exp(dtheta^) R_bar``. The computation is repeated with
    halved steps and rejected if the two disagree by more than
    ``settings.halving_tol`` relative to the largest matrix entry.
    """
    if not cfg.Fz_bar > 0:
        raise ValueError(f"the linearization nominal needs Fz_bar > 0, got {cfg.Fz_bar!r}")
    M, D, K, r0 = _fd_matrices(system, cfg, gravity, settings)
    scale = max(np.abs(M).max(), np.abs(K).max(), np.abs(D).max())
    if np.linalg.cond(M) > SINGULAR_COND:
        raise np.linalg.LinAlgError("nominal mass matrix is singular")
    if np.abs(r0).max() > 1e-9 * max(scale, np.abs(np.asarray(gravity)).max() * system.total_mass):
        raise ValueError(f"nominal is not an equilibrium (residual {np.abs(r0).max():.3e})")
    M2, D2, K2, _ = _fd_matrices(system, cfg, gravity, settings.halved())
    gap = max(np.abs(M - M2).max(), np.abs(D - D2).max(), np.abs(K - K2).max())
    if gap > settings.halving_tol * scale:
        raise FdAccuracyError(
            f"finite-difference step halving changed the result by {gap:.3e} "
            f"(> {settings.halving_tol:g} x {scale:.3e}); steps too small or too large"
        )
    return LinearModel(M, D, K, coordinate_labels(system.n, ("theta", "phi")), form="physical")


# --- output ---------------------------------------------------------------


def _fmt(x: float) -> str:
    # adding 0.0 turns -0.0 into 0.0 so structural zeros print uniformly
    return format(float(x) + 0.0, ".17g")


def write_bode_csv(path, data: BodeData) -> None:
    """``omega_rad_s`` then one ``mag_db_<out>_<in>`` column per channel; flagged points are ``nan``."""
    mag = data.magnitude_db
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega_rad_s", *data.channel_names()])
        for k, om in enumerate(data.omega):
            w.writerow([_fmt(om), *(_fmt(v) for v in mag[k].reshape(-1))])


def write_eigen_csv(path, modes: Eigenmodes) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re", "im"])
        for lam in modes.values:
            w.writerow([_fmt(lam.real), _fmt(lam.imag)])


__all__ = [
    "SINGULAR_COND",
    "INPUT_LABELS",
    "ResonanceError",
    "FdAccuracyError",
    "FreqGrid",
    "BodeData",
    "FdSettings",
    "Eigenmodes",
    "dynamic_stiffness",
    "second_order_gain",
    "bode_sweep",
    "gain_relative_error",
    "eigenmodes",
    "fd_linearize",
    "write_bode_csv",
    "write_eigen_csv",
]
