"""Self-consistency checks of the simulator and the linear models.

Every check returns a :class:`CheckResult` with the measured value and the
tolerance it was compared against, so a run can be reported or asserted on
in the same way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .dynamics import (
    assemble,
    mass_acceleration,
    pendulum_wrench,
    solve_accel,
    tensions,
    wrench_from_tension,
)
from .freq import fd_linearize
from .frames import quat_from_rotvec, quat_to_dcm
from .linmodel import (
    ALIGNMENT_TOL,
    NominalConfig,
    build_modal,
    build_msd_modal,
    build_physical_single,
    modal_transform_check,
    to_modal,
)
from .propagate import InputProfile, Scenario, SimSettings, diagnostics, propagate, relative_drift
from .system import ExternalInputs, SloshSystem, SystemState

Status = Literal["pass", "fail", "skip"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: Status
    value: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def line(self) -> str:
        return f"{self.name},{self.status},{self.value:.6e},{self.tolerance:.1e}"


def _result(name: str, value: float, tol: float, detail: str = "") -> CheckResult:
    ok = math.isfinite(value) and value <= tol
    return CheckResult(name, "pass" if ok else "fail", float(value), tol, detail)


def _skip(name: str, tol: float, detail: str) -> CheckResult:
    return CheckResult(name, "skip", float("nan"), tol, detail)


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.abs(b).max(), np.finfo(float).tiny)
    return float(np.abs(a - b).max() / scale)


def aligned(system: SloshSystem) -> bool:
    return all(np.abs(p.fulcrum_dcm - np.eye(3)).max() <= ALIGNMENT_TOL for p in system.pendulums)


# --- algebraic residuals ---------------------------------------------------


def random_state(system: SloshSystem, rng: np.random.Generator, max_angle: float = 1.2) -> SystemState:
    n = system.n
    return SystemState(
        rng.normal(size=3),
        rng.normal(size=3),
        quat_from_rotvec(rng.normal(size=3)),
        rng.normal(size=3),
        np.column_stack([rng.uniform(-max_angle, max_angle, n), rng.uniform(-math.pi, math.pi, n)]),
        rng.normal(size=(n, 2)),
    )


def random_inputs(rng: np.random.Generator) -> ExternalInputs:
    return ExternalInputs(
        force=10.0 * rng.normal(size=3),
        torque=rng.normal(size=3),
        gravity=rng.normal(size=3),
        force_frame=str(rng.choice(["inertial", "body"])),
    )


def damping_forces(state: SystemState, system: SloshSystem, sys) -> np.ndarray:
    """Swing damping force on each mass, inertial axes ``(n, 3)``."""
    R_IP = sys.blocks.R_IP
    q = system.arrays.damping
    return -q[:, None] * (state.rates[:, :1] * R_IP[:, :, 0] + state.rates[:, 1:] * R_IP[:, :, 1])


def residuals(state: SystemState, system: SloshSystem, inputs: ExternalInputs) -> dict[str, float]:
    """Relative residuals of one solved state.

    ``solve``: the assembled linear system. ``newton``: Newton's law for each
    mass with its acceleration from rigid-body kinematics. ``com``: the
    aggregate center-of-mass law. ``wrench``: the pendulum load obtained from
    the assembled blocks against the one obtained from the rod tension.
    """
    sys = assemble(state, system, inputs)
    acc = solve_accel(sys)
    M, u, x = sys.M, sys.u, acc.vector
    out = {"solve": float(np.linalg.norm(M @ x - u) / (np.linalg.norm(M) * np.linalg.norm(x) + np.linalg.norm(u)))}

    R_IB = quat_to_dcm(state.attitude)
    g = inputs.gravity
    N = tensions(sys, acc)
    Fd = damping_forces(state, system, sys)
    newton, wrench = 0.0, 0.0
    total = system.body.mass * (acc.rdd - g) - inputs.force_inertial(R_IB)
    scale = np.linalg.norm(system.body.mass * acc.rdd) + np.linalg.norm(inputs.force) + system.total_mass * np.linalg.norm(g)
    for i, p in enumerate(system.pendulums):
        a_p = mass_acceleration(state, system, acc, i)
        lhs = p.mass * a_p
        rhs = p.mass * g + N[i] * sys.blocks.R_IP[i, :, 2] + Fd[i]
        ref = np.linalg.norm(lhs) + p.mass * np.linalg.norm(g) + abs(N[i]) + np.linalg.norm(Fd[i])
        newton = max(newton, float(np.linalg.norm(lhs - rhs) / ref))
        total += lhs - p.mass * g - Fd[i]
        scale += np.linalg.norm(lhs) + np.linalg.norm(Fd[i])

        w1 = pendulum_wrench(sys, acc, i)
        w2 = wrench_from_tension(sys.blocks[i], N[i], lever_arm=p.fulcrum)
        w1v = np.concatenate([w1.force, w1.torque])
        wrench = max(wrench, float(np.linalg.norm(w1v - w2) / (np.linalg.norm(w1v) + np.linalg.norm(w2))))
    out["newton"] = newton
    out["com"] = float(np.linalg.norm(total) / scale)
    out["wrench"] = wrench
    return out


def residual_sweep(system: SloshSystem, count: int = 1000, seed: int = 0) -> dict[str, float]:
    """Worst residuals over ``count`` random states and loads (damping as configured)."""
    rng = np.random.default_rng(seed)
    worst = {"solve": 0.0, "newton": 0.0, "com": 0.0, "wrench": 0.0}
    for _ in range(count):
        r = residuals(random_state(system, rng), system, random_inputs(rng))
        for k, v in r.items():
            worst[k] = max(worst[k], v)
    return worst


# --- propagation checks -----------------------------------------------------


def falling_frame_energy(traj, system: SloshSystem, gravity) -> np.ndarray:
    """Kinetic energy seen from the frame falling with gravity at the initial CoM velocity.

    Uniform gravity does not act on the motion relative to this frame, so
    with zero inputs only the swing damping changes this energy.
    """
    g = np.asarray(gravity, dtype=float)
    first = diagnostics(traj.state(0), system, np.zeros(3))
    v0 = first.momentum / system.total_mass
    out = np.empty(traj.t.size)
    for k, t in enumerate(traj.t):
        s = traj.state(k)
        shift = v0 + g * (t - traj.t[0])
        moved = replace(s, velocity=s.velocity - shift)
        out[k] = diagnostics(moved, system, np.zeros(3)).energy
    return out


def convergence_ratio(
    scenario: Scenario,
    steps=(0.1, 0.05, 0.025, 0.0125, 0.00625),
    span: float = 1.0,
    floor: float = 1e-11,
) -> float:
    """Step-halving ratio ``|x(h) - x(h/2)| / |x(h/2) - x(h/4)|`` of the final state.

    Runs the scenario for ``span`` seconds with each step in ``steps`` (each
    half the previous) and reports the ratio of the finest pair whose
    smaller difference is still above ``floor * max(1, |x|)``, so that
    round-off does not masquerade as truncation error. NaN when no pair
    qualifies.
    """
    t0 = scenario.settings.t0
    finals = [propagate(replace(scenario, settings=SimSettings(t0, t0 + span, h))).states[-1] for h in steps]
    diffs = [float(np.linalg.norm(a - b)) for a, b in zip(finals, finals[1:])]
    limit = floor * max(1.0, float(np.linalg.norm(finals[-1])))
    ratio = float("nan")
    for coarse, fine in zip(diffs, diffs[1:]):
        if fine > limit:
            ratio = coarse / fine
    return ratio


# --- linear-model checks -----------------------------------------------------


def fd_match(system: SloshSystem, cfg: NominalConfig, gravity=(0.0, 0.0, 0.0)) -> dict[str, float]:
    """Relative mismatch of the FD-linearized model against the analytic one.

    Single pendulum: compared in physical coordinates. Otherwise the FD model
    is taken to modal form first.
    """
    fd = fd_linearize(system, cfg, gravity)
    if system.n == 1:
        ref = build_physical_single(system, cfg)
    else:
        fd = to_modal(fd, system)
        ref, _ = build_modal(system, cfg)
    scale = max(np.abs(ref.M).max(), np.abs(ref.K).max())
    return {
        "M": _rel(fd.M, ref.M),
        "D": float(np.abs(fd.D - ref.D).max() / max(np.abs(ref.D).max(), 1e-8 * scale)),
        "K": _rel(fd.K, ref.K),
    }


def msd_equivalence(system: SloshSystem, cfg: NominalConfig) -> float:
    modal, c = build_modal(system, cfg)
    k = system.arrays.mass * c.omega0_sq
    msd = build_msd_modal(system, cfg, k)
    return float(max(np.abs(msd.M - modal.M).max(), np.abs(msd.K - modal.K).max()))


# --- suite ---------------------------------------------------------------


TOL = {
    "energy": 1e-6,
    "dissipation": 1e-9,
    "momentum": 1e-8,
    "angular_momentum": 1e-8,
    "solve": 1e-10,
    "newton": 1e-9,
    "com": 1e-9,
    "wrench": 1e-9,
    "congruence": 1e-12,
    "msd": 1e-12,
    "fd_M": 1e-6,
    "fd_D": 1e-5,
    "fd_K": 1e-5,
    "convergence_low": 12.0,
    "convergence_high": 20.0,
}


def run_suite(
    system: SloshSystem,
    initial: SystemState,
    gravity,
    settings: SimSettings,
    nominal: NominalConfig | None,
    residual_count: int = 200,
) -> list[CheckResult]:
    """Run the checks applicable to a configuration, in a fixed order."""
    g = np.asarray(gravity, dtype=float)
    out: list[CheckResult] = []
    free = Scenario(system, initial, g, InputProfile(), settings)
    traj = propagate(free)
    damped = bool(np.any(system.arrays.damping > 0))
    if damped:
        e = falling_frame_energy(traj, system, g)
        rise = float(np.max(np.diff(e), initial=0.0)) / max(abs(e[0]), np.finfo(float).tiny)
        out.append(_result("dissipation", max(rise, 0.0), TOL["dissipation"], "largest relative energy increase per step"))
    else:
        scale = max(abs(traj.energy[0]), np.abs(traj.energy).max(), np.finfo(float).tiny)
        out.append(_result("energy", relative_drift(traj.energy, scale), TOL["energy"]))
    if not damped and not np.any(g):
        p_scale = max(np.linalg.norm(traj.momentum, axis=1).max(), system.total_mass * 1e-12)
        out.append(_result("momentum", relative_drift(traj.momentum, p_scale), TOL["momentum"]))
        L_scale = max(np.linalg.norm(traj.angular_momentum, axis=1).max(), 1e-12)
        out.append(_result("angular_momentum", relative_drift(traj.angular_momentum, L_scale), TOL["angular_momentum"]))
    else:
        reason = "damping acts on the masses only" if damped else "gravity changes momentum"
        out.append(_skip("momentum", TOL["momentum"], reason))
        out.append(_skip("angular_momentum", TOL["angular_momentum"], reason))

    worst = residual_sweep(system, residual_count) if system.n else {"solve": 0.0, "newton": 0.0, "com": 0.0, "wrench": 0.0}
    for key in ("solve", "newton", "com", "wrench"):
        out.append(_result(f"residual_{key}", worst[key], TOL[key]))

    linear_ok = nominal is not None and nominal.Fz_bar > 0 and aligned(system)
    why = "needs a nominal force > 0 and aligned fulcrum frames"
    if linear_ok and system.n == 1:
        phys = build_physical_single(system, nominal)
        modal, _ = build_modal(system, nominal)
        out.append(_result("congruence", modal_transform_check(phys, modal, system), TOL["congruence"]))
    else:
        out.append(_skip("congruence", TOL["congruence"], "single pendulum only; " + why))
    if linear_ok and system.n:
        out.append(_result("msd_equivalence", msd_equivalence(system, nominal), TOL["msd"]))
        m = fd_match(system, nominal, g)
        for key in ("M", "D", "K"):
            out.append(_result(f"fd_{key}", m[key], TOL[f"fd_{key}"]))
    else:
        out.append(_skip("msd_equivalence", TOL["msd"], why))
        for key in ("M", "D", "K"):
            out.append(_skip(f"fd_{key}", TOL[f"fd_{key}"], why))

    ratio = float("nan") if _still(free) else convergence_ratio(free)
    if math.isnan(ratio):
        out.append(_skip("convergence", TOL["convergence_high"], "no step pair above round-off"))
    else:
        lo, hi = TOL["convergence_low"], TOL["convergence_high"]
        status = "pass" if lo <= ratio <= hi else "fail"
        out.append(CheckResult("convergence", status, ratio, hi, f"expected in [{lo:g}, {hi:g}]"))
    return out


def _still(scenario: Scenario) -> bool:
    s = scenario.initial
    return not (np.any(s.omega) or np.any(s.angles) or np.any(s.rates))
