"""JSON scenario files: schema, validation and conversion to model objects."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .frames import is_rotation
from .linmodel import NominalConfig, damping_map
from .propagate import InputProfile, Scenario, SimSettings
from .system import Pendulum, RigidBody, SloshSystem, SystemState

Vec3 = tuple[float, float, float]
Mat3 = tuple[Vec3, Vec3, Vec3]
Pair = tuple[float, float]

_IDENTITY: Mat3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
QUAT_TOL = 1e-9


class ConfigError(ValueError):
    """Scenario file could not be read or violates the schema; ``errors`` lists each problem."""

    def __init__(self, errors: list[str], source: str = "scenario"):
        self.errors = errors
        super().__init__(f"{source}: " + "; ".join(errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BodyConfig(_Strict):
    mass: float = Field(gt=0)
    inertia: Mat3
    inertia_about: Literal["B", "Gbar"] = "B"

    @field_validator("inertia")
    @classmethod
    def _spd(cls, v):
        J = np.asarray(v, dtype=float)
        if not np.allclose(J, J.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(J).max())):
            raise ValueError("inertia must be symmetric")
        if np.linalg.eigvalsh(J).min() <= 0:
            raise ValueError("inertia must be positive definite")
        return v


class PendulumConfig(_Strict):
    mass: float = Field(gt=0)
    length: float = Field(gt=0)
    fulcrum: Vec3
    fulcrum_dcm: Mat3 = _IDENTITY
    damping_q: Optional[float] = Field(default=None, ge=0)
    damping_xi: Optional[float] = Field(default=None, ge=0)

    @field_validator("fulcrum_dcm")
    @classmethod
    def _rotation(cls, v):
        if not is_rotation(np.asarray(v, dtype=float)):
            raise ValueError("fulcrum_dcm must be a proper rotation matrix")
        return v

    @model_validator(mode="after")
    def _one_damping(self):
        if self.damping_q is not None and self.damping_xi is not None:
            raise ValueError("give at most one of damping_q and damping_xi")
        return self


class InitialStateConfig(_Strict):
    position: Vec3 = (0.0, 0.0, 0.0)
    velocity: Vec3 = (0.0, 0.0, 0.0)
    attitude_quat: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    omega: Vec3 = (0.0, 0.0, 0.0)
    pendulum_angles: Optional[list[Pair]] = None
    pendulum_rates: Optional[list[Pair]] = None

    @field_validator("attitude_quat")
    @classmethod
    def _unit(cls, v):
        norm = math.sqrt(sum(c * c for c in v))
        if abs(norm - 1.0) > QUAT_TOL:
            raise ValueError(f"attitude_quat must have unit norm (|q| = {norm!r})")
        return v


class InputsConfig(_Strict):
    force_frame: Literal["inertial", "body"] = "inertial"
    force_profile: Optional[list[tuple[float, float, float, float]]] = None
    torque_profile: Optional[list[tuple[float, float, float, float]]] = None
    interpolation: Literal["linear", "zoh"] = "linear"

    @model_validator(mode="after")
    def _profiles(self):
        InputProfile(self.force_profile, self.torque_profile, self.force_frame, self.interpolation)
        return self


class NominalSection(_Strict):
    Fz_bar: float = Field(ge=0)
    force_frame: Literal["inertial", "body"] = "inertial"


class SimConfig(_Strict):
    t0: float = 0.0
    tf: float = 10.0
    dt: float = Field(default=1e-3, gt=0)

    @model_validator(mode="after")
    def _grid(self):
        SimSettings(self.t0, self.tf, self.dt)
        return self


class ScenarioConfig(_Strict):
    """Top-level scenario.

    Fulcrum positions are measured from the point named by
    ``body.inertia_about``: the body center of mass ``B`` or the nominal
    composite center of mass ``Gbar``. ``initial_state.position`` and
    ``velocity`` always refer to ``B``.
    """

    body: BodyConfig
    pendulums: list[PendulumConfig] = []
    gravity: Vec3 = (0.0, 0.0, 0.0)
    initial_state: InitialStateConfig = InitialStateConfig()
    inputs: InputsConfig = InputsConfig()
    nominal: Optional[NominalSection] = None
    sim: SimConfig = SimConfig()

    @model_validator(mode="after")
    def _consistency(self):
        n = len(self.pendulums)
        for name in ("pendulum_angles", "pendulum_rates"):
            rows = getattr(self.initial_state, name)
            if rows is not None and len(rows) != n:
                raise ValueError(f"initial_state.{name} needs {n} rows, got {len(rows)}")
        for i, p in enumerate(self.pendulums):
            if p.damping_xi is not None and (self.nominal is None or self.nominal.Fz_bar <= 0):
                raise ValueError(f"pendulums[{i}].damping_xi requires nominal.Fz_bar > 0")
        if self.body.inertia_about == "Gbar":
            # the body inertia about its own CoM must stay positive definite
            self.system()
        return self

    # --- conversion ---------------------------------------------------

    def _geometry(self) -> SloshSystem:
        pends = [
            Pendulum(p.mass, p.length, p.fulcrum, np.asarray(p.fulcrum_dcm, dtype=float), p.damping_q or 0.0)
            for p in self.pendulums
        ]
        if self.body.inertia_about == "Gbar":
            return SloshSystem.from_gbar(self.body.mass, np.asarray(self.body.inertia, dtype=float), pends)
        return SloshSystem(RigidBody(self.body.mass, np.asarray(self.body.inertia, dtype=float)), tuple(pends))

    def nominal_config(self, Fz_bar: float | None = None, force_frame: str | None = None) -> NominalConfig:
        if Fz_bar is None:
            if self.nominal is None:
                raise ValueError("no nominal section in the scenario and no Fz given")
            Fz_bar = self.nominal.Fz_bar
        if force_frame is None:
            force_frame = self.nominal.force_frame if self.nominal is not None else "inertial"
        return NominalConfig(float(Fz_bar), force_frame)

    def system(self) -> SloshSystem:
        """Model objects with every ``damping_xi`` converted to ``q`` at the nominal force."""
        system = self._geometry()
        xi = [p.damping_xi for p in self.pendulums]
        if any(x is not None for x in xi):
            q = damping_map(system, self.nominal_config(), xi=[x or 0.0 for x in xi]).q
            q = [qi if x is not None else (p.damping_q or 0.0) for qi, x, p in zip(q, xi, self.pendulums)]
            system = system.with_damping(q)
        return system

    def initial(self) -> SystemState:
        s = self.initial_state
        q = np.asarray(s.attitude_quat, dtype=float)
        return SystemState.create(
            len(self.pendulums), s.position, s.velocity, q / np.linalg.norm(q), s.omega,
            s.pendulum_angles, s.pendulum_rates,
        )

    def input_profile(self) -> InputProfile:
        i = self.inputs
        return InputProfile(i.force_profile, i.torque_profile, i.force_frame, i.interpolation)

    def settings(self) -> SimSettings:
        return SimSettings(self.sim.t0, self.sim.tf, self.sim.dt)

    def scenario(self) -> Scenario:
        return Scenario(self.system(), self.initial(), np.asarray(self.gravity, dtype=float),
                        self.input_profile(), self.settings())


def _path(loc) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += ("." if out else "") + str(part)
    return out or "<root>"


def _describe(err: dict) -> str:
    path = _path(err["loc"])
    kind = err["type"]
    ctx = err.get("ctx") or {}
    if kind == "greater_than":
        return f"{path} > {ctx['gt']:g} (got {err['input']!r})"
    if kind == "greater_than_equal":
        return f"{path} >= {ctx['ge']:g} (got {err['input']!r})"
    if kind == "extra_forbidden":
        return f"{path}: unknown field"
    if kind == "missing":
        return f"{path}: required field missing"
    msg = err["msg"].removeprefix("Value error, ")
    return f"{path}: {msg}"


def loads_scenario(text: str, source: str = "scenario") -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"], source) from None
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError([_describe(e) for e in exc.errors()], source) from None


def parse_scenario(path) -> ScenarioConfig:
    """Read and validate a JSON scenario file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read file: {exc.strerror}"], str(p)) from None
    return loads_scenario(text, str(p))


def dumps_scenario(cfg: ScenarioConfig) -> str:
    """Serialize with every default spelled out; parsing the result gives an equal config."""
    return json.dumps(cfg.model_dump(mode="json"), indent=2)


__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "BodyConfig",
    "PendulumConfig",
    "InitialStateConfig",
    "InputsConfig",
    "NominalSection",
    "SimConfig",
    "loads_scenario",
    "parse_scenario",
    "dumps_scenario",
]
