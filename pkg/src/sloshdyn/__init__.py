"""Rigid-body dynamics with spherical-pendulum slosh models.

Nonlinear simulation, analytic and finite-difference linear models,
frequency response and a scenario-driven command-line tool.
"""

from .dynamics import SingularityError, assemble, assemble_comG, solve_accel
from .linmodel import LinearModel, NominalConfig, build_modal, build_physical_single
from .propagate import InputProfile, Scenario, SimSettings, propagate
from .system import ExternalInputs, Pendulum, RigidBody, SloshSystem, SystemState

__version__ = "0.1.0"

__all__ = [
    "SingularityError",
    "assemble",
    "assemble_comG",
    "solve_accel",
    "LinearModel",
    "NominalConfig",
    "build_modal",
    "build_physical_single",
    "InputProfile",
    "Scenario",
    "SimSettings",
    "propagate",
    "ExternalInputs",
    "Pendulum",
    "RigidBody",
    "SloshSystem",
    "SystemState",
]
