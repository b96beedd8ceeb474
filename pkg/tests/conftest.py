from __future__ import annotations

from importlib import resources

import numpy as np
import pytest

from sloshdyn.config import parse_scenario
from sloshdyn.linmodel import NominalConfig
from sloshdyn.system import Pendulum, SloshSystem


def scenario_path(name: str):
    return resources.files("sloshdyn") / "scenarios" / name


def unit_rig(q: float = 0.0, fulcrum=(0.0, 0.0, 0.5)) -> SloshSystem:
    """m_B = 9 kg, J = 5 I about Gbar, one 1 kg pendulum of 1 m hanging 0.5 m above Gbar."""
    return SloshSystem.from_gbar(9.0, 5.0 * np.eye(3), [Pendulum(1.0, 1.0, fulcrum, damping=q)])


def random_system(rng: np.random.Generator, n: int, damped: bool = False) -> SloshSystem:
    pends = [
        Pendulum(
            rng.uniform(0.2, 3.0),
            rng.uniform(0.2, 1.5),
            rng.uniform(-1.0, 1.0, 3),
            damping=rng.uniform(0.0, 2.0) if damped else 0.0,
        )
        for _ in range(n)
    ]
    A = rng.normal(size=(3, 3))
    J = 50.0 * np.eye(3) + A @ A.T
    return SloshSystem.from_gbar(rng.uniform(20.0, 200.0), J, pends)


@pytest.fixture
def unit():
    return unit_rig()


@pytest.fixture(scope="session")
def four_rig_config():
    return parse_scenario(scenario_path("four_pendulum_rig.json"))


@pytest.fixture(scope="session")
def four_rig(four_rig_config):
    return four_rig_config.system()


@pytest.fixture
def thrust():
    return NominalConfig(10.0, "inertial")
