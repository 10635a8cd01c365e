"""Headless deterministic multirotor simulator.

Submodules: :mod:`frames` (quaternions, ENU/NED), :mod:`dynamics` (rigid body,
rotors, RK4), :mod:`sensors`, :mod:`control` (geometric controller),
:mod:`mavlink` (v2 codec and HIL bridge), :mod:`scenario` and :mod:`runner`.
"""

from .control import ControllerGains, FlatReference, GeometricBackend, RelayPath, ScriptBackend, relay_trajectory
from .dynamics import MultirotorParams, RigidBodyState, RotorCommand, Wrench, step, step_wrench
from .runner import RunSummary, SimulationError, Vehicle, VehicleManager, run
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario
from .sensors import GeoOrigin, SensorNoiseConfig, SensorSuite

__version__ = "0.1.0"

__all__ = [
    "ControllerGains",
    "FlatReference",
    "GeoOrigin",
    "GeometricBackend",
    "MultirotorParams",
    "RelayPath",
    "RigidBodyState",
    "RotorCommand",
    "RunSummary",
    "Scenario",
    "ScenarioError",
    "ScriptBackend",
    "SensorNoiseConfig",
    "SensorSuite",
    "SimulationError",
    "Vehicle",
    "VehicleManager",
    "Wrench",
    "load_scenario",
    "parse_scenario",
    "relay_trajectory",
    "run",
    "step",
    "step_wrench",
]
