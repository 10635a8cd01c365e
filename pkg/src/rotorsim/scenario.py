"""Versioned JSON scenario format.

Example (every field except ``vehicles[].name`` has a default)::

    {
      "schema_version": 1,
      "duration": 12.0,
      "physics_dt": 0.004,
      "seed": 7,
      "vehicles": [
        {"name": "alpha",
         "trajectory": {"type": "relay", "s": 0.6, "t_start": -3.0},
         "backend": {"type": "geometric"}}
      ]
    }

Validation failures raise :class:`ScenarioError` whose message lists each
problem with its dotted field path, e.g. ``vehicles.1.name: duplicate ...``.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dynamics import MAX_DT, MultirotorParams
from .sensors import DEFAULT_RATES, SENSOR_ORDER, GeoOrigin, SensorNoiseConfig

SCHEMA_VERSION = 1

Vec3 = Annotated[list[float], Field(min_length=3, max_length=3)]


class ScenarioError(ValueError):
    pass


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class OriginConfig(_Model):
    lat0: float = Field(47.397742, ge=-90, le=90)
    lon0: float = Field(8.545594, ge=-180, le=180)
    alt0: float = 488.0
    declination_deg: float = 2.5
    inclination_deg: float = Field(63.5, gt=-90, lt=90)
    strength_gauss: float = Field(0.48, ge=0)

    def build(self) -> GeoOrigin:
        return GeoOrigin(
            lat0=self.lat0,
            lon0=self.lon0,
            alt0=self.alt0,
            declination=math.radians(self.declination_deg),
            inclination=math.radians(self.inclination_deg),
            strength=self.strength_gauss,
        )


class ParamsConfig(_Model):
    mass: float = Field(1.5, gt=0)
    inertia: Vec3 = [0.029, 0.029, 0.055]
    drag: Vec3 = [0.26, 0.26, 0.0]
    arm_length: float = Field(0.25, gt=0)
    rotor_positions: Optional[list[Vec3]] = None
    c_thrust: float = Field(8.55e-6, gt=0)
    k_torque: float = 0.06
    max_rotor_speed: float = Field(1100.0, gt=0)
    g: float = Field(9.81, gt=0)

    def build(self) -> MultirotorParams:
        kwargs = dict(
            mass=self.mass,
            inertia=self.inertia,
            drag=self.drag,
            c_thrust=self.c_thrust,
            k_torque=self.k_torque,
            max_rotor_speed=self.max_rotor_speed,
            g=self.g,
        )
        if self.rotor_positions is None:
            return MultirotorParams.quad_x(self.arm_length, **kwargs)
        n = len(self.rotor_positions)
        return MultirotorParams(
            rotor_positions=self.rotor_positions,
            spin_signs=[1 if i % 2 == 0 else -1 for i in range(n)],
            **kwargs,
        )

    @model_validator(mode="after")
    def _check_vehicle(self):
        try:
            self.build()
        except ValueError as exc:
            raise ValueError(str(exc)) from None
        return self


class InitialStateConfig(_Model):
    position: Vec3 = [0.0, 0.0, 0.0]
    velocity: Vec3 = [0.0, 0.0, 0.0]
    attitude: Annotated[list[float], Field(min_length=4, max_length=4)] = [0.0, 0.0, 0.0, 1.0]
    angular_velocity: Vec3 = [0.0, 0.0, 0.0]

    @field_validator("attitude")
    @classmethod
    def _unit(cls, q):
        n = math.sqrt(sum(c * c for c in q))
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"attitude quaternion must be unit norm (got norm {n:.9f})")
        return q


class RelayTrajectoryConfig(_Model):
    type: Literal["relay"]
    s: float = Field(0.6, gt=0)
    t_start: float = -3.0
    mirror_x: bool = False
    mirror_y: bool = False
    offset: Vec3 = [0.0, 0.0, 0.0]


class HoverTrajectoryConfig(_Model):
    type: Literal["hover"]
    position: Vec3 = [0.0, 0.0, 1.0]


TrajectoryConfig = Annotated[Union[RelayTrajectoryConfig, HoverTrajectoryConfig], Field(discriminator="type")]


class GainsConfig(_Model):
    kp: Vec3 = [12.0, 12.0, 15.0]
    kv: Vec3 = [6.0, 6.0, 7.5]
    kR: Vec3 = [2.0, 2.0, 0.5]
    kw: Vec3 = [0.25, 0.25, 0.12]

    @field_validator("kp", "kv", "kR", "kw")
    @classmethod
    def _non_negative(cls, v):
        if any(c < 0 for c in v):
            raise ValueError("gains must be non-negative")
        return v


class GeometricBackendConfig(_Model):
    type: Literal["geometric"]
    gains: GainsConfig = GainsConfig()
    drag_compensation: bool = True


class MavlinkBackendConfig(_Model):
    type: Literal["mavlink"]
    local: str = "udp:0.0.0.0:4560"
    remote: Optional[str] = None
    lockstep: bool = True
    timeout: float = Field(1.0, gt=0)

    @field_validator("local", "remote")
    @classmethod
    def _endpoint(cls, v):
        if v is not None:
            from .mavlink.hil import parse_endpoint

            parse_endpoint(v)
        return v


class ScriptBackendConfig(_Model):
    type: Literal["script"]
    speeds: Optional[list[Annotated[float, Field(ge=0)]]] = None


BackendConfig = Annotated[
    Union[GeometricBackendConfig, MavlinkBackendConfig, ScriptBackendConfig], Field(discriminator="type")
]


class NoiseConfig(_Model):
    baro_white: float = Field(1.0, ge=0)
    baro_walk: float = Field(0.01, ge=0)
    mag_white: float = Field(0.004, ge=0)
    mag_walk: float = Field(0.0001, ge=0)
    gyro_white: float = Field(0.0003, ge=0)
    gyro_walk: float = Field(0.00003, ge=0)
    accel_white: float = Field(0.02, ge=0)
    accel_walk: float = Field(0.0005, ge=0)
    gps_white: float = Field(0.3, ge=0)
    gps_walk: float = Field(0.005, ge=0)
    gps_velocity_white: float = Field(0.05, ge=0)

    def build(self) -> SensorNoiseConfig:
        return SensorNoiseConfig(**self.model_dump())


class SensorsConfig(_Model):
    enabled: bool = True
    rates: dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_RATES))
    noise: NoiseConfig = NoiseConfig()
    mag_convention: Literal["NED", "ENU"] = "NED"

    @field_validator("rates")
    @classmethod
    def _rates(cls, rates):
        unknown = sorted(set(rates) - set(SENSOR_ORDER))
        if unknown:
            raise ValueError(f"unknown sensor(s) {unknown}; expected a subset of {list(SENSOR_ORDER)}")
        for name, r in rates.items():
            if not r > 0:
                raise ValueError(f"rate for {name} must be positive")
        return rates


class VehicleConfig(_Model):
    name: str = Field(min_length=1)
    params: ParamsConfig = ParamsConfig()
    initial_state: Optional[InitialStateConfig] = None
    trajectory: Optional[TrajectoryConfig] = None
    backend: BackendConfig = GeometricBackendConfig(type="geometric")
    sensors: SensorsConfig = SensorsConfig()


class TelemetryConfig(_Model):
    decimation: int = Field(1, ge=1)


class Scenario(_Model):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "scenario"
    duration: float = Field(10.0, gt=0)
    physics_dt: float = Field(0.004, gt=0, le=MAX_DT)
    seed: int = Field(0, ge=0)
    origin: OriginConfig = OriginConfig()
    vehicles: list[VehicleConfig] = Field(min_length=1)
    telemetry: TelemetryConfig = TelemetryConfig()
    output_dir: str = "out"

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.physics_dt))

    def problems(self) -> list[tuple[str, str]]:
        """Cross-field checks, as ``(field path, message)`` pairs."""
        out = []
        steps = self.duration / self.physics_dt
        if abs(steps - round(steps)) > 1e-6:
            out.append(("duration", f"{self.duration} s is not a whole number of {self.physics_dt} s physics steps"))
        seen = set()
        for i, v in enumerate(self.vehicles):
            if v.name in seen:
                out.append((f"vehicles.{i}.name", f"duplicate vehicle name {v.name!r}; names must be unique"))
            seen.add(v.name)
            for sensor, rate in v.sensors.rates.items():
                if rate * self.physics_dt > 1.0 + 1e-9:
                    out.append((
                        f"vehicles.{i}.sensors.rates.{sensor}",
                        f"{rate} Hz exceeds the physics rate {1.0 / self.physics_dt:g} Hz",
                    ))
            if v.backend.type == "script" and v.backend.speeds is not None:
                n = v.params.build().n_rotors
                if len(v.backend.speeds) != n:
                    out.append((f"vehicles.{i}.backend.speeds", f"need {n} entries, got {len(v.backend.speeds)}"))
        return out

    def with_overrides(self, duration: float | None = None, seed: int | None = None,
                       output_dir: str | None = None, mavlink: str | None = None) -> "Scenario":
        """Copy with CLI overrides applied and re-validated.

        ``mavlink`` (``udp:HOST:PORT``) switches every vehicle to the MAVLink
        backend, vehicle ``i`` listening on ``PORT + i``.
        """
        data = self.model_dump()
        if mavlink is not None:
            from .mavlink.hil import parse_endpoint

            try:
                host, port = parse_endpoint(mavlink)
            except ValueError as exc:
                raise ScenarioError(f"--mavlink: {exc}") from None
            for i, v in enumerate(data["vehicles"]):
                v["backend"] = {"type": "mavlink", "local": f"udp:{host}:{port + i}"}
        if duration is not None:
            data["duration"] = duration
        if seed is not None:
            data["seed"] = seed
        if output_dir is not None:
            data["output_dir"] = output_dir
        return _validate(data)


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        # drop the discriminator tag pydantic inserts into union paths
        loc = ".".join(str(p) for p in err["loc"] if p not in ("relay", "hover", "geometric", "mavlink", "script"))
        msg = err["msg"]
        if err["type"] == "extra_forbidden":
            msg = "unknown field"
        elif err["type"] == "missing":
            msg = "missing required field"
        lines.append(f"{loc or '<root>'}: {msg}")
    return "; ".join(lines)


def _validate(data) -> Scenario:
    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(_format_errors(exc)) from None
    problems = scenario.problems()
    if problems:
        raise ScenarioError("; ".join(f"{path}: {msg}" for path, msg in problems))
    return scenario


def parse_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"<root>: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ScenarioError("<root>: scenario must be a JSON object")
    return _validate(data)


def builtin_scenarios() -> list[str]:
    pkg = resources.files("rotorsim") / "scenarios"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def load_scenario(path_or_name: str | Path) -> Scenario:
    """Load a scenario file, falling back to a bundled scenario of that name."""
    path = Path(path_or_name)
    if path.is_file():
        return parse_scenario(path.read_text())
    name = str(path_or_name)
    if name in builtin_scenarios():
        return parse_scenario((resources.files("rotorsim") / "scenarios" / f"{name}.json").read_text())
    raise ScenarioError(f"scenario file {str(path_or_name)!r} not found (bundled: {', '.join(builtin_scenarios())})")
