"""Vehicle manager and the fixed-step simulation loop.

Per physics tick ``k`` (``1..N``), every vehicle:

1. asks its control backend for rotor speeds (the backend has already seen
   the state and readings of tick ``k-1``),
2. integrates one RK4 step to ``t = k * dt``,
3. samples the sensors due at tick ``k`` and hands state and readings to
   the backend,
4. appends one telemetry row.

Vehicles never share mutable state, so stepping them serially or in worker
threads gives identical trajectories.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .control import (
    ControlBackend,
    ControllerGains,
    FlatReference,
    GeometricBackend,
    RelayPath,
    ScriptBackend,
    hover_reference,
)
from .dynamics import (
    MultirotorParams,
    RigidBodyState,
    linear_acceleration,
    step_wrench,
    wrench_from_command,
)
from .scenario import Scenario, VehicleConfig
from .sensors import SensorBatch, SensorSuite

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    pass


class DuplicateVehicleError(ValueError):
    pass


class VehicleNotFoundError(KeyError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


class TelemetryWriter:
    """One CSV per vehicle, header row first, floats at 17 significant digits."""

    def __init__(self, path: Path, columns: list[str]):
        self.path = Path(path)
        self.columns = columns
        self.rows = 0
        self._fh = open(self.path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(columns)

    def write(self, values: list) -> None:
        self._w.writerow([v if isinstance(v, str) else _fmt(v) for v in values])
        self.rows += 1

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def telemetry_columns(n_rotors: int) -> list[str]:
    cols = ["t", "vehicle"]
    cols += ["px", "py", "pz", "vx", "vy", "vz", "qx", "qy", "qz", "qw", "wx", "wy", "wz"]
    cols += ["ref_x", "ref_y", "ref_z", "err_x", "err_y", "err_z", "err_norm"]
    cols += [f"rotor_{i}" for i in range(n_rotors)]
    cols += ["saturated"]
    cols += ["baro_t", "baro_pressure", "baro_temperature", "baro_alt"]
    cols += ["mag_t", "mag_x", "mag_y", "mag_z"]
    cols += ["imu_t", "gyro_x", "gyro_y", "gyro_z", "acc_x", "acc_y", "acc_z"]
    cols += ["gps_t", "gps_lat", "gps_lon", "gps_alt", "gps_vx", "gps_vy", "gps_vz"]
    return cols


@dataclass
class ErrorStats:
    count: int = 0
    sum_sq: float = 0.0
    max: float = 0.0
    last: float = math.nan

    def add(self, e: float) -> None:
        self.count += 1
        self.sum_sq += e * e
        self.max = max(self.max, e)
        self.last = e

    @property
    def rms(self) -> float:
        return math.sqrt(self.sum_sq / self.count) if self.count else math.nan


class Vehicle:
    """A simulated multirotor: params, state, sensors and one control backend."""

    def __init__(
        self,
        name: str,
        params: MultirotorParams,
        backend: ControlBackend,
        state: RigidBodyState | None = None,
        sensors: SensorSuite | None = None,
        reference: Callable[[float], FlatReference] | None = None,
    ):
        self.name = name
        self.params = params
        self.backend = backend
        self.state = state or RigidBodyState()
        self.sensors = sensors
        self.reference = reference
        self.latest = SensorBatch(t=math.nan)
        self.last_speeds = np.zeros(params.n_rotors)
        self.last_saturated = False
        self.saturated_steps = 0
        self.errors = ErrorStats()
        self.telemetry: TelemetryWriter | None = None
        self.decimation = 1
        self.started = False

    def start(self) -> None:
        if not self.started:
            self.backend.start()
            self.started = True
        self.backend.receive_state(self.state)

    def stop(self) -> None:
        if self.started:
            self.backend.stop()
            self.started = False
        if self.telemetry is not None:
            self.telemetry.close()

    def advance(self, k: int, dt: float) -> None:
        cmd = self.backend.rotor_command()
        wrench = wrench_from_command(cmd, self.params)
        new = step_wrench(self.state, wrench, dt, self.params)
        # time from the tick index, not by accumulation
        new = replace(new, t=k * dt)
        self.state = new
        self.last_speeds = np.minimum(cmd.speeds, self.params.max_rotor_speed)
        self.last_saturated = bool(cmd.saturated)
        self.saturated_steps += int(cmd.saturated)

        batch = None
        if self.sensors is not None:
            accel = linear_acceleration(new, wrench, self.params)
            batch = self.sensors.sample(k, new, accel)
        self.backend.receive_state(new)
        if batch is not None:
            for reading in batch.readings():
                self.backend.receive_sensor(reading)
            self._remember(batch)

        ref = self.reference(new.t) if self.reference is not None else None
        if ref is not None:
            self.errors.add(float(np.linalg.norm(new.p - ref.position)))
        if self.telemetry is not None and k % self.decimation == 0:
            self.telemetry.write(self._row(ref))

    def _remember(self, batch: SensorBatch) -> None:
        for name in ("barometer", "magnetometer", "imu", "gps"):
            r = getattr(batch, name)
            if r is not None:
                setattr(self.latest, name, r)

    def _row(self, ref: FlatReference | None) -> list:
        s = self.state
        row = [s.t, self.name, *s.p, *s.v, *s.q, *s.omega]
        if ref is None:
            row += [math.nan] * 7
        else:
            e = s.p - ref.position
            row += [*ref.position, *e, float(np.linalg.norm(e))]
        row += [*self.last_speeds, float(self.last_saturated)]
        b, m, i, g = self.latest.barometer, self.latest.magnetometer, self.latest.imu, self.latest.gps
        row += [b.t, b.pressure, b.temperature, b.pressure_altitude] if b else [math.nan] * 4
        row += [m.t, *m.field] if m else [math.nan] * 4
        row += [i.t, *i.gyro, *i.accel] if i else [math.nan] * 7
        row += [g.t, g.latitude, g.longitude, g.altitude, *g.velocity] if g else [math.nan] * 7
        return row


class VehicleManager:
    """Registry of every vehicle in a simulation, keyed by unique name."""

    def __init__(self):
        self._vehicles: dict[str, Vehicle] = {}

    def add_vehicle(self, vehicle: Vehicle) -> Vehicle:
        if vehicle.name in self._vehicles:
            raise DuplicateVehicleError(f"vehicle {vehicle.name!r} already registered")
        self._vehicles[vehicle.name] = vehicle
        return vehicle

    def get_vehicle(self, name: str) -> Vehicle:
        try:
            return self._vehicles[name]
        except KeyError:
            raise VehicleNotFoundError(name) from None

    def remove_vehicle(self, name: str) -> Vehicle:
        vehicle = self.get_vehicle(name)
        vehicle.stop()
        del self._vehicles[name]
        return vehicle

    def list(self) -> list[Vehicle]:
        return list(self._vehicles.values())

    def __len__(self) -> int:
        return len(self._vehicles)

    def __contains__(self, name: str) -> bool:
        return name in self._vehicles


def _reference_for(cfg: VehicleConfig) -> Callable[[float], FlatReference] | None:
    traj = cfg.trajectory
    if traj is None:
        return None
    if traj.type == "relay":
        return RelayPath(traj.s, traj.t_start, traj.mirror_x, traj.mirror_y, traj.offset)
    ref = hover_reference(traj.position)
    return lambda t: ref


def build_vehicle(cfg: VehicleConfig, scenario: Scenario, index: int) -> Vehicle:
    """Instantiate one vehicle from its config.

    Without an explicit initial state the vehicle starts on its reference
    (position and velocity at t = 0), or at rest at the origin.
    """
    params = cfg.params.build()
    reference = _reference_for(cfg)
    if cfg.initial_state is not None:
        s = cfg.initial_state
        state = RigidBodyState(p=s.position, v=s.velocity, q=s.attitude, omega=s.angular_velocity)
    elif reference is not None:
        r0 = reference(0.0)
        state = RigidBodyState(p=r0.position, v=r0.velocity)
    else:
        state = RigidBodyState()

    b = cfg.backend
    if b.type == "geometric":
        if reference is None:
            hold = hover_reference(state.p.copy())
            reference = lambda t: hold  # noqa: E731
        gains = ControllerGains(b.gains.kp, b.gains.kv, b.gains.kR, b.gains.kw)
        backend: ControlBackend = GeometricBackend(params, reference, gains, b.drag_compensation)
    elif b.type == "script":
        backend = ScriptBackend(params, b.speeds)
    else:
        from .mavlink.hil import HilSession, MavlinkBackend, parse_endpoint

        session = HilSession(
            local=parse_endpoint(b.local),
            remote=parse_endpoint(b.remote) if b.remote else None,
            n_rotors=params.n_rotors,
            max_rotor_speed=params.max_rotor_speed,
            lockstep=b.lockstep,
            timeout=b.timeout,
            sysid=index + 1,
        )
        backend = MavlinkBackend(session)

    sensors = None
    if cfg.sensors.enabled:
        sensors = SensorSuite(
            origin=scenario.origin.build(),
            noise=cfg.sensors.noise.build(),
            rates=dict(cfg.sensors.rates),
            physics_dt=scenario.physics_dt,
            seed=[scenario.seed, index],
            mag_convention=cfg.sensors.mag_convention,
            g=params.g,
        )
    return Vehicle(cfg.name, params, backend, state, sensors, reference)


@dataclass
class RunSummary:
    scenario: str
    seed: int
    duration: float
    physics_dt: float
    steps: int
    status: str = "ok"
    error: str | None = None
    wall_time_s: float = 0.0
    output_dir: str = ""
    vehicles: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    raise TypeError(type(o))


def _clean(v):
    return None if isinstance(v, float) and not math.isfinite(v) else v


def run(
    scenario: Scenario,
    out_dir: str | Path | None = None,
    parallel: bool = False,
    realtime: bool = False,
    manager: VehicleManager | None = None,
) -> RunSummary:
    """Simulate ``scenario`` and write ``<vehicle>.csv`` files plus ``summary.json``.

    A backend failure (for example a HIL timeout) stops the run, flushes the
    telemetry written so far, records the error in the summary and raises
    :class:`SimulationError`.
    """
    out = Path(out_dir if out_dir is not None else scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manager = VehicleManager() if manager is None else manager
    for i, cfg in enumerate(scenario.vehicles):
        manager.add_vehicle(build_vehicle(cfg, scenario, i))

    dt = scenario.physics_dt
    n = scenario.n_steps
    summary = RunSummary(scenario.name, scenario.seed, scenario.duration, dt, n, output_dir=str(out))
    vehicles = manager.list()
    for v in vehicles:
        v.telemetry = TelemetryWriter(out / f"{v.name}.csv", telemetry_columns(v.params.n_rotors))
        v.decimation = scenario.telemetry.decimation

    pool = ThreadPoolExecutor(max_workers=len(vehicles)) if parallel and len(vehicles) > 1 else None
    t0 = time.perf_counter()
    failure: BaseException | None = None
    k = 0
    try:
        for v in vehicles:
            v.start()
        for k in range(1, n + 1):
            if pool is not None:
                # list() waits for every vehicle: a barrier per tick
                list(pool.map(lambda veh: veh.advance(k, dt), vehicles))
            else:
                for v in vehicles:
                    v.advance(k, dt)
            if realtime:
                lag = k * dt - (time.perf_counter() - t0)
                if lag > 0:
                    time.sleep(lag)
    except Exception as exc:  # backend or numerical failure
        failure = exc
        summary.status = "error"
        summary.error = f"{type(exc).__name__} at step {k}: {exc}"
        log.error("run aborted: %s", summary.error)
    finally:
        for v in vehicles:
            v.stop()
        if pool is not None:
            pool.shutdown()

    summary.wall_time_s = time.perf_counter() - t0
    for v in vehicles:
        summary.vehicles[v.name] = {
            "csv": f"{v.name}.csv",
            "rows": v.telemetry.rows if v.telemetry else 0,
            "max_error": _clean(v.errors.max if v.errors.count else math.nan),
            "rms_error": _clean(v.errors.rms),
            "final_error": _clean(v.errors.last),
            "saturated_steps": v.saturated_steps,
            "sensor_samples": dict(v.sensors.counts) if v.sensors else {},
        }
    (out / "summary.json").write_text(summary.to_json() + "\n")
    if failure is not None:
        raise SimulationError(summary.error) from failure
    return summary
