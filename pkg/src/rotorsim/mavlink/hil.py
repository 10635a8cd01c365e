"""Hardware-in-the-loop bridge to a PX4-style autopilot over UDP.

The simulator side binds a local UDP port; the autopilot either is configured
as the remote endpoint or is learned from the first valid datagram it sends.
Each physics step the session sends ``HIL_SENSOR`` (and ``HIL_GPS`` when a fix
is due) and, in lockstep mode, blocks until a ``HIL_ACTUATOR_CONTROLS`` reply
arrives. Controls ``c`` in ``[0, 1]`` map to rotor speeds ``c * max_speed``.
"""

from __future__ import annotations

import logging
import math
import queue
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..control import ControlBackend
from ..dynamics import RigidBodyState, RotorCommand
from ..frames import ENU_FLU, NED_FRD, convert_frame
from ..sensors import BaroReading, GpsReading, ImuReading, MagReading, SensorBatch
from .codec import MavlinkError, decode_frame, encode_frame, split_frames
from .messages import (
    HIL_SENSOR_ABS_PRESSURE,
    HIL_SENSOR_ACCEL,
    HIL_SENSOR_GYRO,
    HIL_SENSOR_MAG,
    HIL_SENSOR_PRESSURE_ALT,
    HIL_SENSOR_TEMPERATURE,
    Heartbeat,
    HilActuatorControls,
    HilGps,
    HilSensor,
)

log = logging.getLogger(__name__)

KELVIN = 273.15


class HilTimeoutError(RuntimeError):
    pass


class SessionState(str, Enum):
    WAITING_HANDSHAKE = "waiting_handshake"
    RUNNING = "running"
    CLOSED = "closed"


def _usec(t: float) -> int:
    return max(0, int(round(t * 1e6)))


def build_hil_sensor(
    baro: BaroReading | None,
    imu: ImuReading | None,
    mag: MagReading | None,
    time_usec: int | None = None,
) -> HilSensor:
    """Pack readings into ``HIL_SENSOR``: FLU body vectors become FRD, Pa -> hPa, K -> °C.

    ``fields_updated`` flags only the readings that were supplied.
    """
    times = [r.t for r in (baro, imu, mag) if r is not None]
    if times and max(times) - min(times) > 1e-9:
        raise ValueError("readings in one HIL_SENSOR must share a timestamp")
    msg = HilSensor(time_usec=time_usec if time_usec is not None else _usec(times[0] if times else 0.0))
    flags = 0
    if imu is not None:
        acc = convert_frame(imu.accel, ENU_FLU, NED_FRD, "body")
        gyr = convert_frame(imu.gyro, ENU_FLU, NED_FRD, "body")
        msg.xacc, msg.yacc, msg.zacc = (float(a) for a in acc)
        msg.xgyro, msg.ygyro, msg.zgyro = (float(a) for a in gyr)
        flags |= HIL_SENSOR_ACCEL | HIL_SENSOR_GYRO
    if mag is not None:
        m = convert_frame(mag.field, ENU_FLU, NED_FRD, "body")
        msg.xmag, msg.ymag, msg.zmag = (float(a) for a in m)
        flags |= HIL_SENSOR_MAG
    if baro is not None:
        msg.abs_pressure = baro.pressure / 100.0
        msg.pressure_alt = baro.pressure_altitude
        msg.temperature = baro.temperature - KELVIN
        flags |= HIL_SENSOR_ABS_PRESSURE | HIL_SENSOR_PRESSURE_ALT | HIL_SENSOR_TEMPERATURE
    msg.fields_updated = flags
    return msg


def unpack_hil_sensor(msg: HilSensor):
    """Inverse of :func:`build_hil_sensor`; absent readings come back as ``None``."""
    t = msg.time_usec * 1e-6
    f = msg.fields_updated
    imu = mag = baro = None
    if f & HIL_SENSOR_ACCEL:
        imu = ImuReading(
            gyro=convert_frame(msg.gyro, NED_FRD, ENU_FLU, "body"),
            accel=convert_frame(msg.accel, NED_FRD, ENU_FLU, "body"),
            t=t,
        )
    if f & HIL_SENSOR_MAG:
        mag = MagReading(field=convert_frame(msg.mag, NED_FRD, ENU_FLU, "body"), t=t)
    if f & HIL_SENSOR_ABS_PRESSURE:
        baro = BaroReading(
            temperature=msg.temperature + KELVIN,
            pressure=msg.abs_pressure * 100.0,
            pressure_altitude=msg.pressure_alt,
            t=t,
        )
    return baro, imu, mag


def _clamp_int(v: float, lo: int, hi: int) -> int:
    return int(min(hi, max(lo, round(v))))


def build_hil_gps(gps: GpsReading, time_usec: int | None = None, satellites: int = 10) -> HilGps:
    """Pack a fix into ``HIL_GPS``: degE7, mm, cm/s NED, course over ground in cdeg."""
    v_ned = convert_frame(gps.velocity, ENU_FLU, NED_FRD, "inertial")
    vn, ve, vd = (float(a) * 100.0 for a in v_ned)
    ground = math.hypot(vn, ve)
    cog = (math.degrees(math.atan2(ve, vn)) % 360.0) * 100.0
    return HilGps(
        time_usec=time_usec if time_usec is not None else _usec(gps.t),
        fix_type=3,
        lat=_clamp_int(gps.latitude * 1e7, -(2**31), 2**31 - 1),
        lon=_clamp_int(gps.longitude * 1e7, -(2**31), 2**31 - 1),
        alt=_clamp_int(gps.altitude * 1000.0, -(2**31), 2**31 - 1),
        eph=100,
        epv=100,
        vel=_clamp_int(ground, 0, 65534),
        vn=_clamp_int(vn, -32768, 32767),
        ve=_clamp_int(ve, -32768, 32767),
        vd=_clamp_int(vd, -32768, 32767),
        cog=_clamp_int(cog, 0, 35999),
        satellites_visible=satellites,
    )


def controls_to_speeds(controls, n_rotors: int, max_speed: float) -> np.ndarray:
    c = np.asarray(controls[:n_rotors], dtype=float)
    c = np.where(np.isfinite(c), c, 0.0)
    return np.clip(c, 0.0, 1.0) * max_speed


def parse_endpoint(text: str) -> tuple[str, int]:
    """``udp:HOST:PORT`` (or ``HOST:PORT``) -> ``(host, port)``."""
    body = text[4:] if text.startswith("udp:") else text
    host, sep, port = body.rpartition(":")
    if not sep or not host:
        raise ValueError(f"endpoint must look like udp:HOST:PORT, got {text!r}")
    try:
        p = int(port)
    except ValueError:
        raise ValueError(f"invalid port in endpoint {text!r}") from None
    if not 0 <= p <= 65535:
        raise ValueError(f"port out of range in endpoint {text!r}")
    return host, p


@dataclass
class HilActions:
    """What one session step did."""

    sent: list[str] = field(default_factory=list)
    controls: tuple | None = None
    speeds: np.ndarray | None = None


class _SeqFilter:
    """Drops frames whose (sysid, compid, seq) was seen within the last ``window`` frames."""

    def __init__(self, window: int = 32):
        self.window = window
        self._recent: dict[tuple[int, int], deque] = {}

    def accept(self, sysid: int, compid: int, seq: int) -> bool:
        recent = self._recent.setdefault((sysid, compid), deque(maxlen=self.window))
        if seq in recent:
            return False
        recent.append(seq)
        return True


class HilSession:
    """One simulator <-> autopilot link.

    In lockstep mode the sim advances only after each sensor batch is answered
    by an actuator message; a missing reply raises :class:`HilTimeoutError`
    after ``timeout`` seconds. Otherwise a reader thread feeds a queue and the
    latest controls received so far are used.
    """

    def __init__(
        self,
        local: tuple[str, int] = ("0.0.0.0", 4560),
        remote: tuple[str, int] | None = None,
        n_rotors: int = 4,
        max_rotor_speed: float = 1100.0,
        lockstep: bool = True,
        timeout: float = 1.0,
        sysid: int = 1,
        compid: int = 51,
        heartbeat_period: float = 1.0,
    ):
        self.local = local
        self.remote = remote
        self.n_rotors = n_rotors
        self.max_rotor_speed = max_rotor_speed
        self.lockstep = lockstep
        self.timeout = timeout
        self.sysid = sysid
        self.compid = compid
        self.heartbeat_period = heartbeat_period

        self.state = SessionState.WAITING_HANDSHAKE
        self.sim_time = 0.0
        self.sock: socket.socket | None = None
        self._seq = 0
        self._seq_filter = _SeqFilter()
        self._last_heartbeat: float | None = None
        self._controls = (0.0,) * 16
        self._inbox: queue.SimpleQueue = queue.SimpleQueue()
        self._reader: threading.Thread | None = None
        self._stop = threading.Event()

        self.steps = 0
        self.actuator_messages = 0
        self.dropped_frames = 0
        self.duplicate_frames = 0

    # -- lifecycle --------------------------------------------------------

    def open(self) -> "HilSession":
        if self.sock is not None:
            return self
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind(self.local)
        if self.remote is not None:
            self.state = SessionState.RUNNING
        if not self.lockstep:
            self._reader = threading.Thread(target=self._read_loop, name="hil-reader", daemon=True)
            self._reader.start()
        return self

    @property
    def local_address(self) -> tuple[str, int]:
        if self.sock is None:
            raise RuntimeError("session is not open")
        return self.sock.getsockname()

    def close(self) -> None:
        self._stop.set()
        if self._reader is not None:
            self._reader.join(timeout=1.0)
        if self.sock is not None:
            self.sock.close()
            self.sock = None
        self.state = SessionState.CLOSED

    def __enter__(self):
        return self.open()

    def __exit__(self, *exc):
        self.close()

    def wait_for_handshake(self, timeout: float | None = None) -> None:
        """Block until the autopilot has sent any valid frame (learns its address)."""
        deadline = time.monotonic() + (self.timeout if timeout is None else timeout)
        while self.state is SessionState.WAITING_HANDSHAKE:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise HilTimeoutError("no frame from the autopilot before the handshake timeout")
            if self._reader is not None:
                # the reader thread owns the socket; it flips the state
                time.sleep(min(remaining, 0.005))
                continue
            for msg in self._receive(remaining):
                self._handle(msg)

    # -- I/O --------------------------------------------------------------

    def send(self, msg) -> None:
        if self.sock is None:
            raise RuntimeError("session is not open")
        if self.remote is None:
            raise RuntimeError("remote endpoint unknown; wait for the handshake first")
        frame = encode_frame(msg, self._seq, self.sysid, self.compid)
        self._seq = (self._seq + 1) & 0xFF
        self.sock.sendto(frame, self.remote)

    def _receive(self, timeout: float) -> list:
        """Read one datagram (or nothing within ``timeout``) and return its valid messages."""
        assert self.sock is not None
        self.sock.settimeout(max(timeout, 1e-4))
        try:
            data, addr = self.sock.recvfrom(4096)
        except socket.timeout:
            return []
        except OSError:
            if self._stop.is_set():
                return []
            raise
        out = []
        frames, tail = split_frames(data)
        if tail:
            self.dropped_frames += 1
            log.warning("dropping %d trailing bytes of an incomplete frame", len(tail))
        for raw in frames:
            try:
                frame = decode_frame(raw)
            except MavlinkError as exc:
                self.dropped_frames += 1
                log.warning("dropping malformed frame: %s", exc)
                continue
            if not self._seq_filter.accept(frame.sysid, frame.compid, frame.seq):
                self.duplicate_frames += 1
                continue
            if self.remote is None:
                self.remote = addr
            if self.state is SessionState.WAITING_HANDSHAKE:
                self.state = SessionState.RUNNING
            out.append(frame.message)
        return out

    def _handle(self, msg) -> bool:
        if isinstance(msg, HilActuatorControls):
            self._controls = msg.controls
            self.actuator_messages += 1
            return True
        return False

    def _read_loop(self) -> None:
        while not self._stop.is_set():
            try:
                for msg in self._receive(0.05):
                    self._inbox.put(msg)
            except OSError:
                return

    # -- stepping ---------------------------------------------------------

    def step(self, batch: SensorBatch) -> HilActions:
        if self.state is SessionState.CLOSED:
            raise RuntimeError("session is closed")
        if self.sock is None:
            self.open()
        if self.state is SessionState.WAITING_HANDSHAKE:
            self.wait_for_handshake()

        self.sim_time = batch.t
        actions = HilActions()
        if self._last_heartbeat is None or batch.t - self._last_heartbeat >= self.heartbeat_period - 1e-9:
            self.send(Heartbeat())
            self._last_heartbeat = batch.t
            actions.sent.append("HEARTBEAT")
        self.send(build_hil_sensor(batch.barometer, batch.imu, batch.magnetometer, _usec(batch.t)))
        actions.sent.append("HIL_SENSOR")
        if batch.gps is not None:
            self.send(build_hil_gps(batch.gps, _usec(batch.t)))
            actions.sent.append("HIL_GPS")

        if self.lockstep:
            deadline = time.monotonic() + self.timeout
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise HilTimeoutError(
                        f"no HIL_ACTUATOR_CONTROLS within {self.timeout} s at sim time {batch.t:.3f} s"
                    )
                if any(self._handle(m) for m in self._receive(remaining)):
                    break
        else:
            while True:
                try:
                    self._handle(self._inbox.get_nowait())
                except queue.Empty:
                    break

        self.steps += 1
        actions.controls = self._controls
        actions.speeds = controls_to_speeds(self._controls, self.n_rotors, self.max_rotor_speed)
        return actions


def hil_session_step(session: HilSession, batch: SensorBatch) -> HilActions:
    return session.step(batch)


class MavlinkBackend(ControlBackend):
    """Control backend that defers rotor commands to an external autopilot."""

    def __init__(self, session: HilSession):
        self.session = session
        self._t = 0.0
        self._batch = SensorBatch(t=0.0)

    def start(self) -> None:
        self.session.open()

    def stop(self) -> None:
        self.session.close()

    def receive_state(self, state: RigidBodyState) -> None:
        self._t = state.t

    def receive_sensor(self, reading) -> None:
        if abs(reading.t - self._batch.t) > 1e-12:
            self._batch = SensorBatch(t=reading.t)
        if isinstance(reading, BaroReading):
            self._batch.barometer = reading
        elif isinstance(reading, MagReading):
            self._batch.magnetometer = reading
        elif isinstance(reading, ImuReading):
            self._batch.imu = reading
        elif isinstance(reading, GpsReading):
            self._batch.gps = reading

    def rotor_command(self) -> RotorCommand:
        batch = self._batch if abs(self._batch.t - self._t) <= 1e-12 else SensorBatch(t=self._t)
        actions = self.session.step(batch)
        self._batch = SensorBatch(t=self._t)
        return RotorCommand(actions.speeds)
