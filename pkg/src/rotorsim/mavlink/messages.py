"""Message definitions for the HIL subset of the MAVLink common dialect.

Each message is a plain dataclass whose field names match the MAVLink XML.
:class:`MessageDef` derives the wire layout (fields sorted by type size,
extensions appended), the ``struct`` format and the CRC_EXTRA seed from the
declaration, so nothing here is a hand-copied magic number except the ids.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, fields

import numpy as np

from .crc import crc_extra

# C type -> (struct code, size)
_TYPES = {
    "uint8_t": ("B", 1),
    "int8_t": ("b", 1),
    "uint16_t": ("H", 2),
    "int16_t": ("h", 2),
    "uint32_t": ("I", 4),
    "int32_t": ("i", 4),
    "uint64_t": ("Q", 8),
    "int64_t": ("q", 8),
    "float": ("f", 4),
    "double": ("d", 8),
    "uint8_t_mavlink_version": ("B", 1),
}


@dataclass(frozen=True)
class FieldDef:
    name: str
    ctype: str
    array_len: int = 0

    @property
    def base_type(self) -> str:
        return "uint8_t" if self.ctype == "uint8_t_mavlink_version" else self.ctype

    @property
    def size(self) -> int:
        return _TYPES[self.ctype][1] * max(1, self.array_len)

    @property
    def code(self) -> str:
        c = _TYPES[self.ctype][0]
        return f"{self.array_len}{c}" if self.array_len else c


class MessageDef:
    def __init__(self, name: str, msgid: int, cls, base: list[FieldDef], extensions: list[FieldDef] = ()):
        self.name = name
        self.msgid = msgid
        self.cls = cls
        self.base = list(base)
        self.extensions = list(extensions)
        # stable sort keeps declaration order among equal-size types
        wire_base = sorted(self.base, key=lambda f: _TYPES[f.ctype][1], reverse=True)
        self.wire_fields = wire_base + self.extensions
        self.struct = struct.Struct("<" + "".join(f.code for f in self.wire_fields))
        self.base_length = sum(f.size for f in wire_base)
        self.length = self.struct.size
        self.crc_extra = crc_extra(name, [(f.base_type, f.name, f.array_len) for f in wire_base])

        declared = [f.name for f in fields(cls)]
        expected = [f.name for f in self.base + self.extensions]
        if sorted(declared) != sorted(expected):
            raise TypeError(f"{cls.__name__} fields do not match the {name} definition")

    def pack_payload(self, msg) -> bytes:
        values = []
        for f in self.wire_fields:
            v = getattr(msg, f.name)
            if f.array_len:
                values.extend(v)
            else:
                values.append(v)
        return self.struct.pack(*values)

    def unpack_payload(self, payload: bytes):
        if len(payload) < self.length:
            payload = payload + bytes(self.length - len(payload))
        flat = self.struct.unpack(payload[: self.length])
        kwargs = {}
        i = 0
        for f in self.wire_fields:
            if f.array_len:
                kwargs[f.name] = tuple(flat[i : i + f.array_len])
                i += f.array_len
            else:
                kwargs[f.name] = flat[i]
                i += 1
        return self.cls(**kwargs)


@dataclass
class Heartbeat:
    type: int = 2  # MAV_TYPE_QUADROTOR
    autopilot: int = 8  # MAV_AUTOPILOT_INVALID: not an autopilot
    base_mode: int = 0
    custom_mode: int = 0
    system_status: int = 0
    mavlink_version: int = 3


# HIL_SENSOR.fields_updated bits
HIL_SENSOR_ACCEL = 0x007
HIL_SENSOR_GYRO = 0x038
HIL_SENSOR_MAG = 0x1C0
HIL_SENSOR_ABS_PRESSURE = 0x200
HIL_SENSOR_DIFF_PRESSURE = 0x400
HIL_SENSOR_PRESSURE_ALT = 0x800
HIL_SENSOR_TEMPERATURE = 0x1000


@dataclass
class HilSensor:
    """IMU, magnetometer and barometer sample in NED/FRD, PX4 units.

    Accel in m/s², gyro in rad/s, mag in Gauss, pressures in hPa, altitude in m,
    temperature in °C.
    """

    time_usec: int = 0
    xacc: float = 0.0
    yacc: float = 0.0
    zacc: float = 0.0
    xgyro: float = 0.0
    ygyro: float = 0.0
    zgyro: float = 0.0
    xmag: float = 0.0
    ymag: float = 0.0
    zmag: float = 0.0
    abs_pressure: float = 0.0
    diff_pressure: float = 0.0
    pressure_alt: float = 0.0
    temperature: float = 0.0
    fields_updated: int = 0
    id: int = 0

    @property
    def accel(self) -> np.ndarray:
        return np.array([self.xacc, self.yacc, self.zacc])

    @property
    def gyro(self) -> np.ndarray:
        return np.array([self.xgyro, self.ygyro, self.zgyro])

    @property
    def mag(self) -> np.ndarray:
        return np.array([self.xmag, self.ymag, self.zmag])


@dataclass
class HilGps:
    """GPS fix: lat/lon in 1e-7 deg, alt in mm, velocities in cm/s (NED)."""

    time_usec: int = 0
    fix_type: int = 3
    lat: int = 0
    lon: int = 0
    alt: int = 0
    eph: int = 65535
    epv: int = 65535
    vel: int = 65535
    vn: int = 0
    ve: int = 0
    vd: int = 0
    cog: int = 65535
    satellites_visible: int = 255
    id: int = 0
    yaw: int = 0


@dataclass
class HilActuatorControls:
    time_usec: int = 0
    controls: tuple = field(default_factory=lambda: (0.0,) * 16)
    mode: int = 0
    flags: int = 0

    def __post_init__(self):
        self.controls = tuple(float(c) for c in self.controls)
        if len(self.controls) != 16:
            raise ValueError("HIL_ACTUATOR_CONTROLS carries exactly 16 controls")


HEARTBEAT = MessageDef(
    "HEARTBEAT",
    0,
    Heartbeat,
    [
        FieldDef("type", "uint8_t"),
        FieldDef("autopilot", "uint8_t"),
        FieldDef("base_mode", "uint8_t"),
        FieldDef("custom_mode", "uint32_t"),
        FieldDef("system_status", "uint8_t"),
        FieldDef("mavlink_version", "uint8_t_mavlink_version"),
    ],
)

HIL_SENSOR = MessageDef(
    "HIL_SENSOR",
    107,
    HilSensor,
    [FieldDef("time_usec", "uint64_t")]
    + [FieldDef(n, "float") for n in (
        "xacc", "yacc", "zacc", "xgyro", "ygyro", "zgyro", "xmag", "ymag", "zmag",
        "abs_pressure", "diff_pressure", "pressure_alt", "temperature",
    )]
    + [FieldDef("fields_updated", "uint32_t")],
    [FieldDef("id", "uint8_t")],
)

HIL_GPS = MessageDef(
    "HIL_GPS",
    113,
    HilGps,
    [
        FieldDef("time_usec", "uint64_t"),
        FieldDef("fix_type", "uint8_t"),
        FieldDef("lat", "int32_t"),
        FieldDef("lon", "int32_t"),
        FieldDef("alt", "int32_t"),
        FieldDef("eph", "uint16_t"),
        FieldDef("epv", "uint16_t"),
        FieldDef("vel", "uint16_t"),
        FieldDef("vn", "int16_t"),
        FieldDef("ve", "int16_t"),
        FieldDef("vd", "int16_t"),
        FieldDef("cog", "uint16_t"),
        FieldDef("satellites_visible", "uint8_t"),
    ],
    [FieldDef("id", "uint8_t"), FieldDef("yaw", "uint16_t")],
)

HIL_ACTUATOR_CONTROLS = MessageDef(
    "HIL_ACTUATOR_CONTROLS",
    93,
    HilActuatorControls,
    [
        FieldDef("time_usec", "uint64_t"),
        FieldDef("controls", "float", 16),
        FieldDef("mode", "uint8_t"),
        FieldDef("flags", "uint64_t"),
    ],
)

MESSAGES: dict[int, MessageDef] = {d.msgid: d for d in (HEARTBEAT, HIL_SENSOR, HIL_GPS, HIL_ACTUATOR_CONTROLS)}
BY_CLASS: dict[type, MessageDef] = {d.cls: d for d in MESSAGES.values()}


def message_def(msg_or_cls) -> MessageDef:
    cls = msg_or_cls if isinstance(msg_or_cls, type) else type(msg_or_cls)
    try:
        return BY_CLASS[cls]
    except KeyError:
        raise TypeError(f"{cls.__name__} is not a supported MAVLink message") from None
