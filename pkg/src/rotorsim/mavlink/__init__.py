"""MAVLink v2 codec and the HIL bridge."""

from .codec import (
    BadMagicError,
    ChecksumError,
    MavlinkError,
    MavlinkFrame,
    TruncatedFrameError,
    UnknownMessageError,
    decode_frame,
    decode_message,
    encode_frame,
    split_frames,
)
from .crc import crc16_mcrf4xx, crc_extra
from .hil import (
    HilActions,
    HilSession,
    HilTimeoutError,
    MavlinkBackend,
    SessionState,
    build_hil_gps,
    build_hil_sensor,
    controls_to_speeds,
    hil_session_step,
    parse_endpoint,
    unpack_hil_sensor,
)
from .messages import (
    HEARTBEAT,
    HIL_ACTUATOR_CONTROLS,
    HIL_GPS,
    HIL_SENSOR,
    MESSAGES,
    Heartbeat,
    HilActuatorControls,
    HilGps,
    HilSensor,
    MessageDef,
)
