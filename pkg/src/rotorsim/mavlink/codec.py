"""MAVLink v2 framing.

Frame layout (unsigned)::

    0xFD | len | incompat | compat | seq | sysid | compid | msgid (3, LE) | payload | crc (2, LE)

The checksum covers everything after the magic byte up to the end of the
payload, followed by the message's CRC_EXTRA byte. Trailing zero bytes of the
payload are dropped on encode (the first byte always stays) and restored on
decode.
"""

from __future__ import annotations

from dataclasses import dataclass

from .crc import crc16_mcrf4xx
from .messages import MESSAGES, message_def

MAGIC_V2 = 0xFD
HEADER_LEN = 10
CHECKSUM_LEN = 2
SIGNATURE_LEN = 13
INCOMPAT_SIGNED = 0x01


class MavlinkError(ValueError):
    pass


class BadMagicError(MavlinkError):
    pass


class TruncatedFrameError(MavlinkError):
    pass


class ChecksumError(MavlinkError):
    pass


class UnknownMessageError(MavlinkError):
    pass


@dataclass
class MavlinkFrame:
    seq: int
    sysid: int
    compid: int
    msgid: int
    payload: bytes
    checksum: int
    message: object = None
    incompat_flags: int = 0
    compat_flags: int = 0

    @property
    def payload_len(self) -> int:
        return len(self.payload)


def _truncate(payload: bytes) -> bytes:
    n = len(payload)
    while n > 1 and payload[n - 1] == 0:
        n -= 1
    return payload[:n]


def encode_frame(msg, seq: int = 0, sysid: int = 1, compid: int = 1) -> bytes:
    d = message_def(msg)
    try:
        payload = _truncate(d.pack_payload(msg))
    except Exception as exc:  # struct.error, TypeError on bad field values
        raise MavlinkError(f"cannot pack {d.name}: {exc}") from exc
    header = bytes(
        [
            MAGIC_V2,
            len(payload),
            0,
            0,
            seq & 0xFF,
            sysid & 0xFF,
            compid & 0xFF,
            d.msgid & 0xFF,
            (d.msgid >> 8) & 0xFF,
            (d.msgid >> 16) & 0xFF,
        ]
    )
    crc = crc16_mcrf4xx(header[1:] + payload)
    crc = crc16_mcrf4xx(bytes([d.crc_extra]), crc)
    return header + payload + bytes([crc & 0xFF, crc >> 8])


def frame_length(buf: bytes) -> int:
    """Total byte length of the frame starting at ``buf[0]`` (header must be present)."""
    if len(buf) < HEADER_LEN:
        raise TruncatedFrameError(f"need {HEADER_LEN} header bytes, have {len(buf)}")
    n = HEADER_LEN + buf[1] + CHECKSUM_LEN
    if buf[2] & INCOMPAT_SIGNED:
        n += SIGNATURE_LEN
    return n


def decode_frame(buf: bytes | bytearray) -> MavlinkFrame:
    """Decode exactly one frame from the start of ``buf``.

    Raises :class:`BadMagicError`, :class:`TruncatedFrameError`,
    :class:`ChecksumError` or :class:`UnknownMessageError`. Signed frames are
    accepted but their signature is not verified.
    """
    buf = bytes(buf)
    if not buf:
        raise TruncatedFrameError("empty buffer")
    if buf[0] != MAGIC_V2:
        raise BadMagicError(f"expected magic 0x{MAGIC_V2:02X}, got 0x{buf[0]:02X}")
    total = frame_length(buf)
    if len(buf) < total:
        raise TruncatedFrameError(f"frame needs {total} bytes, have {len(buf)}")
    plen = buf[1]
    msgid = buf[7] | (buf[8] << 8) | (buf[9] << 16)
    payload = buf[HEADER_LEN : HEADER_LEN + plen]
    crc_lo, crc_hi = buf[HEADER_LEN + plen], buf[HEADER_LEN + plen + 1]
    checksum = crc_lo | (crc_hi << 8)

    d = MESSAGES.get(msgid)
    if d is None:
        raise UnknownMessageError(f"unknown message id {msgid}")
    crc = crc16_mcrf4xx(buf[1 : HEADER_LEN + plen])
    crc = crc16_mcrf4xx(bytes([d.crc_extra]), crc)
    if crc != checksum:
        raise ChecksumError(f"{d.name}: checksum 0x{checksum:04X} != computed 0x{crc:04X}")
    if plen > d.length:
        raise MavlinkError(f"{d.name}: payload of {plen} bytes exceeds {d.length}")

    return MavlinkFrame(
        seq=buf[4],
        sysid=buf[5],
        compid=buf[6],
        msgid=msgid,
        payload=payload,
        checksum=checksum,
        message=d.unpack_payload(payload),
        incompat_flags=buf[2],
        compat_flags=buf[3],
    )


def decode_message(buf: bytes | bytearray):
    return decode_frame(buf).message


def split_frames(buf: bytes | bytearray) -> tuple[list[bytes], bytes]:
    """Cut a byte stream into candidate frames.

    Bytes before a magic byte are discarded. Returns the complete frames and
    the unconsumed tail (an incomplete frame, or nothing).
    """
    buf = bytes(buf)
    frames = []
    i = 0
    while True:
        j = buf.find(bytes([MAGIC_V2]), i)
        if j < 0:
            return frames, b""
        if len(buf) - j < HEADER_LEN:
            return frames, buf[j:]
        n = frame_length(buf[j:])
        if len(buf) - j < n:
            return frames, buf[j:]
        frames.append(buf[j : j + n])
        i = j + n
