"""CRC-16/MCRF4XX (the MAVLink "X.25" checksum) and CRC_EXTRA seeds."""

from __future__ import annotations

from typing import Iterable


def _make_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = (crc >> 1) ^ 0x8408 if crc & 1 else crc >> 1
        table.append(crc)
    return table


_TABLE = _make_table()


def crc16_mcrf4xx(data: bytes | bytearray | Iterable[int], crc: int = 0xFFFF) -> int:
    """Reflected CRC-16 with polynomial 0x1021, init 0xFFFF and no final xor.

    Pass a previous result as ``crc`` to continue accumulating.
    """
    table = _TABLE
    for b in data:
        crc = (crc >> 8) ^ table[(crc ^ b) & 0xFF]
    return crc


def crc_extra(name: str, fields: list[tuple[str, str, int]]) -> int:
    """Seed byte for a message definition.

    ``fields`` are ``(type, name, array_length)`` in wire order, base fields
    only (extension fields never contribute). ``type`` is the C base type,
    e.g. ``"uint8_t"`` or ``"float"``.
    """
    crc = crc16_mcrf4xx((name + " ").encode("ascii"))
    for ftype, fname, array_len in fields:
        crc = crc16_mcrf4xx((ftype + " ").encode("ascii"), crc)
        crc = crc16_mcrf4xx((fname + " ").encode("ascii"), crc)
        if array_len:
            crc = crc16_mcrf4xx(bytes([array_len]), crc)
    return (crc & 0xFF) ^ (crc >> 8)
