"""CRC-32/IEEE (reflected 0x04C11DB7, init and final xor 0xFFFFFFFF)."""

import zlib


def crc32(data: bytes, value: int = 0) -> int:
    """Checksum of ``data``; pass a previous result as ``value`` to continue
    a running checksum over concatenated chunks."""
    return zlib.crc32(data, value) & 0xFFFFFFFF
