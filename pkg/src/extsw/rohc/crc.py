"""CRC-8 and CRC-3 as used to protect compressed header blocks.

Both CRCs are reflected (bits are consumed LSB-first within each octet),
start from an all-ones register and apply no final XOR:

    CRC-8: x^8 + x^2 + x + 1, init 0xFF
    CRC-3: x^3 + x + 1,       init 0x7
"""

__all__ = ["crc8", "crc3", "crc_bitwise", "CRC8_POLY", "CRC3_POLY"]

# Reflected generator polynomials (x^0 term in the MSB of the register).
CRC8_POLY = 0xE0
CRC3_POLY = 0x6


def crc_bitwise(data, width, poly, init):
    """Bit-serial reference. Slow; used to build tables and as a test oracle."""
    crc = init
    for byte in data:
        for i in range(8):
            feedback = (crc ^ (byte >> i)) & 1
            crc >>= 1
            if feedback:
                crc ^= poly
    return crc & ((1 << width) - 1)


def _table(width, poly):
    # For reflected CRCs no wider than 8 bits the register lines up with the
    # low bits of the incoming octet, so one lookup per octet suffices.
    return tuple(crc_bitwise([i], width, poly, 0) for i in range(256))


_CRC8_TABLE = _table(8, CRC8_POLY)
_CRC3_TABLE = _table(3, CRC3_POLY)


def crc8(data, init=0xFF):
    crc = init
    for byte in data:
        crc = _CRC8_TABLE[crc ^ byte]
    return crc


def crc3(data, init=0x7):
    crc = init
    for byte in data:
        crc = _CRC3_TABLE[crc ^ byte]
    return crc
