"""Packet files: ``EXSW`` magic, then ``[u32 big-endian length, bytes]`` records."""

import struct

MAGIC = b"EXSW"
_LEN = struct.Struct("!I")


class PacketFileError(Exception):
    pass


def dump_packets(packets):
    parts = [MAGIC]
    for p in packets:
        parts.append(_LEN.pack(len(p)))
        parts.append(bytes(p))
    return b"".join(parts)


def load_packets(data):
    if data[:4] != MAGIC:
        raise PacketFileError("not a packet file (bad magic)")
    out = []
    pos = 4
    while pos < len(data):
        if pos + 4 > len(data):
            raise PacketFileError(f"truncated length field at offset {pos}")
        (n,) = _LEN.unpack_from(data, pos)
        pos += 4
        if pos + n > len(data):
            raise PacketFileError(f"record at offset {pos - 4} claims {n} bytes, {len(data) - pos} left")
        out.append(data[pos:pos + n])
        pos += n
    return out


def write_packets(path, packets):
    with open(path, "wb") as fh:
        fh.write(dump_packets(packets))


def read_packets(path):
    with open(path, "rb") as fh:
        return load_packets(fh.read())
