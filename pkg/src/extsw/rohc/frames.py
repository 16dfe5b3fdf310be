"""Whole-frame helpers used by the emulated end hosts and the packet-file CLI."""

from ..inet import ETH_LEN, ETHERTYPE_IPV4, ETHERTYPE_ROHC


def ethertype_of(frame):
    return int.from_bytes(frame[12:14], "big")


def compress_frame(compressor, frame, ethertype=ETHERTYPE_ROHC):
    """Compress the IPv4 part of an Ethernet frame; other frames pass through."""
    if len(frame) < ETH_LEN + 20 or ethertype_of(frame) != ETHERTYPE_IPV4:
        return bytes(frame)
    out = compressor.compress(bytes(frame[ETH_LEN:]))
    if out is None:
        return bytes(frame)
    return bytes(frame[:12]) + ethertype.to_bytes(2, "big") + out


def decompress_frame(decompressor, frame, ethertype=ETHERTYPE_ROHC):
    """Inverse of compress_frame. Raises RohcError on failure."""
    if ethertype_of(frame) != ethertype:
        return bytes(frame)
    l3 = decompressor.decompress(frame[ETH_LEN:])
    return bytes(frame[:12]) + ETHERTYPE_IPV4.to_bytes(2, "big") + l3
