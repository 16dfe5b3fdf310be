"""Wire-level constants and helpers for Ethernet/IPv4/UDP/RTP frames."""

import struct

ETH_LEN = 14
IPV4_LEN = 20
UDP_LEN = 8
RTP_LEN = 12

ETHERTYPE_IPV4 = 0x0800
# IEEE 802 local-experimental range; overridable wherever a switch or codec
# is constructed.
ETHERTYPE_ROHC = 0x88B5

IPPROTO_UDP = 17

# UDP destination ports treated as RTP: (port & RTP_PORT_MASK) == RTP_PORT_VALUE,
# i.e. 4992..5023. The fixture parser uses the same value/mask pair.
RTP_PORT_VALUE = 0x1380
RTP_PORT_MASK = 0xFFE0

_IPV4 = struct.Struct("!BBHHHBBH4s4s")
_UDP = struct.Struct("!HHHH")
_RTP = struct.Struct("!BBHII")


def is_rtp_port(port):
    return (port & RTP_PORT_MASK) == RTP_PORT_VALUE


def ipv4_checksum(header):
    """Ones-complement sum over a 20-byte header with the checksum bytes zeroed."""
    data = bytes(header[:10]) + b"\x00\x00" + bytes(header[12:IPV4_LEN])
    total = sum(struct.unpack("!10H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def ipv4_checksum_ok(header):
    return ipv4_checksum(header) == int.from_bytes(header[10:12], "big")


def pack_ipv4(tos, total_len, ident, flags_frag, ttl, proto, src, dst, vihl=0x45, checksum=None):
    hdr = _IPV4.pack(vihl, tos, total_len, ident, flags_frag, ttl, proto, 0, src, dst)
    if checksum is None:
        checksum = ipv4_checksum(hdr)
    return hdr[:10] + checksum.to_bytes(2, "big") + hdr[12:]


def pack_udp(sport, dport, length, checksum=0):
    return _UDP.pack(sport, dport, length, checksum)


def pack_rtp(seq, ts, ssrc, pt=0, marker=0, b0=0x80):
    return _RTP.pack(b0, (marker << 7) | pt, seq, ts, ssrc)


def unpack_ipv4(data):
    """-> (vihl, tos, total_len, ident, flags_frag, ttl, proto, checksum, src, dst)"""
    return _IPV4.unpack_from(data)


def unpack_udp(data, offset=IPV4_LEN):
    return _UDP.unpack_from(data, offset)


def unpack_rtp(data, offset=IPV4_LEN + UDP_LEN):
    """-> (b0, marker_pt, seq, ts, ssrc)"""
    return _RTP.unpack_from(data, offset)


def ip_addr(text):
    return bytes(int(part) for part in text.split("."))


def mac_addr(text):
    return bytes.fromhex(text.replace(":", ""))
