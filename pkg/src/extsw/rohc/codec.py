"""Header compressor and decompressor working on raw IPv4 packets.

Packet formats (every block starts with an Add-CID octet ``0xE0 | cid``):

IR (``0xFD`` with a dynamic chain, ``0xFC`` without)::

    Add-CID | type | profile | static chain | dynamic chain | CRC-8

CRC-8 covers every octet of the block before it. For the Uncompressed
profile the chains are empty and the original packet follows the CRC.

UO-0 (RTP and UDP profiles)::

    Add-CID | 0 SN(4) CRC(3) [| UDP checksum(2)]

The UDP checksum is appended verbatim when the flow uses one. CRC-3 covers
the context signature (static chain and every dynamic field that must be
unchanged for UO-0) followed by the four transmitted SN bits, so any single
flipped bit in the UO-0 octet is caught.

TS and IP-ID are not transmitted in UO-0. They are rebuilt from the SN
offset to the reference: ``TS = TS_ref + dSN * stride`` and
``IP-ID = IP-ID_ref + dSN``. The compressor only emits UO-0 when both
relations hold for the packet being sent.
"""

import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple

from ..inet import IPV4_LEN, ipv4_checksum_ok, pack_ipv4, pack_rtp, pack_udp
from .crc import crc3, crc8
from .profiles import HEADER_LEN, ProfileId, classify_l3
from .wlsb import WlsbWindow, wlsb_decode

ADD_CID = 0xE0
IR_TYPE = 0xFC
IR_DYN = 0xFD
MAX_CIDS = 16
WINDOW_SIZE = 4
SN_BITS = 4
SN_P = 1
DEFAULT_REFRESH = 100

_STATIC_IP = struct.Struct("!BB4s4s")
_STATIC_UDP = struct.Struct("!HH")
_STATIC_RTP = struct.Struct("!I")
_DYN_IP = struct.Struct("!BBHH")
_DYN_UDP = struct.Struct("!H")
_DYN_RTP = struct.Struct("!BBHII")
_DYN_UDP_SN = struct.Struct("!H")

STATIC_LEN = {
    ProfileId.UNCOMPRESSED: 0,
    ProfileId.UDP: _STATIC_IP.size + _STATIC_UDP.size,
    ProfileId.RTP: _STATIC_IP.size + _STATIC_UDP.size + _STATIC_RTP.size,
}
DYNAMIC_LEN = {
    ProfileId.UNCOMPRESSED: 0,
    ProfileId.UDP: _DYN_IP.size + _DYN_UDP.size + _DYN_UDP_SN.size,
    ProfileId.RTP: _DYN_IP.size + _DYN_UDP.size + _DYN_RTP.size,
}


class RohcError(Exception):
    counter = "rohc_error"


class MalformedPacket(RohcError):
    counter = "malformed"


class NoContext(RohcError):
    counter = "no_context"


class CrcFailure(RohcError):
    counter = "decomp_crc_fail"


class FlowKey(NamedTuple):
    src: bytes
    dst: bytes
    proto: int
    sport: int = 0
    dport: int = 0
    ssrc: int = 0


@dataclass
class Fields:
    """Header fields of one IPv4[/UDP[/RTP]] packet."""

    vihl: int = 0x45
    tos: int = 0
    ipid: int = 0
    flags_frag: int = 0
    ttl: int = 0
    proto: int = 0
    src: bytes = b"\0" * 4
    dst: bytes = b"\0" * 4
    sport: int = 0
    dport: int = 0
    ucsum: int = 0
    b0: int = 0
    mpt: int = 0
    sn: int = 0
    ts: int = 0
    ssrc: int = 0

    @classmethod
    def parse(cls, l3, profile):
        vihl, tos, _tlen, ipid, ff, ttl, proto, _csum, src, dst = struct.unpack_from("!BBHHHBBH4s4s", l3)
        f = cls(vihl, tos, ipid, ff, ttl, proto, src, dst)
        if profile in (ProfileId.UDP, ProfileId.RTP):
            f.sport, f.dport, _ulen, f.ucsum = struct.unpack_from("!HHHH", l3, IPV4_LEN)
        if profile == ProfileId.RTP:
            f.b0, f.mpt, f.sn, f.ts, f.ssrc = struct.unpack_from("!BBHII", l3, IPV4_LEN + 8)
        return f

    def key(self):
        return FlowKey(self.src, self.dst, self.proto, self.sport, self.dport, self.ssrc)


def static_chain(profile, f):
    if profile == ProfileId.UNCOMPRESSED:
        return b""
    out = _STATIC_IP.pack(f.vihl, f.proto, f.src, f.dst) + _STATIC_UDP.pack(f.sport, f.dport)
    if profile == ProfileId.RTP:
        out += _STATIC_RTP.pack(f.ssrc)
    return out


def dynamic_chain(profile, f, sn, stride):
    out = _DYN_IP.pack(f.tos, f.ttl, f.ipid, f.flags_frag) + _DYN_UDP.pack(f.ucsum)
    if profile == ProfileId.RTP:
        out += _DYN_RTP.pack(f.b0, f.mpt, sn, f.ts, stride)
    else:
        out += _DYN_UDP_SN.pack(sn)
    return out


def invariants(profile, f, stride):
    """Dynamic fields that must match the context for a UO-0 packet."""
    out = struct.pack("!BBH", f.tos, f.ttl, f.flags_frag)
    if profile == ProfileId.RTP:
        out += struct.pack("!BBI", f.b0, f.mpt, stride)
    return out


def uo0_crc(static, inv, ucsum, sn):
    return crc3(static + inv + ucsum.to_bytes(2, "big") + bytes([sn & 0xF]))


def _signed16(x):
    x &= 0xFFFF
    return x - 0x10000 if x & 0x8000 else x


def _signed32(x):
    x &= 0xFFFFFFFF
    return x - 0x100000000 if x & 0x80000000 else x


def scaled_ts(ts_ref, sn_ref, sn, stride):
    """TS rebuilt from an SN offset: ts_ref + (sn - sn_ref) * stride (mod 2^32)."""
    return (ts_ref + _signed16(sn - sn_ref) * stride) & 0xFFFFFFFF


def _inferable(l3, profile):
    # Lengths and the IPv4 checksum are rebuilt by the decompressor, so they
    # must already be consistent for the rebuilt header to be bit-exact.
    hlen = HEADER_LEN[profile]
    if len(l3) < hlen or l3[0] != 0x45:
        return False
    if int.from_bytes(l3[2:4], "big") != len(l3):
        return False
    if int.from_bytes(l3[IPV4_LEN + 4:IPV4_LEN + 6], "big") != len(l3) - IPV4_LEN:
        return False
    return ipv4_checksum_ok(l3)


@dataclass
class CompContext:
    cid: int
    key: FlowKey
    profile: ProfileId
    window: WlsbWindow = field(default_factory=lambda: WlsbWindow(WINDOW_SIZE, SN_P))
    state: str = "IR"
    static: bytes = b""
    inv: bytes = b""
    csum_used: bool = False
    stride: int = 0
    sn: int = 0
    ts: int = 0
    ipid: int = 0
    gen_sn: int = 0
    since_ir: int = 0
    packets: int = 0
    ir_count: int = 0
    uo0_count: int = 0
    bytes_in: int = 0
    bytes_out: int = 0

    def stats(self):
        return {
            "cid": self.cid,
            "profile": int(self.profile),
            "packets": self.packets,
            "ir_count": self.ir_count,
            "uo0_count": self.uo0_count,
            "mean_compressed_size": self.bytes_out / self.packets if self.packets else 0.0,
        }


class Compressor:
    """Per-flow compressor contexts keyed by exact FlowKey equality."""

    def __init__(self, max_contexts=MAX_CIDS, refresh=DEFAULT_REFRESH):
        if not 1 <= max_contexts <= MAX_CIDS:
            raise ValueError(f"max_contexts must be 1..{MAX_CIDS}, got {max_contexts}")
        self.max_contexts = max_contexts
        self.refresh = refresh
        self.contexts = {}
        self.counters = Counter()

    def _context(self, key, profile):
        ctx = self.contexts.get(key)
        if ctx is None:
            if len(self.contexts) >= self.max_contexts:
                return None
            used = {c.cid for c in self.contexts.values()}
            cid = next(i for i in range(self.max_contexts) if i not in used)
            ctx = self.contexts[key] = CompContext(cid, key, profile)
        return ctx

    def compress(self, l3, profile=None):
        """Compress one IPv4 packet. Returns the ROHC packet, or None when no
        context could be allocated (the caller forwards it uncompressed)."""
        if profile is None:
            profile = classify_l3(l3)
        profile = ProfileId(profile)
        if profile != ProfileId.UNCOMPRESSED and not _inferable(l3, profile):
            self.counters["uncompressible"] += 1
            profile = ProfileId.UNCOMPRESSED
        f = Fields.parse(l3, profile)
        ctx = self._context(f.key(), profile)
        if ctx is None:
            self.counters["no_context"] += 1
            return None
        if ctx.profile != profile:
            ctx.profile = profile
            ctx.state = "IR"
            self.counters["ir_profile"] += 1

        if profile == ProfileId.UNCOMPRESSED:
            out = self._uncompressed(ctx, l3)
        else:
            out = self._compress_chain(ctx, f, l3[HEADER_LEN[profile]:])
        ctx.packets += 1
        ctx.bytes_in += len(l3)
        ctx.bytes_out += len(out)
        return out

    def _uncompressed(self, ctx, l3):
        cid_octet = bytes([ADD_CID | ctx.cid])
        if ctx.state == "IR" or ctx.since_ir >= self.refresh:
            head = cid_octet + bytes([IR_TYPE, ProfileId.UNCOMPRESSED])
            ctx.state, ctx.since_ir = "SO", 0
            ctx.ir_count += 1
            return head + bytes([crc8(head)]) + l3
        ctx.since_ir += 1
        ctx.uo0_count += 1
        return cid_octet + l3

    def _ir_reason(self, ctx, f, sn, static):
        if ctx.state == "IR":
            return "ir_first"
        if ctx.since_ir >= self.refresh:
            return "ir_refresh"
        if static != ctx.static or invariants(ctx.profile, f, ctx.stride) != ctx.inv:
            return "ir_dynamic"
        if (f.ucsum != 0) != ctx.csum_used:
            return "ir_dynamic"
        dsn = _signed16(sn - ctx.sn)
        if f.ipid != (ctx.ipid + dsn) & 0xFFFF:
            return "ir_ipid"
        if ctx.profile == ProfileId.RTP and f.ts != scaled_ts(ctx.ts, ctx.sn, sn, ctx.stride):
            return "ir_ts"
        enc = ctx.window.encode(sn)
        if enc is None or enc[0] > SN_BITS:
            return "ir_wlsb"
        return None

    def _compress_chain(self, ctx, f, payload):
        profile = ctx.profile
        if profile == ProfileId.RTP:
            sn = f.sn
        else:
            sn = ctx.gen_sn
            ctx.gen_sn = (ctx.gen_sn + 1) & 0xFFFF
        static = static_chain(profile, f)
        reason = self._ir_reason(ctx, f, sn, static)
        cid_octet = bytes([ADD_CID | ctx.cid])
        if reason is None:
            crc = uo0_crc(ctx.static, ctx.inv, f.ucsum, sn)
            block = cid_octet + bytes([((sn & 0xF) << 3) | crc])
            if ctx.csum_used:
                block += f.ucsum.to_bytes(2, "big")
            ctx.window.add(sn)
            ctx.since_ir += 1
            ctx.uo0_count += 1
        else:
            self.counters[reason] += 1
            if profile == ProfileId.RTP and ctx.state != "IR":
                ctx.stride = self._estimate_stride(ctx, f)
            elif ctx.state == "IR":
                ctx.stride = 0
            body = (cid_octet + bytes([IR_DYN, profile]) + static
                    + dynamic_chain(profile, f, sn, ctx.stride))
            block = body + bytes([crc8(body)])
            ctx.static = static
            ctx.inv = invariants(profile, f, ctx.stride)
            ctx.csum_used = f.ucsum != 0
            ctx.window.reset(sn)
            ctx.state, ctx.since_ir = "SO", 0
            ctx.ir_count += 1
        ctx.sn, ctx.ts, ctx.ipid = sn, f.ts, f.ipid
        return block + payload

    @staticmethod
    def _estimate_stride(ctx, f):
        dsn = _signed16(f.sn - ctx.sn)
        dts = _signed32(f.ts - ctx.ts)
        if dsn == 0 or dts % dsn:
            return 0
        return (dts // dsn) & 0xFFFFFFFF

    def flow_stats(self):
        return {_key_label(k): c.stats() for k, c in self.contexts.items()}


@dataclass
class DecompContext:
    cid: int
    profile: ProfileId
    state: str = "FullContext"
    fields: Fields = field(default_factory=Fields)
    static: bytes = b""
    inv: bytes = b""
    csum_used: bool = False
    stride: int = 0
    sn: int = 0
    ts: int = 0
    ipid: int = 0
    packets: int = 0
    ir_count: int = 0


class Decompressor:
    def __init__(self, max_contexts=MAX_CIDS):
        self.max_contexts = max_contexts
        self.contexts = {}
        self.counters = Counter()

    def decompress(self, data):
        """Return the rebuilt IPv4 packet; raise RohcError on failure."""
        try:
            return self._decompress(bytes(data))
        except RohcError as exc:
            self.counters[exc.counter] += 1
            raise

    def _decompress(self, data):
        if len(data) < 2 or data[0] & 0xF0 != ADD_CID:
            raise MalformedPacket("missing Add-CID octet")
        cid = data[0] & 0x0F
        if cid >= self.max_contexts:
            raise NoContext(f"cid {cid} beyond capacity {self.max_contexts}")
        kind = data[1]
        if kind & 0xFE == IR_TYPE:
            return self._ir(cid, data)
        ctx = self.contexts.get(cid)
        if ctx is None:
            raise NoContext(f"no context for cid {cid}")
        if ctx.profile == ProfileId.UNCOMPRESSED:
            ctx.packets += 1
            return data[1:]
        if kind & 0x80:
            raise MalformedPacket(f"unsupported packet type 0x{kind:02x}")
        return self._uo0(ctx, data)

    def _ir(self, cid, data):
        if len(data) < 4:
            raise MalformedPacket("truncated IR")
        try:
            profile = ProfileId(data[2])
        except ValueError:
            raise MalformedPacket(f"unknown profile {data[2]}") from None
        if profile == ProfileId.UNCOMPRESSED:
            if crc8(data[:3]) != data[3]:
                raise CrcFailure("IR CRC-8 mismatch")
            ctx = self.contexts[cid] = DecompContext(cid, profile)
            ctx.ir_count = ctx.packets = 1
            return data[4:]
        if data[1] != IR_DYN:
            raise MalformedPacket("IR without dynamic chain")
        n_static, n_dyn = STATIC_LEN[profile], DYNAMIC_LEN[profile]
        end = 3 + n_static + n_dyn
        if len(data) < end + 1:
            raise MalformedPacket("truncated IR")
        if crc8(data[:end]) != data[end]:
            raise CrcFailure("IR CRC-8 mismatch")

        f = Fields()
        static = data[3:3 + n_static]
        f.vihl, f.proto, f.src, f.dst = _STATIC_IP.unpack_from(static)
        f.sport, f.dport = _STATIC_UDP.unpack_from(static, _STATIC_IP.size)
        pos = 3 + n_static
        f.tos, f.ttl, f.ipid, f.flags_frag = _DYN_IP.unpack_from(data, pos)
        (f.ucsum,) = _DYN_UDP.unpack_from(data, pos + _DYN_IP.size)
        pos += _DYN_IP.size + _DYN_UDP.size
        stride = 0
        if profile == ProfileId.RTP:
            (f.ssrc,) = _STATIC_RTP.unpack_from(static, _STATIC_IP.size + _STATIC_UDP.size)
            f.b0, f.mpt, f.sn, f.ts, stride = _DYN_RTP.unpack_from(data, pos)
        else:
            (f.sn,) = _DYN_UDP_SN.unpack_from(data, pos)

        old = self.contexts.get(cid)
        ctx = self.contexts[cid] = DecompContext(cid, profile, fields=f)
        if old is not None and old.profile == profile:
            ctx.packets, ctx.ir_count = old.packets, old.ir_count
        ctx.static = bytes(static)
        ctx.stride = stride
        ctx.inv = invariants(profile, f, stride)
        ctx.csum_used = f.ucsum != 0
        ctx.sn, ctx.ts, ctx.ipid = f.sn, f.ts, f.ipid
        ctx.packets += 1
        ctx.ir_count += 1
        return self._rebuild(ctx, f.sn, f.ts, f.ipid, f.ucsum, data[end + 1:])

    def _uo0(self, ctx, data):
        octet = data[1]
        pos = 2
        ucsum = 0
        if ctx.csum_used:
            if len(data) < 4:
                raise MalformedPacket("truncated UO-0")
            ucsum = int.from_bytes(data[2:4], "big")
            pos = 4
        sn_bits = (octet >> 3) & 0xF
        if uo0_crc(ctx.static, ctx.inv, ucsum, sn_bits) != octet & 0x7:
            raise CrcFailure("UO-0 CRC-3 mismatch")
        sn = wlsb_decode(sn_bits, SN_BITS, ctx.sn, SN_P)
        dsn = _signed16(sn - ctx.sn)
        ts = scaled_ts(ctx.ts, ctx.sn, sn, ctx.stride) if ctx.profile == ProfileId.RTP else 0
        ipid = (ctx.ipid + dsn) & 0xFFFF
        ctx.sn, ctx.ts, ctx.ipid = sn, ts, ipid
        ctx.packets += 1
        return self._rebuild(ctx, sn, ts, ipid, ucsum, data[pos:])

    @staticmethod
    def _rebuild(ctx, sn, ts, ipid, ucsum, payload):
        f = ctx.fields
        hlen = HEADER_LEN[ctx.profile]
        total = hlen + len(payload)
        ip = pack_ipv4(f.tos, total, ipid, f.flags_frag, f.ttl, f.proto, f.src, f.dst, vihl=f.vihl)
        udp = pack_udp(f.sport, f.dport, total - IPV4_LEN, ucsum)
        if ctx.profile == ProfileId.RTP:
            rtp = pack_rtp(sn, ts, f.ssrc, b0=f.b0, pt=f.mpt & 0x7F, marker=f.mpt >> 7)
            return ip + udp + rtp + payload
        return ip + udp + payload

    def flow_stats(self):
        return {
            str(cid): {"cid": cid, "profile": int(c.profile), "packets": c.packets, "ir_count": c.ir_count}
            for cid, c in sorted(self.contexts.items())
        }


def _key_label(key):
    src = ".".join(map(str, key.src))
    dst = ".".join(map(str, key.dst))
    return f"{src}:{key.sport}->{dst}:{key.dport}/{key.proto}/ssrc={key.ssrc:#010x}"


__all__ = [
    "ADD_CID", "Compressor", "CompContext", "CrcFailure", "DecompContext", "Decompressor",
    "FlowKey", "MalformedPacket", "NoContext", "RohcError", "scaled_ts",
]
