"""Shared builders for the test suite."""

import random
from importlib import resources

from extsw.inet import (ETHERTYPE_IPV4, IPPROTO_UDP, RTP_PORT_VALUE, ip_addr, mac_addr, pack_ipv4, pack_rtp,
                        pack_udp)

FIXTURES = resources.files("extsw.fixtures")


def fixture_path(name):
    return str(FIXTURES.joinpath(name))


def eth(src="00:00:00:00:00:01", dst="00:00:00:00:00:02", ethertype=ETHERTYPE_IPV4):
    return mac_addr(dst) + mac_addr(src) + ethertype.to_bytes(2, "big")


def ipv4_udp_frame(dst="10.0.0.2", dport=7000, payload=b"x" * 20, ttl=64, ident=1):
    udp_len = 8 + len(payload)
    ip = pack_ipv4(0, 20 + udp_len, ident, 0x4000, ttl, IPPROTO_UDP, ip_addr("10.0.0.1"), ip_addr(dst))
    return eth() + ip + pack_udp(40000, dport, udp_len) + payload


def random_rtp_frame(rng):
    """An Eth/IPv4/UDP/RTP frame with random field values that still parses as such."""
    payload = rng.randbytes(rng.randrange(0, 64))
    udp_len = 8 + 12 + len(payload)
    ip = bytearray(rng.randbytes(20))
    ip[9] = IPPROTO_UDP
    udp = bytearray(rng.randbytes(8))
    dport = RTP_PORT_VALUE | rng.randrange(32)
    udp[2:4] = dport.to_bytes(2, "big")
    udp[4:6] = udp_len.to_bytes(2, "big")
    rtp = rng.randbytes(12)
    src = rng.randbytes(6)
    dst = rng.randbytes(6)
    return dst + src + ETHERTYPE_IPV4.to_bytes(2, "big") + bytes(ip) + bytes(udp) + rtp + payload


class FlowState:
    """One synthetic flow whose dynamic fields change in controlled ways."""

    def __init__(self, rng, kind, index):
        self.rng = rng
        self.kind = kind  # "rtp" | "udp" | "other"
        self.sport = 30000 + index
        self.dport = RTP_PORT_VALUE + 2 * index if kind == "rtp" else 9000 + index
        self.src = ip_addr(f"10.1.0.{index + 1}")
        self.dst = ip_addr(f"10.2.0.{index + 1}")
        self.ssrc = rng.getrandbits(32)
        # Start some flows right below the 16-bit wrap.
        self.sn = rng.choice([rng.getrandbits(16), 0xFFFF - rng.randrange(20)])
        self.ts = rng.getrandbits(32)
        self.stride = rng.choice([160, 320, 3000])
        self.ipid = rng.getrandbits(16)
        self.ttl = 64
        self.ucsum = rng.choice([0, 0, rng.getrandbits(16)])
        self.marker = 0

    def next(self):
        rng = self.rng
        step = 1
        r = rng.random()
        if r < 0.05:
            step = rng.randint(2, 7)  # SN gap
        self.sn = (self.sn + step) & 0xFFFF
        self.ts = (self.ts + step * self.stride) & 0xFFFFFFFF
        self.ipid = (self.ipid + step) & 0xFFFF
        r = rng.random()
        if r < 0.03:
            self.ts = (self.ts + rng.randrange(1, 1000)) & 0xFFFFFFFF  # stride break
        elif r < 0.04:
            self.stride = rng.choice([160, 240, 320])
        elif r < 0.05:
            self.ipid = rng.getrandbits(16)
        elif r < 0.055:
            self.ttl = rng.randrange(1, 256)
        elif r < 0.06:
            self.marker ^= 1
        if self.ucsum and rng.random() < 0.5:
            self.ucsum = rng.getrandbits(16) or 1
        payload = rng.randbytes(rng.randrange(0, 40))
        if self.kind == "other":
            ip = pack_ipv4(0, 20 + len(payload), self.ipid, 0, self.ttl, 1, self.src, self.dst)
            return ip + payload
        rtp = pack_rtp(self.sn, self.ts, self.ssrc, pt=96, marker=self.marker) if self.kind == "rtp" else b""
        udp_len = 8 + len(rtp) + len(payload)
        ip = pack_ipv4(0, 20 + udp_len, self.ipid, 0x4000, self.ttl, IPPROTO_UDP, self.src, self.dst)
        return ip + pack_udp(self.sport, self.dport, udp_len, self.ucsum) + rtp + payload


def interleaved_stream(seed, flows=8, packets=1000, kinds=("rtp", "rtp", "rtp", "rtp", "rtp", "udp", "udp", "other")):
    """Round-robin IPv4 packets from ``flows`` synthetic flows."""
    rng = random.Random(seed)
    states = [FlowState(rng, kinds[i % len(kinds)], i) for i in range(flows)]
    out = []
    for i in range(packets):
        out.append(states[i % flows].next())
    return out
