"""Deterministic Ethernet/IPv4/UDP/RTP traffic for host A."""

import random
from dataclasses import dataclass

from .inet import (ETH_LEN, ETHERTYPE_IPV4, IPPROTO_UDP, IPV4_LEN, RTP_LEN, RTP_PORT_VALUE,
                   UDP_LEN, ip_addr, mac_addr, pack_ipv4, pack_rtp, pack_udp)

HOST_A_MAC = "00:00:00:00:00:01"
HOST_B_MAC = "00:00:00:00:00:02"
HOST_A_IP = "10.0.0.1"
HOST_B_IP = "10.0.0.2"

# Largest flow count that still gets distinct RTP destination ports (even
# ports inside the 32-port RTP range) and fits the 16 small CIDs.
MAX_FLOWS = 16


@dataclass(frozen=True)
class TrafficSpec:
    flows: int = 1
    packets_per_flow: int = 10_000
    packet_size: int = 74
    payload_size: int = 20
    sn_start: int | None = None
    sn_step: int = 1
    ts_stride: int = 160
    ts_jitter: float = 0.0
    seed: int = 7
    src_ip: str = HOST_A_IP
    dst_ip: str = HOST_B_IP
    src_mac: str = HOST_A_MAC
    dst_mac: str = HOST_B_MAC
    base_sport: int = 40_000
    payload_type: int = 0

    def check(self):
        if ETH_LEN + IPV4_LEN + UDP_LEN + RTP_LEN + self.payload_size != self.packet_size:
            raise ValueError(
                f"packet_size {self.packet_size} != 14+20+8+12+payload_size ({self.payload_size})")
        if not 0 <= self.flows <= MAX_FLOWS:
            raise ValueError(f"flows must be 0..{MAX_FLOWS}")
        if self.packets_per_flow < 0:
            raise ValueError("packets_per_flow must be >= 0")
        if not 0.0 <= self.ts_jitter <= 1.0:
            raise ValueError("ts_jitter is a probability")


@dataclass
class _Flow:
    sport: int
    dport: int
    ssrc: int
    sn: int
    ts: int
    ipid: int


def rtp_frame(spec, flow, sn, ts, ipid, payload):
    udp_len = UDP_LEN + RTP_LEN + len(payload)
    ip = pack_ipv4(0, IPV4_LEN + udp_len, ipid, 0x4000, 64, IPPROTO_UDP,
                   ip_addr(spec.src_ip), ip_addr(spec.dst_ip))
    udp = pack_udp(flow.sport, flow.dport, udp_len, 0)
    rtp = pack_rtp(sn, ts, flow.ssrc, pt=spec.payload_type)
    eth = mac_addr(spec.dst_mac) + mac_addr(spec.src_mac) + ETHERTYPE_IPV4.to_bytes(2, "big")
    return eth + ip + udp + rtp + payload


def generate_traffic(spec=TrafficSpec(), compressor=None, ethertype=None):
    """Return the frame sequence for ``spec``, round-robin across flows.

    With a ``compressor`` the frames are compressed host-side before being
    returned (host A sends ROHC frames).
    """
    spec.check()
    rng = random.Random(spec.seed)
    flows = []
    for i in range(spec.flows):
        flows.append(_Flow(
            sport=spec.base_sport + i,
            dport=RTP_PORT_VALUE + (12 + 2 * i) % 32,
            ssrc=rng.getrandbits(32),
            sn=rng.getrandbits(16) if spec.sn_start is None else spec.sn_start,
            ts=rng.getrandbits(32),
            ipid=rng.getrandbits(16),
        ))
    frames = []
    for _ in range(spec.packets_per_flow):
        for flow in flows:
            ts = flow.ts
            if spec.ts_jitter and rng.random() < spec.ts_jitter:
                ts = (ts + rng.randint(1, spec.ts_stride - 1 or 1)) & 0xFFFFFFFF
            payload = rng.randbytes(spec.payload_size)
            frames.append(rtp_frame(spec, flow, flow.sn, ts, flow.ipid, payload))
            flow.sn = (flow.sn + spec.sn_step) & 0xFFFF
            flow.ts = (flow.ts + spec.sn_step * spec.ts_stride) & 0xFFFFFFFF
            flow.ipid = (flow.ipid + spec.sn_step) & 0xFFFF
    if compressor is not None:
        from .rohc.frames import compress_frame
        kwargs = {} if ethertype is None else {"ethertype": ethertype}
        frames = [compress_frame(compressor, f, **kwargs) for f in frames]
    return frames
