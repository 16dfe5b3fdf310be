import random

import pytest
from hypothesis import given, settings, strategies as st

from extsw.inet import ETHERTYPE_ROHC, ipv4_checksum_ok
from extsw.ir import load_config_file
from extsw.parser import ParserProgram, ParseUnderrun

from helpers import eth, fixture_path, ipv4_udp_frame, random_rtp_frame


@pytest.fixture(scope="module")
def prog():
    cfg = load_config_file(fixture_path("rohc_pipeline.json"))
    return ParserProgram(cfg)


def rtp_frame(payload=b"p" * 20):
    return random_rtp_frame(random.Random(3))[:54] + payload


def test_full_stack(prog):
    frame = rtp_frame()
    assert len(frame) == 74
    pkt = prog.new_packet(frame)
    assert prog.run(pkt) == "parse_rtp"
    assert pkt.valid_headers() == {"ethernet", "ipv4", "udp", "rtp"}
    assert pkt.payload_offset == 54
    assert pkt.payload == b"p" * 20
    assert pkt.meta["is_rohc"] == 0


def test_ethernet_only(prog):
    frame = eth(ethertype=0x86DD) + b"\x00" * 40
    pkt = prog.new_packet(frame)
    assert prog.run(pkt) == "parse_eth"
    assert pkt.valid_headers() == {"ethernet"}
    assert pkt.payload_offset == 14


def test_non_rtp_udp_stops_at_udp(prog):
    pkt = prog.new_packet(ipv4_udp_frame(dport=53))
    prog.run(pkt)
    assert pkt.valid_headers() == {"ethernet", "ipv4", "udp"}
    assert pkt.payload_offset == 42


def test_rohc_ethertype_sets_metadata(prog):
    pkt = prog.new_packet(eth(ethertype=ETHERTYPE_ROHC) + b"\xe0\x12")
    assert prog.run(pkt) == "parse_rohc"
    assert pkt.meta["is_rohc"] == 1
    assert pkt.valid_headers() == {"ethernet"}


def test_underrun(prog):
    pkt = prog.new_packet(rtp_frame()[:40])
    with pytest.raises(ParseUnderrun):
        prog.run(pkt)
    assert pkt.counters["parse_underrun"] == 1


def test_invalidate_then_deparse(prog):
    pkt = prog.new_packet(rtp_frame())
    prog.run(pkt)
    for h in ("ipv4", "udp", "rtp"):
        pkt.set_header_validity(h, False)
    pkt.set_payload(b"\xe0\x12\x34")
    out = prog.deparse(pkt)
    assert len(out) == 17
    assert out[14:] == b"\xe0\x12\x34"
    assert pkt.standard_metadata["packet_length"] == 17


def test_invalidate_keeps_ethernet_and_short_block(prog):
    pkt = prog.new_packet(ipv4_udp_frame(dport=0x1390, payload=b"z" * 20))
    prog.run(pkt)
    assert pkt.payload_offset == 54
    for h in ("ipv4", "udp", "rtp"):
        pkt.set_header_validity(h, False)
    pkt.set_payload(b"\xe0\x12\x34" + b"z" * 20)
    assert len(prog.deparse(pkt)) == 37


def test_ttl_change_with_checksum(prog):
    from extsw.inet import ipv4_checksum
    pkt = prog.new_packet(ipv4_udp_frame(ttl=64))
    prog.run(pkt)
    pkt.set_field(("ipv4", "ttl"), 63)
    ip = pkt.header("ipv4")
    ip.values[ip.layout.index["hdrChecksum"]] = 0
    ip.values[ip.layout.index["hdrChecksum"]] = ipv4_checksum(ip.to_bytes())
    out = prog.deparse(pkt)
    assert out[22] == 63
    assert ipv4_checksum_ok(out[14:34])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["rtp", "udp", "eth", "rohc"]))
def test_parse_deparse_roundtrip(prog, seed, kind):
    rng = random.Random(seed)
    if kind == "rtp":
        frame = random_rtp_frame(rng)
    elif kind == "udp":
        frame = ipv4_udp_frame(dport=rng.randrange(0, 0x1300), payload=rng.randbytes(rng.randrange(64)))
    elif kind == "rohc":
        frame = eth(ethertype=ETHERTYPE_ROHC) + rng.randbytes(rng.randrange(1, 40))
    else:
        frame = eth(ethertype=rng.choice([0x86DD, 0x0806])) + rng.randbytes(rng.randrange(64))
    pkt = prog.new_packet(frame)
    prog.run(pkt)
    assert prog.deparse(pkt) == frame
