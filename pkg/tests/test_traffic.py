import pytest

from extsw.inet import ipv4_checksum_ok, is_rtp_port, unpack_rtp
from extsw.traffic import MAX_FLOWS, TrafficSpec, generate_traffic


def test_deterministic_and_sized():
    a = generate_traffic(TrafficSpec(packets_per_flow=20, flows=3, seed=11))
    b = generate_traffic(TrafficSpec(packets_per_flow=20, flows=3, seed=11))
    assert a == b
    assert len(a) == 60
    assert {len(f) for f in a} == {74}
    assert generate_traffic(TrafficSpec(packets_per_flow=20, flows=3, seed=12)) != a


def test_fields_advance_per_flow():
    frames = generate_traffic(TrafficSpec(packets_per_flow=5, flows=2))
    first, third = frames[0][14:], frames[2][14:]
    (_, _, sn0, ts0, ssrc0), (_, _, sn1, ts1, ssrc1) = unpack_rtp(first), unpack_rtp(third)
    assert ssrc0 == ssrc1
    assert (sn1 - sn0) & 0xFFFF == 1 and (ts1 - ts0) & 0xFFFFFFFF == 160
    for f in frames:
        assert ipv4_checksum_ok(f[14:34])
        assert is_rtp_port(int.from_bytes(f[36:38], "big"))


def test_flows_have_distinct_ports():
    frames = generate_traffic(TrafficSpec(packets_per_flow=1, flows=MAX_FLOWS))
    assert len({f[36:38] for f in frames}) == MAX_FLOWS


@pytest.mark.parametrize("kw", [{"flows": MAX_FLOWS + 1}, {"packet_size": 80}, {"packets_per_flow": -1},
                                {"ts_jitter": 2.0}])
def test_bad_specs(kw):
    with pytest.raises(ValueError):
        generate_traffic(TrafficSpec(**kw))
