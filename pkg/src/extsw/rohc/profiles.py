from enum import IntEnum

from ..inet import IPPROTO_UDP, IPV4_LEN, RTP_LEN, UDP_LEN, is_rtp_port


class ProfileId(IntEnum):
    UNCOMPRESSED = 0x0000
    RTP = 0x0001
    UDP = 0x0002


HEADER_LEN = {
    ProfileId.UNCOMPRESSED: 0,
    ProfileId.UDP: IPV4_LEN + UDP_LEN,
    ProfileId.RTP: IPV4_LEN + UDP_LEN + RTP_LEN,
}


def classify_profile(valid):
    """Profile for a set of valid header names (ethernet assumed parsed)."""
    if "ipv4" in valid and "udp" in valid:
        return ProfileId.RTP if "rtp" in valid else ProfileId.UDP
    return ProfileId.UNCOMPRESSED


def classify_l3(l3):
    """Same classification applied directly to IPv4 bytes.

    Mirrors the fixture parser graph: UDP when the protocol is 17, RTP when
    the UDP destination port falls in the RTP port range.
    """
    valid = {"ipv4"}
    if len(l3) >= IPV4_LEN + UDP_LEN and l3[9] == IPPROTO_UDP:
        valid.add("udp")
        dport = int.from_bytes(l3[IPV4_LEN + 2:IPV4_LEN + 4], "big")
        if len(l3) >= IPV4_LEN + UDP_LEN + RTP_LEN and is_rtp_port(dport):
            valid.add("rtp")
    return classify_profile(valid)
