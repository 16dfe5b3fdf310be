"""Header compression bound to the switch: native primitives and the extern type.

Both entry points run the same two functions below, so the native and the
extern configuration produce the same bytes.
"""

from ..externs import ExternType, extern_method
from ..inet import ETHERTYPE_IPV4, ETHERTYPE_ROHC
from ..primitives import PrimitiveFault
from .codec import MAX_CIDS, Compressor, Decompressor, RohcError
from .profiles import classify_profile

L3_HEADERS = ("ipv4", "udp", "rtp")


def compress_packet(pkt, compressor, ethertype=ETHERTYPE_ROHC):
    """Replace the IPv4/UDP/RTP headers of ``pkt`` with a compressed block.

    The block is placed at the start of the payload and the L3+ headers are
    invalidated. When the context store is full the packet is left as is.
    """
    if not pkt.is_valid("ipv4"):
        return
    profile = classify_profile(pkt.valid_headers())
    l3 = b"".join(pkt.headers[h].to_bytes() for h in L3_HEADERS if pkt.is_valid(h)) + pkt.payload
    block = compressor.compress(l3, profile)
    if block is None:
        pkt.counters["no_context"] += 1
        return
    for h in L3_HEADERS:
        if pkt.is_valid(h):
            pkt.headers[h].valid = False
    pkt.set_payload(block)
    pkt.set_field(("ethernet", "etherType"), ethertype)


def decompress_packet(pkt, decompressor):
    """Recover the full headers into the payload region; raise PrimitiveFault on failure.

    The caller restores the IPv4 ethertype and sends the packet back to the parser.
    """
    try:
        l3 = decompressor.decompress(pkt.payload)
    except RohcError as exc:
        raise PrimitiveFault(exc.counter, str(exc)) from None
    pkt.set_payload(l3)
    if "decompressed" in pkt.meta_widths:
        pkt.set_metadata("decompressed", 1)


def register_rohc_primitives(table, compressor, decompressor, ethertype=ETHERTYPE_ROHC):
    """Add ``rohc_comp_header`` and ``rohc_decomp_header`` to a primitive table."""

    def rohc_comp_header(ctx):
        compress_packet(ctx.pkt, compressor, ethertype)

    def rohc_decomp_header(ctx):
        decompress_packet(ctx.pkt, decompressor)

    table.register("rohc_comp_header", rohc_comp_header)
    table.register("rohc_decomp_header", rohc_decomp_header)


class RohcExtern(ExternType):
    """One compressor and one decompressor context store per instance."""

    type_name = "rohc_ext"
    attributes = {"max_contexts": 8, "ir_refresh": 16, "ethertype": 16}

    def init(self):
        if not 1 <= self.max_contexts <= MAX_CIDS:
            raise ValueError(f"{self.name}: max_contexts must be 1..{MAX_CIDS}")
        if self.ethertype == ETHERTYPE_IPV4:
            raise ValueError(f"{self.name}: ethertype must differ from IPv4")
        self.compressor = Compressor(self.max_contexts, self.ir_refresh)
        self.decompressor = Decompressor(self.max_contexts)

    @extern_method
    def compress(self, pkt):
        compress_packet(pkt, self.compressor, self.ethertype)

    @extern_method
    def decompress(self, pkt):
        decompress_packet(pkt, self.decompressor)

    def capacity(self):
        """Test hook: size of the context stores."""
        return self.compressor.max_contexts
