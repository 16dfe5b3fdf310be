"""Parser state machine and deparser."""

from .ir import META
from .packet import FieldAccessError, HeaderLayout, Packet

ACCEPT = None


class ParseUnderrun(Exception):
    """The buffer ended in the middle of a header extraction."""


class _State:
    __slots__ = ("name", "extracts", "select", "transitions", "set_meta")

    def __init__(self, name, extracts, select, transitions, set_meta):
        self.name = name
        self.extracts = extracts
        self.select = select
        self.transitions = transitions
        self.set_meta = set_meta


class ParserProgram:
    """A parser graph compiled against one config and constant set."""

    def __init__(self, cfg, constants=None):
        self.cfg = cfg
        self.layouts = {h.name: HeaderLayout(h) for h in cfg.header_types}
        self.meta_widths = dict(cfg.metadata)
        self.states = {}
        for s in cfg.parser_states:
            transitions = []
            for t in s.transitions:
                if t.value is None:
                    transitions.append((None, None, t.next))
                else:
                    mask = -1 if t.mask is None else cfg.resolve(t.mask, constants)
                    transitions.append((cfg.resolve(t.value, constants) & mask, mask, t.next))
            set_meta = [(name, cfg.resolve(v, constants)) for name, v in s.set_metadata]
            self.states[s.name] = _State(
                s.name, [self.layouts[h] for h in s.extracts], s.select, transitions, set_meta)
        self.deparse_order = self._deparse_order()

    def _deparse_order(self):
        order = []
        seen = set()

        def walk(name):
            if name is None or name in seen:
                return
            seen.add(name)
            st = self.states[name]
            for layout in st.extracts:
                if layout.name not in order:
                    order.append(layout.name)
            for _, _, nxt in st.transitions:
                walk(nxt)

        walk("start")
        order.extend(h.name for h in self.cfg.header_types if h.name not in order)
        return order

    def run(self, pkt):
        """Extract headers from ``pkt.buffer``; returns the final state name.

        Raises ParseUnderrun when the buffer is too short for an extraction.
        """
        if not pkt.layouts:
            pkt.layouts = self.layouts
            pkt.meta_widths = self.meta_widths
            pkt.meta = dict.fromkeys(self.meta_widths, 0)
        pkt.trace.append("parser")
        buf = pkt.buffer
        pos = 0
        name = "start"
        last = name
        while name is not ACCEPT:
            st = self.states[name]
            last = name
            for layout in st.extracts:
                end = pos + layout.nbytes
                if end > len(buf):
                    pkt.counters["parse_underrun"] += 1
                    raise ParseUnderrun(f"{layout.name} needs {layout.nbytes} bytes at offset {pos}, "
                                        f"buffer has {len(buf)}")
                h = pkt.header(layout.name)
                h.values = layout.unpack(buf[pos:end])
                h.valid = True
                pos = end
            for mname, value in st.set_meta:
                pkt.set_field((META, mname), value)
            name = self._next(st, pkt)
        pkt.payload_offset = pos
        return last

    @staticmethod
    def _next(st, pkt):
        if st.select is None:
            for value, _, nxt in st.transitions:
                if value is None:
                    return nxt
            return ACCEPT
        try:
            key = pkt.get_field(st.select)
        except FieldAccessError:
            return ACCEPT
        for value, mask, nxt in st.transitions:
            if value is None or key & mask == value:
                return nxt
        return ACCEPT

    def deparse(self, pkt):
        """Serialize valid headers then the payload; updates buffer and length."""
        parts = []
        for name in self.deparse_order:
            h = pkt.headers.get(name)
            if h is not None and h.valid:
                parts.append(h.to_bytes())
        header_bytes = b"".join(parts)
        out = header_bytes + pkt.payload
        pkt.buffer = out
        pkt.payload_offset = len(header_bytes)
        pkt.standard_metadata["packet_length"] = len(out)
        return out

    def new_packet(self, data, ingress_port=0):
        return Packet(data, ingress_port, self.layouts, self.meta_widths)


def run_parser(cfg, pkt, constants=None):
    return ParserProgram(cfg, constants).run(pkt)


def deparse(cfg, pkt):
    return ParserProgram(cfg).deparse(pkt)
