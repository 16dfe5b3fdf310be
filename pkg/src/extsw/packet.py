"""Packets in flight: byte buffer, parsed header instances and metadata."""

from collections import Counter
from enum import IntEnum

from .ir import META, STANDARD_METADATA, STD_META


class InstanceType(IntEnum):
    NORMAL = 0
    RESUBMITTED = 1
    RECIRCULATED = 2


class FieldAccessError(Exception):
    """Read of a field in an invalid header (or of an unknown field)."""


class HeaderLayout:
    """Bit layout of one header type, precomputed for fast (un)packing."""

    __slots__ = ("name", "names", "widths", "index", "masks", "nbytes")

    def __init__(self, htype):
        self.name = htype.name
        self.names = [n for n, _ in htype.fields]
        self.widths = [w for _, w in htype.fields]
        self.index = {n: i for i, n in enumerate(self.names)}
        self.masks = [(1 << w) - 1 for w in self.widths]
        self.nbytes = htype.byte_width

    def unpack(self, data):
        v = int.from_bytes(data, "big")
        out = [0] * len(self.widths)
        for i in range(len(self.widths) - 1, -1, -1):
            out[i] = v & self.masks[i]
            v >>= self.widths[i]
        return out

    def pack(self, values):
        v = 0
        for value, width in zip(values, self.widths):
            v = (v << width) | value
        return v.to_bytes(self.nbytes, "big")


class HeaderInstance:
    __slots__ = ("layout", "valid", "values")

    def __init__(self, layout, values=None, valid=False):
        self.layout = layout
        self.valid = valid
        self.values = values if values is not None else [0] * len(layout.widths)

    @property
    def name(self):
        return self.layout.name

    def get(self, fname):
        return self.values[self.layout.index[fname]]

    def to_bytes(self):
        return self.layout.pack(self.values)

    def copy(self):
        return HeaderInstance(self.layout, list(self.values), self.valid)

    def __repr__(self):
        fields = ", ".join(f"{n}={v:#x}" for n, v in zip(self.layout.names, self.values))
        return f"<{self.name} {'valid' if self.valid else 'invalid'} {fields}>"


class Packet:
    """One packet owned by a single pipeline execution."""

    def __init__(self, buffer, ingress_port=0, layouts=None, meta_widths=None):
        self.buffer = bytes(buffer)
        self.payload_offset = 0
        self.layouts = layouts or {}
        self.meta_widths = meta_widths or {}
        self.headers = {}
        self.standard_metadata = {
            "ingress_port": ingress_port,
            "egress_port": 0,
            "packet_length": len(self.buffer),
            "instance_type": InstanceType.NORMAL,
            "resubmit_count": 0,
        }
        self.meta = dict.fromkeys(self.meta_widths, 0)
        self.trace = []
        self.counters = Counter()
        self.fault = None

    # -- headers ---------------------------------------------------------

    def header(self, name):
        """Header instance by name, created invalid on first use."""
        h = self.headers.get(name)
        if h is None:
            layout = self.layouts.get(name)
            if layout is None:
                raise FieldAccessError(f"unknown header '{name}'")
            h = self.headers[name] = HeaderInstance(layout)
        return h

    def is_valid(self, name):
        h = self.headers.get(name)
        return h is not None and h.valid

    def valid_headers(self):
        return {n for n, h in self.headers.items() if h.valid}

    def reset_headers(self):
        self.headers = {}
        self.payload_offset = 0

    @property
    def payload(self):
        return self.buffer[self.payload_offset:]

    def set_payload(self, data):
        """Replace the payload region; the buffer is rebuilt at deparse."""
        self.buffer = self.buffer[:self.payload_offset] + bytes(data)

    # -- field access ----------------------------------------------------

    def get_field(self, ref):
        hdr, fname = ref
        if hdr == META:
            try:
                return self.meta[fname]
            except KeyError:
                raise FieldAccessError(f"undeclared metadata '{fname}'") from None
        if hdr == STD_META:
            return int(self.standard_metadata[fname])
        h = self.headers.get(hdr)
        if h is None or not h.valid:
            raise FieldAccessError(f"read of {hdr}.{fname} from an invalid header")
        try:
            return h.values[h.layout.index[fname]]
        except KeyError:
            raise FieldAccessError(f"header '{hdr}' has no field '{fname}'") from None

    def _truncate(self, value, width):
        masked = value & ((1 << width) - 1)
        if masked != value:
            self.counters["truncated"] += 1
        return masked

    def set_field(self, ref, value):
        hdr, fname = ref
        if hdr == META:
            width = self.meta_widths.get(fname)
            if width is None:
                raise FieldAccessError(f"undeclared metadata '{fname}'")
            self.meta[fname] = self._truncate(value, width)
        elif hdr == STD_META:
            if fname not in STANDARD_METADATA:
                raise FieldAccessError(f"unknown standard_metadata field '{fname}'")
            self.standard_metadata[fname] = self._truncate(value, STANDARD_METADATA[fname])
        else:
            h = self.header(hdr)
            i = h.layout.index.get(fname)
            if i is None:
                raise FieldAccessError(f"header '{hdr}' has no field '{fname}'")
            h.values[i] = self._truncate(value, h.layout.widths[i])

    def set_metadata(self, name, value):
        self.set_field((META, name), value)

    def set_header_validity(self, name, valid):
        self.header(name).valid = bool(valid)

    @property
    def resubmit_count(self):
        return self.standard_metadata["resubmit_count"]

    @property
    def instance_type(self):
        return self.standard_metadata["instance_type"]

    def __repr__(self):
        valid = ",".join(n for n, h in self.headers.items() if h.valid)
        return f"<Packet len={len(self.buffer)} headers=[{valid}] payload@{self.payload_offset}>"
