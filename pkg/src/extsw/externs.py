"""Extern types: registration, instantiation and ``_<type>_<method>`` dispatch.

An extern type is a subclass of ExternType. It declares its attributes as a
``{name: bit width}`` mapping and marks callable methods with
``@extern_method``::

    class counter(ExternType):
        type_name = "counter"
        attributes = {"size": 16}

        def init(self):
            self.cells = [0] * self.size

        @extern_method
        def count(self, pkt, index):
            self.cells[index.get()] += 1

Methods receive the packet followed by the remaining action parameters:
``field`` parameters arrive as FieldHandle objects (``get``/``set``), every
other parameter type arrives already resolved.
"""

import logging
from dataclasses import dataclass

from .ir import MAX_FIELD_BITS, ConfigError
from .primitives import FieldArg, PrimitiveError

log = logging.getLogger(__name__)


class ExternError(ConfigError):
    """Bad extern type, instance or attribute binding."""


def extern_method(fn):
    fn._extern_method = True
    return fn


class ExternType:
    type_name = None
    attributes = {}

    def __init__(self, name, attrs):
        self.name = name
        self._ready = False
        for aname, value in attrs.items():
            setattr(self, aname, value)

    def init(self):
        """Build private state from the bound attributes. Called once."""

    def __repr__(self):
        return f"<{self.type_name} {self.name}>"


@dataclass(frozen=True)
class ExternTypeDescriptor:
    type_name: str
    attributes: dict
    methods: dict  # method name -> unbound function
    factory: type

    @classmethod
    def from_class(cls, klass):
        if not klass.type_name:
            raise ExternError(f"{klass.__name__} has no type_name")
        methods = {}
        for base in reversed(klass.__mro__):
            for name, fn in vars(base).items():
                if getattr(fn, "_extern_method", False):
                    methods[name] = fn
        return cls(klass.type_name, dict(klass.attributes), methods, klass)


class FieldHandle:
    """A field parameter bound to the packet being processed."""

    __slots__ = ("pkt", "ref")

    def __init__(self, pkt, ref):
        self.pkt = pkt
        self.ref = ref

    def get(self):
        return self.pkt.get_field(self.ref)

    def set(self, value):
        self.pkt.set_field(self.ref, value)


def _method_primitive(type_name, method_name, fn):
    def call(ctx, inst_arg, *args):
        inst = inst_arg.instance
        if not inst._ready:
            raise ExternError(f"{inst.name}: method call before init")
        pkt = ctx.pkt
        values = [FieldHandle(pkt, a.ref) if isinstance(a, FieldArg) else a.get(ctx) for a in args]
        fn(inst, pkt, *values)

    call.extern_type = type_name
    call.__name__ = f"_{type_name}_{method_name}"
    return call


class ExternRegistry:
    def __init__(self):
        self.types = {}
        self._dispatch = {}

    def register_extern_type(self, klass):
        desc = klass if isinstance(klass, ExternTypeDescriptor) else ExternTypeDescriptor.from_class(klass)
        if desc.type_name in self.types:
            raise ExternError(f"extern type '{desc.type_name}' already registered")
        self.types[desc.type_name] = desc
        for mname, fn in desc.methods.items():
            self._dispatch[f"_{desc.type_name}_{mname}"] = _method_primitive(desc.type_name, mname, fn)
        return klass

    def resolve(self, op):
        fn = self._dispatch.get(op)
        if fn is None:
            raise PrimitiveError(f"unresolvable extern op '{op}'")
        return fn

    def instantiate(self, cfg, constants=None):
        """Create every extern instance of ``cfg``, bind attributes, run init."""
        out = {}
        for idef in cfg.extern_instances:
            desc = self.types.get(idef.type)
            if desc is None:
                raise ExternError(f"extern instance '{idef.name}': unknown type '{idef.type}'")
            attrs = {}
            for av in idef.attribute_values:
                width = desc.attributes.get(av.name)
                if width is None:
                    raise ExternError(f"extern instance '{idef.name}': unknown attribute '{av.name}'")
                value = cfg.resolve(av.value, constants)
                if not 0 <= value < 1 << min(width, MAX_FIELD_BITS):
                    raise ExternError(f"extern instance '{idef.name}': attribute '{av.name}' "
                                      f"value {value} does not fit {width} bits")
                attrs[av.name] = value
            for aname in desc.attributes:
                if aname not in attrs:
                    raise ExternError(f"extern instance '{idef.name}': missing attribute '{aname}'")
            inst = desc.factory(idef.name, attrs)
            try:
                inst.init()
            except (ValueError, TypeError) as exc:
                raise ExternError(f"extern instance '{idef.name}': init failed: {exc}") from exc
            inst._ready = True
            out[idef.name] = inst
        return out


class extern_example(ExternType):
    """Conformance fixture: one 1-bit attribute, one method that only logs."""

    type_name = "extern_example"
    attributes = {"attribute_example": 1}

    def init(self):
        self.calls = 0

    @extern_method
    def method_example(self, pkt):
        self.calls += 1
        log.info("Dummy extern method call")


def default_registry():
    """A fresh registry with the built-in extern types."""
    from .rohc.ops import RohcExtern

    reg = ExternRegistry()
    reg.register_extern_type(extern_example)
    reg.register_extern_type(RohcExtern)
    return reg
