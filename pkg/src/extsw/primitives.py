"""Native primitive table and action execution.

A primitive is a callable ``fn(ctx, *args)``. ``ctx`` is an ExecContext
giving access to the packet, the matched entry's action data and the
owning switch; ``args`` are compiled parameters (see the ``*Arg`` classes).
Control-flow primitives record a directive on the context; the last one
executed wins.
"""

import logging
from enum import Enum

from .inet import ipv4_checksum
from .packet import FieldAccessError

log = logging.getLogger(__name__)


class Directive(Enum):
    CONTINUE = "continue"
    RESUBMIT = "resubmit"
    MODIFY_AND_RESUBMIT = "modify_and_resubmit"
    RECIRCULATE = "recirculate"
    DROP = "drop"


class PrimitiveError(Exception):
    """Construction-time problem with the primitive table."""


class PrimitiveFault(Exception):
    """Runtime failure inside a primitive; the packet is dropped."""

    def __init__(self, counter, msg=""):
        super().__init__(msg or counter)
        self.counter = counter


class ExecContext:
    __slots__ = ("pkt", "action_data", "switch", "directive")

    def __init__(self, pkt, action_data=(), switch=None):
        self.pkt = pkt
        self.action_data = action_data
        self.switch = switch
        self.directive = Directive.CONTINUE


# -- compiled parameters ------------------------------------------------------

class FieldArg:
    __slots__ = ("ref",)

    def __init__(self, ref):
        self.ref = tuple(ref)

    def get(self, ctx):
        return ctx.pkt.get_field(self.ref)

    def set(self, ctx, value):
        ctx.pkt.set_field(self.ref, value)


class HeaderArg:
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def get(self, ctx):
        return ctx.pkt.header(self.name)


class ConstArg:
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def get(self, ctx):
        return self.value


class RuntimeArg:
    __slots__ = ("index",)

    def __init__(self, index):
        self.index = index

    def get(self, ctx):
        return ctx.action_data[self.index]


class ExternArg:
    __slots__ = ("instance",)

    def __init__(self, instance):
        self.instance = instance

    def get(self, ctx):
        return self.instance


# -- primitive table ----------------------------------------------------------

class PrimitiveTable:
    def __init__(self, ops=None):
        self._ops = dict(ops or {})

    def register(self, name, fn=None):
        """Bind ``name`` to ``fn``. Usable as a decorator when ``fn`` is omitted."""
        if fn is None:
            return lambda f: self.register(name, f) or f
        if name in self._ops:
            raise PrimitiveError(f"primitive '{name}' already registered")
        self._ops[name] = fn
        return fn

    def resolve(self, name, registry=None):
        """Native table first, then extern dispatch for ``_<type>_<method>`` names."""
        fn = self._ops.get(name)
        if fn is not None:
            return fn
        if name.startswith("_") and registry is not None:
            return registry.resolve(name)
        raise PrimitiveError(f"unresolvable op '{name}'")

    def copy(self):
        return PrimitiveTable(self._ops)

    def names(self):
        return set(self._ops)

    def __contains__(self, name):
        return name in self._ops


_BUILTINS = PrimitiveTable()
register_primitive = _BUILTINS.register


@register_primitive("modify_field")
def modify_field(ctx, dst, src):
    dst.set(ctx, src.get(ctx))


@register_primitive("add_header")
def add_header(ctx, hdr):
    h = hdr.get(ctx)
    if not h.valid:
        h.values = [0] * len(h.values)
        h.valid = True


@register_primitive("remove_header")
def remove_header(ctx, hdr):
    hdr.get(ctx).valid = False


@register_primitive("drop")
def drop(ctx):
    ctx.directive = Directive.DROP


@register_primitive("set_egress_port")
def set_egress_port(ctx, port):
    ctx.pkt.set_field(("standard_metadata", "egress_port"), port.get(ctx))


@register_primitive("resubmit")
def resubmit(ctx):
    ctx.directive = Directive.RESUBMIT


@register_primitive("recirculate")
def recirculate(ctx):
    ctx.directive = Directive.RECIRCULATE


@register_primitive("modify_and_resubmit")
def modify_and_resubmit(ctx):
    ctx.directive = Directive.MODIFY_AND_RESUBMIT


@register_primitive("recompute_ipv4_checksum")
def recompute_ipv4_checksum(ctx, hdr):
    h = hdr.get(ctx)
    if not h.valid:
        raise PrimitiveFault("invalid_header_write", f"{h.name} is not valid")
    idx = h.layout.index["hdrChecksum"]
    h.values[idx] = 0
    h.values[idx] = ipv4_checksum(h.to_bytes())


BUILTIN_PRIMITIVES = frozenset(_BUILTINS.names())
# Registered by the switch only in the native-extension scenario.
ROHC_NATIVE_PRIMITIVES = frozenset({"rohc_comp_header", "rohc_decomp_header"})


def builtin_primitives():
    """A fresh table holding the built-in primitive set."""
    return _BUILTINS.copy()


def known_primitive_names():
    return BUILTIN_PRIMITIVES | ROHC_NATIVE_PRIMITIVES


# -- actions ------------------------------------------------------------------

def compile_param(param, cfg, instances=None, constants=None):
    if param.type == "field":
        return FieldArg(param.value)
    if param.type == "header":
        return HeaderArg(param.value)
    if param.type == "hexstr":
        return ConstArg(cfg.resolve(param.value, constants))
    if param.type == "runtime_data":
        return RuntimeArg(param.value)
    if param.type == "extern":
        if instances is None or param.value not in instances:
            raise PrimitiveError(f"unknown extern instance '{param.value}'")
        return ExternArg(instances[param.value])
    raise PrimitiveError(f"unknown parameter type '{param.type}'")


class CompiledAction:
    __slots__ = ("name", "calls")

    def __init__(self, name, calls):
        self.name = name
        self.calls = calls

    def __repr__(self):
        return f"<action {self.name}: {len(self.calls)} primitive(s)>"


def compile_action(action, cfg, primitives, registry=None, instances=None, constants=None):
    """Bind every op of ``action`` to a callable and compile its parameters.

    ``registry`` resolves ``_<type>_<method>`` ops; ``instances`` maps extern
    instance names to initialized instances.
    """
    calls = []
    for call in action.primitives:
        fn = primitives.resolve(call.op, registry)
        args = tuple(compile_param(p, cfg, instances, constants) for p in call.parameters)
        want = getattr(fn, "extern_type", None)
        if want is not None:
            if not args or not isinstance(args[0], ExternArg):
                raise PrimitiveError(f"op '{call.op}': first parameter must be an extern instance")
            got = args[0].instance
            if got.type_name != want:
                raise PrimitiveError(f"op '{call.op}': instance '{got.name}' has type '{got.type_name}'")
        calls.append((fn, args))
    return CompiledAction(action.name, tuple(calls))


def execute_action(action, action_data, pkt, switch=None):
    """Run the action's primitives in order; return the resulting Directive.

    A primitive fault drops the packet: ``pkt.fault`` names the counter that
    was incremented.
    """
    ctx = ExecContext(pkt, action_data, switch)
    try:
        for fn, args in action.calls:
            fn(ctx, *args)
    except PrimitiveFault as exc:
        pkt.counters[exc.counter] += 1
        pkt.fault = exc.counter
        return Directive.DROP
    except FieldAccessError as exc:
        log.debug("action %s: %s", action.name, exc)
        pkt.counters["invalid_header_access"] += 1
        pkt.fault = "invalid_header_access"
        return Directive.DROP
    return ctx.directive
