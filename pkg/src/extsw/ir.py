"""JSON pipeline configuration: loading, serialization and validation.

The document is a superset of the behavioral-model ``actions`` /
``extern_instances`` arrays, extended with ``header_types``, ``metadata``,
``parser_states`` and ``pipelines``. See docs/ir-format.md.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any

log = logging.getLogger(__name__)

MATCH_KINDS = ("exact", "ternary", "range", "wildcard")
MAX_FIELD_BITS = 128
STANDARD_METADATA = {
    "ingress_port": 9,
    "egress_port": 9,
    "packet_length": 32,
    "instance_type": 2,
    "resubmit_count": 8,
}
META = "meta"
STD_META = "standard_metadata"
PARAM_TYPES = ("field", "header", "hexstr", "runtime_data", "extern")
SCENARIO_KEYS = {"extension": ("native", "extern"), "resubmit": ("recirculate", "modify_and_resubmit")}
DEFAULT_OPTIONS = {"resubmit_limit": 4, "extension": "native", "resubmit": "modify_and_resubmit"}

_KNOWN_KEYS = {
    "constants", "header_types", "metadata", "parser_states", "actions",
    "pipelines", "extern_instances", "options",
}
_MANDATORY = ("header_types", "parser_states")


class ConfigError(Exception):
    pass


class ConfigParseError(ConfigError):
    def __init__(self, msg, line, column):
        super().__init__(f"{msg} (line {line}, column {column})")
        self.line = line
        self.column = column


class SchemaError(ConfigError):
    def __init__(self, key, msg=None):
        super().__init__(msg or f"missing mandatory key '{key}'")
        self.key = key


@dataclass(frozen=True)
class HeaderTypeDef:
    name: str
    fields: tuple  # ((field name, bit width), ...)

    @property
    def bit_width(self):
        return sum(w for _, w in self.fields)

    @property
    def byte_width(self):
        return self.bit_width // 8

    def field_names(self):
        return [n for n, _ in self.fields]


@dataclass(frozen=True)
class Transition:
    value: Any = None  # None means default
    next: str | None = None  # None means accept
    mask: Any = None


@dataclass(frozen=True)
class ParserStateDef:
    name: str
    extracts: tuple = ()
    select: tuple | None = None
    transitions: tuple = ()
    set_metadata: tuple = ()  # ((meta field, value), ...)


@dataclass(frozen=True)
class KeySpec:
    target: tuple
    match_type: str


@dataclass(frozen=True)
class TableDef:
    name: str
    key: tuple
    actions: tuple
    default_action: str
    default_action_data: tuple = ()
    max_size: int = 1024


@dataclass(frozen=True)
class Param:
    type: str
    value: Any


@dataclass(frozen=True)
class PrimitiveCall:
    op: str
    parameters: tuple = ()


@dataclass(frozen=True)
class ActionDef:
    name: str
    id: int = 0
    runtime_data: tuple = ()  # ((name, bitwidth), ...)
    primitives: tuple = ()
    scenario: tuple = ()  # ((key, value), ...) guard; empty = always

    def applies_to(self, scenario):
        return all(scenario.get(k) == v for k, v in self.scenario)


@dataclass(frozen=True)
class Condition:
    kind: str  # "valid" | "invalid" | "equals"
    target: Any
    value: Any = None


@dataclass(frozen=True)
class ControlStep:
    table: str
    when: Condition | None = None


@dataclass(frozen=True)
class PipelineDef:
    name: str
    tables: tuple = ()
    control: tuple = ()

    def table(self, name):
        for t in self.tables:
            if t.name == name:
                return t
        return None


@dataclass(frozen=True)
class AttributeValue:
    name: str
    value: Any
    type: str = "hexstr"


@dataclass(frozen=True)
class ExternInstanceDef:
    name: str
    type: str
    attribute_values: tuple = ()
    id: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    header_types: tuple
    parser_states: tuple
    metadata: tuple = ()
    actions: tuple = ()
    ingress: PipelineDef = PipelineDef("ingress")
    egress: PipelineDef = PipelineDef("egress")
    extern_instances: tuple = ()
    constants: dict = field(default_factory=dict)
    options: dict = field(default_factory=lambda: dict(DEFAULT_OPTIONS))
    extras: dict = field(default_factory=dict)
    warnings: tuple = field(default=(), compare=False)

    def header_type(self, name):
        for h in self.header_types:
            if h.name == name:
                return h
        return None

    def parser_state(self, name):
        for s in self.parser_states:
            if s.name == name:
                return s
        return None

    def actions_named(self, name):
        return [a for a in self.actions if a.name == name]

    def metadata_width(self, name):
        for n, w in self.metadata:
            if n == name:
                return w
        return None

    def resolve(self, value, overrides=None):
        """Turn a literal (int, hex/decimal string or ``$CONSTANT``) into an int."""
        if isinstance(value, str) and value.startswith("$"):
            name = value[1:]
            if overrides and name in overrides:
                return int(overrides[name])
            if name not in self.constants:
                raise ConfigError(f"undefined constant {value}")
            return self.resolve(self.constants[name])
        return parse_int(value)


def parse_int(value):
    if isinstance(value, bool):
        raise ValueError(f"not an integer literal: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        return int(value, 16) if value.lower().startswith("0x") else int(value, 10)
    raise ValueError(f"not an integer literal: {value!r}")


def _literal(value, where):
    """Keep ``$NAME`` symbolic, normalize everything else to int."""
    if isinstance(value, str) and value.startswith("$"):
        return value
    try:
        return parse_int(value)
    except ValueError:
        raise SchemaError(where, f"{where}: bad integer literal {value!r}") from None


def _req(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}.{key}", f"{where}: missing mandatory key '{key}'")
    return obj[key]


def _ref(value, where):
    if not (isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(v, str) for v in value)):
        raise SchemaError(where, f"{where}: field reference must be [header, field], got {value!r}")
    return tuple(value)


def _condition(obj, where):
    if obj is None:
        return None
    if "valid" in obj:
        return Condition("valid", obj["valid"])
    if "invalid" in obj:
        return Condition("invalid", obj["invalid"])
    if "field" in obj:
        return Condition("equals", _ref(obj["field"], where), _literal(_req(obj, "equals", where), where))
    raise SchemaError(where, f"{where}: condition needs 'valid', 'invalid' or 'field'")


def _pipeline(name, obj):
    where = f"pipelines.{name}"
    tables = []
    for i, t in enumerate(obj.get("tables", [])):
        tw = f"{where}.tables[{i}]"
        tname = _req(t, "name", tw)
        key = tuple(
            KeySpec(_ref(_req(k, "target", f"{tw}.key"), f"{tw}.key"), _req(k, "match_type", f"{tw}.key"))
            for k in t.get("key", [])
        )
        default = t.get("default_action")
        if isinstance(default, dict):
            dname = _req(default, "action", f"{tw}.default_action")
            ddata = tuple(_literal(v, f"{tw}.default_action") for v in default.get("action_data", []))
        else:
            dname, ddata = _req(t, "default_action", tw), ()
        tables.append(TableDef(tname, key, tuple(t.get("actions", [])), dname, ddata,
                               int(t.get("max_size", 1024))))
    control = []
    for i, step in enumerate(obj.get("control", [])):
        sw = f"{where}.control[{i}]"
        control.append(ControlStep(_req(step, "apply", sw), _condition(step.get("when"), sw)))
    return PipelineDef(name, tuple(tables), tuple(control))


def from_dict(doc):
    """Build a PipelineConfig from a decoded JSON document.

    Raises SchemaError for missing mandatory keys and structurally wrong values.
    """
    try:
        return _from_dict(doc)
    except (TypeError, KeyError, ValueError, AttributeError, IndexError) as exc:
        raise SchemaError("<document>", f"malformed document: {type(exc).__name__}: {exc}") from None


def _from_dict(doc):
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "top-level JSON value must be an object")
    for key in _MANDATORY:
        if key not in doc:
            raise SchemaError(key)
    warnings = []
    extras = {}
    for key in doc:
        if key not in _KNOWN_KEYS:
            msg = f"unknown top-level key '{key}' ignored"
            log.warning(msg)
            warnings.append(msg)
            extras[key] = doc[key]

    header_types = []
    for i, h in enumerate(doc["header_types"]):
        w = f"header_types[{i}]"
        fields = tuple((str(f[0]), int(f[1])) for f in _req(h, "fields", w))
        header_types.append(HeaderTypeDef(_req(h, "name", w), fields))

    metadata = tuple((str(m[0]), int(m[1])) for m in doc.get("metadata", []))

    states = []
    for i, s in enumerate(doc["parser_states"]):
        w = f"parser_states[{i}]"
        select = s.get("select")
        transitions = tuple(
            Transition(
                None if t.get("value", "default") == "default" else _literal(t["value"], f"{w}.transitions"),
                t.get("next"),
                None if t.get("mask") is None else _literal(t["mask"], f"{w}.transitions"),
            )
            for t in s.get("transitions", [])
        )
        setm = tuple((m["field"], _literal(m["value"], f"{w}.set_metadata")) for m in s.get("set_metadata", []))
        states.append(ParserStateDef(
            _req(s, "name", w), tuple(s.get("extracts", [])),
            None if select is None else _ref(select, f"{w}.select"), transitions, setm))

    actions = []
    for i, a in enumerate(doc.get("actions", [])):
        w = f"actions[{i}]"
        prims = []
        for j, p in enumerate(a.get("primitives", [])):
            pw = f"{w}.primitives[{j}]"
            params = []
            for q in p.get("parameters", []):
                ptype = _req(q, "type", pw)
                value = _req(q, "value", pw)
                if ptype == "field":
                    value = _ref(value, pw)
                elif ptype == "hexstr":
                    value = _literal(value, pw)
                elif ptype == "runtime_data":
                    value = int(value)
                params.append(Param(ptype, value))
            prims.append(PrimitiveCall(_req(p, "op", pw), tuple(params)))
        rdata = tuple((r["name"], int(r["bitwidth"])) for r in a.get("runtime_data", []))
        actions.append(ActionDef(_req(a, "name", w), int(a.get("id", i)), rdata, tuple(prims),
                                 tuple(sorted(a.get("scenario", {}).items()))))

    pipelines = doc.get("pipelines", {})
    externs = []
    for i, e in enumerate(doc.get("extern_instances", [])):
        w = f"extern_instances[{i}]"
        attrs = tuple(
            AttributeValue(_req(av, "name", w), _literal(_req(av, "value", w), w), av.get("type", "hexstr"))
            for av in e.get("attribute_values", [])
        )
        externs.append(ExternInstanceDef(_req(e, "name", w), _req(e, "type", w), attrs, int(e.get("id", i))))

    options = dict(DEFAULT_OPTIONS)
    options.update(doc.get("options", {}))
    return PipelineConfig(
        header_types=tuple(header_types),
        parser_states=tuple(states),
        metadata=metadata,
        actions=tuple(actions),
        ingress=_pipeline("ingress", pipelines.get("ingress", {})),
        egress=_pipeline("egress", pipelines.get("egress", {})),
        extern_instances=tuple(externs),
        constants=dict(doc.get("constants", {})),
        options=options,
        extras=extras,
        warnings=tuple(warnings),
    )


def load_config(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno, exc.colno) from None
    return from_dict(doc)


def load_config_file(path):
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read())


def _lit_out(value):
    return value if isinstance(value, str) else hex(value)


def _cond_out(c):
    if c.kind == "equals":
        return {"field": list(c.target), "equals": _lit_out(c.value)}
    return {c.kind: c.target}


def to_dict(cfg):
    def pipeline(p):
        return {
            "tables": [
                {
                    "name": t.name,
                    "key": [{"target": list(k.target), "match_type": k.match_type} for k in t.key],
                    "actions": list(t.actions),
                    "default_action": {"action": t.default_action,
                                       "action_data": [_lit_out(v) for v in t.default_action_data]},
                    "max_size": t.max_size,
                }
                for t in p.tables
            ],
            "control": [
                {"apply": s.table, **({"when": _cond_out(s.when)} if s.when else {})} for s in p.control
            ],
        }

    def param(p):
        value = list(p.value) if p.type == "field" else p.value
        if p.type == "hexstr":
            value = _lit_out(value)
        return {"type": p.type, "value": value}

    doc = {
        "constants": dict(cfg.constants),
        "header_types": [{"name": h.name, "fields": [list(f) for f in h.fields]} for h in cfg.header_types],
        "metadata": [list(m) for m in cfg.metadata],
        "parser_states": [
            {
                "name": s.name,
                "extracts": list(s.extracts),
                **({"select": list(s.select)} if s.select else {}),
                "transitions": [
                    {"value": "default" if t.value is None else _lit_out(t.value), "next": t.next,
                     **({"mask": _lit_out(t.mask)} if t.mask is not None else {})}
                    for t in s.transitions
                ],
                **({"set_metadata": [{"field": f, "value": _lit_out(v)} for f, v in s.set_metadata]}
                   if s.set_metadata else {}),
            }
            for s in cfg.parser_states
        ],
        "actions": [
            {
                "name": a.name,
                "id": a.id,
                "runtime_data": [{"name": n, "bitwidth": w} for n, w in a.runtime_data],
                "primitives": [{"op": p.op, "parameters": [param(q) for q in p.parameters]}
                               for p in a.primitives],
                **({"scenario": dict(a.scenario)} if a.scenario else {}),
            }
            for a in cfg.actions
        ],
        "pipelines": {"ingress": pipeline(cfg.ingress), "egress": pipeline(cfg.egress)},
        "extern_instances": [
            {
                "name": e.name,
                "id": e.id,
                "type": e.type,
                "attribute_values": [{"name": av.name, "type": av.type, "value": _lit_out(av.value)}
                                     for av in e.attribute_values],
            }
            for e in cfg.extern_instances
        ],
        "options": dict(cfg.options),
    }
    doc.update(cfg.extras)
    return doc


def dumps(cfg, indent=2):
    return json.dumps(to_dict(cfg), indent=indent)


# --- validation -------------------------------------------------------------

_EXTERN_OP = re.compile(r"^_(?P<rest>.+)$")


class _Checker:
    def __init__(self, cfg, primitives, extern_types):
        self.cfg = cfg
        self.primitives = primitives
        self.extern_types = extern_types
        self.diags = []

    def add(self, msg):
        self.diags.append(msg)

    def literal(self, value, where):
        try:
            return self.cfg.resolve(value)
        except (ConfigError, ValueError) as exc:
            self.add(f"{where}: {exc}")
            return None

    def ref(self, ref, where):
        hdr, fname = ref
        if hdr == META:
            if self.cfg.metadata_width(fname) is None:
                self.add(f"{where}: undeclared metadata field '{fname}'")
        elif hdr == STD_META:
            if fname not in STANDARD_METADATA:
                self.add(f"{where}: unknown standard_metadata field '{fname}'")
        else:
            ht = self.cfg.header_type(hdr)
            if ht is None:
                self.add(f"{where}: unknown header '{hdr}'")
            elif fname not in ht.field_names():
                self.add(f"{where}: header '{hdr}' has no field '{fname}'")

    def header(self, name, where):
        if self.cfg.header_type(name) is None:
            self.add(f"{where}: unknown header '{name}'")

    def run(self):
        cfg = self.cfg
        for name, value in cfg.constants.items():
            self.literal(value, f"constant '{name}'")
        self.headers()
        seen = set()
        for name, width in cfg.metadata:
            if name in seen:
                self.add(f"metadata '{name}': duplicate declaration")
            seen.add(name)
            if not 1 <= width <= MAX_FIELD_BITS:
                self.add(f"metadata '{name}': width {width} outside 1..{MAX_FIELD_BITS}")
        self.parser()
        self.externs()
        self.actions()
        for pipe in (cfg.ingress, cfg.egress):
            self.pipeline(pipe)
        for key, allowed in SCENARIO_KEYS.items():
            if cfg.options.get(key) not in allowed:
                self.add(f"options.{key}: {cfg.options.get(key)!r} not in {allowed}")
        limit = cfg.options.get("resubmit_limit")
        if not isinstance(limit, int) or limit < 0:
            self.add(f"options.resubmit_limit: must be a non-negative integer, got {limit!r}")
        return self.diags

    def headers(self):
        seen = set()
        for h in self.cfg.header_types:
            if h.name in (META, STD_META):
                self.add(f"header type '{h.name}': reserved name")
            if h.name in seen:
                self.add(f"header type '{h.name}': duplicate name")
            seen.add(h.name)
            names = h.field_names()
            if len(set(names)) != len(names):
                self.add(f"header type '{h.name}': duplicate field names")
            for fname, width in h.fields:
                if not 1 <= width <= MAX_FIELD_BITS:
                    self.add(f"header type '{h.name}': field '{fname}' width {width} outside 1..{MAX_FIELD_BITS}")
            if h.bit_width % 8:
                self.add(f"header type '{h.name}': total width {h.bit_width} bits not byte-aligned")

    def parser(self):
        states = {}
        for s in self.cfg.parser_states:
            if s.name in states:
                self.add(f"parser state '{s.name}': duplicate name")
            states[s.name] = s
        starts = [s for s in self.cfg.parser_states if s.name == "start"]
        if len(starts) != 1:
            self.add(f"parser: expected exactly one 'start' state, found {len(starts)}")
            return
        for s in states.values():
            where = f"parser state '{s.name}'"
            for h in s.extracts:
                self.header(h, where)
            if s.select is not None:
                self.ref(s.select, where)
            for t in s.transitions:
                if t.next is not None and t.next not in states:
                    self.add(f"{where}: transition to unknown state '{t.next}'")
                if t.value is not None:
                    self.literal(t.value, where)
                if t.mask is not None:
                    self.literal(t.mask, where)
                if t.value is not None and s.select is None:
                    self.add(f"{where}: valued transition without a select field")
            for fname, value in s.set_metadata:
                self.ref((META, fname), where)
                self.literal(value, where)

        reached = set()

        def walk(name, extracted, path):
            if name in path:
                self.add(f"parser state '{name}': loop in parser graph")
                return
            reached.add(name)
            s = states[name]
            for h in s.extracts:
                if h in extracted:
                    self.add(f"parser state '{name}': header '{h}' extracted twice on one path")
            extracted = extracted | set(s.extracts)
            for t in s.transitions:
                if t.next in states:
                    walk(t.next, extracted, path | {name})

        walk("start", frozenset(), frozenset())
        for name in states:
            if name not in reached:
                self.add(f"parser state '{name}': unreachable from 'start'")

    def externs(self):
        seen = set()
        for e in self.cfg.extern_instances:
            where = f"extern instance '{e.name}'"
            if e.name in seen:
                self.add(f"{where}: duplicate name")
            seen.add(e.name)
            names = [a.name for a in e.attribute_values]
            if len(set(names)) != len(names):
                self.add(f"{where}: duplicate attribute names")
            for av in e.attribute_values:
                v = self.literal(av.value, where)
                if v is not None and not 0 <= v < 1 << MAX_FIELD_BITS:
                    self.add(f"{where}: attribute '{av.name}' exceeds {MAX_FIELD_BITS} bits")
            if self.extern_types is not None:
                desc = self.extern_types.get(e.type)
                if desc is None:
                    self.add(f"{where}: unknown extern type '{e.type}'")

    def actions(self):
        by_name = {}
        for a in self.cfg.actions:
            for other in by_name.get(a.name, []):
                if _guards_overlap(a.scenario, other.scenario):
                    self.add(f"action '{a.name}': duplicate definition for the same scenario")
            by_name.setdefault(a.name, []).append(a)
            for key, value in a.scenario:
                if value not in SCENARIO_KEYS.get(key, ()):
                    self.add(f"action '{a.name}': bad scenario guard {key}={value!r}")
            for p in a.primitives:
                self.primitive(a, p)

    def primitive(self, action, call):
        where = f"action '{action.name}': op '{call.op}'"
        for q in call.parameters:
            if q.type not in PARAM_TYPES:
                self.add(f"{where}: unknown parameter type '{q.type}'")
            elif q.type == "field":
                self.ref(q.value, where)
            elif q.type == "header":
                self.header(q.value, where)
            elif q.type == "hexstr":
                self.literal(q.value, where)
            elif q.type == "runtime_data" and not 0 <= q.value < len(action.runtime_data):
                self.add(f"{where}: runtime_data index {q.value} out of range")
            elif q.type == "extern" and not any(e.name == q.value for e in self.cfg.extern_instances):
                self.add(f"{where}: unknown extern instance '{q.value}'")
        if call.op.startswith("_"):
            self.extern_call(where, call)
        elif self.primitives is not None and call.op not in self.primitives:
            self.add(f"{where}: unknown primitive")

    def extern_call(self, where, call):
        if not call.parameters or call.parameters[0].type != "extern":
            self.add(f"{where}: extern method call needs an extern instance as first parameter")
            return
        inst = next((e for e in self.cfg.extern_instances if e.name == call.parameters[0].value), None)
        if inst is None:
            return
        prefix = f"_{inst.type}_"
        if not call.op.startswith(prefix) or len(call.op) == len(prefix):
            self.add(f"{where}: does not match '_{inst.type}_<method>' for instance '{inst.name}'")
            return
        method = call.op[len(prefix):]
        if self.extern_types is not None:
            desc = self.extern_types.get(inst.type)
            if desc is not None and method not in desc.methods:
                self.add(f"{where}: extern type '{inst.type}' has no method '{method}'")

    def pipeline(self, pipe):
        names = set()
        for t in pipe.tables:
            where = f"table '{t.name}'"
            if t.name in names:
                self.add(f"{where}: duplicate name")
            names.add(t.name)
            for k in t.key:
                self.ref(k.target, where)
                if k.match_type not in MATCH_KINDS:
                    self.add(f"{where}: illegal match kind '{k.match_type}'")
            for an in t.actions:
                if not self.cfg.actions_named(an):
                    self.add(f"{where}: unknown action '{an}'")
            if not self.cfg.actions_named(t.default_action):
                self.add(f"{where}: unknown default action '{t.default_action}'")
            if t.max_size < 1:
                self.add(f"{where}: max_size must be positive")
        for step in pipe.control:
            if step.table not in names:
                self.add(f"{pipe.name} control: unknown table '{step.table}'")
            c = step.when
            if c is not None:
                if c.kind == "equals":
                    self.ref(c.target, f"{pipe.name} control")
                    self.literal(c.value, f"{pipe.name} control")
                elif c.kind in ("valid", "invalid"):
                    self.header(c.target, f"{pipe.name} control")


def _guards_overlap(a, b):
    da, db = dict(a), dict(b)
    return all(da[k] == db[k] for k in da.keys() & db.keys())


def validate_config(cfg, primitives=None, extern_types=None):
    """Return a list of human-readable diagnostics; empty means valid.

    ``primitives`` is a collection of native op names and ``extern_types`` a
    mapping of type name to descriptor. Both default to the built-in sets.
    """
    if primitives is None or extern_types is None:
        from .externs import default_registry
        from .primitives import known_primitive_names
        if primitives is None:
            primitives = known_primitive_names()
        if extern_types is None:
            extern_types = default_registry().types
    return _Checker(cfg, primitives, extern_types).run()
