"""Run-to-completion soft switch: parser, ingress, egress, deparser.

Packets that ask to go around again re-enter the parser by one of three
paths:

* ``resubmit`` (ingress): the bytes the parser saw at the start of the pass
  are parsed again; header changes and user metadata are discarded.
* ``modify_and_resubmit`` (ingress): the current headers are deparsed into a
  new buffer, which is parsed again without visiting egress. User metadata
  is kept.
* ``recirculate`` (ingress or egress): the packet finishes egress, is
  deparsed, then parsed again. User metadata is kept.

Every re-entry counts against ``resubmit_limit``.
"""

import logging
import time
from collections import Counter

from .externs import default_registry
from .inet import ETHERTYPE_ROHC
from .ir import DEFAULT_OPTIONS, SCENARIO_KEYS, ConfigError, load_config_file, validate_config
from .packet import FieldAccessError, InstanceType
from .parser import ParserProgram, ParseUnderrun
from .primitives import Directive, builtin_primitives, compile_action, execute_action, known_primitive_names
from .rohc.codec import DEFAULT_REFRESH, MAX_CIDS, Compressor, Decompressor
from .rohc.ops import register_rohc_primitives
from .tables import Table, load_rules_file, parse_rules

log = logging.getLogger(__name__)

_INSTANCE = {
    Directive.RESUBMIT: InstanceType.RESUBMITTED,
    Directive.MODIFY_AND_RESUBMIT: InstanceType.RESUBMITTED,
    Directive.RECIRCULATE: InstanceType.RECIRCULATED,
}


class _Step:
    __slots__ = ("table", "kind", "target", "value")

    def __init__(self, table, cond, cfg, constants):
        self.table = table
        self.kind = cond.kind if cond else None
        self.target = cond.target if cond else None
        self.value = cfg.resolve(cond.value, constants) if cond and cond.kind == "equals" else None

    def enabled(self, pkt):
        kind = self.kind
        if kind is None:
            return True
        if kind == "valid":
            return pkt.is_valid(self.target)
        if kind == "invalid":
            return not pkt.is_valid(self.target)
        try:
            return pkt.get_field(self.target) == self.value
        except FieldAccessError:
            return False


class Switch:
    """One switch instance built from a validated config and a rule set.

    ``extension`` and ``resubmit`` select the scenario: actions carrying a
    matching scenario guard are the ones compiled. ``rohc_ethertype`` and
    ``rohc_refresh`` override the ``$ROHC_ETHERTYPE`` and ``$ROHC_IR_REFRESH``
    config constants.
    """

    def __init__(self, cfg, rules=None, extension=None, resubmit=None, resubmit_limit=None,
                 rohc_ethertype=None, rohc_refresh=None, registry=None):
        opts = dict(DEFAULT_OPTIONS)
        opts.update(cfg.options)
        for key, value in (("extension", extension), ("resubmit", resubmit), ("resubmit_limit", resubmit_limit)):
            if value is not None:
                opts[key] = value
        for key, allowed in SCENARIO_KEYS.items():
            if opts[key] not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got {opts[key]!r}")
        if not isinstance(opts["resubmit_limit"], int) or opts["resubmit_limit"] < 0:
            raise ConfigError(f"resubmit_limit must be a non-negative integer, got {opts['resubmit_limit']!r}")
        self.options = opts
        self.scenario = {k: opts[k] for k in SCENARIO_KEYS}
        self.resubmit_limit = opts["resubmit_limit"]

        self.constants = {}
        if rohc_ethertype is not None:
            self.constants["ROHC_ETHERTYPE"] = rohc_ethertype
        if rohc_refresh is not None:
            self.constants["ROHC_IR_REFRESH"] = rohc_refresh
        self.rohc_ethertype = self._constant(cfg, "ROHC_ETHERTYPE", ETHERTYPE_ROHC)
        self.rohc_refresh = self._constant(cfg, "ROHC_IR_REFRESH", DEFAULT_REFRESH)

        self.registry = registry or default_registry()
        self.primitives = builtin_primitives()
        self.compressor = self.decompressor = None
        if self.scenario["extension"] == "native":
            self.compressor = Compressor(MAX_CIDS, self.rohc_refresh)
            self.decompressor = Decompressor(MAX_CIDS)
            register_rohc_primitives(self.primitives, self.compressor, self.decompressor, self.rohc_ethertype)

        # Actions guarded for the other scenario may name the ROHC natives too.
        diags = validate_config(cfg, known_primitive_names() | self.primitives.names(), self.registry.types)
        if diags:
            raise ConfigError("invalid config:\n  " + "\n  ".join(diags))
        self.cfg = cfg
        self.parser = ParserProgram(cfg, self.constants)
        self.externs = self.registry.instantiate(cfg, self.constants)
        self.actions = self._compile_actions(cfg)

        self.tables = {}
        self.ingress = self._pipeline(cfg, cfg.ingress)
        self.egress = self._pipeline(cfg, cfg.egress)
        if rules:
            self.load_rules(rules)

        self.counters = Counter()
        self.latencies = []
        self.last_trace = []

    def _constant(self, cfg, name, default):
        if name in self.constants:
            return int(self.constants[name])
        if name in cfg.constants:
            return cfg.resolve("$" + name)
        return default

    def _compile_actions(self, cfg):
        out = {}
        for a in cfg.actions:
            if a.applies_to(self.scenario):
                if a.name in out:
                    raise ConfigError(f"action '{a.name}': more than one variant for scenario {self.scenario}")
                out[a.name] = compile_action(a, cfg, self.primitives, self.registry, self.externs, self.constants)
        return out

    def _action(self, name):
        try:
            return self.actions[name]
        except KeyError:
            raise ConfigError(f"action '{name}' has no variant for scenario {self.scenario}") from None

    def _pipeline(self, cfg, pipe):
        steps = []
        for tdef in pipe.tables:
            table = Table(tdef, tuple(cfg.resolve(v, self.constants) for v in tdef.default_action_data))
            table.default = self._action(tdef.default_action)
            table.compiled = {a: self._action(a) for a in tdef.actions}
            self.tables[tdef.name] = table
        for step in pipe.control:
            steps.append(_Step(self.tables[step.table], step.when, cfg, self.constants))
        return steps

    # -- rules --------------------------------------------------------------

    def load_rules(self, rules):
        """Add entries from a rules file path or an already-decoded rules list."""
        parsed = parse_rules(rules, self.tables) if isinstance(rules, list) else load_rules_file(rules, self.tables)
        for tname, entry in parsed:
            self.add_entry(tname, entry)

    def add_entry(self, table, entry):
        self.tables[table].add_entry(entry)

    @classmethod
    def from_files(cls, ir_path, rules_path=None, **kwargs):
        return cls(load_config_file(ir_path), rules_path, **kwargs)

    # -- processing ---------------------------------------------------------

    def _apply(self, steps, pkt):
        """Apply a control block; the last non-continue directive wins."""
        directive = Directive.CONTINUE
        for step in steps:
            if not step.enabled(pkt):
                continue
            table = step.table
            entry = table.lookup(pkt)
            if entry is None:
                action, data = table.default, table.default_action_data
            else:
                action, data = table.compiled[entry.action], entry.action_data
            d = execute_action(action, data, pkt, self)
            if pkt.fault is not None:
                return Directive.DROP
            if d is not Directive.CONTINUE:
                directive = d
        return directive

    def _reenter(self, pkt, directive, pass_buffer):
        count = pkt.standard_metadata["resubmit_count"] + 1
        if count > self.resubmit_limit:
            pkt.counters["resubmit_overflow"] += 1
            return None
        pkt.counters[directive.value] += 1
        if directive is Directive.RESUBMIT:
            # A clone of the bytes that entered this pass; nothing else survives.
            fresh = self.parser.new_packet(pass_buffer, pkt.standard_metadata["ingress_port"])
            fresh.trace, fresh.counters = pkt.trace, pkt.counters
            pkt = fresh
        else:
            pkt.trace.append("deparser")
            self.parser.deparse(pkt)
            pkt.reset_headers()
            pkt.standard_metadata["egress_port"] = 0
        pkt.standard_metadata["resubmit_count"] = count
        pkt.standard_metadata["instance_type"] = _INSTANCE[directive]
        return pkt

    def process_packet(self, data, ingress_port=0):
        """Run one packet to completion; return ``[(egress port, bytes)]``."""
        t0 = time.perf_counter_ns()
        pkt = self.parser.new_packet(data, ingress_port)
        out = self._run(pkt)
        self.last_trace = pkt.trace
        if out:
            self.latencies.append(time.perf_counter_ns() - t0)
        self._fold(pkt, out)
        return out

    def _run(self, pkt):
        trace = pkt.trace
        while True:
            pass_buffer = pkt.buffer
            try:
                self.parser.run(pkt)
            except ParseUnderrun:
                return []
            trace.append("ingress")
            d = self._apply(self.ingress, pkt)
            if d is Directive.DROP:
                return []
            if d is Directive.RESUBMIT or d is Directive.MODIFY_AND_RESUBMIT:
                pkt = self._reenter(pkt, d, pass_buffer)
                if pkt is None:
                    return []
                trace = pkt.trace
                continue
            trace.append("egress")
            d2 = self._apply(self.egress, pkt)
            if d2 is Directive.DROP:
                return []
            if d is Directive.RECIRCULATE or d2 is not Directive.CONTINUE:
                # Anything but drop raised in egress goes around after deparsing.
                pkt = self._reenter(pkt, Directive.RECIRCULATE, pass_buffer)
                if pkt is None:
                    return []
                continue
            trace.append("deparser")
            return [(pkt.standard_metadata["egress_port"], self.parser.deparse(pkt))]

    def _fold(self, pkt, out):
        c = self.counters
        c["packets_in"] += 1
        if out:
            c["emitted"] += len(out)
        else:
            c["dropped"] += 1
        c.update(pkt.counters)
        for stage in pkt.trace:
            c["visits_" + stage] += 1

    def collect_metrics(self):
        rohc = {}
        if self.compressor is not None:
            rohc["native"] = {"compressor": dict(self.compressor.counters),
                              "decompressor": dict(self.decompressor.counters)}
        for name, inst in self.externs.items():
            if hasattr(inst, "compressor"):
                rohc[name] = {"compressor": dict(inst.compressor.counters),
                              "decompressor": dict(inst.decompressor.counters)}
        return {"latencies_ns": list(self.latencies), "counters": dict(self.counters), "rohc": rohc}

    def reset_metrics(self):
        self.counters = Counter()
        self.latencies = []
