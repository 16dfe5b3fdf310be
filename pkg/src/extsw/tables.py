"""Match-action tables: entries, lookup and the rules-file loader."""

import json
import threading
from dataclasses import dataclass

from .ir import parse_int
from .packet import FieldAccessError


class RuleError(Exception):
    pass


@dataclass(frozen=True)
class KeyPart:
    kind: str  # exact | ternary | range | wildcard
    value: int = 0
    mask_or_high: int = 0

    def matches(self, v):
        kind = self.kind
        if kind == "exact":
            return v == self.value
        if kind == "ternary":
            return v & self.mask_or_high == self.value & self.mask_or_high
        if kind == "range":
            return self.value <= v <= self.mask_or_high
        return True

    @classmethod
    def exact(cls, v):
        return cls("exact", v)

    @classmethod
    def ternary(cls, v, mask):
        return cls("ternary", v, mask)

    @classmethod
    def range(cls, low, high):
        return cls("range", low, high)

    @classmethod
    def wildcard(cls):
        return cls("wildcard")


@dataclass(frozen=True)
class TableEntry:
    key: tuple
    action: str
    action_data: tuple = ()
    priority: int = 0


class _Snapshot:
    __slots__ = ("entries", "ordered", "index")

    def __init__(self, entries, all_exact):
        self.entries = entries
        # Lower priority value wins; insertion order breaks ties.
        self.ordered = tuple(e for _, e in sorted(enumerate(entries), key=lambda p: (p[1].priority, p[0])))
        self.index = None
        if all_exact:
            index = {}
            for e in self.ordered:
                index.setdefault(tuple(k.value for k in e.key), e)
            self.index = index


class Table:
    """One table with copy-on-write entry snapshots.

    Lookups read ``self._snap`` once and never see a half-updated entry set;
    writers build a new snapshot under a lock and swap it in.
    """

    def __init__(self, tdef, default_action_data=()):
        self.defn = tdef
        self.name = tdef.name
        self.refs = tuple(k.target for k in tdef.key)
        self.kinds = tuple(k.match_type for k in tdef.key)
        self.all_exact = all(k == "exact" for k in self.kinds)
        self.default_action = tdef.default_action
        self.default_action_data = tuple(default_action_data)
        self._lock = threading.Lock()
        self._snap = _Snapshot((), self.all_exact)

    @property
    def entries(self):
        return self._snap.entries

    def _check(self, entry):
        if len(entry.key) != len(self.kinds):
            raise RuleError(f"table '{self.name}': key has {len(entry.key)} parts, expected {len(self.kinds)}")
        for part, kind in zip(entry.key, self.kinds):
            if part.kind != kind:
                raise RuleError(f"table '{self.name}': key part kind {part.kind} where {kind} expected")
        if entry.action not in self.defn.actions:
            raise RuleError(f"table '{self.name}': action '{entry.action}' not allowed")

    def add_entry(self, entry):
        self._check(entry)
        with self._lock:
            entries = self._snap.entries
            if len(entries) >= self.defn.max_size:
                raise RuleError(f"table '{self.name}' is full ({self.defn.max_size} entries)")
            self._snap = _Snapshot(entries + (entry,), self.all_exact)

    def remove_entry(self, entry):
        with self._lock:
            entries = list(self._snap.entries)
            entries.remove(entry)
            self._snap = _Snapshot(tuple(entries), self.all_exact)

    def clear(self):
        with self._lock:
            self._snap = _Snapshot((), self.all_exact)

    def lookup(self, pkt):
        """Return the winning entry, or None for a miss (default action).

        An unreadable key field is a miss and bumps ``lookup_miss_invalid``.
        """
        snap = self._snap
        if not snap.entries:
            return None
        try:
            values = tuple(pkt.get_field(r) for r in self.refs)
        except FieldAccessError:
            pkt.counters["lookup_miss_invalid"] += 1
            return None
        return self.match(values, snap)

    def match(self, values, snap=None):
        snap = snap or self._snap
        if snap.index is not None:
            return snap.index.get(values)
        for e in snap.ordered:
            for part, v in zip(e.key, values):
                if not part.matches(v):
                    break
            else:
                return e
        return None


def linear_scan(entries, values):
    """Reference lookup: every matching entry, best (priority, position) wins."""
    best = None
    for pos, e in enumerate(entries):
        if all(p.matches(v) for p, v in zip(e.key, values)):
            if best is None or (e.priority, pos) < best[0]:
                best = ((e.priority, pos), e)
    return None if best is None else best[1]


def _rule_int(value):
    if isinstance(value, str) and value.count(".") == 3:
        return int.from_bytes(bytes(int(x) for x in value.split(".")), "big")
    if isinstance(value, str) and value.count(":") == 5:
        return int(value.replace(":", ""), 16)
    return parse_int(value)


def parse_key_part(kind, raw):
    if kind == "wildcard":
        return KeyPart.wildcard()
    if kind == "exact":
        return KeyPart.exact(_rule_int(raw["value"] if isinstance(raw, dict) else raw))
    if kind == "ternary":
        return KeyPart.ternary(_rule_int(raw["value"]), _rule_int(raw["mask"]))
    if kind == "range":
        low, high = _rule_int(raw["low"]), _rule_int(raw["high"])
        if low > high:
            raise RuleError(f"range key low {low} > high {high}")
        return KeyPart.range(low, high)
    raise RuleError(f"unknown match kind '{kind}'")


def parse_rules(doc, tables):
    """Turn a rules document into ``[(table name, TableEntry), ...]``."""
    out = []
    if not isinstance(doc, list):
        raise RuleError("rules file must hold a JSON list")
    for i, rule in enumerate(doc):
        try:
            tname = rule["table"]
            table = tables.get(tname)
            if table is None:
                raise RuleError(f"unknown table '{tname}'")
            raw_key = rule.get("key", [])
            if len(raw_key) != len(table.kinds):
                raise RuleError(f"table '{tname}': key has {len(raw_key)} parts, expected {len(table.kinds)}")
            key = tuple(parse_key_part(k, r) for k, r in zip(table.kinds, raw_key))
            entry = TableEntry(key, rule["action"], tuple(_rule_int(v) for v in rule.get("action_data", [])),
                               int(rule.get("priority", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise RuleError(f"rule {i}: malformed ({exc})") from None
        except RuleError as exc:
            raise RuleError(f"rule {i}: {exc}") from None
        out.append((tname, entry))
    return out


def load_rules_file(path, tables):
    with open(path, encoding="utf-8") as fh:
        return parse_rules(json.load(fh), tables)
