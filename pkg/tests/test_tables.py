import json

import pytest
from hypothesis import given, settings, strategies as st

from extsw.ir import KeySpec, TableDef
from extsw.tables import KeyPart, RuleError, Table, TableEntry, linear_scan, load_rules_file, parse_rules

from helpers import fixture_path


def make_table(kinds, max_size=1024, actions=("a", "b")):
    key = tuple(KeySpec(("h", f"f{i}"), k) for i, k in enumerate(kinds))
    return Table(TableDef("t", key, actions, "a", (), max_size))


class FakePkt:
    def __init__(self, values):
        from collections import Counter
        self.values = values
        self.counters = Counter()

    def get_field(self, ref):
        from extsw.packet import FieldAccessError
        if ref not in self.values:
            raise FieldAccessError(ref)
        return self.values[ref]


def test_exact_uses_index():
    t = make_table(["exact"])
    t.add_entry(TableEntry((KeyPart.exact(5),), "a", (1,)))
    t.add_entry(TableEntry((KeyPart.exact(6),), "b"))
    assert t.match((5,)).action_data == (1,)
    assert t.match((6,)).action == "b"
    assert t.match((7,)) is None
    assert t._snap.index is not None


def test_ternary_masks():
    t = make_table(["ternary"])
    t.add_entry(TableEntry((KeyPart.ternary(0x0A000000, 0xFF000000),), "a"))
    assert t.match((0x0A010203,)) is not None
    assert t.match((0x0B010203,)) is None


def test_range_inclusive():
    t = make_table(["range"])
    t.add_entry(TableEntry((KeyPart.range(10, 20),), "a"))
    assert [t.match((v,)) is not None for v in (9, 10, 20, 21)] == [False, True, True, False]


def test_wildcard_always_matches():
    t = make_table(["wildcard"])
    t.add_entry(TableEntry((KeyPart.wildcard(),), "a"))
    assert t.match((0,)) is not None and t.match((2 ** 48 - 1,)) is not None


def test_priority_then_insertion_order():
    t = make_table(["ternary"])
    lo = TableEntry((KeyPart.ternary(0, 0),), "a", (1,), priority=5)
    first = TableEntry((KeyPart.ternary(0, 0),), "b", (2,), priority=1)
    second = TableEntry((KeyPart.ternary(0, 0),), "a", (3,), priority=1)
    for e in (lo, first, second):
        t.add_entry(e)
    assert t.match((42,)) is first
    t.remove_entry(first)
    assert t.match((42,)) is second


def test_exact_duplicate_keeps_first():
    t = make_table(["exact"])
    t.add_entry(TableEntry((KeyPart.exact(1),), "a", (1,)))
    t.add_entry(TableEntry((KeyPart.exact(1),), "a", (2,)))
    assert t.match((1,)).action_data == (1,)


def test_empty_table_misses():
    t = make_table(["exact"])
    pkt = FakePkt({})
    assert t.lookup(pkt) is None
    assert pkt.counters["lookup_miss_invalid"] == 0


def test_invalid_key_field_counts_miss():
    t = make_table(["exact"])
    t.add_entry(TableEntry((KeyPart.exact(1),), "a"))
    pkt = FakePkt({})
    assert t.lookup(pkt) is None
    assert pkt.counters["lookup_miss_invalid"] == 1
    assert t.lookup(FakePkt({("h", "f0"): 1})) is not None


def test_max_size_and_clear():
    t = make_table(["exact"], max_size=2)
    t.add_entry(TableEntry((KeyPart.exact(1),), "a"))
    t.add_entry(TableEntry((KeyPart.exact(2),), "a"))
    with pytest.raises(RuleError, match="full"):
        t.add_entry(TableEntry((KeyPart.exact(3),), "a"))
    t.clear()
    assert t.entries == ()


@pytest.mark.parametrize("entry, msg", [
    (TableEntry((KeyPart.ternary(1, 1),), "a"), "kind"),
    (TableEntry((KeyPart.exact(1), KeyPart.exact(2)), "a"), "parts"),
    (TableEntry((KeyPart.exact(1),), "zzz"), "not allowed"),
])
def test_add_entry_checks(entry, msg):
    with pytest.raises(RuleError, match=msg):
        make_table(["exact"]).add_entry(entry)


def test_snapshot_isolation():
    t = make_table(["exact"])
    t.add_entry(TableEntry((KeyPart.exact(1),), "a"))
    snap = t._snap
    t.add_entry(TableEntry((KeyPart.exact(2),), "a"))
    assert t.match((2,), snap) is None
    assert t.match((2,)) is not None


_kinds = st.lists(st.sampled_from(["exact", "ternary", "range", "wildcard"]), min_size=1, max_size=3)


def _part(kind):
    v = st.integers(0, 15)
    if kind == "exact":
        return v.map(KeyPart.exact)
    if kind == "ternary":
        return st.tuples(v, v).map(lambda p: KeyPart.ternary(*p))
    if kind == "range":
        return st.tuples(v, v).map(lambda p: KeyPart.range(min(p), max(p)))
    return st.just(KeyPart.wildcard())


@st.composite
def tables_and_probes(draw):
    kinds = draw(_kinds)
    entries = draw(st.lists(st.builds(
        lambda key, prio, tag: TableEntry(tuple(key), "a", (tag,), prio),
        st.tuples(*[_part(k) for k in kinds]), st.integers(0, 3), st.integers()), max_size=20))
    probes = draw(st.lists(st.tuples(*[st.integers(0, 15)] * len(kinds)), min_size=1, max_size=20))
    return kinds, entries, probes


@settings(max_examples=300, deadline=None)
@given(tables_and_probes())
def test_lookup_agrees_with_linear_scan(case):
    kinds, entries, probes = case
    t = make_table(kinds)
    for e in entries:
        t.add_entry(e)
    for values in probes:
        got = t.match(values)
        want = linear_scan(entries, values)
        if t.all_exact:
            # The index keeps the best entry for each key, same as the scan.
            assert (got is None) == (want is None)
            if got is not None:
                assert (got.priority, entries.index(got)) == (want.priority, entries.index(want))
        else:
            assert got is want


def test_parse_rules_value_forms():
    t = make_table(["exact", "ternary", "range"])
    [(name, e)] = parse_rules([{"table": "t", "action": "b", "action_data": ["0x10", 3],
                                "key": ["10.0.0.2", {"value": "02:00:00:00:00:00", "mask": "ff:00:00:00:00:00"},
                                        {"low": 1, "high": "0x20"}], "priority": 4}], {"t": t})
    assert name == "t"
    assert e.key == (KeyPart.exact(0x0A000002), KeyPart.ternary(0x020000000000, 0xFF0000000000),
                     KeyPart.range(1, 0x20))
    assert e.action_data == (0x10, 3) and e.priority == 4


@pytest.mark.parametrize("doc, msg", [
    ({"table": "t"}, "must hold a JSON list"),
    ([{"table": "nope", "action": "a", "key": [1]}], "rule 0: unknown table"),
    ([{"table": "t", "action": "a", "key": [1, 2]}], "rule 0: .*expected 1"),
    ([{"table": "t", "key": [1]}], "rule 0: malformed"),
    ([{"table": "t", "action": "a", "key": ["zz"]}], "rule 0: malformed"),
])
def test_parse_rules_errors(doc, msg):
    with pytest.raises(RuleError, match=msg):
        parse_rules(doc, {"t": make_table(["exact"])})


def test_range_low_above_high():
    with pytest.raises(RuleError, match="low"):
        parse_rules([{"table": "t", "action": "a", "key": [{"low": 5, "high": 1}]}], {"t": make_table(["range"])})


def test_fixture_rules_load():
    from extsw.ir import load_config_file
    cfg = load_config_file(fixture_path("rohc_pipeline.json"))
    tables = {td.name: Table(td) for p in (cfg.ingress, cfg.egress) for td in p.tables}
    rules = load_rules_file(fixture_path("rohc_rules.json"), tables)
    with open(fixture_path("rohc_rules.json")) as fh:
        assert len(rules) == len(json.load(fh))
