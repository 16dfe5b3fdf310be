import copy
import json
import logging

import pytest
from hypothesis import given, settings, strategies as st

from extsw.ir import (ConfigParseError, SchemaError, dumps, from_dict, load_config, load_config_file, to_dict,
                      validate_config)

from helpers import fixture_path


def example_doc():
    with open(fixture_path("extern_example.json")) as fh:
        return json.load(fh)


def rohc_doc():
    with open(fixture_path("rohc_pipeline.json")) as fh:
        return json.load(fh)


MINIMAL = {
    "header_types": [{"name": "ethernet", "fields": [["dstAddr", 48], ["srcAddr", 48], ["etherType", 16]]}],
    "parser_states": [{"name": "start", "extracts": ["ethernet"], "transitions": [{"value": "default", "next": None}]}],
}


def test_extern_example_document_loads():
    cfg = load_config_file(fixture_path("extern_example.json"))
    (action,) = cfg.actions
    assert action.name == "my_extern_call"
    assert [p.op for p in action.primitives] == ["_extern_example_method_example"]
    (ext,) = cfg.extern_instances
    assert (ext.name, ext.type) == ("my_extern_example", "extern_example")
    assert [(a.name, a.value) for a in ext.attribute_values] == [("attribute_example", 0)]
    assert validate_config(cfg) == []


def test_empty_actions_and_externs():
    cfg = from_dict(dict(MINIMAL, actions=[], extern_instances=[]))
    assert cfg.actions == () and cfg.extern_instances == ()
    assert validate_config(cfg) == []


def test_rohc_fixture_shape():
    cfg = load_config_file(fixture_path("rohc_pipeline.json"))
    assert {s.name for s in cfg.parser_states} == {
        "start", "parse_eth", "parse_ipv4", "parse_udp", "parse_rtp", "parse_rohc"}
    assert cfg.ingress.table("forward") is not None
    assert {e.name for e in cfg.extern_instances} == {"rohc_compressor", "rohc_decompressor"}
    assert validate_config(cfg) == []


def test_malformed_json_reports_position():
    with pytest.raises(ConfigParseError) as exc:
        load_config('{\n  "header_types": [,]\n}')
    assert exc.value.line == 2
    assert exc.value.column > 0


@pytest.mark.parametrize("key", ["header_types", "parser_states"])
def test_missing_mandatory_key(key):
    doc = dict(MINIMAL)
    del doc[key]
    with pytest.raises(SchemaError) as exc:
        from_dict(doc)
    assert key in str(exc.value)


def test_structural_garbage_is_a_schema_error():
    with pytest.raises(SchemaError):
        from_dict(dict(MINIMAL, header_types=[{"name": "x", "fields": [["a"]]}]))


def test_unknown_top_level_key_warns_and_is_kept(caplog):
    with caplog.at_level(logging.WARNING):
        cfg = from_dict(dict(MINIMAL, vendor_blob={"a": 1}))
    assert cfg.extras == {"vendor_blob": {"a": 1}}
    assert any("vendor_blob" in w for w in cfg.warnings)
    assert "vendor_blob" in caplog.text


def test_table_with_missing_action():
    doc = rohc_doc()
    doc["pipelines"]["ingress"]["tables"][1]["actions"].append("foo")
    diags = validate_config(from_dict(doc))
    assert diags == ["table 'forward': unknown action 'foo'"]


def test_unaligned_header():
    doc = copy.deepcopy(MINIMAL)
    doc["header_types"].append({"name": "odd", "fields": [["a", 4], ["b", 8]]})
    diags = validate_config(from_dict(doc))
    assert len(diags) == 1 and "not byte-aligned" in diags[0]


@pytest.mark.parametrize("mutate, needle", [
    (lambda d: d["parser_states"][1]["transitions"].__setitem__(0, {"value": "0x0800", "next": "nowhere"}),
     "unknown state 'nowhere'"),
    (lambda d: d["parser_states"].append({"name": "start"}), "exactly one 'start'"),
    (lambda d: d["parser_states"].append({"name": "island"}), "unreachable"),
    (lambda d: d["parser_states"][4]["transitions"].__setitem__(0, {"value": "default", "next": "parse_eth"}),
     "loop"),
    (lambda d: d["parser_states"][2]["extracts"].append("ethernet"), "extracted twice"),
    (lambda d: d["pipelines"]["ingress"]["tables"][1]["key"][0].__setitem__("match_type", "lpm"),
     "illegal match kind"),
    (lambda d: d["actions"][0]["primitives"].append({"op": "no_such_op"}), "unknown primitive"),
    (lambda d: d["actions"][5]["primitives"][0].__setitem__("op", "_rohc_ext_explode"), "no method 'explode'"),
    (lambda d: d["actions"][5]["primitives"][0].__setitem__("op", "_extern_example_method_example"),
     "does not match '_rohc_ext_<method>'"),
    (lambda d: d["extern_instances"][0].__setitem__("type", "mystery"), "unknown extern type"),
    (lambda d: d["metadata"].append(["huge", 129]), "outside 1..128"),
    (lambda d: d["actions"].append(dict(d["actions"][0])), "duplicate definition"),
    (lambda d: d["options"].__setitem__("resubmit", "teleport"), "options.resubmit"),
    (lambda d: d["pipelines"]["egress"]["control"].append({"apply": "ghost"}), "unknown table 'ghost'"),
    (lambda d: d["constants"].__setitem__("ROHC_ETHERTYPE", "0xZZ"), "constant"),
])
def test_validation_diagnostics(mutate, needle):
    doc = rohc_doc()
    mutate(doc)
    diags = validate_config(from_dict(doc))
    assert any(needle in d for d in diags), diags


def test_round_trip_fixtures():
    for name in ("rohc_pipeline.json", "extern_example.json"):
        cfg = load_config_file(fixture_path(name))
        assert load_config(dumps(cfg)) == cfg


_names = st.text("abcdefghij_", min_size=1, max_size=8)


@st.composite
def configs(draw):
    n = draw(st.integers(1, 4))
    headers = []
    for i in range(n):
        widths = draw(st.lists(st.sampled_from([8, 16, 32, 48]), min_size=1, max_size=4))
        headers.append({"name": f"h{i}", "fields": [[f"f{j}", w] for j, w in enumerate(widths)]})
    states = [{"name": "start", "extracts": ["h0"],
               "transitions": [{"value": "default", "next": "s1" if n > 1 else None}]}]
    for i in range(1, n):
        states.append({"name": f"s{i}", "extracts": [f"h{i}"], "select": [f"h{i}", "f0"],
                       "transitions": [{"value": hex(draw(st.integers(0, 255))), "mask": "0xFF",
                                        "next": f"s{i + 1}" if i + 1 < n else None},
                                       {"value": "default", "next": None}]})
    actions = [{"name": draw(_names), "id": 0, "runtime_data": [{"name": "p", "bitwidth": 8}],
                "primitives": [{"op": "modify_field", "parameters": [
                    {"type": "field", "value": ["h0", "f0"]}, {"type": "runtime_data", "value": 0}]}]}]
    tables = [{"name": "t", "key": [{"target": ["h0", "f0"], "match_type": draw(st.sampled_from(
        ["exact", "ternary", "range", "wildcard"]))}], "actions": [actions[0]["name"]],
        "default_action": {"action": actions[0]["name"], "action_data": ["0x1"]},
        "max_size": draw(st.integers(1, 1024))}]
    return {"header_types": headers, "parser_states": states, "actions": actions,
            "metadata": [["m", draw(st.integers(1, 128))]],
            "pipelines": {"ingress": {"tables": tables, "control": [{"apply": "t", "when": {"valid": "h0"}}]}}}


@settings(max_examples=50, deadline=None)
@given(configs())
def test_round_trip_is_idempotent(doc):
    cfg = from_dict(doc)
    assert validate_config(cfg) == []
    again = load_config(dumps(cfg))
    assert again == cfg
    assert to_dict(again) == to_dict(cfg)
