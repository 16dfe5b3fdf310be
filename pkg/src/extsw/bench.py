"""Three-node latency benchmark: host A -> switch -> host B, in one process.

Host A compresses the generated RTP stream. The switch decompresses each
packet, sends it back to its parser, forwards it and compresses it again
on egress. Host B decompresses and checks every packet against what host A
generated. The four scenarios cross the extension mechanism (native
primitives or extern methods) with the resubmission path (recirculate or
modify_and_resubmit). Latencies are normalized to native+recirculate.
"""

import copy
import csv
import gc
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import numpy as np
from scipy import stats

from .inet import ETH_LEN, ETHERTYPE_ROHC
from .ir import from_dict
from .rohc.codec import Compressor, Decompressor, IR_TYPE, RohcError
from .rohc.frames import compress_frame, decompress_frame
from .switch import Switch
from .traffic import TrafficSpec, generate_traffic

log = logging.getLogger(__name__)

SCENARIOS = (
    ("native", "recirculate"),
    ("native", "modify_and_resubmit"),
    ("extern", "recirculate"),
    ("extern", "modify_and_resubmit"),
)
BASELINE = "native+recirculate"
WARMUP = 1000
INGRESS_PORT = 1
HOST_B_PORT = 2


class BenchError(Exception):
    pass


def scenario_name(extension, resubmit):
    return f"{extension}+{resubmit}"


def load_fixture(name):
    return json.loads(resources.files("extsw.fixtures").joinpath(name).read_text())


def bench_pipeline(egress_tables=3):
    """The fixture pipeline with ``egress_tables`` ACL tables ahead of recompression.

    Returns ``(config, rules)``. Every ACL table gets the rules of the
    fixture's first ACL table; packets walk all entries before hitting the
    catch-all, which is what makes the egress pass cost something.
    """
    if egress_tables < 0:
        raise ValueError("egress_tables must be >= 0")
    doc = load_fixture("rohc_pipeline.json")
    rules = load_fixture("rohc_rules.json")
    egress = doc["pipelines"]["egress"]
    template = next(t for t in egress["tables"] if t["name"] == "acl_0")
    acl_rules = [r for r in rules if r["table"] == "acl_0"]
    others = [t for t in egress["tables"] if not t["name"].startswith("acl_")]
    tail = [c for c in egress["control"] if not c["apply"].startswith("acl_")]
    tables, control, new_rules = [], [], [r for r in rules if not r["table"].startswith("acl_")]
    for k in range(egress_tables):
        t = copy.deepcopy(template)
        t["name"] = f"acl_{k}"
        tables.append(t)
        control.append({"apply": t["name"]})
        new_rules.extend(dict(r, table=t["name"]) for r in acl_rules)
    egress["tables"] = tables + others
    egress["control"] = control + tail
    return from_dict(doc), new_rules


def _first_diff(a, b):
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return min(len(a), len(b))


def _block_kind(frame, ethertype):
    if len(frame) < ETH_LEN + 2 or int.from_bytes(frame[12:14], "big") != ethertype:
        return "plain"
    return "ir" if frame[ETH_LEN + 1] & 0xFE == IR_TYPE else "uo0"


def _switch(extension, resubmit, cfg, rules, ethertype, refresh, resubmit_limit=4):
    return Switch(cfg, rules, extension=extension, resubmit=resubmit, resubmit_limit=resubmit_limit,
                  rohc_ethertype=ethertype, rohc_refresh=refresh)


def _drive(switches, sent):
    """Feed every frame to every switch, frame by frame, with GC paused.

    Interleaving keeps slow drift (clock scaling, heap growth) from favouring
    whichever scenario happens to run last.
    """
    outputs = [[] for _ in switches]
    t0 = time.perf_counter()
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for frame in sent:
            for sw, out in zip(switches, outputs):
                out.append(sw.process_packet(frame, INGRESS_PORT))
    finally:
        if gc_was_enabled:
            gc.enable()
    return outputs, time.perf_counter() - t0


def _evaluate(sw, outputs, wall, originals, sent, warmup, ethertype):
    extension, resubmit = sw.scenario["extension"], sw.scenario["resubmit"]
    host_b = Decompressor()
    digest = hashlib.sha256()
    verified = dropped = wrong_port = 0
    first_diff = None
    kinds = {"ir": 0, "uo0": 0, "plain": 0}
    wire = 0
    for i, out in enumerate(outputs):
        if not out:
            dropped += 1
            continue
        port, frame = out[0]
        digest.update(port.to_bytes(2, "big") + len(frame).to_bytes(4, "big") + frame)
        wire += len(frame)
        kinds[_block_kind(frame, ethertype)] += 1
        if port != HOST_B_PORT:
            wrong_port += 1
        err = None
        try:
            got = decompress_frame(host_b, frame, ethertype)
        except RohcError as exc:
            got, err = None, str(exc)
        if got == originals[i]:
            verified += 1
        elif first_diff is None:
            first_diff = {"packet": i, "offset": None if got is None else _first_diff(got, originals[i]),
                          "error": err}

    metrics = sw.collect_metrics()
    lat = np.asarray(metrics["latencies_ns"], dtype=float)
    samples = lat[min(warmup, len(lat) // 2):]
    delivered = len(sent) - dropped
    counters = metrics["counters"]
    fragment = {
        "scenario": scenario_name(extension, resubmit),
        "extension": extension,
        "resubmit": resubmit,
        "packets": len(sent),
        "delivered": delivered,
        "dropped": dropped,
        "verified": verified,
        "integrity": verified / len(sent) if sent else 1.0,
        "wrong_port": wrong_port,
        "first_diff": first_diff,
        "resubmit_overflow": counters.get("resubmit_overflow", 0),
        "decomp_crc_fail": counters.get("decomp_crc_fail", 0),
        "output_sha256": digest.hexdigest(),
        "compression": {
            "ir_frames": kinds["ir"],
            "uo0_frames": kinds["uo0"],
            "uncompressed_frames": kinds["plain"],
            "mean_wire_bytes": wire / delivered if delivered else 0.0,
        },
        "counters": dict(sorted(counters.items())),
        "latency": {
            "samples": int(len(samples)),
            "mean_ns": float(samples.mean()) if len(samples) else 0.0,
            "median_ns": float(np.median(samples)) if len(samples) else 0.0,
            "p99_ns": float(np.percentile(samples, 99)) if len(samples) else 0.0,
            "wall_s": wall,
        },
    }
    fragment["ok"] = verified == len(sent) and fragment["resubmit_overflow"] == 0 and not wrong_port
    return fragment, samples


def run_scenario(extension, resubmit, originals, sent, cfg, rules, warmup=WARMUP,
                 ethertype=ETHERTYPE_ROHC, refresh=100, resubmit_limit=4):
    """Push ``sent`` through a fresh switch and verify the result at host B.

    ``originals[i]`` is what host A generated before compressing it into
    ``sent[i]``. Returns ``(fragment, samples)``; ``samples`` are the
    post-warm-up latencies in ns.
    """
    sw = _switch(extension, resubmit, cfg, rules, ethertype, refresh, resubmit_limit)
    (outputs,), wall = _drive([sw], sent)
    return _evaluate(sw, outputs, wall, originals, sent, warmup, ethertype)


def _welch_less(a, b):
    """One-sided Welch test of mean(a) < mean(b); NaN when undefined."""
    if len(a) < 2 or len(b) < 2:
        return float("nan")
    return float(stats.ttest_ind(a, b, equal_var=False, alternative="less").pvalue)


def run_bench(packets=10_000, seed=7, flows=1, egress_tables=3, refresh=100, warmup=WARMUP,
              parallel=False, ethertype=ETHERTYPE_ROHC, scenarios=SCENARIOS):
    """Run every scenario over the same traffic; return ``(report, samples)``."""
    if packets < 0:
        raise ValueError("packets must be >= 0")
    if flows < 1:
        raise ValueError("flows must be >= 1")
    per_flow = -(-packets // flows)
    originals = generate_traffic(TrafficSpec(flows=flows, packets_per_flow=per_flow, seed=seed))[:packets]
    host_a = Compressor(refresh=refresh)
    sent = [compress_frame(host_a, f, ethertype) for f in originals]
    cfg, rules = bench_pipeline(egress_tables)

    t0 = time.perf_counter()
    warnings = []
    if parallel:
        warnings.append("scenarios ran on parallel threads; latencies share one interpreter and "
                        "are not comparable across scenarios")
        args = (originals, sent, cfg, rules, warmup, ethertype, refresh)
        with ThreadPoolExecutor(max_workers=len(scenarios)) as pool:
            results = list(pool.map(lambda s: run_scenario(s[0], s[1], *args), scenarios))
    else:
        switches = [_switch(ext, res, cfg, rules, ethertype, refresh) for ext, res in scenarios]
        outputs, wall = _drive(switches, sent)
        results = [_evaluate(sw, out, wall, originals, sent, warmup, ethertype)
                   for sw, out in zip(switches, outputs)]
    elapsed = time.perf_counter() - t0

    fragments = [r[0] for r in results]
    samples = {f["scenario"]: r[1] for f, r in zip(fragments, results)}
    by_name = {f["scenario"]: f for f in fragments}
    base = by_name.get(BASELINE, fragments[0] if fragments else None)
    base_mean = base["latency"]["mean_ns"] if base else 0.0
    for f in fragments:
        f["latency"]["normalized"] = f["latency"]["mean_ns"] / base_mean if base_mean else float("nan")

    comparisons = {}
    for ext in ("native", "extern"):
        mar, rec = scenario_name(ext, "modify_and_resubmit"), scenario_name(ext, "recirculate")
        if mar in samples and rec in samples:
            comparisons[f"{ext}: modify_and_resubmit < recirculate"] = {
                "welch_p": _welch_less(samples[mar], samples[rec]),
                "saving": 1.0 - by_name[mar]["latency"]["mean_ns"] / by_name[rec]["latency"]["mean_ns"],
            }
    for res in ("recirculate", "modify_and_resubmit"):
        nat, ext = scenario_name("native", res), scenario_name("extern", res)
        if nat in by_name and ext in by_name:
            comparisons[f"{res}: |native - extern|"] = {
                "normalized_gap": abs(by_name[nat]["latency"]["normalized"] - by_name[ext]["latency"]["normalized"]),
            }

    hashes = {f["output_sha256"] for f in fragments}
    report = {
        "config": {"packets": packets, "seed": seed, "flows": flows, "egress_tables": egress_tables,
                   "ir_refresh": refresh, "warmup": warmup, "rohc_ethertype": f"0x{ethertype:04X}",
                   "parallel": parallel, "baseline": BASELINE},
        "traffic": {
            "frames": len(originals),
            "frame_bytes": len(originals[0]) if originals else 0,
            "host_a_mean_wire_bytes": sum(map(len, sent)) / len(sent) if sent else 0.0,
            "sha256": hashlib.sha256(b"".join(originals)).hexdigest(),
        },
        "scenarios": fragments,
        "outputs_identical": len(hashes) <= 1,
        "comparisons": comparisons,
        "elapsed_s": elapsed,
        "warnings": warnings,
        "ok": all(f["ok"] for f in fragments) and len(hashes) <= 1,
    }
    for w in warnings:
        log.warning(w)
    return report, samples


# -- report rendering ---------------------------------------------------------

COLUMNS = ("scenario", "mean_us", "median_us", "p99_us", "normalized", "delivered", "dropped", "integrity")


def table_rows(report):
    rows = []
    for f in report["scenarios"]:
        lat = f["latency"]
        rows.append({
            "scenario": f["scenario"],
            "mean_us": f"{lat['mean_ns'] / 1e3:.1f}",
            "median_us": f"{lat['median_ns'] / 1e3:.1f}",
            "p99_us": f"{lat['p99_ns'] / 1e3:.1f}",
            "normalized": f"{lat['normalized']:.2f}",
            "delivered": str(f["delivered"]),
            "dropped": str(f["dropped"]),
            "integrity": f"{100 * f['integrity']:.1f}%",
        })
    return rows


def format_table(report):
    rows = table_rows(report)
    widths = {c: max([len(c)] + [len(r[c]) for r in rows]) for c in COLUMNS}
    lines = ["  ".join(c.ljust(widths[c]) for c in COLUMNS)]
    lines.append("  ".join("-" * widths[c] for c in COLUMNS))
    for r in rows:
        lines.append("  ".join(r[c].rjust(widths[c]) if c != "scenario" else r[c].ljust(widths[c])
                               for c in COLUMNS))
    for name, c in report["comparisons"].items():
        detail = ", ".join(f"{k}={v:.3g}" for k, v in c.items())
        lines.append(f"{name}: {detail}")
    lines.append(f"outputs identical across scenarios: {report['outputs_identical']}")
    for w in report["warnings"]:
        lines.append(f"warning: {w}")
    return "\n".join(lines)


def write_report(report, samples, out_dir, write_csv=False, figures=True):
    """Write report.json (+ report.csv) and the figures; return the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    paths.append(path)
    if write_csv:
        path = os.path.join(out_dir, "report.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=COLUMNS)
            w.writeheader()
            w.writerows(table_rows(report))
        paths.append(path)
    if figures and report["scenarios"]:
        from .plotting import write_figures
        paths.extend(write_figures(report, samples, out_dir))
    return paths
