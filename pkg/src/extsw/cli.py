"""Command line entry point: ``extsw validate|run|bench|rohc``."""

import argparse
import json
import logging
import os
import sys
from importlib import resources

from .inet import ETHERTYPE_ROHC
from .ir import ConfigError, load_config_file, validate_config
from .pktfile import PacketFileError, read_packets, write_packets
from .rohc.codec import DEFAULT_REFRESH, Compressor, Decompressor, RohcError
from .rohc.frames import compress_frame, decompress_frame

log = logging.getLogger("extsw")


def _int(text):
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _resolve_path(path):
    """Fall back to the packaged fixtures for ``fixtures/<name>`` style paths."""
    if os.path.exists(path):
        return path
    candidate = resources.files("extsw.fixtures").joinpath(os.path.basename(path))
    if candidate.is_file():
        return str(candidate)
    return path


def _load(path):
    return load_config_file(_resolve_path(path))


def cmd_validate(args):
    try:
        cfg = _load(args.ir)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    diags = validate_config(cfg)
    for w in cfg.warnings:
        print(f"warning: {w}")
    for d in diags:
        print(d)
    if diags:
        print(f"{len(diags)} problem(s) found", file=sys.stderr)
        return 1
    print("ok")
    return 0


def cmd_run(args):
    from .primitives import PrimitiveError
    from .switch import Switch
    from .tables import RuleError

    try:
        sw = Switch(_load(args.ir), _resolve_path(args.rules), extension=args.extension,
                    resubmit=args.resubmit, resubmit_limit=args.resubmit_limit,
                    rohc_ethertype=args.rohc_ethertype, rohc_refresh=args.refresh)
        packets = read_packets(args.input)
    except (OSError, ConfigError, PacketFileError, RuleError, PrimitiveError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    emitted = []
    for data in packets:
        emitted.extend(frame for _, frame in sw.process_packet(data, args.ingress_port))
    if args.output:
        write_packets(args.output, emitted)
    print(json.dumps({"packets_in": len(packets), "packets_out": len(emitted),
                      "counters": dict(sorted(sw.counters.items()))}, indent=2))
    return 0


def cmd_bench(args):
    from .bench import format_table, run_bench, write_report

    seed = args.seed
    env_seed = os.environ.get("EXTSW_SEED")
    if env_seed:
        seed = int(env_seed, 0)
    try:
        report, samples = run_bench(packets=args.packets, seed=seed, flows=args.flows,
                                    egress_tables=args.egress_tables, refresh=args.refresh,
                                    warmup=args.warmup, parallel=args.parallel,
                                    ethertype=args.rohc_ethertype)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(format_table(report))
    if args.out:
        for path in write_report(report, samples, args.out, write_csv=args.csv, figures=not args.no_figures):
            print(f"wrote {path}")
    if not report["ok"]:
        for f in report["scenarios"]:
            if not f["ok"]:
                print(f"scenario {f['scenario']} failed: first difference {f['first_diff']}", file=sys.stderr)
        return 1
    return 0


def cmd_rohc(args):
    try:
        frames = read_packets(args.input)
    except (OSError, PacketFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    failed = 0
    if args.direction == "compress":
        codec = Compressor(refresh=args.refresh)
        out = [compress_frame(codec, f, args.rohc_ethertype) for f in frames]
    else:
        codec = Decompressor()
        out = []
        for i, f in enumerate(frames):
            try:
                out.append(decompress_frame(codec, f, args.rohc_ethertype))
            except RohcError as exc:
                failed += 1
                log.warning("packet %d dropped: %s", i, exc)
    write_packets(args.output, out)
    stats = {"packets_in": len(frames), "packets_out": len(out), "failed": failed,
             "flows": codec.flow_stats(), "counters": dict(sorted(codec.counters.items()))}
    print(json.dumps(stats, indent=2))
    return 1 if failed else 0


def build_parser():
    p = argparse.ArgumentParser(prog="extsw", description="Soft switch with extern objects and header compression.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a pipeline IR file")
    v.add_argument("ir")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="push a packet file through a switch")
    r.add_argument("ir")
    r.add_argument("rules")
    r.add_argument("--input", "-i", required=True)
    r.add_argument("--output", "-o")
    r.add_argument("--ingress-port", type=int, default=1)
    r.add_argument("--extension", choices=("native", "extern"))
    r.add_argument("--resubmit", choices=("recirculate", "modify_and_resubmit"))
    r.add_argument("--resubmit-limit", type=int)
    r.add_argument("--rohc-ethertype", type=_int)
    r.add_argument("--refresh", type=int, help="IR refresh period in packets")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run the four latency scenarios")
    b.add_argument("--packets", type=int, default=10_000)
    b.add_argument("--seed", type=int, default=7, help="traffic seed (EXTSW_SEED overrides)")
    b.add_argument("--flows", type=int, default=1)
    b.add_argument("--egress-tables", type=int, default=3)
    b.add_argument("--refresh", type=int, default=DEFAULT_REFRESH)
    b.add_argument("--warmup", type=int, default=1000)
    b.add_argument("--rohc-ethertype", type=_int, default=ETHERTYPE_ROHC)
    b.add_argument("--out", help="directory for report.json, report.csv and figures")
    b.add_argument("--csv", action="store_true")
    b.add_argument("--no-figures", action="store_true")
    b.add_argument("--parallel", action="store_true")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("rohc", help="compress or decompress a packet file")
    c.add_argument("direction", choices=("compress", "decompress"))
    c.add_argument("input")
    c.add_argument("output")
    c.add_argument("--refresh", type=int, default=DEFAULT_REFRESH)
    c.add_argument("--rohc-ethertype", type=_int, default=ETHERTYPE_ROHC)
    c.set_defaults(func=cmd_rohc)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)
