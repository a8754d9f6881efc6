"""fpga130 command-line entry point.

Exit codes: 0 success, 1 input/usage error, 2 verification failure.
Reports go to stdout as JSON lines unless ``--human`` is given; errors go
to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .arch import (TOTAL_BITS, BlockKind, FabricArch, census, dump_arch_config,
                   load_arch_config)
from .bitstream import ConfigImage, decode, deserialize, serialize, utilization
from .configbus import (DeviceState, apply, image_to_transactions, mismatch_csv,
                        parse_fault_spec, readback_transactions, readback_verify, write_trace)
from .errors import FabricError
from .flow import load_design
from .routerlab import (ExperimentConfig, load_experiment_config, results_csv, route_design,
                        run_experiment, summarize, summary_table)
from .sim import configure, equivalence_check, parse_vectors, write_vcd
from .vtr import parse_blif, parse_net, parse_place, write_route

log = logging.getLogger("fpga130")

EXIT_OK, EXIT_INPUT, EXIT_VERIFY = 0, 1, 2


class UsageError(FabricError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for verification failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


class Reporter:
    def __init__(self, human: bool, stream=None):
        self.human = human
        self.stream = stream or sys.stdout

    def emit(self, record: dict, text: str) -> None:
        if self.human:
            self.stream.write(text + "\n")
        else:
            self.stream.write(json.dumps(record) + "\n")


def _arch(args, image: ConfigImage | None = None) -> FabricArch:
    if args.arch:
        return load_arch_config(Path(args.arch).read_text())
    if image is not None:
        return image.arch
    return FabricArch()


def _read_image(path) -> ConfigImage:
    return deserialize(Path(path).read_bytes())


def _bits(arch: FabricArch, image: ConfigImage) -> dict:
    mm = arch.memory_map
    return {"total": TOTAL_BITS, "assigned": len(mm.address), "spare": len(mm.spare),
            "set": sum(bin(b).count("1") for b in image.data)}


# --- subcommands ------------------------------------------------------------

def cmd_genbits(args, rep: Reporter) -> int:
    arch = _arch(args)
    design = load_design(args.blif, args.net, args.place, args.route, arch)
    image = design.bitstream()
    Path(args.out).write_bytes(serialize(image))
    u = utilization(decode(image, arch))
    bits = _bits(arch, image)
    rep.emit({"record": "bitstream", "path": str(args.out), "channel_width": arch.channel_width,
              "topology": arch.topology.value},
             f"wrote {args.out} (W={arch.channel_width}, {arch.topology.value})")
    rep.emit({"record": "utilization", **u,
              "summary": f"{u['clbs_used']}/{u['clbs_total']} CLBs used"},
             f"{u['clbs_used']}/{u['clbs_total']} CLBs used, {u['gpios_used']} GPIOs, "
             f"{u['switches_on']} switches on")
    rep.emit({"record": "bits", **bits},
             f"bits: {bits['set']} set; {bits['assigned']} assigned + {bits['spare']} spare "
             f"= {bits['total']}")
    if args.figure:
        from .plotting import config_density
        config_density(image, args.figure)
    return EXIT_OK


def cmd_decode(args, rep: Reporter) -> int:
    image = _read_image(args.bitstream)
    cfg = decode(image, _arch(args, image))
    for w in cfg.warnings:
        log.warning(w)
    text = cfg.to_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.figure:
        from .plotting import config_density
        config_density(image, args.figure)
    return EXIT_OK


def cmd_sim(args, rep: Reporter) -> int:
    image = _read_image(args.bitstream)
    fabric = configure(image, _arch(args, image))
    rows = parse_vectors(Path(args.vectors).read_text())
    n_in, n_out = len(fabric.inputs), len(fabric.outputs)
    for i, (ins, exp) in enumerate(rows, 1):
        if len(ins) != n_in:
            raise UsageError(f"vector {i}: {len(ins)} input bits, fabric has {n_in} input pads "
                             f"(gpio {fabric.inputs})")
        if exp is not None and len(exp) != n_out:
            raise UsageError(f"vector {i}: {len(exp)} expected bits, fabric has {n_out} output "
                             f"pads (gpio {fabric.outputs})")
    state = fabric.reset()
    samples, failures, checked = [], 0, 0
    for cycle, (ins, exp) in enumerate(rows):
        state = fabric.step(state, {g: int(b) for g, b in zip(fabric.inputs, ins)})
        got = "".join(str(state.outputs[g]) for g in fabric.outputs)
        ok = None if exp is None else got == exp
        if ok is not None:
            checked += 1
            failures += not ok
        samples.append(tuple(int(b) for b in ins + got))
        mark = {None: "", True: " ok", False: f" MISMATCH expected {exp}"}[ok]
        rep.emit({"cycle": cycle, "inputs": ins, "outputs": got, "expected": exp, "ok": ok},
                 f"cycle {cycle:>4}  in {ins or '-'}  out {got or '-'}{mark}")
    verdict = "PASS" if failures == 0 else "FAIL"
    rep.emit({"verdict": verdict, "cycles": len(rows), "checked": checked, "failures": failures},
             f"{verdict}: {checked} checked cycles, {failures} mismatches")
    if args.vcd:
        names = [f"gpio{g}_in" for g in fabric.inputs] + [f"gpio{g}_out" for g in fabric.outputs]
        Path(args.vcd).write_text(write_vcd(names, samples))
    return EXIT_OK if failures == 0 else EXIT_VERIFY


def cmd_verify(args, rep: Reporter) -> int:
    arch = _arch(args)
    design = load_design(args.blif, args.net, args.place, args.route, arch)
    image = _read_image(args.bitstream) if args.bitstream else design.bitstream()
    verdict = equivalence_check(design.netlist, image, arch, design.pads, args.strategy,
                                args.vectors, args.seed, args.cycles)
    record = {"verdict": "PASS" if verdict.equivalent else "FAIL", "strategy": verdict.strategy,
              "vectors": verdict.vectors, "cycles": verdict.cycles}
    if verdict.divergence:
        d = verdict.divergence
        record["divergence"] = {"phase": d.phase, "cycle": d.cycle,
                                "inputs": "".join(map(str, d.inputs)),
                                "expected": "".join(map(str, d.expected)),
                                "observed": "".join(map(str, d.observed))}
    rep.emit(record, str(verdict))
    return EXIT_OK if verdict.equivalent else EXIT_VERIFY


def cmd_busplay(args, rep: Reporter) -> int:
    image = _read_image(args.bitstream)
    device = DeviceState()
    faults = []
    if args.faults:
        faults += parse_fault_spec(Path(args.faults).read_text())
    for spec in args.fault or ():
        faults += parse_fault_spec(spec)
    for addr, value in faults:
        device.inject(addr, value)
    txns = image_to_transactions(image) + readback_transactions()
    for t in txns:
        apply(device, t)
    if args.trace:
        Path(args.trace).write_text(write_trace(txns))
    report = readback_verify(device, image)
    if args.out:
        Path(args.out).write_text(mismatch_csv(report))
    rep.emit({"record": "bus", "writes": len(txns) // 2, "reads": len(txns) // 2,
              "faults": len(faults), "mismatches": len(report)},
             f"{len(txns) // 2} writes, {len(txns) // 2} reads, {len(faults)} injected faults, "
             f"{len(report)} readback mismatches")
    for m in report:
        a = m.address
        rep.emit({"record": "mismatch", "row": a.row, "col": a.col, "word": a.word, "bit": a.bit,
                  "expected": m.expected, "observed": m.observed},
                 f"mismatch at (row={a.row}, col={a.col}, word={a.word}, bit={a.bit}): "
                 f"wrote {m.expected}, read {m.observed}")
    return EXIT_OK if not report else EXIT_VERIFY


def cmd_route_lab(args, rep: Reporter) -> int:
    cfg = load_experiment_config(Path(args.config).read_text()) if args.config else ExperimentConfig()
    results = run_experiment(cfg, args.seed)
    table = results_csv(results)
    if args.out:
        Path(args.out).write_text(table)
    else:
        sys.stdout.write(table)
    if args.figure:
        from .plotting import wmin_histogram
        wmin_histogram(results, args.figure)
    if args.out:
        summary = summarize(results)
        if rep.human:
            sys.stdout.write(summary_table(summary))
        else:
            for topo, s in summary.items():
                rep.emit({"topology": topo, **{k: v for k, v in s.items() if k != "histogram"},
                          "histogram": {str(k): v for k, v in s["histogram"].items()}}, "")
    return EXIT_OK


def cmd_stats(args, rep: Reporter) -> int:
    arch = _arch(args)
    counts = census()
    mm = arch.memory_map
    rep.emit({"record": "arch", "channel_width": arch.channel_width,
              "topology": arch.topology.value, "rows": arch.rows, "cols": arch.cols},
             dump_arch_config(arch).rstrip("\n").replace("\n", ", "))
    rep.emit({"record": "census", **{k.value: counts[k] for k in BlockKind}},
             "census: " + ", ".join(f"{counts[k]} {k.value}" for k in BlockKind))
    per_kind: dict = {}
    for res in mm.address:
        per_kind[res.block] = per_kind.get(res.block, 0) + 1
    rep.emit({"record": "bits", "total": TOTAL_BITS, "assigned": len(mm.address),
              "spare": len(mm.spare), "by_block": dict(sorted(per_kind.items()))},
             f"bits: {len(mm.address)} assigned + {len(mm.spare)} spare = {TOTAL_BITS}; "
             + ", ".join(f"{k} {v}" for k, v in sorted(per_kind.items())))
    if args.memory_map:
        Path(args.memory_map).write_text(mm.to_csv())
    return EXIT_OK


def cmd_autoroute(args, rep: Reporter) -> int:
    arch = _arch(args)
    netlist = parse_blif(Path(args.blif).read_text(), args.blif)
    packed = parse_net(Path(args.net).read_text(), args.net)
    placement = parse_place(Path(args.place).read_text(), args.place)
    forest = route_design(arch, netlist, packed, placement, args.seed)
    Path(args.out).write_text(write_route(forest))
    nodes = sum(len(n.nodes) for n in forest)
    rep.emit({"record": "route", "path": str(args.out), "nets": len(forest), "nodes": nodes},
             f"routed {len(forest)} nets ({nodes} route lines) into {args.out}")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--arch", help="architecture file (key=value)")
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--human", action="store_true", help="human-readable report")

    ap = _Parser(prog="fpga130", description="Bitstream toolchain and fabric models.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def design_args(p, route=True):
        p.add_argument("blif")
        p.add_argument("net")
        p.add_argument("place")
        if route:
            p.add_argument("route")

    p = sub.add_parser("genbits", parents=[common], help="generate a bitstream")
    design_args(p)
    p.add_argument("--out", required=True, help="bitstream file to write")
    p.add_argument("--figure", help="PNG of set bits per block")
    p.set_defaults(func=cmd_genbits)

    p = sub.add_parser("decode", parents=[common], help="dump the resources a bitstream enables")
    p.add_argument("bitstream")
    p.add_argument("--out", help="write the dump here instead of stdout")
    p.add_argument("--figure", help="PNG of set bits per block")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sim", parents=[common], help="clock vectors through a configured fabric")
    p.add_argument("bitstream")
    p.add_argument("vectors", help="lines of '<input bits> [-> <expected output bits>]'")
    p.add_argument("--vcd", help="waveform file")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("verify", parents=[common], help="equivalence-check fabric against netlist")
    design_args(p)
    p.add_argument("--bitstream", help="check this image instead of a freshly generated one")
    p.add_argument("--strategy", choices=("auto", "exhaustive", "random"), default="auto")
    p.add_argument("--vectors", type=int, default=1000, help="random vectors")
    p.add_argument("--cycles", type=int, default=64, help="random sequential cycles")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("busplay", parents=[common], help="load and read back over the config bus")
    p.add_argument("bitstream")
    p.add_argument("--faults", help="file of row,col,word,bit=value stuck-at faults")
    p.add_argument("--fault", action="append", help="one stuck-at fault (repeatable)")
    p.add_argument("--trace", help="write the bus transaction trace here")
    p.add_argument("--out", help="readback mismatch CSV")
    p.set_defaults(func=cmd_busplay)

    p = sub.add_parser("route-lab", parents=[common], help="minimum channel width experiment")
    p.add_argument("config", nargs="?", help="experiment file (key=value)")
    p.add_argument("--out", help="results CSV; the summary then goes to stdout")
    p.add_argument("--figure", help="PNG histogram of W_min per topology")
    p.set_defaults(func=cmd_route_lab)

    p = sub.add_parser("stats", parents=[common], help="block census and configuration bit counts")
    p.add_argument("--memory-map", help="write the full address map CSV here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("autoroute", parents=[common], help="route a placed design")
    design_args(p, route=False)
    p.add_argument("--out", required=True, help="route file to write")
    p.set_defaults(func=cmd_autoroute)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr,
                        force=True)
    try:
        return args.func(args, Reporter(args.human))
    except (FabricError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
