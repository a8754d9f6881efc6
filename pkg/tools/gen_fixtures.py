"""Regenerate the committed test fixtures.

Writes blif/net/place files for each design and routes them with the
built-in router at W=8 (Wilton).  Output is deterministic; rerunning must
leave the fixtures byte-identical.

    python3 tools/gen_fixtures.py [--out tests/fixtures]
"""

import argparse
from pathlib import Path

from fpga130.arch import FabricArch
from fpga130.routerlab import route_design
from fpga130.vtr import parse_blif, parse_net, parse_place, write_route

LEFT = [(r, 0) for r in (2, 6, 10, 14)]
TOP = [(0, c) for c in (2, 6, 10, 14)]
RIGHT = [(r, 18) for r in (2, 6, 10, 14)]
BOTTOM = [(18, c) for c in (2, 6, 10, 14)]

# truth functions over (a, lo, hi) neighbours, picked per cell for variety
FUNCS = [
    ("xor3", lambda a, l, h: a ^ l ^ h),
    ("maj", lambda a, l, h: (a & l) | (a & h) | (l & h)),
    ("a^(l&h)", lambda a, l, h: a ^ (l & h)),
    ("a|(l^h)", lambda a, l, h: a | (l ^ h)),
]


def cover(names, fn):
    """Minterm cover of ``fn`` over len(names) inputs (first name = bit 0)."""
    rows = []
    n = len(names)
    for v in range(1 << n):
        bits = [(v >> i) & 1 for i in range(n)]
        if fn(*bits):
            rows.append("".join(map(str, bits)) + " 1")
    return rows


def place_text(design, sites):
    lines = [f"Netlist_File: {design}.net Netlist_ID: SHA256:generated",
             "Array size: 19 x 19 logic blocks", "",
             "#block name\tx\ty\tsubblk\tblock number",
             "#----------\t--\t--\t------\t------------"]
    for i, (name, (r, c)) in enumerate(sites):
        lines.append(f"{name}\t{c}\t{r}\t0\t#{i}")
    return "\n".join(lines) + "\n"


def net_text(blocks):
    chunks = []
    for b in blocks:
        chunks.append("\n".join(b))
    return "\n\n".join(chunks) + "\n"


def pins_spec(inputs):
    # alternate between the top (0-2) and left (3-5) pin groups
    order = [0, 3, 1, 4, 2, 5]
    return ",".join(f"{n}:{order[i]}" for i, n in enumerate(inputs))


def sensor64():
    """8x8 pipeline of 3-input cells; odd stages registered; all 64 CLBs busy."""
    ins = [f"x{i}" for i in range(8)]
    outs = [f"n7_{b}" for b in range(8)]
    blif = ["# 64-CLB mixing pipeline: 8 stages x 8 bits, odd stages registered",
            ".model sensor64", ".inputs clk " + " ".join(ins), ".outputs " + " ".join(outs), ""]
    blocks, sites = [], []
    prev = None
    for s in range(8):
        cur = []
        for b in range(8):
            if s == 0:
                a, lo, hi = ins[b // 2], ins[(b // 2 + 1) % 4], ins[4 + b // 2]
                srcs = [a, lo, hi] if b % 2 else [a, hi]
            else:
                srcs = [prev[b]]
                if b > 0:
                    srcs.append(prev[b - 1])
                if b < 7:
                    srcs.append(prev[b + 1])
            name, fn = FUNCS[(s + b) % 4]
            if len(srcs) == 2:
                name, body = "xor2", cover(srcs, lambda x, y: x ^ y)
            else:
                body = cover(srcs, fn)
            registered = s % 2 == 1
            lut_out = f"d{s}_{b}" if registered else f"n{s}_{b}"
            q = f"n{s}_{b}"
            blif.append(f"# stage {s} bit {b}: {name}")
            blif.append(".names " + " ".join(srcs) + " " + lut_out)
            blif.extend(body)
            if registered:
                blif.append(f".latch {lut_out} {q} re clk 0")
            blif.append("")
            block = [f"block clb_{s}_{b} at_clb", f"  lut {lut_out} pins {pins_spec(srcs)}"]
            if registered:
                block.append(f"  latch {q}")
            blocks.append(block)
            sites.append((f"clb_{s}_{b}", (2 + 2 * b, 2 + 2 * s)))
            cur.append(q)
        prev = cur
    blif.append(".end")
    pads_in = LEFT + TOP
    for i, net in enumerate(ins):
        blocks.append([f"block in:{net} at_io", f"  inpad {net}"])
        sites.append((f"in:{net}", pads_in[i]))
    pads_out = [RIGHT[0], BOTTOM[0], RIGHT[1], BOTTOM[1], RIGHT[2], BOTTOM[2], RIGHT[3], BOTTOM[3]]
    for b, net in enumerate(prev):
        blocks.append([f"block out:{net} at_io", f"  outpad {net}"])
        sites.append((f"out:{net}", pads_out[b]))
    return "\n".join(blif) + "\n", net_text(blocks), sites


def and2(registered=False):
    name = "and2_reg" if registered else "and2"
    lut_out = "d" if registered else "y"
    blif = [f"# two-input AND{' into a flip-flop' if registered else ''}", f".model {name}",
            ".inputs clk a b" if registered else ".inputs a b", ".outputs y", "",
            f".names a b {lut_out}", "11 1"]
    if registered:
        blif.append(".latch d y re clk 0")
    blif.append(".end")
    block = ["block clb_y at_clb", f"  lut {lut_out} pins a:0,b:3"]
    if registered:
        block.append("  latch y")
    blocks = [block, ["block in:a at_io", "  inpad a"], ["block in:b at_io", "  inpad b"],
              ["block out:y at_io", "  outpad y"]]
    sites = [("clb_y", (2, 2)), ("in:a", (0, 2)), ("in:b", (2, 0)), ("out:y", (2, 18))]
    return name, "\n".join(blif) + "\n", net_text(blocks), sites


def buffer():
    blif = "# pad-to-pad buffer through one LUT\n.model buffer\n.inputs a\n.outputs y\n\n.names a y\n1 1\n.end\n"
    blocks = [["block clb_y at_clb", "  lut y pins a:0"], ["block in:a at_io", "  inpad a"],
              ["block out:y at_io", "  outpad y"]]
    sites = [("clb_y", (6, 6)), ("in:a", (6, 0)), ("out:y", (0, 6))]
    return "buffer", blif, net_text(blocks), sites


def emit(out: Path, design, blif, net, sites):
    d = out / design
    d.mkdir(parents=True, exist_ok=True)
    place = place_text(design, sites)
    netlist = parse_blif(blif, f"{design}.blif")
    packed = parse_net(net, f"{design}.net")
    placement = parse_place(place, f"{design}.place")
    forest = route_design(FabricArch(), netlist, packed, placement, seed=0)
    (d / f"{design}.blif").write_text(blif)
    (d / f"{design}.net").write_text(net)
    (d / f"{design}.place").write_text(place)
    (d / f"{design}.route").write_text(write_route(forest))
    print(f"{design}: {len(packed.clbs)} CLBs, {len(forest)} routed nets")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="tests/fixtures")
    args = ap.parse_args()
    out = Path(args.out)
    blif, net, sites = sensor64()
    emit(out, "sensor64", blif, net, sites)
    for name, blif, net, sites in (buffer(), and2(False), and2(True)):
        emit(out, name, blif, net, sites)


if __name__ == "__main__":
    main()
