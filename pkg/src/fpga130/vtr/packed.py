"""Line-oriented packed-netlist format: one CLB holds one LUT and at most one latch.

::

    block clb_0 at_clb
      lut d0 pins q0:0,q1:1
      latch q0

    block out:q0 at_io
      outpad q0

A latch-only block binds its data net on the latch line (``latch q pins d:0``)
and the generator fills the LUT with a buffer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..arch import LUT_INPUTS
from ..errors import NetlistError, ParseError
from .blif import LogicNetlist


@dataclass(frozen=True)
class PackedBlock:
    name: str
    kind: str  # "clb" | "inpad" | "outpad"
    lut: str | None = None
    latch: str | None = None
    pins: tuple[tuple[str, int], ...] = ()  # (logical net, physical pin), in binding order
    pad_net: str | None = None

    @property
    def pin_map(self) -> dict[str, int]:
        return dict(self.pins)

    def output_net(self) -> str | None:
        if self.kind == "clb":
            return self.latch or self.lut
        if self.kind == "inpad":
            return self.pad_net
        return None


@dataclass(frozen=True)
class PackedNetlist:
    blocks: tuple[PackedBlock, ...] = field(default_factory=tuple)

    def __iter__(self):
        return iter(self.blocks)

    def __len__(self):
        return len(self.blocks)

    def block(self, name: str) -> PackedBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    @property
    def clbs(self) -> list[PackedBlock]:
        return [b for b in self.blocks if b.kind == "clb"]


def _parse_pins(spec: str, lineno: int, col: int, source):
    pins = []
    for item in spec.split(","):
        if ":" not in item:
            raise ParseError(f"pin binding {item!r} must be <net>:<pin>", lineno, col, source)
        net, pin = item.rsplit(":", 1)
        try:
            p = int(pin)
        except ValueError:
            raise ParseError(f"pin index {pin!r} is not an integer", lineno, col, source) from None
        if not 0 <= p < LUT_INPUTS:
            raise NetlistError(f"line {lineno}: pin index {p} outside 0-{LUT_INPUTS - 1}")
        pins.append((net, p))
    return pins


def _check_injective(name, pins):
    used_pins, used_nets = set(), set()
    for net, p in pins:
        if p in used_pins:
            raise NetlistError(f"block {name!r}: pin bindings are not injective (pin {p} reused)")
        if net in used_nets:
            raise NetlistError(f"block {name!r}: net {net!r} bound twice")
        used_pins.add(p)
        used_nets.add(net)


def parse_net(text: str, source: str | None = None) -> PackedNetlist:
    blocks = []
    cur = None

    def finish():
        if cur is None:
            return
        kind = cur["kind"]
        if kind == "clb" and cur["lut"] is None and cur["latch"] is None:
            raise NetlistError(f"block {cur['name']!r} is empty")
        if kind != "clb" and cur["pad"] is None:
            raise NetlistError(f"I/O block {cur['name']!r} declares no pad")
        _check_injective(cur["name"], cur["pins"])
        blocks.append(PackedBlock(cur["name"], kind if kind == "clb" else cur["pad"][0],
                                  cur["lut"], cur["latch"], tuple(cur["pins"]),
                                  cur["pad"][1] if cur["pad"] else None))

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        words = line.split()
        col = len(line) - len(line.lstrip()) + 1
        head = words[0]
        if head == "block":
            finish()
            if len(words) != 3 or words[2] not in ("at_clb", "at_io"):
                raise ParseError("expected 'block <name> at_clb|at_io'", lineno, col, source)
            cur = {"name": words[1], "kind": "clb" if words[2] == "at_clb" else "io",
                   "lut": None, "latch": None, "pins": [], "pad": None}
            continue
        if cur is None:
            raise ParseError(f"{head!r} outside a block", lineno, col, source)
        if head in ("lut", "latch"):
            if cur["kind"] != "clb":
                raise ParseError(f"{head} inside an I/O block", lineno, col, source)
            if len(words) not in (2, 4) or (len(words) == 4 and words[2] != "pins"):
                raise ParseError(f"expected '{head} <atom> [pins <net>:<pin>,...]'", lineno, col, source)
            if cur[head] is not None:
                raise NetlistError(f"block {cur['name']!r} contains two {head}s")
            cur[head] = words[1]
            if len(words) == 4:
                if head == "latch" and cur["lut"] is not None:
                    raise NetlistError(f"block {cur['name']!r}: latch pins given alongside a LUT")
                cur["pins"].extend(_parse_pins(words[3], lineno, col, source))
        elif head in ("inpad", "outpad"):
            if cur["kind"] != "io":
                raise ParseError(f"{head} inside a CLB block", lineno, col, source)
            if len(words) != 2:
                raise ParseError(f"expected '{head} <net>'", lineno, col, source)
            if cur["pad"] is not None:
                raise NetlistError(f"I/O block {cur['name']!r} has two pads")
            cur["pad"] = (head, words[1])
        else:
            raise ParseError(f"unknown keyword {head!r}", lineno, col, source)
    finish()

    names = set()
    for b in blocks:
        if b.name in names:
            raise NetlistError(f"duplicate block name {b.name!r}")
        names.add(b.name)
    return PackedNetlist(tuple(blocks))


def write_net(packed: PackedNetlist) -> str:
    chunks = []
    for b in packed.blocks:
        pins = ",".join(f"{n}:{p}" for n, p in b.pins)
        if b.kind == "clb":
            lines = [f"block {b.name} at_clb"]
            if b.lut is not None:
                lines.append(f"  lut {b.lut}" + (f" pins {pins}" if pins else ""))
                if b.latch is not None:
                    lines.append(f"  latch {b.latch}")
            else:
                lines.append(f"  latch {b.latch}" + (f" pins {pins}" if pins else ""))
        else:
            lines = [f"block {b.name} at_io", f"  {b.kind} {b.pad_net}"]
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n"


def validate_packing(netlist: LogicNetlist, packed: PackedNetlist) -> None:
    """Cross-check a packing against its netlist; raises NetlistError."""
    luts = {lut.output: lut for lut in netlist.luts}
    latches = {latch.output: latch for latch in netlist.latches}
    placed_luts, placed_latches = set(), set()
    clocks = set(netlist.clocks)
    # readers per net; a LUT packed with its latch may have only that one
    consumers: dict[str, int] = {}
    for lut in netlist.luts:
        for n in lut.inputs:
            consumers[n] = consumers.get(n, 0) + 1
    for latch in netlist.latches:
        consumers[latch.data] = consumers.get(latch.data, 0) + 1
    for n in netlist.outputs:
        consumers[n] = consumers.get(n, 0) + 1

    for b in packed.blocks:
        if b.kind == "clb":
            if b.lut is not None:
                if b.lut not in luts:
                    raise NetlistError(f"block {b.name!r} references unknown LUT {b.lut!r}")
                if b.lut in placed_luts:
                    raise NetlistError(f"LUT {b.lut!r} packed twice")
                placed_luts.add(b.lut)
                lut = luts[b.lut]
                if len(set(lut.inputs)) != len(lut.inputs):
                    raise NetlistError(f"LUT {b.lut!r} repeats an input net")
                if set(b.pin_map) != set(lut.inputs):
                    raise NetlistError(f"block {b.name!r}: pin bindings {sorted(b.pin_map)} "
                                       f"do not match LUT inputs {sorted(lut.inputs)}")
            if b.latch is not None:
                if b.latch not in latches:
                    raise NetlistError(f"block {b.name!r} references unknown latch {b.latch!r}")
                if b.latch in placed_latches:
                    raise NetlistError(f"latch {b.latch!r} packed twice")
                placed_latches.add(b.latch)
                latch = latches[b.latch]
                if b.lut is not None:
                    if latch.data != b.lut:
                        raise NetlistError(f"block {b.name!r}: latch {b.latch!r} is not fed by "
                                           f"LUT {b.lut!r}")
                    if consumers.get(b.lut, 0) > 1:
                        raise NetlistError(f"block {b.name!r}: LUT output {b.lut!r} is needed "
                                           "outside its block but the CLB exposes the latch")
                elif set(b.pin_map) != {latch.data}:
                    raise NetlistError(f"block {b.name!r}: latch-only block must bind exactly "
                                       f"its data net {latch.data!r}")
        elif b.kind == "inpad":
            if b.pad_net not in netlist.inputs or b.pad_net in clocks:
                raise NetlistError(f"inpad {b.name!r} net {b.pad_net!r} is not a data input")
        elif b.kind == "outpad":
            if b.pad_net not in netlist.outputs:
                raise NetlistError(f"outpad {b.name!r} net {b.pad_net!r} is not a primary output")
        else:
            raise NetlistError(f"block {b.name!r} has unknown kind {b.kind!r}")

    missing = set(luts) - placed_luts
    if missing:
        raise NetlistError(f"LUTs not packed: {', '.join(sorted(missing))}")
    missing = set(latches) - placed_latches
    if missing:
        raise NetlistError(f"latches not packed: {', '.join(sorted(missing))}")
    pads_in = {b.pad_net for b in packed.blocks if b.kind == "inpad"}
    pads_out = [b.pad_net for b in packed.blocks if b.kind == "outpad"]
    for n in netlist.data_inputs:
        if n not in pads_in:
            raise NetlistError(f"primary input {n!r} has no inpad block")
    if len(pads_out) != len(set(pads_out)) or set(pads_out) != set(netlist.outputs):
        raise NetlistError("each primary output needs exactly one outpad block")
