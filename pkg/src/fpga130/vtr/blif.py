"""BLIF reader/writer for technology-mapped netlists (6-LUTs and rising-edge latches)."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..arch import LUT_INPUTS, LUT_SIZE
from ..errors import NetlistError, ParseError

FULL_TABLE = (1 << LUT_SIZE) - 1


@dataclass(frozen=True)
class Lut:
    output: str
    inputs: tuple[str, ...]
    table: int  # 64-entry truth table; entry index bit i = value of inputs[i]

    def evaluate(self, values) -> int:
        idx = 0
        for i, v in enumerate(values):
            if v:
                idx |= 1 << i
        return (self.table >> idx) & 1


@dataclass(frozen=True)
class Latch:
    data: str
    output: str
    clock: str | None = None
    init: int = 0


@dataclass(frozen=True)
class LogicNetlist:
    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    luts: tuple[Lut, ...] = ()
    latches: tuple[Latch, ...] = ()
    nets: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.nets:
            object.__setattr__(self, "nets", _net_order(self.inputs, self.outputs, self.luts,
                                                        self.latches))

    @property
    def clocks(self) -> tuple[str, ...]:
        seen = []
        for latch in self.latches:
            if latch.clock and latch.clock not in seen:
                seen.append(latch.clock)
        return tuple(seen)

    @property
    def data_inputs(self) -> tuple[str, ...]:
        clocks = set(self.clocks)
        return tuple(n for n in self.inputs if n not in clocks)

    def lut(self, output: str) -> Lut:
        for lut in self.luts:
            if lut.output == output:
                return lut
        raise KeyError(output)

    def latch(self, output: str) -> Latch:
        for latch in self.latches:
            if latch.output == output:
                return latch
        raise KeyError(output)

    def drivers(self) -> dict[str, str]:
        """net -> 'input' | 'lut' | 'latch'."""
        out = {}
        for n in self.inputs:
            out[n] = "input"
        for lut in self.luts:
            out[lut.output] = "lut"
        for latch in self.latches:
            out[latch.output] = "latch"
        return out


def expand_cover(cubes, arity: int) -> int:
    """Expand on-set cubes over ``arity`` inputs into a 64-entry table.

    Inputs at positions >= arity are don't-cares, so the table is replicated
    across them.
    """
    table = 0
    for idx in range(LUT_SIZE):
        for cube in cubes:
            if all(lit == "-" or int(lit) == (idx >> i) & 1 for i, lit in enumerate(cube)):
                table |= 1 << idx
                break
    return table


def table_minterms(table: int, arity: int) -> list[str]:
    rows = []
    for idx in range(1 << arity):
        if (table >> idx) & 1:
            rows.append("".join(str((idx >> i) & 1) for i in range(arity)))
    return rows


def _logical_lines(text: str):
    """Yield (lineno, tokens-with-columns) with comments stripped and continuations joined."""
    pending: list[tuple[str, int]] = []
    start = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        cont = line.endswith("\\")
        if cont:
            line = line[:-1]
        col = 0
        for tok in line.split():
            col = line.index(tok, col)
            pending.append((tok, col + 1))
            col += len(tok)
        if start is None and pending:
            start = lineno
        if cont:
            continue
        if pending:
            yield start, pending
        pending, start = [], None
    if pending:
        yield start, pending


def parse_blif(text: str, source: str | None = None) -> LogicNetlist:
    name = None
    inputs: list[str] = []
    outputs: list[str] = []
    luts: list[Lut] = []
    latches: list[Latch] = []
    cover_target = None  # (output, input names, cubes, lineno)
    ended = False

    def err(msg, lineno, col=None):
        return ParseError(msg, lineno, col, source)

    def close_cover():
        nonlocal cover_target
        if cover_target is not None:
            out, ins, cubes, _ = cover_target
            luts.append(Lut(out, tuple(ins), expand_cover(cubes, len(ins))))
            cover_target = None

    for lineno, toks in _logical_lines(text):
        head, hcol = toks[0]
        words = [t for t, _ in toks]
        if ended:
            raise err(f"content after .end: {head!r}", lineno, hcol)
        if not head.startswith("."):
            if cover_target is None:
                raise err(f"unexpected token {head!r} outside a .names cover", lineno, hcol)
            out, ins, cubes, _ = cover_target
            k = len(ins)
            if k == 0:
                if len(words) != 1 or words[0] not in "01":
                    raise err("constant cover row must be a single 0 or 1", lineno, hcol)
                if words[0] == "0":
                    raise err("off-set covers are not supported", lineno, hcol)
                cubes.append("")
                continue
            if len(words) != 2:
                raise err(f"cover row needs {k} literals and an output value", lineno, hcol)
            cube, val = words
            if len(cube) != k:
                raise err(f"cover row has {len(cube)} literals, expected {k}", lineno, hcol)
            bad = next((i for i, ch in enumerate(cube) if ch not in "01-"), None)
            if bad is not None:
                raise err(f"invalid literal {cube[bad]!r}", lineno, toks[0][1] + bad)
            if val != "1":
                raise err("off-set covers are not supported (output column must be 1)",
                          lineno, toks[1][1])
            cubes.append(cube)
            continue

        close_cover()
        if head == ".model":
            if name is not None:
                raise err("only a single .model is supported", lineno, hcol)
            if len(words) != 2:
                raise err(".model takes exactly one name", lineno, hcol)
            name = words[1]
            continue
        if name is None:
            raise err(f"{head} before .model", lineno, hcol)
        if head == ".inputs":
            inputs.extend(words[1:])
        elif head == ".outputs":
            outputs.extend(words[1:])
        elif head == ".names":
            if len(words) < 2:
                raise err(".names needs at least an output net", lineno, hcol)
            ins = words[1:-1]
            if len(ins) > LUT_INPUTS:
                raise err(f".names with {len(ins)} inputs exceeds the {LUT_INPUTS}-input LUT",
                          lineno, hcol)
            cover_target = (words[-1], ins, [], lineno)
        elif head == ".latch":
            args = words[1:]
            if len(args) not in (2, 3, 4, 5):
                raise err(".latch expects: input output [type control] [init]", lineno, hcol)
            data, out = args[0], args[1]
            clock = None
            init = 0
            rest = args[2:]
            if len(rest) >= 2:
                ltype, clock = rest[0], rest[1]
                if ltype != "re":
                    raise err(f"latch type {ltype!r} unsupported (only 're')", lineno, toks[3][1])
                rest = rest[2:]
            if rest:
                if rest[0] not in ("0", "1", "2", "3"):
                    raise err(f"bad latch init value {rest[0]!r}", lineno, toks[-1][1])
                init = 1 if rest[0] == "1" else 0
            latches.append(Latch(data, out, clock, init))
        elif head == ".end":
            ended = True
        else:
            raise err(f"unknown directive {head}", lineno, hcol)

    close_cover()
    if name is None:
        raise ParseError("no .model found", source=source)
    netlist = _build(name, inputs, outputs, luts, latches)
    validate_netlist(netlist)
    return netlist


def _net_order(inputs, outputs, luts, latches) -> tuple[str, ...]:
    """Every net name once, in first-mention order."""
    names = [*inputs, *outputs]
    for lut in luts:
        names += [*lut.inputs, lut.output]
    for latch in latches:
        names += [n for n in (latch.data, latch.output, latch.clock) if n]
    return tuple(dict.fromkeys(names))


def _build(name, inputs, outputs, luts, latches) -> LogicNetlist:
    return LogicNetlist(name, tuple(inputs), tuple(outputs), tuple(luts), tuple(latches))


def validate_netlist(netlist: LogicNetlist) -> None:
    drivers: dict[str, str] = {}

    def drive(net, what):
        if net in drivers:
            raise NetlistError(f"net {net!r} has multiple drivers ({drivers[net]} and {what})")
        drivers[net] = what

    for n in netlist.inputs:
        drive(n, "primary input")
    for lut in netlist.luts:
        if len(lut.inputs) > LUT_INPUTS:
            raise NetlistError(f"LUT {lut.output!r} has {len(lut.inputs)} inputs")
        drive(lut.output, f"LUT {lut.output}")
    for latch in netlist.latches:
        drive(latch.output, f"latch {latch.output}")

    for lut in netlist.luts:
        for n in lut.inputs:
            if n not in drivers:
                raise NetlistError(f"LUT {lut.output!r} reads undriven net {n!r}")
    for latch in netlist.latches:
        if latch.data not in drivers:
            raise NetlistError(f"latch {latch.output!r} reads undriven net {latch.data!r}")
        if latch.clock and latch.clock not in drivers:
            raise NetlistError(f"latch {latch.output!r} clocked by undriven net {latch.clock!r}")
    for n in netlist.outputs:
        if n not in drivers:
            raise NetlistError(f"primary output {n!r} is undriven")


def write_blif(netlist: LogicNetlist) -> str:
    lines = [f".model {netlist.name}"]
    if netlist.inputs:
        lines.append(".inputs " + " ".join(netlist.inputs))
    if netlist.outputs:
        lines.append(".outputs " + " ".join(netlist.outputs))
    for latch in netlist.latches:
        parts = [".latch", latch.data, latch.output]
        if latch.clock:
            parts += ["re", latch.clock]
        parts.append(str(latch.init))
        lines.append(" ".join(parts))
    for lut in netlist.luts:
        lines.append(" ".join([".names", *lut.inputs, lut.output]))
        k = len(lut.inputs)
        for row in table_minterms(lut.table, k):
            lines.append(f"{row} 1" if k else "1")
    lines.append(".end")
    return "\n".join(lines) + "\n"
