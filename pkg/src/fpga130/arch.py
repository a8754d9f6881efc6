"""Fabric geometry, switch/connection block patterns and the configuration-memory map.

The die is a 19x19 matrix of blocks, each holding nine 8-bit configuration
words.  Rows grow downwards (row 0 is the top edge), columns grow to the
right.  Inside the border ring the blocks follow a parity layout::

    (odd, odd)    switch block
    (even, even)  CLB
    (odd, even)   horizontal connection block (one CHANX segment)
    (even, odd)   vertical connection block (one CHANY segment)

Routing files and placements use ``x = column`` and ``y = row``.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
from dataclasses import dataclass
from typing import NamedTuple

from .errors import ArchError

GRID = 19
WORDS_PER_BLOCK = 9
BITS_PER_WORD = 8
BLOCK_BITS = WORDS_PER_BLOCK * BITS_PER_WORD
TOTAL_BITS = GRID * GRID * BLOCK_BITS
PAYLOAD_BYTES = GRID * GRID * WORDS_PER_BLOCK

LUT_INPUTS = 6
LUT_SIZE = 1 << LUT_INPUTS
CLB_OUTPUT_PIN = 6
IO_PIN = 0

MAX_CHANNEL_WIDTH = 12


class BlockKind(enum.Enum):
    CLB = "clb"
    SWITCH = "sb"
    HCONN = "hcb"
    VCONN = "vcb"
    IO = "io"
    UNUSED = "unused"


class Side(enum.Enum):
    N = "N"
    E = "E"
    S = "S"
    W = "W"


class Topology(enum.Enum):
    DISJOINT = "disjoint"
    UNIVERSAL = "universal"
    WILTON = "wilton"

    @property
    def code(self) -> int:
        return _TOPOLOGY_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Topology":
        for topo, c in _TOPOLOGY_CODES.items():
            if c == code:
                return topo
        raise ValueError(f"unknown topology code {code}")

    @classmethod
    def parse(cls, text: str) -> "Topology":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ArchError(f"unknown switch-block topology {text!r}") from None


_TOPOLOGY_CODES = {Topology.DISJOINT: 0, Topology.UNIVERSAL: 1, Topology.WILTON: 2}

# GPIO sites, indexed 0..15: four per side, each next to the end of a channel.
GPIO_SITES: tuple[tuple[int, int], ...] = (
    tuple((0, c) for c in (2, 6, 10, 14))
    + tuple((r, 18) for r in (2, 6, 10, 14))
    + tuple((18, c) for c in (2, 6, 10, 14))
    + tuple((r, 0) for r in (2, 6, 10, 14))
)
_GPIO_INDEX = {site: i for i, site in enumerate(GPIO_SITES)}


class ConfigAddress(NamedTuple):
    row: int
    col: int
    word: int
    bit: int

    @property
    def byte_index(self) -> int:
        return (self.row * GRID + self.col) * WORDS_PER_BLOCK + self.word

    @property
    def flat(self) -> int:
        return self.byte_index * BITS_PER_WORD + self.bit

    @classmethod
    def from_flat(cls, flat: int) -> "ConfigAddress":
        byte, bit = divmod(flat, BITS_PER_WORD)
        block, word = divmod(byte, WORDS_PER_BLOCK)
        row, col = divmod(block, GRID)
        return cls(row, col, word, bit)

    def check(self) -> None:
        if not (0 <= self.row < GRID and 0 <= self.col < GRID
                and 0 <= self.word < WORDS_PER_BLOCK and 0 <= self.bit < BITS_PER_WORD):
            raise ArchError(f"configuration address out of range: {tuple(self)}")


class Resource(NamedTuple):
    """One configurable bit, e.g. ``clb.2.2.lut.17`` or ``sb.1.1.WN.3``."""

    block: str
    row: int
    col: int
    field: str
    index: int

    def __str__(self) -> str:
        return f"{self.block}.{self.row}.{self.col}.{self.field}.{self.index}"

    @classmethod
    def parse(cls, text: str) -> "Resource":
        block, row, col, field, index = text.split(".")
        return cls(block, int(row), int(col), field, int(index))


def block_kind_at(row: int, col: int) -> BlockKind:
    if not (0 <= row < GRID and 0 <= col < GRID):
        raise ArchError(f"block coordinate ({row},{col}) outside the {GRID}x{GRID} grid")
    if row in (0, GRID - 1) or col in (0, GRID - 1):
        return BlockKind.IO if (row, col) in _GPIO_INDEX else BlockKind.UNUSED
    r_odd, c_odd = row % 2, col % 2
    if r_odd and c_odd:
        return BlockKind.SWITCH
    if not r_odd and not c_odd:
        return BlockKind.CLB
    return BlockKind.HCONN if r_odd else BlockKind.VCONN


def gpio_index(row: int, col: int) -> int:
    try:
        return _GPIO_INDEX[(row, col)]
    except KeyError:
        raise ArchError(f"({row},{col}) is not a GPIO site") from None


def all_blocks():
    for row in range(GRID):
        for col in range(GRID):
            yield row, col, block_kind_at(row, col)


def census() -> dict[BlockKind, int]:
    counts = {kind: 0 for kind in BlockKind}
    for _, _, kind in all_blocks():
        counts[kind] += 1
    return counts


# --- channel geometry -------------------------------------------------------
#
# A segment is ("CHANX", x, y) or ("CHANY", x, y); it lives inside the
# connection block at (row=y, col=x) and spans exactly one tile.

def segment_at_block(row: int, col: int) -> tuple[str, int, int]:
    kind = block_kind_at(row, col)
    if kind is BlockKind.HCONN:
        return ("CHANX", col, row)
    if kind is BlockKind.VCONN:
        return ("CHANY", col, row)
    raise ArchError(f"block ({row},{col}) is {kind.value}, not a connection block")


def is_segment(kind: str, x: int, y: int) -> bool:
    if not (0 <= x < GRID and 0 <= y < GRID):
        return False
    bk = block_kind_at(y, x)
    return (kind == "CHANX" and bk is BlockKind.HCONN) or (kind == "CHANY" and bk is BlockKind.VCONN)


def sb_side_segment(row: int, col: int, side: Side):
    """Segment attached to ``side`` of the switch block at (row, col), or None."""
    dr, dc = {Side.N: (-1, 0), Side.S: (1, 0), Side.W: (0, -1), Side.E: (0, 1)}[side]
    r, c = row + dr, col + dc
    if not (0 <= r < GRID and 0 <= c < GRID):
        return None
    kind = "CHANY" if side in (Side.N, Side.S) else "CHANX"
    return (kind, c, r) if is_segment(kind, c, r) else None


def segment_switch_blocks(kind: str, x: int, y: int) -> list[tuple[int, int, Side]]:
    """Switch blocks at both ends of a segment, with the side the segment occupies there."""
    if kind == "CHANX":
        ends = [(y, x - 1, Side.E), (y, x + 1, Side.W)]
    else:
        ends = [(y - 1, x, Side.S), (y + 1, x, Side.N)]
    return [(r, c, s) for r, c, s in ends
            if 0 <= r < GRID and 0 <= c < GRID and block_kind_at(r, c) is BlockKind.SWITCH]


def clb_input_segment(row: int, col: int, pin: int) -> tuple[str, int, int]:
    # pins 0-2 sit on the HCB above, pins 3-5 on the VCB to the left
    if not 0 <= pin < LUT_INPUTS:
        raise ArchError(f"CLB input pin {pin} out of range")
    return ("CHANX", col, row - 1) if pin < 3 else ("CHANY", col - 1, row)


def clb_output_segments(row: int, col: int) -> tuple[tuple[str, int, int], ...]:
    return (("CHANX", col, row - 1), ("CHANY", col - 1, row))


def io_segment(row: int, col: int) -> tuple[str, int, int]:
    gpio_index(row, col)
    if row == 0:
        return ("CHANX", col, 1)
    if row == GRID - 1:
        return ("CHANX", col, GRID - 2)
    if col == 0:
        return ("CHANY", 1, row)
    return ("CHANY", GRID - 2, row)


def cb_served_clb(row: int, col: int):
    """CLB whose inputs/output a connection block serves, or None on the far edges."""
    kind = block_kind_at(row, col)
    if kind is BlockKind.HCONN:
        r, c = row + 1, col
    elif kind is BlockKind.VCONN:
        r, c = row, col + 1
    else:
        raise ArchError(f"block ({row},{col}) is not a connection block")
    return (r, c) if block_kind_at(r, c) is BlockKind.CLB else None


# --- switch blocks ----------------------------------------------------------

# Pair groups in configuration-bit order; each group is indexed by the track
# number on its first side.
SB_GROUPS: tuple[tuple[str, Side, Side], ...] = (
    ("WE", Side.W, Side.E),
    ("NS", Side.N, Side.S),
    ("WN", Side.W, Side.N),
    ("NE", Side.N, Side.E),
    ("ES", Side.E, Side.S),
    ("SW", Side.S, Side.W),
)
_GROUP_BY_SIDES = {frozenset((a, b)): (name, a, b) for name, a, b in SB_GROUPS}


def group_map(topology: Topology, group: str, track: int, width: int) -> int:
    """Track on the group's second side reached from ``track`` on its first side."""
    if group in ("WE", "NS") or topology is Topology.DISJOINT:
        return track
    if topology is Topology.UNIVERSAL:
        return width - 1 - track
    if group == "WN":
        return (width - track) % width
    if group == "NE":
        return (track + 1) % width
    if group == "ES":
        return (2 * width - 2 - track) % width
    if group == "SW":
        return (track + 1) % width
    raise ValueError(group)


def group_inverse(topology: Topology, group: str, track: int, width: int) -> int:
    # every group map is a bijection on 0..W-1; invert by search (W <= 16)
    for t in range(width):
        if group_map(topology, group, t, width) == track:
            return t
    raise AssertionError("group map is not a bijection")


def sb_connections(topology: Topology, side: Side, track: int, width: int) -> set[tuple[Side, int]]:
    if width < 1:
        raise ArchError("channel width must be at least 1")
    if not 0 <= track < width:
        raise ArchError(f"track {track} out of range for W={width}")
    out = set()
    for name, a, b in SB_GROUPS:
        if side is a:
            out.add((b, group_map(topology, name, track, width)))
        elif side is b:
            out.add((a, group_inverse(topology, name, track, width)))
    return out


def switch_bit(side_a: Side, track_a: int, side_b: Side, track_b: int,
               topology: Topology, width: int):
    """(group, index) of the switch joining two SB terminals, or None if the topology lacks it."""
    entry = _GROUP_BY_SIDES.get(frozenset((side_a, side_b)))
    if entry is None or side_a is side_b:
        return None
    name, first, _ = entry
    if side_a is first:
        t_first, t_second = track_a, track_b
    else:
        t_first, t_second = track_b, track_a
    if group_map(topology, name, t_first, width) != t_second:
        return None
    return name, t_first


def group_endpoints(topology: Topology, group: str, index: int, width: int):
    _, a, b = next(g for g in SB_GROUPS if g[0] == group)
    return (a, index), (b, group_map(topology, group, index, width))


# --- per-block bit layout ---------------------------------------------------

def _clb_layout(width):
    fields = [("lut", i) for i in range(LUT_SIZE)]
    fields.append(("sync", 0))
    fields.extend(("en", p) for p in range(LUT_INPUTS))
    return fields


def _sb_layout(width):
    return [(name, t) for name, _, _ in SB_GROUPS for t in range(width)]


def _cb_layout(width, first_pin):
    fields = [(f"tap{first_pin + p}", t) for p in range(3) for t in range(width)]
    fields.extend(("drive", t) for t in range(width))
    return fields


def _io_layout(width):
    return [("dir", 0)] + [("couple", t) for t in range(width)]


def block_layout(row: int, col: int, width: int) -> list[tuple[str, int]]:
    """Configurable fields of one block in bit order (bit i = word i//8, bit i%8)."""
    kind = block_kind_at(row, col)
    if kind is BlockKind.CLB:
        layout = _clb_layout(width)
    elif kind is BlockKind.SWITCH:
        layout = _sb_layout(width)
    elif kind in (BlockKind.HCONN, BlockKind.VCONN):
        if cb_served_clb(row, col) is None:
            return []
        layout = _cb_layout(width, 0 if kind is BlockKind.HCONN else 3)
    elif kind is BlockKind.IO:
        layout = _io_layout(width)
    else:
        return []
    if len(layout) > BLOCK_BITS:
        raise ArchError(f"{kind.value} block at ({row},{col}) needs {len(layout)} bits "
                        f"with W={width}; only {BLOCK_BITS} available")
    return layout


class MemoryMap:
    """Injective resource -> address map plus the list of spare addresses."""

    def __init__(self, width: int):
        self.width = width
        self.address: dict[Resource, ConfigAddress] = {}
        self.resource_at: list = [None] * TOTAL_BITS
        for row, col, kind in all_blocks():
            for i, (fld, idx) in enumerate(block_layout(row, col, width)):
                res = Resource(kind.value, row, col, fld, idx)
                addr = ConfigAddress(row, col, i // BITS_PER_WORD, i % BITS_PER_WORD)
                if res in self.address or self.resource_at[addr.flat] is not None:
                    raise ArchError(f"overlapping assignment for {res}")
                self.address[res] = addr
                self.resource_at[addr.flat] = res
        self.spare = [ConfigAddress.from_flat(f) for f, r in enumerate(self.resource_at) if r is None]

    def __len__(self):
        return len(self.address)

    def __getitem__(self, res: Resource) -> ConfigAddress:
        return self.address[res]

    def lookup(self, block, row, col, fld, idx) -> ConfigAddress:
        return self.address[Resource(block, row, col, fld, idx)]

    def assigned_mask(self) -> bytes:
        """Payload-shaped mask with 1s at every assigned bit."""
        buf = bytearray(PAYLOAD_BYTES)
        for addr in self.address.values():
            buf[addr.byte_index] |= 1 << addr.bit
        return bytes(buf)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["resource", "row", "col", "word", "bit"])
        for addr_flat, res in enumerate(self.resource_at):
            addr = ConfigAddress.from_flat(addr_flat)
            writer.writerow([str(res) if res is not None else "spare", *addr])
        return out.getvalue()


@functools.lru_cache(maxsize=None)
def _memory_map(width: int) -> MemoryMap:
    return MemoryMap(width)


@dataclass(frozen=True)
class FabricArch:
    channel_width: int = 8
    topology: Topology = Topology.WILTON

    rows = GRID
    cols = GRID
    clb_grid = 8
    gpio_count = len(GPIO_SITES)
    words_per_block = WORDS_PER_BLOCK
    bits_per_word = BITS_PER_WORD

    def __post_init__(self):
        if isinstance(self.topology, str):
            object.__setattr__(self, "topology", Topology.parse(self.topology))
        if not 1 <= self.channel_width <= MAX_CHANNEL_WIDTH:
            raise ArchError(f"channel width {self.channel_width} outside 1..{MAX_CHANNEL_WIDTH}")

    @property
    def memory_map(self) -> MemoryMap:
        return _memory_map(self.channel_width)

    def sb_connections(self, side: Side, track: int):
        return sb_connections(self.topology, side, track, self.channel_width)


def enumerate_config_bits(arch: FabricArch) -> MemoryMap:
    return arch.memory_map


def cb_connections(arch: FabricArch, row: int, col: int) -> list[tuple[int, int, ConfigAddress]]:
    """(clb-pin, track, enable address) for every tap and output drive of a connection block.

    Output drives are reported with pin ``CLB_OUTPUT_PIN``.
    """
    kind = block_kind_at(row, col)
    if kind not in (BlockKind.HCONN, BlockKind.VCONN):
        raise ArchError(f"block ({row},{col}) is {kind.value}, not a connection block")
    mm = arch.memory_map
    out = []
    for fld, track in block_layout(row, col, arch.channel_width):
        pin = CLB_OUTPUT_PIN if fld == "drive" else int(fld[3:])
        out.append((pin, track, mm.lookup(kind.value, row, col, fld, track)))
    return out


def load_arch_config(text: str) -> FabricArch:
    """Parse a ``key=value`` architecture file (grid is fixed at 19x19)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ArchError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lower()] = value
    width = int(values.pop("channel_width", values.pop("w", 8)))
    topology = Topology.parse(values.pop("topology", "wilton"))
    for key in ("grid_rows", "grid_cols", "rows", "cols"):
        if key in values and int(values.pop(key)) != GRID:
            raise ArchError(f"{key} is fixed at {GRID}")
    if values:
        raise ArchError(f"unknown architecture keys: {', '.join(sorted(values))}")
    return FabricArch(width, topology)


def dump_arch_config(arch: FabricArch) -> str:
    return (f"grid_rows={GRID}\ngrid_cols={GRID}\n"
            f"channel_width={arch.channel_width}\ntopology={arch.topology.value}\n")
