"""Configuration images: generation from a placed and routed design, file format, decoding."""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

from .arch import (CLB_OUTPUT_PIN, GRID, LUT_INPUTS, LUT_SIZE, PAYLOAD_BYTES, WORDS_PER_BLOCK,
                   BlockKind, ConfigAddress, FabricArch, Resource, Topology, block_kind_at,
                   group_endpoints, gpio_index, io_segment, segment_switch_blocks,
                   switch_bit)
from .errors import BitstreamError, RouteError
from .vtr import (LogicNetlist, PackedNetlist, Placement, RouteForest, validate_packing,
                  validate_placement, validate_routes)

MAGIC = b"FPGA"
VERSION = 1
HEADER_LEN = len(MAGIC) + 6
FILE_LEN = HEADER_LEN + PAYLOAD_BYTES + 4

BUFFER_TABLE = int("AA" * 8, 16)  # identity on input 0


@dataclass(frozen=True)
class ConfigImage:
    data: bytes = bytes(PAYLOAD_BYTES)
    channel_width: int = 8
    topology: Topology = Topology.WILTON
    version: int = VERSION

    def __post_init__(self):
        if len(self.data) != PAYLOAD_BYTES:
            raise BitstreamError(f"image payload must be {PAYLOAD_BYTES} bytes, got {len(self.data)}")
        object.__setattr__(self, "data", bytes(self.data))

    @classmethod
    def empty(cls, arch: FabricArch) -> "ConfigImage":
        return cls(bytes(PAYLOAD_BYTES), arch.channel_width, arch.topology)

    @classmethod
    def from_resources(cls, arch: FabricArch, resources) -> "ConfigImage":
        buf = bytearray(PAYLOAD_BYTES)
        mm = arch.memory_map
        for res in resources:
            addr = mm[res]
            buf[addr.byte_index] |= 1 << addr.bit
        return cls(bytes(buf), arch.channel_width, arch.topology)

    @property
    def arch(self) -> FabricArch:
        return FabricArch(self.channel_width, self.topology)

    def byte(self, row: int, col: int, word: int) -> int:
        return self.data[(row * GRID + col) * WORDS_PER_BLOCK + word]

    def bit(self, addr: ConfigAddress) -> int:
        return (self.data[addr.byte_index] >> addr.bit) & 1

    def with_bit(self, addr: ConfigAddress, value: int) -> "ConfigImage":
        buf = bytearray(self.data)
        if value:
            buf[addr.byte_index] |= 1 << addr.bit
        else:
            buf[addr.byte_index] &= ~(1 << addr.bit) & 0xFF
        return ConfigImage(bytes(buf), self.channel_width, self.topology, self.version)

    def flip(self, addr: ConfigAddress) -> "ConfigImage":
        return self.with_bit(addr, 1 - self.bit(addr))

    def set_addresses(self):
        for i, byte in enumerate(self.data):
            if byte:
                for b in range(8):
                    if (byte >> b) & 1:
                        yield ConfigAddress.from_flat(i * 8 + b)


@dataclass(frozen=True)
class LutConfig:
    table: int
    input_mask: int
    sync: int

    def active_pins(self) -> list[int]:
        return [p for p in range(LUT_INPUTS) if (self.input_mask >> p) & 1]

    def evaluate(self, pins) -> int:
        idx = 0
        for p in range(LUT_INPUTS):
            if (self.input_mask >> p) & 1 and pins[p]:
                idx |= 1 << p
        return (self.table >> idx) & 1


def rotate_lut(table: int, pin_map, arity: int) -> int:
    """Re-index a truth table from logical input order to physical pins.

    ``pin_map[i]`` is the physical pin carrying logical input ``i``.  The result
    does not depend on physical pins outside the map, so a masked pin sees the
    cofactor at 0 replicated.
    """
    pins = list(pin_map)[:arity]
    if len(pins) != arity:
        raise BitstreamError(f"pin map covers {len(pins)} of {arity} inputs")
    if len(set(pins)) != len(pins) or any(not 0 <= p < LUT_INPUTS for p in pins):
        raise BitstreamError(f"pin map {pins} is not an injective map into 0-{LUT_INPUTS - 1}")
    out = 0
    for v in range(LUT_SIZE):
        u = 0
        for i, p in enumerate(pins):
            u |= ((v >> p) & 1) << i
        if (table >> u) & 1:
            out |= 1 << v
    return out


# --- generation -------------------------------------------------------------

def _site_of(placement: Placement):
    return {name: (site.y, site.x) for name, site in placement.entries}


def design_resources(arch: FabricArch, netlist: LogicNetlist, packed: PackedNetlist,
                     placement: Placement, routes: RouteForest) -> set[Resource]:
    """Every configuration bit that a design enables."""
    validate_packing(netlist, packed)
    validate_placement(packed, placement)
    validate_routes(routes, arch)
    sites = _site_of(placement)
    on: set[Resource] = set()

    for b in packed.clbs:
        r, c = sites[b.name]
        pmap = b.pin_map
        if b.lut is not None:
            lut = netlist.lut(b.lut)
            table = rotate_lut(lut.table, [pmap[n] for n in lut.inputs], len(lut.inputs))
        else:
            table = rotate_lut(BUFFER_TABLE, [pmap[netlist.latch(b.latch).data]], 1)
        if b.latch is not None and netlist.latch(b.latch).init:
            raise BitstreamError(f"latch {b.latch!r} has init value 1; fabric flip-flops reset to 0")
        on.update(Resource("clb", r, c, "lut", i) for i in range(LUT_SIZE) if (table >> i) & 1)
        on.update(Resource("clb", r, c, "en", p) for p in pmap.values())
        if b.latch is not None:
            on.add(Resource("clb", r, c, "sync", 0))

    # expected terminals per net, from the packing
    sources: dict[str, tuple[int, int, int]] = {}
    sinks: dict[str, set[tuple[int, int, int]]] = {}
    for b in packed.blocks:
        r, c = sites[b.name]
        out = b.output_net()
        if out is not None:
            sources[out] = (c, r, CLB_OUTPUT_PIN if b.kind == "clb" else 0)
        if b.kind == "clb":
            for net, pin in b.pins:
                sinks.setdefault(net, set()).add((c, r, pin))
        elif b.kind == "outpad":
            sinks.setdefault(b.pad_net, set()).add((c, r, 0))
    for net, want in sinks.items():
        if net not in sources:
            raise BitstreamError(f"net {net!r} has no placed driver")
        try:
            routed = routes.net(net)
        except KeyError:
            raise RouteError(f"net {net!r} is not routed") from None
        got = {(n.x, n.y, n.index) for n in routed.sinks()}
        if got != want:
            raise RouteError(f"net {net!r} reaches sinks {sorted(got)}, expected {sorted(want)}")
    for net in routes.nets:
        if net.name not in sources:
            raise RouteError(f"routed net {net.name!r} has no driver block in the packing")
        src = net.nodes[0]
        if (src.x, src.y, src.index) != sources[net.name]:
            raise RouteError(f"net {net.name!r} starts at ({src.x},{src.y}), "
                             f"but its driver is placed at {sources[net.name][:2]}")
        if net.name not in sinks:
            raise RouteError(f"routed net {net.name!r} has no consumers")

    drivers: dict[tuple, str] = {}
    io_dir: dict[tuple[int, int], int] = {}
    for net in routes.nets:
        for a, b in net.edges():
            if a.kind == "OPIN":
                key = (b.segment, b.index)
                if key in drivers and drivers[key] != net.name:
                    raise BitstreamError(f"driver conflict on {b.kind} ({b.x},{b.y}) track "
                                         f"{b.index}: {drivers[key]} and {net.name}")
                drivers[key] = net.name
                if block_kind_at(a.y, a.x) is BlockKind.CLB:
                    on.add(Resource(_cb_name(b), b.y, b.x, "drive", b.index))
                else:
                    _set_io_dir(io_dir, a.y, a.x, 0)
                    on.add(Resource("io", a.y, a.x, "couple", b.index))
            elif a.is_channel and b.is_channel:
                on.add(_switch_resource(arch, a, b))
            elif a.is_channel and b.kind == "IPIN":
                if block_kind_at(b.y, b.x) is BlockKind.CLB:
                    on.add(Resource(_cb_name(a), a.y, a.x, f"tap{b.index}", a.index))
                else:
                    _set_io_dir(io_dir, b.y, b.x, 1)
                    on.add(Resource("io", b.y, b.x, "couple", a.index))
    for (r, c), d in io_dir.items():
        if d:
            on.add(Resource("io", r, c, "dir", 0))
    return on


def _cb_name(node) -> str:
    return "hcb" if node.kind == "CHANX" else "vcb"


def _set_io_dir(io_dir, r, c, d):
    if io_dir.setdefault((r, c), d) != d:
        raise BitstreamError(f"GPIO at ({r},{c}) used as both input and output")


def _switch_resource(arch: FabricArch, a, b) -> Resource:
    ends_b = {(r, c): s for r, c, s in segment_switch_blocks(*b.segment)}
    for r, c, side_a in segment_switch_blocks(*a.segment):
        if (r, c) in ends_b:
            hit = switch_bit(side_a, a.index, ends_b[(r, c)], b.index,
                             arch.topology, arch.channel_width)
            if hit is None:
                break
            return Resource("sb", r, c, hit[0], hit[1])
    raise BitstreamError(f"no {arch.topology.value} switch joins {a.kind} ({a.x},{a.y}) "
                         f"track {a.index} and {b.kind} ({b.x},{b.y}) track {b.index}")


def generate_bitstream(arch: FabricArch, netlist: LogicNetlist, packed: PackedNetlist,
                       placement: Placement, routes: RouteForest) -> ConfigImage:
    return ConfigImage.from_resources(arch, design_resources(arch, netlist, packed, placement, routes))


# --- file format ------------------------------------------------------------

def serialize(image: ConfigImage) -> bytes:
    header = MAGIC + bytes([image.version, GRID, GRID, WORDS_PER_BLOCK,
                            image.channel_width, image.topology.code])
    body = header + image.data
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def deserialize(blob: bytes) -> ConfigImage:
    if len(blob) < HEADER_LEN or blob[:4] != MAGIC:
        raise BitstreamError("bad magic: not a bitstream file")
    version, rows, cols, words, width, topo = blob[4:HEADER_LEN]
    if version != VERSION:
        raise BitstreamError(f"unsupported bitstream version {version}")
    if (rows, cols, words) != (GRID, GRID, WORDS_PER_BLOCK):
        raise BitstreamError(f"geometry {rows}x{cols}x{words} does not match the fabric")
    if len(blob) != FILE_LEN:
        raise BitstreamError(f"payload length {len(blob) - HEADER_LEN - 4} != {PAYLOAD_BYTES}")
    body, crc = blob[:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise BitstreamError("checksum mismatch")
    try:
        topology = Topology.from_code(topo)
    except ValueError as exc:
        raise BitstreamError(str(exc)) from None
    return ConfigImage(body[HEADER_LEN:], width, topology, version)


# --- decoding ---------------------------------------------------------------

@dataclass
class Configuration:
    clbs: dict = field(default_factory=dict)      # (r, c) -> LutConfig
    switches: dict = field(default_factory=dict)  # (r, c) -> [(group, index)]
    taps: dict = field(default_factory=dict)      # (r, c) -> [(pin, track)]
    drives: dict = field(default_factory=dict)    # (r, c) -> [track]
    ios: dict = field(default_factory=dict)       # (r, c) -> (direction, [track])
    enabled: frozenset = frozenset()
    spare_set: list = field(default_factory=list)  # ConfigAddress
    channel_width: int = 8
    topology: Topology = Topology.WILTON

    @property
    def warnings(self) -> list[str]:
        return [f"spare bit set at (row={a.row}, col={a.col}, word={a.word}, bit={a.bit})"
                for a in self.spare_set]

    def is_empty(self) -> bool:
        return not self.enabled

    def to_text(self) -> str:
        lines = []
        for (r, c) in sorted(self.clbs):
            cfg = self.clbs[(r, c)]
            lines.append(f"clb ({r},{c}) lut=0x{cfg.table:016x} inputs={cfg.input_mask:06b} "
                         f"out={'sync' if cfg.sync else 'async'}")
        for (r, c) in sorted(self.switches):
            for grp, t in self.switches[(r, c)]:
                (sa, ta), (sb, tb) = group_endpoints(self.topology, grp, t, self.channel_width)
                lines.append(f"sb ({r},{c}) {grp}[{t}] {sa.value}{ta}<->{sb.value}{tb}")
        for (r, c) in sorted(set(self.taps) | set(self.drives)):
            kind = block_kind_at(r, c).value
            for pin, t in self.taps.get((r, c), []):
                lines.append(f"{kind} ({r},{c}) tap pin{pin} <- track {t}")
            for t in self.drives.get((r, c), []):
                lines.append(f"{kind} ({r},{c}) drive out -> track {t}")
        for (r, c) in sorted(self.ios):
            d, tracks = self.ios[(r, c)]
            lines.append(f"io ({r},{c}) gpio={gpio_index(r, c)} dir={'out' if d else 'in'} "
                         f"tracks={','.join(map(str, tracks)) or '-'}")
        if not lines:
            lines.append("no resources configured")
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines) + "\n"


def decode(image: ConfigImage, arch: FabricArch | None = None) -> Configuration:
    arch = arch or image.arch
    if (arch.channel_width, arch.topology) != (image.channel_width, image.topology):
        raise BitstreamError(f"image built for W={image.channel_width}/{image.topology.value}, "
                             f"arch is W={arch.channel_width}/{arch.topology.value}")
    mm = arch.memory_map
    enabled = set()
    spare = []
    for addr in image.set_addresses():
        res = mm.resource_at[addr.flat]
        if res is None:
            spare.append(addr)
        else:
            enabled.add(res)

    cfg = Configuration(enabled=frozenset(enabled), spare_set=spare,
                        channel_width=arch.channel_width, topology=arch.topology)
    clb_bits: dict = {}
    for res in enabled:
        key = (res.row, res.col)
        if res.block == "clb":
            table, mask, sync = clb_bits.get(key, (0, 0, 0))
            if res.field == "lut":
                table |= 1 << res.index
            elif res.field == "en":
                mask |= 1 << res.index
            else:
                sync = 1
            clb_bits[key] = (table, mask, sync)
        elif res.block == "sb":
            cfg.switches.setdefault(key, []).append((res.field, res.index))
        elif res.block in ("hcb", "vcb"):
            if res.field == "drive":
                cfg.drives.setdefault(key, []).append(res.index)
            else:
                cfg.taps.setdefault(key, []).append((int(res.field[3:]), res.index))
        elif res.block == "io":
            d, tracks = cfg.ios.get(key, (0, []))
            if res.field == "dir":
                d = 1
            else:
                tracks = tracks + [res.index]
            cfg.ios[key] = (d, tracks)
    cfg.clbs = {k: LutConfig(*v) for k, v in clb_bits.items()}
    order = {name: i for i, name in enumerate(("WE", "NS", "WN", "NE", "ES", "SW"))}
    for v in cfg.switches.values():
        v.sort(key=lambda gt: (order[gt[0]], gt[1]))
    for v in cfg.taps.values():
        v.sort()
    for v in cfg.drives.values():
        v.sort()
    cfg.ios = {k: (d, sorted(t)) for k, (d, t) in cfg.ios.items()}
    return cfg


def track_drivers(config: Configuration) -> dict[tuple, list[str]]:
    """Enabled drive sources per (segment, track), before any switch-block merging."""
    out: dict[tuple, list[str]] = {}
    for (r, c), tracks in config.drives.items():
        seg = ("CHANX", c, r) if block_kind_at(r, c) is BlockKind.HCONN else ("CHANY", c, r)
        for t in tracks:
            out.setdefault((seg, t), []).append(f"clb-output via {block_kind_at(r, c).value} ({r},{c})")
    for (r, c), (d, tracks) in config.ios.items():
        if d == 0:
            for t in tracks:
                out.setdefault((io_segment(r, c), t), []).append(f"gpio {gpio_index(r, c)} ({r},{c})")
    return out


def utilization(config: Configuration) -> dict[str, int]:
    return {
        "clbs_used": len(config.clbs),
        "clbs_total": FabricArch.clb_grid ** 2,
        "bits_set": len(config.enabled),
        "switches_on": sum(len(v) for v in config.switches.values()),
        "gpios_used": sum(1 for d, t in config.ios.values() if d or t),
    }
