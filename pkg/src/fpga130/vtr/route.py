"""VPR-style ``.route`` files and the geometric route validator.

Each net is a pre-order walk of its routing tree.  After a SINK the walk
resumes from a node already in the tree (a branch point), exactly as VPR
writes multi-fanout nets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..arch import (CLB_OUTPUT_PIN, IO_PIN, LUT_INPUTS, BlockKind, FabricArch, block_kind_at,
                    clb_input_segment, clb_output_segments, io_segment, is_segment,
                    segment_switch_blocks, switch_bit, GRID)
from ..errors import ParseError, RouteError

KINDS = ("SOURCE", "OPIN", "CHANX", "CHANY", "IPIN", "SINK")
_LABEL = {"SOURCE": "Class", "SINK": "Class", "OPIN": "Pin", "IPIN": "Pin",
          "CHANX": "Track", "CHANY": "Track"}

_NET = re.compile(r"^Net\s+(\d+)\s+\((\S+)\)\s*$")
_NODE = re.compile(r"^Node:\s*(\d+)\s+([A-Z]+)\s+\((\d+),\s*(\d+)\)\s+(Track|Pin|Class):\s*(\d+)"
                   r"(?:\s+Switch:\s*-?\d+)?\s*$")


@dataclass(frozen=True)
class RouteNode:
    kind: str
    x: int
    y: int
    index: int  # track for CHANX/CHANY, pin for OPIN/IPIN, class for SOURCE/SINK
    id: int = 0

    @property
    def key(self) -> tuple[str, int, int, int]:
        return (self.kind, self.x, self.y, self.index)

    @property
    def segment(self) -> tuple[str, int, int]:
        return (self.kind, self.x, self.y)

    @property
    def is_channel(self) -> bool:
        return self.kind in ("CHANX", "CHANY")

    def __str__(self):
        return f"Node: {self.id} {self.kind} ({self.x},{self.y}) {_LABEL[self.kind]}: {self.index}"


@dataclass(frozen=True)
class RoutedNet:
    number: int
    name: str
    nodes: tuple[RouteNode, ...]

    def sinks(self) -> list[RouteNode]:
        return [n for n in self.nodes if n.kind == "SINK"]

    def edges(self):
        """(parent, child) hops of the routing tree, branch restarts excluded."""
        for a, b in zip(self.nodes, self.nodes[1:]):
            if a.kind != "SINK":
                yield a, b


@dataclass(frozen=True)
class RouteForest:
    nets: tuple[RoutedNet, ...] = ()

    def __iter__(self):
        return iter(self.nets)

    def __len__(self):
        return len(self.nets)

    def net(self, name: str) -> RoutedNet:
        for n in self.nets:
            if n.name == name:
                return n
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [n.name for n in self.nets]


def parse_route(text: str, arch: FabricArch | None = None, source: str | None = None,
                validate: bool = True) -> RouteForest:
    nets = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("Array size") or line == "Routing:":
            continue
        m = _NET.match(line)
        if m:
            if current is not None:
                nets.append(current)
            current = (int(m.group(1)), m.group(2), [])
            continue
        m = _NODE.match(line)
        if not m:
            raise ParseError(f"unrecognised routing line {line!r}", lineno, 1, source)
        if current is None:
            raise ParseError("Node line before any Net header", lineno, 1, source)
        nid, kind, x, y, label, value = m.groups()
        if kind not in KINDS:
            raise ParseError(f"unknown node kind {kind!r}", lineno, line.index(kind) + 1, source)
        if _LABEL[kind] != label:
            raise ParseError(f"{kind} node must carry {_LABEL[kind]}, not {label}", lineno,
                             line.index(label) + 1, source)
        current[2].append(RouteNode(kind, int(x), int(y), int(value), int(nid)))
    if current is not None:
        nets.append(current)
    forest = RouteForest(tuple(RoutedNet(k, name, tuple(nodes)) for k, name, nodes in nets))
    if validate:
        validate_routes(forest, arch or FabricArch())
    return forest


def write_route(forest: RouteForest) -> str:
    chunks = []
    for net in forest.nets:
        lines = [f"Net {net.number} ({net.name})", ""]
        lines.extend(str(n) for n in net.nodes)
        chunks.append("\n".join(lines))
    return ("\n\n".join(chunks) + "\n") if chunks else ""


def _check_node(node: RouteNode, arch: FabricArch, where: str) -> None:
    if not (0 <= node.x < GRID and 0 <= node.y < GRID):
        raise RouteError(f"{where}: {node.kind} ({node.x},{node.y}) outside the grid")
    if node.is_channel:
        if not is_segment(node.kind, node.x, node.y):
            raise RouteError(f"{where}: no {node.kind} segment at ({node.x},{node.y})")
        if not 0 <= node.index < arch.channel_width:
            raise RouteError(f"{where}: track {node.index} >= W={arch.channel_width}")
        return
    kind = block_kind_at(node.y, node.x)
    if kind is BlockKind.CLB:
        if node.kind in ("SOURCE", "OPIN"):
            ok = node.index == CLB_OUTPUT_PIN
        else:
            ok = 0 <= node.index < LUT_INPUTS
    elif kind is BlockKind.IO:
        ok = node.index == IO_PIN
    else:
        raise RouteError(f"{where}: {node.kind} at ({node.x},{node.y}) which is a {kind.value} block")
    if not ok:
        raise RouteError(f"{where}: bad pin/class {node.index} for {node.kind} on {kind.value}")


def adjacent(a: RouteNode, b: RouteNode, arch: FabricArch) -> bool:
    """True when the fabric has a programmable (or hard) connection a -> b."""
    if a.kind == "SOURCE":
        return b.kind == "OPIN" and (a.x, a.y, a.index) == (b.x, b.y, b.index)
    if a.kind == "IPIN":
        return b.kind == "SINK" and (a.x, a.y, a.index) == (b.x, b.y, b.index)
    if a.kind == "OPIN":
        if not b.is_channel:
            return False
        if block_kind_at(a.y, a.x) is BlockKind.CLB:
            return b.segment in clb_output_segments(a.y, a.x)
        return b.segment == io_segment(a.y, a.x)
    if not a.is_channel:
        return False
    if b.kind == "IPIN":
        if block_kind_at(b.y, b.x) is BlockKind.CLB:
            return a.segment == clb_input_segment(b.y, b.x, b.index)
        return a.segment == io_segment(b.y, b.x)
    if not b.is_channel or a.segment == b.segment:
        return False
    ends_b = {(r, c): side for r, c, side in segment_switch_blocks(*b.segment)}
    for r, c, side_a in segment_switch_blocks(*a.segment):
        side_b = ends_b.get((r, c))
        if side_b is None:
            continue
        return switch_bit(side_a, a.index, side_b, b.index,
                          arch.topology, arch.channel_width) is not None
    return False


def validate_routes(forest: RouteForest, arch: FabricArch) -> None:
    owner: dict[tuple, str] = {}
    names = set()
    for net in forest.nets:
        where = f"net {net.name!r}"
        if net.name in names:
            raise RouteError(f"{where} routed twice")
        names.add(net.name)
        nodes = net.nodes
        if not nodes:
            raise RouteError(f"{where} has no nodes")
        if nodes[0].kind != "SOURCE":
            raise RouteError(f"{where} does not begin with SOURCE")
        if not any(n.kind == "SINK" for n in nodes):
            raise RouteError(f"{where} has no SINK")
        if nodes[-1].kind != "SINK":
            raise RouteError(f"{where} has a path that does not end at a SINK")
        seen = set()
        for i, node in enumerate(nodes):
            _check_node(node, arch, where)
            if i == 0:
                seen.add(node.key)
                continue
            prev = nodes[i - 1]
            if prev.kind == "SINK":
                if node.key not in seen or node.kind == "SINK":
                    raise RouteError(f"{where}: branch after SINK must restart at an existing "
                                     f"tree node, got {node.kind} ({node.x},{node.y})")
                continue
            if node.key in seen:
                raise RouteError(f"{where}: node {node.kind} ({node.x},{node.y}) {node.index} "
                                 "visited twice")
            if not adjacent(prev, node, arch):
                raise RouteError(f"{where}: {prev.kind} ({prev.x},{prev.y}) {prev.index} -> "
                                 f"{node.kind} ({node.x},{node.y}) {node.index} are not adjacent")
            seen.add(node.key)
        for key in seen:
            if key[0] in ("SOURCE", "SINK"):
                continue
            other = owner.get(key)
            if other is not None and other != net.name:
                raise RouteError(f"nets {other!r} and {net.name!r} both occupy "
                                 f"{key[0]} ({key[1]},{key[2]}) {key[3]}")
            owner[key] = net.name
