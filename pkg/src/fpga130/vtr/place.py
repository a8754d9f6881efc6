"""VPR-style ``.place`` files."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..arch import GRID, BlockKind, block_kind_at
from ..errors import ParseError, PlacementError
from .packed import PackedNetlist

_HEADER = re.compile(r"^Array size:\s*(\d+)\s*x\s*(\d+)\s*logic blocks\.?\s*$")


@dataclass(frozen=True)
class Site:
    x: int
    y: int
    subblock: int = 0

    @property
    def rc(self) -> tuple[int, int]:
        return self.y, self.x


@dataclass(frozen=True)
class Placement:
    entries: tuple[tuple[str, Site], ...]
    array_size: tuple[int, int] = (GRID, GRID)

    def __getitem__(self, name: str) -> Site:
        for n, site in self.entries:
            if n == name:
                return site
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(n == name for n, _ in self.entries)

    def as_dict(self) -> dict[str, Site]:
        return dict(self.entries)


def parse_place(text: str, source: str | None = None) -> Placement:
    size = None
    entries = []
    occupied: dict[tuple[int, int], str] = {}
    names = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("Netlist"):
            continue
        if size is None:
            m = _HEADER.match(line)
            if not m:
                raise ParseError("expected 'Array size: <R> x <C> logic blocks'", lineno, 1, source)
            size = (int(m.group(1)), int(m.group(2)))
            if size != (GRID, GRID):
                raise PlacementError(f"array size {size[0]} x {size[1]} does not match the "
                                     f"{GRID} x {GRID} fabric")
            continue
        body = line.split("#", 1)[0].split()
        if len(body) != 4:
            raise ParseError("expected '<name> <x> <y> <subblock> [#<n>]'", lineno, 1, source)
        name = body[0]
        try:
            x, y, sub = (int(v) for v in body[1:])
        except ValueError:
            raise ParseError("coordinates must be integers", lineno, len(raw) - len(raw.lstrip()) + 1,
                             source) from None
        if not (0 <= x < GRID and 0 <= y < GRID):
            raise PlacementError(f"line {lineno}: {name!r} at ({x},{y}) is outside 0-{GRID - 1}")
        if sub != 0:
            raise PlacementError(f"line {lineno}: subblock {sub} unsupported (one block per site)")
        if name in names:
            raise PlacementError(f"line {lineno}: block {name!r} placed twice")
        if (x, y) in occupied:
            raise PlacementError(f"line {lineno}: site ({x},{y}) already holds {occupied[(x, y)]!r}")
        kind = block_kind_at(y, x)
        if kind not in (BlockKind.CLB, BlockKind.IO):
            raise PlacementError(f"line {lineno}: ({x},{y}) is a {kind.value} site, not a CLB or GPIO")
        names.add(name)
        occupied[(x, y)] = name
        entries.append((name, Site(x, y, sub)))
    if size is None:
        raise ParseError("missing 'Array size' header", source=source)
    return Placement(tuple(entries), size)


def write_place(placement: Placement) -> str:
    rows, cols = placement.array_size
    lines = [f"Array size: {rows} x {cols} logic blocks", "",
             "#block name\tx\ty\tsubblk\tblock number"]
    for i, (name, site) in enumerate(placement.entries):
        lines.append(f"{name}\t{site.x}\t{site.y}\t{site.subblock}\t#{i}")
    return "\n".join(lines) + "\n"


def validate_placement(packed: PackedNetlist, placement: Placement) -> None:
    placed = placement.as_dict()
    for b in packed.blocks:
        if b.name not in placed:
            raise PlacementError(f"block {b.name!r} is unplaced")
        site = placed[b.name]
        kind = block_kind_at(site.y, site.x)
        want = BlockKind.CLB if b.kind == "clb" else BlockKind.IO
        if kind is not want:
            raise PlacementError(f"block {b.name!r} ({b.kind}) placed on a {kind.value} site "
                                 f"({site.x},{site.y})")
    known = {b.name for b in packed.blocks}
    extra = [n for n, _ in placement.entries if n not in known]
    if extra:
        raise PlacementError(f"placement names unknown blocks: {', '.join(extra)}")
