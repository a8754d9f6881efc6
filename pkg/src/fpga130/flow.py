"""Load a blif/net/place/route file set into one validated design bundle."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .arch import FabricArch
from .bitstream import ConfigImage, generate_bitstream
from .sim import pad_assignment
from .vtr import (LogicNetlist, PackedNetlist, Placement, RouteForest, parse_blif, parse_net,
                  parse_place, parse_route)


@dataclass(frozen=True)
class Design:
    arch: FabricArch
    netlist: LogicNetlist
    packed: PackedNetlist
    placement: Placement
    routes: RouteForest

    def bitstream(self) -> ConfigImage:
        return generate_bitstream(self.arch, self.netlist, self.packed, self.placement, self.routes)

    @property
    def pads(self) -> dict[str, int]:
        return pad_assignment(self.packed, self.placement)


def load_design(blif, net, place, route, arch: FabricArch | None = None) -> Design:
    arch = arch or FabricArch()
    paths = [Path(p) for p in (blif, net, place, route)]
    texts = [p.read_text() for p in paths]
    return Design(
        arch,
        parse_blif(texts[0], str(paths[0])),
        parse_net(texts[1], str(paths[1])),
        parse_place(texts[2], str(paths[2])),
        parse_route(texts[3], arch, str(paths[3])),
    )


def fixture_paths(directory) -> tuple[Path, Path, Path, Path]:
    """The four files of a fixture directory named after its design."""
    d = Path(directory)
    return tuple(d / f"{d.name}.{ext}" for ext in ("blif", "net", "place", "route"))
