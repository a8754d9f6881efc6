"""Readers and writers for the VTR-flow artifacts consumed by the bitstream generator."""

from .blif import Latch, LogicNetlist, Lut, parse_blif, write_blif, validate_netlist
from .packed import PackedBlock, PackedNetlist, parse_net, validate_packing, write_net
from .place import Placement, Site, parse_place, validate_placement, write_place
from .route import (RouteForest, RoutedNet, RouteNode, adjacent, parse_route, validate_routes,
                    write_route)

__all__ = [
    "Latch", "LogicNetlist", "Lut", "parse_blif", "write_blif", "validate_netlist",
    "PackedBlock", "PackedNetlist", "parse_net", "validate_packing", "write_net",
    "Placement", "Site", "parse_place", "validate_placement", "write_place",
    "RouteForest", "RoutedNet", "RouteNode", "adjacent", "parse_route", "validate_routes",
    "write_route",
]
