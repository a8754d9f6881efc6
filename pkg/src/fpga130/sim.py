"""Cycle-based functional simulation of a configured fabric, plus a netlist reference simulator.

Evaluation model: zero-delay combinational settle, then one rising edge of the
global clock.  Enabled switch-block transmission gates merge track segments
into undirected electrical nets; connection-block taps and drives, and GPIO
couplings, are directed.  A net with no enabled driver keeps the value its
half-latches last held (0 after reset).
"""

from __future__ import annotations

import graphlib
import random
from dataclasses import dataclass, field

from .arch import (LUT_INPUTS, BlockKind, FabricArch, block_kind_at,
                   cb_served_clb, group_endpoints, gpio_index, io_segment, sb_side_segment)
from .bitstream import ConfigImage, LutConfig, decode
from .errors import CombinationalLoopError, ContentionError, FabricError
from .vtr import LogicNetlist, PackedNetlist, Placement

_IDLE_CLB = LutConfig(0, 0, 0)


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


@dataclass
class ElectricalNet:
    segments: list  # [((kind, x, y), track)], sorted
    driver: tuple | None = None  # ("clb", r, c) | ("pad", gpio)


@dataclass
class FabricState:
    tracks: dict = field(default_factory=dict)  # (segment, track) -> half-latched value
    dffs: dict = field(default_factory=dict)    # (r, c) -> q
    outputs: dict = field(default_factory=dict)  # gpio -> value sampled before the edge
    cycle: int = 0

    def copy(self) -> "FabricState":
        return FabricState(dict(self.tracks), dict(self.dffs), dict(self.outputs), self.cycle)


class ConfiguredFabric:
    """Immutable connectivity graph derived from a configuration image."""

    def __init__(self, image: ConfigImage, arch: FabricArch | None = None):
        arch = arch or image.arch
        self.arch = arch
        self.config = cfg = decode(image, arch)
        self.clbs: dict = dict(cfg.clbs)

        uf = _UnionFind()
        for (r, c), switches in cfg.switches.items():
            for grp, t in switches:
                (sa, ta), (sb, tb) = group_endpoints(arch.topology, grp, t, arch.channel_width)
                seg_a, seg_b = sb_side_segment(r, c, sa), sb_side_segment(r, c, sb)
                if seg_a is None or seg_b is None:
                    continue  # gate at the fabric edge connects to nothing
                uf.union((seg_a, ta), (seg_b, tb))

        drivers: dict = {}
        for (r, c), tracks in cfg.drives.items():
            src = cb_served_clb(r, c)
            seg = ("CHANX", c, r) if block_kind_at(r, c) is BlockKind.HCONN else ("CHANY", c, r)
            for t in tracks:
                drivers.setdefault(uf.find((seg, t)), set()).add(("clb", *src))
                self.clbs.setdefault(src, _IDLE_CLB)
        self.inputs: list[int] = []
        self.outputs: list[int] = []
        pad_taps: dict = {}
        for (r, c), (direction, tracks) in sorted(cfg.ios.items()):
            g = gpio_index(r, c)
            seg = io_segment(r, c)
            if direction:
                self.outputs.append(g)
                pad_taps[g] = {uf.find((seg, t)) for t in tracks}
            elif tracks:
                self.inputs.append(g)
                for t in tracks:
                    drivers.setdefault(uf.find((seg, t)), set()).add(("pad", g))
        self.inputs.sort()
        self.outputs.sort()

        pin_taps: dict = {}
        for (r, c), taps in cfg.taps.items():
            clb = cb_served_clb(r, c)
            seg = ("CHANX", c, r) if block_kind_at(r, c) is BlockKind.HCONN else ("CHANY", c, r)
            for pin, t in taps:
                pin_taps.setdefault((*clb, pin), set()).add(uf.find((seg, t)))

        roots = set(drivers)
        for s in pin_taps.values():
            roots |= s
        for s in pad_taps.values():
            roots |= s
        members: dict = {root: [] for root in roots}
        for node in list(uf.parent):
            root = uf.find(node)
            if root in members:
                members[root].append(node)
        for root in roots:
            if not members[root]:
                members[root].append(root)

        for root, srcs in drivers.items():
            if len(srcs) > 1:
                where = ", ".join(f"{s[0]}:{s[1:]}" for s in sorted(srcs))
                segs = sorted(members[root])
                raise ContentionError(f"electrical net containing {segs[0][0][0]} "
                                      f"({segs[0][0][1]},{segs[0][0][2]}) track {segs[0][1]} "
                                      f"has {len(srcs)} drivers: {where}")
        for key, nets in pin_taps.items():
            if len(nets) > 1:
                raise ContentionError(f"CLB ({key[0]},{key[1]}) pin {key[2]} is fed by "
                                      f"{len(nets)} separate tracks")
        for g, nets in pad_taps.items():
            if len(nets) > 1:
                raise ContentionError(f"GPIO {g} output is fed by {len(nets)} separate tracks")

        net_ids = {root: i for i, root in enumerate(sorted(roots))}
        self.nets: list[ElectricalNet] = [
            ElectricalNet(sorted(members[root]), next(iter(drivers[root])) if root in drivers else None)
            for root in sorted(roots)
        ]
        self.pin_net = {key: net_ids[next(iter(nets))] for key, nets in pin_taps.items()}
        self.pad_net = {g: net_ids[next(iter(nets))] for g, nets in pad_taps.items() if nets}

        graph = graphlib.TopologicalSorter()
        for i, net in enumerate(self.nets):
            deps = []
            if net.driver and net.driver[0] == "clb":
                deps.append(("clb", net.driver[1], net.driver[2]))
            graph.add(("net", i), *deps)
        for (r, c), lut in self.clbs.items():
            deps = []
            if not lut.sync:
                for p in lut.active_pins():
                    if (r, c, p) in self.pin_net:
                        deps.append(("net", self.pin_net[(r, c, p)]))
            graph.add(("clb", r, c), *deps)
        try:
            self.order = list(graph.static_order())
        except graphlib.CycleError as exc:
            cycle = " -> ".join(str(n) for n in exc.args[1])
            raise CombinationalLoopError(f"combinational loop through routing: {cycle}") from None

    def census(self) -> dict[str, int]:
        return {"input_pads": len(self.inputs), "luts": len(self.config.clbs),
                "output_pads": len(self.outputs), "nets": len(self.nets)}

    def reset(self) -> FabricState:
        return FabricState()

    def _settle(self, state: FabricState, inputs: dict):
        net_val = [0] * len(self.nets)
        clb_out = {}
        for node in self.order:
            if node[0] == "net":
                i = node[1]
                drv = self.nets[i].driver
                if drv is None:
                    net_val[i] = state.tracks.get(self.nets[i].segments[0], 0)
                elif drv[0] == "pad":
                    net_val[i] = 1 if inputs.get(drv[1], 0) else 0
                else:
                    net_val[i] = clb_out[(drv[1], drv[2])]
            else:
                rc = (node[1], node[2])
                lut = self.clbs[rc]
                if lut.sync:
                    clb_out[rc] = state.dffs.get(rc, 0)
                else:
                    clb_out[rc] = lut.evaluate(self._pins(rc, net_val))
        return net_val, clb_out

    def _pins(self, rc, net_val):
        return [net_val[self.pin_net[(rc[0], rc[1], p)]] if (rc[0], rc[1], p) in self.pin_net else 0
                for p in range(LUT_INPUTS)]

    def step(self, state: FabricState, inputs: dict | None = None) -> FabricState:
        """Settle with ``inputs`` (gpio -> bit), sample outputs, then clock every DFF."""
        inputs = inputs or {}
        net_val, _ = self._settle(state, inputs)
        nxt = state.copy()
        for i, net in enumerate(self.nets):
            if net.driver is not None:
                for seg in net.segments:
                    nxt.tracks[seg] = net_val[i]
        nxt.outputs = {g: net_val[self.pad_net[g]] if g in self.pad_net else 0
                       for g in self.outputs}
        for rc, lut in self.clbs.items():
            nxt.dffs[rc] = lut.evaluate(self._pins(rc, net_val))
        nxt.cycle = state.cycle + 1
        return nxt

    def run(self, vectors, state: FabricState | None = None) -> list[dict]:
        state = state or self.reset()
        out = []
        for vec in vectors:
            state = self.step(state, vec)
            out.append(state.outputs)
        return out


def configure(image: ConfigImage, arch: FabricArch | None = None) -> ConfiguredFabric:
    return ConfiguredFabric(image, arch)


def step(fabric: ConfiguredFabric, state: FabricState, inputs: dict | None = None) -> FabricState:
    return fabric.step(state, inputs)


# --- reference netlist simulation ---------------------------------------------

class NetlistSimulator:
    def __init__(self, netlist: LogicNetlist):
        self.netlist = netlist
        luts = {lut.output: lut for lut in netlist.luts}
        graph = graphlib.TopologicalSorter()
        for lut in netlist.luts:
            graph.add(lut.output, *(n for n in lut.inputs if n in luts))
        try:
            self.order = [luts[n] for n in graph.static_order()]
        except graphlib.CycleError as exc:
            raise CombinationalLoopError(f"combinational loop: {' -> '.join(exc.args[1])}") from None

    def run(self, vectors) -> list[tuple[int, ...]]:
        """Vectors are tuples over ``data_inputs`` order (or dicts by net name)."""
        nl = self.netlist
        state = {latch.output: latch.init for latch in nl.latches}
        out = []
        for vec in vectors:
            if isinstance(vec, dict):
                values = {n: 1 if vec.get(n, 0) else 0 for n in nl.data_inputs}
            else:
                if len(vec) != len(nl.data_inputs):
                    raise FabricError(f"vector width {len(vec)} != {len(nl.data_inputs)} inputs")
                values = {n: 1 if v else 0 for n, v in zip(nl.data_inputs, vec)}
            for clk in nl.clocks:
                values[clk] = 0
            values.update(state)
            for lut in self.order:
                values[lut.output] = lut.evaluate([values[n] for n in lut.inputs])
            out.append(tuple(values[n] for n in nl.outputs))
            state = {latch.output: values[latch.data] for latch in nl.latches}
        return out


def simulate_netlist(netlist: LogicNetlist, vectors) -> list[tuple[int, ...]]:
    return NetlistSimulator(netlist).run(vectors)


# --- equivalence --------------------------------------------------------------

def pad_assignment(packed: PackedNetlist, placement: Placement) -> dict[str, int]:
    """Primary input/output net -> GPIO index."""
    sites = placement.as_dict()
    out = {}
    for b in packed.blocks:
        if b.kind in ("inpad", "outpad"):
            site = sites[b.name]
            out[b.pad_net] = gpio_index(site.y, site.x)
    return out


@dataclass(frozen=True)
class Divergence:
    phase: str
    cycle: int
    inputs: tuple[int, ...]
    expected: tuple[int, ...]
    observed: tuple[int, ...]


@dataclass(frozen=True)
class Verdict:
    equivalent: bool
    strategy: str
    vectors: int
    cycles: int
    divergence: Divergence | None = None

    def __str__(self):
        head = "PASS" if self.equivalent else "FAIL"
        text = f"{head} strategy={self.strategy} vectors={self.vectors} cycles={self.cycles}"
        if self.divergence:
            d = self.divergence
            bits = lambda t: "".join(map(str, t)) or "-"
            text += (f" first-divergence phase={d.phase} cycle={d.cycle} inputs={bits(d.inputs)} "
                     f"expected={bits(d.expected)} observed={bits(d.observed)}")
        return text


def _compare(fabric, ref, netlist, pads, vectors, phase):
    in_gpio = [pads[n] for n in netlist.data_inputs]
    out_gpio = [pads[n] for n in netlist.outputs]
    expected = ref.run(vectors)
    observed = fabric.run([dict(zip(in_gpio, v)) for v in vectors])
    for cyc, (e, o, v) in enumerate(zip(expected, observed, vectors)):
        got = tuple(o.get(g, 0) for g in out_gpio)
        if got != e:
            return Divergence(phase, cyc, tuple(v), e, got)
    return None


def equivalence_check(netlist: LogicNetlist, image: ConfigImage, arch: FabricArch | None,
                      pads: dict[str, int], strategy: str = "auto", vectors: int = 1000,
                      seed: int = 0, cycles: int = 64) -> Verdict:
    """Compare fabric and netlist cycle by cycle from reset.

    ``exhaustive`` walks all 2**n input vectors in order (n <= 12); ``random``
    uses ``vectors`` seeded random vectors.  Both are followed by an
    independent ``cycles``-long random sequential run from reset.
    """
    n = len(netlist.data_inputs)
    if strategy == "auto":
        strategy = "exhaustive" if n <= 12 else "random"
    fabric = configure(image, arch)
    ref = NetlistSimulator(netlist)
    rng = random.Random(seed)
    if strategy == "exhaustive":
        if n > 12:
            raise FabricError(f"exhaustive check limited to 12 inputs, design has {n}")
        sweep = [tuple((v >> i) & 1 for i in range(n)) for v in range(1 << n)]
    elif strategy == "random":
        sweep = [tuple(rng.getrandbits(1) for _ in range(n)) for _ in range(vectors)]
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    seq = [tuple(rng.getrandbits(1) for _ in range(n)) for _ in range(cycles)]
    div = _compare(fabric, ref, netlist, pads, sweep, strategy)
    if div is None:
        div = _compare(fabric, ref, netlist, pads, seq, "sequential")
    return Verdict(div is None, strategy, len(sweep), len(seq), div)


# --- vector files and waveforms ---------------------------------------------

def parse_vectors(text: str) -> list[tuple[str, str | None]]:
    """Lines ``<input bits> [-> <expected bits>]``; an empty input field is allowed."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            ins, exp = (s.strip() for s in line.split("->", 1))
        else:
            ins, exp = line, None
        for field_ in (ins, exp or ""):
            if any(ch not in "01" for ch in field_):
                raise FabricError(f"line {lineno}: vector fields must be 0/1 strings")
        rows.append((ins, exp))
    return rows


def write_vcd(names: list[str], samples: list[tuple[int, ...]], period: int = 10) -> str:
    ids = [chr(33 + i) if i < 94 else f"s{i}" for i in range(len(names))]
    lines = ["$timescale 1ns $end", "$scope module fabric $end"]
    lines += [f"$var wire 1 {i} {n} $end" for i, n in zip(ids, names)]
    lines += ["$upscope $end", "$enddefinitions $end"]
    prev = None
    for t, sample in enumerate(samples):
        changes = [f"{v}{i}" for k, (i, v) in enumerate(zip(ids, sample))
                   if prev is None or prev[k] != v]
        if changes:
            lines.append(f"#{t * period}")
            lines.extend(changes)
        prev = sample
    lines.append(f"#{len(samples) * period}")
    return "\n".join(lines) + "\n"

