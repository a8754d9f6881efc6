"""Routing-resource graph, negotiated-congestion router and channel-width experiments."""

from __future__ import annotations

import csv
import heapq
import io
import logging
import random
import statistics
from dataclasses import dataclass, field

import numpy as np

from .arch import (CLB_OUTPUT_PIN, IO_PIN, LUT_INPUTS, MAX_CHANNEL_WIDTH, BlockKind, FabricArch,
                   Side, Topology, all_blocks, block_kind_at, cb_connections, cb_served_clb,
                   io_segment, sb_connections, sb_side_segment, segment_at_block)
from .errors import FabricError, RouteError
from .vtr import LogicNetlist, PackedNetlist, Placement, RouteForest, RoutedNet, RouteNode

log = logging.getLogger(__name__)

INF = float("inf")


@dataclass
class RRGraph:
    arch: FabricArch
    nodes: list = field(default_factory=list)   # (kind, x, y, index)
    index: dict = field(default_factory=dict)   # node -> id
    succ: list = field(default_factory=list)    # id -> [id]
    sb_edges: dict = field(default_factory=dict)  # (r, c) -> undirected switch count
    heuristics: dict = field(default_factory=dict, repr=False)  # (x, y) -> per-node estimate

    def add_node(self, key) -> int:
        nid = len(self.nodes)
        self.nodes.append(key)
        self.index[key] = nid
        self.succ.append([])
        return nid

    def add_edge(self, a, b) -> None:
        self.succ[self.index[a]].append(self.index[b])

    def edge_set(self) -> set[tuple]:
        return {(self.nodes[a], self.nodes[b]) for a, outs in enumerate(self.succ) for b in outs}

    def __len__(self):
        return len(self.nodes)


def _chan(seg, t):
    return (seg[0], seg[1], seg[2], t)


def build_rr_graph(arch: FabricArch) -> RRGraph:
    g = RRGraph(arch)
    width = arch.channel_width
    for row, col, kind in all_blocks():
        if kind is BlockKind.CLB:
            g.add_node(("SOURCE", col, row, CLB_OUTPUT_PIN))
            g.add_node(("OPIN", col, row, CLB_OUTPUT_PIN))
            for p in range(LUT_INPUTS):
                g.add_node(("IPIN", col, row, p))
            for p in range(LUT_INPUTS):
                g.add_node(("SINK", col, row, p))
        elif kind is BlockKind.IO:
            for k in ("SOURCE", "OPIN", "IPIN", "SINK"):
                g.add_node((k, col, row, IO_PIN))
        elif kind in (BlockKind.HCONN, BlockKind.VCONN):
            seg = segment_at_block(row, col)
            for t in range(width):
                g.add_node(_chan(seg, t))

    for row, col, kind in all_blocks():
        if kind is BlockKind.CLB:
            g.add_edge(("SOURCE", col, row, CLB_OUTPUT_PIN), ("OPIN", col, row, CLB_OUTPUT_PIN))
            for p in range(LUT_INPUTS):
                g.add_edge(("IPIN", col, row, p), ("SINK", col, row, p))
        elif kind is BlockKind.IO:
            g.add_edge(("SOURCE", col, row, IO_PIN), ("OPIN", col, row, IO_PIN))
            g.add_edge(("IPIN", col, row, IO_PIN), ("SINK", col, row, IO_PIN))
            seg = io_segment(row, col)
            for t in range(width):
                g.add_edge(("OPIN", col, row, IO_PIN), _chan(seg, t))
                g.add_edge(_chan(seg, t), ("IPIN", col, row, IO_PIN))
        elif kind in (BlockKind.HCONN, BlockKind.VCONN):
            clb = cb_served_clb(row, col)
            if clb is None:
                continue
            seg = segment_at_block(row, col)
            cr, cc = clb
            for pin, t, _ in cb_connections(arch, row, col):
                if pin == CLB_OUTPUT_PIN:
                    g.add_edge(("OPIN", cc, cr, CLB_OUTPUT_PIN), _chan(seg, t))
                else:
                    g.add_edge(_chan(seg, t), ("IPIN", cc, cr, pin))
        elif kind is BlockKind.SWITCH:
            count = 0
            for side in Side:
                seg = sb_side_segment(row, col, side)
                if seg is None:
                    continue
                for t in range(width):
                    for other, t2 in sorted(sb_connections(arch.topology, side, t, width),
                                            key=lambda st: (st[0].value, st[1])):
                        seg2 = sb_side_segment(row, col, other)
                        if seg2 is not None:
                            g.add_edge(_chan(seg, t), _chan(seg2, t2))
                            count += 1
            g.sb_edges[(row, col)] = count // 2
    return g


# --- routing ----------------------------------------------------------------

@dataclass(frozen=True)
class PinRef:
    row: int
    col: int
    pin: int


@dataclass(frozen=True)
class NetRequest:
    name: str
    source: PinRef
    sinks: tuple[PinRef, ...]


@dataclass
class RouteRequest:
    nets: list[NetRequest]
    seed: int = 0
    max_iterations: int = 50
    stall_iterations: int = 12


class RoutingFailed(RouteError):
    def __init__(self, message, congestion=None, iteration=None):
        super().__init__(message)
        self.congestion = congestion or {}
        self.iteration = iteration


def _terminal(graph, kind, ref: PinRef) -> int:
    pin = ref.pin
    if block_kind_at(ref.row, ref.col) is BlockKind.IO:
        pin = IO_PIN
    key = (kind, ref.col, ref.row, pin)
    if key not in graph.index:
        raise RouteError(f"no {kind} node for pin {ref}")
    return graph.index[key]


def _heuristic(graph: RRGraph, tx: int, ty: int) -> list[float]:
    h = graph.heuristics.get((tx, ty))
    if h is None:
        xy = np.array([k[1:3] for k in graph.nodes])
        h = ((np.abs(xy[:, 0] - tx) + np.abs(xy[:, 1] - ty)) * 0.5).tolist()
        graph.heuristics[(tx, ty)] = h
    return h


def route(graph: RRGraph, request: RouteRequest) -> RouteForest:
    """Pathfinder-style rip-up and re-route until no node is over capacity."""
    nodes = graph.nodes
    succ = graph.succ
    n_nodes = len(nodes)
    kinds = [k[0] for k in nodes]
    xs = [k[1] for k in nodes]
    ys = [k[2] for k in nodes]
    if not request.nets:
        return RouteForest(())

    nets = []
    used_terms = set()
    for net in request.nets:
        src = _terminal(graph, "SOURCE", net.source)
        sinks = [_terminal(graph, "SINK", s) for s in net.sinks]
        for t in [src, *sinks]:
            if t in used_terms:
                raise RouteError(f"terminal {nodes[t]} requested twice")
            used_terms.add(t)
        if not sinks:
            raise RouteError(f"net {net.name!r} has no sinks")
        nets.append((net.name, src, sinks))
    order = list(range(len(nets)))
    random.Random(request.seed).shuffle(order)

    occ = [0] * n_nodes
    hist = [0.0] * n_nodes
    pres_fac = 0.5
    trees: dict[int, dict[int, int]] = {}
    best_over, stall = None, 0
    # pins and sinks may only be entered when they are the current target
    blocked = [k in ("IPIN", "SINK") for k in kinds]
    ipin_of_sink = {}
    heur = {}
    for name, src, sinks in nets:
        for s in sinks:
            ipin_of_sink[s] = graph.index[("IPIN", *nodes[s][1:])]
            # A*: every hop costs >= 1 and moves at most 2 grid units
            heur[s] = _heuristic(graph, xs[s], ys[s])
    dist = [INF] * n_nodes
    prev = [-1] * n_nodes
    heappush, heappop = heapq.heappush, heapq.heappop
    dirty = set(range(len(nets)))

    for iteration in range(1, request.max_iterations + 1):
        cost = [(1.0 + hist[v]) * (1.0 + pres_fac * occ[v]) for v in range(n_nodes)]
        step = [(1.0 + hist[v]) * pres_fac for v in range(n_nodes)]
        for ni in order:
            if ni not in dirty:
                continue
            name, src, sinks = nets[ni]
            if ni in trees:
                for n in trees[ni]:
                    occ[n] -= 1
                    cost[n] -= step[n]
            parent = {src: -1}
            for sink in sinks:
                target_ipin = ipin_of_sink[sink]
                h = heur[sink]
                touched = list(parent)
                for n in touched:
                    dist[n] = 0.0
                heap = [(h[n], 0.0, n) for n in sorted(parent)]
                heapq.heapify(heap)
                blocked[target_ipin] = blocked[sink] = False
                found = False
                while heap:
                    _, d, u = heappop(heap)
                    if d > dist[u]:
                        continue
                    if u == sink:
                        found = True
                        break
                    for v in succ[u]:
                        if blocked[v]:
                            continue
                        nd = d + cost[v]
                        if nd < dist[v]:
                            if dist[v] == INF:
                                touched.append(v)
                            dist[v] = nd
                            prev[v] = u
                            heappush(heap, (nd + h[v], nd, v))
                blocked[target_ipin] = blocked[sink] = True
                if found:
                    v = sink
                    while v not in parent:
                        parent[v] = prev[v]
                        v = prev[v]
                for n in touched:
                    dist[n] = INF
                if not found:
                    raise RoutingFailed(f"net {name!r}: sink {nodes[sink]} unreachable",
                                        iteration=iteration)
            trees[ni] = parent
            for n in parent:
                occ[n] += 1
                cost[n] += step[n]

        overused = [n for n in range(n_nodes) if occ[n] > 1]
        log.debug("iteration %d: %d overused nodes", iteration, len(overused))
        if not overused:
            return _forest(graph, nets, trees)
        if best_over is None or len(overused) < best_over:
            best_over, stall = len(overused), 0
        else:
            stall += 1
            if stall >= request.stall_iterations:
                break
        for n in overused:
            hist[n] += occ[n] - 1
        pres_fac *= 1.6
        # only nets sitting on an overused node are ripped up
        hot = set(overused)
        dirty = {ni for ni, tree in trees.items() if not hot.isdisjoint(tree)}
    congestion = {nodes[n]: occ[n] for n in range(n_nodes) if occ[n] > 1}
    raise RoutingFailed(f"routing did not converge: {len(congestion)} overused nodes",
                        congestion, iteration)


def _forest(graph, nets, trees) -> RouteForest:
    out = []
    for ni, (name, src, _) in enumerate(nets):
        parent = trees[ni]
        children: dict[int, list[int]] = {}
        for child, par in parent.items():
            if par >= 0:
                children.setdefault(par, []).append(child)
        seq: list[int] = []
        stack = [(src, False)]
        # iterative pre-order walk; a node is re-emitted before each extra branch
        while stack:
            node, restart = stack.pop()
            seq.append(node)
            if restart:
                continue
            kids = sorted(children.get(node, []))
            for i in range(len(kids) - 1, -1, -1):
                stack.append((kids[i], False))
                if i > 0:
                    stack.append((node, True))
        nodes = []
        for nid in seq:
            kind, x, y, idx = graph.nodes[nid]
            nodes.append(RouteNode(kind, x, y, idx, nid))
        out.append(RoutedNet(ni, name, tuple(nodes)))
    return RouteForest(tuple(out))


# --- designs ----------------------------------------------------------------

def design_request(netlist: LogicNetlist, packed: PackedNetlist, placement: Placement,
                   seed: int = 0, max_iterations: int = 50) -> RouteRequest:
    sites = placement.as_dict()
    sources, sinks = {}, {}
    for b in packed.blocks:
        site = sites[b.name]
        out = b.output_net()
        if out is not None:
            pin = CLB_OUTPUT_PIN if b.kind == "clb" else IO_PIN
            sources[out] = PinRef(site.y, site.x, pin)
        if b.kind == "clb":
            for net, pin in b.pins:
                sinks.setdefault(net, []).append(PinRef(site.y, site.x, pin))
        elif b.kind == "outpad":
            sinks.setdefault(b.pad_net, []).append(PinRef(site.y, site.x, IO_PIN))
    order = [n for n in netlist.nets if n in sinks]
    missing = [n for n in order if n not in sources]
    if missing:
        raise RouteError(f"nets without a placed driver: {', '.join(missing)}")
    nets = [NetRequest(n, sources[n], tuple(sorted(sinks[n], key=lambda p: (p.row, p.col, p.pin))))
            for n in order]
    return RouteRequest(nets, seed, max_iterations)


def route_design(arch: FabricArch, netlist: LogicNetlist, packed: PackedNetlist,
                 placement: Placement, seed: int = 0) -> RouteForest:
    return route(build_rr_graph(arch), design_request(netlist, packed, placement, seed))


# --- channel-width experiments ----------------------------------------------

CLB_SITES = tuple((r, c) for r in range(2, 17, 2) for c in range(2, 17, 2))


def random_instance(seed: int, nets_min: int = 10, nets_max: int = 30, max_fanout: int = 3,
                    manhattan: int = 3) -> list[NetRequest]:
    """Random CLB-to-CLB nets; sinks lie within ``manhattan`` CLB pitches of the source."""
    rng = random.Random(seed)
    n = rng.randint(nets_min, nets_max)
    sources = rng.sample(CLB_SITES, n)
    free = {site: list(range(LUT_INPUTS)) for site in CLB_SITES}
    nets = []
    for i, (r, c) in enumerate(sources):
        near = [s for s in CLB_SITES if s != (r, c) and free[s]
                and (abs(s[0] - r) + abs(s[1] - c)) // 2 <= manhattan]
        k = min(rng.randint(1, max_fanout), len(near))
        sinks = []
        for s in rng.sample(near, k):
            pin = rng.choice(free[s])
            free[s].remove(pin)
            sinks.append(PinRef(s[0], s[1], pin))
        if sinks:
            nets.append(NetRequest(f"n{i}", PinRef(r, c, CLB_OUTPUT_PIN), tuple(sinks)))
    return nets


def routable(topology: Topology, width: int, nets, seed: int = 0,
             max_iterations: int = 40, graphs: dict | None = None) -> bool:
    key = (topology, width)
    if graphs is not None and key in graphs:
        graph = graphs[key]
    else:
        graph = build_rr_graph(FabricArch(width, topology))
        if graphs is not None:
            graphs[key] = graph
    try:
        route(graph, RouteRequest(list(nets), seed, max_iterations))
    except RoutingFailed:
        return False
    return True


def min_channel_width(topology: Topology, instances, seed: int = 0, w_min: int = 1,
                      w_max: int = MAX_CHANNEL_WIDTH, graphs: dict | None = None) -> list:
    """Least routable W per instance (binary search), or None when W=w_max fails."""
    graphs = {} if graphs is None else graphs
    out = []
    for nets in instances:
        lo, hi = w_min, w_max
        while lo < hi:
            mid = (lo + hi) // 2
            if routable(topology, mid, nets, seed, graphs=graphs):
                hi = mid
            else:
                lo = mid + 1
        if lo == w_max and not routable(topology, w_max, nets, seed, graphs=graphs):
            out.append(None)
        else:
            out.append(lo)
    return out


@dataclass
class ExperimentConfig:
    topologies: tuple = (Topology.DISJOINT, Topology.UNIVERSAL, Topology.WILTON)
    w_min: int = 1
    w_max: int = MAX_CHANNEL_WIDTH
    seeds: tuple = tuple(range(100))
    nets_min: int = 10
    nets_max: int = 30
    max_fanout: int = 5
    manhattan: int = 8


def _parse_seeds(text: str) -> tuple[int, ...]:
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        elif part:
            seeds.append(int(part))
    return tuple(seeds)


def load_experiment_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FabricError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "topologies":
            cfg.topologies = tuple(Topology.parse(t) for t in value.split(","))
        elif key == "seeds":
            cfg.seeds = _parse_seeds(value)
        elif key in ("w_min", "w_max", "nets_min", "nets_max", "max_fanout", "manhattan"):
            setattr(cfg, key, int(value))
        else:
            raise FabricError(f"line {lineno}: unknown experiment key {key!r}")
    if not 1 <= cfg.w_min <= cfg.w_max <= MAX_CHANNEL_WIDTH:
        raise FabricError(f"W range {cfg.w_min}-{cfg.w_max} outside 1-{MAX_CHANNEL_WIDTH}")
    return cfg


@dataclass(frozen=True)
class TrialResult:
    topology: Topology
    seed: int
    nets: int
    w_min: int | None


def run_experiment(cfg: ExperimentConfig, seed: int = 0) -> list[TrialResult]:
    instances = {s: random_instance(s, cfg.nets_min, cfg.nets_max, cfg.max_fanout, cfg.manhattan)
                 for s in cfg.seeds}
    results = []
    for topo in cfg.topologies:
        graphs: dict = {}
        for s in cfg.seeds:
            (w,) = min_channel_width(topo, [instances[s]], seed, cfg.w_min, cfg.w_max, graphs)
            results.append(TrialResult(topo, s, len(instances[s]), w))
    return results


def results_csv(results: list[TrialResult]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["topology", "seed", "nets", "W_min"])
    for r in results:
        w.writerow([r.topology.value, r.seed, r.nets, "" if r.w_min is None else r.w_min])
    return out.getvalue()


def summarize(results: list[TrialResult]) -> dict:
    """Per-topology mean/histogram plus Wilton's per-instance reduction versus each other topology."""
    by_topo: dict = {}
    for r in results:
        by_topo.setdefault(r.topology, {})[r.seed] = r.w_min
    summary = {}
    for topo, per_seed in by_topo.items():
        ok = [w for w in per_seed.values() if w is not None]
        hist: dict = {}
        for w in ok:
            hist[w] = hist.get(w, 0) + 1
        summary[topo.value] = {
            "instances": len(per_seed),
            "unroutable": len(per_seed) - len(ok),
            "mean": statistics.fmean(ok) if ok else float("nan"),
            "histogram": dict(sorted(hist.items())),
        }
    wil = by_topo.get(Topology.WILTON)
    if wil:
        for topo, per_seed in by_topo.items():
            if topo is Topology.WILTON:
                continue
            reductions = [100.0 * (per_seed[s] - wil[s]) / per_seed[s] for s in per_seed
                          if per_seed[s] is not None and wil.get(s) is not None]
            summary[topo.value]["wilton_reduction_pct"] = {
                "mean": statistics.fmean(reductions) if reductions else float("nan"),
                "max": max(reductions) if reductions else float("nan"),
                "min": min(reductions) if reductions else float("nan"),
            }
    return summary


def summary_table(summary: dict) -> str:
    lines = ["topology   instances  unroutable  mean_W_min  histogram"]
    for topo, s in summary.items():
        hist = " ".join(f"{w}:{n}" for w, n in s["histogram"].items())
        lines.append(f"{topo:<10} {s['instances']:>9}  {s['unroutable']:>10}  "
                     f"{s['mean']:>10.3f}  {hist}")
    for topo, s in summary.items():
        red = s.get("wilton_reduction_pct")
        if red:
            lines.append(f"wilton vs {topo}: reduction % mean={red['mean']:.2f} "
                         f"min={red['min']:.2f} max={red['max']:.2f}")
    return "\n".join(lines) + "\n"
