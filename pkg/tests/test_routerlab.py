import pytest
from hypothesis import given, settings, strategies as st

from fpga130.arch import FabricArch, Topology
from fpga130.errors import FabricError
from fpga130.routerlab import (CLB_SITES, ExperimentConfig, NetRequest, PinRef, RouteRequest,
                               RoutingFailed, TrialResult, build_rr_graph, load_experiment_config,
                               min_channel_width, random_instance, results_csv, route, routable,
                               run_experiment, summarize, summary_table)
from fpga130.vtr import validate_routes

import oracles

OUT = 6


def _net(name, src, *sinks):
    return NetRequest(name, PinRef(*src, OUT), tuple(PinRef(*s) for s in sinks))


# --- graph construction ------------------------------------------------------------

def test_interior_sb_has_48_edges_disjoint():
    g = build_rr_graph(FabricArch(8, Topology.DISJOINT))
    interior = {rc: n for rc, n in g.sb_edges.items() if 3 <= rc[0] <= 15 and 3 <= rc[1] <= 15}
    assert interior and set(interior.values()) == {48}


@pytest.mark.parametrize("w", [1, 4, 8, 12])
def test_edge_set_matches_oracle(w):
    for topo in Topology:
        g = build_rr_graph(FabricArch(w, topo))
        succ = oracles.rr_neighbours(topo.value, w)
        chans = [n for n in g.nodes if n[0] in ("CHANX", "CHANY")]
        for n in chans:
            # the oracle covers CLB pins only; pad pins are checked through the fixtures
            got = {m for m in (g.nodes[i] for i in g.succ[g.index[n]])
                   if m[0] != "IPIN" or oracles.kind(m[2], m[1]) == "clb"}
            assert got == set(succ(n)), n


def test_sb_edges_symmetric():
    g = build_rr_graph(FabricArch(8, Topology.WILTON))
    edges = {e for e in g.edge_set() if e[0][0].startswith("CHAN") and e[1][0].startswith("CHAN")}
    assert all((b, a) in edges for a, b in edges)


def test_wilton_vs_disjoint_same_count_different_edges():
    gw = build_rr_graph(FabricArch(8, Topology.WILTON))
    gd = build_rr_graph(FabricArch(8, Topology.DISJOINT))
    assert gw.sb_edges == gd.sb_edges
    assert len(gw.edge_set()) == len(gd.edge_set())
    assert gw.edge_set() != gd.edge_set()


def test_disjoint_w2_embeds_in_w4():
    e2 = build_rr_graph(FabricArch(2, Topology.DISJOINT)).edge_set()
    e4 = build_rr_graph(FabricArch(4, Topology.DISJOINT)).edge_set()
    assert e2 <= e4
    low4 = {(a, b) for a, b in e4 if all(n[0] not in ("CHANX", "CHANY") or n[3] < 2 for n in (a, b))}
    assert low4 == e2


# --- routing ------------------------------------------------------------------------------

def test_channel_adjacent_net_is_shortest():
    arch = FabricArch(8, Topology.WILTON)
    forest = route(build_rr_graph(arch), RouteRequest([_net("n", (2, 2), (2, 4, 0))]))
    nodes = forest.net("n").nodes
    assert len(nodes) <= 6
    best = oracles.bfs_hops(("SOURCE", 2, 2, OUT), ("SINK", 4, 2, 0), oracles.rr_neighbours("wilton", 8))
    assert len(nodes) == best + 1 == 6
    validate_routes(forest, arch)


def test_w1_disjoint_shared_corridor_fails():
    # both sinks are pins 0-2 of CLB (2,4): the only way in is CHANX(4,1)
    nets = [_net("a", (2, 2), (2, 4, 0)), _net("b", (2, 6), (2, 4, 1))]
    succ = oracles.rr_neighbours("disjoint", 1)
    wires = [(k, x, y, 0) for k in ("CHANX", "CHANY") for x in range(19) for y in range(19)
             if oracles.is_chan(k, x, y)]
    feeders = [{w for w in wires if ("IPIN", 4, 2, pin) in succ(w)} for pin in (0, 1)]
    assert feeders[0] == feeders[1] == {("CHANX", 4, 1, 0)}  # one shared feeder: infeasible
    g = build_rr_graph(FabricArch(1, Topology.DISJOINT))
    with pytest.raises(RoutingFailed) as exc:
        route(g, RouteRequest(nets, max_iterations=10))
    assert ("CHANX", 4, 1, 0) in exc.value.congestion
    assert routable(Topology.DISJOINT, 2, nets)


def test_zero_net_request():
    assert len(route(build_rr_graph(FabricArch()), RouteRequest([]))) == 0


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(list(Topology)))
def test_routes_are_legal_and_deterministic(seed, topo):
    arch = FabricArch(8, topo)
    nets = random_instance(seed, 4, 10, 3, 4)
    a = route(build_rr_graph(arch), RouteRequest(nets, seed))
    b = route(build_rr_graph(arch), RouteRequest(nets, seed))
    assert a == b
    validate_routes(a, arch)
    for req, net in zip(nets, a):
        sinks = {(n.y, n.x, n.index) for n in net.nodes if n.kind == "SINK"}
        assert sinks == {(s.row, s.col, s.pin) for s in req.sinks}
        if topo is Topology.DISJOINT:
            # every wire-to-wire hop stays on its track; branches may leave OPIN on different ones
            hops = [(u, v) for u, v in net.edges() if u.is_channel and v.is_channel]
            assert all(u.index == v.index for u, v in hops)


def test_random_instances_are_seeded_and_bounded():
    assert random_instance(3) == random_instance(3)
    assert random_instance(3) != random_instance(4)
    for seed in range(20):
        nets = random_instance(seed, 10, 30, 5, 8)
        assert 1 <= len(nets) <= 30
        for net in nets:
            assert (net.source.row, net.source.col) in CLB_SITES
            assert 1 <= len(net.sinks) <= 5
            for s in net.sinks:
                assert (abs(s.row - net.source.row) + abs(s.col - net.source.col)) // 2 <= 8
        taken = [(s.row, s.col, s.pin) for n in nets for s in n.sinks]
        assert len(taken) == len(set(taken))


# --- channel width -------------------------------------------------------------------------

def test_two_terminal_net_needs_one_track():
    for topo in Topology:
        assert min_channel_width(topo, [[_net("n", (6, 6), (8, 10, 4))]]) == [1]


def test_min_width_is_least_routable():
    nets = random_instance(11, 10, 14, 3, 4)
    (w,) = min_channel_width(Topology.WILTON, [nets])
    assert routable(Topology.WILTON, w, nets)
    if w > 1:
        assert not routable(Topology.WILTON, w - 1, nets)


def test_experiment_config_and_reports():
    cfg = load_experiment_config("# small\ntopologies = disjoint, wilton\nseeds = 0-2, 7\n"
                                 "w_min = 1\nw_max = 12\nnets_min = 3\nnets_max = 6\n")
    assert cfg.topologies == (Topology.DISJOINT, Topology.WILTON)
    assert cfg.seeds == (0, 1, 2, 7) and cfg.nets_max == 6 and cfg.max_fanout == 5
    results = run_experiment(cfg)
    assert len(results) == 8
    assert results == run_experiment(cfg)
    text = results_csv(results)
    assert text.splitlines()[0] == "topology,seed,nets,W_min"
    assert text.splitlines()[1].startswith("disjoint,0,")
    summary = summarize(results)
    assert set(summary) == {"disjoint", "wilton"}
    assert sum(summary["wilton"]["histogram"].values()) == 4
    assert "wilton_reduction_pct" in summary["disjoint"]
    assert summary_table(summary).startswith("topology")


def test_unroutable_excluded_from_aggregates():
    results = [TrialResult(Topology.WILTON, 0, 5, None), TrialResult(Topology.WILTON, 1, 5, 3),
               TrialResult(Topology.DISJOINT, 0, 5, 4), TrialResult(Topology.DISJOINT, 1, 5, 4)]
    s = summarize(results)
    assert s["wilton"]["unroutable"] == 1 and s["wilton"]["mean"] == 3
    assert s["disjoint"]["wilton_reduction_pct"]["mean"] == 25.0
    assert ",1,5,\n" not in results_csv(results) and "wilton,0,5,\n" in results_csv(results)


@pytest.mark.parametrize("text", ["w_min = 0\n", "w_max = 13\n", "colour = red\n", "seeds\n",
                                  "topologies = mesh\n"])
def test_bad_experiment_config(text):
    with pytest.raises(FabricError):
        load_experiment_config(text)


def test_default_config():
    cfg = ExperimentConfig()
    assert cfg.seeds == tuple(range(100)) and (cfg.nets_min, cfg.nets_max) == (10, 30)
