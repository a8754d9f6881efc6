import itertools

import pytest
from hypothesis import given, settings, strategies as st

from fpga130.arch import FabricArch, Topology, block_kind_at, BlockKind
from fpga130.errors import NetlistError, ParseError, PlacementError, RouteError
from fpga130.vtr import (Latch, LogicNetlist, Lut, PackedBlock, PackedNetlist, Placement, RouteForest,
                         RouteNode, Site, adjacent, parse_blif, parse_net, parse_place,
                         parse_route, validate_packing, validate_placement, write_blif, write_net,
                         write_place, write_route)
from fpga130.vtr.blif import expand_cover

import oracles

HDR = "Array size: 19 x 19 logic blocks\n"


# --- BLIF ---------------------------------------------------------------------

def test_and2_example():
    n = parse_blif(".model m\n.inputs a b\n.outputs y\n.names a b y\n11 1\n.end")
    assert len(n.luts) == 1
    lut = n.luts[0]
    for a, b in itertools.product((0, 1), repeat=2):
        assert lut.evaluate((a, b)) == (a & b)


def test_constant_cover():
    n = parse_blif(".model m\n.outputs y\n.names y\n1\n.end\n")
    assert n.luts[0].table == (1 << 64) - 1
    n0 = parse_blif(".model m\n.outputs y\n.names y\n.end\n")
    assert n0.luts[0].table == 0


def test_counter_fixture_counts():
    text = oracles.fixture_texts("counter4")[0]
    n = parse_blif(text, "counter4.blif")
    assert len(n.luts) == 4 and len(n.latches) == 4
    assert text.count(".names") == 4 and text.count(".latch") == 4
    assert n.clocks == ("clk",) and n.data_inputs == ()


def test_continuation_and_comments():
    n = parse_blif(".model m # trailing\n.inputs a \\\n  b\n.outputs y\n.names a b y\n1- 1\n-1 1\n")
    assert n.inputs == ("a", "b")
    assert n.luts[0].table & 0xF == 0b1110


@pytest.mark.parametrize("text,line", [
    (".model m\n.inputs a\n.outputs y\n.names a y\n1 0\n", 5),
    (".model m\n.inputs a\n.outputs y\n.names a y\n12 1\n", 5),
    (".model m\n.inputs a\n.outputs y\n.names a y\n2 1\n", 5),
    (".model m\n.inputs a\n.outputs y\n.latch a y fe clk 0\n", 4),
    (".model m\n.gate foo\n", 2),
    (".model m\n.model n\n", 2),
    (".inputs a\n", 1),
    (".model m\n.inputs a b c d e f g\n.outputs y\n.names a b c d e f g y\n1111111 1\n", 4),
])
def test_blif_errors_carry_location(text, line):
    with pytest.raises(ParseError) as exc:
        parse_blif(text, "x.blif")
    assert exc.value.line == line
    assert "x.blif" in str(exc.value)


def test_blif_semantic_errors():
    with pytest.raises(NetlistError):
        parse_blif(".model m\n.inputs a\n.outputs y\n.names a y\n1 1\n.names a y\n0 1\n")
    with pytest.raises(NetlistError):
        parse_blif(".model m\n.outputs y\n.names b y\n1 1\n")
    with pytest.raises(NetlistError):
        parse_blif(".model m\n.inputs a\n.outputs z\n")


cube = st.text(alphabet="01-", min_size=0, max_size=6)


@given(st.integers(0, 6).flatmap(
    lambda k: st.tuples(st.just(k), st.lists(st.text(alphabet="01-", min_size=k, max_size=k),
                                             max_size=8))))
def test_cover_expansion_matches_cube_matching(arg):
    k, cubes = arg
    table = expand_cover(cubes, k)
    for v in range(64):
        bits = [(v >> i) & 1 for i in range(k)]
        assert (table >> v) & 1 == oracles.cube_eval([(c, "1") for c in cubes], bits)


@st.composite
def netlists(draw):
    n_in = draw(st.integers(1, 4))
    inputs = [f"i{k}" for k in range(n_in)]
    avail = list(inputs)
    luts, latches = [], []
    for k in range(draw(st.integers(0, 5))):
        arity = draw(st.integers(0, min(6, len(avail))))
        ins = tuple(draw(st.permutations(avail))[:arity])
        mask = (1 << (1 << arity)) - 1
        base = draw(st.integers(0, mask))
        table = 0
        for v in range(64):
            if (base >> (v & ((1 << arity) - 1))) & 1:
                table |= 1 << v
        luts.append(Lut(f"n{k}", ins, table))
        avail.append(f"n{k}")
        if draw(st.booleans()):
            latches.append(Latch(f"n{k}", f"q{k}", "clk", 0))
            avail.append(f"q{k}")
    outs = tuple(draw(st.lists(st.sampled_from(avail), min_size=1, max_size=3, unique=True)))
    ins = tuple(inputs) + (("clk",) if latches else ())
    return LogicNetlist("rt", ins, outs, tuple(luts), tuple(latches))


@settings(max_examples=60)
@given(netlists())
def test_blif_round_trip(netlist):
    text = write_blif(netlist)
    again = parse_blif(text)
    assert again == netlist
    assert write_blif(again) == text


# --- packed netlists ------------------------------------------------------------

def test_net_examples():
    p = parse_net("block clb_0 at_clb\n  lut y pins a:0,b:1\n")
    assert p.blocks[0].pin_map == {"a": 0, "b": 1}
    with pytest.raises(NetlistError):
        parse_net("block clb_0 at_clb\n  lut y pins a:0,b:0\n")
    with pytest.raises(NetlistError):
        parse_net("block clb_0 at_clb\n  lut y pins a:7\n")
    with pytest.raises(ParseError):
        parse_net("block clb_0 at_clb\n  lut y pins a-7\n")
    with pytest.raises(NetlistError):
        parse_net("block c at_clb\n  lut y\n  lut z\n")
    with pytest.raises(NetlistError):
        parse_net("block c at_clb\n  lut y\nblock c at_clb\n  lut z\n")


def test_counter_packing_cross_check():
    blif, net, _, _ = oracles.fixture_texts("counter4")
    n, p = parse_blif(blif), parse_net(net)
    assert len(p.clbs) == 4 == len(n.luts)
    assert all(b.lut and b.latch for b in p.clbs)
    validate_packing(n, p)


def test_packing_violations():
    n = parse_blif(oracles.fixture_texts("counter4")[0])
    good = parse_net(oracles.fixture_texts("counter4")[1])
    missing = PackedNetlist(tuple(b for b in good.blocks if b.name != "clb_q3"))
    with pytest.raises(NetlistError):
        validate_packing(n, missing)
    wrong_pins = PackedNetlist(tuple(
        PackedBlock(b.name, b.kind, b.lut, b.latch, (("q0", 0),), b.pad_net) if b.name == "clb_q1" else b
        for b in good.blocks))
    with pytest.raises(NetlistError):
        validate_packing(n, wrong_pins)
    # LUT output read outside the CLB while the block exposes the latch
    n2 = parse_blif(".model m\n.inputs clk a\n.outputs q d\n.names a d\n1 1\n.latch d q re clk 0\n")
    p2 = parse_net("block c at_clb\n  lut d pins a:0\n  latch q\nblock i at_io\n  inpad a\n"
                   "block o at_io\n  outpad q\nblock o2 at_io\n  outpad d\n")
    with pytest.raises(NetlistError):
        validate_packing(n2, p2)


@given(st.lists(st.tuples(st.text("abcxyz", min_size=1, max_size=4), st.integers(0, 5)),
                min_size=1, max_size=6, unique_by=(lambda t: t[0], lambda t: t[1])))
def test_net_round_trip(pins):
    p = PackedNetlist((PackedBlock("c0", "clb", "y", "q", tuple(pins)),
                       PackedBlock("c1", "clb", None, "r", (("y", 2),)),
                       PackedBlock("i0", "inpad", pad_net="a"),
                       PackedBlock("o0", "outpad", pad_net="q")))
    assert parse_net(write_net(p)) == p


# --- placements ------------------------------------------------------------------

def test_place_examples():
    p = parse_place(HDR + "clb_0 2 2 0 #0\n")
    assert p["clb_0"] == Site(2, 2, 0)
    with pytest.raises(PlacementError):
        parse_place(HDR + "a 2 2 0\nb 2 2 0\n")
    with pytest.raises(PlacementError):
        parse_place(HDR + "a 1 1 0\n")
    with pytest.raises(PlacementError):
        parse_place("Array size: 20 x 20 logic blocks\n")
    with pytest.raises(ParseError):
        parse_place("a 2 2 0\n")


def test_counter_placement_sites_are_legal():
    _, net, place, _ = oracles.fixture_texts("counter4")
    p = parse_place(place)
    packed = parse_net(net)
    validate_placement(packed, p)
    clbs = [p[b.name] for b in packed.clbs]
    assert len({(s.x, s.y) for s in clbs}) == 4
    assert all(oracles.kind(s.y, s.x) == "clb" for s in clbs)


legal_sites = [(c, r) for r in range(19) for c in range(19)
               if block_kind_at(r, c) in (BlockKind.CLB, BlockKind.IO)]


@given(st.lists(st.sampled_from(legal_sites), unique=True, max_size=12))
def test_place_round_trip(sites):
    p = Placement(tuple((f"b{i}", Site(x, y, 0)) for i, (x, y) in enumerate(sites)))
    assert parse_place(write_place(p)) == p


# --- routes -----------------------------------------------------------------------

def _node(kind, x, y, i):
    return RouteNode(kind, x, y, i)


def test_five_node_route():
    text = ("Net 0 (a)\n\nNode: 1 SOURCE (2,2) Class: 6\nNode: 2 OPIN (2,2) Pin: 6\n"
            "Node: 3 CHANX (2,1) Track: 0\nNode: 4 CHANX (4,1) Track: 0\n"
            "Node: 5 IPIN (4,2) Pin: 0\nNode: 6 SINK (4,2) Class: 0\n")
    forest = parse_route(text)
    assert len(forest.net("a").nodes) == 6
    # direct hop into a horizontally adjacent CLB through its left VCB: 5 nodes
    text5 = ("Net 0 (a)\nNode: 1 SOURCE (2,2) Class: 6\nNode: 2 OPIN (2,2) Pin: 6\n"
             "Node: 3 CHANY (1,2) Track: 0\nNode: 5 IPIN (2,2) Pin: 3\nNode: 6 SINK (2,2) Class: 3\n")
    assert len(parse_route(text5).nets[0].nodes) == 5


def test_empty_route():
    assert parse_route("") == RouteForest(())


def test_track_conflict():
    text = ("Net 0 (a)\nNode: 1 SOURCE (2,2) Class: 6\nNode: 2 OPIN (2,2) Pin: 6\n"
            "Node: 3 CHANX (2,1) Track: 3\nNode: 5 IPIN (2,2) Pin: 0\nNode: 6 SINK (2,2) Class: 0\n"
            "Net 1 (b)\nNode: 1 SOURCE (2,0) Class: 0\nNode: 2 OPIN (2,0) Pin: 0\n"
            "Node: 3 CHANX (2,1) Track: 3\nNode: 5 IPIN (2,2) Pin: 1\nNode: 6 SINK (2,2) Class: 1\n")
    with pytest.raises(RouteError, match="both occupy"):
        parse_route(text)


@pytest.mark.parametrize("bad", [
    "Node: 3 CHANX (2,1) Track: 8",          # track beyond W
    "Node: 3 CHANX (3,1) Track: 0",          # no segment there
    "Node: 3 CHANY (3,1) Track: 0",          # switch block, not a CB
    "Node: 3 CHANX (4,3) Track: 0",          # not adjacent to the OPIN
])
def test_route_structural_errors(bad):
    text = ("Net 0 (a)\nNode: 1 SOURCE (2,2) Class: 6\nNode: 2 OPIN (2,2) Pin: 6\n"
            f"{bad}\nNode: 5 IPIN (2,2) Pin: 0\nNode: 6 SINK (2,2) Class: 0\n")
    with pytest.raises(RouteError):
        parse_route(text)


def test_route_parse_errors():
    with pytest.raises(ParseError):
        parse_route("Node: 1 SOURCE (2,2) Class: 6\n")
    with pytest.raises(ParseError):
        parse_route("Net 0 (a)\nNode: 1 SOURCE (2,2) Pin: 6\n")
    with pytest.raises(ParseError):
        parse_route("Net 0 (a)\nrubbish\n")


def _neighbours(arch):
    """Brute-force adjacency from the validator's geometric predicate."""
    cands = []
    for r in range(19):
        for c in range(19):
            k = oracles.kind(r, c)
            if k == "hcb":
                cands += [_node("CHANX", c, r, t) for t in range(arch.channel_width)]
            elif k == "vcb":
                cands += [_node("CHANY", c, r, t) for t in range(arch.channel_width)]
            elif k == "clb":
                cands += [_node("IPIN", c, r, p) for p in range(6)]
    return cands


def test_adjacency_matches_tile_description():
    arch = FabricArch(4, Topology.WILTON)
    cands = _neighbours(arch)
    a = _node("CHANX", 4, 3, 1)
    got = {(n.kind, n.x, n.y, n.index) for n in cands if adjacent(a, n, arch)}
    # taps: pins 0-2 of the CLB below; switches at SB (3,3) E-side and SB (3,5) W-side
    want = {("IPIN", 4, 4, p) for p in range(3)}
    for r, c, side in oracles.seg_sbs("CHANX", 4, 3):
        for s2, t2 in oracles.sb_endpoints("wilton", side, 1, 4):
            dr, dc = {"N": (-1, 0), "S": (1, 0), "W": (0, -1), "E": (0, 1)}[s2]
            kind = "CHANY" if s2 in "NS" else "CHANX"
            want.add((kind, c + dc, r + dr, t2))
    assert got == want


def test_route_round_trip_fixtures():
    for name in ("counter4", "sensor64", "and2", "buffer"):
        text = oracles.fixture_texts(name)[3]
        forest = parse_route(text)
        assert write_route(forest) == text
        assert parse_route(write_route(forest)) == forest


def test_routed_net_edges_skip_restarts():
    forest = parse_route(oracles.fixture_texts("counter4")[3])
    q0 = forest.net("q0")
    for a, b in q0.edges():
        assert a.kind != "SINK"
        assert adjacent(a, b, FabricArch())
    assert len(q0.sinks()) == 5  # four CLBs plus the outpad
