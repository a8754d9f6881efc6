import json
import os
from pathlib import Path

import pytest

from fpga130.bitstream import ConfigImage, deserialize, serialize
from fpga130.cli import EXIT_INPUT, EXIT_OK, EXIT_VERIFY, main
from fpga130.flow import fixture_paths

import oracles

GOLDEN = Path(__file__).parent / "golden"
UPDATE = os.environ.get("FPGA130_UPDATE_GOLDEN") == "1"
COUNTER = [str(p) for p in fixture_paths(oracles.FIXTURES / "counter4")]
SENSOR = [str(p) for p in fixture_paths(oracles.FIXTURES / "sensor64")]
VECTORS = str(oracles.FIXTURES / "counter4" / "counter4.vec")
SMALL_LAB = "topologies = disjoint, universal, wilton\nseeds = 0-3\nnets_min = 4\nnets_max = 8\n"


@pytest.fixture
def run(capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)

    def _run(*argv):
        code = main(list(argv))
        out, err = capsys.readouterr()
        return code, out, err
    return _run


def golden(name, text):
    path = GOLDEN / name
    if UPDATE:
        path.write_text(text)
    assert path.exists(), f"missing golden {name}; rerun with FPGA130_UPDATE_GOLDEN=1"
    assert text == path.read_text()


def records(out):
    return [json.loads(line) for line in out.splitlines()]


# --- genbits ----------------------------------------------------------------------

def test_genbits_counter(run):
    code, out, err = run("genbits", *COUNTER, "--out", "counter.bit")
    assert code == EXIT_OK and err == ""
    recs = records(out)
    assert recs[1]["summary"] == "4/64 CLBs used"
    assert recs[2]["total"] == 25992 and recs[2]["assigned"] + recs[2]["spare"] == 25992
    golden("genbits_counter.jsonl", out)
    code, human, _ = run("genbits", *COUNTER, "--out", "counter.bit", "--human")
    assert "4/64 CLBs used" in human
    golden("genbits_counter.txt", human)


def test_genbits_full_utilization(run):
    code, out, _ = run("genbits", *SENSOR, "--out", "s.bit", "--human")
    assert code == EXIT_OK and "64/64 CLBs used" in out


def test_genbits_is_deterministic(run, tmp_path):
    run("genbits", *SENSOR, "--out", "a.bit")
    run("genbits", *SENSOR, "--out", "b.bit", "--seed", "9")
    assert (tmp_path / "a.bit").read_bytes() == (tmp_path / "b.bit").read_bytes()


def test_genbits_missing_route(run):
    code, out, err = run("genbits", *COUNTER[:3], "nowhere.route", "--out", "x.bit")
    assert code == EXIT_INPUT and out == ""
    assert err.startswith("error:") and "nowhere.route" in err


def test_genbits_figure(run, tmp_path):
    run("genbits", *COUNTER, "--out", "c.bit", "--figure", "a.png")
    run("genbits", *COUNTER, "--out", "c.bit", "--figure", "b.png")
    a = (tmp_path / "a.png").read_bytes()
    assert a[:8] == b"\x89PNG\r\n\x1a\n" and a == (tmp_path / "b.png").read_bytes()


# --- decode -------------------------------------------------------------------------

def test_decode_all_zero(run, tmp_path):
    (tmp_path / "zero.bit").write_bytes(serialize(ConfigImage()))
    code, out, _ = run("decode", "zero.bit")
    assert code == EXIT_OK and out == "no resources configured\n"


def test_decode_counter_golden(run):
    run("genbits", *COUNTER, "--out", "c.bit")
    code, out, _ = run("decode", "c.bit")
    assert code == EXIT_OK
    golden("decode_counter.txt", out)


def test_decode_corrupt_file(run, tmp_path):
    (tmp_path / "bad.bit").write_bytes(b"FPGA\x01")
    code, _, err = run("decode", "bad.bit")
    assert code == EXIT_INPUT and err.startswith("error:")


# --- sim / verify -------------------------------------------------------------------------

def test_sim_counter_passes(run):
    run("genbits", *COUNTER, "--out", "c.bit")
    code, out, _ = run("sim", "c.bit", VECTORS, "--vcd", "c.vcd")
    assert code == EXIT_OK
    recs = records(out)
    assert recs[-1] == {"verdict": "PASS", "cycles": 16, "checked": 16, "failures": 0}
    seq = [int(r["outputs"][::-1], 2) for r in recs[:-1]]
    assert seq == list(range(16))
    golden("sim_counter.jsonl", out)
    assert Path("c.vcd").read_text().startswith("$timescale")


def test_sim_width_mismatch(run, tmp_path):
    run("genbits", *COUNTER, "--out", "c.bit")
    (tmp_path / "bad.vec").write_text("1 -> 0000\n")
    code, _, err = run("sim", "c.bit", "bad.vec")
    assert code == EXIT_INPUT and "input bits" in err


def test_sim_detects_wrong_expectation(run, tmp_path):
    run("genbits", *COUNTER, "--out", "c.bit")
    (tmp_path / "wrong.vec").write_text("-> 1000\n-> 1000\n")
    code, out, _ = run("sim", "c.bit", "wrong.vec", "--human")
    assert code == EXIT_VERIFY and "MISMATCH" in out and out.rstrip().endswith("1 mismatches")


def test_verify_pass_and_mutation(run, tmp_path):
    code, out, _ = run("verify", *COUNTER)
    assert code == EXIT_OK and records(out)[0]["verdict"] == "PASS"
    golden("verify_counter.jsonl", out)
    run("genbits", *COUNTER, "--out", "c.bit")
    img = deserialize((tmp_path / "c.bit").read_bytes())
    mutant = img.flip(img.arch.memory_map.lookup("clb", 2, 2, "lut", 0))
    (tmp_path / "m.bit").write_bytes(serialize(mutant))
    code, out, _ = run("verify", *COUNTER, "--bitstream", "m.bit")
    rec = records(out)[0]
    assert code == EXIT_VERIFY and rec["verdict"] == "FAIL"
    assert rec["divergence"]["expected"] != rec["divergence"]["observed"]


def test_verify_contention_is_input_error(run, tmp_path):
    run("genbits", *COUNTER, "--out", "c.bit")
    img = deserialize((tmp_path / "c.bit").read_bytes())
    mm = img.arch.memory_map
    bad = img.with_bit(mm.lookup("hcb", 1, 10, "drive", 0), 1).with_bit(
        mm.lookup("io", 0, 10, "couple", 0), 1)
    (tmp_path / "bad.bit").write_bytes(serialize(bad))
    code, _, err = run("verify", *COUNTER, "--bitstream", "bad.bit")
    assert code == EXIT_INPUT and "drivers" in err


# --- busplay ---------------------------------------------------------------------------------

def test_busplay_clean_and_faulty(run, tmp_path):
    run("genbits", *COUNTER, "--out", "c.bit")
    code, out, _ = run("busplay", "c.bit", "--trace", "t.txt")
    assert code == EXIT_OK and records(out)[0]["mismatches"] == 0
    assert len((tmp_path / "t.txt").read_text().splitlines()) == 2 * 3249
    img = deserialize((tmp_path / "c.bit").read_bytes())
    fault = "2,2,0,3=" + str(1 - ((img.byte(2, 2, 0) >> 3) & 1))
    code, out, _ = run("busplay", "c.bit", "--fault", fault, "--out", "m.csv", "--human")
    assert code == EXIT_VERIFY
    assert "mismatch at (row=2, col=2, word=0, bit=3)" in out
    assert (tmp_path / "m.csv").read_text().splitlines()[1].startswith("2,2,0,3,")
    golden("busplay_fault.txt", out)


def test_busplay_bad_fault_spec(run):
    run("genbits", *COUNTER, "--out", "c.bit")
    code, _, err = run("busplay", "c.bit", "--fault", "2,2,9,0=1")
    assert code == EXIT_INPUT and err.startswith("error:")


# --- route-lab / stats / autoroute -----------------------------------------------------------

def test_route_lab_small_config(run, tmp_path):
    (tmp_path / "lab.cfg").write_text(SMALL_LAB)
    code, out, _ = run("route-lab", "lab.cfg")
    lines = out.splitlines()
    assert code == EXIT_OK and lines[0] == "topology,seed,nets,W_min" and len(lines) == 13
    golden("route_lab_small.csv", out)
    code, summary, _ = run("route-lab", "lab.cfg", "--out", "r.csv", "--figure", "h.png", "--human")
    assert (tmp_path / "r.csv").read_text() == out
    assert summary.startswith("topology") and "wilton vs disjoint" in summary
    assert (tmp_path / "h.png").read_bytes()[:4] == b"\x89PNG"


def test_stats(run, tmp_path):
    code, out, _ = run("stats", "--memory-map", "map.csv")
    recs = records(out)
    assert code == EXIT_OK
    assert recs[1]["clb"] == 64 and recs[1]["sb"] == 81
    assert recs[2]["assigned"] == oracles.expected_resource_count(8)
    golden("stats.jsonl", out)
    rows = (tmp_path / "map.csv").read_text().splitlines()
    assert len(rows) == 1 + 25992
    assert sum(not r.startswith("spare,") for r in rows[1:]) == oracles.expected_resource_count(8)


def test_stats_with_arch_file(run, tmp_path):
    (tmp_path / "a.cfg").write_text("channel_width = 4\ntopology = universal\n")
    code, out, _ = run("stats", "--arch", "a.cfg")
    assert code == EXIT_OK and records(out)[2]["assigned"] == oracles.expected_resource_count(4)


def test_autoroute_round_trip(run):
    code, out, _ = run("autoroute", *COUNTER[:3], "--out", "c.route")
    assert code == EXIT_OK and records(out)[0]["nets"] == 4
    code, _, _ = run("verify", *COUNTER[:3], "c.route")
    assert code == EXIT_OK


def test_usage_errors_exit_1(run):
    with pytest.raises(SystemExit) as exc:
        main(["genbits"])
    assert exc.value.code == EXIT_INPUT
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == EXIT_INPUT
