import json
import subprocess
import sys
from pathlib import Path

import pytest

from mgform.cli import CASES, main
from mgform.netmodel import dump_scenario, load_scenario, validate
from support import br, bus, scenario

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, scn, name="case.json"):
    path = tmp_path / name
    path.write_text(dump_scenario(scn))
    return str(path)


def test_run_default_table(capsys):
    code, out, _ = run(capsys, "run", "default")
    assert code == 0
    rows = [line for line in out.splitlines() if line[:2] in ("1.", "2.", "3.")]
    assert [r.split("   ")[0].strip() for r in rows] == [label for _, label in CASES]
    assert "1. Do not pick up loads." in out
    assert "tripped DG2, DG3" in rows[2]


def test_run_default_structured_matches_golden(capsys):
    code, out, _ = run(capsys, "run", "default", "--format", "structured")
    assert code == 0
    assert out == (GOLDEN / "default_run.json").read_text()
    report = json.loads(out)
    assert list(report) == ["schema", "version", "scenario", "options", "inference", "cases"]


def test_run_is_byte_stable(capsys):
    first = run(capsys, "run", "default", "--format", "structured")[1]
    second = run(capsys, "run", "default", "--format", "structured")[1]
    assert first == second


def test_timings_are_opt_in(capsys):
    out = run(capsys, "run", "default", "--format", "structured", "--timings")[1]
    assert "timings" in json.loads(out)


def test_no_probes_resolves_no_more(capsys):
    with_p = json.loads(run(capsys, "run", "default", "--format", "structured")[1])["inference"]
    without = json.loads(run(capsys, "run", "default", "--format", "structured", "--no-probes")[1])["inference"]
    assert set(without["resolved_closed"]) <= set(with_p["resolved_closed"])
    assert set(without["resolved_open"]) <= set(with_p["resolved_open"])
    assert without["probes"] == []


def test_malformed_scenario_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"buses": [], "branches": [], "oops": 1}')
    code, _, err = run(capsys, "run", str(bad))
    assert code == 2 and "unknown keys" in err


def test_invalid_network_exit_2(capsys, tmp_path):
    path = write(tmp_path, scenario([bus("a", 1), bus("b", 1)], [br("L1", "a", "b")]))
    code, _, err = run(capsys, "run", path)
    assert code == 2 and "no-dg" in err


def test_missing_file_exit_2(capsys, tmp_path):
    assert run(capsys, "run", str(tmp_path / "nope.json"))[0] == 2


def test_infeasible_exit_1(capsys, tmp_path):
    path = write(tmp_path, scenario([bus("g", dg=(50, 50)), bus("a", 100)],
                                    [br("L1", "g", "a", switchable=False)]))
    code, out, err = run(capsys, "run", path)
    assert code == 1 and "infeasible" in err and "infeasible" in out


def test_out_file_and_jobs(capsys, tmp_path):
    a = write(tmp_path, scenario([bus("g", dg=(500, 500)), bus("a", 100)], [br("L1", "g", "a")]), "a.json")
    out = tmp_path / "report.json"
    assert run(capsys, "run", a, "default", "--format", "structured", "--out", str(out), "--jobs", "2")[0] == 0
    serial = run(capsys, "run", a, "default", "--format", "structured")[1]
    assert out.read_text() == serial
    assert len(json.loads(serial)) == 2


def test_bad_jobs_flag(capsys):
    assert run(capsys, "run", "default", "--jobs", "0")[0] == 2
    assert run(capsys, "run", "default", "--format", "xml")[0] == 2


def test_gen_deterministic(capsys, tmp_path):
    one, two = tmp_path / "1.json", tmp_path / "2.json"
    assert run(capsys, "gen", "--seed", "42", "--out", str(one))[0] == 0
    assert run(capsys, "gen", "--seed", "42", "--out", str(two))[0] == 0
    assert one.read_bytes() == two.read_bytes()


def test_gen_size(capsys):
    code, out, _ = run(capsys, "gen", "--seed", "3", "--buses", "20", "--dgs", "2")
    scn = load_scenario(out)
    assert code == 0 and len(scn.network.buses) == 20 and len(scn.network.dg_buses) == 2
    assert validate(scn.network) == []
    assert all(b.load_p >= 1 for b in scn.network.buses)


@pytest.mark.parametrize("flags", [["--buses", "9"], ["--buses", "61"], ["--dgs", "0"], ["--dgs", "5"],
                                   ["--seed", "x"]])
def test_gen_bad_flags(capsys, flags):
    assert run(capsys, "gen", *flags)[0] == 2


def test_oracle_default(capsys):
    code, out, _ = run(capsys, "oracle", "default", "--format", "structured")
    rep = json.loads(out)
    assert code == 0 and rep["verdict"] == "SOUND"
    assert rep["completeness_ratio"] == pytest.approx(10 / 11, abs=1e-6)


def test_oracle_fully_observable(capsys, tmp_path):
    path = write(tmp_path, scenario([bus("g", dg=(500, 500)), bus("a", 100)], [br("L1", "g", "a")]))
    code, out, _ = run(capsys, "oracle", path)
    assert code == 0 and "SOUND" in out and "1.000000" in out and "forced:                 0" in out


def test_oracle_too_many_unknowns(capsys, tmp_path):
    n = 25
    buses = [bus("g", dg=(9999, 9999))] + [bus(f"b{i}", 1, online=False) for i in range(n)]
    branches = [br(f"L{i}", "g" if i == 0 else f"b{i - 1}", f"b{i}", ctrl=f"b{i}") for i in range(n)]
    code, _, err = run(capsys, "oracle", write(tmp_path, scenario(buses, branches)))
    assert code == 1 and "exceed" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mgform", "run", "default"], capture_output=True, text=True)
    assert proc.returncode == 0 and "Processing case" in proc.stdout
