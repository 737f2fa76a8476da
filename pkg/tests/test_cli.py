import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from safeplc import corpus
from safeplc.cli import main
from safeplc.firmware import bootload


@pytest.fixture
def src(tmp_path):
    def put(name, kind="model"):
        text = corpus.model_source(name) if kind == "model" else (
            corpus.relay_source(name) if kind == "relay" else corpus.scenario_text(name))
        ext = {"model": ".b0", "relay": ".relay", "scenario": ".json"}[kind]
        p = tmp_path / (name + ext)
        p.write_text(text)
        return str(p)
    return put


def test_build_writes_bundle(src, tmp_path, capsys):
    assert main(["build", src("blinker")]) == 0
    out = capsys.readouterr().out
    assert "wcet bound (image B cycle): 20" in out
    fw = bootload((tmp_path / "blinker.bundle").read_bytes())
    assert fw.image_b.cycle_entry > 0
    assert f"bundle crc32: {fw.bundle_crc:08x}" in out


def test_build_out_flag(src, tmp_path):
    target = tmp_path / "fw.bin"
    assert main(["build", src("counter_sat"), "--out", str(target)]) == 0
    bootload(target.read_bytes())


def test_build_refuses_counterexample(src, tmp_path, capsys):
    assert main(["build", src("bug_div_zero"), "--allow-unproven"]) == 2
    assert "FAILED" in capsys.readouterr().out
    assert not (tmp_path / "bug_div_zero.bundle").exists()


def test_build_unproven_needs_flag(src, tmp_path, capsys):
    assert main(["build", src("bug_wide_diff")]) == 2
    assert not (tmp_path / "bug_wide_diff.bundle").exists()
    capsys.readouterr()
    assert main(["build", src("bug_wide_diff"), "--allow-unproven"]) == 0
    assert "WARNING" in capsys.readouterr().out
    assert (tmp_path / "bug_wide_diff.bundle").exists()


def test_build_reports_typecheck_stage(tmp_path, capsys):
    p = tmp_path / "bad.b0"
    p.write_text("MACHINE M VARS x: INT(0..3) INVARIANT true INIT x := true CYCLE END")
    assert main(["build", str(p)]) == 2
    assert "typecheck  FAILED" in capsys.readouterr().out


def test_seq_flag_lands_in_bundle(src, tmp_path):
    assert main(["build", src("blinker"), "--seq", "deferred_bytes_per_cycle=8",
                 "--seq", "nondynamic_panic=true"]) == 0
    cfg = bootload((tmp_path / "blinker.bundle").read_bytes()).cfg
    assert cfg.deferred_bytes_per_cycle == 8 and cfg.nondynamic_panic


@pytest.mark.parametrize("argv", [
    [], ["frobnicate"], ["build"], ["build", "x.b0", "--budget", "0"],
    ["build", "x.b0", "--budget", "many"], ["build", "x.b0", "--seq", "noequals"],
    ["build", "x.b0", "--seq", "cycle_period_ms=100"], ["build", "x.b0", "--seq", "warp=9"],
    ["disasm", "x.b0", "--image", "C"],
])
def test_usage_errors_exit_one(argv, src):
    if len(argv) > 1 and argv[1] == "x.b0":
        argv = [argv[0], src("blinker")] + argv[2:]
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_missing_file_is_stage_failure(tmp_path, capsys):
    assert main(["build", str(tmp_path / "nope.b0")]) == 2
    assert main(["wcet", str(tmp_path / "nope.bundle")]) == 2
    assert "read failed" in capsys.readouterr().err


def test_sim_nominal_and_panic(src, tmp_path, capsys):
    main(["build", src("blinker")])
    bundle = str(tmp_path / "blinker.bundle")
    trace = tmp_path / "t.jsonl"
    assert main(["sim", bundle, src("blinker_nominal", "scenario"), "--out", str(trace)]) == 0
    lines = trace.read_text().splitlines()
    assert len(lines) == 40 and all(json.loads(l)["status"] == "RUNNING" for l in lines)
    assert main(["sim", bundle, src("blinker_halt", "scenario")]) == 3
    last = json.loads((tmp_path / "blinker_halt.trace.jsonl").read_text().splitlines()[-1])
    assert last["status"] == "PANIC"
    assert "PANIC at cycle 7" in capsys.readouterr().out


def test_sim_seq_override_relinks(src, tmp_path):
    main(["build", src("blinker")])
    bundle = str(tmp_path / "blinker.bundle")
    sc = src("blinker_freeze", "scenario")
    assert main(["sim", bundle, sc]) == 0
    assert main(["sim", bundle, sc, "--seq", "nondynamic_panic=1"]) == 3


def test_sim_rejects_tampered_bundle(src, tmp_path, capsys):
    main(["build", src("blinker")])
    p = tmp_path / "blinker.bundle"
    data = bytearray(p.read_bytes())
    data[40] ^= 1
    p.write_bytes(bytes(data))
    assert main(["sim", str(p), src("blinker_nominal", "scenario")]) == 2
    assert "bootload failed" in capsys.readouterr().err


def test_sim_bad_scenario(src, tmp_path):
    main(["build", src("blinker")])
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["sim", str(tmp_path / "blinker.bundle"), str(bad)]) == 2


def test_po_xml_and_exit_codes(src, tmp_path, capsys):
    assert main(["po", src("blinker")]) == 0
    root = ET.parse(tmp_path / "blinker.po.xml").getroot()
    assert len(root) == 3
    assert main(["po", src("bug_index")]) == 2
    assert main(["po", src("blinker"), "--format", "text"]) == 0
    assert "PROVED" in capsys.readouterr().out


def test_po_budget_flag(src):
    assert main(["po", src("bug_wide_diff"), "--budget", "4"]) == 2


def test_relay_stdout_and_file(src, tmp_path, capsys):
    assert main(["relay", src("lamp", "relay"), "--stdout"]) == 0
    assert "lamp := btn" in capsys.readouterr().out
    assert main(["relay", src("lamp", "relay")]) == 0
    assert main(["build", str(tmp_path / "lamp.b0")]) == 0


def test_relay_error(tmp_path, capsys):
    p = tmp_path / "bad.relay"
    p.write_text("RELAYNET B\nINPUT a\nOUTPUT o\no := NO(zz)\n")
    assert main(["relay", str(p)]) == 2
    assert "relay failed" in capsys.readouterr().err


def test_wcet_with_cost_file(src, tmp_path, capsys):
    main(["build", src("blinker")])
    bundle = str(tmp_path / "blinker.bundle")
    assert main(["wcet", bundle]) == 0
    assert "20" in capsys.readouterr().out
    costs = tmp_path / "unit.txt"
    from safeplc.backends import ISA_B
    costs.write_text("\n".join(f"{m} = 1" for m in sorted(ISA_B.mnemonics)))
    assert main(["wcet", bundle, str(costs)]) == 0
    partial = tmp_path / "partial.txt"
    partial.write_text("ADD = 1\n")
    assert main(["wcet", bundle, str(partial)]) == 2


def test_disasm(src, tmp_path, capsys):
    assert main(["disasm", src("blinker"), "--image", "B"]) == 0
    out = capsys.readouterr().out
    assert "HALT" in out and "PUSH" in out
    main(["build", src("blinker")])
    capsys.readouterr()
    assert main(["disasm", str(tmp_path / "blinker.bundle")]) == 0
    assert "HALT" in capsys.readouterr().out


def test_module_entry_point(src):
    r = subprocess.run([sys.executable, "-m", "safeplc", "po", src("blinker"), "--format", "text"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "Blinker" in r.stdout
