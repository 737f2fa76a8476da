import json
import math
import random

import pytest
from hypothesis import given, strategies as st

from safeplc.b0 import initial_state, interpret_cycle, load
from safeplc.backends import compile_a, compile_b
from safeplc.firmware import InputDecl, SeqConfig, bootload, input_decls, link
from safeplc.safesim import (PANIC, RUNNING, DropInterMcu, FaultScenario, FreezePulse, HaltMcu,
                             InputSample, PlatformError, ProgramByteFlip, ScenarioError,
                             StuckOutput, VarBitFlip, check_intra, new_platform, panic,
                             parse_scenario, reset, run_scenario, state_words, step,
                             validate_input)
from safeplc import corpus

from conftest import firmware_for, typed


def frames(level=1, start=1):
    """Endless frames for Blinker's ``btn`` with an advancing pulse."""
    k = start
    while True:
        yield {"btn": InputSample(level, k)}
        k += 1


def run(p, n, faults=None, level=1):
    faults = faults or {}
    reps = []
    for c, f in zip(range(n), frames(level)):
        reps.append(step(p, f, faults.get(p.cycle, ())))
        if p.status != RUNNING:
            break
    return reps


def words(p):
    return [state_words(img.slots, mem) for m in p.mcus
            for img, mem in ((m.image_a, m.mem_a), (m.image_b, m.mem_b))]


def test_new_platform_runs_init_everywhere(blinker_fw):
    p = new_platform(blinker_fw)
    assert p.status == RUNNING and p.cycle == 0
    w = words(p)
    assert len(set(w)) == 1
    assert words(new_platform(blinker_fw)) == w


def test_trapping_init_panics_at_cycle_zero():
    tm = load("MACHINE T VARS x: INT(0..3) INVARIANT true INIT x := 2 + 2 CYCLE END")
    fw = bootload(link(compile_a(tm), compile_b(tm)))
    p = new_platform(fw)
    assert p.status == PANIC
    assert p.panic_info["reason"] == "exec_fault" and p.panic_info["cycle"] == 0


def test_blinker_lamp_follows_reference(blinker, blinker_fw):
    p = new_platform(blinker_fw)
    s = initial_state(blinker)
    for rep in run(p, 4):
        s, outs = interpret_cycle(blinker, s, {"btn": True})
        assert rep.outputs["lamp"]["driven"] == int(outs["lamp"])
    # cnt reaches 2 on the second cycle
    p = new_platform(blinker_fw)
    assert [r.outputs["lamp"]["driven"] for r in run(p, 4)] == [0, 1, 1, 0]


def test_step_requires_running(blinker_fw):
    p = new_platform(blinker_fw)
    panic(p, "test")
    with pytest.raises(PlatformError):
        step(p, {"btn": InputSample(1, 1)})


def test_fault_free_thousand_cycles(blinker_fw):
    rng = random.Random(7)
    p = new_platform(blinker_fw)
    pulse = 0
    for _ in range(1000):
        pulse += 1
        rep = step(p, {"btn": InputSample(rng.randint(0, 1), pulse)})
        assert rep.status == RUNNING
        assert all(c.ok for c in rep.checks)


def test_fault_free_on_array_model():
    fw = firmware_for("sum_window")
    rng = random.Random(3)
    p = new_platform(fw)
    for k in range(300):
        assert step(p, {"v": InputSample(rng.randint(0, 5), k + 1)}).status == RUNNING


# -- intra -------------------------------------------------------------------

def test_single_flip_caught_by_intra_same_cycle(blinker_fw):
    p = new_platform(blinker_fw)
    reps = run(p, 10, {2: [VarBitFlip(1, "A", 0, 0)]})
    last = reps[-1]
    assert last.cycle == 2 and last.status == PANIC
    assert last.panic["reason"] == "intra_mismatch"
    assert {"check": "intra", "mcu": 1, "result": "mismatch(slot 0)"} in last.to_json()["checks"]


def test_identical_flip_passes_intra_but_not_inter(blinker_fw):
    p = new_platform(blinker_fw)
    reps = run(p, 10, {1: [VarBitFlip(2, "A", 0, 0), VarBitFlip(2, "B", 0, 0)]})
    flip_cycle = reps[1]
    intra = [c for c in flip_cycle.checks if c.name == "intra"]
    assert all(c.ok for c in intra)
    assert reps[-1].status == PANIC and reps[-1].panic["reason"] == "inter_divergence"
    assert (reps[-1].cycle - 1) * 10 <= 50


def test_check_intra_direct(blinker_fw):
    p = new_platform(blinker_fw)
    m = p.mcu(1)
    assert check_intra(m).ok
    m.mem_b.flip_bit(m.image_b.slots[1].address, 0)
    c = check_intra(m)
    assert not c.ok and c.detail == "mismatch(slot 1)"


# -- deferred ------------------------------------------------------------------

def test_untouched_program_never_flags(blinker_fw):
    p = new_platform(blinker_fw)
    for rep in run(p, 50):
        assert all(c.ok for c in rep.checks if c.name == "deferred")


@pytest.mark.parametrize("image", ["A", "B"])
def test_program_flip_found_within_one_sweep(image):
    cfg = SeqConfig(deferred_bytes_per_cycle=8)
    fw = firmware_for("blinker", cfg)
    length = len(fw.image_a.code if image == "A" else fw.image_b.code)
    period = math.ceil(length / 8)
    for offset in range(0, length, 7):
        p = new_platform(fw)
        reps = run(p, 3 + period + 1, {3: [ProgramByteFlip(1, image, offset)]})
        assert reps[-1].status == PANIC
        assert reps[-1].cycle - 3 < period


def test_large_k_detects_on_next_check(blinker_fw):
    fw = firmware_for("blinker", SeqConfig(deferred_bytes_per_cycle=4096))
    p = new_platform(fw)
    # a flipped byte in INIT code is never executed again: only the sweep sees it
    reps = run(p, 5, {2: [ProgramByteFlip(2, "B", 1, 0x01)]})
    assert reps[-1].cycle == 2 and reps[-1].panic["reason"] == "deferred_corruption"


# -- inter ---------------------------------------------------------------------

def test_identical_mcus_pass_inter(blinker_fw):
    p = new_platform(blinker_fw)
    reps = run(p, 8)
    inter = [c for r in reps for c in r.checks if c.name == "inter"]
    assert len(inter) == 2 and all(c.ok for c in inter)


@pytest.mark.parametrize("phase", range(8))
def test_halted_mcu_panics_by_next_exchange(blinker_fw, phase):
    p = new_platform(blinker_fw)
    reps = run(p, 20, {phase: [HaltMcu(2)]})
    last = reps[-1]
    assert last.status == PANIC and last.panic["reason"] == "inter_missing_response"
    assert (last.cycle - phase) * blinker_fw.cfg.cycle_period_ms <= 50
    halted = reps[phase]
    assert all(o["driven"] == 0 and o["energy"] == 0 for o in halted.outputs.values())


def test_dropped_exchange_is_a_failure(blinker_fw):
    p = new_platform(blinker_fw)
    reps = run(p, 10, {0: [DropInterMcu(1)]})
    assert reps[-1].cycle == 3 and reps[-1].panic["reason"] == "inter_missing_response"


# -- readback ----------------------------------------------------------------

def test_stuck_high_while_commanded_low(blinker_fw):
    p = new_platform(blinker_fw)
    reps = run(p, 10, {1: [StuckOutput("lamp", 1)]}, level=0)
    assert reps[-1].cycle == 1 and reps[-1].panic["reason"] == "output_fault"
    assert reps[-1].panic["detail"] == "output_fault(lamp)"


def test_stuck_at_commanded_level_is_silent_until_change(blinker_fw):
    p = new_platform(blinker_fw)
    # lamp is driven 0,1,1,0: stuck at 1 from cycle 1 holds until cycle 3
    reps = run(p, 10, {1: [StuckOutput("lamp", 1)]})
    assert [r.status for r in reps] == [RUNNING, RUNNING, RUNNING, PANIC]


def test_readback_interval():
    fw = firmware_for("blinker", SeqConfig(readback_interval_cycles=3))
    p = new_platform(fw)
    reps = run(p, 10, {0: [StuckOutput("lamp", 1)]}, level=0)
    assert reps[-1].cycle == 2 and reps[-1].panic["reason"] == "output_fault"


# -- inputs ------------------------------------------------------------------

BTN = (InputDecl("btn", "BOOL", 0, 1),)


def test_validate_input_cases():
    prev = {"btn": 4}
    assert validate_input({"btn": InputSample(1, 5)}, prev, BTN) == ({"btn": 1}, [])
    assert validate_input({"btn": InputSample(1, 4)}, prev, BTN) == ({"btn": 0}, ["btn"])
    assert validate_input({"btn": InputSample(0, 9)}, prev, BTN) == ({"btn": 0}, [])


@given(st.integers(0, 1), st.integers(0, 10), st.integers(0, 10))
def test_dynamism_only_demotes(level, prev, pulse):
    eff, _ = validate_input({"btn": InputSample(level, pulse)}, {"btn": prev}, BTN)
    assert eff["btn"] <= level


def test_frozen_pulse_reads_low(blinker_fw):
    p = new_platform(blinker_fw)
    reps = run(p, 8, {3: [FreezePulse("btn")]})
    assert [r.inputs["btn"] for r in reps] == [1, 1, 1, 0, 0, 0, 0, 0]
    assert all(r.nondynamic == ["btn"] for r in reps[3:])
    assert all(r.status == RUNNING for r in reps)


def test_frozen_pulse_can_escalate():
    fw = firmware_for("blinker", SeqConfig(nondynamic_panic=True))
    p = new_platform(fw)
    reps = run(p, 8, {3: [FreezePulse("btn")]})
    assert reps[-1].cycle == 3 and reps[-1].panic["reason"] == "input_nondynamic"


# -- panic and reset ------------------------------------------------------------

def test_panic_latch_and_reset(blinker_fw):
    p = new_platform(blinker_fw)
    run(p, 2)
    panic(p, "first", "x")
    info = dict(p.panic_info)
    for k in range(100):
        with pytest.raises(PlatformError):
            step(p, {"btn": InputSample(1, 100 + k)})
        assert all(ch.driven == ch.command == ch.energy == 0 for ch in p.outputs.values())
    panic(p, "second")
    assert p.panic_info == info and p.led
    fresh = reset(p)
    assert fresh.status == RUNNING and fresh.cycle == 0
    assert words(fresh) == words(new_platform(blinker_fw))


def test_gate_holds_in_every_report(blinker_fw):
    sc = parse_scenario(corpus.scenario_text("blinker_nominal"))
    for rep in run_scenario(blinker_fw, sc).reports:
        for o in rep.outputs.values():
            assert o["driven"] == o["command"] & o["energy"]


# -- scenarios -----------------------------------------------------------------

@pytest.mark.parametrize("name,status", [
    ("blinker_nominal", RUNNING), ("blinker_bitflip", PANIC), ("blinker_halt", PANIC),
    ("blinker_freeze", RUNNING), ("blinker_stuck", PANIC), ("blinker_program", PANIC),
    ("blinker_drop", PANIC),
])
def test_bundled_scenarios(blinker_fw, name, status):
    trace = run_scenario(blinker_fw, parse_scenario(corpus.scenario_text(name)))
    assert trace.status == status
    lines = trace.to_jsonl().splitlines()
    assert len(lines) == len(trace.reports)
    rec = json.loads(lines[-1])
    assert rec["status"] == status and rec["led"] == (status == PANIC)
    assert set(rec["crcs"]) <= {"mcu1_a", "mcu1_b", "mcu2_a", "mcu2_b"}


def test_bitflip_trace_ends_at_fault_cycle(blinker_fw):
    trace = run_scenario(blinker_fw, parse_scenario(corpus.scenario_text("blinker_bitflip")))
    assert trace.panic["cycle"] == 5 and len(trace.reports) == 6


@pytest.mark.parametrize("text", [
    "not json", "{}", '{"horizon": 3, "faults": [{"cycle": 9, "kind": "HaltMcu", "mcu": 1}]}',
    '{"horizon": 3, "faults": [{"cycle": 0, "kind": "Meteor"}]}',
    '{"horizon": 3, "faults": [{"cycle": 0, "kind": "HaltMcu", "mcu": 3}]}',
])
def test_bad_scenarios(text):
    with pytest.raises(ScenarioError):
        parse_scenario(text)


def test_unknown_input_in_scenario(blinker_fw):
    sc = FaultScenario(3, {0: {"nope": {"level": 1}}})
    with pytest.raises(ScenarioError):
        run_scenario(blinker_fw, sc)


def test_int_input_out_of_domain_panics():
    fw = firmware_for("counter_sat")
    sc = FaultScenario(3, {1: {"step": {"level": 9}}})
    trace = run_scenario(fw, sc)
    assert trace.status == PANIC and trace.panic["reason"] == "input_domain"
