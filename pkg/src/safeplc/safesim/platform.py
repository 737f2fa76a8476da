"""Dual-MCU safety platform: two microcontrollers each running both images
under a fixed sequencer, with the runtime check suite and panic latch."""

from __future__ import annotations

import dataclasses
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from ..backends import VAR_A, VAR_B, ExecFault, VmMemory, exec_a, exec_b, scalar_addresses
from ..crc import crc32
from ..firmware import LoadedFirmware
from .faults import DropInterMcu, FreezePulse, HaltMcu, ProgramByteFlip, StuckOutput, VarBitFlip

RUNNING = "RUNNING"
PANIC = "PANIC"
SIM_STEP_LIMIT = 100_000


class PlatformError(Exception):
    """Precondition violation, e.g. stepping a panicked platform."""


@dataclass(frozen=True)
class InputSample:
    level: int
    pulse: int = 0


InputFrame = Mapping[str, InputSample]


@dataclass(frozen=True)
class Check:
    name: str
    mcu: Optional[int]
    ok: bool
    detail: str = ""

    def to_json(self) -> dict:
        out = {"check": self.name, "result": "ok" if self.ok else self.detail}
        if self.mcu is not None:
            out["mcu"] = self.mcu
        return out


@dataclass
class McuState:
    id: int
    image_a: object
    image_b: object
    mem_a: VmMemory
    mem_b: VmMemory
    code_a: bytearray
    code_b: bytearray
    ref_slices_a: List[int]
    ref_slices_b: List[int]
    cursor_a: int = 0
    cursor_b: int = 0
    alive: bool = True
    digest: int = 0
    bits: Dict[str, int] = field(default_factory=dict)


@dataclass
class OutputChannel:
    command: int = 0
    energy: int = 0
    driven: int = 0
    readback: int = 0


@dataclass
class CycleReport:
    cycle: int
    time_ms: int
    inputs: Dict[str, int] = field(default_factory=dict)
    nondynamic: List[str] = field(default_factory=list)
    faults: List[dict] = field(default_factory=list)
    costs: Dict[str, int] = field(default_factory=dict)
    crcs: Dict[str, str] = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)
    outputs: Dict[str, Dict[str, int]] = field(default_factory=dict)
    status: str = RUNNING
    panic: Optional[dict] = None
    led: bool = False

    def to_json(self) -> dict:
        return {
            "cycle": self.cycle, "time_ms": self.time_ms, "inputs": self.inputs,
            "nondynamic": self.nondynamic, "faults": self.faults, "costs": self.costs,
            "crcs": self.crcs, "checks": [c.to_json() for c in self.checks],
            "outputs": self.outputs, "status": self.status, "panic": self.panic,
            "led": self.led,
        }


@dataclass
class Platform:
    fw: LoadedFirmware
    mcus: Tuple[McuState, McuState]
    outputs: Dict[str, OutputChannel]
    cycle: int = 0
    status: str = RUNNING
    panic_info: Optional[dict] = None
    prev_pulse: Dict[str, int] = field(default_factory=dict)
    frozen: Dict[str, int] = field(default_factory=dict)
    stuck: Dict[str, int] = field(default_factory=dict)
    drops: int = 0
    init_checks: List[Check] = field(default_factory=list)

    @property
    def cfg(self):
        return self.fw.cfg

    @property
    def led(self) -> bool:
        return self.status == PANIC

    def mcu(self, n: int) -> McuState:
        return self.mcus[n - 1]


def output_channels(slots) -> List[Tuple[str, object, int]]:
    """``(channel name, slot, address)`` for every scalar output element."""
    out = []
    for s, addr in scalar_addresses(slots):
        if s.role != "output":
            continue
        j = (addr - s.address) // 4
        out.append((f"{s.name}[{j}]" if s.length else s.name, s, addr))
    return out


def state_words(slots, mem: VmMemory) -> bytes:
    """Raw 32-bit words of every scalar slot in canonical order."""
    return b"".join(struct.pack("<i", mem.read(addr)) for _, addr in scalar_addresses(slots))


def _slice_crcs(code: bytes, k: int) -> List[int]:
    return [crc32(code[i:i + k]) for i in range(0, len(code), k)]


def new_platform(fw: LoadedFirmware) -> Platform:
    """Load both images on both MCUs and run their INIT entries."""
    if not isinstance(fw, LoadedFirmware):
        raise PlatformError("firmware must come from bootload()")
    k = fw.cfg.deferred_bytes_per_cycle
    mcus = []
    for n in (1, 2):
        mcus.append(McuState(
            n, fw.image_a, fw.image_b, VmMemory(VAR_A), VmMemory(VAR_B),
            bytearray(fw.image_a.code), bytearray(fw.image_b.code),
            _slice_crcs(fw.image_a.code, k), _slice_crcs(fw.image_b.code, k)))
    chans = {name: OutputChannel() for name, _, _ in output_channels(fw.image_a.slots)}
    p = Platform(fw, tuple(mcus), chans)
    for m in p.mcus:
        for label, img, mem, run in (("A", m.image_a, m.mem_a, exec_a),
                                     ("B", m.image_b, m.mem_b, exec_b)):
            try:
                run(img, mem, (), step_limit=SIM_STEP_LIMIT)
            except ExecFault as exc:
                p.init_checks.append(Check("init", m.id, False, f"image {label}: {exc}"))
                panic(p, "exec_fault", str(exc))
                return p
        p.init_checks.append(Check("init", m.id, True))
    return p


def panic(p: Platform, reason: str, detail: str = ""):
    """Latch panic mode: de-energize every output.  The first reason wins."""
    if p.status != PANIC:
        p.status = PANIC
        p.panic_info = {"reason": reason, "cycle": p.cycle, "detail": detail}
    for m in p.mcus:
        m.bits = {}
    for name, ch in p.outputs.items():
        ch.command = ch.energy = ch.driven = 0
        ch.readback = p.stuck.get(name, 0)


def reset(p: Platform) -> Platform:
    """Hard reset: a fresh platform from the retained firmware."""
    return new_platform(p.fw)


def validate_input(frame: InputFrame, prev: Mapping[str, int], decls) -> Tuple[Dict[str, int], List[str]]:
    """Effective input levels plus the names of non-dynamic high inputs.

    A BOOL input at level 1 counts only if its pulse counter advanced since
    the previous frame; otherwise it reads as 0.  INT inputs pass through."""
    eff, flagged = {}, []
    for d in decls:
        sample = frame[d.name]
        if d.kind != "BOOL":
            eff[d.name] = sample.level
        elif sample.level and sample.pulse > prev.get(d.name, 0):
            eff[d.name] = 1
        else:
            eff[d.name] = 0
            if sample.level:
                flagged.append(d.name)
    return eff, flagged


def check_intra(m: McuState) -> Check:
    """Compare the variable spaces of image A and image B word by word."""
    pairs = zip(scalar_addresses(m.image_a.slots), scalar_addresses(m.image_b.slots))
    for k, ((_, addr_a), (_, addr_b)) in enumerate(pairs):
        if m.mem_a.read(addr_a) != m.mem_b.read(addr_b):
            return Check("intra", m.id, False, f"mismatch(slot {k})")
    return Check("intra", m.id, True)


def check_deferred(m: McuState, k: int) -> Check:
    """CRC the next ``k`` program bytes of each image against the reference."""
    bad = None
    for label, code, refs, attr in (("A", m.code_a, m.ref_slices_a, "cursor_a"),
                                    ("B", m.code_b, m.ref_slices_b, "cursor_b")):
        cur = getattr(m, attr)
        if bad is None and crc32(bytes(code[cur:cur + k])) != refs[cur // k]:
            bad = f"corruption(image {label}, offset {cur:#06x})"
        nxt = cur + k
        setattr(m, attr, nxt if nxt < len(code) else 0)
    return Check("deferred", m.id, bad is None, bad or "")


def inter_due(p: Platform) -> bool:
    n = p.cfg.inter_mcu_interval_cycles
    return p.cycle % n == n - 1


def check_inter(p: Platform) -> Check:
    """Exchange variable digests between the MCUs.  A missing answer is a
    failure."""
    m1, m2 = p.mcus
    dropped = p.drops > 0
    if dropped:
        p.drops -= 1
    digests = (m1.digest, m2.digest)
    m1.digest = m2.digest = 0
    if not (m1.alive and m2.alive):
        who = 1 if not m1.alive else 2
        return Check("inter", None, False, f"missing response(MCU{who})")
    if dropped:
        return Check("inter", None, False, "missing response(exchange dropped)")
    if digests[0] != digests[1]:
        return Check("inter", None, False, f"divergence({digests[0]:08x} != {digests[1]:08x})")
    return Check("inter", None, True)


def output_stage(p: Platform):
    m1, m2 = p.mcus
    for name, ch in p.outputs.items():
        ch.command = m1.bits.get(name, 0) if m1.alive else 0
        ch.energy = m2.bits.get(name, 0) if m2.alive else 0
        ch.driven = ch.command & ch.energy
        ch.readback = p.stuck.get(name, ch.driven)


def check_readback(p: Platform) -> Check:
    for name, ch in p.outputs.items():
        if ch.readback != ch.driven:
            return Check("readback", None, False, f"output_fault({name})")
    return Check("readback", None, True)


def _latch_bits(m: McuState):
    m.bits = {name: 1 if m.mem_a.read(addr) else 0
              for name, _, addr in output_channels(m.image_a.slots)}


def _flip_var(m: McuState, f: VarBitFlip):
    img, mem = (m.image_a, m.mem_a) if f.image == "A" else (m.image_b, m.mem_b)
    addrs = scalar_addresses(img.slots)
    if not 0 <= f.slot < len(addrs) or not 0 <= f.bit < 32:
        raise PlatformError(f"no slot {f.slot} bit {f.bit}")
    mem.flip_bit(addrs[f.slot][1], f.bit)


def _flip_program(m: McuState, f: ProgramByteFlip):
    code = m.code_a if f.image == "A" else m.code_b
    if not 0 <= f.offset < len(code):
        raise PlatformError(f"program offset {f.offset} outside image {f.image}")
    code[f.offset] ^= f.mask & 0xFF
    if f.image == "A":
        m.image_a = _replace_code(m.image_a, code)
    else:
        m.image_b = _replace_code(m.image_b, code)


def _replace_code(img, code: bytearray):
    return dataclasses.replace(img, code=bytes(code))


def step(p: Platform, frame: InputFrame, faults: Sequence = ()) -> CycleReport:
    """Run one sequencer cycle.  Failures latch PANIC and are reported."""
    if p.status != RUNNING:
        raise PlatformError("platform is in panic mode; only reset() leaves it")
    cfg = p.cfg
    rep = CycleReport(p.cycle, p.cycle * cfg.cycle_period_ms)
    late = []
    for f in faults:
        rep.faults.append({"kind": type(f).__name__, **f.__dict__})
        if isinstance(f, VarBitFlip):
            late.append(f)
        elif isinstance(f, ProgramByteFlip):
            _flip_program(p.mcu(f.mcu), f)
        elif isinstance(f, StuckOutput):
            if f.output not in p.outputs:
                raise PlatformError(f"no output channel {f.output!r}")
            p.stuck[f.output] = 1 if f.level else 0
        elif isinstance(f, HaltMcu):
            m = p.mcu(f.mcu)
            m.alive = False
            m.bits = {}
            output_stage(p)
        elif isinstance(f, DropInterMcu):
            p.drops += f.count
        elif isinstance(f, FreezePulse):
            p.frozen.setdefault(f.input, p.prev_pulse.get(f.input, 0))
        else:
            raise PlatformError(f"unknown fault {f!r}")

    # sequencer: read inputs
    decls = p.fw.inputs
    frame = {d.name: frame[d.name] for d in decls}
    for name, pulse in p.frozen.items():
        frame[name] = InputSample(frame[name].level, pulse)
    eff, flagged = validate_input(frame, p.prev_pulse, decls)
    p.prev_pulse = {n: s.pulse for n, s in frame.items()}
    rep.inputs = eff
    rep.nondynamic = flagged

    def finish(reason=None, detail=""):
        if reason:
            panic(p, reason, detail)
        rep.outputs = {n: dict(command=c.command, energy=c.energy, driven=c.driven,
                               readback=c.readback) for n, c in p.outputs.items()}
        rep.status = p.status
        rep.panic = p.panic_info
        rep.led = p.led
        p.cycle += 1
        return rep

    for d in decls:
        if d.kind == "INT" and not d.lo <= eff[d.name] <= d.hi:
            rep.checks.append(Check("input", None, False, f"domain({d.name})"))
            return finish("input_domain", f"{d.name}={eff[d.name]}")
        if d.kind == "BOOL" and frame[d.name].level not in (0, 1):
            rep.checks.append(Check("input", None, False, f"level({d.name})"))
            return finish("input_domain", f"{d.name} level {frame[d.name].level}")
    if flagged and cfg.nondynamic_panic:
        rep.checks.append(Check("input", None, False, f"nondynamic({','.join(flagged)})"))
        return finish("input_nondynamic", ",".join(flagged))

    # execute binary 1 then binary 2 on each live MCU
    for m in p.mcus:
        if not m.alive:
            continue
        for label, img, mem, run in (("A", m.image_a, m.mem_a, exec_a),
                                     ("B", m.image_b, m.mem_b, exec_b)):
            try:
                rep.costs[f"mcu{m.id}_{label.lower()}"] = run(img, mem, eff,
                                                              step_limit=SIM_STEP_LIMIT)
            except ExecFault as exc:
                rep.checks.append(Check("exec", m.id, False, f"image {label}: {exc}"))
                return finish("exec_fault", f"MCU{m.id} image {label}: {exc}")
    for f in late:
        _flip_var(p.mcu(f.mcu), f)
    for m in p.mcus:
        if not m.alive:
            continue
        words_a = state_words(m.image_a.slots, m.mem_a)
        rep.crcs[f"mcu{m.id}_a"] = f"{crc32(words_a):08x}"
        rep.crcs[f"mcu{m.id}_b"] = f"{crc32(state_words(m.image_b.slots, m.mem_b)):08x}"
        m.digest = crc32(words_a, m.digest)

    # safety library, fixed order
    live = [m for m in p.mcus if m.alive]
    for m in live:
        c = check_intra(m)
        rep.checks.append(c)
        if not c.ok:
            return finish("intra_mismatch", f"MCU{m.id} {c.detail}")
    for m in live:
        c = check_deferred(m, cfg.deferred_bytes_per_cycle)
        rep.checks.append(c)
        if not c.ok:
            return finish("deferred_corruption", f"MCU{m.id} {c.detail}")
    if inter_due(p):
        c = check_inter(p)
        rep.checks.append(c)
        if not c.ok:
            return finish("inter_" + c.detail.split("(")[0].replace(" ", "_"), c.detail)
    for m in live:
        _latch_bits(m)
    output_stage(p)
    r = cfg.readback_interval_cycles
    if p.cycle % r == r - 1:
        c = check_readback(p)
        rep.checks.append(c)
        if not c.ok:
            return finish("output_fault", c.detail)
    return finish()
