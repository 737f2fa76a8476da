"""Chain A: B0 -> three-address register code -> encoded register-machine image.

Sixteen 64-bit registers, word-addressed variables in VAR_A allocated in
canonical order.  Expression temporaries are allocated stack-wise from r0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

from ..b0 import arith
from ..b0 import ast as A
from ..b0.typecheck import TypedModel
from ..crc import crc32
from .isa import InstructionSet
from .memory import (PROG_A, VAR_A, WORD, DomainFault, ExecFault, StackFault, VarSlot, VmMemory,
                     layout)

N_REGS = 16

ISA_A = InstructionSet("A", {
    0x01: ("LDI", "ri"),
    0x02: ("LD", "ra"),
    0x03: ("ST", "ra"),
    0x04: ("BND", "rn"),
    0x05: ("LDX", "rra"),
    0x06: ("STX", "rra"),
    0x07: ("ADD", "rrr"),
    0x08: ("SUB", "rrr"),
    0x09: ("MUL", "rrr"),
    0x0A: ("DIV", "rrr"),
    0x0B: ("MOD", "rrr"),
    0x0C: ("NEG", "rr"),
    0x0D: ("CEQ", "rrr"),
    0x0E: ("CNE", "rrr"),
    0x0F: ("CLT", "rrr"),
    0x10: ("CLE", "rrr"),
    0x11: ("AND", "rrr"),
    0x12: ("OR", "rrr"),
    0x13: ("NOT", "rr"),
    0x14: ("RCHK", "rii"),
    0x15: ("JMP", "a"),
    0x16: ("JZ", "ra"),
    0x17: ("IN", "rx"),
    0x18: ("HALT", ""),
}, n_registers=N_REGS)

DEFAULT_COSTS_A = {mn: 1 for mn in ISA_A.mnemonics}
DEFAULT_COSTS_A.update({"LD": 2, "ST": 2, "LDX": 2, "STX": 2, "MUL": 3, "DIV": 3, "MOD": 3})

STEP_LIMIT = 1_000_000


class CapacityError(Exception):
    pass


@dataclass(frozen=True)
class ImageA:
    code: bytes
    cycle_entry: int
    slots: Tuple[VarSlot, ...]
    inputs: Tuple[str, ...]
    scratch_base: int
    scratch_count: int
    code_crc: int

    @property
    def var_map(self) -> Dict[int, int]:
        return {k: s.address for k, s in enumerate(self.slots)}


class _Compiler:
    def __init__(self, tm: TypedModel):
        self.code = bytearray()
        addr = VAR_A.base
        addresses = []
        for d in tm.state:
            addresses.append(addr)
            addr += WORD * A.scalar_count(d.type)
        self.slots = layout(tm, addresses)
        self.addr = {s.name: s.address for s in self.slots}
        self.types = {d.name: d.type for d in tm.state}
        self.inputs = {d.name: k for k, d in enumerate(tm.inputs)}
        self.scratch_base = addr
        self.scratch_count = 0
        self.loop_slots: Dict[str, int] = {}

    def emit(self, mnemonic, *operands) -> int:
        at = len(self.code)
        self.code += ISA_A.encode(mnemonic, *operands)
        return at

    def patch(self, at: int, target: int):
        # jump target is always the last u16 operand
        size = ISA_A.size_of(ISA_A.table[self.code[at]][0])
        self.code[at + size - 2: at + size] = target.to_bytes(2, "little")

    def reg(self, r):
        if r >= N_REGS:
            raise CapacityError("expression needs more than 16 registers")
        return r

    def expr(self, e, r: int):
        r = self.reg(r)
        if isinstance(e, (A.IntLit, A.BoolLit)):
            self.emit("LDI", r, int(e.value))
        elif isinstance(e, A.Var):
            if e.name in self.loop_slots:
                self.emit("LD", r, self.loop_slots[e.name])
            elif e.name in self.inputs:
                self.emit("IN", r, self.inputs[e.name])
            else:
                self.emit("LD", r, self.addr[e.name])
        elif isinstance(e, A.Index):
            self.expr(e.index, r)
            self.emit("BND", r, self.types[e.name].length)
            self.emit("LDX", r, r, self.addr[e.name])
        elif isinstance(e, A.BinOp):
            self.expr(e.left, r)
            self.expr(e.right, self.reg(r + 1))
            op = {"+": "ADD", "-": "SUB", "*": "MUL", "div": "DIV", "mod": "MOD"}[e.op]
            self.emit(op, r, r, r + 1)
        elif isinstance(e, A.Neg):
            self.expr(e.operand, r)
            self.emit("NEG", r, r)
        elif isinstance(e, A.Cmp):
            self.expr(e.left, r)
            self.expr(e.right, self.reg(r + 1))
            op, a, b = {"=": ("CEQ", r, r + 1), "/=": ("CNE", r, r + 1),
                        "<": ("CLT", r, r + 1), "<=": ("CLE", r, r + 1),
                        ">": ("CLT", r + 1, r), ">=": ("CLE", r + 1, r)}[e.op]
            self.emit(op, r, a, b)
        elif isinstance(e, A.BoolOp):
            self.expr(e.left, r)
            self.expr(e.right, self.reg(r + 1))
            self.emit("AND" if e.op == "&" else "OR", r, r, r + 1)
        elif isinstance(e, A.Not):
            self.expr(e.operand, r)
            self.emit("NOT", r, r)
        else:
            raise TypeError(e)

    def stmts(self, stmts):
        for s in stmts:
            if isinstance(s, A.Assign):
                t = self.types[s.target]
                if s.index is None:
                    self.expr(s.value, 0)
                    if isinstance(t, A.IntType):
                        self.emit("RCHK", 0, t.lo, t.hi)
                    self.emit("ST", 0, self.addr[s.target])
                else:
                    self.expr(s.index, 0)
                    self.expr(s.value, 1)
                    self.emit("BND", 0, t.length)
                    if isinstance(t.elem, A.IntType):
                        self.emit("RCHK", 1, t.elem.lo, t.elem.hi)
                    self.emit("STX", 1, 0, self.addr[s.target])
            elif isinstance(s, A.If):
                exits = []
                n = len(s.branches)
                for k, (cond, body) in enumerate(s.branches):
                    self.expr(cond, 0)
                    skip = self.emit("JZ", 0, 0)
                    self.stmts(body)
                    if k < n - 1 or s.orelse:
                        exits.append(self.emit("JMP", 0))
                    self.patch(skip, len(self.code))
                self.stmts(s.orelse)
                for at in exits:
                    self.patch(at, len(self.code))
            else:
                lo, hi = s.bounds
                slot = self.scratch_base + WORD * self.scratch_count
                self.scratch_count += 1
                self.loop_slots[s.var] = slot
                self.emit("LDI", 0, lo)
                self.emit("ST", 0, slot)
                head = len(self.code)
                self.emit("LD", 0, slot)
                self.emit("LDI", 1, hi)
                self.emit("CLE", 0, 0, 1)
                leave = self.emit("JZ", 0, 0)
                self.stmts(s.body)
                self.emit("LD", 0, slot)
                self.emit("LDI", 1, 1)
                self.emit("ADD", 0, 0, 1)
                self.emit("ST", 0, slot)
                self.emit("JMP", head)
                self.patch(leave, len(self.code))
                del self.loop_slots[s.var]

    def compile(self, tm: TypedModel) -> ImageA:
        self.stmts(tm.init)
        self.emit("HALT")
        cycle_entry = len(self.code)
        self.stmts(tm.cycle)
        self.emit("HALT")
        if len(self.code) > PROG_A.size:
            raise CapacityError(f"code size {len(self.code)} exceeds {PROG_A.name}")
        if self.scratch_base + WORD * self.scratch_count > VAR_A.end:
            raise CapacityError(f"variables exceed {VAR_A.name}")
        code = bytes(self.code)
        return ImageA(code, cycle_entry, self.slots, tuple(self.inputs), self.scratch_base,
                      self.scratch_count, crc32(code))


def compile_a(tm: TypedModel) -> ImageA:
    """Compile a checked model to a register-machine image."""
    return _Compiler(tm).compile(tm)


def _input_vector(names: Sequence[str], inputs) -> list:
    if isinstance(inputs, Mapping):
        return [int(inputs[n]) for n in names]
    return [int(v) for v in inputs]


def _b(v) -> int:
    return 1 if v else 0


def exec_a(img: ImageA, mem: VmMemory, inputs=(), costs: Optional[Mapping[str, int]] = None,
           step_limit: int = STEP_LIMIT) -> int:
    """Run the INIT entry (first call) or the CYCLE entry and return the
    executed cost.  Faults surface as :class:`ExecFault` subclasses."""
    costs = DEFAULT_COSTS_A if costs is None else costs
    code = img.code
    pc = img.cycle_entry if mem.initialized else 0
    ins_vec = _input_vector(img.inputs, inputs) if mem.initialized else []
    regs = [0] * N_REGS
    total = 0
    decode = ISA_A.decode_at
    for _ in range(step_limit):
        ins = decode(code, pc)
        mn, ops = ins.mnemonic, ins.operands
        total += costs[mn]
        nxt = pc + ins.size
        if mn == "LDI":
            regs[ops[0]] = ops[1]
        elif mn == "LD":
            regs[ops[0]] = mem.read(ops[1], pc)
        elif mn == "ST":
            mem.write(ops[1], _to_i32(regs[ops[0]], pc), pc)
        elif mn == "BND":
            if not 0 <= regs[ops[0]] < ops[1]:
                raise DomainFault("index", f"index {regs[ops[0]]} outside 0..{ops[1] - 1}", pc)
        elif mn == "LDX":
            regs[ops[0]] = mem.read(ops[2] + WORD * regs[ops[1]], pc)
        elif mn == "STX":
            mem.write(ops[2] + WORD * regs[ops[1]], _to_i32(regs[ops[0]], pc), pc)
        elif mn in ("ADD", "SUB", "MUL"):
            a, b = regs[ops[1]], regs[ops[2]]
            regs[ops[0]] = a + b if mn == "ADD" else a - b if mn == "SUB" else a * b
        elif mn in ("DIV", "MOD"):
            a, b = regs[ops[1]], regs[ops[2]]
            if b == 0:
                raise DomainFault("div", f"{mn} by zero", pc)
            regs[ops[0]] = arith.tdiv(a, b) if mn == "DIV" else arith.tmod(a, b)
        elif mn == "NEG":
            regs[ops[0]] = -regs[ops[1]]
        elif mn == "CEQ":
            regs[ops[0]] = _b(regs[ops[1]] == regs[ops[2]])
        elif mn == "CNE":
            regs[ops[0]] = _b(regs[ops[1]] != regs[ops[2]])
        elif mn == "CLT":
            regs[ops[0]] = _b(regs[ops[1]] < regs[ops[2]])
        elif mn == "CLE":
            regs[ops[0]] = _b(regs[ops[1]] <= regs[ops[2]])
        elif mn == "AND":
            regs[ops[0]] = _b(regs[ops[1]] and regs[ops[2]])
        elif mn == "OR":
            regs[ops[0]] = _b(regs[ops[1]] or regs[ops[2]])
        elif mn == "NOT":
            regs[ops[0]] = _b(not regs[ops[1]])
        elif mn == "RCHK":
            v = regs[ops[0]]
            if not ops[1] <= v <= ops[2]:
                raise DomainFault("range", f"value {v} outside {ops[1]}..{ops[2]}", pc)
        elif mn == "JMP":
            nxt = ops[0]
        elif mn == "JZ":
            if regs[ops[0]] == 0:
                nxt = ops[1]
        elif mn == "IN":
            if ops[1] >= len(ins_vec):
                raise StackFault(f"input index {ops[1]} not wired", pc)
            regs[ops[0]] = ins_vec[ops[1]]
        elif mn == "HALT":
            mem.initialized = True
            return total
        pc = nxt
    raise ExecFault("watchdog: step limit exceeded", pc)


def _to_i32(v: int, pc: int) -> int:
    if not -(2 ** 31) <= v < 2 ** 31:
        raise DomainFault("range", f"value {v} does not fit a word", pc)
    return v


def disasm_a(img: ImageA) -> str:
    names = {}
    for s in img.slots:
        for j in range(s.count):
            names[s.element_address(j)] = s.name if not s.length else f"{s.name}({j})"
    lines = [f"; image A  cycle entry {img.cycle_entry:#06x}  crc {img.code_crc:08x}"]
    for ins in ISA_A.decode_all(img.code):
        if ins.offset == img.cycle_entry:
            lines.append("; -- CYCLE")
        elif ins.offset == 0:
            lines.append("; -- INIT")
        fmt = ISA_A.table[ins.opcode][1]
        parts = []
        for f, v in zip(fmt, ins.operands):
            parts.append(f"r{v}" if f == "r" else f"{v:#06x}" if f == "a" else str(v))
        text = f"{ins.offset:04x}  {ins.mnemonic:<5} {', '.join(parts)}".rstrip()
        ref = [names[v] for f, v in zip(fmt, ins.operands) if f == "a" and v in names]
        if ins.mnemonic in ("LD", "ST") and ref:
            text += f"    ; {ref[0]}"
        lines.append(text)
    return "\n".join(lines) + "\n"
