"""Chain B: B0 -> stack bytecode for a small operand-stack VM.

Variables live in VAR_B in reverse canonical order after the loop-counter
scratch area, so the two images never share a layout.  Every FOR loop is
emitted in one fixed shape and recorded in ``loop_table``::

    PUSH lo; STORE k                      setup
  head:
    LOAD k; PUSH hi; LE; JZ exit          test, runs trip+1 times
    <body>
    LOAD k; PUSH 1; ADD; STORE k; JMP head
  exit:
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, NamedTuple, Optional, Tuple

from ..b0 import arith
from ..b0 import ast as A
from ..b0.typecheck import TypedModel
from ..crc import crc32
from .chain_a import CapacityError, _input_vector, _to_i32
from .isa import InstructionSet
from .memory import PROG_B, VAR_B, WORD, DomainFault, ExecFault, StackFault, VarSlot, VmMemory, layout

ISA_B = InstructionSet("B", {
    0x41: ("PUSH", "i"),
    0x42: ("LOAD", "a"),
    0x43: ("STORE", "a"),
    0x44: ("LOADX", "an"),
    0x45: ("STOREX", "an"),
    0x46: ("ADD", ""),
    0x47: ("SUB", ""),
    0x48: ("MUL", ""),
    0x49: ("DIV", ""),
    0x4A: ("MOD", ""),
    0x4B: ("NEG", ""),
    0x4C: ("EQ", ""),
    0x4D: ("NE", ""),
    0x4E: ("LT", ""),
    0x4F: ("LE", ""),
    0x50: ("GT", ""),
    0x51: ("GE", ""),
    0x52: ("AND", ""),
    0x53: ("OR", ""),
    0x54: ("NOT", ""),
    0x55: ("RANGE", "ii"),
    0x56: ("JMP", "a"),
    0x57: ("JZ", "a"),
    0x58: ("IN", "x"),
    0x59: ("HALT", ""),
})

STACK_LIMIT = 256
STEP_LIMIT = 1_000_000
VAR_B_START = VAR_B.base + 0x10


class LoopEntry(NamedTuple):
    head: int
    exit: int
    trip_count: int


@dataclass(frozen=True)
class ImageB:
    code: bytes
    cycle_entry: int
    slots: Tuple[VarSlot, ...]
    inputs: Tuple[str, ...]
    scratch_base: int
    scratch_count: int
    loop_table: Tuple[LoopEntry, ...]
    code_crc: int

    @property
    def var_map(self) -> Dict[int, int]:
        return {k: s.address for k, s in enumerate(self.slots)}


def _count_loops(stmts) -> int:
    n = 0
    for s in stmts:
        if isinstance(s, A.For):
            n += 1 + _count_loops(s.body)
        elif isinstance(s, A.If):
            n += sum(_count_loops(b) for _, b in s.branches) + _count_loops(s.orelse)
    return n


class _Compiler:
    def __init__(self, tm: TypedModel):
        self.code = bytearray()
        self.scratch_base = VAR_B_START
        n_loops = _count_loops(tm.init) + _count_loops(tm.cycle)
        addr = self.scratch_base + WORD * n_loops
        addresses: List[int] = [0] * len(tm.state)
        for k in reversed(range(len(tm.state))):
            addresses[k] = addr
            addr += WORD * A.scalar_count(tm.state[k].type)
        if addr > VAR_B.end:
            raise CapacityError(f"variables exceed {VAR_B.name}")
        self.slots = layout(tm, addresses)
        self.addr = {s.name: s.address for s in self.slots}
        self.types = {d.name: d.type for d in tm.state}
        self.inputs = {d.name: k for k, d in enumerate(tm.inputs)}
        self.scratch_count = 0
        self.loop_slots: Dict[str, int] = {}
        self.loops: List[LoopEntry] = []

    def emit(self, mnemonic, *operands) -> int:
        at = len(self.code)
        self.code += ISA_B.encode(mnemonic, *operands)
        return at

    def patch(self, at: int, target: int):
        self.code[at + 1: at + 3] = target.to_bytes(2, "little")

    def expr(self, e):
        if isinstance(e, (A.IntLit, A.BoolLit)):
            self.emit("PUSH", int(e.value))
        elif isinstance(e, A.Var):
            if e.name in self.loop_slots:
                self.emit("LOAD", self.loop_slots[e.name])
            elif e.name in self.inputs:
                self.emit("IN", self.inputs[e.name])
            else:
                self.emit("LOAD", self.addr[e.name])
        elif isinstance(e, A.Index):
            self.expr(e.index)
            self.emit("LOADX", self.addr[e.name], self.types[e.name].length)
        elif isinstance(e, A.BinOp):
            self.expr(e.left)
            self.expr(e.right)
            self.emit({"+": "ADD", "-": "SUB", "*": "MUL", "div": "DIV", "mod": "MOD"}[e.op])
        elif isinstance(e, A.Neg):
            self.expr(e.operand)
            self.emit("NEG")
        elif isinstance(e, A.Cmp):
            self.expr(e.left)
            self.expr(e.right)
            self.emit({"=": "EQ", "/=": "NE", "<": "LT", "<=": "LE", ">": "GT", ">=": "GE"}[e.op])
        elif isinstance(e, A.BoolOp):
            self.expr(e.left)
            self.expr(e.right)
            self.emit("AND" if e.op == "&" else "OR")
        elif isinstance(e, A.Not):
            self.expr(e.operand)
            self.emit("NOT")
        else:
            raise TypeError(e)

    def stmts(self, stmts):
        for s in stmts:
            if isinstance(s, A.Assign):
                t = self.types[s.target]
                if s.index is None:
                    self.expr(s.value)
                    if isinstance(t, A.IntType):
                        self.emit("RANGE", t.lo, t.hi)
                    self.emit("STORE", self.addr[s.target])
                else:
                    self.expr(s.index)
                    self.expr(s.value)
                    if isinstance(t.elem, A.IntType):
                        self.emit("RANGE", t.elem.lo, t.elem.hi)
                    self.emit("STOREX", self.addr[s.target], t.length)
            elif isinstance(s, A.If):
                exits = []
                n = len(s.branches)
                for k, (cond, body) in enumerate(s.branches):
                    self.expr(cond)
                    skip = self.emit("JZ", 0)
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
                self.emit("PUSH", lo)
                self.emit("STORE", slot)
                head = len(self.code)
                self.emit("LOAD", slot)
                self.emit("PUSH", hi)
                self.emit("LE")
                leave = self.emit("JZ", 0)
                self.stmts(s.body)
                self.emit("LOAD", slot)
                self.emit("PUSH", 1)
                self.emit("ADD")
                self.emit("STORE", slot)
                self.emit("JMP", head)
                self.patch(leave, len(self.code))
                self.loops.append(LoopEntry(head, len(self.code), s.trip_count))
                del self.loop_slots[s.var]

    def compile(self, tm: TypedModel) -> ImageB:
        self.stmts(tm.init)
        self.emit("HALT")
        cycle_entry = len(self.code)
        self.stmts(tm.cycle)
        self.emit("HALT")
        if len(self.code) > PROG_B.size:
            raise CapacityError(f"code size {len(self.code)} exceeds {PROG_B.name}")
        code = bytes(self.code)
        return ImageB(code, cycle_entry, self.slots, tuple(self.inputs), self.scratch_base,
                      self.scratch_count, tuple(sorted(self.loops)), crc32(code))


def compile_b(tm: TypedModel) -> ImageB:
    """Compile a checked model to a stack-bytecode image."""
    return _Compiler(tm).compile(tm)


DEFAULT_COSTS_B = {mn: 1 for mn in ISA_B.mnemonics}
DEFAULT_COSTS_B.update({"LOAD": 2, "STORE": 2, "LOADX": 2, "STOREX": 2,
                        "MUL": 3, "DIV": 3, "MOD": 3})


def exec_b(img: ImageB, mem: VmMemory, inputs=(), costs: Optional[Mapping[str, int]] = None,
           step_limit: int = STEP_LIMIT) -> int:
    """Stack-VM counterpart of :func:`exec_a`."""
    costs = DEFAULT_COSTS_B if costs is None else costs
    code = img.code
    pc = img.cycle_entry if mem.initialized else 0
    ins_vec = _input_vector(img.inputs, inputs) if mem.initialized else []
    stack: List[int] = []
    push, pop = stack.append, stack.pop
    total = 0
    decode = ISA_B.decode_at
    try:
        for _ in range(step_limit):
            ins = decode(code, pc)
            mn, ops = ins.mnemonic, ins.operands
            total += costs[mn]
            nxt = pc + ins.size
            if mn == "PUSH":
                push(ops[0])
            elif mn == "LOAD":
                push(mem.read(ops[0], pc))
            elif mn == "STORE":
                mem.write(ops[0], _to_i32(pop(), pc), pc)
            elif mn == "LOADX":
                i = pop()
                if not 0 <= i < ops[1]:
                    raise DomainFault("index", f"index {i} outside 0..{ops[1] - 1}", pc)
                push(mem.read(ops[0] + WORD * i, pc))
            elif mn == "STOREX":
                v = pop()
                i = pop()
                if not 0 <= i < ops[1]:
                    raise DomainFault("index", f"index {i} outside 0..{ops[1] - 1}", pc)
                mem.write(ops[0] + WORD * i, _to_i32(v, pc), pc)
            elif mn in ("ADD", "SUB", "MUL", "DIV", "MOD"):
                b = pop()
                a = pop()
                if mn == "ADD":
                    push(a + b)
                elif mn == "SUB":
                    push(a - b)
                elif mn == "MUL":
                    push(a * b)
                else:
                    if b == 0:
                        raise DomainFault("div", f"{mn} by zero", pc)
                    push(arith.tdiv(a, b) if mn == "DIV" else arith.tmod(a, b))
            elif mn == "NEG":
                push(-pop())
            elif mn in _REL:
                b = pop()
                a = pop()
                push(1 if _REL[mn](a, b) else 0)
            elif mn == "AND":
                b = pop()
                a = pop()
                push(1 if a and b else 0)
            elif mn == "OR":
                b = pop()
                a = pop()
                push(1 if a or b else 0)
            elif mn == "NOT":
                push(0 if pop() else 1)
            elif mn == "RANGE":
                v = stack[-1]
                if not ops[0] <= v <= ops[1]:
                    raise DomainFault("range", f"value {v} outside {ops[0]}..{ops[1]}", pc)
            elif mn == "JMP":
                nxt = ops[0]
            elif mn == "JZ":
                if pop() == 0:
                    nxt = ops[0]
            elif mn == "IN":
                if ops[0] >= len(ins_vec):
                    raise StackFault(f"input index {ops[0]} not wired", pc)
                push(ins_vec[ops[0]])
            elif mn == "HALT":
                if stack:
                    raise StackFault(f"{len(stack)} values left on stack at HALT", pc)
                mem.initialized = True
                return total
            if len(stack) > STACK_LIMIT:
                raise StackFault("operand stack overflow", pc)
            pc = nxt
    except IndexError:
        raise StackFault("operand stack underflow", pc) from None
    raise ExecFault("watchdog: step limit exceeded", pc)


_REL = {
    "EQ": lambda a, b: a == b,
    "NE": lambda a, b: a != b,
    "LT": lambda a, b: a < b,
    "LE": lambda a, b: a <= b,
    "GT": lambda a, b: a > b,
    "GE": lambda a, b: a >= b,
}


def disasm_b(img: ImageB) -> str:
    names = {}
    for s in img.slots:
        names[s.address] = s.name
    heads = {e.head: e for e in img.loop_table}
    lines = [f"; image B  cycle entry {img.cycle_entry:#06x}  crc {img.code_crc:08x}"]
    for ins in ISA_B.decode_all(img.code):
        if ins.offset == 0:
            lines.append("; -- INIT")
        elif ins.offset == img.cycle_entry:
            lines.append("; -- CYCLE")
        if ins.offset in heads:
            e = heads[ins.offset]
            lines.append(f"; loop head, exit {e.exit:#06x}, trip count {e.trip_count}")
        fmt = ISA_B.table[ins.opcode][1]
        parts = [f"{v:#06x}" if f == "a" else str(v) for f, v in zip(fmt, ins.operands)]
        text = f"{ins.offset:04x}  {ins.mnemonic:<6} {', '.join(parts)}".rstrip()
        if fmt and fmt[0] == "a" and ins.mnemonic not in ("JMP", "JZ") and ins.operands[0] in names:
            text += f"    ; {names[ins.operands[0]]}"
        lines.append(text)
    return "\n".join(lines) + "\n"
