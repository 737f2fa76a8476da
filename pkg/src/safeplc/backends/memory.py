"""Memory regions, variable slots and execution faults shared by both chains."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Sequence, Tuple

from ..b0 import ast as A
from ..b0.typecheck import TypedModel

WORD = 4


class Region(NamedTuple):
    name: str
    base: int
    end: int   # exclusive

    def __contains__(self, addr) -> bool:
        return self.base <= addr < self.end

    @property
    def size(self):
        return self.end - self.base


PROG_A = Region("PROG_A", 0x0000, 0x4000)
PROG_B = Region("PROG_B", 0x4000, 0x8000)
VAR_A = Region("VAR_A", 0x8000, 0xC000)
VAR_B = Region("VAR_B", 0xC000, 0x10000)


class ExecFault(Exception):
    """Any detectable execution failure.  ``offset`` is the code offset of
    the faulting instruction."""
    kind = "exec"

    def __init__(self, message: str, offset: int = -1):
        self.offset = offset
        super().__init__(f"{self.kind} fault at {offset:#06x}: {message}" if offset >= 0
                         else f"{self.kind} fault: {message}")


class DecodeFault(ExecFault):
    kind = "decode"


class RegionFault(ExecFault):
    kind = "region"


class DomainFault(ExecFault):
    """Runtime domain violation (``reason`` is range, index or div)."""
    kind = "domain"

    def __init__(self, reason: str, message: str, offset: int = -1):
        self.reason = reason
        super().__init__(f"{reason}: {message}", offset)


class StackFault(ExecFault):
    kind = "stack"


@dataclass(frozen=True)
class VarSlot:
    """Placement of one canonical state variable in a variable region."""
    name: str
    role: str            # "var" or "output"
    kind: str            # "BOOL" or "INT"
    length: int          # 0 for scalars
    lo: int
    hi: int
    address: int

    @property
    def count(self) -> int:
        return max(1, self.length)

    @property
    def type(self) -> A.B0Type:
        et = A.BOOL if self.kind == "BOOL" else A.IntType(self.lo, self.hi)
        return A.ArrayType(self.length, et) if self.length else et

    def element_address(self, j: int) -> int:
        return self.address + WORD * j


def layout(tm: TypedModel, addresses: Sequence[int]) -> Tuple[VarSlot, ...]:
    out = []
    outputs = {d.name for d in tm.outputs}
    for d, addr in zip(tm.state, addresses):
        et = A.elem_type(d.type)
        if isinstance(et, A.BoolType):
            kind, lo, hi = "BOOL", 0, 1
        else:
            kind, lo, hi = "INT", et.lo, et.hi
        length = d.type.length if isinstance(d.type, A.ArrayType) else 0
        out.append(VarSlot(d.name, "output" if d.name in outputs else "var",
                           kind, length, lo, hi, addr))
    return tuple(out)


@dataclass
class VmMemory:
    """Word-addressed view of one variable region.  ``initialized`` selects
    the entry point: INIT on the first execution, CYCLE afterwards."""
    region: Region
    data: bytearray = field(default=None, repr=False)
    initialized: bool = False

    def __post_init__(self):
        if self.data is None:
            self.data = bytearray(self.region.size)

    def _offset(self, addr: int, pc: int = -1) -> int:
        if not (self.region.base <= addr and addr + WORD <= self.region.end):
            raise RegionFault(f"address {addr:#06x} outside {self.region.name}", pc)
        return addr - self.region.base

    def read(self, addr: int, pc: int = -1) -> int:
        off = self._offset(addr, pc)
        return struct.unpack_from("<i", self.data, off)[0]

    def write(self, addr: int, value: int, pc: int = -1):
        off = self._offset(addr, pc)
        struct.pack_into("<i", self.data, off, value)

    def flip_bit(self, addr: int, bit: int):
        off = self._offset(addr) + bit // 8
        self.data[off] ^= 1 << (bit % 8)

    def copy(self) -> "VmMemory":
        return VmMemory(self.region, bytearray(self.data), self.initialized)


class InvalidRepresentation(Exception):
    """A memory word does not encode a value of its declared type."""

    def __init__(self, slot: int, name: str, raw: int):
        self.slot = slot
        self.name = name
        super().__init__(f"slot {slot} ({name}) holds invalid word {raw}")


def scalar_addresses(slots: Sequence[VarSlot]) -> List[Tuple[VarSlot, int]]:
    """Flattened scalar slots in canonical order (the unit of bit-flip
    fault addressing)."""
    out = []
    for s in slots:
        for j in range(s.count):
            out.append((s, s.element_address(j)))
    return out


def read_state(slots: Sequence[VarSlot], mem: VmMemory) -> Dict[str, object]:
    """Decode the canonical state.  Raises :class:`InvalidRepresentation`
    for a word outside its type's domain."""
    state = {}
    k = 0
    for s in slots:
        vals = []
        for j in range(s.count):
            raw = mem.read(s.element_address(j))
            if not s.lo <= raw <= s.hi:
                raise InvalidRepresentation(k, s.name, raw)
            vals.append(bool(raw) if s.kind == "BOOL" else raw)
            k += 1
        state[s.name] = tuple(vals) if s.length else vals[0]
    return state


def write_state(slots: Sequence[VarSlot], mem: VmMemory, state: Mapping[str, object]):
    for s in slots:
        v = state[s.name]
        for j, x in enumerate(v if s.length else (v,)):
            mem.write(s.element_address(j), int(x))


def snapshot(slots: Sequence[VarSlot], mem: VmMemory) -> bytes:
    """Canonical snapshot reconstructed from memory."""
    out = bytearray()
    for s, addr in scalar_addresses(slots):
        raw = mem.read(addr)
        if s.kind == "BOOL":
            out.append(raw & 0xFF)
        else:
            out += struct.pack("<i", raw)
    return bytes(out)


def validated_snapshot(slots: Sequence[VarSlot], mem: VmMemory) -> bytes:
    for k, (s, addr) in enumerate(scalar_addresses(slots)):
        raw = mem.read(addr)
        if not s.lo <= raw <= s.hi:
            raise InvalidRepresentation(k, s.name, raw)
    return snapshot(slots, mem)


