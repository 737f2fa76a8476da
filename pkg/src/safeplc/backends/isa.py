"""Byte encodings: one opcode byte followed by little-endian operands.

Operand formats: ``r`` register (u8), ``i`` signed 32-bit immediate,
``a`` u16 address or code offset, ``n`` u16 count, ``x`` u8 input index.
"""

from __future__ import annotations

import struct
from functools import lru_cache
from typing import Dict, NamedTuple, Tuple

from .memory import DecodeFault

_FMT = {"r": ("<B", 1), "i": ("<i", 4), "a": ("<H", 2), "n": ("<H", 2), "x": ("<B", 1)}


class Instr(NamedTuple):
    offset: int
    opcode: int
    mnemonic: str
    operands: Tuple[int, ...]
    size: int


class InstructionSet:
    def __init__(self, name: str, table: Dict[int, Tuple[str, str]], n_registers: int = 0):
        self.name = name
        self.table = table
        self.by_name = {mn: (op, fmt) for op, (mn, fmt) in table.items()}
        self.n_registers = n_registers
        self._decode = lru_cache(maxsize=1 << 16)(self._decode_uncached)

    @property
    def opcodes(self):
        return frozenset(self.table)

    @property
    def mnemonics(self):
        return frozenset(self.by_name)

    def encode(self, mnemonic: str, *operands: int) -> bytes:
        op, fmt = self.by_name[mnemonic]
        if len(operands) != len(fmt):
            raise ValueError(f"{mnemonic} takes {len(fmt)} operands")
        out = bytearray([op])
        for f, v in zip(fmt, operands):
            out += struct.pack(_FMT[f][0], v)
        return bytes(out)

    def size_of(self, mnemonic: str) -> int:
        return 1 + sum(_FMT[f][1] for f in self.by_name[mnemonic][1])

    def decode_at(self, code: bytes, pc: int) -> Instr:
        return self._decode(code, pc)

    def _decode_uncached(self, code: bytes, pc: int) -> Instr:
        if not 0 <= pc < len(code):
            raise DecodeFault(f"program counter outside code (length {len(code)})", pc)
        op = code[pc]
        if op not in self.table:
            raise DecodeFault(f"invalid opcode {op:#04x}", pc)
        mnemonic, fmt = self.table[op]
        pos = pc + 1
        operands = []
        for f in fmt:
            sfmt, width = _FMT[f]
            if pos + width > len(code):
                raise DecodeFault(f"truncated {mnemonic}", pc)
            v = struct.unpack_from(sfmt, code, pos)[0]
            if f == "r" and v >= self.n_registers:
                raise DecodeFault(f"invalid register r{v}", pc)
            operands.append(v)
            pos += width
        return Instr(pc, op, mnemonic, tuple(operands), pos - pc)

    def decode_all(self, code: bytes):
        pc = 0
        out = []
        while pc < len(code):
            ins = self.decode_at(code, pc)
            out.append(ins)
            pc += ins.size
        return out


def load_cost_table(text: str) -> Dict[str, int]:
    """Parse ``MNEMONIC = integer`` lines (``#`` comments allowed)."""
    table = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'MNEMONIC = cost'")
        cost = int(value.strip())
        if cost < 0:
            raise ValueError(f"line {lineno}: negative cost for {name.strip()}")
        table[name.strip().upper()] = cost
    return table
