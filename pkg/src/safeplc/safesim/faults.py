"""Fault descriptions injectable into a simulated platform."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class VarBitFlip:
    """Flip one bit of a scalar slot after the cycle executes."""
    mcu: int       # 1 or 2
    image: str     # "A" or "B"
    slot: int      # flattened canonical scalar index
    bit: int       # 0..31


@dataclass(frozen=True)
class ProgramByteFlip:
    mcu: int
    image: str
    offset: int
    mask: int = 0xFF


@dataclass(frozen=True)
class StuckOutput:
    output: str
    level: int


@dataclass(frozen=True)
class HaltMcu:
    mcu: int


@dataclass(frozen=True)
class DropInterMcu:
    count: int = 1


@dataclass(frozen=True)
class FreezePulse:
    input: str


FAULT_KINDS = {cls.__name__: cls for cls in
               (VarBitFlip, ProgramByteFlip, StuckOutput, HaltMcu, DropInterMcu, FreezePulse)}


def fault_to_json(f) -> dict:
    return {"kind": type(f).__name__, **asdict(f)}


def fault_from_json(d: dict):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in FAULT_KINDS:
        raise ValueError(f"unknown fault kind {kind!r}")
    d.pop("cycle", None)
    try:
        f = FAULT_KINDS[kind](**d)
    except TypeError as exc:
        raise ValueError(f"bad {kind} fault: {exc}") from None
    if hasattr(f, "mcu") and f.mcu not in (1, 2):
        raise ValueError(f"{kind}: mcu must be 1 or 2")
    if hasattr(f, "image") and f.image not in ("A", "B"):
        raise ValueError(f"{kind}: image must be 'A' or 'B'")
    return f
