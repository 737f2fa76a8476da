"""Two deliberately different compilation chains and their executors."""

from .chain_a import (DEFAULT_COSTS_A, ISA_A, CapacityError, ImageA, compile_a, disasm_a,
                      exec_a)
from .chain_b import (DEFAULT_COSTS_B, ISA_B, ImageB, LoopEntry, compile_b, disasm_b, exec_b)
from .memory import (PROG_A, PROG_B, VAR_A, VAR_B, DecodeFault, DomainFault, ExecFault,
                     InvalidRepresentation, RegionFault, StackFault, VarSlot, VmMemory,
                     read_state, scalar_addresses, snapshot, validated_snapshot, write_state)


def disasm(img) -> str:
    """One-instruction-per-line listing of either image kind."""
    if isinstance(img, ImageA):
        return disasm_a(img)
    if isinstance(img, ImageB):
        return disasm_b(img)
    raise TypeError(f"not an image: {type(img).__name__}")


def new_memory(img) -> VmMemory:
    return VmMemory(VAR_A if isinstance(img, ImageA) else VAR_B)


__all__ = [
    "DEFAULT_COSTS_A", "ISA_A", "CapacityError", "ImageA", "compile_a", "disasm_a", "exec_a",
    "DEFAULT_COSTS_B", "ISA_B", "ImageB", "LoopEntry", "compile_b", "disasm_b", "exec_b",
    "PROG_A", "PROG_B", "VAR_A", "VAR_B", "DecodeFault", "DomainFault", "ExecFault",
    "InvalidRepresentation", "RegionFault", "StackFault", "VarSlot", "VmMemory", "read_state",
    "scalar_addresses", "snapshot", "validated_snapshot", "write_state", "disasm", "new_memory",
]
