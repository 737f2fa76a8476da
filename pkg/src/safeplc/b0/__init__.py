"""The B0 control language: a fixed read-compute-write loop over typed state."""

from .ast import ArrayType, BoolType, BOOL, IntType, Model
from .interp import (B0RuntimeError, MachineState, canonical_snapshot, enumerate_inputs,
                     enumerate_states, initial_state, interpret_cycle)
from .parser import B0Error, B0SyntaxError, DuplicateDeclaration, parse, parse_expr
from .pretty import expr_str, pretty_print
from .typecheck import B0TypeError, TypedModel, typecheck


def load(source_text: str) -> TypedModel:
    """Parse and type-check in one step."""
    return typecheck(parse(source_text))


__all__ = [
    "ArrayType", "BoolType", "BOOL", "IntType", "Model", "B0RuntimeError", "MachineState",
    "canonical_snapshot", "enumerate_inputs", "enumerate_states", "initial_state",
    "interpret_cycle", "B0Error", "B0SyntaxError", "DuplicateDeclaration", "parse",
    "parse_expr", "expr_str", "pretty_print", "B0TypeError", "TypedModel", "typecheck", "load",
]
