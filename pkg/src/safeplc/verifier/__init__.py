"""Proof obligation generation, automatic discharge and XML export."""

from .export import ExportError, export_pos, format_text
from .pos import (CYCLE_PRESERVES, INIT_ESTABLISHES, KINDS, WD_DIV, WD_INDEX, WD_RANGE,
                  ProofObligation, generate_pos, lift)
from .prover import (COUNTEREXAMPLE, DEFAULT_BUDGET, PROVED_ENUM, PROVED_INTERVAL, UNPROVEN,
                     ProofResult, evaluate_po, prove, prove_all, witness_env)

__all__ = [
    "ExportError", "export_pos", "format_text", "CYCLE_PRESERVES", "INIT_ESTABLISHES", "KINDS",
    "WD_DIV", "WD_INDEX", "WD_RANGE", "ProofObligation", "generate_pos", "lift",
    "COUNTEREXAMPLE", "DEFAULT_BUDGET", "PROVED_ENUM", "PROVED_INTERVAL", "UNPROVEN",
    "ProofResult", "evaluate_po", "prove", "prove_all", "witness_env",
]
