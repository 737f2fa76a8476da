"""Deterministic simulator of the dual-MCU safety platform."""

from .faults import (DropInterMcu, FreezePulse, HaltMcu, ProgramByteFlip, StuckOutput,
                     VarBitFlip, fault_from_json, fault_to_json)
from .platform import (PANIC, RUNNING, Check, CycleReport, InputSample, McuState, Platform,
                       PlatformError, check_deferred, check_inter, check_intra, check_readback,
                       new_platform, output_channels, panic, reset, state_words, step,
                       validate_input)
from .scenario import (FaultScenario, ScenarioError, Trace, load_scenario, parse_scenario,
                       run_scenario, write_trace)

__all__ = [
    "DropInterMcu", "FreezePulse", "HaltMcu", "ProgramByteFlip", "StuckOutput", "VarBitFlip",
    "fault_from_json", "fault_to_json", "PANIC", "RUNNING", "Check", "CycleReport",
    "InputSample", "McuState", "Platform", "PlatformError", "check_deferred", "check_inter",
    "check_intra", "check_readback", "new_platform", "output_channels", "panic", "reset",
    "state_words", "step", "validate_input", "FaultScenario", "ScenarioError", "Trace",
    "load_scenario", "parse_scenario", "run_scenario", "write_trace",
]
