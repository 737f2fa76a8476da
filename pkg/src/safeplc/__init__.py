"""Dual-chain B0 toolchain and deterministic dual-MCU safety platform simulator."""

__version__ = "0.1.0"
