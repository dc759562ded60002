"""Decoupled access-execute toolkit: loop IR, profiler, phase generator,
and a DVFS-aware timing and energy simulator."""

__version__ = "0.1.0"
