"""Offline cache profiling of DIR programs.

Runs the entry function once against the machine's L1 model with a
blocking-load memory: every miss stalls the core for the full memory
latency at f_max.  The result ranks loads by the stall cycles they
caused and measures each canonical loop's cache footprint per iteration,
the two inputs the phase generator needs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .cfg import find_loops
from .ir import Load, Program, print_program, validate_program
from .ir.interp import (
    DEFAULT_FUEL,
    compile_function,
    default_mem_size,
    init_memory,
    run_compiled,
    with_seed,
)
from .machine import LruCache, MachineConfig

PROFILE_VERSION = 1


class ProfileError(ValueError):
    """Raised for unusable profile files or unprofilable programs."""


def program_digest(prog: Program) -> str:
    return hashlib.sha256(print_program(prog).encode()).hexdigest()


@dataclass
class LoadStats:
    id: int
    exec_count: int = 0
    miss_count: int = 0
    stall_cycles: int = 0
    lines: int = 0  # distinct cache lines touched


@dataclass
class LoopFootprint:
    header: str
    bytes_per_iter: float


@dataclass
class ProfileReport:
    program_digest: str
    machine_digest: str
    total_stall_cycles: int
    loads: list[LoadStats] = field(default_factory=list)
    loops: list[LoopFootprint] = field(default_factory=list)
    version: int = PROFILE_VERSION

    def load(self, load_id: int) -> LoadStats | None:
        for st in self.loads:
            if st.id == load_id:
                return st
        return None

    def footprint(self, header: str) -> float | None:
        for lf in self.loops:
            if lf.header == header:
                return lf.bytes_per_iter
        return None

    def matches(self, prog: Program, machine: MachineConfig) -> bool:
        return (self.program_digest == program_digest(prog)
                and self.machine_digest == machine.digest())


def profile_run(prog: Program, machine: MachineConfig,
                input_seed: int = 0) -> ProfileReport:
    """Profile one run of the program materialized with input_seed.

    The digest stored in the report identifies the seeded program, so a
    profile can only be replayed against the same input instance.
    """
    seeded = with_seed(prog, input_seed)
    diags = validate_program(seeded)
    if diags:
        raise ProfileError("cannot profile an invalid program: "
                           + "; ".join(str(d) for d in diags[:3]))
    fn = seeded.entry_function()
    cache = LruCache(machine.l1)
    lat = machine.mem_latency_cycles(machine.f_max_ghz)
    line_bytes = machine.l1.line_bytes

    exec_count: dict[int, int] = {}
    miss_count: dict[int, int] = {}
    lines_of: dict[int, set[int]] = {}
    for blk in fn.blocks:
        for instr in blk.body:
            if isinstance(instr, Load):
                exec_count[instr.id] = 0
                miss_count[instr.id] = 0
                lines_of[instr.id] = set()

    def on_load(lid: int, addr: int) -> None:
        line = addr // line_bytes
        exec_count[lid] += 1
        lines_of[lid].add(line)
        if cache.contains(line):
            cache.touch(line)
        else:
            miss_count[lid] += 1
            cache.install(line)

    mem = init_memory(seeded, default_mem_size(seeded))
    env = {p: 0 for p in fn.params}
    counts: dict[str, int] = {}
    run_compiled(compile_function(fn), env, mem, [], counts,
                 [DEFAULT_FUEL], len(mem), on_load=on_load)

    loads = [LoadStats(id=i, exec_count=exec_count[i], miss_count=miss_count[i],
                       stall_cycles=miss_count[i] * lat, lines=len(lines_of[i]))
             for i in sorted(exec_count)]

    block_of = {instr.id: blk.label for blk in fn.blocks for instr in blk.body}
    loops = []
    for li in find_loops(fn).loops:
        trips = counts.get(li.latch, 0)
        if trips <= 0:
            continue
        touched: set[int] = set()
        for lid, ls in lines_of.items():
            if block_of[lid] in li.body:
                touched |= ls
        loops.append(LoopFootprint(
            header=li.header,
            bytes_per_iter=len(touched) * line_bytes / trips,
        ))

    return ProfileReport(
        program_digest=program_digest(seeded),
        machine_digest=machine.digest(),
        total_stall_cycles=sum(s.stall_cycles for s in loads),
        loads=loads,
        loops=loops,
    )


# -- criticality -------------------------------------------------------------


@dataclass(frozen=True)
class CriticalSet:
    """Loads whose stall share reached the threshold."""

    ids: frozenset[int]
    theta: Fraction

    def __contains__(self, load_id: int) -> bool:
        return load_id in self.ids


def classify_critical(report: ProfileReport, theta: float | Fraction = Fraction(1, 100)) -> CriticalSet:
    """Pick the loads worth prefetching: stall share >= theta, and at
    least one actual miss."""
    th = Fraction(str(theta)) if not isinstance(theta, Fraction) else theta
    if not 0 <= th <= 1:
        raise ProfileError(f"theta {th} outside [0, 1]")
    total = report.total_stall_cycles
    if total <= 0:
        return CriticalSet(ids=frozenset(), theta=th)
    ids = frozenset(
        s.id for s in report.loads
        if s.miss_count > 0 and Fraction(s.stall_cycles, total) >= th
    )
    return CriticalSet(ids=ids, theta=th)


# -- persistence -------------------------------------------------------------

_TOP_KEYS = {"version", "program_digest", "machine_digest",
             "total_stall_cycles", "loads", "loops"}
_LOAD_KEYS = {"id", "exec", "miss", "stall", "lines"}
_LOOP_KEYS = {"header", "bytes_per_iter"}


def report_to_json(report: ProfileReport) -> dict:
    return {
        "version": report.version,
        "program_digest": report.program_digest,
        "machine_digest": report.machine_digest,
        "total_stall_cycles": report.total_stall_cycles,
        "loads": [
            {"id": s.id, "exec": s.exec_count, "miss": s.miss_count,
             "stall": s.stall_cycles, "lines": s.lines}
            for s in report.loads
        ],
        "loops": [
            {"header": lf.header, "bytes_per_iter": lf.bytes_per_iter}
            for lf in report.loops
        ],
    }


def write_profile(report: ProfileReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_json(report), indent=2) + "\n")


def _need(d: dict, key: str, kinds, where: str):
    if key not in d:
        raise ProfileError(f"{where}: missing key {key!r}")
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, kinds):
        raise ProfileError(f"{where}: key {key!r} has the wrong type")
    return v


def report_from_json(data, where: str = "profile") -> ProfileReport:
    if not isinstance(data, dict):
        raise ProfileError(f"{where}: expected an object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ProfileError(f"{where}: unknown keys {sorted(unknown)}")
    version = _need(data, "version", int, where)
    if version != PROFILE_VERSION:
        raise ProfileError(f"{where}: unsupported version {version}")
    loads = []
    raw_loads = _need(data, "loads", list, where)
    for k, entry in enumerate(raw_loads):
        ctx = f"{where}: loads[{k}]"
        if not isinstance(entry, dict):
            raise ProfileError(f"{ctx}: expected an object")
        if set(entry) - _LOAD_KEYS:
            raise ProfileError(f"{ctx}: unknown keys {sorted(set(entry) - _LOAD_KEYS)}")
        loads.append(LoadStats(
            id=_need(entry, "id", int, ctx),
            exec_count=_need(entry, "exec", int, ctx),
            miss_count=_need(entry, "miss", int, ctx),
            stall_cycles=_need(entry, "stall", int, ctx),
            lines=_need(entry, "lines", int, ctx),
        ))
    loops = []
    raw_loops = _need(data, "loops", list, where)
    for k, entry in enumerate(raw_loops):
        ctx = f"{where}: loops[{k}]"
        if not isinstance(entry, dict):
            raise ProfileError(f"{ctx}: expected an object")
        if set(entry) - _LOOP_KEYS:
            raise ProfileError(f"{ctx}: unknown keys {sorted(set(entry) - _LOOP_KEYS)}")
        loops.append(LoopFootprint(
            header=_need(entry, "header", str, ctx),
            bytes_per_iter=float(_need(entry, "bytes_per_iter", (int, float), ctx)),
        ))
    return ProfileReport(
        program_digest=_need(data, "program_digest", str, where),
        machine_digest=_need(data, "machine_digest", str, where),
        total_stall_cycles=_need(data, "total_stall_cycles", int, where),
        loads=loads,
        loops=loops,
        version=version,
    )


def read_profile(path: str | Path) -> ProfileReport:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProfileError(f"{path}: invalid JSON at offset {e.pos}: {e.msg}")
    return report_from_json(data, where=str(path))
