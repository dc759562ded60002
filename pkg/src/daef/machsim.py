"""Timing and energy simulation of phase schedules.

An in-order core runs a schedule of function activations, each at its own
frequency.  The L1 cache, the miss-handling registers and the register
environment persist across runs within one simulation, which is the whole
point: an access slice warms the cache that the following execute slice
reads.  Time is kept in exact nanosecond Fractions on a single wall clock;
cycle counts are per run, converted through the run's frequency.

Cost model per retired node: one core cycle, plus hit_cycles for a load
that hits, plus ceil(mem_latency_ns * f) blocking cycles for a load that
misses outright.  A load whose line is already in flight waits only the
remaining wall time.  A prefetch retires in its single cycle after
allocating a miss register; when all registers are busy it first waits
for the oldest to complete.  Completed fills install into the cache just
before each memory access and in bulk at the end of every run (phase
boundaries drain).  Stores write memory directly and do not touch the
cache.

Frequency changes between runs, the one-time specialization of the access
phase, and optional profiling cost are charged as overhead: wall time at
zero-IPC power.
"""

from __future__ import annotations

import dataclasses
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction

from .daegen import PhasePlan
from .ir import Program, validate_program
from .ir.interp import (
    DEFAULT_FUEL,
    compile_function,
    default_mem_size,
    init_memory,
    memory_digest,
    run_compiled,
)
from .machine import LruCache, MachineConfig
from .profiler import program_digest

MODES = ("baseline", "static_dae", "dynamic_dae")

CAT_ACCESS = "access"
CAT_EXECUTE = "execute"
CAT_OVERHEAD = "overhead"
CATEGORIES = (CAT_ACCESS, CAT_EXECUTE, CAT_OVERHEAD)


class MachSimError(ValueError):
    pass


@dataclass
class PhaseRun:
    """One schedule entry: a function activation or a bare charge.

    charge is (kind, amount): for "jit" the amount is nanoseconds, for
    "profiling" it is a fraction of this run's own wall time, added as
    overhead right after the run.  Frequency switches are not scheduled
    explicitly; the simulator charges dvfs_switch_ns whenever the
    frequency differs from the previous run's.
    """
    function: str | None
    frequency: Fraction
    category: str
    slice_index: int | None = None
    args: dict[str, int] = field(default_factory=dict)
    writeback: bool = False
    charge: tuple[str, Fraction] | None = None


@dataclass
class RunRecord:
    kind: str  # "run" | "jit" | "dvfs_switch" | "profiling"
    function: str | None
    frequency: Fraction
    category: str
    slice_index: int | None
    cycles: Fraction
    wall_ns: Fraction
    energy: Fraction
    instr_count: int

    @property
    def ipc(self) -> Fraction:
        return self.instr_count / self.cycles if self.cycles else Fraction(0)


@dataclass
class CategoryStats:
    cycles: Fraction = Fraction(0)
    wall_ns: Fraction = Fraction(0)
    energy: Fraction = Fraction(0)
    instr_count: int = 0

    @property
    def ipc(self) -> Fraction:
        return self.instr_count / self.cycles if self.cycles else Fraction(0)

    def add(self, r: RunRecord) -> None:
        self.cycles += r.cycles
        self.wall_ns += r.wall_ns
        self.energy += r.energy
        self.instr_count += r.instr_count


@dataclass
class SimReport:
    categories: dict[str, CategoryStats]
    total: CategoryStats
    runs: list[RunRecord]
    output: list[int]
    memory_digest: str
    program_digest: str
    machine_digest: str
    normalized_time: Fraction | None = None
    normalized_energy: Fraction | None = None


class _Core:
    """Wall clock, cache and miss registers shared by all runs."""

    def __init__(self, machine: MachineConfig):
        self.m = machine
        self.cache = LruCache(machine.l1)
        self.mshr: OrderedDict[int, Fraction] = OrderedDict()  # line -> completion ns
        self.wall = Fraction(0)


class _PhaseClock:
    """Per-run accounting driven by the interpreter hooks.

    Base cycles accumulate per block and are flushed to the wall clock
    before each memory access, so fills complete at instants consistent
    with the work retired so far (at block granularity).
    """

    def __init__(self, core: _Core, f: Fraction):
        self.core = core
        self.f = f
        self.lat_cycles = core.m.mem_latency_cycles(f)
        self.hit_cycles = core.m.l1.hit_cycles
        self.pending = 0
        self.cycles = Fraction(0)
        self.instrs = 0

    def on_block(self, ncount: int) -> None:
        self.pending += ncount
        self.instrs += ncount

    def _flush(self) -> None:
        if self.pending:
            self.cycles += self.pending
            self.core.wall += Fraction(self.pending) / self.f
            self.pending = 0

    def _sweep(self) -> None:
        core = self.core
        while core.mshr:
            line, done = next(iter(core.mshr.items()))
            if done > core.wall:
                break
            core.mshr.popitem(last=False)
            core.cache.install(line)

    def _stall_until(self, when: Fraction) -> None:
        if when > self.core.wall:
            self.cycles += (when - self.core.wall) * self.f
            self.core.wall = when

    def on_load(self, instr_id: int, addr: int) -> None:
        self._flush()
        self._sweep()
        core = self.core
        line = core.cache.line_of(addr)
        if core.cache.contains(line):
            core.cache.touch(line)
        elif line in core.mshr:
            # Join the in-flight fill, then read through the cache.
            self._stall_until(core.mshr.pop(line))
            core.cache.install(line)
        else:
            # Blocking miss: the line is delivered directly.
            self.cycles += self.lat_cycles
            core.wall += Fraction(self.lat_cycles) / self.f
            core.cache.install(line)
            return
        self.cycles += self.hit_cycles
        core.wall += Fraction(self.hit_cycles) / self.f

    def on_prefetch(self, instr_id: int, addr: int) -> None:
        self._flush()
        self._sweep()
        core = self.core
        line = core.cache.line_of(addr)
        if core.cache.contains(line):
            core.cache.touch(line)
            return
        if line in core.mshr:
            return
        if len(core.mshr) >= core.m.mshr_count:
            old_line, done = core.mshr.popitem(last=False)
            self._stall_until(done)
            core.cache.install(old_line)
        core.mshr[line] = core.wall + core.m.mem_latency_ns

    def drain(self) -> None:
        self._flush()
        core = self.core
        while core.mshr:
            line, done = core.mshr.popitem(last=False)
            self._stall_until(done)
            core.cache.install(line)


def _idle_energy(m: MachineConfig, wall_ns: Fraction) -> Fraction:
    return m.power(m.f_max_ghz, Fraction(0)) * wall_ns


def simulate(
    prog: Program,
    sched: list[PhaseRun],
    machine: MachineConfig,
    fuel: int = DEFAULT_FUEL,
) -> SimReport:
    """Run a schedule to completion and account time and energy.

    Registers persist across runs: parameters bind from the run's args
    first, then from the persistent environment, then zero.  Runs marked
    writeback publish their final registers (execute and baseline runs);
    access runs observe but never publish.
    """
    diags = validate_program(prog)
    if diags:
        raise MachSimError(
            "refusing to simulate an invalid program:\n"
            + "\n".join(str(d) for d in diags))
    names = {f.name for f in prog.functions}
    for r in sched:
        if r.function is not None and r.function not in names:
            raise MachSimError(f"schedule references unknown function {r.function!r}")
        if not machine.f_min_ghz <= r.frequency <= machine.f_max_ghz:
            raise MachSimError(
                f"frequency {r.frequency} outside "
                f"[{machine.f_min_ghz}, {machine.f_max_ghz}]")
        if r.category not in CATEGORIES:
            raise MachSimError(f"unknown category {r.category!r}")
        if r.charge is not None and r.charge[1] < 0:
            raise MachSimError(f"negative charge {r.charge!r}")

    compiled = {}

    def get_compiled(name: str):
        if name not in compiled:
            compiled[name] = compile_function(prog.function(name))
        return compiled[name]

    core = _Core(machine)
    mem_size = default_mem_size(prog)
    mem = init_memory(prog, mem_size)
    env: dict[str, int] = {}
    output: list[int] = []
    fuel_box = [fuel]

    records: list[RunRecord] = []
    freq = machine.f_max_ghz

    def charge(kind: str, ns: Fraction, f: Fraction) -> None:
        core.wall += ns
        records.append(RunRecord(
            kind=kind, function=None, frequency=f, category=CAT_OVERHEAD,
            slice_index=None, cycles=Fraction(0), wall_ns=ns,
            energy=_idle_energy(machine, ns), instr_count=0))

    for r in sched:
        if r.frequency != freq:
            charge("dvfs_switch", machine.dvfs_switch_ns, r.frequency)
            freq = r.frequency
        if r.function is None:
            if r.charge is not None:
                charge(r.charge[0], r.charge[1], r.frequency)
            continue
        cf = get_compiled(r.function)
        call_env = {p: r.args.get(p, env.get(p, 0)) for p in cf.fn.params}
        clock = _PhaseClock(core, r.frequency)
        start = core.wall
        run_compiled(cf, call_env, mem, output, {}, fuel_box, mem_size,
                     on_load=clock.on_load, on_prefetch=clock.on_prefetch,
                     on_block=clock.on_block)
        clock.drain()
        if r.writeback:
            env.update(call_env)
        wall_ns = core.wall - start
        ipc = clock.instrs / clock.cycles if clock.cycles else Fraction(0)
        records.append(RunRecord(
            kind="run", function=r.function, frequency=r.frequency,
            category=r.category, slice_index=r.slice_index,
            cycles=clock.cycles, wall_ns=wall_ns,
            energy=machine.power(r.frequency, ipc) * wall_ns,
            instr_count=clock.instrs))
        if r.charge is not None and r.charge[0] == "profiling":
            charge("profiling", r.charge[1] * wall_ns, r.frequency)
    if freq != machine.f_max_ghz:
        charge("dvfs_switch", machine.dvfs_switch_ns, machine.f_max_ghz)

    categories = {c: CategoryStats() for c in CATEGORIES}
    total = CategoryStats()
    for rec in records:
        categories[rec.category].add(rec)
        total.add(rec)

    original = Program(functions=[prog.entry_function()], data=prog.data,
                       entry=prog.entry)
    return SimReport(
        categories=categories,
        total=total,
        runs=records,
        output=output,
        memory_digest=memory_digest(mem),
        program_digest=program_digest(original),
        machine_digest=machine.digest(),
    )


# ---------------------------------------------------------------------------
# schedules


def baseline_schedule(function: str, machine: MachineConfig) -> list[PhaseRun]:
    return [PhaseRun(function=function, frequency=machine.f_max_ghz,
                     category=CAT_EXECUTE, slice_index=0, writeback=True)]


def build_schedule(
    mode: str,
    plan: PhasePlan,
    machine: MachineConfig,
    profiling_overhead: Fraction = Fraction(0),
) -> list[PhaseRun]:
    """The three experiment shapes.

    baseline: the original, once, at f_max.
    static_dae: access at f_min then execute at f_max for every slice;
      with nothing to prefetch this degenerates to the baseline.
    dynamic_dae: slice 0 runs the execute clone at f_max while profiling,
      then a one-time specialization charge, then access/execute pairs
      for the remaining slices.
    """
    if mode == "baseline":
        return baseline_schedule(plan.original, machine)
    if mode not in MODES:
        raise MachSimError(f"unknown mode {mode!r}")
    if profiling_overhead < 0:
        raise MachSimError("profiling overhead must be non-negative")

    f_lo, f_hi = machine.f_min_ghz, machine.f_max_ghz
    skip_access = plan.access_is_empty
    if mode == "static_dae" and skip_access:
        return baseline_schedule(plan.original, machine)

    sched: list[PhaseRun] = []

    def pair(k: int, with_access: bool) -> None:
        args = plan.slice_args(k)
        if with_access:
            sched.append(PhaseRun(function=plan.access, frequency=f_lo,
                                  category=CAT_ACCESS, slice_index=k, args=args))
        sched.append(PhaseRun(function=plan.execute, frequency=f_hi,
                              category=CAT_EXECUTE, slice_index=k, args=args,
                              writeback=True))

    if mode == "static_dae":
        for k in range(plan.n_slices):
            pair(k, with_access=True)
        return sched

    # dynamic_dae: the first slice doubles as the profiling run.
    prof = ("profiling", profiling_overhead) if profiling_overhead else None
    sched.append(PhaseRun(function=plan.execute, frequency=f_hi,
                          category=CAT_EXECUTE, slice_index=0,
                          args=plan.slice_args(0), writeback=True, charge=prof))
    if plan.n_slices >= 2 and not skip_access:
        jit_ns = machine.jit_ns_per_instr * plan.jit_node_count
        sched.append(PhaseRun(function=None, frequency=f_hi,
                              category=CAT_OVERHEAD, charge=("jit", jit_ns)))
    for k in range(1, plan.n_slices):
        pair(k, with_access=not skip_access)
    return sched


def normalize(report: SimReport, baseline: SimReport) -> SimReport:
    """Attach time and energy ratios relative to a baseline run.

    The two reports must describe the same program, input and machine,
    and must have produced identical observable behavior.
    """
    if report.program_digest != baseline.program_digest:
        raise MachSimError("cannot normalize across different programs")
    if report.machine_digest != baseline.machine_digest:
        raise MachSimError("cannot normalize across different machines")
    if report.output != baseline.output or report.memory_digest != baseline.memory_digest:
        raise MachSimError("behavior diverged from the baseline run")
    if not baseline.total.wall_ns or not baseline.total.energy:
        raise MachSimError("baseline has no time or energy to normalize against")
    return dataclasses.replace(
        report,
        normalized_time=report.total.wall_ns / baseline.total.wall_ns,
        normalized_energy=report.total.energy / baseline.total.energy,
    )
