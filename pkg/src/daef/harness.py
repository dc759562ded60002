"""Pipelines from kernel source to normalized result rows.

One entry point per experiment shape: profile a kernel, transform it,
run one (kernel, mode) cell, or sweep the whole built-in suite.  Both
decoupled modes reuse a single offline profile per kernel, and every
simulated variant is checked for observable equivalence against its own
baseline before any number is reported.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .daegen import (
    DaegenError,
    PhasePlan,
    SliceParams,
    candidate_loop,
    choose_slice_size,
    make_phases,
)
from .ir import Program, parse_program, with_seed
from .kernels import BenchmarkKernel, builtin_kernels, kernel_by_name
from .machine import MachineConfig
from .machsim import (
    MachSimError,
    SimReport,
    baseline_schedule,
    build_schedule,
    normalize,
    simulate,
)
from .profiler import ProfileReport, classify_critical, profile_run, program_digest

MODES = ("baseline", "static_dae", "dynamic_dae")

CSV_COLUMNS = ("kernel", "mode", "norm_time", "norm_energy",
               "access_time", "execute_time", "overhead_time",
               "access_energy", "execute_energy", "overhead_energy")


class HarnessError(Exception):
    pass


class EquivalenceError(Exception):
    """A transformed mode produced different observable behavior."""


@dataclass
class RunSpec:
    kernel: str
    mode: str = "baseline"
    machine: str | None = None
    theta: Fraction = Fraction(1, 100)
    rho: Fraction = Fraction(1, 2)
    slice_override: int | None = None
    seed: int = 0
    output: str | None = None
    profiling_overhead: Fraction = Fraction(0)


@dataclass
class Row:
    kernel: str
    mode: str
    norm_time: Fraction
    norm_energy: Fraction
    access_time: Fraction
    execute_time: Fraction
    overhead_time: Fraction
    access_energy: Fraction
    execute_energy: Fraction
    overhead_energy: Fraction
    report: SimReport | None = field(repr=False, default=None)
    baseline: SimReport | None = field(repr=False, default=None)

    def values(self) -> list:
        return [self.kernel, self.mode, self.norm_time, self.norm_energy,
                self.access_time, self.execute_time, self.overhead_time,
                self.access_energy, self.execute_energy, self.overhead_energy]


@dataclass
class Prepared:
    """Everything derived once per kernel and shared by both DAE modes."""
    kernel: BenchmarkKernel
    seeded: Program
    profile: ProfileReport
    critical: frozenset[int]
    slice_params: SliceParams
    plan: PhasePlan


def load_kernel(name_or_path: str) -> BenchmarkKernel:
    try:
        return kernel_by_name(name_or_path)
    except KeyError:
        path = Path(name_or_path)
        if not path.is_file():
            raise HarnessError(
                f"{name_or_path!r} is neither a built-in kernel nor a file; "
                f"built-ins: {', '.join(k.name for k in builtin_kernels())}")
        return BenchmarkKernel(
            name=path.stem, text=path.read_text(), working_set_bytes=0,
            characterization="user", description=f"loaded from {path}",
            oracle=lambda seed: None)


def load_machine(path: str | None) -> MachineConfig:
    if path is None:
        return MachineConfig()
    import json
    try:
        return MachineConfig.from_json(json.loads(Path(path).read_text()))
    except (OSError, ValueError, KeyError) as e:
        raise HarnessError(f"cannot load machine config {path!r}: {e}")


def check_profile(profile: ProfileReport, seeded: Program,
                  machine: MachineConfig, allow_stale: bool = False) -> list[str]:
    """Digest-match a stored profile against the inputs it will steer.

    Returns warning strings when allow_stale waived a mismatch.
    """
    problems = []
    if profile.program_digest != program_digest(seeded):
        problems.append("profile was taken from a different program or seed")
    if profile.machine_digest != machine.digest():
        problems.append("profile was taken on a different machine config")
    if problems and not allow_stale:
        raise HarnessError("; ".join(problems)
                           + " (pass --allow-stale to use it anyway)")
    return problems


def prepare(kernel: BenchmarkKernel, machine: MachineConfig, seed: int = 0,
            theta: Fraction = Fraction(1, 100), rho: Fraction = Fraction(1, 2),
            slice_override: int | None = None,
            profile: ProfileReport | None = None,
            allow_stale: bool = False) -> Prepared:
    prog = parse_program(kernel.text)
    seeded = with_seed(prog, seed)
    if profile is None:
        profile = profile_run(prog, machine, input_seed=seed)
    else:
        check_profile(profile, seeded, machine, allow_stale)
    critical = classify_critical(profile, theta).ids

    li = candidate_loop(seeded.entry_function())
    bytes_per_iter = next((fp.bytes_per_iter for fp in profile.loops
                           if fp.header == li.header), None)
    slice_params = choose_slice_size(machine, bytes_per_iter, rho=rho,
                                     override=slice_override)
    plan = make_phases(seeded, critical=critical, slice_params=slice_params)
    return Prepared(kernel=kernel, seeded=seeded, profile=profile,
                    critical=frozenset(critical), slice_params=slice_params,
                    plan=plan)


def _diff_dump(name: str, mode: str, rep: SimReport, base: SimReport) -> str:
    lines = [f"{name} [{mode}] diverged from its baseline:"]
    if rep.output != base.output:
        lines.append(f"  output  {rep.output[:8]} != {base.output[:8]}")
    if rep.memory_digest != base.memory_digest:
        lines.append(f"  memory  {rep.memory_digest[:16]} != {base.memory_digest[:16]}")
    return "\n".join(lines)


def _row_from(name: str, mode: str, rep: SimReport, base: SimReport) -> Row:
    try:
        rep = normalize(rep, base)
    except MachSimError as e:
        raise EquivalenceError(_diff_dump(name, mode, rep, base) + f"\n  ({e})")
    wall = base.total.wall_ns
    energy = base.total.energy
    cats = rep.categories
    return Row(
        kernel=name, mode=mode,
        norm_time=rep.normalized_time, norm_energy=rep.normalized_energy,
        access_time=cats["access"].wall_ns / wall,
        execute_time=cats["execute"].wall_ns / wall,
        overhead_time=cats["overhead"].wall_ns / wall,
        access_energy=cats["access"].energy / energy,
        execute_energy=cats["execute"].energy / energy,
        overhead_energy=cats["overhead"].energy / energy,
        report=rep, baseline=base)


def run_one(kernel: BenchmarkKernel, mode: str, machine: MachineConfig,
            seed: int = 0, theta: Fraction = Fraction(1, 100),
            rho: Fraction = Fraction(1, 2), slice_override: int | None = None,
            profiling_overhead: Fraction = Fraction(0),
            profile: ProfileReport | None = None,
            allow_stale: bool = False) -> Row:
    """Simulate one (kernel, mode) cell against a fresh baseline."""
    if mode not in MODES:
        raise HarnessError(f"unknown mode {mode!r}; choices: {', '.join(MODES)}")
    if mode == "baseline":
        # The baseline must not depend on transformability.
        prog = with_seed(parse_program(kernel.text), seed)
        rep = simulate(prog, baseline_schedule(prog.entry, machine), machine)
        return _row_from(kernel.name, mode, rep, rep)
    prep = prepare(kernel, machine, seed=seed, theta=theta, rho=rho,
                   slice_override=slice_override, profile=profile,
                   allow_stale=allow_stale)
    base = simulate(prep.plan.program,
                    baseline_schedule(prep.plan.original, machine), machine)
    sched = build_schedule(mode, prep.plan, machine,
                           profiling_overhead=profiling_overhead)
    rep = simulate(prep.plan.program, sched, machine)
    return _row_from(kernel.name, mode, rep, base)


def run_kernel_all_modes(kernel: BenchmarkKernel, machine: MachineConfig,
                         seed: int = 0, theta: Fraction = Fraction(1, 100),
                         rho: Fraction = Fraction(1, 2),
                         slice_override: int | None = None,
                         profiling_overhead: Fraction = Fraction(0)) -> list[Row]:
    """All three modes for one kernel, sharing one profile and plan."""
    prep = prepare(kernel, machine, seed=seed, theta=theta, rho=rho,
                   slice_override=slice_override)
    base = simulate(prep.plan.program,
                    baseline_schedule(prep.plan.original, machine), machine)
    rows = [_row_from(kernel.name, "baseline", base, base)]
    for mode in ("static_dae", "dynamic_dae"):
        sched = build_schedule(mode, prep.plan, machine,
                               profiling_overhead=profiling_overhead)
        rep = simulate(prep.plan.program, sched, machine)
        rows.append(_row_from(kernel.name, mode, rep, base))
    return rows


def run_suite(machine: MachineConfig, seed: int = 0,
              theta: Fraction = Fraction(1, 100), rho: Fraction = Fraction(1, 2),
              slice_override: int | None = None,
              profiling_overhead: Fraction = Fraction(0),
              kernels: list[BenchmarkKernel] | None = None) -> list[Row]:
    """The full kernel x mode matrix; kernels simulate in parallel."""
    kernels = builtin_kernels() if kernels is None else kernels
    with ThreadPoolExecutor(max_workers=max(1, len(kernels))) as pool:
        futures = [pool.submit(run_kernel_all_modes, k, machine, seed, theta,
                               rho, slice_override, profiling_overhead)
                   for k in kernels]
        rows: list[Row] = []
        for fut in futures:  # assembled in submission order
            rows.extend(fut.result())
    return rows


# -- emission ----------------------------------------------------------------


def _fmt(x) -> str:
    return f"{float(x):.6f}"


def rows_to_csv(rows: list[Row], with_geomean: bool = True) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        vals = r.values()
        lines.append(",".join(vals[:2] + [_fmt(v) for v in vals[2:]]))
    if with_geomean:
        by_mode: dict[str, list[Row]] = {}
        for r in rows:
            by_mode.setdefault(r.mode, []).append(r)
        for mode, group in by_mode.items():
            gt = math.exp(sum(math.log(float(r.norm_time)) for r in group)
                          / len(group))
            ge = math.exp(sum(math.log(float(r.norm_energy)) for r in group)
                          / len(group))
            lines.append(",".join(["geomean", mode, _fmt(gt), _fmt(ge)]
                                  + [""] * 6))
    return "\n".join(lines) + "\n"


def rows_to_dat(rows: list[Row]) -> str:
    """Stacked-bar data: one labeled row per cell, whitespace separated."""
    lines = ["# kernel mode access_time execute_time overhead_time"
             " access_energy execute_energy overhead_energy"]
    for r in rows:
        lines.append(" ".join([r.kernel, r.mode,
                               _fmt(r.access_time), _fmt(r.execute_time),
                               _fmt(r.overhead_time), _fmt(r.access_energy),
                               _fmt(r.execute_energy), _fmt(r.overhead_energy)]))
    return "\n".join(lines) + "\n"


def report_to_json(row: Row) -> dict:
    """Exact values for debugging: every quantity as a num/den string."""
    def frac(x) -> str:
        return str(Fraction(x))

    def stats(s) -> dict:
        return {"cycles": frac(s.cycles), "wall_ns": frac(s.wall_ns),
                "energy": frac(s.energy), "instr_count": s.instr_count}

    rep = row.report
    return {
        "kernel": row.kernel,
        "mode": row.mode,
        "norm_time": frac(row.norm_time),
        "norm_energy": frac(row.norm_energy),
        "categories": {c: stats(s) for c, s in rep.categories.items()},
        "total": stats(rep.total),
        "runs": [{"kind": r.kind, "function": r.function,
                  "frequency": frac(r.frequency), "category": r.category,
                  "slice_index": r.slice_index, **stats(r)}
                 for r in rep.runs],
        "output": rep.output,
        "memory_digest": rep.memory_digest,
        "program_digest": rep.program_digest,
        "machine_digest": rep.machine_digest,
    }
