"""Machine description: frequencies, L1 cache shape, DVFS power model.

All derived arithmetic uses exact rationals.  JSON numbers are converted
through their decimal string form, so a config file's 3.4 GHz is the
rational 17/5, not the nearest binary float, and every timing or energy
figure downstream is exact.

Frequencies are in GHz, which doubles as cycles per nanosecond: a run of
C cycles at frequency f takes C / f nanoseconds of wall time.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path


class MachineError(ValueError):
    """Raised for malformed or inconsistent machine configurations."""


def _frac(value, where: str) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MachineError(f"{where}: expected a number, got {value!r}")
    try:
        return Fraction(str(value))
    except ValueError:
        raise MachineError(f"{where}: cannot interpret {value!r} exactly")


def _nat(value, where: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise MachineError(f"{where}: expected an integer, got {value!r}")
    if value < minimum:
        raise MachineError(f"{where}: {value} is below the minimum {minimum}")
    return value


def _check_keys(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise MachineError(f"{where}: unknown keys {sorted(unknown)}")


@dataclass(frozen=True)
class L1Config:
    capacity_bytes: int = 32768
    line_bytes: int = 64
    ways: int = 8
    hit_cycles: int = 4

    def __post_init__(self):
        if self.line_bytes <= 0 or self.capacity_bytes <= 0:
            raise MachineError("l1: capacity and line size must be positive")
        if self.capacity_bytes % self.line_bytes:
            raise MachineError("l1: capacity must be a multiple of the line size")
        if self.ways < 1:
            raise MachineError("l1: ways must be at least 1")
        lines = self.capacity_bytes // self.line_bytes
        if lines % self.ways:
            raise MachineError("l1: line count must be a multiple of ways")
        if self.hit_cycles < 1:
            raise MachineError("l1: hit_cycles must be at least 1")

    @property
    def n_sets(self) -> int:
        return self.capacity_bytes // self.line_bytes // self.ways

    @staticmethod
    def from_json(d: dict) -> "L1Config":
        _check_keys(d, {"capacity_bytes", "line_bytes", "ways", "hit_cycles"}, "l1")
        base = L1Config()
        return L1Config(
            capacity_bytes=_nat(d.get("capacity_bytes", base.capacity_bytes), "l1.capacity_bytes", 1),
            line_bytes=_nat(d.get("line_bytes", base.line_bytes), "l1.line_bytes", 1),
            ways=_nat(d.get("ways", base.ways), "l1.ways", 1),
            hit_cycles=_nat(d.get("hit_cycles", base.hit_cycles), "l1.hit_cycles", 1),
        )

    def to_json(self) -> dict:
        return {
            "capacity_bytes": self.capacity_bytes,
            "line_bytes": self.line_bytes,
            "ways": self.ways,
            "hit_cycles": self.hit_cycles,
        }


@dataclass(frozen=True)
class PowerConfig:
    """P(f, ipc) = p_static + c_dyn * v(f)^2 * (f/f_max) * (alpha + beta*ipc/ipc_max).

    v(f) ramps linearly from v_min_ratio at f_min to 1 at f_max,
    expressing voltage relative to its maximum.  alpha is the
    activity-independent share of dynamic power, beta the share that
    scales with achieved IPC; they must sum to one.
    """

    p_static: Fraction = Fraction(1)
    c_dyn: Fraction = Fraction(3)
    alpha: Fraction = Fraction(3, 10)
    beta: Fraction = Fraction(7, 10)
    v_min_ratio: Fraction = Fraction(4, 5)

    def __post_init__(self):
        if self.alpha + self.beta != 1:
            raise MachineError("power: alpha + beta must equal 1 exactly")
        if not 0 < self.v_min_ratio <= 1:
            raise MachineError("power: v_min_ratio must be in (0, 1]")
        if self.p_static < 0 or self.c_dyn < 0:
            raise MachineError("power: p_static and c_dyn must be non-negative")

    @staticmethod
    def from_json(d: dict) -> "PowerConfig":
        _check_keys(d, {"p_static", "c_dyn", "alpha", "beta", "v_min_ratio"}, "power")
        base = PowerConfig()
        return PowerConfig(
            p_static=_frac(d.get("p_static", base.p_static), "power.p_static"),
            c_dyn=_frac(d.get("c_dyn", base.c_dyn), "power.c_dyn"),
            alpha=_frac(d.get("alpha", base.alpha), "power.alpha"),
            beta=_frac(d.get("beta", base.beta), "power.beta"),
            v_min_ratio=_frac(d.get("v_min_ratio", base.v_min_ratio), "power.v_min_ratio"),
        )

    def to_json(self) -> dict:
        return {
            "p_static": float(self.p_static),
            "c_dyn": float(self.c_dyn),
            "alpha": float(self.alpha),
            "beta": float(self.beta),
            "v_min_ratio": float(self.v_min_ratio),
        }


_TOP_KEYS = {
    "f_max_ghz", "f_min_ghz", "l1", "mem_latency_ns", "mshr_count",
    "dvfs_switch_ns", "jit_ns_per_instr", "power", "ipc_max",
}


@dataclass(frozen=True)
class MachineConfig:
    f_max_ghz: Fraction = Fraction("3.4")
    f_min_ghz: Fraction = Fraction("1.6")
    l1: L1Config = L1Config()
    mem_latency_ns: Fraction = Fraction(60)
    mshr_count: int = 10
    dvfs_switch_ns: Fraction = Fraction(100)
    jit_ns_per_instr: Fraction = Fraction(50)
    power_model: PowerConfig = PowerConfig()
    ipc_max: Fraction = Fraction(1)

    def __post_init__(self):
        if self.f_min_ghz <= 0 or self.f_max_ghz <= 0:
            raise MachineError("frequencies must be positive")
        if self.f_min_ghz > self.f_max_ghz:
            raise MachineError("f_min_ghz must not exceed f_max_ghz")
        if self.mem_latency_ns < 0 or self.dvfs_switch_ns < 0 or self.jit_ns_per_instr < 0:
            raise MachineError("latencies must be non-negative")
        if self.mshr_count < 1:
            raise MachineError("mshr_count must be at least 1")
        if self.ipc_max <= 0:
            raise MachineError("ipc_max must be positive")

    # -- derived timing ----------------------------------------------------

    def mem_latency_cycles(self, f_ghz: Fraction) -> int:
        """Memory latency is wall-clock fixed, so the cycle cost scales with f."""
        return math.ceil(self.mem_latency_ns * f_ghz)

    def voltage_ratio(self, f_ghz: Fraction) -> Fraction:
        if self.f_max_ghz == self.f_min_ghz:
            return Fraction(1)
        span = (f_ghz - self.f_min_ghz) / (self.f_max_ghz - self.f_min_ghz)
        return self.power_model.v_min_ratio + (1 - self.power_model.v_min_ratio) * span

    def power(self, f_ghz: Fraction, ipc: Fraction) -> Fraction:
        """Dissipated power (arbitrary units) at frequency f and achieved IPC."""
        if isinstance(f_ghz, float):
            f_ghz = Fraction(str(f_ghz))
        if isinstance(ipc, float):
            ipc = Fraction(str(ipc))
        if not self.f_min_ghz <= f_ghz <= self.f_max_ghz:
            raise MachineError(f"frequency {f_ghz} outside [{self.f_min_ghz}, {self.f_max_ghz}]")
        if not 0 <= ipc <= self.ipc_max:
            raise MachineError(f"ipc {ipc} outside [0, {self.ipc_max}]")
        pm = self.power_model
        v = self.voltage_ratio(f_ghz)
        util = pm.alpha + pm.beta * ipc / self.ipc_max
        return pm.p_static + pm.c_dyn * v * v * (f_ghz / self.f_max_ghz) * util

    # -- serialization -----------------------------------------------------

    @staticmethod
    def from_json(d: dict) -> "MachineConfig":
        if not isinstance(d, dict):
            raise MachineError(f"machine config must be an object, got {type(d).__name__}")
        _check_keys(d, _TOP_KEYS, "machine config")
        base = MachineConfig()
        l1 = d.get("l1", base.l1.to_json())
        power = d.get("power", base.power_model.to_json())
        if not isinstance(l1, dict):
            raise MachineError("l1: expected an object")
        if not isinstance(power, dict):
            raise MachineError("power: expected an object")
        return MachineConfig(
            f_max_ghz=_frac(d.get("f_max_ghz", base.f_max_ghz), "f_max_ghz"),
            f_min_ghz=_frac(d.get("f_min_ghz", base.f_min_ghz), "f_min_ghz"),
            l1=L1Config.from_json(l1),
            mem_latency_ns=_frac(d.get("mem_latency_ns", base.mem_latency_ns), "mem_latency_ns"),
            mshr_count=_nat(d.get("mshr_count", base.mshr_count), "mshr_count", 1),
            dvfs_switch_ns=_frac(d.get("dvfs_switch_ns", base.dvfs_switch_ns), "dvfs_switch_ns"),
            jit_ns_per_instr=_frac(d.get("jit_ns_per_instr", base.jit_ns_per_instr), "jit_ns_per_instr"),
            power_model=PowerConfig.from_json(power),
            ipc_max=_frac(d.get("ipc_max", base.ipc_max), "ipc_max"),
        )

    def to_json(self) -> dict:
        return {
            "f_max_ghz": float(self.f_max_ghz),
            "f_min_ghz": float(self.f_min_ghz),
            "l1": self.l1.to_json(),
            "mem_latency_ns": float(self.mem_latency_ns),
            "mshr_count": self.mshr_count,
            "dvfs_switch_ns": float(self.dvfs_switch_ns),
            "jit_ns_per_instr": float(self.jit_ns_per_instr),
            "power": self.power_model.to_json(),
            "ipc_max": float(self.ipc_max),
        }

    def digest(self) -> str:
        canon = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def load_machine(path: str | Path | None) -> MachineConfig:
    """Read a machine config from a JSON file, or the defaults when None."""
    if path is None:
        return MachineConfig()
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise MachineError(f"{path}: invalid JSON at offset {e.pos}: {e.msg}")
    return MachineConfig.from_json(data)


class LruCache:
    """Set-associative L1 with strict least-recently-used replacement.

    Tracks cache lines by line number (address // line_bytes).  Lookups,
    touches and installs are split so callers can model latency between
    the probe and the fill.
    """

    def __init__(self, l1: L1Config):
        self.l1 = l1
        self.n_sets = l1.n_sets
        self.sets: list[dict[int, int]] = [{} for _ in range(self.n_sets)]
        self._stamp = 0

    def line_of(self, addr: int) -> int:
        return addr // self.l1.line_bytes

    def contains(self, line: int) -> bool:
        return line in self.sets[line % self.n_sets]

    def touch(self, line: int) -> None:
        s = self.sets[line % self.n_sets]
        assert line in s, "touch of a line that is not resident"
        self._stamp += 1
        s[line] = self._stamp

    def install(self, line: int) -> int | None:
        """Insert a line as most recent; returns the evicted line, if any."""
        s = self.sets[line % self.n_sets]
        evicted = None
        if line not in s and len(s) >= self.l1.ways:
            evicted = min(s, key=s.__getitem__)
            del s[evicted]
        self._stamp += 1
        s[line] = self._stamp
        return evicted

    def resident_lines(self) -> set[int]:
        return {line for s in self.sets for line in s}
