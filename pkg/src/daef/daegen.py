"""Decoupled access-execute phase generation.

Takes a program with one canonical counted loop and produces, in a single
combined program:

- an execute clone that runs any contiguous span of iterations,
- an access clone of the same span that only walks the address chains of
  selected loads and prefetches their lines, and
- a base access clone covering every load in the loop, from which the
  selected variant can be re-derived by specialization.

Sliced clones share a calling convention.  Beyond the original
parameters they take %__first (nonzero for the first slice, which runs
the original prologue), %__lo and %__hi (the induction range of the
slice, half open), and one %__carry_<reg> per loop-carried value, fed
from the previous slice's exported registers.  A slice enters through a
dispatch block: first slices flow through the cloned prologue, later
slices through a resume block that recomputes the pure loop-invariant
prologue values and jumps straight to the loop header.

Names beginning with a double underscore are reserved for this
machinery; input programs must not use them.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .cfg import (
    LoopInfo,
    build_cfg,
    dce,
    dce_keep,
    find_loops,
    resolve_constant,
    simplify_cfg,
)
from .ir import (
    BinOp,
    Block,
    Br,
    BrCond,
    Const,
    Diagnostic,
    Function,
    Load,
    Node,
    Operand,
    Out,
    Phi,
    Prefetch,
    Program,
    Ret,
    Store,
    node_def,
    node_uses,
    print_function,
    validate_program,
)

S_MIN = 8
S_MAX = 4096
S_DEFAULT = 256


class DaegenError(ValueError):
    def __init__(self, message: str, diagnostics: list[Diagnostic] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class IdAlloc:
    """Hands out fresh instruction ids, program-wide."""

    def __init__(self, start: int):
        self.next = start

    def take(self) -> int:
        v = self.next
        self.next += 1
        return v


@dataclass(frozen=True)
class SliceParams:
    size: int
    rho: Fraction
    source: str  # "profile", "default" or "override"


def choose_slice_size(machine, bytes_per_iter: float | None,
                      rho: float | Fraction = Fraction(1, 2),
                      override: int | None = None) -> SliceParams:
    """Slice length in iterations: fit a slice's cache footprint into a
    rho fraction of L1, clamped to [8, 4096].  An explicit override wins
    unclamped; without a usable footprint the fallback is 256."""
    rho = Fraction(str(rho)) if not isinstance(rho, Fraction) else rho
    if not 0 < rho <= 1:
        raise DaegenError(f"rho {rho} outside (0, 1]")
    if override is not None:
        if override < 1:
            raise DaegenError(f"slice override {override} must be at least 1")
        return SliceParams(size=override, rho=rho, source="override")
    if bytes_per_iter is None or bytes_per_iter <= 0:
        return SliceParams(size=S_DEFAULT, rho=rho, source="default")
    raw = int(rho * machine.l1.capacity_bytes / Fraction(str(bytes_per_iter)))
    return SliceParams(size=min(max(raw, S_MIN), S_MAX), rho=rho, source="profile")


# ---------------------------------------------------------------------------
# cloning machinery


def _fresh_node(n: Node, alloc: IdAlloc, id_map: dict[int, int]) -> Node:
    c = copy.deepcopy(n)
    id_map[n.id] = alloc.take()
    c.id = id_map[n.id]
    return c


def _clone_function(fn: Function, name: str, kind: str,
                    alloc: IdAlloc) -> tuple[Function, dict[int, int]]:
    id_map: dict[int, int] = {}
    g = Function(name=name, params=list(fn.params), kind=kind)
    for blk in fn.blocks:
        nb = Block(label=blk.label)
        nb.phis = [_fresh_node(p, alloc, id_map) for p in blk.phis]
        nb.body = [_fresh_node(i, alloc, id_map) for i in blk.body]
        nb.term = _fresh_node(blk.term, alloc, id_map) if blk.term else None
        g.blocks.append(nb)
    return g, id_map


def _check_names(fn: Function) -> None:
    bad = sorted({p for p in fn.params if p.startswith("__")}
                 | {node_def(n) for n in fn.nodes()
                    if node_def(n) and node_def(n).startswith("__")}
                 | {b.label for b in fn.blocks if b.label.startswith("__")})
    if bad:
        raise DaegenError(
            f"names starting with '__' are reserved for generated code: {bad}")


def _check_sliceable(fn: Function, li: LoopInfo) -> None:
    """Slicing needs a single-entry, single-exit loop: the header is the
    only way in and its false edge the only way out."""
    c = build_cfg(fn)
    for label in li.body:
        if label != li.header:
            outside = sorted(set(c.preds[label]) - li.body)
            if outside:
                raise DaegenError(
                    f"loop body block {label!r} has entries from outside "
                    f"the loop: {outside}")
            escapes = sorted(set(c.succs[label]) - li.body)
            if escapes:
                raise DaegenError(
                    f"loop body block {label!r} exits the loop without "
                    f"passing the header: {escapes}")


def _simplify(g: Function, alloc: IdAlloc) -> Function:
    # Mint any new ids from the shared allocator's range, then advance it
    # past whatever came out so later ids stay unique program-wide.
    g = simplify_cfg(g, id_base=alloc.next)
    alloc.next = max(alloc.next, g.max_id() + 1)
    return g


def _exit_side_labels(fn: Function, li: LoopInfo) -> set[str]:
    """Blocks reachable from the loop exit without re-entering the body."""
    bm = fn.block_map()
    seen: set[str] = set()
    stack = [li.exit_target]
    while stack:
        label = stack.pop()
        if label in seen or label in li.body:
            continue
        seen.add(label)
        t = bm[label].term
        if isinstance(t, Br):
            stack.append(t.target)
        elif isinstance(t, BrCond):
            stack.extend((t.if_true, t.if_false))
    return seen


def _block_of_nodes(fn: Function) -> dict[int, str]:
    out = {}
    for blk in fn.blocks:
        for n in blk.phis + blk.body + ([blk.term] if blk.term else []):
            out[n.id] = blk.label
    return out


def _resume_closure(fn: Function, li: LoopInfo, needed_labels: set[str],
                    carry_regs: list[str]) -> list[Node]:
    """The pure prologue instructions a resumed slice must replay.

    Returns them in original layout order.  Raises when a needed value
    cannot be recomputed from constants alone.
    """
    where = _block_of_nodes(fn)
    defs: dict[str, list[Node]] = {}
    for n in fn.nodes():
        d = node_def(n)
        if d is not None:
            defs.setdefault(d, []).append(n)

    exit_side = _exit_side_labels(fn, li)
    satisfied = set(fn.params) | {li.reg} | set(carry_regs)

    def prologue_defs(reg: str) -> list[Node]:
        return [d for d in defs.get(reg, [])
                if where[d.id] not in li.body and where[d.id] not in exit_side]

    needed: list[Node] = []
    needed_ids: set[int] = set()

    def require(reg: str, chain: tuple[str, ...]) -> None:
        if reg in satisfied:
            return
        ds = defs.get(reg, [])
        pro = prologue_defs(reg)
        if not pro:
            return  # defined in the loop or epilogue; runs in the slice
        if len(pro) != len(ds):
            raise DaegenError(
                f"loop needs %{reg}, which has conflicting definitions "
                f"inside and outside the loop")
        if len(pro) != 1:
            raise DaegenError(
                f"loop needs %{reg}, which the prologue defines more than once")
        d = pro[0]
        if d.id in needed_ids:
            return
        if reg in chain:
            raise DaegenError(f"loop-invariant %{reg} depends on itself")
        if isinstance(d, Const):
            pass
        elif isinstance(d, BinOp):
            for op in (d.a, d.b):
                if isinstance(op, str):
                    require(op, chain + (reg,))
        else:
            raise DaegenError(
                f"loop-invariant %{reg} is not recomputable from constants "
                f"(defined by {type(d).__name__.lower()})")
        needed.append(d)
        needed_ids.add(d.id)

    bm = fn.block_map()
    for label in sorted(needed_labels):
        blk = bm[label]
        for phi in blk.phis:
            # The preheader edge is only taken when the prologue really
            # ran, so its value needs no replay.
            for pred, v in phi.incoming:
                if isinstance(v, str) and not (
                        label == li.header and pred == li.preheader):
                    require(v, ())
        for n in blk.body + ([blk.term] if blk.term else []):
            for reg in node_uses(n):
                require(reg, ())
    if isinstance(li.bound, str):
        require(li.bound, ())

    # needed is already in dependency order: require() appends a node
    # only after its operands.  Layout order would not be safe here since
    # block layout need not follow path order.
    return needed


def _slice_clone(fn: Function, li: LoopInfo, name: str, kind: str,
                 alloc: IdAlloc) -> tuple[Function, dict[int, int], list[str]]:
    """Clone fn into a slice-callable phase function (see module doc)."""
    _check_names(fn)
    _check_sliceable(fn, li)
    g, id_map = _clone_function(fn, name, kind, alloc)
    bm = g.block_map()
    header = bm[li.header]
    entry_label = g.blocks[0].label
    carry_regs = [p.dst for p in header.phis if p.dst != li.reg]

    # Resume path must replay whatever the loop (and, for execute slices,
    # the slice exit check and epilogue) reads from the prologue.
    needed = set(li.body)
    if kind != "access":
        needed |= _exit_side_labels(fn, li)
    resume_nodes = _resume_closure(fn, li, needed, carry_regs)

    # Header edits: a resume edge into the phis, and the guard retargeted
    # to the slice bound.
    for phi in header.phis:
        if phi.dst == li.reg:
            phi.incoming.append(("__resume", "__lo"))
        else:
            phi.incoming.append(("__resume", f"__carry_{phi.dst}"))
    cond_pos = next(k for k, n in enumerate(header.body)
                    if n.id == id_map[li.cond_id])
    old_cond = header.body[cond_pos]
    header.body[cond_pos] = BinOp(id=old_cond.id, dst=old_cond.dst,
                                  op="slt", a=li.reg, b="__hi")
    assert isinstance(header.term, BrCond)
    header.term.if_false = "__sexit"

    # The loop's old exit edge now flows through __sexit.
    exit_block = bm[li.exit_target]
    for phi in exit_block.phis:
        phi.incoming = [("__sexit" if p == li.header else p, v)
                        for p, v in phi.incoming]

    if kind == "access":
        sexit = Block(label="__sexit", term=Ret(id=alloc.take(), value=None))
        tail = [sexit]
    else:
        more = BinOp(id=alloc.take(), dst="__more", op=li.cmp,
                     a=li.reg, b=li.bound)
        sexit = Block(label="__sexit", body=[more],
                      term=BrCond(id=alloc.take(), cond="__more",
                                  if_true="__export", if_false=li.exit_target))
        export = Block(label="__export", term=Ret(id=alloc.take(), value=None))
        export.body = [BinOp(id=alloc.take(), dst=f"__carry_{r}",
                             op="add", a=r, b=0) for r in carry_regs]
        tail = [sexit, export]

    resume_body = []
    for n in resume_nodes:
        c = copy.deepcopy(n)
        c.id = alloc.take()
        resume_body.append(c)
    dispatch = Block(label="__dispatch",
                     term=BrCond(id=alloc.take(), cond="__first",
                                 if_true=entry_label, if_false="__resume"))
    resume = Block(label="__resume", body=resume_body,
                   term=Br(id=alloc.take(), target=li.header))

    g.params = g.params + ["__first", "__lo", "__hi"] \
        + [f"__carry_{r}" for r in carry_regs]
    g.blocks = [dispatch, resume] + g.blocks + tail
    return g, id_map, carry_regs


# ---------------------------------------------------------------------------
# phase builders


def make_execute(fn: Function, li: LoopInfo, name: str,
                 alloc: IdAlloc) -> tuple[Function, list[str]]:
    g, _, carries = _slice_clone(fn, li, name, "execute", alloc)
    return g, carries


def _loop_load_ids(fn: Function, li: LoopInfo) -> set[int]:
    return {n.id for blk in fn.blocks if blk.label in li.body
            for n in blk.body if isinstance(n, Load)}


def make_access_phase(fn: Function, li: LoopInfo, targets: Iterable[int],
                      name: str, alloc: IdAlloc) -> Function:
    """Access clone prefetching the given original loads.

    Targets whose value still feeds a retained computation (for example a
    pointer the next address depends on) stay loads, tagged with their
    origin; the rest become prefetches with the same id and origin.
    Everything else not needed for addresses or control is dropped.
    """
    targets = set(targets)
    body_loads = _loop_load_ids(fn, li)
    stray = targets - body_loads
    if stray:
        raise DaegenError(f"targets {sorted(stray)} are not loads in the loop body")
    g, id_map, _ = _slice_clone(fn, li, name, "access", alloc)
    for blk in g.blocks:
        if isinstance(blk.term, Ret):
            blk.term.value = None  # access results are never consumed
    g = _simplify(g, alloc)  # drops the now unreachable epilogue
    cloned = {id_map[t]: t for t in targets}
    _convert_unconsumed(g, cloned_targets=cloned, roots=set(cloned))
    g = dce(g, set(cloned))
    return _simplify(g, alloc)


def _convert_unconsumed(g: Function, cloned_targets: dict[int, int],
                        roots: set[int]) -> int:
    """Tag target loads; turn the ones nothing retained consumes into
    prefetches in place.  Returns the number converted.

    roots is the full set of nodes the phase must keep; consumption is
    judged against its closure, so a load another root's address chain
    reads stays a load.
    """
    keep = dce_keep(g, roots)
    by_id = {n.id: n for n in g.nodes()}
    used_by_kept: dict[str, int] = {}
    for i in keep:
        for reg in node_uses(by_id[i]):
            used_by_kept[reg] = used_by_kept.get(reg, 0) + 1
    for blk in g.blocks:
        if blk.term is not None:
            for reg in node_uses(blk.term):
                used_by_kept[reg] = used_by_kept.get(reg, 0) + 1
    converted = 0
    for blk in g.blocks:
        for k, n in enumerate(blk.body):
            if n.id in cloned_targets and isinstance(n, Load):
                origin = cloned_targets[n.id]
                if used_by_kept.get(n.dst, 0):
                    n.origin = origin
                else:
                    blk.body[k] = Prefetch(id=n.id, base=n.base,
                                           offset=n.offset, origin=origin)
                    converted += 1
    return converted


def make_base_access(fn: Function, li: LoopInfo, name: str,
                     alloc: IdAlloc) -> Function:
    return make_access_phase(fn, li, _loop_load_ids(fn, li), name, alloc)


def specialize_access(base: Function, critical: Iterable[int], name: str,
                      alloc: IdAlloc) -> Function:
    """Narrow a base access phase down to a critical load set.

    Drops prefetches for non-critical origins, then alternates dead-code
    elimination with load-to-prefetch conversion until stable: a critical
    load whose consumers all disappeared becomes a prefetch.  Surviving
    non-critical loads (address dependencies) lose their tags.
    """
    critical = set(critical)
    g = copy.deepcopy(base)
    g.name = name
    for blk in g.blocks:
        blk.body = [n for n in blk.body
                    if not (isinstance(n, Prefetch) and n.origin not in critical)]
    while True:
        roots = {n.id for n in g.nodes()
                 if isinstance(n, Prefetch)
                 or (isinstance(n, Load) and n.origin in critical)}
        before = {n.id for n in g.nodes()}
        g = dce(g, roots)
        roots &= {n.id for n in g.nodes()}
        cloned = {n.id: n.origin for n in g.nodes()
                  if isinstance(n, Load) and n.origin in critical}
        converted = _convert_unconsumed(g, cloned_targets=cloned, roots=roots)
        if not converted and {n.id for n in g.nodes()} == before:
            break
    for blk in g.blocks:
        for n in blk.body:
            if isinstance(n, Load) and n.origin is not None \
                    and n.origin not in critical:
                n.origin = None
    return _simplify(g, alloc)


def structural_text(fn: Function) -> str:
    """Canonical text with ids stripped and the name normalized, for
    comparing independently generated twins."""
    g = copy.deepcopy(fn)
    g.name = "_"
    return print_function(g, with_ids=False)


# ---------------------------------------------------------------------------
# the combined plan


@dataclass
class PhasePlan:
    program: Program
    original: str
    execute: str
    access: str
    base_access: str
    loop: LoopInfo
    init_val: int
    bound_val: int
    trips: int
    slice_params: SliceParams
    critical: frozenset[int]
    carries: list[str]
    jit_node_count: int
    access_is_empty: bool

    @property
    def n_slices(self) -> int:
        # Zero-trip loops still need one slice so the epilogue runs.
        return max(1, math.ceil(self.trips / self.slice_params.size))

    def slice_args(self, k: int) -> dict[str, int]:
        s = self.slice_params.size
        lo = min(k * s, self.trips)
        hi = min((k + 1) * s, self.trips)
        return {
            "__first": 1 if k == 0 else 0,
            "__lo": self.init_val + self.loop.step * lo,
            "__hi": self.init_val + self.loop.step * hi,
        }


def _single_canonical_loop(fn: Function) -> LoopInfo:
    scan = find_loops(fn)
    if not scan.loops:
        raise DaegenError("no canonical loop to transform", scan.skipped)
    return scan.loops[0]


def candidate_loop(fn: Function) -> LoopInfo:
    """The loop the phase transforms will operate on.

    Raises DaegenError with the skip reasons when nothing qualifies.
    """
    return _single_canonical_loop(fn)


def make_phases(prog: Program, critical: Iterable[int],
                slice_params: SliceParams) -> PhasePlan:
    """Build the combined program: original, execute, access, base access.

    critical holds load ids of the original program; ids outside the
    target loop's body are ignored.  The generated access phase is also
    rederived by specializing the base phase, and the two must agree
    structurally; a mismatch is a bug, not an input error.
    """
    diags = validate_program(prog)
    if diags:
        raise DaegenError("refusing to transform an invalid program", diags)
    fn = prog.entry_function()
    if fn.kind != "original":
        raise DaegenError(f"entry function @{fn.name} is not kind=original")
    li = _single_canonical_loop(fn)

    init_val = resolve_constant(fn, li.init)
    bound_val = resolve_constant(fn, li.bound)
    if init_val is None or bound_val is None:
        raise DaegenError("loop bounds must resolve to constants for slicing")
    trips = li.trip_count(init_val, bound_val)

    critical = frozenset(critical) & frozenset(_loop_load_ids(fn, li))

    alloc = IdAlloc(prog.max_id() + 1)
    execute, carries = make_execute(fn, li, f"{fn.name}__exec", alloc)
    access = make_access_phase(fn, li, critical, f"{fn.name}__access", alloc)
    base = make_base_access(fn, li, f"{fn.name}__base", alloc)
    respec = specialize_access(base, critical, f"{fn.name}__respec", alloc)
    if structural_text(respec) != structural_text(access):
        raise DaegenError(
            "specialized access phase diverged from the directly built one:\n"
            f"--- direct ---\n{structural_text(access)}\n"
            f"--- specialized ---\n{structural_text(respec)}")

    combined = Program(
        functions=[copy.deepcopy(fn), execute, access, base],
        data=copy.deepcopy(prog.data),
        entry=fn.name,
    )
    diags = validate_program(combined)
    if diags:
        raise DaegenError("generated program failed validation", diags)

    access_is_empty = not any(
        isinstance(n, Prefetch) or (isinstance(n, Load) and n.origin is not None)
        for n in access.nodes())

    return PhasePlan(
        program=combined,
        original=fn.name,
        execute=execute.name,
        access=access.name,
        base_access=base.name,
        loop=li,
        init_val=init_val,
        bound_val=bound_val,
        trips=trips,
        slice_params=slice_params,
        critical=critical,
        carries=carries,
        jit_node_count=len(list(base.nodes())),
        access_is_empty=access_is_empty,
    )


# ---------------------------------------------------------------------------
# standalone strip mining


def strip_mine(prog: Program, slice_size: int) -> Program:
    """Restructure the entry function's canonical loop into two levels:
    an outer loop over slice starts and an inner loop of at most
    slice_size iterations.  Behavior is preserved exactly, including for
    zero-trip loops."""
    if slice_size < 1:
        raise DaegenError(f"slice size {slice_size} must be at least 1")
    diags = validate_program(prog)
    if diags:
        raise DaegenError("refusing to transform an invalid program", diags)
    out = copy.deepcopy(prog)
    fn = out.entry_function()
    _check_names(fn)
    li = _single_canonical_loop(fn)
    _check_sliceable(fn, li)
    alloc = IdAlloc(out.max_id() + 1)
    bm = fn.block_map()
    header = bm[li.header]

    carry_phis = [p for p in header.phis if p.dst != li.reg]
    outer_of = {li.reg: f"__outer_{li.reg}"}
    for p in carry_phis:
        outer_of[p.dst] = f"__outer_{p.dst}"

    exit_side = _exit_side_labels(fn, li)
    for label in exit_side:
        for n in bm[label].phis + bm[label].body + [bm[label].term]:
            for reg in outer_of:
                if node_def(n) == reg:
                    raise DaegenError(
                        f"%{reg} is redefined after the loop; cannot strip-mine")

    # Outer header: one phi per loop-carried value.  The inner induction
    # phi doubles as the slice cursor; when the inner loop exits it holds
    # exactly the value the original loop would carry at that point, so
    # it is also the correct exit value.
    outer = Block(label="__outer_header")
    for p in [next(p for p in header.phis if p.dst == li.reg)] + carry_phis:
        outer.phis.append(Phi(id=alloc.take(), dst=outer_of[p.dst],
                              incoming=[(li.preheader, dict(p.incoming)[li.preheader]),
                                        (li.header, p.dst)]))
    outer.body.append(BinOp(id=alloc.take(), dst="__outer_more", op=li.cmp,
                            a=outer_of[li.reg], b=li.bound))
    outer.term = BrCond(id=alloc.take(), cond="__outer_more",
                        if_true="__outer_body", if_false=li.exit_target)

    # Outer body: end of slice = min(start + S*step, exclusive bound).
    ob = Block(label="__outer_body")
    excl = BinOp(id=alloc.take(), dst="__excl", op="add", a=li.bound,
                 b=1 if li.cmp == "sle" else 0)
    raw = BinOp(id=alloc.take(), dst="__raw", op="add", a=outer_of[li.reg],
                b=slice_size * li.step)
    lt = BinOp(id=alloc.take(), dst="__lt", op="slt", a="__raw", b="__excl")
    diff = BinOp(id=alloc.take(), dst="__diff", op="sub", a="__raw", b="__excl")
    part = BinOp(id=alloc.take(), dst="__part", op="mul", a="__diff", b="__lt")
    end = BinOp(id=alloc.take(), dst="__end", op="add", a="__excl", b="__part")
    ob.body = [excl, raw, lt, diff, part, end]
    ob.term = Br(id=alloc.take(), target=li.header)

    # Inner loop edits: enter from the outer body, bound by __end, exit
    # back into the outer header.
    for p in header.phis:
        p.incoming = [
            ("__outer_body", outer_of[p.dst]) if pred == li.preheader
            else (pred, v)
            for pred, v in p.incoming
        ]
    cond_pos = next(k for k, n in enumerate(header.body) if n.id == li.cond_id)
    old_cond = header.body[cond_pos]
    header.body[cond_pos] = BinOp(id=old_cond.id, dst=old_cond.dst,
                                  op="slt", a=li.reg, b="__end")
    assert isinstance(header.term, BrCond)
    header.term.if_false = "__outer_header"

    # The preheader now feeds the outer loop.
    pre = bm[li.preheader]
    if isinstance(pre.term, Br):
        pre.term.target = "__outer_header"
    else:
        assert isinstance(pre.term, BrCond)
        if pre.term.if_true == li.header:
            pre.term.if_true = "__outer_header"
        if pre.term.if_false == li.header:
            pre.term.if_false = "__outer_header"

    # After the loop, reads of loop-carried values see the outer copies.
    def rename_operand(v: Operand) -> Operand:
        return outer_of.get(v, v) if isinstance(v, str) else v

    for label in exit_side:
        blk = bm[label]
        for phi in blk.phis:
            phi.incoming = [
                ("__outer_header" if pred == li.header else pred, rename_operand(v))
                for pred, v in phi.incoming
            ]
        for n in blk.body:
            _rename_uses(n, rename_operand)
        if blk.term is not None:
            _rename_uses(blk.term, rename_operand)

    pos = next(k for k, b in enumerate(fn.blocks) if b.label == li.header)
    fn.blocks[pos:pos] = [outer, ob]

    diags = validate_program(out)
    if diags:
        raise DaegenError("strip-mined program failed validation", diags)
    return out


def _rename_uses(n: Node, f) -> None:
    if isinstance(n, BinOp):
        n.a, n.b = f(n.a), f(n.b)
    elif isinstance(n, (Load, Prefetch)):
        n.base = f(n.base)
    elif isinstance(n, Store):
        n.base, n.src = f(n.base), f(n.src)
    elif isinstance(n, Out):
        n.src = f(n.src)
    elif isinstance(n, BrCond):
        n.cond = f(n.cond)
    elif isinstance(n, Ret) and n.value is not None:
        n.value = f(n.value)
