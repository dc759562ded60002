"""Control-flow and dataflow analyses over DIR functions.

Provides the CFG builder, iterative dominators, natural-loop detection
with canonical-induction recognition, backward slicing over use-def
chains, dead-code elimination, and a semantics-preserving CFG simplifier.

Register-to-definition links are path-insensitive: a use of %r depends on
every definition of %r in the function.  For single-assignment code (all
generated phases, the bundled kernels) this is the exact use-def chain;
for code that reassigns registers it degrades to a safe over-approximation.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .ir.types import (
    BinOp,
    Block,
    Br,
    BrCond,
    Const,
    Diagnostic,
    Function,
    Node,
    Operand,
    Out,
    Phi,
    Ret,
    Store,
    node_def,
    node_uses,
)


@dataclass
class Cfg:
    entry: str
    nodes: list[str]
    succs: dict[str, list[str]]
    preds: dict[str, list[str]]

    @property
    def edges(self) -> set[tuple[str, str]]:
        return {(a, b) for a, outs in self.succs.items() for b in outs}


def build_cfg(fn: Function) -> Cfg:
    """Block-level CFG; edges follow terminators (brcond edges deduped)."""
    nodes = [b.label for b in fn.blocks]
    succs: dict[str, list[str]] = {n: [] for n in nodes}
    preds: dict[str, list[str]] = {n: [] for n in nodes}
    for b in fn.blocks:
        targets: list[str] = []
        if isinstance(b.term, Br):
            targets = [b.term.target]
        elif isinstance(b.term, BrCond):
            targets = [b.term.if_true]
            if b.term.if_false != b.term.if_true:
                targets.append(b.term.if_false)
        for t in targets:
            if t in succs and t not in succs[b.label]:
                succs[b.label].append(t)
                preds[t].append(b.label)
    return Cfg(entry=nodes[0], nodes=nodes, succs=succs, preds=preds)


@dataclass
class DomInfo:
    """Immediate dominators over the reachable subgraph."""

    idom: dict[str, str]  # entry maps to itself
    dropped: list[Diagnostic] = field(default_factory=list)

    def dominates(self, a: str, b: str) -> bool:
        if b not in self.idom:
            return False
        cur = b
        while True:
            if cur == a:
                return True
            nxt = self.idom[cur]
            if nxt == cur:
                return False
            cur = nxt


def _reverse_postorder(c: Cfg) -> list[str]:
    seen: set[str] = set()
    order: list[str] = []

    def visit(n: str) -> None:
        stack = [(n, iter(c.succs[n]))]
        seen.add(n)
        while stack:
            node, it = stack[-1]
            advanced = False
            for s in it:
                if s not in seen:
                    seen.add(s)
                    stack.append((s, iter(c.succs[s])))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()

    visit(c.entry)
    return list(reversed(order))


def dominators(c: Cfg) -> DomInfo:
    """Iterative immediate-dominator computation (RPO intersection)."""
    rpo = _reverse_postorder(c)
    index = {n: i for i, n in enumerate(rpo)}
    dropped = [
        Diagnostic(f"unreachable block {n!r} dropped from dominator analysis")
        for n in c.nodes
        if n not in index
    ]
    idom: dict[str, str] = {c.entry: c.entry}

    def intersect(a: str, b: str) -> str:
        while a != b:
            while index[a] > index[b]:
                a = idom[a]
            while index[b] > index[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for n in rpo:
            if n == c.entry:
                continue
            candidates = [p for p in c.preds[n] if p in index and p in idom]
            if not candidates:
                continue
            new = candidates[0]
            for p in candidates[1:]:
                new = intersect(new, p)
            if idom.get(n) != new:
                idom[n] = new
                changed = True
    return DomInfo(idom=idom, dropped=dropped)


@dataclass(frozen=True)
class NaturalLoop:
    header: str
    latch: str
    body: frozenset[str]


def natural_loops(fn: Function) -> list[NaturalLoop]:
    """One loop per back edge (latch -> dominating header), layout order."""
    c = build_cfg(fn)
    dom = dominators(c)
    loops: list[NaturalLoop] = []
    for latch in c.nodes:
        if latch not in dom.idom:
            continue
        for header in c.succs[latch]:
            if header in dom.idom and dom.dominates(header, latch):
                body = {header, latch}
                stack = [latch]
                while stack:
                    n = stack.pop()
                    if n == header:
                        continue
                    for p in c.preds[n]:
                        if p not in body and p in dom.idom:
                            body.add(p)
                            stack.append(p)
                loops.append(NaturalLoop(header, latch, frozenset(body)))
    loops.sort(key=lambda l: (c.nodes.index(l.header), c.nodes.index(l.latch)))
    return loops


@dataclass(frozen=True)
class LoopInfo:
    """An innermost natural loop with a recognized counted induction.

    The induction register is defined by a header phi whose loop-carried
    input adds a positive constant step, and the header guard compares the
    phi register against a loop-invariant bound with slt or sle, branching
    into the body on true.
    """

    header: str
    latch: str
    preheader: str
    body: frozenset[str]
    body_target: str
    exit_target: str
    reg: str
    init: Operand
    step: int
    bound: Operand
    cmp: str
    phi_id: int
    cond_id: int
    step_id: int

    def trip_count(self, init_val: int, bound_val: int) -> int:
        span = bound_val - init_val
        if self.cmp == "slt":
            trips = -((-span) // self.step)
        else:  # sle
            trips = span // self.step + 1
        return max(0, trips)


@dataclass
class LoopScan:
    loops: list[LoopInfo] = field(default_factory=list)
    skipped: list[Diagnostic] = field(default_factory=list)


def resolve_constant(fn: Function, v: Operand) -> int | None:
    """Fold an operand to a signed constant when its value is static.

    A register resolves only if it has exactly one definition which is a
    const, or a binop whose operands both resolve.  Anything else (loads,
    phis, multiple definitions, division by a zero constant) gives None.
    """
    from .ir.interp import BINOP_FNS, to_signed, to_unsigned

    defs = _defs_of(fn)

    def go(x: Operand, seen: frozenset[str]) -> int | None:
        if isinstance(x, int):
            return x
        if x in seen:
            return None
        ds = defs.get(x, [])
        if len(ds) != 1:
            return None
        d = ds[0]
        if isinstance(d, Const):
            return d.value
        if isinstance(d, BinOp):
            a = go(d.a, seen | {x})
            b = go(d.b, seen | {x})
            if a is None or b is None:
                return None
            if d.op in ("div", "rem") and b == 0:
                return None
            return to_signed(BINOP_FNS[d.op](to_unsigned(a), to_unsigned(b)))
        return None

    return go(v, frozenset())


def _defs_of(fn: Function) -> dict[str, list[Node]]:
    defs: dict[str, list[Node]] = {}
    for n in fn.nodes():
        d = node_def(n)
        if d is not None:
            defs.setdefault(d, []).append(n)
    return defs


def find_loops(fn: Function) -> LoopScan:
    """Innermost natural loops whose induction fits the canonical pattern.

    Loops failing the pattern are reported in `skipped` with the reason,
    never guessed at.
    """
    scan = LoopScan()
    c = build_cfg(fn)
    raw = natural_loops(fn)

    def skip(header: str, why: str) -> None:
        scan.skipped.append(Diagnostic(why, function=fn.name, block=header))

    by_header: dict[str, list[NaturalLoop]] = {}
    for l in raw:
        by_header.setdefault(l.header, []).append(l)

    headers = set(by_header)
    block_map = fn.block_map()
    defs = _defs_of(fn)

    for header, group in by_header.items():
        if len(group) > 1:
            skip(header, "loop has multiple back edges")
            continue
        loop = group[0]
        if any(h in loop.body and h != header for h in headers):
            continue  # not innermost; an inner loop covers it
        hpreds = c.preds[header]
        if len(hpreds) != 2 or loop.latch not in hpreds:
            skip(header, "loop header needs exactly a preheader and a latch")
            continue
        preheader = next(p for p in hpreds if p != loop.latch)
        if preheader in loop.body:
            skip(header, "loop has no preheader outside the body")
            continue
        hblk = block_map[header]
        term = hblk.term
        if not isinstance(term, BrCond):
            skip(header, "loop guard is not a conditional branch in the header")
            continue
        in_body = (term.if_true in loop.body, term.if_false in loop.body)
        if in_body != (True, False):
            skip(header, "loop guard does not branch into the body on true")
            continue
        cond_defs = [i for i in hblk.body if node_def(i) == term.cond]
        if len(cond_defs) != 1:
            skip(header, "loop guard condition is not defined once in the header")
            continue
        cond = cond_defs[0]
        if not isinstance(cond, BinOp) or cond.op not in ("slt", "sle"):
            skip(header, "loop guard is not an slt/sle comparison")
            continue
        if not isinstance(cond.a, str):
            skip(header, "loop guard does not compare a register")
            continue
        ind_phis = [p for p in hblk.phis if p.dst == cond.a]
        if len(ind_phis) != 1:
            skip(header, "guard register is not a header phi")
            continue
        phi = ind_phis[0]
        inc = dict(phi.incoming)
        if set(inc) != {preheader, loop.latch}:
            skip(header, "induction phi incomings do not match preheader and latch")
            continue
        init = inc[preheader]
        nxt = inc[loop.latch]
        if not isinstance(nxt, str):
            skip(header, "loop-carried induction input is not a register")
            continue
        nxt_defs = defs.get(nxt, [])
        if len(nxt_defs) != 1:
            skip(header, "induction step register is not defined exactly once")
            continue
        step_instr = nxt_defs[0]
        step = None
        if isinstance(step_instr, BinOp) and step_instr.op == "add":
            if step_instr.a == phi.dst and isinstance(step_instr.b, int):
                step = step_instr.b
            elif step_instr.b == phi.dst and isinstance(step_instr.a, int):
                step = step_instr.a
        if step is None:
            skip(header, "induction step is not phi plus a constant")
            continue
        if step <= 0:
            skip(header, "non-canonical induction: step is not positive")
            continue
        bound = cond.b
        if isinstance(bound, str):
            invariant = all(
                not _node_in_blocks(fn, d, loop.body) for d in defs.get(bound, [])
            )
            if not invariant:
                skip(header, "loop bound is not loop-invariant")
                continue
        scan.loops.append(LoopInfo(
            header=header,
            latch=loop.latch,
            preheader=preheader,
            body=loop.body,
            body_target=term.if_true,
            exit_target=term.if_false,
            reg=phi.dst,
            init=init,
            step=step,
            bound=bound,
            cmp=cond.op,
            phi_id=phi.id,
            cond_id=cond.id,
            step_id=step_instr.id,
        ))
    scan.loops.sort(key=lambda l: [b.label for b in fn.blocks].index(l.header))
    return scan


def _node_in_blocks(fn: Function, node: Node, labels: frozenset[str]) -> bool:
    for blk in fn.blocks:
        if blk.label not in labels:
            continue
        if node in blk.phis or node in blk.body or node is blk.term:
            return True
    return False


def _dep_graph(fn: Function) -> tuple[dict[int, Node], dict[int, list[int]]]:
    """Node ids to their data-dependence parents (defining instruction ids)."""
    by_id: dict[int, Node] = {n.id: n for n in fn.nodes()}
    def_ids: dict[str, list[int]] = {}
    for n in fn.nodes():
        d = node_def(n)
        if d is not None:
            def_ids.setdefault(d, []).append(n.id)
    parents: dict[int, list[int]] = {}
    for n in fn.nodes():
        ps: list[int] = []
        for reg in node_uses(n):
            ps.extend(def_ids.get(reg, []))
        parents[n.id] = ps
    return by_id, parents


def backward_slice(fn: Function, seeds: set[int]) -> set[int]:
    """Least set containing seeds and closed under data dependence.

    Walks use-def edges transitively, through phis to all incoming values.
    Store and out never appear in the result (they produce no values),
    though a store seed still contributes its operand chain.
    """
    by_id, parents = _dep_graph(fn)
    bad = [s for s in seeds if s not in by_id]
    if bad:
        raise ValueError(f"seed ids not in function: {sorted(bad)}")
    visited: set[int] = set()
    stack = list(seeds)
    while stack:
        i = stack.pop()
        if i in visited:
            continue
        visited.add(i)
        stack.extend(parents[i])
    return {i for i in visited if not isinstance(by_id[i], (Store, Out))}


def dce_keep(fn: Function, roots: set[int]) -> set[int]:
    """Ids that dce would retain: the roots, the backward closure of the
    roots and of every register any terminator reads.  Terminator ids are
    not included; they are never removable anyway."""
    by_id = {n.id: n for n in fn.nodes()}
    bad = [r for r in roots if r not in by_id]
    if bad:
        raise ValueError(f"root ids not in function: {sorted(bad)}")
    seeds = set(roots)
    def_ids: dict[str, list[int]] = {}
    for n in fn.nodes():
        d = node_def(n)
        if d is not None:
            def_ids.setdefault(d, []).append(n.id)
    for blk in fn.blocks:
        if blk.term is not None:
            for reg in node_uses(blk.term):
                seeds.update(def_ids.get(reg, []))
    if not seeds:
        return set(roots)
    return backward_slice(fn, seeds) | set(roots)


def dce(fn: Function, roots: set[int]) -> Function:
    """Drop instructions outside the backward closure of the roots.

    Terminators are implicit roots: they survive along with the closure of
    every register they read.  Ids of surviving instructions are preserved.
    """
    keep = dce_keep(fn, roots)
    out = copy.deepcopy(fn)
    for blk in out.blocks:
        blk.phis = [p for p in blk.phis if p.id in keep]
        blk.body = [i for i in blk.body if i.id in keep]
    return out


# ---------------------------------------------------------------------------
# CFG simplification


def simplify_cfg(fn: Function, id_base: int | None = None) -> Function:
    """Clean up control flow without changing observable behavior.

    Iterates to a fixed point: drops unreachable blocks, folds brcond on a
    constant or with equal targets, lowers single-predecessor phis to
    copies, removes empty forwarding blocks (rethreading phis), and merges
    single-successor/single-predecessor block pairs.  Idempotent.

    id_base sets the first id for any copies the phi lowering must mint;
    it defaults to one past the function's own maximum id.
    """
    out = copy.deepcopy(fn)
    next_id = [max(out.max_id() + 1, 0) if id_base is None else id_base]
    for _ in range(10 * len(out.blocks) + 10):
        changed = (
            _drop_unreachable(out)
            | _fold_brcond(out)
            | _lower_single_pred_phis(out, next_id)
            | _remove_empty_blocks(out)
            | _merge_linear(out)
        )
        if not changed:
            break
    return out


def _drop_unreachable(fn: Function) -> bool:
    c = build_cfg(fn)
    reachable: set[str] = set()
    stack = [c.entry]
    while stack:
        n = stack.pop()
        if n in reachable:
            continue
        reachable.add(n)
        stack.extend(c.succs[n])
    if len(reachable) == len(fn.blocks):
        return False
    dead = {b.label for b in fn.blocks} - reachable
    fn.blocks = [b for b in fn.blocks if b.label in reachable]
    # Phis may reference removed predecessors.
    for blk in fn.blocks:
        for phi in blk.phis:
            phi.incoming = [(p, v) for p, v in phi.incoming if p not in dead]
    return True


def _single_const_def(fn: Function, reg: str) -> int | None:
    found: int | None = None
    for n in fn.nodes():
        if node_def(n) == reg:
            if not isinstance(n, Const) or found is not None:
                return None
            found = n.value
    return found


def _retarget_phis(blk: Block, old_pred: str, new_preds: list[str]) -> None:
    for phi in blk.phis:
        new_incoming: list[tuple[str, Operand]] = []
        for p, v in phi.incoming:
            if p == old_pred:
                new_incoming.extend((np, v) for np in new_preds)
            else:
                new_incoming.append((p, v))
        phi.incoming = new_incoming


def _fold_brcond(fn: Function) -> bool:
    changed = False
    for blk in fn.blocks:
        t = blk.term
        if not isinstance(t, BrCond):
            continue
        if t.if_true == t.if_false:
            blk.term = Br(id=t.id, target=t.if_true)
            changed = True
            continue
        cval = _single_const_def(fn, t.cond)
        if cval is None:
            continue
        taken, dropped = (t.if_true, t.if_false) if cval != 0 else (t.if_false, t.if_true)
        blk.term = Br(id=t.id, target=taken)
        # The dropped edge disappears; fix the other side's phis now so a
        # later unreachable-drop cannot leave a stale incoming behind.
        bm = fn.block_map()
        if dropped in bm:
            for phi in bm[dropped].phis:
                phi.incoming = [(p, v) for p, v in phi.incoming if p != blk.label]
        changed = True
    return changed


def _lower_single_pred_phis(fn: Function, next_id: list[int]) -> bool:
    c = build_cfg(fn)
    changed = False
    for blk in fn.blocks:
        if not blk.phis or len(c.preds[blk.label]) != 1:
            continue
        pred = c.preds[blk.label][0]
        pairs: list[tuple[str, Operand]] = []
        ids: list[int] = []
        ok = True
        for phi in blk.phis:
            inc = dict(phi.incoming)
            if pred not in inc:
                ok = False
                break
            pairs.append((phi.dst, inc[pred]))
            ids.append(phi.id)
        if not ok:
            continue
        dsts = {d for d, _ in pairs}
        hazard = any(isinstance(v, str) and v in dsts for _, v in pairs)
        copies: list[BinOp] = []
        if hazard:
            # Parallel-assignment semantics: stage through temporaries.
            temps: list[tuple[str, Operand]] = []
            for k, (dst, v) in enumerate(pairs):
                tmp = f"__phi_tmp{k}"
                copies.append(BinOp(id=next_id[0], dst=tmp, op="add", a=v, b=0))
                next_id[0] += 1
                temps.append((dst, tmp))
            for (dst, tmp), pid in zip(temps, ids):
                copies.append(BinOp(id=pid, dst=dst, op="add", a=tmp, b=0))
        else:
            for (dst, v), pid in zip(pairs, ids):
                copies.append(BinOp(id=pid, dst=dst, op="add", a=v, b=0))
        blk.phis = []
        blk.body = copies + blk.body
        changed = True
    return changed


def _remove_empty_blocks(fn: Function) -> bool:
    changed = False
    while True:
        c = build_cfg(fn)
        bm = fn.block_map()
        victim: Block | None = None
        for blk in fn.blocks[1:]:  # entry is never removed
            if blk.phis or blk.body or not isinstance(blk.term, Br):
                continue
            target = blk.term.target
            if target == blk.label:
                continue
            tgt = bm[target]
            preds = c.preds[blk.label]
            if not preds:
                continue
            # Rethreading must not give the target two edges from one pred.
            if tgt.phis and any(p in c.preds[target] for p in preds):
                continue
            victim = blk
            break
        if victim is None:
            return changed
        target = victim.term.target  # type: ignore[union-attr]
        c = build_cfg(fn)
        preds = c.preds[victim.label]
        for p in preds:
            pt = bm[p].term
            if isinstance(pt, Br) and pt.target == victim.label:
                pt.target = target
            elif isinstance(pt, BrCond):
                if pt.if_true == victim.label:
                    pt.if_true = target
                if pt.if_false == victim.label:
                    pt.if_false = target
        _retarget_phis(bm[target], victim.label, preds)
        fn.blocks.remove(victim)
        changed = True


def _merge_linear(fn: Function) -> bool:
    changed = False
    while True:
        c = build_cfg(fn)
        bm = fn.block_map()
        merged = False
        for a in fn.blocks:
            if not isinstance(a.term, Br):
                continue
            blabel = a.term.target
            if blabel == a.label or blabel == fn.blocks[0].label:
                continue
            b = bm[blabel]
            if c.preds[blabel] != [a.label] or b.phis:
                continue
            a.body = a.body + b.body
            a.term = b.term
            for succ_label in (
                [b.term.target] if isinstance(b.term, Br)
                else [b.term.if_true, b.term.if_false] if isinstance(b.term, BrCond)
                else []
            ):
                if succ_label in bm:
                    for phi in bm[succ_label].phis:
                        phi.incoming = [
                            (a.label if p == blabel else p, v) for p, v in phi.incoming
                        ]
            fn.blocks.remove(b)
            merged = True
            changed = True
            break
        if not merged:
            return changed
