"""Structural and dataflow validation for DIR programs.

validate_program returns a list of diagnostics; an empty list means the
program is well formed.  Checks cover label and id integrity, phi shape,
access-phase purity, prefetch origin tags, and assignment-before-use of
every register along all paths (a forward must-be-defined dataflow).
"""

from __future__ import annotations

from .types import (
    BINOP_OPS,
    LOAD_WIDTHS,
    BinOp,
    Block,
    Br,
    BrCond,
    Diagnostic,
    Function,
    Load,
    Out,
    Prefetch,
    Program,
    Ret,
    Store,
    node_def,
    node_uses,
)


def _terminator_targets(blk: Block) -> list[str]:
    t = blk.term
    if isinstance(t, Br):
        return [t.target]
    if isinstance(t, BrCond):
        return [t.if_true, t.if_false]
    return []


def _validate_function(fn: Function, diags: list[Diagnostic]) -> None:
    def diag(msg: str, block: str | None = None, instr_id: int | None = None) -> None:
        diags.append(Diagnostic(msg, function=fn.name, block=block, instr_id=instr_id))

    if fn.kind not in ("original", "access", "execute"):
        diag(f"unknown function kind {fn.kind!r}")
    if not fn.blocks:
        diag("function has no blocks")
        return

    labels: set[str] = set()
    for blk in fn.blocks:
        if blk.label in labels:
            diag(f"duplicate label {blk.label!r}", block=blk.label)
        labels.add(blk.label)

    # Structural checks per block.
    for blk in fn.blocks:
        if blk.term is None:
            diag("block has no terminator", block=blk.label)
        for target in _terminator_targets(blk):
            if target not in labels:
                diag(f"undefined label {target!r}", block=blk.label,
                     instr_id=blk.term.id if blk.term else None)
        for instr in blk.body:
            if isinstance(instr, BinOp) and instr.op not in BINOP_OPS:
                diag(f"unknown binop {instr.op!r}", block=blk.label, instr_id=instr.id)
            if isinstance(instr, (Load, Store)) and instr.width not in LOAD_WIDTHS:
                diag(f"bad width {instr.width}", block=blk.label, instr_id=instr.id)
            if fn.kind == "access" and isinstance(instr, Store):
                diag("store in access phase", block=blk.label, instr_id=instr.id)
            if fn.kind == "access" and isinstance(instr, Out):
                diag("out in access phase", block=blk.label, instr_id=instr.id)
            if isinstance(instr, Prefetch) and instr.origin is None:
                diag("prefetch without origin tag", block=blk.label, instr_id=instr.id)

    # Predecessor map over defined labels only.
    preds: dict[str, list[str]] = {blk.label: [] for blk in fn.blocks}
    for blk in fn.blocks:
        for target in _terminator_targets(blk):
            if target in preds and blk.label not in preds[target]:
                preds[target].append(blk.label)

    entry = fn.blocks[0]
    if preds[entry.label]:
        diag("entry block has predecessors", block=entry.label)

    # Phi shape: one incoming per predecessor, no extras or duplicates.
    for blk in fn.blocks:
        pred_set = set(preds[blk.label])
        for phi in blk.phis:
            seen: set[str] = set()
            for pred, _ in phi.incoming:
                if pred in seen:
                    diag(f"phi has duplicate incoming for {pred!r}",
                         block=blk.label, instr_id=phi.id)
                seen.add(pred)
                if pred not in pred_set:
                    diag(f"phi incoming from non-predecessor {pred!r}",
                         block=blk.label, instr_id=phi.id)
            for pred in sorted(pred_set - seen):
                diag(f"phi missing incoming for predecessor {pred!r}",
                     block=blk.label, instr_id=phi.id)

    # Reachability from entry.
    reachable: set[str] = set()
    work = [entry.label]
    block_map = fn.block_map()
    while work:
        label = work.pop()
        if label in reachable or label not in block_map:
            continue
        reachable.add(label)
        work.extend(_terminator_targets(block_map[label]))
    for blk in fn.blocks:
        if blk.label not in reachable:
            diag("unreachable block", block=blk.label)

    _check_defined_before_use(fn, preds, reachable, diags)


def _check_defined_before_use(
    fn: Function,
    preds: dict[str, list[str]],
    reachable: set[str],
    diags: list[Diagnostic],
) -> None:
    """Must-be-defined forward dataflow over reachable blocks."""
    universe: set[str] = set(fn.params)
    for n in fn.nodes():
        d = node_def(n)
        if d is not None:
            universe.add(d)
        universe.update(node_uses(n))

    block_map = fn.block_map()
    entry_label = fn.blocks[0].label
    defined_out: dict[str, set[str]] = {
        blk.label: set(universe) for blk in fn.blocks
    }

    order = [blk.label for blk in fn.blocks if blk.label in reachable]
    changed = True
    while changed:
        changed = False
        for label in order:
            blk = block_map[label]
            if label == entry_label:
                avail = set(fn.params)
            else:
                pred_outs = [defined_out[p] for p in preds[label] if p in reachable]
                avail = set.intersection(*pred_outs) if pred_outs else set(universe)
            for phi in blk.phis:
                avail.add(phi.dst)
            for instr in blk.body:
                d = node_def(instr)
                if d is not None:
                    avail.add(d)
            if avail != defined_out[label]:
                defined_out[label] = avail
                changed = True

    for label in order:
        blk = block_map[label]
        if label == entry_label:
            avail = set(fn.params)
        else:
            pred_outs = [defined_out[p] for p in preds[label] if p in reachable]
            avail = set.intersection(*pred_outs) if pred_outs else set(universe)
        for phi in blk.phis:
            for pred, value in phi.incoming:
                if isinstance(value, str) and pred in reachable:
                    if value not in defined_out.get(pred, set()):
                        diags.append(Diagnostic(
                            f"register %{value} not assigned on path through {pred!r}",
                            function=fn.name, block=label, instr_id=phi.id))
        for phi in blk.phis:
            avail.add(phi.dst)
        nodes = list(blk.body) + ([blk.term] if blk.term is not None else [])
        for n in nodes:
            for use in node_uses(n):
                if use not in avail:
                    diags.append(Diagnostic(
                        f"register %{use} used before assignment",
                        function=fn.name, block=label, instr_id=n.id))
            d = node_def(n)
            if d is not None:
                avail.add(d)


def validate_program(prog: Program) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    names: set[str] = set()
    for fn in prog.functions:
        if fn.name in names:
            diags.append(Diagnostic(f"duplicate function name @{fn.name}"))
        names.add(fn.name)

    if prog.functions:
        if not prog.entry:
            diags.append(Diagnostic("program has no entry function"))
        elif prog.entry not in names:
            diags.append(Diagnostic(f"entry function @{prog.entry} not defined"))

    segs = sorted(prog.data, key=lambda s: (s.base, s.length))
    for seg in segs:
        if seg.length <= 0:
            diags.append(Diagnostic(f"data segment at {seg.base} has no bytes"))
        if seg.base < 0:
            diags.append(Diagnostic(f"data segment base {seg.base} is negative"))
    for a, b in zip(segs, segs[1:]):
        if a.end() > b.base:
            diags.append(Diagnostic(
                f"data segments at {a.base} and {b.base} overlap"))

    seen_ids: dict[int, str] = {}
    for fn in prog.functions:
        for n in fn.nodes():
            if n.id in seen_ids:
                diags.append(Diagnostic(
                    f"instruction id {n.id} already used in @{seen_ids[n.id]}",
                    function=fn.name, instr_id=n.id))
            else:
                seen_ids[n.id] = fn.name

    # Origin tags must name loads of some original-kind function, when one
    # is present to check against.
    original_loads: set[int] = set()
    have_original = False
    for fn in prog.functions:
        if fn.kind == "original":
            have_original = True
            for n in fn.nodes():
                if isinstance(n, Load):
                    original_loads.add(n.id)
    if have_original:
        for fn in prog.functions:
            for blk in fn.blocks:
                for instr in blk.body:
                    origin = getattr(instr, "origin", None)
                    if origin is not None and origin not in original_loads:
                        diags.append(Diagnostic(
                            f"origin tag {origin} does not name an original load",
                            function=fn.name, block=blk.label, instr_id=instr.id))

    for fn in prog.functions:
        _validate_function(fn, diags)
    return diags
