"""Shared helpers: seeded random program generators and small fixtures.

Two corpora drive the randomized tests.  random_cfg_program builds messy
but terminating control flow (every block threads a visit counter, and
each conditional branch bails to the sink once the counter passes its
budget).  random_loop_kernel builds a well-formed counted loop with a
random body DAG: loads behind power-of-two masks, loop-carried
accumulators, and optional stores.
"""

from __future__ import annotations

import random

from daef.ir import Program, parse_program, validate_program


def assert_valid(prog: Program) -> None:
    diags = validate_program(prog)
    assert not diags, "\n".join(str(d) for d in diags)


SUM_KERNEL = """
data @base=4096 prng(seed=7, len=64)
entry @main
func @main() kind=original {
entry:
  %n = const 8
  %zero = const 0
  %base = const 4096
  br loop
loop:
  %i = phi [entry: %zero], [latch: %i2]
  %acc = phi [entry: %zero], [latch: %acc2]
  %c = binop slt %i, %n
  brcond %c, body, done
body:
  %off = binop shl %i, 3
  %addr = binop add %base, %off
  %v = load %addr, 0, w8
  %acc2 = binop add %acc, %v
  %i2 = binop add %i, 1
  br latch
latch:
  br loop
done:
  out %acc
  ret %acc
}
"""


def sum_kernel() -> Program:
    return parse_program(SUM_KERNEL)


def random_cfg_program(rng: random.Random, n_blocks: int | None = None) -> Program:
    """A terminating single-function program with random control flow.

    Block i threads a visit counter (phi + add 1).  Conditional branches
    jump anywhere while the counter is under a budget, then fall through
    to the sink, and plain branches only jump forward, so every walk
    terminates.  Unreachable blocks are pruned before emission.
    """
    n = n_blocks if n_blocks is not None else rng.randint(4, 9)
    budget = rng.randint(6, 48)
    sink = n

    # Choose terminators first; blocks and phis come after pruning.
    kinds: dict[int, tuple] = {}
    for i in range(1, n):
        if rng.random() < 0.5:
            kinds[i] = ("br", rng.randint(i + 1, sink))
        else:
            kinds[i] = ("brcond", rng.randint(1, sink), sink)

    succs: dict[int, list[int]] = {0: [1]}
    for i in range(1, n):
        succs[i] = sorted(set(kinds[i][1:]))
    succs[sink] = []

    live = {0}
    stack = [0]
    while stack:
        b = stack.pop()
        for s in succs[b]:
            if s not in live:
                live.add(s)
                stack.append(s)

    preds: dict[int, list[int]] = {i: [] for i in sorted(live)}
    for b in sorted(live):
        for s in succs[b]:
            preds[s].append(b)

    def label(i: int) -> str:
        if i == 0:
            return "entry"
        if i == sink:
            return "sink"
        return f"b{i}"

    lines = ["data @base=4096 prng(seed=3, len=256)", "entry @main",
             "func @main() kind=original {"]
    out_reg = {0: "c"}
    for i in sorted(live - {0}):
        out_reg[i] = f"q{i}"
    lines.append("entry:")
    lines.append("  %c = const 0")
    lines.append(f"  %lim = const {budget}")
    lines.append(f"  br {label(1)}")
    for i in sorted(live - {0}):
        lines.append(f"{label(i)}:")
        inc = ", ".join(f"[{label(p)}: %{out_reg[p]}]" for p in preds[i])
        lines.append(f"  %p{i} = phi {inc}")
        lines.append(f"  %q{i} = binop add %p{i}, 1")
        for k in range(rng.randint(0, 2)):
            op = rng.choice(["add", "sub", "mul", "xor", "and", "or", "slt", "shl"])
            a = rng.choice([f"%q{i}", f"%p{i}", "%lim", str(rng.randint(0, 7))])
            b = rng.choice([f"%q{i}", "%lim", str(rng.randint(0, 7))])
            lines.append(f"  %j{i}_{k} = binop {op} {a}, {b}")
        if rng.random() < 0.3:
            lines.append(f"  %a{i} = const {4096 + 8 * i}")
            lines.append(f"  store %a{i}, 0, %q{i}, w8")
        if rng.random() < 0.2:
            lines.append(f"  out %q{i}")
        if i == sink:
            lines.append(f"  ret %p{sink}")
        elif kinds[i][0] == "br":
            lines.append(f"  br {label(kinds[i][1])}")
        else:
            lines.append(f"  %g{i} = binop slt %q{i}, %lim")
            lines.append(f"  brcond %g{i}, {label(kinds[i][1])}, {label(sink)}")
    lines.append("}")
    return parse_program("\n".join(lines))


def random_loop_kernel(rng: random.Random) -> Program:
    """A canonical counted loop with a random body DAG.

    One to three data arrays, each a power-of-two element count so load
    addresses can be masked into range.  One to three loop-carried
    accumulators, optional stores to a scratch array, outs in the
    epilogue.  Always validates and always terminates.
    """
    n_iters = rng.randint(40, 300)
    step = rng.choice([1, 1, 1, 2])
    n_arrays = rng.randint(1, 3)
    arrays = []
    base = 4096
    for a in range(n_arrays):
        logn = rng.randint(6, 9)  # 64..512 elements of 8 bytes
        arrays.append((base, (1 << logn) - 1))
        base += (1 << logn) * 8
    scratch = base  # plain store target, one slot per iteration
    has_store = rng.random() < 0.5
    n_accs = rng.randint(1, 3)

    lines = []
    for b, mask in arrays:
        lines.append(f"data @base={b} prng(seed={rng.randint(1, 1 << 30)}, "
                     f"len={(mask + 1) * 8})")
    if has_store:
        lines.append(f"data @base={scratch} zero={n_iters * step * 8}")
    lines += ["entry @main", "func @main() kind=original {", "entry:"]
    lines.append(f"  %n = const {n_iters * step}")
    lines.append("  %zero = const 0")
    for a, (b, _) in enumerate(arrays):
        lines.append(f"  %base{a} = const {b}")
    if has_store:
        lines.append(f"  %sbase = const {scratch}")
    lines.append("  br loop")
    lines.append("loop:")
    lines.append("  %i = phi [entry: %zero], [body: %i2]")
    for k in range(n_accs):
        lines.append(f"  %acc{k} = phi [entry: %zero], [body: %acc{k}x]")
    lines.append("  %cond = binop slt %i, %n")
    lines.append("  brcond %cond, body, done")
    lines.append("body:")

    avail = ["%i"] + [f"%acc{k}" for k in range(n_accs)]
    tmp = 0
    loads = 0
    for _ in range(rng.randint(3, 12)):
        tmp += 1
        dst = f"%t{tmp}"
        if rng.random() < 0.4:
            a = rng.randrange(n_arrays)
            b, mask = arrays[a]
            src = rng.choice(avail)
            lines.append(f"  %m{tmp} = binop and {src}, {mask}")
            lines.append(f"  %o{tmp} = binop shl %m{tmp}, 3")
            lines.append(f"  %ad{tmp} = binop add %base{a}, %o{tmp}")
            width = rng.choice([1, 2, 4, 8])
            lines.append(f"  {dst} = load %ad{tmp}, 0, w{width}")
            loads += 1
        else:
            op = rng.choice(["add", "sub", "mul", "xor", "and", "or", "shl", "shr"])
            x = rng.choice(avail)
            y = rng.choice(avail + [str(rng.randint(1, 63))])
            if op in ("shl", "shr"):
                y = str(rng.randint(1, 7))
            lines.append(f"  {dst} = binop {op} {x}, {y}")
        avail.append(dst)
    for k in range(n_accs):
        src = rng.choice(avail[1:])
        op = rng.choice(["add", "xor"])
        lines.append(f"  %acc{k}x = binop {op} %acc{k}, {src}")
    if has_store:
        lines.append("  %soff = binop shl %i, 3")
        lines.append("  %sad = binop add %sbase, %soff")
        lines.append(f"  store %sad, 0, {rng.choice(avail[1:])}, w8")
    lines.append(f"  %i2 = binop add %i, {step}")
    lines.append("  br loop")
    lines.append("done:")
    for k in range(n_accs):
        lines.append(f"  out %acc{k}")
    lines.append("  ret %acc0")
    lines.append("}")
    return parse_program("\n".join(lines))
