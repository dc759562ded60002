"""DIR: the toolkit's loop-level intermediate representation.

Submodules: types (data model), parser, printer, validate, interp.
The most commonly used names are re-exported here.
"""

from .types import (
    BINOP_OPS,
    LOAD_WIDTHS,
    BinOp,
    Block,
    Br,
    BrCond,
    Const,
    DataSegment,
    Diagnostic,
    DirError,
    DirRuntimeError,
    DirSyntaxError,
    ExecTrace,
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
    Terminator,
    is_side_effecting,
    node_def,
    node_uses,
)
from .parser import parse_program
from .printer import format_node, print_function, print_program
from .validate import validate_program
from .interp import (
    DEFAULT_FUEL,
    default_mem_size,
    init_memory,
    interpret,
    memory_digest,
    splitmix_fill,
    with_seed,
)

__all__ = [
    "BINOP_OPS",
    "LOAD_WIDTHS",
    "BinOp",
    "Block",
    "Br",
    "BrCond",
    "Const",
    "DEFAULT_FUEL",
    "DataSegment",
    "Diagnostic",
    "DirError",
    "DirRuntimeError",
    "DirSyntaxError",
    "ExecTrace",
    "Function",
    "Load",
    "Node",
    "Operand",
    "Out",
    "Phi",
    "Prefetch",
    "Program",
    "Ret",
    "Store",
    "Terminator",
    "default_mem_size",
    "format_node",
    "init_memory",
    "interpret",
    "is_side_effecting",
    "memory_digest",
    "node_def",
    "node_uses",
    "parse_program",
    "print_function",
    "print_program",
    "splitmix_fill",
    "validate_program",
    "with_seed",
]
