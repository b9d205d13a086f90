"""Formula syntax tree nodes.

Nodes are immutable; a range literal may appear only as a function call
argument (the parser enforces this).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

from discom.model.address import CellAddress, RangeRef

AstNode = Union[
    "NumberLit", "TextLit", "BoolLit", "CellRef", "RangeLit", "Unary", "Binary", "Call"
]

BINARY_OPS = ("+", "-", "*", "/", "^", "&", "=", "<>", "<", "<=", ">", ">=")
COMPARISON_OPS = ("=", "<>", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class NumberLit:
    value: float


@dataclass(frozen=True)
class TextLit:
    value: str


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class CellRef:
    address: CellAddress


@dataclass(frozen=True)
class RangeLit:
    range: RangeRef


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "+"
    operand: AstNode


@dataclass(frozen=True)
class Binary:
    op: str
    left: AstNode
    right: AstNode


@dataclass(frozen=True)
class Call:
    name: str  # as written; matching is case-insensitive
    args: tuple[AstNode, ...]


def walk(node: AstNode) -> Iterator[AstNode]:
    """Pre-order traversal of every node in the tree."""
    yield node
    if isinstance(node, Unary):
        yield from walk(node.operand)
    elif isinstance(node, Binary):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Call):
        for arg in node.args:
            yield from walk(arg)


def references(node: AstNode) -> set[CellAddress]:
    """Every cell the formula can read, over all branches (static,
    conservative: both arms of IF count; ranges expand to covered cells)."""
    out: set[CellAddress] = set()
    for n in walk(node):
        if isinstance(n, CellRef):
            out.add(n.address)
        elif isinstance(n, RangeLit):
            out.update(n.range.cells())
    return out
