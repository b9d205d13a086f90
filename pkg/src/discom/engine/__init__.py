"""Formula parser, dependency graph, and evaluator."""

from discom.engine.ast import (AstNode, Binary, BoolLit, Call, CellRef,
                               NumberLit, RangeLit, TextLit, Unary, references)
from discom.engine.evaluator import (ChangeSet, evaluate_all, evaluate_formula,
                                     recalculate)
from discom.engine.graph import DepGraph, build_dep_graph, canonical_address
from discom.engine.parser import parse_cell_input, parse_formula, tokenize

__all__ = [
    "AstNode", "Binary", "BoolLit", "Call", "CellRef", "ChangeSet",
    "DepGraph", "NumberLit", "RangeLit", "TextLit", "Unary",
    "build_dep_graph", "canonical_address", "evaluate_all",
    "evaluate_formula", "parse_cell_input", "parse_formula", "recalculate",
    "references", "tokenize",
]
