"""Workbook evaluation: full recomputation and incremental recalculation.

Both paths share one cell evaluator and one dependency graph, so an
incremental pass over dirty cells plus transitive dependents lands on
exactly the values a from-scratch evaluation would produce. Cells on
reference cycles (and nothing else) are pinned to the CYCLE error before
ordering; the error then flows to dependents through normal propagation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from discom.engine import functions as fns
from discom.engine.ast import (AstNode, Binary, BoolLit, Call, CellRef,
                               NumberLit, RangeLit, TextLit, Unary)
from discom.engine.graph import DepGraph, build_dep_graph, canonical_address
from discom.model.address import CellAddress
from discom.model.values import BLANK, CellValue, ErrorCode
from discom.model.workbook import FormulaContent, Workbook

CYCLE_ERROR = CellValue.error(ErrorCode.CYCLE)
REF_ERROR = CellValue.error(ErrorCode.REF)


@dataclass(frozen=True)
class ChangeSet:
    """Cells whose computed value actually changed, old and new."""
    changes: Mapping[CellAddress, tuple[CellValue, CellValue]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.changes)

    def __bool__(self) -> bool:
        return bool(self.changes)

    def addresses(self) -> set[CellAddress]:
        return set(self.changes)


class _Context:
    __slots__ = ("values", "sheet_map")

    def __init__(self, wb: Workbook, values: dict[CellAddress, CellValue]):
        self.values = values
        self.sheet_map = {s.name.casefold(): s.name for s in wb.sheets}

    def lookup(self, addr: CellAddress) -> CellValue:
        canon_sheet = self.sheet_map.get(addr.sheet.casefold())
        if canon_sheet is None:
            return REF_ERROR
        if canon_sheet != addr.sheet:
            addr = CellAddress(canon_sheet, addr.col, addr.row)
        return self.values.get(addr, BLANK)


def _eval(node: AstNode, ctx: _Context) -> fns.Arg:
    if isinstance(node, NumberLit):
        return CellValue.number(node.value)
    if isinstance(node, TextLit):
        return CellValue.text(node.value)
    if isinstance(node, BoolLit):
        return CellValue.boolean(node.value)
    if isinstance(node, CellRef):
        return ctx.lookup(node.address)
    if isinstance(node, RangeLit):
        if node.range.sheet.casefold() not in ctx.sheet_map:
            return REF_ERROR
        return fns.RangeArg(tuple(ctx.lookup(a) for a in node.range.cells()))
    if isinstance(node, Unary):
        return fns.apply_unary(node.op, _eval(node.operand, ctx))
    if isinstance(node, Binary):
        return fns.apply_binary(node.op, _eval(node.left, ctx), _eval(node.right, ctx))
    if isinstance(node, Call):
        return _eval_call(node, ctx)
    raise TypeError(f"unknown AST node {node!r}")


def _eval_call(node: Call, ctx: _Context) -> CellValue:
    name = node.name.upper()
    if name == "IF":
        return _eval_if(node, ctx)
    fn = fns.FUNCTIONS.get(name)
    if fn is None:
        return fns.NAME_ERROR
    args = tuple(_eval(arg, ctx) for arg in node.args)
    try:
        return fn(args)
    except fns.CellError as err:
        return err.value


def _eval_if(node: Call, ctx: _Context) -> CellValue:
    if len(node.args) not in (2, 3):
        return fns.VALUE_ERROR
    try:
        cond = fns.as_condition(fns.scalar(_eval(node.args[0], ctx)))
        if cond:
            return fns.scalar(_eval(node.args[1], ctx))
        if len(node.args) == 3:
            return fns.scalar(_eval(node.args[2], ctx))
        return CellValue.boolean(False)
    except fns.CellError as err:
        return err.value


def _eval_cell(node: AstNode, ctx: _Context) -> CellValue:
    result = _eval(node, ctx)
    if isinstance(result, fns.RangeArg):  # parser forbids this; stay safe
        return fns.VALUE_ERROR
    return result


def evaluate_formula(wb: Workbook, node: AstNode,
                     values: dict[CellAddress, CellValue]) -> CellValue:
    """Evaluate one formula against explicit cell values (engine-internal
    and test hook)."""
    return _eval_cell(node, _Context(wb, values))


def evaluate_all(wb: Workbook, graph: DepGraph | None = None) -> Workbook:
    """Recompute every cell; terminates on any input, cycles included."""
    if graph is None:
        graph = build_dep_graph(wb)
    values: dict[CellAddress, CellValue] = {}
    for addr, cell in wb.iter_cells():
        if not isinstance(cell.content, FormulaContent):
            values[addr] = cell.content.value
    for addr in graph.cycle_cells:
        values[addr] = CYCLE_ERROR
    ctx = _Context(wb, values)
    for addr in graph.topo_order:
        cell = wb.cell(addr)
        assert cell is not None and isinstance(cell.content, FormulaContent)
        values[addr] = _eval_cell(cell.content.ast, ctx)
    return wb.with_computed(values)


def recalculate(wb: Workbook, dirty: Iterable[CellAddress],
                graph: DepGraph | None = None) -> tuple[Workbook, ChangeSet]:
    """Recompute exactly the dirty cells plus transitive dependents.

    ``wb`` must carry valid computed values everywhere except the dirty
    cells (which hold their pre-edit computed value for diffing). Returns
    the updated workbook and the set of real value changes.
    """
    if graph is None:
        graph = build_dep_graph(wb)
    sheet_map = {s.name.casefold(): s.name for s in wb.sheets}
    seeds = {canonical_address(wb, a, sheet_map) for a in dirty}
    affected = seeds | graph.downstream(seeds)

    old = {addr: wb.computed(addr) for addr in affected}
    values: dict[CellAddress, CellValue] = {}
    for addr, cell in wb.iter_cells():
        if isinstance(cell.content, FormulaContent):
            values[addr] = cell.computed
        else:
            values[addr] = cell.content.value
    for addr in affected & graph.cycle_cells:
        values[addr] = CYCLE_ERROR
    ctx = _Context(wb, values)
    for addr in graph.topo_order:
        if addr not in affected:
            continue
        cell = wb.cell(addr)
        if cell is None or not isinstance(cell.content, FormulaContent):
            continue
        values[addr] = _eval_cell(cell.content.ast, ctx)

    new_values = {addr: values.get(addr, BLANK) for addr in affected if wb.cell(addr)}
    changes = {addr: (old[addr], new_values[addr])
               for addr in sorted(new_values, key=lambda a: a.sort_key)
               if new_values[addr] != old[addr]}
    return wb.with_computed(new_values), ChangeSet(changes)
