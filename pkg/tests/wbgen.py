"""Seeded random generators for workbooks, formulas, and images.

Shared by the property tests and the acceptance suite. Everything takes
an explicit random.Random so failures replay exactly.
"""

from __future__ import annotations

import random
import string

from discom.engine.parser import parse_cell_input
from discom.model.address import CellAddress, column_letters
from discom.model.image import RangeImage
from discom.model.values import BLANK, CellValue, ErrorCode
from discom.model.workbook import Workbook

AGG_FUNCS = ("SUM", "AVERAGE", "MIN", "MAX", "COUNT")
MAX_ROW, MAX_COL = 12, 6


def random_value(rng: random.Random, errors: bool = True) -> CellValue:
    roll = rng.random()
    if roll < 0.45:
        return CellValue.number(random_number(rng))
    if roll < 0.65:
        size = rng.randrange(0, 8)
        return CellValue.text("".join(rng.choice(string.ascii_letters + " <&>\"'")
                                      for _ in range(size)))
    if roll < 0.75:
        return CellValue.boolean(rng.random() < 0.5)
    if roll < 0.85 and errors:
        return CellValue.error(rng.choice(list(ErrorCode)))
    return BLANK


def random_number(rng: random.Random) -> float:
    roll = rng.random()
    if roll < 0.5:
        return float(rng.randrange(-50, 51))
    if roll < 0.8:
        return rng.randrange(-5000, 5000) / 100.0
    return rng.uniform(-1e9, 1e9)


def random_image(rng: random.Random, export_id: str = "exp-x",
                 version: int = 1, dims: tuple[int, int] | None = None) -> RangeImage:
    rows, cols = dims or (rng.randrange(1, 5), rng.randrange(1, 5))
    cells = tuple(random_value(rng) for _ in range(rows * cols))
    return RangeImage(export_id, version, rows, cols, cells)


def random_addr(rng: random.Random, sheet: str = "S") -> CellAddress:
    return CellAddress(sheet, rng.randrange(1, MAX_COL + 1),
                       rng.randrange(1, MAX_ROW + 1))


def _a1(addr: CellAddress) -> str:
    return f"{column_letters(addr.col)}{addr.row}"


def random_formula(rng: random.Random, sheet: str = "S", depth: int = 3) -> str:
    return "=" + _expr(rng, sheet, depth)


def _expr(rng: random.Random, sheet: str, depth: int) -> str:
    if depth <= 0 or rng.random() < 0.3:
        return _leaf(rng, sheet)
    roll = rng.random()
    if roll < 0.45:
        op = rng.choice(["+", "-", "*", "/", "^", "&", "=", "<>", "<", "<=", ">", ">="])
        return f"({_expr(rng, sheet, depth - 1)}{op}{_expr(rng, sheet, depth - 1)})"
    if roll < 0.55:
        return f"-{_leaf(rng, sheet)}"
    return _call(rng, sheet, depth)


def _call(rng: random.Random, sheet: str, depth: int) -> str:
    roll = rng.random()
    if roll < 0.45:
        fn = rng.choice(AGG_FUNCS)
        args = []
        for _ in range(rng.randrange(1, 3)):
            if rng.random() < 0.6:
                args.append(_range(rng, sheet))
            else:
                args.append(_expr(rng, sheet, depth - 1))
        return f"{fn}({','.join(args)})"
    if roll < 0.6:
        return f"IF({_expr(rng, sheet, depth - 1)},{_expr(rng, sheet, depth - 1)},{_expr(rng, sheet, depth - 1)})"
    if roll < 0.75:
        return f"ROUND({_expr(rng, sheet, depth - 1)},{rng.randrange(0, 3)})"
    if roll < 0.9:
        return f"ABS({_expr(rng, sheet, depth - 1)})"
    return f"CONCAT({_expr(rng, sheet, depth - 1)},{_leaf(rng, sheet)})"


def _leaf(rng: random.Random, sheet: str) -> str:
    roll = rng.random()
    if roll < 0.4:
        return str(rng.randrange(-20, 21))
    if roll < 0.5:
        return str(rng.randrange(-400, 400) / 10.0)
    if roll < 0.55:
        return '"t' + rng.choice(string.ascii_lowercase) + '"'
    if roll < 0.6:
        return rng.choice(["TRUE", "FALSE"])
    return _a1(random_addr(rng, sheet))


def _range(rng: random.Random, sheet: str) -> str:
    top = random_addr(rng, sheet)
    rows = rng.randrange(0, 3)
    cols = rng.randrange(0, 3)
    bottom = CellAddress(sheet, min(top.col + cols, MAX_COL),
                         min(top.row + rows, MAX_ROW))
    return f"{_a1(top)}:{_a1(bottom)}"


def random_workbook(rng: random.Random, n_cells: int = 40,
                    wb_id: str = "wb", sheet: str = "S",
                    formula_share: float = 0.55) -> Workbook:
    """A sparse random workbook; cycles can and do occur naturally."""
    wb = Workbook(wb_id).with_sheet(sheet)
    addrs = set()
    while len(addrs) < min(n_cells, MAX_ROW * MAX_COL):
        addrs.add(random_addr(rng, sheet))
    for addr in sorted(addrs, key=lambda a: a.sort_key):
        wb = wb.with_content(addr, random_content(rng, sheet, formula_share))
    return wb


def random_content(rng: random.Random, sheet: str, formula_share: float):
    if rng.random() < formula_share:
        return parse_cell_input(random_formula(rng, sheet), sheet)
    value = random_value(rng, errors=False)
    if value.is_error:
        value = CellValue.number(0.0)
    from discom.model.workbook import LiteralContent
    return LiteralContent(value)


def random_edit(rng: random.Random, wb: Workbook, sheet: str = "S"):
    """(address, new content) for a single-cell edit."""
    addr = random_addr(rng, sheet)
    return addr, random_content(rng, sheet, formula_share=0.5)


def values_of(wb: Workbook) -> dict:
    return {addr: cell.computed for addr, cell in wb.iter_cells()}
