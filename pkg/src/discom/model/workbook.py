"""Workbook, sheets, and cells.

Sheets are sparse: an unset cell is Blank. Sheet names are unique
case-insensitively and keep their first-seen spelling. Workbooks are
immutable; editing produces a new workbook (``with_content`` keeps the
edited cell's stale computed value so incremental recalculation can
report old-vs-new).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterator, Mapping, Union

from discom.model.address import CellAddress, RangeRef
from discom.model.values import BLANK, CellValue

if TYPE_CHECKING:
    from discom.engine.ast import AstNode


@dataclass(frozen=True)
class LiteralContent:
    value: CellValue


@dataclass(frozen=True)
class FormulaContent:
    source: str  # verbatim, beginning with '='
    ast: "AstNode"


CellContent = Union[LiteralContent, FormulaContent]


@dataclass(frozen=True)
class Cell:
    content: CellContent
    computed: CellValue = BLANK

    @property
    def is_formula(self) -> bool:
        return isinstance(self.content, FormulaContent)


@dataclass(frozen=True)
class Sheet:
    name: str
    cells: Mapping[tuple[int, int], Cell] = field(default_factory=dict)

    def cell(self, row: int, col: int) -> Cell | None:
        return self.cells.get((row, col))


@dataclass(frozen=True)
class Workbook:
    id: str
    sheets: tuple[Sheet, ...] = ()
    properties: Mapping[str, str] = field(default_factory=dict)

    # -- lookup ------------------------------------------------------------

    def sheet(self, name: str) -> Sheet | None:
        folded = name.casefold()
        for s in self.sheets:
            if s.name.casefold() == folded:
                return s
        return None

    def has_sheet(self, name: str) -> bool:
        return self.sheet(name) is not None

    def cell(self, addr: CellAddress) -> Cell | None:
        s = self.sheet(addr.sheet)
        return s.cell(addr.row, addr.col) if s else None

    def computed(self, addr: CellAddress) -> CellValue:
        cell = self.cell(addr)
        return cell.computed if cell else BLANK

    def iter_cells(self) -> Iterator[tuple[CellAddress, Cell]]:
        for s in self.sheets:
            for (row, col), cell in s.cells.items():
                yield CellAddress(s.name, col, row), cell

    def range_values(self, rng: RangeRef) -> list[CellValue]:
        return [self.computed(a) for a in rng.cells()]

    # -- functional updates --------------------------------------------------

    def with_sheet(self, name: str) -> "Workbook":
        if self.has_sheet(name):
            return self
        return replace(self, sheets=self.sheets + (Sheet(name, {}),))

    def with_content(self, addr: CellAddress, content: CellContent | None) -> "Workbook":
        """Set (or blank, when content is None) one cell's content.

        The cell's previous computed value is retained so the engine can
        diff after recalculation; a missing sheet is created.
        """
        wb = self.with_sheet(addr.sheet)
        new_sheets = []
        folded = addr.sheet.casefold()
        for s in wb.sheets:
            if s.name.casefold() != folded:
                new_sheets.append(s)
                continue
            cells = dict(s.cells)
            old = cells.get((addr.row, addr.col))
            if content is None:
                content = LiteralContent(BLANK)
            cells[(addr.row, addr.col)] = Cell(content, old.computed if old else BLANK)
            new_sheets.append(replace(s, cells=cells))
        return replace(wb, sheets=tuple(new_sheets))

    def with_computed(self, values: Mapping[CellAddress, CellValue]) -> "Workbook":
        by_sheet: dict[str, dict[tuple[int, int], CellValue]] = {}
        for addr, value in values.items():
            by_sheet.setdefault(addr.sheet.casefold(), {})[(addr.row, addr.col)] = value
        new_sheets = []
        for s in self.sheets:
            updates = by_sheet.get(s.name.casefold())
            if not updates:
                new_sheets.append(s)
                continue
            cells = dict(s.cells)
            for key, value in updates.items():
                cell = cells.get(key)
                if cell is None:
                    # computed value for an unset cell only makes sense as Blank
                    continue
                cells[key] = replace(cell, computed=value)
            new_sheets.append(replace(s, cells=cells))
        return replace(self, sheets=tuple(new_sheets))

    def with_property(self, key: str, value: str) -> "Workbook":
        props = dict(self.properties)
        props[key] = value
        return replace(self, properties=props)

    def without_property(self, key: str) -> "Workbook":
        if key not in self.properties:
            return self
        props = dict(self.properties)
        del props[key]
        return replace(self, properties=props)
