"""Versioned snapshots of an exported range.

A range image carries computed values only, never formulas; its cell list
is row-major and exactly rows*cols long.
"""

from __future__ import annotations

from dataclasses import dataclass

from discom.model.address import RangeRef
from discom.model.values import CellValue
from discom.model.workbook import Workbook


@dataclass(frozen=True)
class RangeImage:
    export_id: str
    version: int
    rows: int
    cols: int
    cells: tuple[CellValue, ...]

    def __post_init__(self):
        if self.version < 1:
            raise ValueError(f"image versions start at 1, got {self.version}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"bad image dims {self.rows}x{self.cols}")
        if len(self.cells) != self.rows * self.cols:
            raise ValueError(
                f"image holds {len(self.cells)} cells, dims say {self.rows * self.cols}")

    @staticmethod
    def from_workbook(wb: Workbook, rng: RangeRef, export_id: str, version: int) -> "RangeImage":
        """Snapshot the computed values under ``rng``, row-major."""
        return RangeImage(export_id, version, rng.rows, rng.cols,
                          tuple(wb.computed(a) for a in rng.cells()))

    @property
    def dims(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def same_cells(self, other: "RangeImage") -> bool:
        """Value equality ignoring version and export identity."""
        return self.dims == other.dims and self.cells == other.cells

    def with_version(self, export_id: str, version: int) -> "RangeImage":
        return RangeImage(export_id, version, self.rows, self.cols, self.cells)
