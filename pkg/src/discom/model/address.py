"""Cell and range addressing in A1 notation.

Columns are 1-based bijective base-26 (A=1 .. Z=26, AA=27, XFD=16384).
Sheet names are case-insensitive; names that are not a plain identifier
are single-quoted with ``''`` escaping, as in ``'Area North'!B2``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

from discom.errors import ParseError

MAX_COL = 16384
MAX_ROW = 1048576

_PLAIN_SHEET = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_REF_BODY = re.compile(r"([A-Za-z]+)([0-9]+)\Z")


def column_letters(col: int) -> str:
    if col < 1:
        raise ValueError(f"column index must be >= 1, got {col}")
    out = ""
    while col:
        col, rem = divmod(col - 1, 26)
        out = chr(ord("A") + rem) + out
    return out


def column_index(letters: str) -> int:
    col = 0
    for ch in letters.upper():
        if not "A" <= ch <= "Z":
            raise ValueError(f"bad column letters: {letters!r}")
        col = col * 26 + (ord(ch) - ord("A") + 1)
    return col


@dataclass(frozen=True)
class CellAddress:
    sheet: str
    col: int
    row: int

    def __post_init__(self):
        if not self.sheet:
            raise ValueError("sheet name must be non-empty")
        if not 1 <= self.col <= MAX_COL:
            raise ValueError(f"column out of range: {self.col}")
        if not 1 <= self.row <= MAX_ROW:
            raise ValueError(f"row out of range: {self.row}")

    @property
    def sort_key(self) -> tuple[str, int, int]:
        """Row-major ordering used for every deterministic tie-break."""
        return (self.sheet.casefold(), self.row, self.col)

    def to_a1(self, with_sheet: bool = True) -> str:
        body = f"{column_letters(self.col)}{self.row}"
        if not with_sheet:
            return body
        return f"{quote_sheet(self.sheet)}!{body}"

    def offset(self, drow: int, dcol: int) -> "CellAddress":
        return CellAddress(self.sheet, self.col + dcol, self.row + drow)

    def __str__(self) -> str:
        return self.to_a1()


def quote_sheet(name: str) -> str:
    if _PLAIN_SHEET.match(name):
        return name
    return "'" + name.replace("'", "''") + "'"


def _split_sheet(text: str) -> tuple[str | None, str, int]:
    """Split an optional sheet prefix off; returns (sheet, rest, rest_offset)."""
    if text.startswith("'"):
        i = 1
        name = []
        while i < len(text):
            if text[i] == "'":
                if i + 1 < len(text) and text[i + 1] == "'":
                    name.append("'")
                    i += 2
                    continue
                break
            name.append(text[i])
            i += 1
        else:
            raise ParseError("unterminated quoted sheet name", 0)
        if i + 1 >= len(text) or text[i + 1] != "!":
            raise ParseError("expected '!' after sheet name", i + 1, frozenset({"'!'"}))
        return "".join(name), text[i + 2 :], i + 2
    bang = text.find("!")
    if bang >= 0:
        sheet = text[:bang]
        if not sheet:
            raise ParseError("empty sheet name", 0)
        return sheet, text[bang + 1 :], bang + 1
    return None, text, 0


def _parse_ref_body(body: str, offset: int) -> tuple[int, int]:
    m = _REF_BODY.match(body)
    if not m:
        raise ParseError(f"malformed cell reference: {body!r}", offset,
                         frozenset({"cell reference"}))
    col = column_index(m.group(1))
    row = int(m.group(2))
    if row < 1:
        raise ParseError(f"rows are 1-based: {body!r}", offset)
    if col > MAX_COL or row > MAX_ROW:
        raise ParseError(f"address out of range: {body!r}", offset)
    return col, row


def parse_address(text: str, default_sheet: str | None = None) -> CellAddress:
    """Parse ``Sheet1!B2`` (sheet part optional when default_sheet given)."""
    if not text:
        raise ParseError("empty address", 0)
    sheet, body, body_off = _split_sheet(text)
    if sheet is None:
        sheet = default_sheet
    if sheet is None:
        raise ParseError(f"address {text!r} needs a sheet name", 0,
                         frozenset({"sheet name"}))
    col, row = _parse_ref_body(body, body_off)
    return CellAddress(sheet, col, row)


@dataclass(frozen=True)
class RangeRef:
    sheet: str
    top_left: CellAddress
    bottom_right: CellAddress

    def __post_init__(self):
        tl, br = self.top_left, self.bottom_right
        if tl.sheet.casefold() != self.sheet.casefold() or br.sheet.casefold() != self.sheet.casefold():
            raise ValueError("range corners must be on the range's sheet")
        if tl.col > br.col or tl.row > br.row:
            raise ValueError(f"inverted range: {tl}:{br}")

    @staticmethod
    def from_corners(tl: CellAddress, br: CellAddress) -> "RangeRef":
        return RangeRef(tl.sheet, tl, br)

    @property
    def rows(self) -> int:
        return self.bottom_right.row - self.top_left.row + 1

    @property
    def cols(self) -> int:
        return self.bottom_right.col - self.top_left.col + 1

    @property
    def dims(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def cells(self) -> Iterator[CellAddress]:
        """Row-major enumeration: row ascending, then column ascending."""
        for row in range(self.top_left.row, self.bottom_right.row + 1):
            for col in range(self.top_left.col, self.bottom_right.col + 1):
                yield CellAddress(self.sheet, col, row)

    def contains(self, addr: CellAddress) -> bool:
        return (addr.sheet.casefold() == self.sheet.casefold()
                and self.top_left.col <= addr.col <= self.bottom_right.col
                and self.top_left.row <= addr.row <= self.bottom_right.row)

    def to_a1(self) -> str:
        return (f"{quote_sheet(self.sheet)}!"
                f"{self.top_left.to_a1(with_sheet=False)}:{self.bottom_right.to_a1(with_sheet=False)}")

    def __str__(self) -> str:
        return self.to_a1()


def parse_range(text: str, default_sheet: str | None = None) -> RangeRef:
    """Parse ``Sales!A2:D6``; a single address parses as a 1x1 range."""
    sheet, body, body_off = _split_sheet(text)
    if sheet is None:
        sheet = default_sheet
    if sheet is None:
        raise ParseError(f"range {text!r} needs a sheet name", 0, frozenset({"sheet name"}))
    if ":" in body:
        first, second = body.split(":", 1)
    else:
        first = second = body
    c1, r1 = _parse_ref_body(first, body_off)
    c2, r2 = _parse_ref_body(second, body_off + len(first) + 1)
    if c1 > c2 or r1 > r2:
        raise ParseError(f"inverted range: {text!r}", body_off)
    return RangeRef(sheet, CellAddress(sheet, c1, r1), CellAddress(sheet, c2, r2))


def range_cells(rng: RangeRef) -> list[CellAddress]:
    return list(rng.cells())
