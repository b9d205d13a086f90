"""Cell value domain: blank, number, text, boolean, and in-grid errors.

Numbers are finite 64-bit floats; anything that would produce NaN or an
infinity surfaces as an error value instead. ``format_number`` is the one
canonical decimal rendering used everywhere (XML, text coercion, CLI).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class ErrorCode(Enum):
    DIV0 = "DIV0"
    CYCLE = "CYCLE"
    REF = "REF"
    VALUE = "VALUE"
    NAME = "NAME"


class ValueKind(Enum):
    # enum values double as the XML `t` attribute codes
    BLANK = "blank"
    NUMBER = "n"
    TEXT = "s"
    BOOLEAN = "b"
    ERROR = "e"


@dataclass(frozen=True)
class CellValue:
    kind: ValueKind
    value: float | str | bool | ErrorCode | None = None

    @staticmethod
    def number(x: float) -> "CellValue":
        x = float(x)
        if not math.isfinite(x):
            raise ValueError("cell numbers must be finite")
        return CellValue(ValueKind.NUMBER, x)

    @staticmethod
    def text(s: str) -> "CellValue":
        return CellValue(ValueKind.TEXT, str(s))

    @staticmethod
    def boolean(b: bool) -> "CellValue":
        return CellValue(ValueKind.BOOLEAN, bool(b))

    @staticmethod
    def error(code: ErrorCode) -> "CellValue":
        return CellValue(ValueKind.ERROR, code)

    @property
    def is_blank(self) -> bool:
        return self.kind is ValueKind.BLANK

    @property
    def is_number(self) -> bool:
        return self.kind is ValueKind.NUMBER

    @property
    def is_text(self) -> bool:
        return self.kind is ValueKind.TEXT

    @property
    def is_boolean(self) -> bool:
        return self.kind is ValueKind.BOOLEAN

    @property
    def is_error(self) -> bool:
        return self.kind is ValueKind.ERROR

    def display(self) -> str:
        """Human-facing rendering (grid cells, CLI output)."""
        if self.kind is ValueKind.BLANK:
            return ""
        if self.kind is ValueKind.NUMBER:
            return format_number(self.value)  # type: ignore[arg-type]
        if self.kind is ValueKind.BOOLEAN:
            return "TRUE" if self.value else "FALSE"
        if self.kind is ValueKind.ERROR:
            return f"#{self.value.value}"  # type: ignore[union-attr]
        return str(self.value)


BLANK = CellValue(ValueKind.BLANK)


def format_number(x: float) -> str:
    """Canonical decimal form: integral values without a fraction part,
    everything else in shortest round-trip form."""
    if x.is_integer() and abs(x) <= 1e15:
        return str(int(x))
    return repr(x)


def parse_number(text: str) -> float:
    """Inverse of format_number; rejects non-finite and non-numeric text."""
    try:
        x = float(text)
    except ValueError:
        raise ValueError(f"not a number: {text!r}") from None
    if not math.isfinite(x):
        raise ValueError(f"not a finite number: {text!r}")
    return x
