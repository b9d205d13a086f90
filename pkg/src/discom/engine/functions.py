"""Built-in formula functions and operator semantics.

Coercions: Blank is 0 in numeric contexts and "" in text contexts;
booleans are 1/0 numerically; text never silently becomes a number.
Errors propagate — the first error encountered scanning arguments in
order (ranges expanded row-major) wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from discom.model.values import (CellValue, ErrorCode, ValueKind,
                                 format_number)

VALUE_ERROR = CellValue.error(ErrorCode.VALUE)
DIV0_ERROR = CellValue.error(ErrorCode.DIV0)
NAME_ERROR = CellValue.error(ErrorCode.NAME)


@dataclass(frozen=True)
class RangeArg:
    """A range handed to a function: its cell values, row-major."""
    values: tuple[CellValue, ...]


Arg = CellValue | RangeArg


class CellError(Exception):
    """Internal control flow: abort evaluation with an error value."""

    def __init__(self, value: CellValue):
        self.value = value


def as_number(v: CellValue) -> float:
    if v.is_error:
        raise CellError(v)
    if v.is_blank:
        return 0.0
    if v.is_number:
        return v.value  # type: ignore[return-value]
    if v.is_boolean:
        return 1.0 if v.value else 0.0
    raise CellError(VALUE_ERROR)


def as_text(v: CellValue) -> str:
    if v.is_error:
        raise CellError(v)
    if v.is_blank:
        return ""
    if v.is_number:
        return format_number(v.value)  # type: ignore[arg-type]
    if v.is_boolean:
        return "TRUE" if v.value else "FALSE"
    return str(v.value)


def as_condition(v: CellValue) -> bool:
    if v.is_error:
        raise CellError(v)
    if v.is_boolean:
        return bool(v.value)
    if v.is_number:
        return v.value != 0
    if v.is_blank:
        return False
    raise CellError(VALUE_ERROR)


def finite(x: float) -> CellValue:
    if not math.isfinite(x):
        raise CellError(VALUE_ERROR)
    return CellValue.number(x)


def scalar(arg: Arg) -> CellValue:
    if isinstance(arg, RangeArg):
        raise CellError(VALUE_ERROR)
    return arg


def _scan(args: tuple[Arg, ...]):
    """Yield (value, came_from_range) in argument order, ranges row-major,
    propagating the first error seen."""
    for arg in args:
        if isinstance(arg, RangeArg):
            for v in arg.values:
                if v.is_error:
                    raise CellError(v)
                yield v, True
        else:
            if arg.is_error:
                raise CellError(arg)
            yield arg, False


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def apply_binary(op: str, left: Arg, right: Arg) -> CellValue:
    try:
        l, r = scalar(left), scalar(right)
        if l.is_error:
            return l
        if r.is_error:
            return r
        if op in ("+", "-", "*", "/", "^"):
            return _arith(op, as_number(l), as_number(r))
        if op == "&":
            return CellValue.text(as_text(l) + as_text(r))
        return _compare(op, l, r)
    except CellError as err:
        return err.value


def apply_unary(op: str, operand: Arg) -> CellValue:
    try:
        v = scalar(operand)
        if v.is_error:
            return v
        x = as_number(v)
        return finite(-x if op == "-" else x)
    except CellError as err:
        return err.value


def _arith(op: str, x: float, y: float) -> CellValue:
    if op == "+":
        return finite(x + y)
    if op == "-":
        return finite(x - y)
    if op == "*":
        return finite(x * y)
    if op == "/":
        if y == 0:
            raise CellError(DIV0_ERROR)
        return finite(x / y)
    try:
        return finite(math.pow(x, y))
    except ZeroDivisionError:
        raise CellError(DIV0_ERROR) from None
    except (OverflowError, ValueError):
        raise CellError(VALUE_ERROR) from None


_TYPE_RANK = {ValueKind.NUMBER: 0, ValueKind.TEXT: 1, ValueKind.BOOLEAN: 2}


def _zero_like(other: CellValue) -> CellValue:
    if other.is_text:
        return CellValue.text("")
    if other.is_boolean:
        return CellValue.boolean(False)
    return CellValue.number(0.0)


def _compare(op: str, l: CellValue, r: CellValue) -> CellValue:
    if l.is_blank and r.is_blank:
        c = 0
    else:
        if l.is_blank:
            l = _zero_like(r)
        if r.is_blank:
            r = _zero_like(l)
        if l.kind is r.kind:
            if l.is_text:
                a, b = str(l.value).casefold(), str(r.value).casefold()
            else:
                a, b = l.value, r.value
            c = (a > b) - (a < b)
        else:
            # mixed types order by rank and never compare equal
            c = _TYPE_RANK[l.kind] - _TYPE_RANK[r.kind]
    result = {
        "=": c == 0,
        "<>": c != 0,
        "<": c < 0,
        "<=": c <= 0,
        ">": c > 0,
        ">=": c >= 0,
    }[op]
    return CellValue.boolean(result)


# ---------------------------------------------------------------------------
# Functions (IF is special-cased in the evaluator: lazy branches)
# ---------------------------------------------------------------------------


def fn_sum(args: tuple[Arg, ...]) -> CellValue:
    total = 0.0
    for v, from_range in _scan(args):
        if from_range:
            if v.is_number:
                total += v.value  # type: ignore[operator]
        else:
            total += as_number(v)
    return finite(total)


def fn_average(args: tuple[Arg, ...]) -> CellValue:
    nums = []
    for v, from_range in _scan(args):
        if v.is_blank:
            continue
        if from_range:
            if v.is_number:
                nums.append(v.value)
        else:
            nums.append(as_number(v))
    if not nums:
        raise CellError(DIV0_ERROR)
    return finite(math.fsum(nums) / len(nums))


def _extrema(args: tuple[Arg, ...], pick) -> CellValue:
    best: float | None = None
    for v, from_range in _scan(args):
        if v.is_blank:
            continue
        if from_range:
            if not v.is_number:
                continue
            x = v.value
        else:
            x = as_number(v)
        best = x if best is None else pick(best, x)
    return finite(best if best is not None else 0.0)


def fn_min(args: tuple[Arg, ...]) -> CellValue:
    return _extrema(args, min)


def fn_max(args: tuple[Arg, ...]) -> CellValue:
    return _extrema(args, max)


def fn_count(args: tuple[Arg, ...]) -> CellValue:
    n = sum(1 for v, _ in _scan(args) if v.is_number)
    return CellValue.number(float(n))


def fn_round(args: tuple[Arg, ...]) -> CellValue:
    if len(args) not in (1, 2):
        raise CellError(VALUE_ERROR)
    x = as_number(scalar(args[0]))
    digits = int(as_number(scalar(args[1]))) if len(args) == 2 else 0
    factor = 10.0 ** digits
    scaled = x * factor
    if not math.isfinite(scaled):
        raise CellError(VALUE_ERROR)
    rounded = math.floor(abs(scaled) + 0.5)
    return finite(math.copysign(rounded, x) / factor)


def fn_abs(args: tuple[Arg, ...]) -> CellValue:
    if len(args) != 1:
        raise CellError(VALUE_ERROR)
    return finite(abs(as_number(scalar(args[0]))))


def fn_concat(args: tuple[Arg, ...]) -> CellValue:
    parts = [as_text(v) for v, _ in _scan(args)]
    return CellValue.text("".join(parts))


FUNCTIONS = {
    "SUM": fn_sum,
    "AVERAGE": fn_average,
    "MIN": fn_min,
    "MAX": fn_max,
    "COUNT": fn_count,
    "ROUND": fn_round,
    "ABS": fn_abs,
    "CONCAT": fn_concat,
}
