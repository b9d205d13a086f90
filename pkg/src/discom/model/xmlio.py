"""Canonical XML interchange for range images and whole workbooks.

Encoding is hand-rolled so equal values always produce byte-identical
documents: fixed attribute order, no insignificant whitespace, no XML
declaration, UTF-8. Control characters in attribute values are written
as character references so they survive attribute-value normalization.

Range images:  ``<range-image export-id version rows cols>`` with ``<c>``
children in row-major order, ``t`` in {n,s,b,e,blank}, text content the
value (numbers in shortest round-trip form, booleans true/false, errors
by code name).

Workbooks: ``<workbook id>`` with sorted ``<property k v>`` children and
``<sheet name>`` children; each ``<cell addr>`` carries ``v``+``t``
(literal) or ``f`` (formula source, verbatim). Computed values are not
stored; re-evaluate after decoding.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Callable

from discom.errors import DocumentError
from discom.model.address import column_letters, parse_address
from discom.model.image import RangeImage
from discom.model.values import (BLANK, CellValue, ErrorCode, ValueKind,
                                 format_number, parse_number)
from discom.model.workbook import (Cell, CellContent, FormulaContent,
                                   LiteralContent, Sheet, Workbook)

_TEXT_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;"}
_ATTR_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;",
                 "\n": "&#10;", "\t": "&#9;", "\r": "&#13;"}


def _esc_text(s: str) -> str:
    return "".join(_TEXT_ESCAPES.get(ch, ch) for ch in s)


def _esc_attr(s: str) -> str:
    return "".join(_ATTR_ESCAPES.get(ch, ch) for ch in s)


def _value_body(value: CellValue) -> str:
    if value.kind is ValueKind.BLANK:
        return ""
    if value.kind is ValueKind.NUMBER:
        return format_number(value.value)  # type: ignore[arg-type]
    if value.kind is ValueKind.BOOLEAN:
        return "true" if value.value else "false"
    if value.kind is ValueKind.ERROR:
        return value.value.value  # type: ignore[union-attr]
    return str(value.value)


def _value_from_body(t: str, body: str, where: str) -> CellValue:
    if t == "blank":
        if body:
            raise DocumentError("blank cell carries a value", where)
        return BLANK
    if t == "n":
        try:
            return CellValue.number(parse_number(body))
        except ValueError as exc:
            raise DocumentError(str(exc), where) from None
    if t == "s":
        return CellValue.text(body)
    if t == "b":
        if body not in ("true", "false"):
            raise DocumentError(f"bad boolean {body!r}", where)
        return CellValue.boolean(body == "true")
    if t == "e":
        try:
            return CellValue.error(ErrorCode(body))
        except ValueError:
            raise DocumentError(f"unknown error code {body!r}", where) from None
    raise DocumentError(f"unknown value type {t!r}", where)


# ---------------------------------------------------------------------------
# Range images
# ---------------------------------------------------------------------------


def encode_range_image(image: RangeImage) -> str:
    parts = [
        f'<range-image export-id="{_esc_attr(image.export_id)}"'
        f' version="{image.version}" rows="{image.rows}" cols="{image.cols}">'
    ]
    for value in image.cells:
        body = _value_body(value)
        t = value.kind.value
        if body:
            parts.append(f'<c t="{t}">{_esc_text(body)}</c>')
        else:
            parts.append(f'<c t="{t}"/>')
    parts.append("</range-image>")
    return "".join(parts)


def _parse_root(document: str, expect_tag: str) -> ET.Element:
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line, col = exc.position
        raise DocumentError(f"malformed XML: {exc.msg}", f"line {line}, column {col}") from None
    if root.tag != expect_tag:
        raise DocumentError(f"expected <{expect_tag}> root, found <{root.tag}>", root.tag)
    return root


def _int_attr(elem: ET.Element, name: str, where: str) -> int:
    raw = elem.get(name)
    if raw is None:
        raise DocumentError(f"missing attribute {name!r}", where)
    try:
        return int(raw)
    except ValueError:
        raise DocumentError(f"attribute {name!r} is not an integer: {raw!r}", where) from None


def decode_range_image(document: str) -> RangeImage:
    root = _parse_root(document, "range-image")
    export_id = root.get("export-id")
    if export_id is None:
        raise DocumentError("missing attribute 'export-id'", "range-image")
    version = _int_attr(root, "version", "range-image")
    rows = _int_attr(root, "rows", "range-image")
    cols = _int_attr(root, "cols", "range-image")
    cells = []
    for idx, child in enumerate(root):
        where = f"cell {idx + 1} of range-image"
        if child.tag != "c":
            raise DocumentError(f"unexpected element <{child.tag}>", where)
        t = child.get("t")
        if t is None:
            raise DocumentError("missing attribute 't'", where)
        cells.append(_value_from_body(t, child.text or "", where))
    try:
        return RangeImage(export_id, version, rows, cols, tuple(cells))
    except ValueError as exc:
        raise DocumentError(str(exc), "range-image") from None


# ---------------------------------------------------------------------------
# Workbooks
# ---------------------------------------------------------------------------


def encode_workbook(wb: Workbook) -> str:
    parts = [f'<workbook id="{_esc_attr(wb.id)}">']
    for key in sorted(wb.properties):
        parts.append(f'<property k="{_esc_attr(key)}" v="{_esc_attr(wb.properties[key])}"/>')
    for sheet in wb.sheets:
        parts.append(f'<sheet name="{_esc_attr(sheet.name)}">')
        for (row, col) in sorted(sheet.cells):
            cell = sheet.cells[(row, col)]
            addr = f"{column_letters(col)}{row}"
            content = cell.content
            if isinstance(content, FormulaContent):
                parts.append(f'<cell addr="{addr}" f="{_esc_attr(content.source)}"/>')
            else:
                value = content.value
                t = value.kind.value
                if value.kind is ValueKind.BLANK:
                    parts.append(f'<cell addr="{addr}" t="blank"/>')
                else:
                    parts.append(
                        f'<cell addr="{addr}" t="{t}" v="{_esc_attr(_value_body(value))}"/>')
        parts.append("</sheet>")
    parts.append("</workbook>")
    return "".join(parts)


def decode_workbook(document: str,
                    formula_parser: Callable[[str, str], object] | None = None) -> Workbook:
    """Decode a workbook document. Formulas are re-parsed; computed values
    start Blank (run the engine to fill them)."""
    if formula_parser is None:
        from discom.engine.parser import parse_formula
        formula_parser = parse_formula
    root = _parse_root(document, "workbook")
    wb_id = root.get("id")
    if wb_id is None:
        raise DocumentError("missing attribute 'id'", "workbook")
    properties: dict[str, str] = {}
    sheets: list[Sheet] = []
    seen: set[str] = set()
    for child in root:
        if child.tag == "property":
            key = child.get("k")
            if key is None or child.get("v") is None:
                raise DocumentError("property needs 'k' and 'v'", "workbook properties")
            properties[key] = child.get("v", "")
        elif child.tag == "sheet":
            name = child.get("name")
            if not name:
                raise DocumentError("sheet needs a non-empty 'name'", "workbook")
            if name.casefold() in seen:
                raise DocumentError(f"duplicate sheet name {name!r}", f"sheet {name!r}")
            seen.add(name.casefold())
            sheets.append(_decode_sheet(child, name, formula_parser))
        else:
            raise DocumentError(f"unexpected element <{child.tag}>", "workbook")
    return Workbook(wb_id, tuple(sheets), properties)


def _decode_sheet(elem: ET.Element, name: str,
                  formula_parser: Callable[[str, str], object]) -> Sheet:
    cells: dict[tuple[int, int], Cell] = {}
    for child in elem:
        if child.tag != "cell":
            raise DocumentError(f"unexpected element <{child.tag}>", f"sheet {name!r}")
        raw_addr = child.get("addr")
        if not raw_addr:
            raise DocumentError("cell needs an 'addr'", f"sheet {name!r}")
        where = f"cell {raw_addr!r} of sheet {name!r}"
        try:
            addr = parse_address(raw_addr, default_sheet=name)
        except Exception as exc:
            raise DocumentError(f"bad address: {exc}", where) from None
        if addr.sheet.casefold() != name.casefold():
            raise DocumentError("cell addr names a different sheet", where)
        formula = child.get("f")
        content: CellContent
        if formula is not None:
            try:
                ast = formula_parser(formula, name)
            except Exception as exc:
                raise DocumentError(f"bad formula: {exc}", where) from None
            content = FormulaContent(formula, ast)
        else:
            t = child.get("t")
            if t is None:
                raise DocumentError("cell needs 'f' or 't'", where)
            content = LiteralContent(_value_from_body(t, child.get("v", ""), where))
        key = (addr.row, addr.col)
        if key in cells:
            raise DocumentError("duplicate cell address", where)
        cells[key] = Cell(content)
    return Sheet(name, cells)
