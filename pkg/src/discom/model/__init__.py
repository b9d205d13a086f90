"""Core spreadsheet document types, addressing, and canonical serialization."""

from discom.model.address import (CellAddress, RangeRef, column_index,
                                  column_letters, parse_address, parse_range,
                                  range_cells)
from discom.model.image import RangeImage
from discom.model.values import (BLANK, CellValue, ErrorCode, ValueKind,
                                 format_number, parse_number)
from discom.model.workbook import (Cell, CellContent, FormulaContent,
                                   LiteralContent, Sheet, Workbook)
from discom.model.xmlio import (decode_range_image, decode_workbook,
                                encode_range_image, encode_workbook)

__all__ = [
    "BLANK", "Cell", "CellAddress", "CellContent", "CellValue", "ErrorCode",
    "FormulaContent", "LiteralContent", "RangeImage", "RangeRef", "Sheet",
    "ValueKind", "Workbook", "column_index", "column_letters",
    "decode_range_image", "decode_workbook", "encode_range_image",
    "encode_workbook", "format_number", "parse_address", "parse_number",
    "parse_range", "range_cells",
]
