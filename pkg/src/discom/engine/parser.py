"""Formula tokenizer and recursive-descent parser.

Precedence, tightest first: ^ (right-assoc), unary -, * /, + -, &,
comparisons. All other binary levels are left-associative. A range
literal is only legal as a function-call argument; anywhere else it is
a parse-time error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from discom.engine.ast import (AstNode, Binary, BoolLit, Call, CellRef,
                               NumberLit, RangeLit, TextLit, Unary)
from discom.errors import ParseError
from discom.model.address import (MAX_COL, MAX_ROW, CellAddress, RangeRef,
                                  column_index)
from discom.model.values import BLANK, CellValue, parse_number
from discom.model.workbook import CellContent, FormulaContent, LiteralContent

NUMBER_RE = re.compile(r"(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
REF_RE = re.compile(r"([A-Za-z]+)([0-9]+)\Z")

TWO_CHAR_OPS = ("<=", ">=", "<>")
ONE_CHAR = "+-*/^&=<>(),:!"


@dataclass(frozen=True)
class Token:
    kind: str  # number | string | ident | sheetname | op | eof
    text: str
    offset: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            i += 1
            continue
        m = NUMBER_RE.match(source, i)
        if m and (ch.isdigit() or ch == "."):
            tokens.append(Token("number", m.group(0), i))
            i = m.end()
            continue
        if ch == '"':
            j = i + 1
            buf = []
            while j < n:
                if source[j] == '"':
                    if j + 1 < n and source[j + 1] == '"':
                        buf.append('"')
                        j += 2
                        continue
                    break
                buf.append(source[j])
                j += 1
            else:
                raise ParseError("unterminated string literal", i, frozenset({'"'}))
            tokens.append(Token("string", "".join(buf), i))
            i = j + 1
            continue
        if ch == "'":
            j = i + 1
            buf = []
            while j < n:
                if source[j] == "'":
                    if j + 1 < n and source[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(source[j])
                j += 1
            else:
                raise ParseError("unterminated sheet name", i, frozenset({"'"}))
            tokens.append(Token("sheetname", "".join(buf), i))
            i = j + 1
            continue
        m = IDENT_RE.match(source, i)
        if m:
            tokens.append(Token("ident", m.group(0), i))
            i = m.end()
            continue
        two = source[i:i + 2]
        if two in TWO_CHAR_OPS:
            tokens.append(Token("op", two, i))
            i += 2
            continue
        if ch in ONE_CHAR:
            tokens.append(Token("op", ch, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(Token("eof", "", n))
    return tokens


_ATOM_EXPECTED = frozenset(
    {"number", "string", "TRUE/FALSE", "cell reference", "function name", "'('"})


class _Parser:
    def __init__(self, source: str, default_sheet: str | None):
        self.source = source
        self.default_sheet = default_sheet
        self.tokens = tokenize(source)
        # skip the leading '='
        self.pos = 1 if self.tokens and self.tokens[0].text == "=" else 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect_op(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ParseError(f"expected {text!r}", tok.offset, frozenset({repr(text)}))
        return self.advance()

    # -- precedence levels -------------------------------------------------

    def parse_expression(self) -> tuple[AstNode, int]:
        return self._binary_level(("=", "<>", "<", "<=", ">", ">="), self.parse_concat)

    def parse_concat(self) -> tuple[AstNode, int]:
        return self._binary_level(("&",), self.parse_additive)

    def parse_additive(self) -> tuple[AstNode, int]:
        return self._binary_level(("+", "-"), self.parse_multiplicative)

    def parse_multiplicative(self) -> tuple[AstNode, int]:
        return self._binary_level(("*", "/"), self.parse_unary)

    def _binary_level(self, ops, next_level) -> tuple[AstNode, int]:
        left, off = next_level()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in ops:
                return left, off
            self.advance()
            right, roff = next_level()
            self._no_range(left, off)
            self._no_range(right, roff)
            left = Binary(tok.text, left, right)

    def parse_unary(self) -> tuple[AstNode, int]:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("-", "+"):
            self.advance()
            operand, ooff = self.parse_unary()
            self._no_range(operand, ooff)
            return Unary(tok.text, operand), tok.offset
        return self.parse_power()

    def parse_power(self) -> tuple[AstNode, int]:
        left, off = self.parse_atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            right, roff = self._parse_power_rhs()
            self._no_range(left, off)
            self._no_range(right, roff)
            return Binary("^", left, right), off
        return left, off

    def _parse_power_rhs(self) -> tuple[AstNode, int]:
        # exponent may carry its own sign: 2^-3
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("-", "+"):
            self.advance()
            operand, ooff = self._parse_power_rhs()
            self._no_range(operand, ooff)
            return Unary(tok.text, operand), tok.offset
        return self.parse_power()

    # -- atoms ---------------------------------------------------------------

    def parse_atom(self) -> tuple[AstNode, int]:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return NumberLit(float(tok.text)), tok.offset
        if tok.kind == "string":
            self.advance()
            return TextLit(tok.text), tok.offset
        if tok.kind == "sheetname":
            self.advance()
            self.expect_op("!")
            return self._parse_ref_tail(tok.text, tok.offset)
        if tok.kind == "ident":
            nxt = self.tokens[self.pos + 1]
            if nxt.kind == "op" and nxt.text == "(":
                return self._parse_call(tok)
            if nxt.kind == "op" and nxt.text == "!":
                self.advance()
                self.advance()
                return self._parse_ref_tail(tok.text, tok.offset)
            if tok.text.upper() in ("TRUE", "FALSE"):
                self.advance()
                return BoolLit(tok.text.upper() == "TRUE"), tok.offset
            self.advance()
            return self._parse_ref_tail(None, tok.offset, first_body=tok)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            inner, _ = self.parse_expression()
            self.expect_op(")")
            return inner, tok.offset
        raise ParseError("expected a value", tok.offset, _ATOM_EXPECTED)

    def _parse_call(self, name_tok: Token) -> tuple[AstNode, int]:
        self.advance()  # name
        self.advance()  # '('
        args: list[AstNode] = []
        if self.peek().kind == "op" and self.peek().text == ")":
            self.advance()
            return Call(name_tok.text, ()), name_tok.offset
        while True:
            arg, _ = self.parse_expression()
            args.append(arg)
            tok = self.peek()
            if tok.kind == "op" and tok.text == ",":
                self.advance()
                continue
            if tok.kind == "op" and tok.text == ")":
                self.advance()
                return Call(name_tok.text, tuple(args)), name_tok.offset
            raise ParseError("expected ',' or ')' in argument list", tok.offset,
                             frozenset({"','", "')'"}))

    def _ref_parts(self, tok: Token) -> tuple[int, int]:
        m = REF_RE.match(tok.text)
        if not m:
            raise ParseError(f"malformed cell reference {tok.text!r}", tok.offset,
                             frozenset({"cell reference"}))
        col = column_index(m.group(1))
        row = int(m.group(2))
        if row < 1:
            raise ParseError(f"rows are 1-based: {tok.text!r}", tok.offset)
        if col > MAX_COL or row > MAX_ROW:
            raise ParseError(f"address out of range: {tok.text!r}", tok.offset)
        return col, row

    def _parse_ref_tail(self, sheet: str | None, start: int,
                        first_body: Token | None = None) -> tuple[AstNode, int]:
        if first_body is None:
            body = self.peek()
            if body.kind != "ident":
                raise ParseError("expected a cell reference after '!'", body.offset,
                                 frozenset({"cell reference"}))
            self.advance()
        else:
            body = first_body
        col1, row1 = self._ref_parts(body)
        resolved = sheet if sheet is not None else self.default_sheet
        if resolved is None:
            raise ParseError(f"reference {body.text!r} needs a sheet name", start,
                             frozenset({"sheet name"}))
        tok = self.peek()
        if tok.kind == "op" and tok.text == ":":
            self.advance()
            second = self.peek()
            second_sheet = None
            if second.kind == "sheetname" or (
                    second.kind == "ident"
                    and self.tokens[self.pos + 1].kind == "op"
                    and self.tokens[self.pos + 1].text == "!"):
                second_sheet = second.text
                self.advance()
                self.expect_op("!")
                second = self.peek()
            if second.kind != "ident":
                raise ParseError("expected a cell reference after ':'", second.offset,
                                 frozenset({"cell reference"}))
            if second_sheet is not None and second_sheet.casefold() != resolved.casefold():
                raise ParseError("range corners must be on one sheet", second.offset)
            self.advance()
            col2, row2 = self._ref_parts(second)
            if col1 > col2 or row1 > row2:
                raise ParseError("inverted range", start)
            rng = RangeRef(resolved, CellAddress(resolved, col1, row1),
                           CellAddress(resolved, col2, row2))
            return RangeLit(rng), start
        return CellRef(CellAddress(resolved, col1, row1)), start

    def _no_range(self, node: AstNode, offset: int) -> None:
        if isinstance(node, RangeLit):
            raise ParseError("range reference not valid here", offset)


def parse_formula(source: str, default_sheet: str | None = None) -> AstNode:
    """Parse a formula (must begin with '='). References without a sheet
    prefix resolve against default_sheet."""
    if not source.startswith("="):
        raise ParseError("formula must start with '='", 0, frozenset({"'='"}))
    parser = _Parser(source, default_sheet)
    node, off = parser.parse_expression()
    tok = parser.peek()
    if tok.kind != "eof":
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.offset,
                         frozenset({"end of formula"}))
    if isinstance(node, RangeLit):
        raise ParseError("a bare range is not a formula", off)
    return node


def parse_cell_input(text: str, default_sheet: str | None = None) -> CellContent:
    """Turn user-typed text into cell content.

    ``=...`` parses as a formula; a leading apostrophe forces text;
    numbers and TRUE/FALSE become typed literals; anything else is text.
    An empty string is a blank literal.
    """
    if text.startswith("="):
        return FormulaContent(text, parse_formula(text, default_sheet))
    if text.startswith("'"):
        return LiteralContent(CellValue.text(text[1:]))
    if text == "":
        return LiteralContent(BLANK)
    if text.upper() in ("TRUE", "FALSE"):
        return LiteralContent(CellValue.boolean(text.upper() == "TRUE"))
    try:
        return LiteralContent(CellValue.number(parse_number(text)))
    except ValueError:
        return LiteralContent(CellValue.text(text))
