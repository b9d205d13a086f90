import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from discom.errors import DocumentError, ParseError
from discom.model import (BLANK, CellAddress, CellValue, RangeImage,
                          Workbook, column_index, column_letters,
                          decode_range_image, decode_workbook,
                          encode_range_image, encode_workbook, format_number,
                          parse_address, parse_range, range_cells)
from discom.engine.evaluator import evaluate_all
from discom.engine.parser import parse_cell_input

from wbgen import random_image, random_workbook


# ---------------------------------------------------------------------------
# addresses
# ---------------------------------------------------------------------------


def bijective_col(letters: str) -> int:
    # independent oracle: positional bijective base-26
    total = 0
    for i, ch in enumerate(reversed(letters)):
        total += (ord(ch) - ord("A") + 1) * 26 ** i
    return total


def test_parse_simple_address():
    addr = parse_address("Sheet1!B2")
    assert (addr.sheet, addr.col, addr.row) == ("Sheet1", 2, 2)


def test_parse_double_letter_column():
    assert bijective_col("AA") == 27
    addr = parse_address("Sheet1!AA10")
    assert (addr.col, addr.row) == (27, 10)


@pytest.mark.parametrize("letters", ["A", "Z", "AA", "AZ", "BA", "ZZ", "AAA", "XFD"])
def test_column_codec_matches_oracle(letters):
    assert column_index(letters) == bijective_col(letters)
    assert column_letters(bijective_col(letters)) == letters


def test_row_zero_rejected():
    with pytest.raises(ParseError):
        parse_address("Sheet1!B0")


@pytest.mark.parametrize("bad", ["", "Sheet1!", "Sheet1!2B", "Sheet1!B", "!B2"])
def test_malformed_addresses_rejected(bad):
    with pytest.raises(ParseError):
        parse_address(bad)


def test_address_needs_sheet_without_default():
    with pytest.raises(ParseError):
        parse_address("B2")
    assert parse_address("B2", default_sheet="S").sheet == "S"


def test_quoted_sheet_roundtrip():
    addr = parse_address("'Area North'!C3")
    assert addr.sheet == "Area North"
    assert addr.to_a1() == "'Area North'!C3"
    assert parse_address(addr.to_a1()) == addr


@given(st.integers(min_value=1, max_value=16384),
       st.integers(min_value=1, max_value=1048576),
       st.sampled_from(["S", "Sheet1", "Area North 2010", "it's"]))
def test_address_roundtrip_property(col, row, sheet):
    addr = CellAddress(sheet, col, row)
    assert parse_address(addr.to_a1()) == addr


def test_address_bounds():
    with pytest.raises(ValueError):
        CellAddress("S", 16385, 1)
    with pytest.raises(ValueError):
        CellAddress("S", 1, 1048577)


# ---------------------------------------------------------------------------
# ranges
# ---------------------------------------------------------------------------


def test_range_cells_row_major():
    cells = range_cells(parse_range("S!B2:C3"))
    assert [c.to_a1(with_sheet=False) for c in cells] == ["B2", "C2", "B3", "C3"]


def test_range_singleton():
    assert [c.to_a1(with_sheet=False)
            for c in range_cells(parse_range("S!B2:B2"))] == ["B2"]


def test_range_single_row():
    assert [c.to_a1(with_sheet=False)
            for c in range_cells(parse_range("S!A1:D1"))] == ["A1", "B1", "C1", "D1"]


@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 5), st.integers(0, 5))
def test_range_length_formula(col, row, dcol, drow):
    rng_ref = parse_range(
        f"S!{column_letters(col)}{row}:{column_letters(col + dcol)}{row + drow}")
    assert len(range_cells(rng_ref)) == (drow + 1) * (dcol + 1)


def test_inverted_range_rejected():
    with pytest.raises(ParseError):
        parse_range("S!C3:B2")


# ---------------------------------------------------------------------------
# values
# ---------------------------------------------------------------------------


def test_number_formatting():
    assert format_number(5.0) == "5"
    assert format_number(-2.0) == "-2"
    assert format_number(2.5) == "2.5"
    assert format_number(0.1) == "0.1"
    assert float(format_number(1e300)) == 1e300


def test_non_finite_numbers_unrepresentable():
    with pytest.raises(ValueError):
        CellValue.number(float("nan"))
    with pytest.raises(ValueError):
        CellValue.number(float("inf"))


# ---------------------------------------------------------------------------
# range-image XML
# ---------------------------------------------------------------------------


def test_minimal_image_document():
    image = RangeImage("exp-1", 1, 1, 1, (CellValue.number(5.0),))
    assert encode_range_image(image) == (
        '<range-image export-id="exp-1" version="1" rows="1" cols="1">'
        '<c t="n">5</c></range-image>')


def test_blank_encoded_explicitly_in_position():
    image = RangeImage("e", 1, 2, 2, (
        CellValue.number(1), BLANK, CellValue.text("x"), CellValue.boolean(True)))
    doc = encode_range_image(image)
    assert '<c t="n">1</c><c t="blank"/><c t="s">x</c><c t="b">true</c>' in doc
    assert decode_range_image(doc) == image


def test_image_roundtrip_1000_random():
    rng = random.Random(7)
    for _ in range(1000):
        image = random_image(rng)
        assert decode_range_image(encode_range_image(image)) == image


def test_image_encoding_injective_on_samples():
    rng = random.Random(11)
    seen = {}
    for _ in range(500):
        image = random_image(rng, dims=(2, 2))
        doc = encode_range_image(image)
        if doc in seen:
            assert seen[doc] == image
        seen[doc] = image
    # equal images produce byte-identical documents
    a = random_image(random.Random(3))
    b = random_image(random.Random(3))
    assert encode_range_image(a) == encode_range_image(b)


def test_image_dims_validated():
    with pytest.raises(ValueError):
        RangeImage("e", 1, 2, 2, (BLANK,))
    with pytest.raises(ValueError):
        RangeImage("e", 0, 1, 1, (BLANK,))


def test_image_decode_errors_are_structured():
    with pytest.raises(DocumentError):
        decode_range_image("<range-image/>")
    with pytest.raises(DocumentError) as err:
        decode_range_image("not xml at all")
    assert "line" in str(err.value)


# ---------------------------------------------------------------------------
# workbook XML
# ---------------------------------------------------------------------------


def test_empty_workbook_roundtrip():
    wb = Workbook("w-1")
    decoded = decode_workbook(encode_workbook(wb))
    assert decoded.id == "w-1"
    assert decoded.sheets == ()


def test_formula_source_preserved_verbatim():
    wb = Workbook("w")
    addr = parse_address("S!A3")
    wb = wb.with_content(addr, parse_cell_input("=A1+A2", "S"))
    doc = encode_workbook(wb)
    assert 'f="=A1+A2"' in doc
    decoded = decode_workbook(doc)
    assert decoded.cell(addr).content.source == "=A1+A2"


def test_properties_roundtrip_with_awkward_text():
    wb = Workbook("w").with_property("k<&>", 'line1\nline2\t"quoted"')
    decoded = decode_workbook(encode_workbook(wb))
    assert decoded.properties == {"k<&>": 'line1\nline2\t"quoted"'}


def test_random_workbooks_evaluate_identically_after_roundtrip():
    rng = random.Random(23)
    for _ in range(25):
        wb = evaluate_all(random_workbook(rng, n_cells=50))
        decoded = evaluate_all(decode_workbook(encode_workbook(wb)))
        for addr, cell in wb.iter_cells():
            assert decoded.computed(addr) == cell.computed, addr


def test_workbook_decode_rejects_duplicate_sheets():
    doc = '<workbook id="w"><sheet name="S"></sheet><sheet name="s"></sheet></workbook>'
    with pytest.raises(DocumentError):
        decode_workbook(doc)


def test_workbook_decode_names_bad_cell():
    doc = '<workbook id="w"><sheet name="S"><cell addr="B2" t="n" v="zz"/></sheet></workbook>'
    with pytest.raises(DocumentError) as err:
        decode_workbook(doc)
    assert "B2" in str(err.value)
