import itertools

import pytest

from mbtikit.types import (
    AXES,
    InvalidTypeError,
    all_types,
    axis_letter,
    format_type,
    match_count,
    parse_type,
    type_index,
)


def test_parse_known_type():
    t = parse_type("INTJ")
    assert t.letters == "INTJ"


def test_parse_is_case_insensitive():
    assert parse_type("intj") == parse_type("INTJ")
    assert parse_type("EnFp") == parse_type("ENFP")


@pytest.mark.parametrize("bad", ["INTX", "TNIJ", "INT", "INTJJ", "", "ABCD"])
def test_parse_rejects_invalid(bad):
    with pytest.raises(InvalidTypeError):
        parse_type(bad)


def test_parse_format_roundtrip():
    for t in all_types():
        assert parse_type(format_type(t)) == t


def test_match_count_examples():
    intj = parse_type("INTJ")
    assert match_count(intj, parse_type("INTP")) == 3
    assert match_count(intj, parse_type("ESTP")) == 1
    assert match_count(intj, intj) == 4


def test_match_count_symmetric_and_bounded():
    for a, b in itertools.product(all_types(), repeat=2):
        m = match_count(a, b)
        assert 0 <= m <= 4
        assert m == match_count(b, a)


def test_match_count_binomial_structure():
    # for any type: 1 at distance 0, 4 at 1, 6 at 2, 4 at 3, 1 at 4
    for a in all_types():
        counts = [0] * 5
        for b in all_types():
            counts[match_count(a, b)] += 1
        assert counts == [1, 4, 6, 4, 1]


def test_match_count_decomposes_over_axes():
    for a, b in itertools.product(all_types(), repeat=2):
        per_axis = sum(
            axis_letter(a, ax) == axis_letter(b, ax) for ax in AXES
        )
        assert match_count(a, b) == per_axis


def test_axis_letter_examples():
    assert axis_letter(parse_type("INTJ"), AXES[0]) == "I"
    assert axis_letter(parse_type("ENFJ"), AXES[2]) == "F"
    assert axis_letter(parse_type("ESTP"), AXES[3]) == "P"


def test_axes_are_disjoint():
    seen = set()
    for ax in AXES:
        assert len(ax.letters) == 2
        for ch in ax.letters:
            assert ch not in seen
            seen.add(ch)
    assert len(AXES) == 4


def test_all_types_enumeration():
    types = all_types()
    assert len(types) == 16
    assert len(set(types)) == 16
    assert types[0].letters == "ENFJ"
    assert sum(t.letters == "ISTP" for t in types) == 1
    # independent oracle: enumerate and sort every axis combination
    expected = sorted(
        "".join(c) for c in itertools.product(*(ax.letters for ax in AXES))
    )
    assert [t.letters for t in types] == expected


def test_type_index_is_dense():
    assert [type_index(t) for t in all_types()] == list(range(16))
