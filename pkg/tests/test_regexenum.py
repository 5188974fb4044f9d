from __future__ import annotations

import os
import re

import pytest

from configfuzz.regexenum import UnsupportedPatternError, enumerate_pattern

from conftest import FIXTURES
from oracle_regex import OracleUnsupported, enumerate_oracle


def lang(pattern: str, **kw) -> list[str]:
    return list(enumerate_pattern(pattern, **kw))


def test_pinned_examples():
    assert lang("[ab]{2}") == ["aa", "ab", "ba", "bb"]
    assert lang("a|b{1,2}") == ["a", "b", "bb"]
    assert lang("x") == ["x"]
    assert lang("") == [""]
    assert lang("colou?r") == ["color", "colour"]
    assert lang("(a|b)c") == ["ac", "bc"]


def test_unbounded_quantifiers_use_max_repeat():
    assert lang("a*") == ["", "a", "aa", "aaa"]
    assert lang("a+") == ["a", "aa", "aaa"]
    assert lang("a{2,}") == ["aa", "aaa"]
    assert lang("a*", max_repeat=1) == ["", "a"]
    # an explicit upper bound beyond max_repeat is honoured as written
    assert lang("a{1,5}", max_repeat=2) == ["a", "aa", "aaa", "aaaa", "aaaaa"]


def test_enumeration_order_is_leftmost_slowest():
    assert lang("(a|b)(c|d)") == ["ac", "ad", "bc", "bd"]
    assert lang("[01][01]") == ["00", "01", "10", "11"]


def test_class_members_keep_written_order():
    assert lang("[ba]") == ["b", "a"]
    assert lang("[c-e1]") == ["c", "d", "e", "1"]
    assert lang("[aab]") == ["a", "b"]


def test_duplicates_keep_first_occurrence():
    assert lang("(aa|a){2}") == ["aaaa", "aaa", "aa"]
    assert lang("a|a") == ["a"]


def test_escapes_produce_literals():
    assert lang(r"\.") == ["."]
    assert lang(r"\\") == ["\\"]
    assert lang(r"\(x\)") == ["(x)"]
    assert lang(r"\*\+") == ["*+"]


def test_max_values_truncates_a_prefix():
    full = lang("[0-9]{2}")
    assert len(full) == 100
    assert lang("[0-9]{2}", max_values=7) == full[:7]


@pytest.mark.parametrize(
    "pattern",
    [
        "^a", "a$", "a.", "[^ab]", "(?:a)", "(?=a)", r"\d", r"\w", r"\s",
        "(a", "a)", "[ab", "a{2", "a{3,1}", "[z-a]", r"\1", "*a", "a**",
    ],
)
def test_unsupported_patterns_raise(pattern):
    with pytest.raises(UnsupportedPatternError):
        lang(pattern)


def test_error_messages_carry_position():
    with pytest.raises(UnsupportedPatternError, match="position"):
        lang("ab^cd")


def test_literal_close_bracket_inside_class():
    # a ] first in a class is a member, per the usual convention
    assert lang("[]a]") == ["]", "a"]


def _fixture_patterns() -> list[str]:
    path = os.path.join(FIXTURES, "regex_patterns.txt")
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip() and not line.startswith("#")]


@pytest.mark.parametrize("pattern", _fixture_patterns())
def test_against_independent_oracle(pattern):
    try:
        expected = enumerate_oracle(pattern, max_repeat=3)
    except OracleUnsupported:
        pytest.skip(f"oracle cannot handle {pattern!r}")
    assert lang(pattern, max_repeat=3) == expected


@pytest.mark.parametrize("pattern", _fixture_patterns())
def test_every_output_matches_the_pattern(pattern):
    for value in lang(pattern, max_repeat=3):
        assert re.fullmatch(pattern, value), (pattern, value)
