from __future__ import annotations

import os

import pytest

from configfuzz.definition import (
    ConfigDefinition,
    DefinitionError,
    DiscreteValues,
    Meta,
    ParameterDefinition,
    RangeValues,
    RegexValues,
    TargetLocation,
    TestSpec,
    coerce_scalar,
    load_definition,
    parse_definition,
    render_scalar,
    serialize_definition,
    strip_json_comments,
    validate_definition,
)

from conftest import FIXTURES


MINIMAL = '{"meta": {}, "parameters": []}'


def test_empty_definition_defaults():
    d = parse_definition(MINIMAL)
    assert d.parameters == ()
    assert d.meta.timeout_wait_ms == 500
    assert d.meta.regex_max_repeat == 3
    assert d.meta.max_values_per_parameter == 1000
    assert d.meta.port_parameter == "port"
    assert d.meta.target == TargetLocation("127.0.0.1", 80)
    assert validate_definition(d) == []


def test_comments_are_stripped_outside_strings():
    text = '{"meta": {"note": "http://x//y"}, // trailing\n"parameters": []}'
    d = parse_definition(text)
    assert d.meta.extra["note"] == "http://x//y"


def test_strip_comments_handles_escaped_quote():
    assert strip_json_comments('{"a": "\\"//x"} // gone') == '{"a": "\\"//x"} '


def test_string_defaults_coerce_to_declared_type():
    text = """{
      "parameters": [
        {"pname": "port", "ptype": "number", "pdefault": "4999"},
        {"pname": "flag", "ptype": "bool", "pdefault": "true"},
        {"pname": "label", "ptype": "string", "pdefault": 7}
      ]
    }"""
    d = parse_definition(text)
    assert d.parameters[0].pdefault == 4999
    assert d.parameters[1].pdefault is True
    assert d.parameters[2].pdefault == "7"
    assert validate_definition(d) == []


def test_malformed_json_reports_location():
    with pytest.raises(DefinitionError, match=r"line 2 column"):
        parse_definition('{"meta": {},\n "parameters": [}')


def test_unknown_ptype_is_a_parse_error():
    with pytest.raises(DefinitionError, match=r"'thing'.*unknown ptype 'float'"):
        parse_definition('{"parameters": [{"pname": "thing", "ptype": "float", "pdefault": 1}]}')


def test_unknown_value_type_is_a_parse_error():
    text = """{"parameters": [{"pname": "p", "ptype": "number", "pdefault": 1,
      "pvalues": [{"value_type": "fibonacci", "value": []}]}]}"""
    with pytest.raises(DefinitionError, match="unknown value_type"):
        parse_definition(text)


def test_float_values_are_rejected():
    with pytest.raises(DefinitionError):
        parse_definition('{"parameters": [{"pname": "p", "ptype": "number", "pdefault": 1.5}]}')
    with pytest.raises(DefinitionError):
        parse_definition(
            '{"parameters": [{"pname": "p", "ptype": "number", "pdefault": 1,'
            ' "pvalues": [{"value_type": "range", "value": {"start": 1.0, "end": 5}}]}]}'
        )


def test_structural_type_errors():
    with pytest.raises(DefinitionError):
        parse_definition("[1, 2]")
    with pytest.raises(DefinitionError):
        parse_definition('{"parameters": {"pname": "x"}}')
    with pytest.raises(DefinitionError):
        parse_definition('{"meta": 7, "parameters": []}')
    with pytest.raises(DefinitionError, match="missing required key"):
        parse_definition('{"parameters": [{"ptype": "number", "pdefault": 1}]}')


def test_unknown_keys_become_lint_violations():
    text = """{
      "meta": {}, "parameters": [
        {"pname": "p", "ptype": "number", "pdefault": 1, "bogus": true}
      ], "stray": 1
    }"""
    d = parse_definition(text)
    rules = {(v.parameter, v.rule) for v in d.lint}
    assert (None, "unknown key") in rules
    assert ("p", "unknown key") in rules
    # lint flows into the validation report
    assert set(d.lint) <= set(validate_definition(d))


def _single(param: ParameterDefinition) -> ConfigDefinition:
    return ConfigDefinition(meta=Meta(), parameters=(param,))


def test_validate_duplicate_names():
    d = ConfigDefinition(
        parameters=(
            ParameterDefinition("p", "number", 1),
            ParameterDefinition("p", "number", 2),
        )
    )
    assert any(v.rule == "duplicate name" for v in validate_definition(d))


def test_validate_empty_range_and_step():
    d = _single(ParameterDefinition("p", "number", 1, (RangeValues(5, 5),)))
    assert any(v.rule == "empty range" for v in validate_definition(d))
    d = _single(ParameterDefinition("p", "number", 1, (RangeValues(1, 5, 0),)))
    assert any(v.rule == "step" for v in validate_definition(d))


def test_validate_spec_type_pairing():
    d = _single(ParameterDefinition("p", "string", "x", (RangeValues(1, 5),)))
    assert any(v.rule == "range type" for v in validate_definition(d))
    d = _single(ParameterDefinition("p", "number", 1, (RegexValues("a"),)))
    assert any(v.rule == "regex type" for v in validate_definition(d))


def test_validate_unsupported_regex():
    d = _single(ParameterDefinition("p", "string", "x", (RegexValues("^a$"),)))
    assert any(v.rule == "unsupported regex" for v in validate_definition(d))


def test_validate_default_and_discrete_types():
    d = _single(ParameterDefinition("p", "number", "NaN-ish"))
    assert any(v.rule == "default type" for v in validate_definition(d))
    d = _single(ParameterDefinition("p", "bool", True, (DiscreteValues((1,)),)))
    assert any(v.rule == "discrete type" for v in validate_definition(d))
    d = _single(ParameterDefinition("p", "string", "x", (DiscreteValues(()),)))
    assert any(v.rule == "empty discrete" for v in validate_definition(d))


def test_validate_meta_bounds():
    d = ConfigDefinition(meta=Meta(timeout_wait_ms=0))
    assert any(v.rule == "timeout_wait_ms" for v in validate_definition(d))
    d = ConfigDefinition(meta=Meta(regex_max_repeat=0))
    assert any(v.rule == "regex_max_repeat" for v in validate_definition(d))
    d = ConfigDefinition(meta=Meta(max_values_per_parameter=0))
    assert any(v.rule == "max_values_per_parameter" for v in validate_definition(d))
    d = ConfigDefinition(meta=Meta(target=TargetLocation(base_port=0)))
    assert any(v.rule == "base_port" for v in validate_definition(d))


def test_validate_test_specs():
    def with_test(test: TestSpec) -> ConfigDefinition:
        return ConfigDefinition(meta=Meta(tests=(test,)))

    bad = [
        TestSpec("t", "mystery"),
        TestSpec("t", "builtin_port_scan", params={}),
        TestSpec("t", "builtin_port_scan", params={"port_start": 0, "port_end": 10}),
        TestSpec("t", "builtin_port_scan", params={"port_start": 9, "port_end": 5}),
        TestSpec("t", "builtin_port_scan", params={"port_start": True, "port_end": 5}),
        TestSpec("t", "external", exec_path=None),
        TestSpec("t", "external", exec_path="/bin/true", timeout_s=0),
    ]
    for test in bad:
        assert any(v.rule == "test" for v in validate_definition(with_test(test))), test

    ok = with_test(TestSpec("t", "builtin_port_scan", params={"port_start": 1, "port_end": 10}))
    assert validate_definition(ok) == []


def test_coerce_scalar_rules():
    assert coerce_scalar("true", "bool") is True
    assert coerce_scalar("False", "bool") is False
    assert coerce_scalar(1, "bool") is None
    assert coerce_scalar("123", "number") == 123
    assert coerce_scalar("12.5", "number") is None
    assert coerce_scalar(True, "number") is None
    assert coerce_scalar(42, "string") == "42"
    assert coerce_scalar(True, "string") is None


def test_render_scalar():
    assert render_scalar(True) == "TRUE"
    assert render_scalar(False) == "FALSE"
    assert render_scalar(80) == "80"
    assert render_scalar("On") == "On"


@pytest.mark.parametrize("name", ["portscan_demo.json", "webserver_demo.json"])
def test_fixture_round_trip(name):
    d = load_definition(os.path.join(FIXTURES, name))
    assert validate_definition(d) == []
    again = parse_definition(serialize_definition(d))
    assert again.meta == d.meta
    assert again.parameters == d.parameters
