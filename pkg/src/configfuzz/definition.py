"""Campaign definition parsing and validation.

A definition document is UTF-8 JSON with two top-level keys: ``meta``
(target location, test selection, protocol timing, generator caps) and
``parameters`` (an ordered list of fuzzable parameters).  ``//`` comments
are tolerated and stripped before parsing.

Parsing is strict about JSON *types* (a number where an object is expected
is a :class:`DefinitionError`), while rule breaks on well-formed structure
(duplicate names, empty ranges, out-of-range ports, unknown keys) are
reported as :class:`Violation` records by :func:`validate_definition` so a
caller can show all of them at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Union

from . import regexenum

#: Campaign scalar values.  Order matters for isinstance checks: bool is a
#: subclass of int and must be tested first.
Scalar = Union[bool, int, str]

PTYPES = ("string", "number", "bool")
VALUE_TYPES = ("discrete", "range", "regex")
VALUE_ACTIONS = ("modify", "add", "delete")
TEST_KINDS = ("builtin_port_scan", "external")

DEFAULT_TIMEOUT_WAIT_MS = 500
DEFAULT_REGEX_MAX_REPEAT = 3
DEFAULT_MAX_VALUES = 1000
DEFAULT_PORT_PARAMETER = "port"
DEFAULT_TEST_TIMEOUT_S = 60


class DefinitionError(ValueError):
    """Structural problem that prevents building a typed definition."""


@dataclass(frozen=True, slots=True)
class Violation:
    """One broken rule; ``parameter`` is None for campaign-level rules."""

    parameter: str | None
    rule: str
    detail: str

    def __str__(self) -> str:
        where = self.parameter if self.parameter is not None else "<campaign>"
        return f"{where}: {self.rule}: {self.detail}"


@dataclass(frozen=True, slots=True)
class TargetLocation:
    host: str = "127.0.0.1"
    base_port: int = 80


@dataclass(frozen=True, slots=True)
class TestSpec:
    """One entry of the per-change test battery."""

    name: str
    kind: str
    exec_path: str | None = None
    params: dict[str, Scalar] = field(default_factory=dict)
    timeout_s: int = DEFAULT_TEST_TIMEOUT_S


@dataclass(frozen=True, slots=True)
class Meta:
    target: TargetLocation = TargetLocation()
    tests: tuple[TestSpec, ...] = ()
    timeout_wait_ms: int = DEFAULT_TIMEOUT_WAIT_MS
    regex_max_repeat: int = DEFAULT_REGEX_MAX_REPEAT
    max_values_per_parameter: int = DEFAULT_MAX_VALUES
    port_parameter: str = DEFAULT_PORT_PARAMETER
    # Unknown keys directly under "meta" are preserved here and ignored.
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class DiscreteValues:
    values: tuple[Scalar, ...]
    action: str = "modify"


@dataclass(frozen=True, slots=True)
class RangeValues:
    start: int
    end: int  # exclusive
    step: int = 1
    action: str = "modify"


@dataclass(frozen=True, slots=True)
class RegexValues:
    pattern: str
    action: str = "modify"


ValueSpec = Union[DiscreteValues, RangeValues, RegexValues]


@dataclass(frozen=True, slots=True)
class ParameterDefinition:
    pname: str
    ptype: str
    pdefault: Scalar
    pvalues: tuple[ValueSpec, ...] = ()


@dataclass(frozen=True, slots=True)
class ConfigDefinition:
    meta: Meta = Meta()
    parameters: tuple[ParameterDefinition, ...] = ()
    # Rule breaks already visible at parse time (unknown keys, bad value
    # actions); merged into validate_definition()'s report.
    lint: tuple[Violation, ...] = ()


def render_scalar(value: Scalar) -> str:
    """Text rendering used by logs, schedules and the results store."""
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    return str(value)


def coerce_scalar(raw: Any, ptype: str) -> Scalar | None:
    """Coerce ``raw`` to ``ptype``; None when not representable.

    Strings parse to the declared type ("4999" -> 4999, "true" -> True);
    integers render to strings for string parameters.  bool/int never
    cross-coerce.
    """
    if ptype == "bool":
        if isinstance(raw, bool):
            return raw
        if isinstance(raw, str) and raw.lower() in ("true", "false"):
            return raw.lower() == "true"
        return None
    if ptype == "number":
        if isinstance(raw, bool):
            return None
        if isinstance(raw, int):
            return raw
        if isinstance(raw, str):
            try:
                return int(raw, 10)
            except ValueError:
                return None
        return None
    if ptype == "string":
        if isinstance(raw, bool):
            return None
        if isinstance(raw, str):
            return raw
        if isinstance(raw, int):
            return str(raw)
        return None
    return None


def strip_json_comments(text: str) -> str:
    """Remove ``//`` line comments occurring outside string literals."""
    out: list[str] = []
    in_string = False
    escaped = False
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if in_string:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            i += 1
        elif ch == '"':
            in_string = True
            out.append(ch)
            i += 1
        elif ch == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                i += 1
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise DefinitionError(f"{where}: missing required key {key!r}")
    return obj[key]


def _require_int(raw: Any, where: str) -> int:
    # JSON floats are never campaign values, even integral ones.
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise DefinitionError(f"{where}: expected an integer, got {raw!r}")
    return raw


def _require_str(raw: Any, where: str) -> str:
    if not isinstance(raw, str):
        raise DefinitionError(f"{where}: expected a string, got {raw!r}")
    return raw


def _require_scalar(raw: Any, where: str) -> Scalar:
    if isinstance(raw, (bool, int, str)):
        return raw
    raise DefinitionError(f"{where}: expected a scalar, got {raw!r}")


def _parse_test(raw: Any, index: int, lint: list[Violation]) -> TestSpec:
    where = f"meta.tests[{index}]"
    if not isinstance(raw, dict):
        raise DefinitionError(f"{where}: expected an object")
    name = _require_str(_require(raw, "name", where), f"{where}.name")
    kind = _require_str(_require(raw, "kind", where), f"{where}.kind")
    exec_path = None
    if "exec_path" in raw:
        exec_path = _require_str(raw["exec_path"], f"{where}.exec_path")
    params: dict[str, Scalar] = {}
    if "params" in raw:
        if not isinstance(raw["params"], dict):
            raise DefinitionError(f"{where}.params: expected an object")
        for k, v in raw["params"].items():
            params[k] = _require_scalar(v, f"{where}.params.{k}")
    timeout_s = DEFAULT_TEST_TIMEOUT_S
    if "timeout_s" in raw:
        timeout_s = _require_int(raw["timeout_s"], f"{where}.timeout_s")
    return TestSpec(name=name, kind=kind, exec_path=exec_path, params=params, timeout_s=timeout_s)


_META_KEYS = (
    "target",
    "tests",
    "timeout_wait_ms",
    "regex_max_repeat",
    "max_values_per_parameter",
    "port_parameter",
)


def _parse_meta(raw: Any, lint: list[Violation]) -> Meta:
    if not isinstance(raw, dict):
        raise DefinitionError("meta: expected an object")
    target = TargetLocation()
    if "target" in raw:
        traw = raw["target"]
        if not isinstance(traw, dict):
            raise DefinitionError("meta.target: expected an object")
        target = TargetLocation(
            host=_require_str(traw.get("host", target.host), "meta.target.host"),
            base_port=_require_int(traw.get("base_port", target.base_port), "meta.target.base_port"),
        )
    tests = tuple(
        _parse_test(t, i, lint) for i, t in enumerate(raw.get("tests", []))
    ) if isinstance(raw.get("tests", []), list) else ()
    if not isinstance(raw.get("tests", []), list):
        raise DefinitionError("meta.tests: expected a list")
    extra = {k: v for k, v in raw.items() if k not in _META_KEYS}
    return Meta(
        target=target,
        tests=tests,
        timeout_wait_ms=_require_int(raw.get("timeout_wait_ms", DEFAULT_TIMEOUT_WAIT_MS), "meta.timeout_wait_ms"),
        regex_max_repeat=_require_int(raw.get("regex_max_repeat", DEFAULT_REGEX_MAX_REPEAT), "meta.regex_max_repeat"),
        max_values_per_parameter=_require_int(
            raw.get("max_values_per_parameter", DEFAULT_MAX_VALUES), "meta.max_values_per_parameter"
        ),
        port_parameter=_require_str(raw.get("port_parameter", DEFAULT_PORT_PARAMETER), "meta.port_parameter"),
        extra=extra,
    )


def _parse_value_spec(raw: Any, pname: str, ptype: str, index: int, lint: list[Violation]) -> ValueSpec:
    where = f"parameter {pname!r} pvalues[{index}]"
    if not isinstance(raw, dict):
        raise DefinitionError(f"{where}: expected an object")
    value_type = _require_str(_require(raw, "value_type", where), f"{where}.value_type")
    if value_type not in VALUE_TYPES:
        raise DefinitionError(f"parameter {pname!r}: unknown value_type {value_type!r}")
    payload = _require(raw, "value", where)

    action = "modify"
    if "action" in raw:
        action_raw = _require_str(raw["action"], f"{where}.action")
        if action_raw not in VALUE_ACTIONS:
            lint.append(Violation(pname, "value action", f"unknown action {action_raw!r}"))
        else:
            action = action_raw
    for key in raw:
        if key not in ("value_type", "value", "action"):
            lint.append(Violation(pname, "unknown key", f"{where}.{key}"))

    if value_type == "range":
        if not isinstance(payload, dict):
            raise DefinitionError(f"{where}.value: range expects an object")
        for key in payload:
            if key not in ("start", "end", "step"):
                lint.append(Violation(pname, "unknown key", f"{where}.value.{key}"))
        return RangeValues(
            start=_require_int(_require(payload, "start", f"{where}.value"), f"{where}.value.start"),
            end=_require_int(_require(payload, "end", f"{where}.value"), f"{where}.value.end"),
            step=_require_int(payload.get("step", 1), f"{where}.value.step"),
            action=action,
        )
    if value_type == "regex":
        return RegexValues(pattern=_require_str(payload, f"{where}.value"), action=action)
    if not isinstance(payload, list):
        raise DefinitionError(f"{where}.value: discrete expects a list")
    values = []
    for j, element in enumerate(payload):
        scalar = _require_scalar(element, f"{where}.value[{j}]")
        coerced = coerce_scalar(scalar, ptype)
        values.append(coerced if coerced is not None else scalar)
    return DiscreteValues(values=tuple(values), action=action)


_PARAMETER_KEYS = ("pname", "ptype", "pdefault", "pvalues")


def _parse_parameter(raw: Any, index: int, lint: list[Violation]) -> ParameterDefinition:
    where = f"parameters[{index}]"
    if not isinstance(raw, dict):
        raise DefinitionError(f"{where}: expected an object")
    pname = _require_str(_require(raw, "pname", where), f"{where}.pname")
    ptype = _require_str(_require(raw, "ptype", where), f"{where}.ptype")
    if ptype not in PTYPES:
        raise DefinitionError(f"parameter {pname!r}: unknown ptype {ptype!r}")
    default_raw = _require_scalar(_require(raw, "pdefault", where), f"{where}.pdefault")
    coerced = coerce_scalar(default_raw, ptype)
    pdefault = coerced if coerced is not None else default_raw
    pvalues_raw = raw.get("pvalues", [])
    if not isinstance(pvalues_raw, list):
        raise DefinitionError(f"{where}.pvalues: expected a list")
    pvalues = tuple(
        _parse_value_spec(v, pname, ptype, i, lint) for i, v in enumerate(pvalues_raw)
    )
    for key in raw:
        if key not in _PARAMETER_KEYS:
            lint.append(Violation(pname, "unknown key", f"{where}.{key}"))
    return ParameterDefinition(pname=pname, ptype=ptype, pdefault=pdefault, pvalues=pvalues)


def parse_definition(text: str) -> ConfigDefinition:
    """Parse a definition document into a typed :class:`ConfigDefinition`.

    Raises :class:`DefinitionError` for malformed JSON (with location),
    unknown ptype/value_type, and JSON-type mismatches.  Everything else
    is deferred to :func:`validate_definition`.
    """
    try:
        doc = json.loads(strip_json_comments(text))
    except json.JSONDecodeError as exc:
        raise DefinitionError(
            f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise DefinitionError("definition root must be a JSON object")
    lint: list[Violation] = []
    for key in doc:
        if key not in ("meta", "parameters"):
            lint.append(Violation(None, "unknown key", key))
    meta = _parse_meta(doc.get("meta", {}), lint)
    params_raw = doc.get("parameters", [])
    if not isinstance(params_raw, list):
        raise DefinitionError("parameters: expected a list")
    parameters = tuple(_parse_parameter(p, i, lint) for i, p in enumerate(params_raw))
    return ConfigDefinition(meta=meta, parameters=parameters, lint=tuple(lint))


def _scalar_matches(value: Scalar, ptype: str) -> bool:
    if ptype == "bool":
        return isinstance(value, bool)
    if ptype == "number":
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, str)


def _validate_test(test: TestSpec, out: list[Violation]) -> None:
    if test.kind not in TEST_KINDS:
        out.append(Violation(None, "test", f"test {test.name!r}: unknown kind {test.kind!r}"))
        return
    if test.kind == "builtin_port_scan":
        for key in ("port_start", "port_end"):
            bound = test.params.get(key)
            if not isinstance(bound, int) or isinstance(bound, bool):
                out.append(Violation(None, "test", f"test {test.name!r}: {key} must be an integer"))
                return
            if not 1 <= bound <= 65535:
                out.append(Violation(None, "test", f"test {test.name!r}: {key} out of range"))
                return
        if test.params["port_start"] > test.params["port_end"]:
            out.append(Violation(None, "test", f"test {test.name!r}: port_start > port_end"))
    elif not test.exec_path:
        out.append(Violation(None, "test", f"test {test.name!r}: external test needs exec_path"))
    if test.timeout_s <= 0:
        out.append(Violation(None, "test", f"test {test.name!r}: timeout_s must be positive"))


def validate_definition(definition: ConfigDefinition) -> list[Violation]:
    """Check every campaign rule; an empty list means the definition is runnable."""
    out = list(definition.lint)
    meta = definition.meta
    if meta.timeout_wait_ms <= 0:
        out.append(Violation(None, "timeout_wait_ms", "must be positive"))
    if meta.regex_max_repeat <= 0:
        out.append(Violation(None, "regex_max_repeat", "must be positive"))
    if meta.max_values_per_parameter < 1:
        out.append(Violation(None, "max_values_per_parameter", "must be at least 1"))
    if not 1 <= meta.target.base_port <= 65535:
        out.append(Violation(None, "base_port", f"{meta.target.base_port} out of range"))
    for test in meta.tests:
        _validate_test(test, out)

    seen: set[str] = set()
    for param in definition.parameters:
        if param.pname in seen:
            out.append(Violation(param.pname, "duplicate name", "parameter names must be unique"))
        seen.add(param.pname)
        if not _scalar_matches(param.pdefault, param.ptype):
            out.append(
                Violation(param.pname, "default type", f"pdefault {param.pdefault!r} is not a {param.ptype}")
            )
        for spec in param.pvalues:
            if isinstance(spec, RangeValues):
                if param.ptype != "number":
                    out.append(Violation(param.pname, "range type", "range values need ptype number"))
                if spec.start >= spec.end:
                    out.append(
                        Violation(param.pname, "empty range", f"start {spec.start} must be < end {spec.end}")
                    )
                if spec.step < 1:
                    out.append(Violation(param.pname, "step", "step must be a positive integer"))
            elif isinstance(spec, RegexValues):
                if param.ptype != "string":
                    out.append(Violation(param.pname, "regex type", "regex values need ptype string"))
                else:
                    try:
                        regexenum.parse_pattern(spec.pattern)
                    except regexenum.UnsupportedPatternError as exc:
                        out.append(Violation(param.pname, "unsupported regex", str(exc)))
            else:
                if not spec.values:
                    out.append(Violation(param.pname, "empty discrete", "discrete list must be non-empty"))
                for value in spec.values:
                    if not _scalar_matches(value, param.ptype):
                        out.append(
                            Violation(param.pname, "discrete type", f"value {value!r} is not a {param.ptype}")
                        )
    return out


def _test_to_doc(test: TestSpec) -> dict[str, Any]:
    doc: dict[str, Any] = {"name": test.name, "kind": test.kind}
    if test.exec_path is not None:
        doc["exec_path"] = test.exec_path
    if test.params:
        doc["params"] = dict(test.params)
    if test.timeout_s != DEFAULT_TEST_TIMEOUT_S:
        doc["timeout_s"] = test.timeout_s
    return doc


def _value_spec_to_doc(spec: ValueSpec) -> dict[str, Any]:
    if isinstance(spec, RangeValues):
        value: Any = {"start": spec.start, "end": spec.end}
        if spec.step != 1:
            value["step"] = spec.step
        doc = {"value_type": "range", "value": value}
    elif isinstance(spec, RegexValues):
        doc = {"value_type": "regex", "value": spec.pattern}
    else:
        doc = {"value_type": "discrete", "value": list(spec.values)}
    if spec.action != "modify":
        doc["action"] = spec.action
    return doc


def definition_to_doc(definition: ConfigDefinition) -> dict[str, Any]:
    meta = definition.meta
    meta_doc: dict[str, Any] = {
        "target": {"host": meta.target.host, "base_port": meta.target.base_port},
        "tests": [_test_to_doc(t) for t in meta.tests],
        "timeout_wait_ms": meta.timeout_wait_ms,
        "regex_max_repeat": meta.regex_max_repeat,
        "max_values_per_parameter": meta.max_values_per_parameter,
        "port_parameter": meta.port_parameter,
    }
    meta_doc.update(meta.extra)
    parameters = []
    for param in definition.parameters:
        pdoc: dict[str, Any] = {
            "pname": param.pname,
            "ptype": param.ptype,
            "pdefault": param.pdefault,
        }
        if param.pvalues:
            pdoc["pvalues"] = [_value_spec_to_doc(s) for s in param.pvalues]
        parameters.append(pdoc)
    return {"meta": meta_doc, "parameters": parameters}


def serialize_definition(definition: ConfigDefinition) -> str:
    """Inverse of :func:`parse_definition` for valid definitions."""
    return json.dumps(definition_to_doc(definition), indent=2) + "\n"


def load_definition(path: str) -> ConfigDefinition:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_definition(fh.read())
