"""Change planning: turn a definition into an ordered stream of changes.

Parameters are walked in definition order.  Each parameter contributes its
expanded values (value specs in order, each expanded per its type) followed
by one reset change that carries the parameter's default.  A value equal to
the default is still emitted; the trailing reset is what restores the
baseline.  Change ids are contiguous and start at 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

from . import regexenum
from .definition import (
    ConfigDefinition,
    DiscreteValues,
    Meta,
    ParameterDefinition,
    RangeValues,
    RegexValues,
    Scalar,
    ValueSpec,
)

log = logging.getLogger(__name__)

#: Wire-level change actions; the generator emits modify and reset, while
#: add/delete pass through from explicit value-spec overrides.
CHANGE_ACTIONS = ("modify", "add", "delete", "reset")


@dataclass(frozen=True, slots=True)
class ConfigChange:
    change_id: int
    name: str
    action: str
    value: Scalar


def enumerate_regex(pattern: str, meta: Meta) -> list[str]:
    """Language of ``pattern`` under the campaign's repeat and size caps."""
    return regexenum.enumerate_pattern(
        pattern,
        max_repeat=meta.regex_max_repeat,
        max_values=meta.max_values_per_parameter,
    )


def expand_value_spec(spec: ValueSpec, meta: Meta) -> list[Scalar]:
    if isinstance(spec, RangeValues):
        return list(range(spec.start, spec.end, spec.step))
    if isinstance(spec, RegexValues):
        return list(enumerate_regex(spec.pattern, meta))
    return list(spec.values)


def _effective_specs(param: ParameterDefinition) -> tuple[ValueSpec, ...]:
    if not param.pvalues and param.ptype == "bool":
        # Bools enumerate themselves: no spec needed for a two-value domain.
        return (DiscreteValues(values=(False, True)),)
    return param.pvalues


def _parameter_values(
    param: ParameterDefinition, meta: Meta, *, warn: bool = True
) -> Iterator[tuple[str, Scalar]]:
    emitted = 0
    for spec in _effective_specs(param):
        for value in expand_value_spec(spec, meta):
            if emitted >= meta.max_values_per_parameter:
                if warn:
                    log.warning(
                        "parameter %s: value enumeration truncated at %d",
                        param.pname,
                        meta.max_values_per_parameter,
                    )
                return
            emitted += 1
            yield spec.action, value


def iter_changes(definition: ConfigDefinition) -> Iterator[ConfigChange]:
    """Lazy, deterministic change stream; reset-to-default closes each parameter."""
    change_id = 0
    for param in definition.parameters:
        for action, value in _parameter_values(param, definition.meta):
            change_id += 1
            yield ConfigChange(change_id, param.pname, action, value)
        change_id += 1
        yield ConfigChange(change_id, param.pname, "reset", param.pdefault)


def plan_changes(definition: ConfigDefinition) -> int:
    """Total change count a campaign will issue; dry run, no side effects."""
    total = 0
    for param in definition.parameters:
        expanded = sum(
            len(expand_value_spec(spec, definition.meta))
            for spec in _effective_specs(param)
        )
        total += min(expanded, definition.meta.max_values_per_parameter) + 1
    return total


class ChangeGenerator:
    """Pull-style wrapper around :func:`iter_changes` for the server loop."""

    def __init__(self, definition: ConfigDefinition) -> None:
        self._iter = iter_changes(definition)
        self._exhausted = False

    def next_change(self) -> ConfigChange | None:
        if self._exhausted:
            return None
        try:
            return next(self._iter)
        except StopIteration:
            self._exhausted = True
            return None

    @property
    def exhausted(self) -> bool:
        return self._exhausted
