"""Typed tool registry and call validation.

Tool calls produced by intent extraction are untrusted until they pass
schema validation here.  Validation is strict: unknown tools, unknown
parameters, wrong types, and out-of-range values are all rejected, and
nothing is coerced.  A successful validation mints a ``ValidatedCall``
whose ``call_id`` acts as the capability token that downstream stages
require.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import SlicePlaneError
from .ids import IdFactory

logger = logging.getLogger(__name__)

PARAM_TYPES = ("string", "integer", "number", "boolean")


class ToolValidationError(SlicePlaneError):
    """Base for all call-rejection errors; carries the full violation list."""

    code = "tool_validation_error"

    def __init__(self, message: str, violations: Optional[list[dict]] = None):
        super().__init__(message)
        self.violations = violations or []

    def payload(self) -> dict:
        out = super().payload()
        out["violations"] = self.violations
        return out


class DuplicateToolError(SlicePlaneError):
    code = "duplicate_tool"


class UnknownToolError(ToolValidationError):
    code = "unknown_tool"


class SchemaVersionError(ToolValidationError):
    code = "schema_version_mismatch"


class MissingParamError(ToolValidationError):
    code = "missing_param"


class UnknownParamError(ToolValidationError):
    code = "unknown_param"


class TypeMismatchError(ToolValidationError):
    code = "type_mismatch"


class RangeViolationError(ToolValidationError):
    code = "range_violation"


_KIND_TO_ERROR = {
    "missing_param": MissingParamError,
    "type_mismatch": TypeMismatchError,
    "range_violation": RangeViolationError,
    "unknown_param": UnknownParamError,
}


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str
    required: bool = False
    minimum: Optional[float] = None
    exclusive_minimum: Optional[float] = None
    maximum: Optional[float] = None
    enum: Optional[tuple] = None
    pattern: Optional[str] = None
    description: str = ""

    def __post_init__(self):
        if self.type not in PARAM_TYPES:
            raise ValueError(f"unsupported param type: {self.type!r}")


@dataclass(frozen=True)
class ToolSpec:
    name: str
    version: int
    description: str
    params: tuple[ParamSpec, ...]
    side_effecting: bool = False

    def __post_init__(self):
        for p in self.params:
            constrained = (
                p.minimum is not None
                or p.exclusive_minimum is not None
                or p.maximum is not None
                or p.enum is not None
                or p.pattern is not None
                or p.type == "boolean"
            )
            if p.required and not constrained:
                raise ValueError(
                    f"required param {p.name!r} of {self.name!r} has no constraint"
                )

    def param(self, name: str) -> Optional[ParamSpec]:
        for p in self.params:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class ToolCall:
    """An unvalidated call as emitted by intent extraction or the API."""

    tool: str
    params: dict
    schema_version: Optional[int] = None
    origin: str = "user"
    provenance: Optional[str] = None


@dataclass(frozen=True)
class ValidatedCall:
    """A call that passed schema validation.

    ``call_id`` is the capability token: stages beyond the gateway accept
    only ``ValidatedCall`` instances, never raw ``ToolCall`` dicts.
    """

    call_id: str
    tool: str
    version: int
    params: dict
    tenant_id: str
    origin: str = "user"
    provenance: Optional[str] = None

    def to_payload(self) -> dict:
        return {
            "call_id": self.call_id,
            "tool": self.tool,
            "version": self.version,
            "params": self.params,
            "tenant_id": self.tenant_id,
            "origin": self.origin,
            "provenance": self.provenance,
        }


def _type_ok(kind: str, value: Any) -> bool:
    # bool is a subclass of int in Python; keep it out of the numeric kinds
    if kind == "string":
        return isinstance(value, str)
    if kind == "boolean":
        return isinstance(value, bool)
    if kind == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return False


def check_params(spec: ToolSpec, params: dict) -> list[dict]:
    """Return every violation found, in deterministic order.

    Declared parameters are checked in spec order (missing, then type,
    then range for each), followed by unknown parameter names sorted
    alphabetically.
    """
    violations: list[dict] = []
    for p in spec.params:
        if p.name not in params:
            if p.required:
                violations.append(
                    {
                        "kind": "missing_param",
                        "param": p.name,
                        "message": f"required parameter {p.name!r} is missing",
                    }
                )
            continue
        value = params[p.name]
        if not _type_ok(p.type, value):
            violations.append(
                {
                    "kind": "type_mismatch",
                    "param": p.name,
                    "message": f"parameter {p.name!r} must be of type {p.type}",
                }
            )
            continue
        if p.minimum is not None and value < p.minimum:
            violations.append(
                {
                    "kind": "range_violation",
                    "param": p.name,
                    "message": f"parameter {p.name!r} must be >= {p.minimum}",
                }
            )
        if p.exclusive_minimum is not None and value <= p.exclusive_minimum:
            violations.append(
                {
                    "kind": "range_violation",
                    "param": p.name,
                    "message": f"parameter {p.name!r} must be > {p.exclusive_minimum}",
                }
            )
        if p.maximum is not None and value > p.maximum:
            violations.append(
                {
                    "kind": "range_violation",
                    "param": p.name,
                    "message": f"parameter {p.name!r} must be <= {p.maximum}",
                }
            )
        if p.enum is not None and value not in p.enum:
            violations.append(
                {
                    "kind": "range_violation",
                    "param": p.name,
                    "message": f"parameter {p.name!r} must be one of {list(p.enum)}",
                }
            )
        if p.pattern is not None and isinstance(value, str) and not re.fullmatch(p.pattern, value):
            violations.append(
                {
                    "kind": "range_violation",
                    "param": p.name,
                    "message": f"parameter {p.name!r} does not match {p.pattern!r}",
                }
            )
    known = {p.name for p in spec.params}
    for name in sorted(params):
        if name not in known:
            violations.append(
                {
                    "kind": "unknown_param",
                    "param": name,
                    "message": f"unknown parameter {name!r}",
                }
            )
    return violations


class ToolRegistry:
    def __init__(self, specs: Optional[list[ToolSpec]] = None):
        self._specs: dict[str, ToolSpec] = {}
        for spec in specs or []:
            self.register(spec)

    def register(self, spec: ToolSpec) -> None:
        existing = self._specs.get(spec.name)
        if existing is not None and existing.version >= spec.version:
            raise DuplicateToolError(
                f"tool {spec.name!r} already registered at version {existing.version}"
            )
        self._specs[spec.name] = spec

    def get(self, name: str) -> Optional[ToolSpec]:
        return self._specs.get(name)

    def names(self) -> list[str]:
        return sorted(self._specs)

    @classmethod
    def from_file(cls, path: str) -> "ToolRegistry":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        specs = []
        for t in doc["tools"]:
            params = tuple(
                ParamSpec(
                    name=p["name"],
                    type=p["type"],
                    required=p.get("required", False),
                    minimum=p.get("minimum"),
                    exclusive_minimum=p.get("exclusive_minimum"),
                    maximum=p.get("maximum"),
                    enum=tuple(p["enum"]) if "enum" in p else None,
                    pattern=p.get("pattern"),
                    description=p.get("description", ""),
                )
                for p in t["params"]
            )
            specs.append(
                ToolSpec(
                    name=t["name"],
                    version=t["version"],
                    description=t.get("description", ""),
                    params=params,
                    side_effecting=t.get("side_effecting", False),
                )
            )
        return cls(specs)


class ToolGateway:
    """Validates calls against the registry and mints capability tokens."""

    def __init__(self, registry: ToolRegistry):
        self.registry = registry
        self._ids = IdFactory("call", width=8)

    def advance_past(self, call_id: str) -> None:
        """Keep ids unique across restarts (fed from audit replay)."""
        self._ids.advance_past(call_id)

    def validate(self, call: ToolCall, tenant_id: str = "default") -> ValidatedCall:
        spec = self.registry.get(call.tool)
        if spec is None:
            raise UnknownToolError(f"unknown tool {call.tool!r}")
        if call.schema_version is not None and call.schema_version != spec.version:
            raise SchemaVersionError(
                f"tool {call.tool!r} is at schema version {spec.version}, "
                f"call requested {call.schema_version}",
            )
        violations = check_params(spec, call.params)
        if violations:
            first = violations[0]
            err_cls = _KIND_TO_ERROR[first["kind"]]
            raise err_cls(first["message"], violations)
        return ValidatedCall(
            call_id=self._ids.next(),
            tool=spec.name,
            version=spec.version,
            params=dict(call.params),
            tenant_id=tenant_id,
            origin=call.origin,
            provenance=call.provenance,
        )
