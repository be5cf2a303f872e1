"""Deterministic stand-in model backends.

Every backend is a pure function of ``(prompt, seed)``: the same prompt
and seed always produce the same completion, which keeps end-to-end runs
replayable.  Real model calls would slot in behind the same ``complete``
interface.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Protocol

from .canonical import digest
from .errors import SlicePlaneError

logger = logging.getLogger(__name__)


class BackendFailure(SlicePlaneError):
    code = "backend_failure"


class BackendUnavailable(SlicePlaneError):
    code = "backend_unavailable"


class Backend(Protocol):
    name: str

    def complete(self, prompt: str) -> str: ...


@dataclass(frozen=True)
class DeterministicBackend:
    """Wraps a pure render function as a named backend."""

    name: str
    seed: int
    render: Callable[[str, int], str]

    def complete(self, prompt: str) -> str:
        return self.render(prompt, self.seed)


@dataclass(frozen=True)
class MalformedBackend:
    """Always emits non-JSON text; exercises governor rejection paths."""

    name: str
    seed: int = 0

    def complete(self, prompt: str) -> str:
        return "!malformed " + digest([self.name, self.seed, prompt])[:12]


@dataclass(frozen=True)
class FailingBackend:
    """Always raises; exercises unavailable-member handling."""

    name: str
    seed: int = 0

    def complete(self, prompt: str) -> str:
        raise BackendFailure(f"backend {self.name} is unavailable")


CAPABILITIES = ("intent_mapping", "manifest_generation")


@dataclass(frozen=True)
class PoolMember:
    backend: Backend
    capability: str

    def __post_init__(self):
        if self.capability not in CAPABILITIES:
            raise ValueError(f"unknown capability {self.capability!r}")


class BackendPool:
    """Read-only after construction; safe to share across threads."""

    def __init__(self, members: list[PoolMember]):
        self._members = tuple(members)

    def with_capability(self, capability: str) -> list[Backend]:
        return [m.backend for m in self._members if m.capability == capability]

    def first(self, capability: str) -> Backend:
        matches = self.with_capability(capability)
        if not matches:
            raise BackendUnavailable(f"no backend with capability {capability!r}")
        return matches[0]
