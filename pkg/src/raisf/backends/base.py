from __future__ import annotations

import threading
from enum import Enum
from typing import Protocol, runtime_checkable

from ..core import DecodingSettings


class ModelRole(str, Enum):
    ANSWERER = "answerer"
    SELF_KNOWLEDGE = "self_knowledge"
    RELEVANCE = "relevance"
    DECOMPOSER = "decomposer"


@runtime_checkable
class ModelBackend(Protocol):
    """Anything that turns a role-addressed prompt into raw completion text.

    Implementations raise ``BackendUnavailable`` on transport failure and
    ``BackendRefusal`` on an empty completion. They must tolerate concurrent
    calls.
    """

    def complete(self, role: ModelRole, prompt: str, decoding: DecodingSettings | None = None) -> str: ...


class RecordingBackend:
    """Wraps another backend and keeps every (role, prompt, output) triple."""

    def __init__(self, inner: ModelBackend) -> None:
        self.inner = inner
        self.calls: list[tuple[ModelRole, str, str]] = []
        self._lock = threading.Lock()

    def complete(self, role: ModelRole, prompt: str, decoding: DecodingSettings | None = None) -> str:
        out = self.inner.complete(role, prompt, decoding)
        with self._lock:
            self.calls.append((role, prompt, out))
        return out

    def prompts_for(self, role: ModelRole) -> list[str]:
        return [p for r, p, _ in self.calls if r is role]
