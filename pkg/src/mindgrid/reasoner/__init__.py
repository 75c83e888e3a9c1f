"""Text-completion backends: the remote chat client, cassettes and the rule-based oracle."""

from __future__ import annotations

from typing import Any

from .base import (
    BackendUnavailable,
    Completion,
    Message,
    PromptExchange,
    Reasoner,
    ReasonerTrace,
    SamplingConfig,
)
from .oracle import OracleReasoner
from .remote import CassetteReasoner, RemoteReasoner
from .session import ReasonerParseError, Session

BACKENDS = ("oracle", "remote", "cassette")


def make_reasoner(backend: str = "oracle", **options: Any) -> Reasoner:
    """Build a backend by name.

    ``remote`` needs ``base_url`` and ``model``; ``cassette`` needs ``path``
    and, for ``mode='record'``, an ``inner`` backend or the remote options.
    """
    if backend == "oracle":
        return OracleReasoner()
    if backend == "remote":
        return RemoteReasoner(**options)
    if backend == "cassette":
        mode = options.pop("mode", "replay")
        path = options.pop("path")
        inner = options.pop("inner", None)
        if mode == "record" and inner is None:
            inner = RemoteReasoner(**options)
        return CassetteReasoner(path, mode=mode, inner=inner)
    raise ValueError(f"unknown reasoner backend {backend!r}; choose from {BACKENDS}")


__all__ = [
    "BACKENDS",
    "BackendUnavailable",
    "CassetteReasoner",
    "Completion",
    "Message",
    "OracleReasoner",
    "PromptExchange",
    "Reasoner",
    "ReasonerParseError",
    "ReasonerTrace",
    "RemoteReasoner",
    "SamplingConfig",
    "Session",
    "make_reasoner",
]
