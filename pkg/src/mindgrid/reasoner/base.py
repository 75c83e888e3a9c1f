"""Types shared by every reasoner backend."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Protocol


class BackendUnavailable(RuntimeError):
    """The backend could not produce a response (retries exhausted, no cassette entry)."""


@dataclass(frozen=True)
class SamplingConfig:
    temperature: float = 0.1
    max_tokens: int = 4000
    top_p: float = 1.0
    n: int = 1

    def to_record(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class PromptExchange:
    system: str
    messages: tuple[Message, ...]
    config: SamplingConfig = field(default_factory=SamplingConfig)

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a prompt exchange needs at least one message")
        if any(m.role not in ("user", "assistant") for m in self.messages):
            raise ValueError("messages must be user or assistant turns")

    def chat_messages(self) -> list[dict[str, str]]:
        out = [{"role": "system", "content": self.system}] if self.system else []
        out.extend({"role": m.role, "content": m.content} for m in self.messages)
        return out

    def digest(self) -> str:
        """Stable content hash used to key cassettes and traces."""
        body = json.dumps(
            {"messages": self.chat_messages(), "config": self.config.to_record()},
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(body.encode("utf-8")).hexdigest()


@dataclass
class ReasonerTrace:
    digest: str
    task: str
    response: str
    latency: float
    retries: int

    def to_record(self) -> dict:
        return {
            "digest": self.digest,
            "task": self.task,
            "response": self.response,
            "latency": self.latency,
            "retries": self.retries,
        }


@dataclass
class Completion:
    text: str
    latency: float = 0.0
    retries: int = 0


class Reasoner(Protocol):
    name: str

    def complete(self, exchange: PromptExchange) -> Completion: ...
