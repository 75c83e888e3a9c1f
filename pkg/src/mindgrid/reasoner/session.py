"""One agent's conversation helper: render, call, parse, retry, trace."""

from __future__ import annotations

from typing import Any, Callable, Mapping, TypeVar

from ..parsing import LiteralSyntaxError, PlanError, literal_from_text
from .base import (
    Completion,
    Message,
    PromptExchange,
    Reasoner,
    ReasonerTrace,
    SamplingConfig,
)
from .prompts import render_named

T = TypeVar("T")

RETRY_NOTE = (
    "Your previous reply could not be used: {error}\n"
    "Reply again with a single fenced block in the requested format."
)


class ReasonerParseError(ValueError):
    """The reply stayed unusable after the retry."""


class Session:
    """Sends prompts for one agent and records a trace of every call."""

    def __init__(
        self,
        reasoner: Reasoner,
        system: str = "",
        config: SamplingConfig | None = None,
    ) -> None:
        self.reasoner = reasoner
        self.system = system
        self.config = config or SamplingConfig()
        self.traces: list[ReasonerTrace] = []
        self.calls = 0

    def _call(self, task: str, messages: list[Message]) -> Completion:
        exchange = PromptExchange(self.system, tuple(messages), self.config)
        completion = self.reasoner.complete(exchange)
        self.calls += 1
        self.traces.append(
            ReasonerTrace(
                exchange.digest(), task, completion.text, completion.latency, completion.retries
            )
        )
        return completion

    def prompt(self, template: str, fields: Mapping[str, Any]) -> str:
        return render_named(template, fields)

    def ask_text(self, template: str, fields: Mapping[str, Any]) -> str:
        return self._call(template, [Message("user", self.prompt(template, fields))]).text

    def ask(
        self,
        template: str,
        fields: Mapping[str, Any],
        expect: Callable[[Any], T],
        retries: int = 1,
        text_parser: Callable[[str], Any] = literal_from_text,
    ) -> T:
        """Ask and convert the reply with ``expect``; retry with the error appended.

        ``expect`` receives the parsed literal and raises ``ValueError`` when
        the value does not have the required shape.
        """
        messages = [Message("user", self.prompt(template, fields))]
        error = ""
        for attempt in range(retries + 1):
            reply = self._call(template, messages).text
            try:
                return expect(text_parser(reply))
            except (LiteralSyntaxError, PlanError, ValueError, KeyError, TypeError) as exc:
                error = str(exc)
                messages = messages + [
                    Message("assistant", reply),
                    Message("user", RETRY_NOTE.format(error=error)),
                ]
        raise ReasonerParseError(error)

    def drain_traces(self) -> list[ReasonerTrace]:
        out, self.traces = self.traces, []
        return out
