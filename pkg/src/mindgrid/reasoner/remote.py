"""Chat-completion HTTP backend and a replayable cassette wrapper."""

from __future__ import annotations

import json
import logging
import os
import time
from pathlib import Path
from typing import Any, Callable

import httpx

from .base import BackendUnavailable, Completion, PromptExchange

log = logging.getLogger(__name__)

DEFAULT_KEY_ENV = "MINDGRID_API_KEY"
RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


class RemoteReasoner:
    """Calls an OpenAI-style ``/chat/completions`` endpoint.

    The credential is read from the environment variable named by
    ``key_env`` and is never logged or written to results.
    """

    name = "remote"

    def __init__(
        self,
        base_url: str,
        model: str,
        key_env: str = DEFAULT_KEY_ENV,
        max_retries: int = 4,
        backoff: float = 1.0,
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if not base_url:
            raise ValueError("remote reasoner needs a base URL")
        api_key = os.environ.get(key_env)
        if not api_key:
            raise ValueError(f"set {key_env} to use the remote reasoner")
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep
        self.client = httpx.Client(
            timeout=timeout,
            transport=transport,
            headers={"Authorization": f"Bearer {api_key}"},
        )

    def payload(self, exchange: PromptExchange) -> dict[str, Any]:
        cfg = exchange.config
        return {
            "model": self.model,
            "messages": exchange.chat_messages(),
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
            "top_p": cfg.top_p,
            "n": cfg.n,
        }

    def complete(self, exchange: PromptExchange) -> Completion:
        body = self.payload(exchange)
        last_error = "no attempt made"
        start = time.monotonic()
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.client.post(self.url, json=body)
            except httpx.TransportError as exc:
                last_error = f"transport error: {exc}"
                log.warning("reasoner request failed (%s), attempt %d", last_error, attempt + 1)
                continue
            if resp.status_code in RETRY_STATUS:
                last_error = f"HTTP {resp.status_code}"
                log.warning("reasoner returned %s, attempt %d", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                text = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendUnavailable(f"malformed completion body: {exc}") from None
            return Completion(text, time.monotonic() - start, attempt)
        raise BackendUnavailable(f"gave up after {self.max_retries + 1} attempts: {last_error}")

    def close(self) -> None:
        self.client.close()


class CassetteReasoner:
    """Records exchanges to a JSON-lines file, or replays them offline.

    In ``replay`` mode a request missing from the cassette raises
    :class:`BackendUnavailable`; in ``record`` mode every call goes to
    ``inner`` and the reply is appended to the file.
    """

    name = "cassette"

    def __init__(self, path: str | Path, mode: str = "replay", inner: Any = None) -> None:
        if mode not in ("record", "replay"):
            raise ValueError("cassette mode must be 'record' or 'replay'")
        if mode == "record" and inner is None:
            raise ValueError("recording needs an inner reasoner")
        self.path = Path(path)
        self.mode = mode
        self.inner = inner
        self.entries: dict[str, list[Completion]] = {}
        self.cursor: dict[str, int] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = json.loads(line)
                    completion = Completion(rec["response"], rec.get("latency", 0.0), rec.get("retries", 0))
                    self.entries.setdefault(rec["digest"], []).append(completion)

    def complete(self, exchange: PromptExchange) -> Completion:
        digest = exchange.digest()
        if self.mode == "replay":
            replies = self.entries.get(digest)
            if not replies:
                raise BackendUnavailable(f"request {digest[:12]} is not in {self.path}")
            # identical requests replay their recorded replies in order; latency
            # and retries come back too so replayed results match byte for byte
            i = self.cursor.get(digest, 0)
            self.cursor[digest] = i + 1
            return replies[min(i, len(replies) - 1)]
        completion = self.inner.complete(exchange)
        self.entries.setdefault(digest, []).append(completion)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            record = {
                "digest": digest,
                "request": {"messages": exchange.chat_messages(), "config": exchange.config.to_record()},
                "response": completion.text,
                "latency": completion.latency,
                "retries": completion.retries,
            }
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
        return completion
