"""Chat-completion provider abstraction.

Two provider kinds ship with the tool: an HTTP provider speaking a minimal
chat-completion wire shape, and a transcript-backed mock for hermetic runs
(see :mod:`solguard.llm.mock`). Exchanges can be appended to an audit log;
credentials come from the environment and are never logged.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol

import requests

from solguard.errors import CompletionTimeout, ConfigError, TransportError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # "http-endpoint" | "mock"
    model_id: str
    endpoint: str | None = None
    api_key_env: str | None = None
    transcript: str | None = None
    temperature: float = 0.0
    max_output_tokens: int = 2048
    timeout_s: float = 60.0
    retry_count: int = 2

    def __post_init__(self) -> None:
        if self.kind == "mock":
            if not self.transcript:
                raise ConfigError(f"mock provider {self.model_id!r} requires a transcript path")
        elif self.kind == "http-endpoint":
            if not self.endpoint:
                raise ConfigError(f"http provider {self.model_id!r} requires an endpoint")
        else:
            raise ConfigError(f"unknown provider kind {self.kind!r}")

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "ProviderConfig":
        known = {
            "kind", "model_id", "endpoint", "api_key_env", "transcript",
            "temperature", "max_output_tokens", "timeout_s", "retry_count",
        }
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown provider config keys: {sorted(unknown)}")
        try:
            return cls(**payload)
        except TypeError as exc:
            raise ConfigError(f"bad provider config: {exc}") from exc


@dataclass(frozen=True)
class ChatExchange:
    """One request/response pair, recorded verbatim for auditability."""

    role: str
    request: str
    response: str
    provider_id: str
    latency_s: float


class Provider(Protocol):
    config: ProviderConfig

    def complete(self, prompt: str, *, role: str) -> ChatExchange: ...


class ExchangeLog:
    """Append-only line-delimited exchange log with serialized writes."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, exchange: ChatExchange) -> None:
        # the response is kept verbatim for audit; the (potentially huge)
        # request is identified by fingerprint and size only
        from solguard.llm.mock import prompt_fingerprint

        record = {
            "role": exchange.role,
            "provider": exchange.provider_id,
            "latency_s": round(exchange.latency_s, 6),
            "request_fingerprint": prompt_fingerprint(exchange.request),
            "request_chars": len(exchange.request),
            "response": exchange.response,
        }
        line = json.dumps(record, sort_keys=True) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)


class HttpProvider:
    """Minimal chat-completion client.

    Request body: ``{"model", "messages": [{"role","content"}], "temperature",
    "max_tokens"}``. The response may carry the text either as a top-level
    ``content`` string or under ``choices[0].message.content``.
    """

    def __init__(self, config: ProviderConfig, exchange_log: ExchangeLog | None = None):
        self.config = config
        self._log = exchange_log

    @property
    def provider_id(self) -> str:
        return f"http:{self.config.model_id}"

    def complete(self, prompt: str, *, role: str) -> ChatExchange:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            key = os.environ.get(self.config.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        }
        started = time.perf_counter()
        last_error: Exception | None = None
        for attempt in range(self.config.retry_count + 1):
            if attempt:
                time.sleep(0.05 * attempt)
            try:
                resp = requests.post(
                    self.config.endpoint,
                    json=body,
                    headers=headers,
                    timeout=self.config.timeout_s,
                )
            except requests.Timeout as exc:
                last_error = CompletionTimeout(f"{self.provider_id}: request timed out")
                log.warning("completion timeout (attempt %d): %s", attempt + 1, exc)
                continue
            except requests.RequestException as exc:
                last_error = TransportError(f"{self.provider_id}: {exc}")
                log.warning("completion transport failure (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code >= 500:
                last_error = TransportError(f"{self.provider_id}: server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise TransportError(f"{self.provider_id}: unexpected status {resp.status_code}")
            text = _response_text(resp.json(), self.provider_id)
            exchange = ChatExchange(
                role=role,
                request=prompt,
                response=text,
                provider_id=self.provider_id,
                latency_s=time.perf_counter() - started,
            )
            if self._log:
                self._log.append(exchange)
            return exchange
        raise last_error or TransportError(f"{self.provider_id}: no attempts made")


def _response_text(payload: dict[str, Any], provider_id: str) -> str:
    if isinstance(payload.get("content"), str):
        return payload["content"]
    try:
        return payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"{provider_id}: unrecognized response shape") from exc
