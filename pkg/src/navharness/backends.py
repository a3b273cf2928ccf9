"""Uniform completion interface over language models.

Two kinds of backend share one surface: `endpoint` talks to a chat-completion
HTTP API and measures wall-clock inference time; `scripted` replays a rule
table deterministically for tests and offline runs, reporting its configured
synthetic latency instead of wall-clock so replays are byte-identical.
"""

from __future__ import annotations

import json
import math
import os
import re
import threading
import time
import urllib.parse
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import httpx


class BackendError(RuntimeError):
    """Base class for completion failures."""


class BackendConfigError(ValueError):
    """Raised when a backend configuration is invalid or incomplete."""


class TransportError(BackendError):
    """Raised when an endpoint request fails (network, timeout, bad status, bad body)."""


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class CompletionRequest:
    messages: tuple[ChatMessage, ...]
    max_tokens: int = 512
    temperature: float = 0.0
    model_name: str = ""

    def __post_init__(self):
        if not self.messages:
            raise ValueError("request needs at least one message")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    inference_duration: float  # seconds
    completion_tokens: Optional[int]
    backend_id: str


@dataclass(frozen=True)
class ScriptRule:
    matcher: str  # substring, or regex when is_regex
    response: str
    unlock_after: int = 0  # matcher mentions required before the rule fires
    is_regex: bool = False

    def occurrences(self, text: str) -> int:
        if self.is_regex:
            return len(re.findall(self.matcher, text, flags=re.DOTALL))
        if not self.matcher:
            return 0
        return text.count(self.matcher)


@dataclass(frozen=True)
class ScriptTable:
    rules: tuple[ScriptRule, ...]
    fallback: str
    synthetic_latency: float = 0.01


@dataclass(frozen=True)
class BackendConfig:
    kind: str  # endpoint | scripted
    model_name: str = "unnamed"
    endpoint_url: str = ""
    api_key_env: str = ""
    script: Optional[ScriptTable] = None
    max_tokens: int = 512
    temperature: float = 0.0
    timeout_s: float = 120.0
    retries: int = 1

    @staticmethod
    def from_dict(doc: dict) -> "BackendConfig":
        kind = doc.get("kind")
        if kind not in ("endpoint", "scripted"):
            raise BackendConfigError(f"unknown backend kind {kind!r}")
        script = None
        if kind == "scripted":
            raw = doc.get("script")
            if not isinstance(raw, dict) or "fallback" not in raw:
                raise BackendConfigError("scripted backend needs a script table with a fallback")
            rules = []
            for r in raw.get("rules", []):
                unlock_after = int(r.get("unlock_after", 0))
                if unlock_after < 0:
                    raise BackendConfigError("unlock_after must be >= 0")
                rules.append(
                    ScriptRule(
                        matcher=r["match"],
                        response=r["response"],
                        unlock_after=unlock_after,
                        is_regex=bool(r.get("regex", False)),
                    )
                )
            script = ScriptTable(
                rules=tuple(rules),
                fallback=raw["fallback"],
                synthetic_latency=float(raw.get("synthetic_latency", 0.01)),
            )
        return BackendConfig(
            kind=kind,
            model_name=doc.get("model_name", "unnamed"),
            endpoint_url=doc.get("endpoint_url", ""),
            api_key_env=doc.get("api_key_env", ""),
            script=script,
            max_tokens=int(doc.get("max_tokens", 512)),
            temperature=float(doc.get("temperature", 0.0)),
            timeout_s=float(doc.get("timeout_s", 120.0)),
            retries=int(doc.get("retries", 1)),
        )

    @staticmethod
    def from_file(path: str | Path) -> "BackendConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise BackendConfigError(f"invalid backend config {path}: {exc}") from exc
        return BackendConfig.from_dict(doc)


class ScriptedBackend:
    """Deterministic rule-table backend standing in for student/teacher models.

    A rule fires when its matcher occurs in the last user message and its
    cumulative mention count (occurrences summed over all requests seen,
    including the current one) has reached `unlock_after`. With unlock_after
    <= 1 this reduces to plain presence matching; higher thresholds model a
    student that needs repeated hints before it answers correctly. Mention
    counters are guarded by a lock so concurrent calls stay consistent.
    """

    def __init__(self, config: BackendConfig):
        if config.script is None:
            raise BackendConfigError("scripted backend requires a script table")
        self.config = config
        self.backend_id = f"scripted:{config.model_name}"
        self.calls = 0
        self._mentions = [0] * len(config.script.rules)
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        script = self.config.script
        last_user = ""
        for msg in reversed(req.messages):
            if msg.role == "user":
                last_user = msg.content
                break
        with self._lock:
            self.calls += 1
            text = script.fallback
            found = [rule.occurrences(last_user) for rule in script.rules]
            for i, n in enumerate(found):
                self._mentions[i] += n
            for i, rule in enumerate(script.rules):
                if found[i] > 0 and self._mentions[i] >= max(1, rule.unlock_after):
                    text = rule.response
                    break
        return CompletionResponse(
            text=text,
            inference_duration=script.synthetic_latency,
            completion_tokens=len(text.split()),
            backend_id=self.backend_id,
        )


class EndpointBackend:
    """Chat-completion HTTP backend.

    POSTs `{model, messages, max_tokens, temperature}` to the configured URL
    and reads the reply at `choices[0].message.content`, with optional
    `usage.completion_tokens`. Construction performs no network activity.
    """

    def __init__(self, config: BackendConfig):
        parsed = urllib.parse.urlparse(config.endpoint_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise BackendConfigError(f"malformed endpoint URL {config.endpoint_url!r}")
        self._api_key = None
        if config.api_key_env:
            self._api_key = os.environ.get(config.api_key_env)
            if self._api_key is None:
                raise BackendConfigError(f"environment variable {config.api_key_env!r} is not set")
        self.config = config
        self.backend_id = f"endpoint:{config.model_name}"
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        body = {
            "model": req.model_name or self.config.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        with self._lock:
            self.calls += 1

        attempts = 1 + max(0, self.config.retries)
        last_error: Exception | None = None
        for _ in range(attempts):
            started = time.perf_counter()
            try:
                resp = httpx.post(
                    self.config.endpoint_url,
                    json=body,
                    headers=headers,
                    timeout=self.config.timeout_s,
                )
            except httpx.HTTPError as exc:
                last_error = TransportError(f"request to {self.config.endpoint_url} failed: {exc}")
                continue
            duration = time.perf_counter() - started
            if resp.status_code != 200:
                last_error = TransportError(
                    f"endpoint returned status {resp.status_code}: {resp.text[:200]}"
                )
                continue
            try:
                doc = resp.json()
                text = doc["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                last_error = TransportError(f"unexpected response shape: {exc}")
                continue
            tokens = None
            usage = doc.get("usage")
            if isinstance(usage, dict) and isinstance(usage.get("completion_tokens"), int):
                tokens = usage["completion_tokens"]
            return CompletionResponse(
                text=text,
                inference_duration=duration,
                completion_tokens=tokens,
                backend_id=self.backend_id,
            )
        raise last_error if last_error is not None else TransportError("completion failed")


Backend = ScriptedBackend | EndpointBackend


def make_backend(config: BackendConfig) -> Backend:
    """Initialize a ready-to-use backend; endpoint kind stays offline until used."""
    if config.kind == "scripted":
        return ScriptedBackend(config)
    if config.kind == "endpoint":
        return EndpointBackend(config)
    raise BackendConfigError(f"unknown backend kind {config.kind!r}")


def tokens_per_second(resp: CompletionResponse) -> Optional[float]:
    """Completion tokens per second, or None when either quantity is unknown."""
    if resp.completion_tokens is None or resp.inference_duration <= 0:
        return None
    value = resp.completion_tokens / resp.inference_duration
    return value if math.isfinite(value) else None
