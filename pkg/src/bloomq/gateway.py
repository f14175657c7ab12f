"""Provider-agnostic chat-completion client with retries and replay cassettes.

Requests are keyed by a content digest so a recorded run replays byte-for-byte
regardless of completion order. Replay mode never touches the network; record
mode performs each distinct request once and persists it. Credentials come
from per-provider environment variables and are never written to cassettes.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .prompts import PromptText

MODE_RECORD = "record"
MODE_REPLAY = "replay"
MODE_PASSTHROUGH = "passthrough"

SOURCE_LIVE = "live"
SOURCE_CASSETTE = "cassette"


class GatewayError(Exception):
    pass


class CassetteMiss(GatewayError):
    pass


class ProviderError(GatewayError):
    pass


class Timeout(ProviderError):
    pass


class TransientProviderError(GatewayError):
    """Retryable transport or rate-limit failure; never escapes the gateway."""

    def __init__(self, message: str, timed_out: bool = False):
        super().__init__(message)
        self.timed_out = timed_out


@dataclass(frozen=True)
class CompletionRequest:
    provider_id: str
    model_id: str
    prompt: PromptText
    temperature: float
    max_tokens: int = 512

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    @property
    def request_digest(self) -> str:
        """Stable content hash; a pure function of the request fields."""
        payload = json.dumps(
            [
                self.provider_id,
                self.model_id,
                self.prompt.system_part or "",
                self.prompt.user_part,
                repr(float(self.temperature)),
                self.max_tokens,
            ],
            ensure_ascii=False,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CompletionResult:
    text: str
    provider_meta: dict = field(default_factory=dict)
    latency_ms: int = 0
    source: str = SOURCE_LIVE


class Cassette:
    """Digest-keyed response store backed by an append-only JSONL file."""

    def __init__(self, path: str | Path | None, mode: str):
        if mode not in (MODE_RECORD, MODE_REPLAY, MODE_PASSTHROUGH):
            raise ValueError(f"unknown cassette mode: {mode!r}")
        if mode != MODE_PASSTHROUGH and path is None:
            raise ValueError(f"{mode} mode requires a cassette path")
        self.path = Path(path) if path is not None else None
        self.mode = mode
        self._entries: dict[str, str] = {}
        self._write_lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with self.path.open("r", encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    entry = json.loads(line)
                    self._entries[entry["digest"]] = entry["text"]

    @classmethod
    def open(cls, path: str | Path | None, mode: str) -> Cassette:
        return cls(path, mode)

    def __contains__(self, digest: str) -> bool:
        return digest in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, digest: str) -> str:
        return self._entries[digest]

    def put(self, digest: str, model_id: str, text: str) -> None:
        with self._write_lock:
            if digest in self._entries:
                return
            self._entries[digest] = text
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(
                    json.dumps(
                        {"digest": digest, "model_id": model_id, "text": text},
                        ensure_ascii=False,
                    )
                    + "\n"
                )


class Provider(Protocol):
    def send(self, request: CompletionRequest) -> str: ...


@dataclass(frozen=True)
class ProviderSpec:
    """Config entry mapping a provider id onto a chat-completion endpoint."""

    provider_id: str
    base_url: str
    auth_env: str
    timeout_s: float = 60.0

    def to_json_dict(self) -> dict:
        return {
            "base_url": self.base_url,
            "auth_env": self.auth_env,
            "timeout_s": self.timeout_s,
        }

    @classmethod
    def from_json_dict(cls, provider_id: str, data: dict) -> ProviderSpec:
        return cls(
            provider_id=provider_id,
            base_url=data["base_url"],
            auth_env=data["auth_env"],
            timeout_s=float(data.get("timeout_s", 60.0)),
        )


class HttpChatProvider:
    """Thin adapter speaking the common chat-completion wire shape."""

    def __init__(self, spec: ProviderSpec, client: httpx.Client | None = None):
        self.spec = spec
        self._client = client or httpx.Client(timeout=spec.timeout_s)

    def send(self, request: CompletionRequest) -> str:
        token = os.environ.get(self.spec.auth_env)
        if not token:
            raise ProviderError(
                f"credentials for provider {self.spec.provider_id!r} not found in "
                f"env var {self.spec.auth_env}"
            )
        messages = []
        if request.prompt.system_part:
            messages.append({"role": "system", "content": request.prompt.system_part})
        messages.append({"role": "user", "content": request.prompt.user_part})
        try:
            response = self._client.post(
                self.spec.base_url.rstrip("/") + "/chat/completions",
                headers={"Authorization": f"Bearer {token}"},
                json={
                    "model": request.model_id,
                    "messages": messages,
                    "temperature": request.temperature,
                    "max_tokens": request.max_tokens,
                },
            )
        except httpx.TimeoutException as exc:
            raise TransientProviderError(str(exc), timed_out=True) from exc
        except httpx.TransportError as exc:
            raise TransientProviderError(str(exc)) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientProviderError(f"HTTP {response.status_code}")
        if response.status_code >= 400:
            raise ProviderError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"malformed completion payload: {exc}") from exc


class Gateway:
    """Shared completion front door: cassette logic, retries, concurrency caps."""

    def __init__(
        self,
        providers: dict[str, Provider] | None = None,
        max_attempts: int = 3,
        backoff_base_s: float = 0.5,
        concurrency: int = 4,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.providers = dict(providers or {})
        self.max_attempts = max_attempts
        self.backoff_base_s = backoff_base_s
        self.concurrency = concurrency
        self._sleep = sleep
        self._semaphores: dict[str, threading.Semaphore] = {}
        self._sem_lock = threading.Lock()

    @classmethod
    def from_specs(cls, specs: dict[str, ProviderSpec], **kwargs) -> Gateway:
        providers = {pid: HttpChatProvider(spec) for pid, spec in specs.items()}
        return cls(providers=providers, **kwargs)

    def _semaphore(self, provider_id: str) -> threading.Semaphore:
        with self._sem_lock:
            if provider_id not in self._semaphores:
                self._semaphores[provider_id] = threading.Semaphore(self.concurrency)
            return self._semaphores[provider_id]

    def complete(self, request: CompletionRequest, cassette: Cassette) -> CompletionResult:
        digest = request.request_digest
        if cassette.mode == MODE_REPLAY:
            if digest not in cassette:
                raise CassetteMiss(f"no cassette entry for digest {digest}")
            return CompletionResult(text=cassette.get(digest), source=SOURCE_CASSETTE)

        if cassette.mode == MODE_RECORD and digest in cassette:
            return CompletionResult(text=cassette.get(digest), source=SOURCE_CASSETTE)

        text, latency_ms = self._call_live(request)
        if cassette.mode == MODE_RECORD:
            cassette.put(digest, request.model_id, text)
        return CompletionResult(text=text, latency_ms=latency_ms, source=SOURCE_LIVE)

    def _call_live(self, request: CompletionRequest) -> tuple[str, int]:
        provider = self.providers.get(request.provider_id)
        if provider is None:
            raise ProviderError(f"no provider registered for id {request.provider_id!r}")
        semaphore = self._semaphore(request.provider_id)
        attempt = 1
        while True:
            started = time.monotonic()
            try:
                with semaphore:
                    text = provider.send(request)
                return text, int((time.monotonic() - started) * 1000)
            except TransientProviderError as exc:
                if attempt >= self.max_attempts:
                    if exc.timed_out:
                        raise Timeout(
                            f"{request.provider_id}: timed out after {attempt} attempts"
                        ) from exc
                    raise ProviderError(
                        f"{request.provider_id}: failed after {attempt} attempts: {exc}"
                    ) from exc
                self._sleep(self.backoff_base_s * (2 ** (attempt - 1)))
                attempt += 1
