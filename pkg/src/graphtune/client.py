"""Chat-completion clients: OpenAI-compatible HTTP with disk cache, plus mocks.

Every client shares the same contract: ``complete`` returns the assistant
text for one request, ``complete_batch`` runs many requests with bounded
concurrency and per-item error capture. Responses are cached on disk by a
content hash of (model, messages, temperature) when a cache directory is
configured, so repeated runs are free and deterministic.
"""

from __future__ import annotations

import json
import hashlib
import logging
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import requests

from .errors import EndpointError, TransportError

logger = logging.getLogger(__name__)

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass
class GenerationRequest:
    """One chat completion call."""

    messages: list[dict[str, str]]
    temperature: float = 0.0
    max_tokens: int | None = None
    model: str = ""

    def __post_init__(self):
        if not any(m.get("role") == "user" for m in self.messages):
            raise ValueError("request must contain at least one user message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")

    @property
    def cache_key(self) -> str:
        payload = json.dumps(
            {
                "model": self.model,
                "messages": self.messages,
                "temperature": self.temperature,
            },
            sort_keys=True,
            ensure_ascii=False,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def last_user_content(self) -> str:
        for message in reversed(self.messages):
            if message.get("role") == "user":
                return message.get("content", "")
        return ""


@dataclass
class ClientConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = "default"
    auth_env: str = "OPENAI_API_KEY"
    max_concurrent: int = 4
    retries: int = 2
    backoff: float = 0.5
    cache_dir: str | None = None
    timeout: float = 120.0


@dataclass
class BatchResult:
    index: int
    text: str | None = None
    error: str | None = None


class ChatClient:
    """Shared cache and batching logic; subclasses implement the call."""

    def __init__(self, model: str, max_concurrent: int, cache_dir: str | None = None):
        self.model = model
        self.max_concurrent = max(1, max_concurrent)
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)

    def make_request(
        self,
        messages: list[dict[str, str]],
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> GenerationRequest:
        return GenerationRequest(
            messages=messages,
            temperature=temperature,
            max_tokens=max_tokens,
            model=self.model,
        )

    def complete(self, request: GenerationRequest, refresh: bool = False) -> str:
        """Return the assistant text, consulting the disk cache first.

        ``refresh=True`` bypasses the cached entry (used to resample a
        malformed generation) and overwrites it with the new response.
        """
        key = request.cache_key
        if not refresh:
            cached = self._cache_get(key)
            if cached is not None:
                return cached
        text = self._complete_uncached(request)
        self._cache_put(key, request, text)
        return text

    def complete_batch(self, requests_: list[GenerationRequest]) -> list[BatchResult]:
        """Run requests concurrently; duplicates are sent upstream once."""
        groups: dict[str, list[int]] = {}
        for index, request in enumerate(requests_):
            groups.setdefault(request.cache_key, []).append(index)
        unique = [(key, requests_[positions[0]]) for key, positions in groups.items()]
        outcomes: dict[str, BatchResult] = {}

        def run(item):
            key, request = item
            try:
                return key, BatchResult(index=-1, text=self.complete(request))
            except Exception as exc:  # per-item capture, batch keeps going
                return key, BatchResult(
                    index=-1, error=f"{type(exc).__name__}: {exc}"
                )

        if unique:
            workers = min(self.max_concurrent, len(unique))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for key, outcome in pool.map(run, unique):
                    outcomes[key] = outcome
        results = []
        for index, request in enumerate(requests_):
            outcome = outcomes[request.cache_key]
            results.append(
                BatchResult(index=index, text=outcome.text, error=outcome.error)
            )
        return results

    def _complete_uncached(self, request: GenerationRequest) -> str:
        raise NotImplementedError

    def _cache_path(self, key: str) -> Path | None:
        return self.cache_dir / f"{key}.json" if self.cache_dir else None

    def _cache_get(self, key: str) -> str | None:
        path = self._cache_path(key)
        if not path or not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))["text"]
        except (ValueError, KeyError):
            logger.warning("dropping unreadable cache entry %s", path)
            return None

    def _cache_put(self, key: str, request: GenerationRequest, text: str) -> None:
        path = self._cache_path(key)
        if not path:
            return
        payload = json.dumps(
            {"model": request.model, "temperature": request.temperature, "text": text},
            ensure_ascii=False,
        )
        # write-then-rename keeps concurrent readers from seeing partial files
        handle = tempfile.NamedTemporaryFile(
            "w", dir=path.parent, suffix=".tmp", delete=False, encoding="utf-8"
        )
        try:
            handle.write(payload)
            handle.close()
            os.replace(handle.name, path)
        except OSError:
            handle.close()
            if os.path.exists(handle.name):
                os.unlink(handle.name)
            raise


class OpenAIChatClient(ChatClient):
    """Talks to an OpenAI-compatible /chat/completions endpoint."""

    def __init__(self, config: ClientConfig, session: requests.Session | None = None):
        super().__init__(config.model, config.max_concurrent, config.cache_dir)
        self.config = config
        self._session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.auth_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _complete_uncached(self, request: GenerationRequest) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        payload: dict = {
            "model": request.model or self.config.model,
            "messages": request.messages,
            "temperature": request.temperature,
        }
        if request.max_tokens is not None:
            payload["max_tokens"] = request.max_tokens
        attempts = self.config.retries + 1
        last_failure = ""
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.config.backoff * (2 ** (attempt - 1)))
            try:
                response = self._session.post(
                    url,
                    json=payload,
                    headers=self._headers(),
                    timeout=self.config.timeout,
                )
            except requests.RequestException as exc:
                last_failure = str(exc)
                logger.warning("request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code == 200:
                return self._extract_text(response)
            if response.status_code in RETRYABLE_STATUSES:
                last_failure = f"status {response.status_code}"
                logger.warning(
                    "retryable status %d (attempt %d)",
                    response.status_code,
                    attempt + 1,
                )
                continue
            raise EndpointError(response.status_code, response.text)
        raise TransportError(
            f"gave up after {attempts} attempts: {last_failure or 'no response'}"
        )

    @staticmethod
    def _extract_text(response) -> str:
        try:
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise EndpointError(response.status_code, response.text) from None


class MockChatClient(ChatClient):
    """Deterministic in-process client for offline runs and tests.

    Responses come from ``canned`` (exact match on the last user message)
    or from a ``handler`` callable. Calls are recorded, and peak in-flight
    concurrency is tracked so tests can assert the batching bound.
    """

    def __init__(
        self,
        handler: Callable[[GenerationRequest], str] | None = None,
        canned: dict[str, str] | None = None,
        model: str = "mock",
        max_concurrent: int = 8,
        cache_dir: str | None = None,
        latency: float = 0.0,
    ):
        super().__init__(model, max_concurrent, cache_dir)
        self.handler = handler
        self.canned = dict(canned or {})
        self.latency = latency
        self.calls: list[GenerationRequest] = []
        self.max_inflight = 0
        self._inflight = 0
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def _complete_uncached(self, request: GenerationRequest) -> str:
        with self._lock:
            self.calls.append(request)
            self._inflight += 1
            self.max_inflight = max(self.max_inflight, self._inflight)
        try:
            if self.latency:
                time.sleep(self.latency)
            content = request.last_user_content()
            if content in self.canned:
                return self.canned[content]
            if self.handler is not None:
                return self.handler(request)
            raise EndpointError(404, f"no canned response for: {content[:80]}")
        finally:
            with self._lock:
                self._inflight -= 1
