"""Chat-completion client for OpenAI-compatible endpoints.

Greedy decoding only (temperature pinned to 0), bounded retries with
exponential backoff on transport errors and 5xx/429, and a content-addressed
on-disk response cache keyed by the request payload so grids can be replayed
offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import httpx

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 3
BACKOFF_START_SECONDS = 1.0
RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class EndpointError(Exception):
    """Transport failure or repeated server-side errors."""


class ConfigurationError(Exception):
    """The endpoint rejected the request (4xx); retrying would not help."""


class ContextOverflowError(Exception):
    """The prompt exceeded the model context window."""

    def __init__(self, message: str, prompt_length: int):
        super().__init__(message)
        self.prompt_length = prompt_length


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key_env: str = ""
    timeout: float = 60.0
    max_new_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout}")
        if self.max_new_tokens <= 0:
            raise ValueError(f"max_new_tokens must be > 0, got {self.max_new_tokens}")

    def api_key(self) -> str:
        return os.environ.get(self.api_key_env, "") if self.api_key_env else ""


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    temperature: float = 0.0
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.temperature != 0.0:
            raise ValueError("greedy decoding only: temperature must be 0")


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    finish_reason: str
    latency_ms: int
    cached: bool = False


def _wire_payload(cfg: EndpointConfig, req: GenerationRequest) -> dict:
    payload = {
        "model": cfg.model_name,
        "messages": [{"role": "user", "content": req.prompt}],
        "temperature": 0,
        "max_tokens": cfg.max_new_tokens,
    }
    if req.seed is not None:
        payload["seed"] = req.seed
    return payload


def complete(
    cfg: EndpointConfig,
    req: GenerationRequest,
    *,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> GenerationResponse:
    """One chat completion round-trip, with retries on transient failures."""
    url = cfg.base_url.rstrip("/") + "/v1/chat/completions"
    headers = {"Content-Type": "application/json"}
    key = cfg.api_key()
    if key:
        headers["Authorization"] = f"Bearer {key}"
    payload = _wire_payload(cfg, req)

    last_error: Exception | None = None
    started = time.monotonic()
    with httpx.Client(timeout=cfg.timeout, transport=transport) as client:
        for attempt in range(MAX_ATTEMPTS):
            if attempt:
                sleep(BACKOFF_START_SECONDS * 2 ** (attempt - 1))
            try:
                response = client.post(url, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                logger.warning("attempt %d/%d transport error: %r", attempt + 1, MAX_ATTEMPTS, exc)
                continue
            if response.status_code in RETRYABLE_STATUS:
                last_error = EndpointError(f"HTTP {response.status_code}: {response.text[:200]}")
                logger.warning(
                    "attempt %d/%d got HTTP %d", attempt + 1, MAX_ATTEMPTS, response.status_code
                )
                continue
            if 400 <= response.status_code < 500:
                body = response.text
                if "context" in body.lower() and (
                    "length" in body.lower() or "token" in body.lower()
                ):
                    raise ContextOverflowError(
                        f"HTTP {response.status_code}: {body[:200]}",
                        prompt_length=len(req.prompt),
                    )
                raise ConfigurationError(f"HTTP {response.status_code}: {body[:200]}")
            if not response.is_success:
                raise EndpointError(f"unexpected HTTP {response.status_code}")
            latency_ms = int((time.monotonic() - started) * 1000)
            return _parse_completion(response, latency_ms)

    raise EndpointError(f"request failed after {MAX_ATTEMPTS} attempts: {last_error}")


def _parse_completion(response: httpx.Response, latency_ms: int) -> GenerationResponse:
    try:
        body = response.json()
        choice = body["choices"][0]
        text = choice["message"]["content"]
        finish_reason = choice.get("finish_reason") or "stop"
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise EndpointError(f"malformed completion payload: {exc}") from exc
    if text is None:
        raise EndpointError("completion payload has null content")
    return GenerationResponse(text=text, finish_reason=finish_reason, latency_ms=latency_ms)


def cache_key(cfg: EndpointConfig, req: GenerationRequest) -> str:
    """Digest of everything that determines a greedy response."""
    material = json.dumps(
        {
            "model": cfg.model_name,
            "prompt": req.prompt,
            "temperature": req.temperature,
            "max_new_tokens": cfg.max_new_tokens,
            "seed": req.seed,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


class ResponseCache:
    """One JSON record per key on disk, written atomically.

    Each record echoes the full request next to the response so cached runs
    can be audited and replayed offline. Concurrent writers of the same key
    are safe: identical keys imply identical payloads under greedy decoding,
    and divergent payloads are logged, last writer wins.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> GenerationResponse | None:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
            stored = record["response"]
            return GenerationResponse(
                text=stored["text"],
                finish_reason=stored["finish_reason"],
                latency_ms=int(stored["latency_ms"]),
                cached=True,
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            logger.warning("discarding corrupt cache entry %s: %r", path.name, exc)
            path.unlink(missing_ok=True)
            return None

    def put(
        self,
        key: str,
        cfg: EndpointConfig,
        req: GenerationRequest,
        response: GenerationResponse,
    ) -> None:
        existing = self.get(key)
        if existing is not None and existing.text != response.text:
            logger.warning("divergent payloads for cache key %s; overwriting", key)
        record = {
            "key": key,
            "request": {
                "model": cfg.model_name,
                "prompt": req.prompt,
                "temperature": req.temperature,
                "max_new_tokens": cfg.max_new_tokens,
                "seed": req.seed,
            },
            "response": {
                "text": response.text,
                "finish_reason": response.finish_reason,
                "latency_ms": response.latency_ms,
            },
        }
        fd, tmp_name = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record, fh, ensure_ascii=False)
            os.replace(tmp_name, self._path(key))
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise


def complete_cached(
    cfg: EndpointConfig,
    req: GenerationRequest,
    cache: ResponseCache,
    *,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> GenerationResponse:
    """complete() behind the response cache; hits make no network call."""
    key = cache_key(cfg, req)
    hit = cache.get(key)
    if hit is not None:
        return hit
    response = complete(cfg, req, transport=transport, sleep=sleep)
    cache.put(key, cfg, req, response)
    return response
