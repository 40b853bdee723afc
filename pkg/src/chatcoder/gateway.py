"""Uniform chat-completion access: live OpenAI-compatible HTTP, record, replay.

Cassettes are JSON-lines files keyed by a request fingerprint so that any
recorded run can be replayed deterministically with zero network use.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import InvalidConfig, ProviderError, ProviderTimeout, ReplayMiss
from .prompts import PromptBundle

logger = logging.getLogger(__name__)

LIVE = "live"
REPLAY = "replay"
RECORD = "record"

API_KEY_ENV = "CHATCODER_API_KEY"


@dataclass(frozen=True)
class ModelConfig:
    provider: str = REPLAY  # live | replay | record
    model_name: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    top_p: float = 1.0
    n_samples: int = 1
    max_tokens: int = 1024
    stop: tuple[str, ...] = ()
    timeout_s: float = 60.0
    base_url: str = "https://api.openai.com"
    cassette_path: str | None = None

    def __post_init__(self):
        if self.provider not in (LIVE, REPLAY, RECORD):
            raise InvalidConfig(f"unknown provider {self.provider!r}")
        if self.provider in (REPLAY, RECORD) and not self.cassette_path:
            raise InvalidConfig(f"{self.provider} provider requires cassette_path")
        if self.n_samples < 1:
            raise InvalidConfig("n_samples must be >= 1")
        if self.temperature < 0:
            raise InvalidConfig("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise InvalidConfig("top_p must be in (0, 1]")

    def digest(self) -> str:
        doc = {
            "model_name": self.model_name,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "stop": list(self.stop),
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def fingerprint(
    messages: list[dict], model_name: str, temperature: float, top_p: float,
    max_tokens: int, sample_index: int,
) -> str:
    doc = {
        "messages": messages,
        "model_name": model_name,
        "temperature": temperature,
        "top_p": top_p,
        "max_tokens": max_tokens,
        "sample_index": sample_index,
    }
    return hashlib.sha256(
        json.dumps(doc, sort_keys=True, ensure_ascii=False).encode("utf-8")
    ).hexdigest()


class Cassette:
    """JSON-lines store of recorded replies, keyed by request fingerprint."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._replies: dict[str, list[str]] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                record = json.loads(line)
                self._replies.setdefault(record["fingerprint"], []).append(record["reply"])

    def lookup(self, fp: str) -> list[str] | None:
        return self._replies.get(fp)

    def append(self, fp: str, request_inputs: dict, reply: str) -> None:
        with self._lock:
            if reply in self._replies.get(fp, []):
                return  # a retry must never duplicate a recorded reply
            self._replies.setdefault(fp, []).append(reply)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            record = {
                "fingerprint": fp,
                "request_digest_inputs": request_inputs,
                "reply": reply,
                "created_at": datetime.now(timezone.utc).isoformat(),
            }
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")


class TokenBucket:
    """Simple per-gateway rate limiter."""

    def __init__(self, rate_per_s: float, capacity: int):
        self.rate = rate_per_s
        self.capacity = capacity
        self.tokens = float(capacity)
        self.updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            time.sleep(wait)


RETRY_BUDGET = 5
BACKOFF_BASE_S = 2.0


def _http_transport(config: ModelConfig, messages: list[dict]) -> str:
    """One OpenAI-compatible /v1/chat/completions call returning reply text."""
    import requests

    url = config.base_url.rstrip("/") + "/v1/chat/completions"
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(API_KEY_ENV)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "model": config.model_name,
        "messages": messages,
        "temperature": config.temperature,
        "top_p": config.top_p,
        "max_tokens": config.max_tokens,
        "n": 1,
    }
    if config.stop:
        body["stop"] = list(config.stop)
    try:
        response = requests.post(url, json=body, headers=headers, timeout=config.timeout_s)
    except requests.Timeout as exc:
        raise ProviderTimeout(str(exc)) from exc
    if response.status_code == 429 or response.status_code >= 500:
        raise ProviderError(f"transient provider failure: HTTP {response.status_code}")
    if response.status_code != 200:
        raise ProviderError(f"provider rejected request: HTTP {response.status_code}: {response.text[:500]}")
    payload = response.json()
    return payload["choices"][0]["message"]["content"]


@dataclass
class GatewayStats:
    calls: int = 0
    network_calls: int = 0
    retries: int = 0


class ChatGateway:
    """Shareable chat-completion client over one provider configuration.

    `transport` is the single-request function used for live/record traffic;
    tests inject stubs here, and the replay provider never touches it.
    """

    def __init__(self, config: ModelConfig, transport=None, sleep=time.sleep,
                 rate_per_s: float = 10.0):
        self.config = config
        self.transport = transport or _http_transport
        self.sleep = sleep
        self.stats = GatewayStats()
        self._bucket = TokenBucket(rate_per_s, capacity=max(1, int(rate_per_s)))
        self.cassette: Cassette | None = None
        if config.cassette_path:
            self.cassette = Cassette(config.cassette_path)

    def _request_inputs(self, messages: list[dict], sample_index: int) -> dict:
        return {
            "model_name": self.config.model_name,
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
            "max_tokens": self.config.max_tokens,
            "sample_index": sample_index,
            "messages_digest": hashlib.sha256(
                json.dumps(messages, sort_keys=True, ensure_ascii=False).encode()
            ).hexdigest()[:16],
        }

    def _call_with_retry(self, messages: list[dict]) -> str:
        last_error: Exception | None = None
        for attempt in range(RETRY_BUDGET):
            self._bucket.acquire()
            try:
                self.stats.network_calls += 1
                return self.transport(self.config, messages)
            except ProviderTimeout:
                raise
            except ProviderError as exc:
                last_error = exc
                if "rejected" in str(exc):
                    raise
                self.stats.retries += 1
                if attempt < RETRY_BUDGET - 1:
                    self.sleep(BACKOFF_BASE_S * (2**attempt))
        raise ProviderError(f"retry budget exhausted: {last_error}")

    def complete(self, bundle: PromptBundle, n: int = 1) -> list[str]:
        if not bundle.messages:
            raise InvalidConfig("empty prompt bundle")
        if n < 1 or n > self.config.n_samples:
            raise InvalidConfig(f"n={n} outside [1, {self.config.n_samples}]")
        self.stats.calls += 1
        messages = [{"role": m.role, "content": m.content} for m in bundle.messages]
        cfg = self.config
        replies: list[str] = []
        for index in range(n):
            fp = fingerprint(messages, cfg.model_name, cfg.temperature, cfg.top_p,
                             cfg.max_tokens, index)
            if cfg.provider == REPLAY:
                recorded = self.cassette.lookup(fp)
                if not recorded:
                    raise ReplayMiss(fp)
                replies.append(recorded[0])
                continue
            recorded = self.cassette.lookup(fp) if self.cassette else None
            if cfg.provider == RECORD and recorded:
                replies.append(recorded[0])  # already recorded: reuse, no re-ask
                continue
            reply = self._call_with_retry(messages)
            if cfg.provider == RECORD:
                self.cassette.append(fp, self._request_inputs(messages, index), reply)
            replies.append(reply)
        return replies
