"""Model gateway: chat and embedding providers behind one seam.

Everything above this module talks to `ChatGateway` and `Embedder` only,
so the whole engine runs offline against the deterministic mocks and
switches to a live OpenAI-compatible endpoint purely through
configuration. Prompts may carry `[[SCRIPT:...]]` routing tags; the mock
uses them to pick a canned reply and the HTTP provider strips them
before anything goes on the wire.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .tokens import tokenize

EMBED_DIM = 256

_SCRIPT_TAG_RE = re.compile(r"\[\[SCRIPT:([^\]]+)\]\]")
_JSON_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


class GatewayError(RuntimeError):
    """Provider failure, missing script, or unparseable model output."""


@dataclass(frozen=True)
class ChatParams:
    model: str = "default"
    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int = 2048

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature out of range: {self.temperature}")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p out of range: {self.top_p}")
        if self.max_tokens <= 0:
            raise ValueError(f"max_tokens must be positive: {self.max_tokens}")


# ---------------------------------------------------------------------------
# script tags


def script_tag(kind: str, ident: str = "") -> str:
    """Routing tag appended to mock-addressed prompts."""
    key = f"{kind}:{ident}" if ident else kind
    return f"[[SCRIPT:{key}]]"


def find_script_key(prompt: str) -> str | None:
    m = _SCRIPT_TAG_RE.search(prompt)
    return m.group(1) if m else None


def strip_script_tags(prompt: str) -> str:
    return _SCRIPT_TAG_RE.sub("", prompt).strip()


# ---------------------------------------------------------------------------
# embeddings


class Embedder(Protocol):
    embedder_id: str

    def embed(self, texts: list[str]) -> np.ndarray: ...


class HashingEmbedder:
    """Deterministic bag-of-words embedder via FNV-1a feature hashing.

    Each token is hashed into one of `dim` buckets; the count vector is
    L2-normalized. No weights, no training, fully reproducible, which is
    what the offline test path needs. Texts with no alphanumeric tokens
    hash the empty string so every output stays unit-norm.
    """

    def __init__(self, dim: int = EMBED_DIM) -> None:
        if dim <= 0:
            raise ValueError(f"dim must be positive: {dim}")
        self.dim = dim
        self.embedder_id = f"fnv1a-hash-{dim}"

    @staticmethod
    def _fnv1a(data: bytes) -> int:
        h = 0xCBF29CE484222325
        for byte in data:
            h ^= byte
            h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
        return h

    def bucket(self, token: str) -> int:
        return self._fnv1a(token.encode("utf-8")) % self.dim

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in tokenize(text) or [""]:
            vec[self.bucket(tok)] += 1.0
        return vec / np.linalg.norm(vec)

    def embed(self, texts: list[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack([self.embed_one(t) for t in texts])


# ---------------------------------------------------------------------------
# chat providers


class ChatProvider(Protocol):
    def complete(self, prompt: str, params: ChatParams) -> str: ...


class MockChatModel:
    """Scripted chat model keyed by `[[SCRIPT:key]]` tags.

    A script value is either a single reply or a list of replies consumed
    in call order (the last one repeats). Prompts without a tag fall back
    to an exact-prompt lookup. Unknown keys raise instead of improvising;
    a silent default would mask fixture wiring mistakes.
    """

    def __init__(self, scripts: dict[str, str | list[str]] | None = None) -> None:
        self._scripts: dict[str, list[str]] = {}
        self._cursor: dict[str, int] = {}
        self.calls: list[str] = []
        for key, value in (scripts or {}).items():
            self.add_script(key, value)

    @classmethod
    def from_script_file(cls, path: str) -> "MockChatModel":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def add_script(self, key: str, value: str | list[str]) -> None:
        replies = [value] if isinstance(value, str) else list(value)
        if not replies:
            raise ValueError(f"empty script for key: {key}")
        self._scripts[key] = replies
        self._cursor[key] = 0

    def complete(self, prompt: str, params: ChatParams) -> str:
        key = find_script_key(prompt)
        if key is None:
            key = prompt
        if key not in self._scripts:
            raise GatewayError(f"no script for key: {key!r}")
        self.calls.append(key)
        replies = self._scripts[key]
        idx = min(self._cursor[key], len(replies) - 1)
        self._cursor[key] += 1
        return replies[idx]


class TokenBucket:
    """Blocking rate limiter: `rate` requests per second, burst `capacity`."""

    def __init__(self, rate: float, capacity: int) -> None:
        if rate <= 0 or capacity <= 0:
            raise ValueError("rate and capacity must be positive")
        self.rate = rate
        self.capacity = float(capacity)
        self._tokens = float(capacity)
        self._stamp = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(
                    self.capacity, self._tokens + (now - self._stamp) * self.rate
                )
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


class HttpChatProvider:
    """OpenAI-compatible chat endpoint (POST {url}, chat-completions shape)."""

    def __init__(
        self,
        url: str | None = None,
        api_key: str | None = None,
        bucket: TokenBucket | None = None,
        timeout: float = 60.0,
    ) -> None:
        self.url = url or os.environ.get("THREADKB_CHAT_URL", "")
        if not self.url:
            raise GatewayError("chat endpoint not configured (THREADKB_CHAT_URL)")
        self.api_key = api_key or os.environ.get("THREADKB_API_KEY", "")
        self.bucket = bucket
        self.timeout = timeout

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def complete(self, prompt: str, params: ChatParams) -> str:
        import httpx

        if self.bucket is not None:
            self.bucket.acquire()
        payload = {
            "model": params.model,
            "messages": [{"role": "user", "content": strip_script_tags(prompt)}],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
        }
        try:
            resp = httpx.post(
                self.url, json=payload, headers=self._headers(), timeout=self.timeout
            )
            resp.raise_for_status()
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except GatewayError:
            raise
        except Exception as exc:  # noqa: BLE001 - single wrap point for the wire
            raise GatewayError(f"chat request failed: {exc}") from exc


class HttpEmbedder:
    """OpenAI-compatible embeddings endpoint; outputs are re-normalized."""

    def __init__(
        self,
        url: str | None = None,
        api_key: str | None = None,
        model: str = "default",
        timeout: float = 60.0,
    ) -> None:
        self.url = url or os.environ.get("THREADKB_EMBED_URL", "")
        if not self.url:
            raise GatewayError("embed endpoint not configured (THREADKB_EMBED_URL)")
        self.api_key = api_key or os.environ.get("THREADKB_API_KEY", "")
        self.model = model
        self.timeout = timeout
        self.embedder_id = f"http-{model}"

    def embed(self, texts: list[str]) -> np.ndarray:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = httpx.post(
                self.url,
                json={"model": self.model, "input": texts},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            rows = [item["embedding"] for item in resp.json()["data"]]
        except Exception as exc:  # noqa: BLE001
            raise GatewayError(f"embed request failed: {exc}") from exc
        mat = np.asarray(rows, dtype=np.float64)
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return mat / norms


# ---------------------------------------------------------------------------
# gateway


def extract_json(reply: str):
    """Parse the first JSON value in a reply, tolerating code fences."""
    candidates = [m.strip() for m in _JSON_FENCE_RE.findall(reply)]
    candidates.append(reply.strip())
    decoder = json.JSONDecoder()
    for text in candidates:
        for start in range(len(text)):
            if text[start] not in "[{":
                continue
            try:
                value, _ = decoder.raw_decode(text, start)
                return value
            except json.JSONDecodeError:
                continue
    raise json.JSONDecodeError("no JSON value found", reply, 0)


@dataclass
class ChatGateway:
    """Chat access point with defaulted params and a one-shot JSON repair."""

    provider: ChatProvider
    params: ChatParams = field(default_factory=ChatParams)

    def complete(self, prompt: str, params: ChatParams | None = None) -> str:
        return self.provider.complete(prompt, params or self.params)

    def complete_json(self, prompt: str, params: ChatParams | None = None):
        reply = self.complete(prompt, params)
        try:
            return extract_json(reply)
        except json.JSONDecodeError:
            pass
        retry_prompt = prompt + "\n\nReturn valid JSON only."
        reply = self.complete(retry_prompt, params)
        try:
            return extract_json(reply)
        except json.JSONDecodeError as exc:
            raise GatewayError(f"unparseable JSON after retry: {reply[:200]!r}") from exc
