"""HTTP clients for text generation and embeddings.

Wire protocol (JSON over POST, ``Authorization: Bearer <key>`` when a key is
configured):

* ``POST {base_url}/generate`` with ``{"model", "prompt", "generation": {...}}``
  -> ``{"text": "..."}``.  The ``generation`` object carries the decoding
  knobs verbatim (num_beams, do_sample, length_penalty, early_stopping,
  repetition_penalty, max_new_tokens, strategy, seed).
* Fallback for servers that reject the extended fields:
  ``POST {base_url}/v1/completions`` with ``{"model", "prompt",
  "temperature": 0, "best_of": num_beams, "max_tokens": ...}`` ->
  ``{"choices": [{"text": "..."}]}``.  This beam approximation is marked in
  the logs because it is not equivalent to native beam search.
* ``POST {base_url}/v1/embeddings`` with ``{"model", "input": [text]}`` ->
  ``{"data": [{"embedding": [...]}]}``.
* ``POST {base_url}/embed_tokens`` with ``{"model", "text"}`` ->
  ``{"tokens": [...], "embeddings": [[...], ...]}``.

Responses are cached in an append-only JSON-lines file keyed by a stable
hash of (operation, model, request body), so interrupted runs resume without
re-querying.  Requests run with a bounded number of in-flight calls and are
reassembled into input order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Sequence

import requests

from .errors import BadResponse, DimensionMismatch, EmptyInput, EndpointUnreachable
from .util import canonical_json

logger = logging.getLogger(__name__)

API_KEY_ENV_VAR = "DEFGEN_API_KEY"


class DecodingStrategy(str, Enum):
    BEAM = "beam"
    GREEDY = "greedy"
    SAMPLING = "sampling"
    BEAM_SAMPLING = "beam_sampling"
    CONTRASTIVE = "contrastive"


@dataclass(frozen=True)
class GenerationConfig:
    """Decoding parameters sent to the generation endpoint."""

    num_beams: int = 5
    do_sample: bool = False
    length_penalty: float = 1.1
    early_stopping: bool = True
    repetition_penalty: float = 1.1
    max_new_tokens: int = 64
    strategy: DecodingStrategy = DecodingStrategy.BEAM
    seed: int | None = None

    def __post_init__(self):
        if self.num_beams < 1:
            raise ValueError("num_beams must be >= 1")
        if self.length_penalty <= 0:
            raise ValueError("length_penalty must be > 0")
        if self.repetition_penalty < 1:
            raise ValueError("repetition_penalty must be >= 1")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")

    def as_payload(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "num_beams": self.num_beams,
            "do_sample": self.do_sample,
            "length_penalty": self.length_penalty,
            "early_stopping": self.early_stopping,
            "repetition_penalty": self.repetition_penalty,
            "max_new_tokens": self.max_new_tokens,
            "strategy": self.strategy.value,
        }
        if self.seed is not None:
            payload["seed"] = self.seed
        return payload


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    max_in_flight: int = 4
    retry_backoff: float = 0.5

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

    def resolved_api_key(self) -> str | None:
        return self.api_key or os.environ.get(API_KEY_ENV_VAR)


@dataclass(frozen=True)
class EmbeddingVector:
    """A fixed-length vector of finite reals; iterable like a plain sequence."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("embedding must have at least one component")
        if any(not math.isfinite(v) for v in self.values):
            raise ValueError("embedding components must be finite")

    @property
    def dimension(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, index):
        return self.values[index]


class ResponseCache:
    """Append-only JSON-lines response cache; concurrent reads, serialized appends."""

    def __init__(self, path: str | Path | None):
        self._path = Path(path) if path is not None else None
        self._entries: dict[str, Any] = {}
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            with self._path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    entry = json.loads(line)
                    self._entries[entry["key"]] = entry["response"]

    @staticmethod
    def key_for(operation: str, model: str, body: dict[str, Any]) -> str:
        material = canonical_json({"op": operation, "model": model, "body": body})
        return hashlib.sha256(material.encode("utf-8")).hexdigest()

    def get(self, key: str) -> Any | None:
        return self._entries.get(key)

    def put(self, key: str, response: Any) -> None:
        with self._lock:
            self._entries[key] = response
            if self._path is not None:
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write(canonical_json({"key": key, "response": response}) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class ClientStats:
    requests: int = 0
    retries: int = 0
    cache_hits: int = 0
    failures: int = 0

    def merge_locked(self, lock: threading.Lock, **deltas: int) -> None:
        with lock:
            for name, delta in deltas.items():
                setattr(self, name, getattr(self, name) + delta)


class InferenceClient:
    """Shared machinery: retries, caching, bounded concurrency, order preservation."""

    def __init__(self, endpoint: EndpointConfig, cache: ResponseCache | None = None):
        self.endpoint = endpoint
        self.cache = cache if cache is not None else ResponseCache(None)
        self.stats = ClientStats()
        self._stats_lock = threading.Lock()
        self._session_local = threading.local()

    def _session(self) -> requests.Session:
        session = getattr(self._session_local, "session", None)
        if session is None:
            session = requests.Session()
            self._session_local.session = session
        return session

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = self.endpoint.resolved_api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post_with_retries(self, path: str, body: dict[str, Any]) -> Any:
        """POST, retrying on connection errors and 5xx; returns decoded JSON."""
        url = self.endpoint.base_url.rstrip("/") + path
        last_error: Exception | None = None
        for attempt in range(self.endpoint.max_retries + 1):
            if attempt > 0:
                self.stats.merge_locked(self._stats_lock, retries=1)
                time.sleep(self.endpoint.retry_backoff * attempt)
            try:
                self.stats.merge_locked(self._stats_lock, requests=1)
                response = self._session().post(
                    url,
                    data=json.dumps(body).encode("utf-8"),
                    headers=self._headers(),
                    timeout=self.endpoint.timeout,
                )
            except requests.RequestException as exc:
                last_error = EndpointUnreachable(f"POST {url}: {exc}")
                continue
            if response.status_code >= 500:
                last_error = EndpointUnreachable(
                    f"POST {url}: server error {response.status_code}"
                )
                continue
            if response.status_code >= 400:
                raise BadResponse(
                    f"POST {url}: status {response.status_code}: {response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise BadResponse(f"POST {url}: non-JSON response") from exc
        assert last_error is not None
        raise last_error

    def _cached_call(self, operation: str, path: str, body: dict[str, Any]) -> Any:
        key = ResponseCache.key_for(operation, self.endpoint.model_name, body)
        cached = self.cache.get(key)
        if cached is not None:
            self.stats.merge_locked(self._stats_lock, cache_hits=1)
            return cached
        response = self._post_with_retries(path, body)
        self.cache.put(key, response)
        return response

    def _map_ordered(self, items: Sequence[Any], fn: Callable[[Any], Any]) -> list[Any]:
        """Apply ``fn`` with at most max_in_flight concurrent calls, preserving order."""
        if len(items) == 1 or self.endpoint.max_in_flight == 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.endpoint.max_in_flight) as pool:
            return list(pool.map(fn, items))


class GenerationClient(InferenceClient):
    def __init__(self, endpoint: EndpointConfig, cache: ResponseCache | None = None):
        super().__init__(endpoint, cache)
        self._fallback_mode = False

    def generate(
        self, prompts: Sequence[str], gen: GenerationConfig
    ) -> list[str | None]:
        """One generated text per prompt, in input order; None marks a failed item."""
        if not prompts:
            raise EmptyInput("prompts must be non-empty")

        def one(prompt: str) -> str | None:
            try:
                response = self._generate_once(prompt, gen)
            except (EndpointUnreachable, BadResponse) as exc:
                self.stats.merge_locked(self._stats_lock, failures=1)
                logger.warning("generation failed: %s", exc)
                return None
            text = self._extract_text(response)
            if text is None:
                self.stats.merge_locked(self._stats_lock, failures=1)
                logger.warning("generation response missing text field: %r", response)
                return None
            return text.strip()

        return self._map_ordered(list(prompts), one)

    def _generate_once(self, prompt: str, gen: GenerationConfig) -> Any:
        if not self._fallback_mode:
            body = {
                "model": self.endpoint.model_name,
                "prompt": prompt,
                "generation": gen.as_payload(),
            }
            try:
                return self._cached_call("generate", "/generate", body)
            except BadResponse as exc:
                logger.warning(
                    "native generate endpoint rejected the request (%s); "
                    "falling back to the completions shape (approximate beam search)",
                    exc,
                )
                self._fallback_mode = True
        fallback_body = {
            "model": self.endpoint.model_name,
            "prompt": prompt,
            "temperature": 0.0,
            "best_of": gen.num_beams,
            "max_tokens": gen.max_new_tokens,
        }
        if gen.seed is not None:
            fallback_body["seed"] = gen.seed
        return self._cached_call("generate", "/v1/completions", fallback_body)

    @staticmethod
    def _extract_text(response: Any) -> str | None:
        if isinstance(response, dict):
            if isinstance(response.get("text"), str):
                return response["text"]
            choices = response.get("choices")
            if isinstance(choices, list) and choices:
                first = choices[0]
                if isinstance(first, dict) and isinstance(first.get("text"), str):
                    return first["text"]
        return None


class EmbeddingClient(InferenceClient):
    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        """Sentence embeddings in input order; duplicate texts embed once."""
        if not texts:
            raise EmptyInput("texts must be non-empty")
        unique = list(dict.fromkeys(texts))

        def one(text: str) -> EmbeddingVector:
            body = {"model": self.endpoint.model_name, "input": [text]}
            response = self._cached_call("embed", "/v1/embeddings", body)
            try:
                values = response["data"][0]["embedding"]
                return EmbeddingVector(values=tuple(float(v) for v in values))
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise BadResponse(f"malformed embedding response: {exc}") from exc

        by_text = dict(zip(unique, self._map_ordered(unique, one)))
        vectors = [by_text[text] for text in texts]
        dims = {v.dimension for v in vectors}
        if len(dims) > 1:
            raise DimensionMismatch(f"endpoint returned mixed dimensions {sorted(dims)}")
        return vectors

    def embed_tokens(self, text: str) -> tuple[list[str], list[EmbeddingVector]]:
        """Tokens of ``text`` with one contextual embedding per token."""
        if not text:
            raise EmptyInput("text must be non-empty")
        body = {"model": self.endpoint.model_name, "text": text}
        response = self._cached_call("embed_tokens", "/embed_tokens", body)
        try:
            tokens = [str(t) for t in response["tokens"]]
            vectors = [
                EmbeddingVector(values=tuple(float(v) for v in vec))
                for vec in response["embeddings"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise BadResponse(f"malformed token-embedding response: {exc}") from exc
        if not tokens or len(tokens) != len(vectors):
            raise BadResponse(
                f"token/embedding length mismatch: {len(tokens)} vs {len(vectors)}"
            )
        dims = {v.dimension for v in vectors}
        if len(dims) > 1:
            raise DimensionMismatch(f"endpoint returned mixed dimensions {sorted(dims)}")
        return tokens, vectors


def generate_definitions(
    prompts: Sequence[str],
    gen: GenerationConfig,
    ep: EndpointConfig,
    cache_path: str | Path | None = None,
) -> list[str | None]:
    """Convenience wrapper when no long-lived client is needed."""
    return GenerationClient(ep, ResponseCache(cache_path)).generate(prompts, gen)


def embed_texts(
    texts: Sequence[str], ep: EndpointConfig, cache_path: str | Path | None = None
) -> list[EmbeddingVector]:
    return EmbeddingClient(ep, ResponseCache(cache_path)).embed_texts(texts)


def embed_tokens(
    text: str, ep: EndpointConfig, cache_path: str | Path | None = None
) -> tuple[list[str], list[EmbeddingVector]]:
    return EmbeddingClient(ep, ResponseCache(cache_path)).embed_tokens(text)


@dataclass
class HashTokenEmbedder:
    """Deterministic offline token embedder.

    Maps each distinct token string to a pseudo-random unit-free vector
    seeded by its hash.  Identical tokens get identical vectors, so
    exact-match comparisons score 1.0; similarities between different tokens
    are arbitrary.  Meant for testing and for degraded scoring without an
    embedding service, never for real evaluation.
    """

    dimension: int = 32
    _memo: dict[str, EmbeddingVector] = field(default_factory=dict)

    def embed_tokens(self, text: str) -> tuple[list[str], list[EmbeddingVector]]:
        from .metrics import tokenize

        tokens = tokenize(text)
        return tokens, [self._vector(tok) for tok in tokens]

    def _vector(self, token: str) -> EmbeddingVector:
        vec = self._memo.get(token)
        if vec is None:
            seed = int.from_bytes(
                hashlib.sha256(token.encode("utf-8")).digest()[:8], "big"
            )
            rng = random.Random(seed)
            vec = EmbeddingVector(
                values=tuple(rng.uniform(-1.0, 1.0) for _ in range(self.dimension))
            )
            self._memo[token] = vec
        return vec
