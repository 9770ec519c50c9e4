"""Provider-agnostic chat-completion access plus strict response parsers.

Real providers speak a minimal HTTP chat contract; the mock provider replays
a script keyed by (paper_id, dimension_id, run_index) so classification runs
are deterministic in tests. Transient failures (rate limits, timeouts, 5xx)
are retried with exponential backoff; auth failures are not.

Parse failures never crash a run: they raise ParseError carrying the
offending text, which callers record for audit.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .taxonomy import AnswerMode, TaxonomyDimension


class GatewayError(Exception):
    pass


class AuthError(GatewayError):
    """Credential rejected or unresolvable; never retried."""


class TransientError(GatewayError):
    """Retryable failure (rate limit, timeout, provider 5xx)."""


class RateLimitError(TransientError):
    pass


class ProviderTimeout(TransientError):
    pass


class MalformedPayloadError(GatewayError):
    pass


class ParseError(GatewayError):
    """Response text that does not satisfy the dimension's answer format."""

    def __init__(self, message: str, text: str):
        super().__init__(f"{message}: {text!r}")
        self.text = text


@dataclass(frozen=True)
class ProviderConfig:
    provider_id: str
    model_name: str
    endpoint: str = ""
    credential_ref: str = ""  # env var NAME; the value is never stored
    max_concurrent: int = 4
    timeout: float = 60.0
    max_retries: int = 3
    temperature: float = 0.0

    def to_dict(self) -> dict:
        # credential_ref is the variable name only; safe to persist
        return {
            "provider_id": self.provider_id,
            "model_name": self.model_name,
            "endpoint": self.endpoint,
            "credential_ref": self.credential_ref,
            "max_concurrent": self.max_concurrent,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "temperature": self.temperature,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProviderConfig":
        return cls(**d)


@dataclass(frozen=True)
class RequestContext:
    """Routing metadata for scripted providers and audit trails."""

    paper_id: str = ""
    dimension_id: str = ""
    run_index: int = 0


@dataclass(frozen=True)
class RawResponse:
    text: str
    provider_id: str
    model_name: str
    latency: float
    request_fingerprint: str


def request_fingerprint(prompt: str, model_name: str, temperature: float) -> str:
    basis = f"{model_name}\x00{temperature!r}\x00{prompt}"
    return hashlib.sha256(basis.encode("utf-8")).hexdigest()


class HttpChatProvider:
    """POSTs a single user message to a chat-completion endpoint and returns
    the first choice's text."""

    def __init__(self, config: ProviderConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()

    def send(self, prompt: str, context: RequestContext | None = None) -> str:
        cfg = self.config
        headers = {"Content-Type": "application/json"}
        if cfg.credential_ref:
            key = os.environ.get(cfg.credential_ref)
            if not key:
                raise AuthError(f"credential env var {cfg.credential_ref} is not set")
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
        }
        try:
            resp = self._session.post(cfg.endpoint, json=payload, headers=headers,
                                      timeout=cfg.timeout)
        except requests.Timeout as e:
            raise ProviderTimeout(str(e)) from e
        except requests.RequestException as e:
            raise TransientError(str(e)) from e
        if resp.status_code in (401, 403):
            raise AuthError(f"provider rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 429:
            raise RateLimitError("provider rate limit (HTTP 429)")
        if resp.status_code >= 500:
            raise TransientError(f"provider error (HTTP {resp.status_code})")
        if resp.status_code != 200:
            raise GatewayError(f"unexpected provider status {resp.status_code}")
        try:
            body = resp.json()
            return body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise MalformedPayloadError(f"cannot extract completion text: {e}") from e


class MockProvider:
    """Deterministic scripted provider.

    The script maps (paper_id, dimension_id, run_index) to a response text;
    an entry without run_index applies to every run. Entries may instead
    script failures: "transient_failures": N makes the first N calls for the
    key fail retryably, "error": "auth" | "rate_limit" fails every call.
    Reentrant: safe under concurrent callers.
    """

    def __init__(self, script: dict):
        self._exact: dict[tuple[str, str, int], dict] = {}
        self._any_run: dict[tuple[str, str], dict] = {}
        self._attempts: dict[tuple, int] = {}
        self._lock = threading.Lock()
        self.calls = 0
        for entry in script.get("responses", []):
            key = (entry["paper_id"], entry["dimension_id"])
            if entry.get("run_index") is None:
                self._any_run[key] = entry
            else:
                self._exact[key + (int(entry["run_index"]),)] = entry

    @classmethod
    def from_file(cls, path: str | Path) -> "MockProvider":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def send(self, prompt: str, context: RequestContext | None = None) -> str:
        if context is None:
            raise GatewayError("mock provider needs a request context")
        key3 = (context.paper_id, context.dimension_id, context.run_index)
        entry = self._exact.get(key3) or self._any_run.get(key3[:2])
        if entry is None:
            raise GatewayError(f"mock script has no entry for {key3}")
        with self._lock:
            self.calls += 1
            attempts = self._attempts[key3] = self._attempts.get(key3, 0) + 1
        if entry.get("error") == "auth":
            raise AuthError("scripted auth failure")
        if entry.get("error") == "rate_limit":
            raise RateLimitError("scripted rate limit")
        if attempts <= int(entry.get("transient_failures", 0)):
            raise RateLimitError("scripted transient failure")
        return entry["text"]


class Gateway:
    """Retry/backoff and concurrency wrapper around a provider."""

    def __init__(self, config: ProviderConfig, provider, *,
                 backoff_base: float = 0.5, sleep=time.sleep):
        self.config = config
        self.provider = provider
        self._backoff_base = backoff_base
        self._sleep = sleep
        self._slots = threading.Semaphore(max(1, config.max_concurrent))

    def complete(self, prompt: str, context: RequestContext | None = None) -> RawResponse:
        if not prompt.strip():
            raise ValueError("prompt is empty")
        attempts = self.config.max_retries + 1
        last: TransientError | None = None
        start = time.monotonic()
        for attempt in range(attempts):
            if attempt:
                self._sleep(self._backoff_base * 2 ** (attempt - 1))
            try:
                with self._slots:
                    text = self.provider.send(prompt, context)
                return RawResponse(
                    text=text,
                    provider_id=self.config.provider_id,
                    model_name=self.config.model_name,
                    latency=time.monotonic() - start,
                    request_fingerprint=request_fingerprint(
                        prompt, self.config.model_name, self.config.temperature),
                )
            except TransientError as e:
                last = e
        assert last is not None
        raise last


def mock_gateway(script: dict | str | Path, model_name: str = "mock",
                 max_retries: int = 0) -> Gateway:
    provider = MockProvider.from_file(script) if isinstance(script, (str, Path)) \
        else MockProvider(script)
    config = ProviderConfig(provider_id="mock", model_name=model_name,
                            max_retries=max_retries)
    return Gateway(config, provider, sleep=lambda _s: None)


# -- response parsers -------------------------------------------------------

_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n?(.*?)\n?```$", re.DOTALL)
_QUOTES = "\"'“”‘’"
_TRAILING_PUNCT = ".,;:!"


def _strip_fencing(text: str) -> str:
    stripped = text.strip()
    m = _FENCE_RE.match(stripped)
    return m.group(1).strip() if m else stripped


def parse_binary(text: str) -> str:
    """Normalize a 'solely the item' binary answer to "Yes" or "No"."""
    t = _strip_fencing(text)
    t = t.strip().strip(_QUOTES).rstrip(_TRAILING_PUNCT).strip()
    lowered = t.lower()
    if lowered == "yes":
        return "Yes"
    if lowered == "no":
        return "No"
    raise ParseError("not a bare yes/no answer", text)


def parse_labeled_multi(text: str, dimension: TaxonomyDimension) -> frozenset[str]:
    """Parse the braced label:yes/no map into the set of affirmed labels.
    An all-"no" answer becomes the sentinel label."""
    if dimension.answer_mode is not AnswerMode.LABELED_MULTI:
        raise ParseError(f"dimension {dimension.dimension_id} is not labeled_multi", text)
    t = _strip_fencing(text)
    open_i, close_i = t.find("{"), t.rfind("}")
    if open_i == -1 or close_i == -1 or close_i < open_i:
        raise ParseError("no braced map found", text)
    inside = t[open_i + 1:close_i]
    expected = {l.label.lower(): l.label for l in dimension.labels if not l.sentinel}
    aliases = {k.lower(): v for k, v in dimension.label_aliases.items()}
    seen: dict[str, bool] = {}
    for part in inside.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ParseError(f"entry without value: {part!r}", text)
        key_raw, value_raw = part.split(":", 1)
        key = key_raw.strip().strip(_QUOTES).lower()
        canonical = expected.get(key) or aliases.get(key)
        if canonical is None:
            raise ParseError(f"unknown label key {key_raw.strip()!r}", text)
        value = value_raw.strip().strip(_QUOTES).rstrip(_TRAILING_PUNCT).lower()
        if value not in ("yes", "no"):
            raise ParseError(f"value for {canonical!r} outside yes/no: {value_raw.strip()!r}", text)
        seen[canonical] = value == "yes"
    missing = [l.label for l in dimension.labels if not l.sentinel and l.label not in seen]
    if missing:
        raise ParseError(f"missing label keys: {', '.join(missing)}", text)
    labels = frozenset(k for k, v in seen.items() if v)
    return labels or frozenset({dimension.sentinel_label()})


def parse_subclass_list(text: str, dimension: TaxonomyDimension) -> frozenset[str]:
    """Parse a bracketed subclass-index list; an empty list becomes the
    catch-all sentinel subclass."""
    if dimension.answer_mode is not AnswerMode.SUBCLASS_INDEXED:
        raise ParseError(f"dimension {dimension.dimension_id} is not subclass_indexed", text)
    t = _strip_fencing(text).strip().strip(_QUOTES).strip()
    if not (t.startswith("[") and t.endswith("]")):
        raise ParseError("no bracketed index list found", text)
    inside = t[1:-1].strip()
    if not inside:
        return frozenset({dimension.sentinel_label()})
    valid = set(dimension.valid_labels())
    tokens = [tok.strip().strip(_QUOTES) for tok in re.split(r"[;,]", inside)]
    tokens = [tok for tok in tokens if tok]
    bad = sorted({tok for tok in tokens if tok not in valid})
    if bad:
        raise ParseError(f"unknown subclass index: {', '.join(bad)}", text)
    if not tokens:
        return frozenset({dimension.sentinel_label()})
    return frozenset(tokens)
