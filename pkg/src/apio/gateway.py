"""Chat-completion backends behind one interface.

Every network interaction in the engine goes through ``Backend.complete``.
Three implementations cover the deployment modes:

* ``OpenAIChatBackend`` - OpenAI-style chat-completions HTTP endpoint with
  retry/backoff, bearer token from ``APIO_API_KEY``;
* ``CachedBackend`` - content-addressed disk cache wrapping another
  backend, with per-key in-flight deduplication;
* ``ScriptedBackend`` - deterministic offline backend driven by an
  ordered script of (matcher, response) entries.

Two generation profiles exist: EXPLORE (temperature 1.0, top-p 1.0) for
prompt search and INFER (temperature 0.0, top-p 0.1) for inference.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path


class GatewayError(Exception):
    """Base class for backend failures."""


class CredentialError(GatewayError):
    """Authentication rejected; retrying cannot help."""


class TransportError(GatewayError):
    """Transient failures exhausted the retry budget."""


class BackendError(GatewayError):
    """The backend answered but the response is unusable."""


class ScriptExhaustedError(GatewayError):
    """No script entry matches the request."""


@dataclass(frozen=True)
class GenerationProfile:
    temperature: float
    top_p: float
    max_tokens: int = 1024
    model_id: str = ""

    def with_model(self, model_id: str, max_tokens: int | None = None) -> "GenerationProfile":
        return replace(
            self,
            model_id=model_id,
            max_tokens=self.max_tokens if max_tokens is None else max_tokens,
        )


EXPLORE = GenerationProfile(temperature=1.0, top_p=1.0)
INFER = GenerationProfile(temperature=0.0, top_p=0.1)


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]
    profile: GenerationProfile
    attempt_tag: int = 0

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if any(not content for _, content in self.messages):
            raise ValueError("message content must be non-empty")

    def text(self) -> str:
        return "\n".join(content for _, content in self.messages)


def user_request(content: str, profile: GenerationProfile, attempt_tag: int = 0) -> ChatRequest:
    return ChatRequest(messages=(("user", content),), profile=profile, attempt_tag=attempt_tag)


def request_key(request: ChatRequest, profile: GenerationProfile | None = None) -> str:
    profile = profile or request.profile
    payload = json.dumps(
        {
            "model": profile.model_id,
            "temperature": profile.temperature,
            "top_p": profile.top_p,
            "max_tokens": profile.max_tokens,
            "messages": [list(m) for m in request.messages],
            "attempt_tag": request.attempt_tag,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend:
    """Base backend; records every request in ``calls``."""

    model = ""
    max_tokens: int | None = None

    def __init__(self) -> None:
        self.calls: list[ChatRequest] = []
        self._calls_lock = threading.Lock()

    def complete(self, request: ChatRequest) -> str:
        with self._calls_lock:
            self.calls.append(request)
        return self._complete(request)

    def _complete(self, request: ChatRequest) -> str:
        raise NotImplementedError

    def resolve_profile(self, profile: GenerationProfile) -> GenerationProfile:
        """Fill in backend-level model id and token limit."""
        return replace(
            profile,
            model_id=profile.model_id or self.model,
            max_tokens=self.max_tokens if self.max_tokens is not None else profile.max_tokens,
        )


# ---------------------------------------------------------------------------
# scripted backend
# ---------------------------------------------------------------------------

_RULE_RE = re.compile(r'[Rr]eplace "(.*?)" with "(.*?)"')
_ECHO_RE = re.compile(r"Instruction:(.*)\nUpdated instruction:", re.DOTALL)


@dataclass
class ScriptEntry:
    match: str
    response: str = ""
    mode: str = "literal"  # literal | rewrite_rules | echo_instruction
    sticky: bool = False


def _apply_rewrite_rules(prompt_text: str) -> str:
    """Interpret a rendered task prompt as literal string-rewrite rules.

    Bullet lines of the form ``Replace "x" with "y".`` are applied in order
    to the input text carried by the prompt footer (``Input: ...`` line
    followed by ``Output:``).
    """
    lines = prompt_text.split("\n")
    rules = []
    for line in lines:
        if line.startswith("* "):
            found = _RULE_RE.search(line[2:])
            if found:
                rules.append((found.group(1), found.group(2)))
    input_text = ""
    for idx in range(len(lines) - 1, -1, -1):
        if lines[idx].startswith("Input: "):
            input_text = lines[idx][len("Input: "):]
            break
    result = input_text
    for old, new in rules:
        result = result.replace(old, new)
    return result


def _echo_instruction(prompt_text: str) -> str:
    found = _ECHO_RE.search(prompt_text)
    return found.group(1).strip() if found else ""


class ScriptedBackend(Backend):
    """Deterministic backend consuming an ordered (matcher, response) script.

    Each request takes the first matching unconsumed entry; matchers test
    substring presence in the request text. Plain entries are consumed on
    use; ``sticky`` entries answer any number of requests, which the
    synthetic end-to-end tasks need for inference traffic.
    """

    def __init__(self, entries: list[ScriptEntry]) -> None:
        super().__init__()
        if not entries:
            raise ValueError("script must be non-empty")
        self.entries = entries
        self._consumed: set[int] = set()
        self._lock = threading.Lock()

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, str]]) -> "ScriptedBackend":
        return cls([ScriptEntry(match=m, response=r) for m, r in pairs])

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = [
            ScriptEntry(
                match=item["match"],
                response=item.get("response", ""),
                mode=item.get("mode", "literal"),
                sticky=bool(item.get("sticky", False)),
            )
            for item in raw
        ]
        return cls(entries)

    def consumed_state(self) -> list[int]:
        with self._lock:
            return sorted(self._consumed)

    def restore_consumed(self, indices: list[int]) -> None:
        with self._lock:
            self._consumed = set(indices)

    def _complete(self, request: ChatRequest) -> str:
        text = request.text()
        with self._lock:
            for idx, entry in enumerate(self.entries):
                if not entry.sticky and idx in self._consumed:
                    continue
                if entry.match in text:
                    if not entry.sticky:
                        self._consumed.add(idx)
                    chosen = entry
                    break
            else:
                head = text.splitlines()[0][:120] if text else ""
                raise ScriptExhaustedError(
                    f"no script entry matches request starting {head!r}"
                )
        if chosen.mode == "literal":
            return chosen.response
        if chosen.mode == "rewrite_rules":
            return _apply_rewrite_rules(text)
        if chosen.mode == "echo_instruction":
            return _echo_instruction(text)
        raise ValueError(f"unknown script mode {chosen.mode!r}")


# ---------------------------------------------------------------------------
# OpenAI-compatible HTTP backend
# ---------------------------------------------------------------------------

_RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


class OpenAIChatBackend(Backend):
    """OpenAI-style chat-completions client over ``requests``."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        retry_max: int = 5,
        timeout_s: float = 60.0,
        max_tokens: int | None = None,
        session=None,
        backoff_base_s: float = 0.5,
    ) -> None:
        super().__init__()
        import os

        import requests

        self.base_url = base_url.rstrip("/")
        self.model = model
        self.max_tokens = max_tokens
        self.api_key = api_key if api_key is not None else os.environ.get("APIO_API_KEY", "")
        self.retry_max = retry_max
        self.timeout_s = timeout_s
        self.backoff_base_s = backoff_base_s
        self._session = session if session is not None else requests.Session()
        self._requests = requests

    def _complete(self, request: ChatRequest) -> str:
        profile = self.resolve_profile(request.profile)
        payload = {
            "model": profile.model_id,
            "messages": [{"role": role, "content": content} for role, content in request.messages],
            "temperature": profile.temperature,
            "top_p": profile.top_p,
            "max_tokens": profile.max_tokens,
        }
        url = f"{self.base_url}/chat/completions"
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.retry_max + 1):
            if attempt:
                time.sleep(self.backoff_base_s * (2 ** (attempt - 1)))
            try:
                response = self._session.post(url, json=payload, headers=headers, timeout=self.timeout_s)
            except self._requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code in (401, 403):
                raise CredentialError(f"authentication failed ({response.status_code})")
            if response.status_code in _RETRYABLE_STATUS:
                last_error = BackendError(f"transient status {response.status_code}")
                continue
            if response.status_code != 200:
                raise BackendError(f"unexpected status {response.status_code}: {response.text[:200]}")
            try:
                content = response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise BackendError(f"malformed completion payload: {exc}") from exc
            if not content:
                raise BackendError("backend returned an empty completion")
            return content
        raise TransportError(f"retry budget exhausted after {self.retry_max + 1} attempts: {last_error}")


# ---------------------------------------------------------------------------
# disk cache
# ---------------------------------------------------------------------------


class CachedBackend(Backend):
    """Content-addressed append-only JSON cache in front of a backend.

    Cache keys digest (model, profile, messages, attempt_tag); hits return
    byte-identical text with no inner call. Identical concurrent requests
    are deduplicated: the second caller blocks on the per-key lock and is
    then served from the fresh cache entry.
    """

    def __init__(self, inner: Backend, cache_dir: str | Path) -> None:
        super().__init__()
        self.inner = inner
        self.model = inner.model
        self.max_tokens = inner.max_tokens
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._key_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self.hits = 0

    def _lock_for(self, key: str) -> threading.Lock:
        with self._registry_lock:
            return self._key_locks.setdefault(key, threading.Lock())

    def _path(self, key: str) -> Path:
        return self.cache_dir / f"{key}.json"

    def _read(self, key: str) -> str | None:
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["response_text"]

    def _complete(self, request: ChatRequest) -> str:
        key = request_key(request, self.inner.resolve_profile(request.profile))
        cached = self._read(key)
        if cached is not None:
            self.hits += 1
            return cached
        with self._lock_for(key):
            cached = self._read(key)
            if cached is not None:
                self.hits += 1
                return cached
            text = self.inner.complete(request)
            entry = {
                "key": key,
                "response_text": text,
                "created_at": time.time(),
            }
            tmp = self._path(key).with_suffix(".tmp")
            tmp.write_text(json.dumps(entry, ensure_ascii=False), encoding="utf-8")
            tmp.replace(self._path(key))
            return text

    @property
    def network_calls(self) -> int:
        return len(self.inner.calls)
