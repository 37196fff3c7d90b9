"""Provider-agnostic chat-completion gateway with record/replay fixtures.

Three modes:

* ``live``    - every call goes over HTTP, nothing is persisted.
* ``record``  - calls go over the configured transport and the response is
  persisted under a stable request digest; a call whose digest is already
  stored is answered from the store without touching the transport.
* ``replay``  - responses come exclusively from the store; a missing digest
  is an error and no network traffic ever happens.

The digest is a pure function of (profile, messages), so identical requests
collide by design and a full pipeline run in replay mode is deterministic.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol

import httpx

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
LOGICAL_ROLES = ("text_model", "vision_model", "judge")

API_KEY_ENV = {
    "text_model": "CW_TEXT_API_KEY",
    "vision_model": "CW_VISION_API_KEY",
    # the judge is a multimodal role; it shares the vision credential
    "judge": "CW_VISION_API_KEY",
}


class GatewayError(Exception):
    pass


class ProviderError(GatewayError):
    def __init__(self, status: int | None, body: str):
        super().__init__(f"provider error (status={status}): {body[:500]}")
        self.status = status
        self.body = body


class MissingFixtureError(GatewayError):
    def __init__(self, digest: str, summary: str):
        super().__init__(f"no recorded response for digest {digest}\n{summary}")
        self.digest = digest


class ImageDecodeError(GatewayError):
    pass


class ModelFormatError(GatewayError):
    """A model response stayed unparseable after one corrective reprompt."""


class ExtractionError(GatewayError):
    """No fenced code block with the requested language tag."""


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    base64_data: str
    media_type: str

    def decoded(self) -> bytes:
        try:
            return base64.b64decode(self.base64_data, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ImageDecodeError(f"invalid base64 image payload: {exc}") from exc


@dataclass(frozen=True)
class ChatMessage:
    role: str
    parts: tuple[TextPart | ImagePart, ...]

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.parts:
            raise ValueError("message needs at least one part")
        for part in self.parts:
            if isinstance(part, ImagePart):
                if not part.media_type.startswith("image/"):
                    raise ImageDecodeError(f"not a raster image type: {part.media_type!r}")
                part.decoded()

    @classmethod
    def text(cls, role: str, text: str) -> "ChatMessage":
        return cls(role, (TextPart(text),))

    @classmethod
    def with_images(cls, role: str, *parts: TextPart | ImagePart) -> "ChatMessage":
        return cls(role, tuple(parts))


def image_part(data: bytes, media_type: str) -> ImagePart:
    return ImagePart(base64.b64encode(data).decode("ascii"), media_type)


@dataclass(frozen=True)
class ModelProfile:
    """One logical model slot (drafting text model, vision model, or judge)."""

    role: str
    endpoint: str
    temperature: float = 0.7
    max_tokens: int = 4096

    def __post_init__(self):
        if self.role not in LOGICAL_ROLES:
            raise ValueError(f"unknown logical role {self.role!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


def _part_summary(part: TextPart | ImagePart) -> dict:
    if isinstance(part, TextPart):
        return {"type": "text", "text": part.text}
    raw = part.decoded()
    return {
        "type": "image",
        "media_type": part.media_type,
        "sha256": hashlib.sha256(raw).hexdigest(),
        "bytes": len(raw),
    }


def request_digest(profile: ModelProfile, messages: list[ChatMessage]) -> str:
    payload = {
        "profile": {
            "role": profile.role,
            "endpoint": profile.endpoint,
            "temperature": profile.temperature,
            "max_tokens": profile.max_tokens,
        },
        "messages": [
            {"role": m.role, "parts": [_part_summary(p) for p in m.parts]} for m in messages
        ],
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class TranscriptRecord:
    digest: str
    profile: dict
    request: list[dict]
    response: str
    timestamp: str
    usage: dict


class RecordStore:
    """One human-diffable JSON file per digest: ``<dir>/<digest>.record``."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def path_for(self, digest: str) -> Path:
        return self.root / f"{digest}.record"

    def __contains__(self, digest: str) -> bool:
        return self.path_for(digest).is_file()

    def load(self, digest: str) -> TranscriptRecord:
        data = json.loads(self.path_for(digest).read_text(encoding="utf-8"))
        return TranscriptRecord(**data)

    def save(self, record: TranscriptRecord) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        target = self.path_for(record.digest)
        tmp = target.with_suffix(".record.tmp")
        tmp.write_text(
            json.dumps(record.__dict__, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        os.replace(tmp, target)


class Transport(Protocol):
    def __call__(self, profile: ModelProfile, messages: list[ChatMessage]) -> tuple[str, dict]:
        """Return (response text, usage counters)."""


class HttpTransport:
    """OpenAI-style chat-completions wire format; images as base64 data URIs."""

    def __init__(
        self,
        base_url: str = "https://api.openai.com/v1",
        api_keys: dict[str, str] | None = None,
        timeout_s: float = 120.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_keys = api_keys or {}
        self.timeout_s = timeout_s

    def _key_for(self, profile: ModelProfile) -> str:
        if profile.role in self.api_keys:
            return self.api_keys[profile.role]
        env = API_KEY_ENV[profile.role]
        key = os.environ.get(env)
        if not key:
            raise ProviderError(None, f"no credential: set {env}")
        return key

    @staticmethod
    def _wire_content(message: ChatMessage):
        if all(isinstance(p, TextPart) for p in message.parts):
            return "".join(p.text for p in message.parts)
        blocks = []
        for part in message.parts:
            if isinstance(part, TextPart):
                blocks.append({"type": "text", "text": part.text})
            else:
                uri = f"data:{part.media_type};base64,{part.base64_data}"
                blocks.append({"type": "image_url", "image_url": {"url": uri}})
        return blocks

    def __call__(self, profile: ModelProfile, messages: list[ChatMessage]) -> tuple[str, dict]:
        body = {
            "model": profile.endpoint,
            "temperature": profile.temperature,
            "max_tokens": profile.max_tokens,
            "messages": [
                {"role": m.role, "content": self._wire_content(m)} for m in messages
            ],
        }
        headers = {"Authorization": f"Bearer {self._key_for(profile)}"}
        try:
            response = httpx.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers=headers,
                timeout=self.timeout_s,
            )
        except httpx.HTTPError as exc:
            raise ProviderError(None, str(exc)) from exc
        if response.status_code != 200:
            raise ProviderError(response.status_code, response.text)
        data = response.json()
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(response.status_code, f"unexpected response shape: {data}") from exc
        return text, data.get("usage", {})


class _TokenBucket:
    def __init__(self, per_minute: int, clock: Callable[[], float], sleeper: Callable[[float], None]):
        self.capacity = per_minute
        self.tokens = float(per_minute)
        self.rate = per_minute / 60.0
        self.updated = clock()
        self.clock = clock
        self.sleeper = sleeper
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self.sleeper(wait)


def _retryable(exc: ProviderError) -> bool:
    if exc.status is None:
        return True
    return exc.status == 429 or exc.status >= 500


@dataclass
class Gateway:
    """Shared front door for every model call in the pipeline."""

    mode: str = "live"
    store: RecordStore | None = None
    transport: Transport | None = None
    retry_limit: int = 3
    requests_per_minute: dict[str, int] = field(default_factory=dict)
    sleeper: Callable[[float], None] = time.sleep
    clock: Callable[[], float] = time.monotonic
    rng: random.Random = field(default_factory=random.Random)

    def __post_init__(self):
        if self.mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown gateway mode {self.mode!r}")
        if self.mode in ("record", "replay") and self.store is None:
            raise ValueError(f"{self.mode} mode requires a record store")
        if self.mode in ("live", "record") and self.transport is None:
            raise ValueError(f"{self.mode} mode requires a transport")
        self._buckets: dict[str, _TokenBucket] = {}
        self._bucket_lock = threading.Lock()

    def _bucket(self, profile: ModelProfile) -> _TokenBucket | None:
        limit = self.requests_per_minute.get(profile.role)
        if not limit:
            return None
        with self._bucket_lock:
            if profile.role not in self._buckets:
                self._buckets[profile.role] = _TokenBucket(limit, self.clock, self.sleeper)
            return self._buckets[profile.role]

    def _call_with_retry(self, profile: ModelProfile, messages: list[ChatMessage]) -> tuple[str, dict]:
        assert self.transport is not None
        last: ProviderError | None = None
        for attempt in range(self.retry_limit):
            bucket = self._bucket(profile)
            if bucket is not None:
                bucket.acquire()
            try:
                return self.transport(profile, messages)
            except ProviderError as exc:
                last = exc
                if not _retryable(exc) or attempt == self.retry_limit - 1:
                    raise
                backoff = (2**attempt) * (1.0 + self.rng.uniform(0, 0.25))
                logger.warning(
                    "provider error (attempt %d/%d), backing off %.2fs: %s",
                    attempt + 1,
                    self.retry_limit,
                    backoff,
                    exc,
                )
                self.sleeper(backoff)
        raise last  # pragma: no cover - loop always raises or returns

    def complete(self, messages: list[ChatMessage], profile: ModelProfile) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        digest = request_digest(profile, messages)

        if self.mode == "replay":
            assert self.store is not None
            if digest not in self.store:
                raise MissingFixtureError(digest, _request_preview(profile, messages))
            return self.store.load(digest).response

        if self.mode == "record":
            assert self.store is not None
            if digest in self.store:
                return self.store.load(digest).response

        text, usage = self._call_with_retry(profile, messages)

        if self.mode == "record":
            record = TranscriptRecord(
                digest=digest,
                profile={
                    "role": profile.role,
                    "endpoint": profile.endpoint,
                    "temperature": profile.temperature,
                    "max_tokens": profile.max_tokens,
                },
                request=[
                    {"role": m.role, "parts": [_part_summary(p) for p in m.parts]}
                    for m in messages
                ],
                response=text,
                timestamp=datetime.now(timezone.utc).isoformat(),
                usage=usage,
            )
            assert self.store is not None
            self.store.save(record)
        return text


def _request_preview(profile: ModelProfile, messages: list[ChatMessage]) -> str:
    lines = [f"profile: {profile.role} {profile.endpoint}"]
    for message in messages:
        for part in message.parts:
            if isinstance(part, TextPart):
                head = part.text.strip().replace("\n", " ")[:120]
                lines.append(f"  [{message.role}] {head}")
            else:
                lines.append(f"  [{message.role}] <image {part.media_type}>")
    return "\n".join(lines)


_FENCE_RE = re.compile(
    r"^```[ \t]*([A-Za-z0-9_+-]*)[ \t]*\r?\n(.*?)^```[ \t]*$",
    re.MULTILINE | re.DOTALL,
)


def extract_fenced_block(response: str, language_tag: str) -> str:
    """Return the body of the LAST fenced block carrying the tag.

    Models often emit a reasoning or scratch block before the real one, so
    the final block wins.
    """
    matches = [
        m.group(2)
        for m in _FENCE_RE.finditer(response)
        if m.group(1).lower() == language_tag.lower()
    ]
    if not matches:
        raise ExtractionError(f"no ```{language_tag} block in response")
    body = matches[-1]
    return body[:-1] if body.endswith("\n") else body
