"""
Chat-completion clients: a live HTTP client for chat-completions compatible
endpoints and a deterministic mock replaying fixture responses.
"""
import base64
import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass

import requests

from .conf import ProviderKind
from .exceptions import (
    ConfigurationError,
    FixtureExhaustedError,
    ProviderError,
    ProviderHTTPError,
    ProviderTransportError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImagePayload:
    """Image bytes passed through to the model untouched."""

    data: bytes
    media_type: str = "image/jpeg"

    def __post_init__(self):
        if not self.data:
            raise ProviderError("Image payload is empty")

    @property
    def sha256(self):
        return hashlib.sha256(self.data).hexdigest()

    def data_url(self):
        return f"data:{self.media_type};base64,{base64.b64encode(self.data).decode('ascii')}"


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str
    image: ImagePayload = None

    def to_request(self):
        if self.image is None:
            return {"role": self.role, "content": self.text}
        return {
            "role": self.role,
            "content": [
                {"type": "text", "text": self.text},
                {"type": "image_url", "image_url": {"url": self.image.data_url()}},
            ],
        }

    def to_transcript(self):
        out = {"role": self.role, "text": self.text}
        if self.image is not None:
            out["image"] = {"sha256": self.image.sha256, "media_type": self.image.media_type}
        return out


def fingerprint(messages):
    """Stable hash of the rendered messages; images enter by content hash."""
    canonical = json.dumps([m.to_transcript() for m in messages], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatExchange:
    messages: tuple
    response: str
    latency: float
    fingerprint: str
    usage: dict = None

    def to_document(self):
        return {
            "fingerprint": self.fingerprint,
            "messages": [m.to_transcript() for m in self.messages],
            "response": self.response,
            "latency": self.latency,
            "usage": self.usage,
        }


class BaseProvider:
    kind = None

    def complete(self, messages):
        raise NotImplementedError


class LiveProvider(BaseProvider):
    """
    One HTTP round trip per call to ``{endpoint}/chat/completions``.

    Timeouts, connection failures and 5xx answers are retried with
    exponential backoff; 4xx answers are raised immediately.
    """

    kind = ProviderKind.LIVE

    def __init__(self, config, session=None, sleep=time.sleep):
        config.validate()
        api_key = os.environ.get(config.api_key_env)
        if not api_key:
            raise ConfigurationError(f"Environment variable {config.api_key_env} is not set")
        self.config = config
        self.url = config.endpoint.rstrip("/")
        if not self.url.endswith("/chat/completions"):
            self.url = f"{self.url}/chat/completions"
        self._headers = {
            "Authorization": f"Bearer {api_key}",
            "Content-Type": "application/json",
            "Accept": "application/json",
        }
        self.session = session or requests.Session()
        self._limiter = threading.BoundedSemaphore(config.max_in_flight)
        self._sleep = sleep

    def _post(self, payload):
        with self._limiter:
            return self.session.post(self.url, json=payload, headers=self._headers, timeout=self.config.timeout)

    def complete(self, messages):
        messages = tuple(messages)
        payload = {
            "model": self.config.model,
            "messages": [m.to_request() for m in messages],
            "temperature": self.config.temperature,
        }
        attempts = self.config.transport_retries + 1
        for attempt in range(1, attempts + 1):
            started = time.monotonic()
            try:
                resp = self._post(payload)
            except (requests.Timeout, requests.ConnectionError) as exc:
                logger.warning(f"POST {self.url} failed on attempt {attempt}/{attempts}: {exc}")
                if attempt == attempts:
                    raise ProviderTransportError(
                        f"Provider unreachable after {attempt} attempts: {exc}", attempts=attempt
                    ) from exc
                self._sleep(self.config.backoff * 2 ** (attempt - 1))
                continue
            latency = time.monotonic() - started

            if resp.status_code >= 500:
                logger.warning(f"POST {self.url} returned {resp.status_code} on attempt {attempt}/{attempts}")
                if attempt == attempts:
                    raise ProviderTransportError(
                        f"Provider returned {resp.status_code} after {attempt} attempts",
                        attempts=attempt, status_code=resp.status_code,
                    )
                self._sleep(self.config.backoff * 2 ** (attempt - 1))
                continue
            if resp.status_code >= 400:
                raise ProviderHTTPError(
                    f"Provider rejected the request with status {resp.status_code}: {resp.text[:200]}",
                    status_code=resp.status_code,
                )

            try:
                data = resp.json()
                text = data["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ProviderError(f"Malformed chat completion response: {exc}") from exc
            if text is None:
                raise ProviderError("Chat completion response has no content")
            logger.info(f"{self.config.model} answered in {latency:.2f}s (attempt {attempt})")
            return ChatExchange(messages, text, latency, fingerprint(messages), data.get("usage"))


@dataclass(frozen=True)
class FixtureRecord:
    response: str
    fingerprint: str = None


class MockProvider(BaseProvider):
    """
    Replays fixture responses in order.

    A request takes the first unused record carrying its fingerprint, else the
    first unused record without one.
    """

    kind = ProviderKind.MOCK

    def __init__(self, records):
        self.records = tuple(records)
        self._used = [False] * len(self.records)
        self._lock = threading.Lock()

    @classmethod
    def from_responses(cls, responses):
        return cls(FixtureRecord(r) for r in responses)

    def complete(self, messages):
        messages = tuple(messages)
        fp = fingerprint(messages)
        with self._lock:
            index = next(
                (i for i, r in enumerate(self.records) if not self._used[i] and r.fingerprint == fp), None
            )
            if index is None:
                index = next(
                    (i for i, r in enumerate(self.records) if not self._used[i] and r.fingerprint is None), None
                )
            if index is None:
                raise FixtureExhaustedError(f"No fixture response left for request {fp[:12]}")
            self._used[index] = True
        return ChatExchange(messages, self.records[index].response, 0.0, fp)

    @property
    def remaining(self):
        return self._used.count(False)


@dataclass(frozen=True)
class FixtureBundle:
    """Fixture records, shared (``default``) or keyed by scene id."""

    default: tuple = ()
    scenes: dict = None

    def records_for(self, scene_id=None):
        scenes = self.scenes or {}
        if scene_id is not None and scene_id in scenes:
            return scenes[scene_id]
        return self.default


def _records(items, path):
    from .serializers import FixtureRecordSerializer, flatten_errors

    serializer = FixtureRecordSerializer(data=items, many=True)
    if not serializer.is_valid():
        where, message = flatten_errors(serializer.errors)[0]
        raise ProviderError(f"Invalid fixture file {path} at '{where}': {message}")
    return tuple(FixtureRecord(r["response"], r["fingerprint"]) for r in serializer.validated_data)


def bundle_from_document(document, path="<document>"):
    if isinstance(document, list):
        return FixtureBundle(_records(document, path))
    if not isinstance(document, dict):
        raise ProviderError(f"Fixture file {path} must hold a list or an object")
    scenes = {str(k): _records(v, f"{path}:{k}") for k, v in (document.get("scenes") or {}).items()}
    return FixtureBundle(_records(document.get("default", []), path), scenes)


def load_fixture_bundle(path):
    try:
        with open(path, encoding="utf-8") as f:
            document = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ProviderError(f"Cannot read fixture file {path}: {exc}") from exc
    return bundle_from_document(document, path)


def build_provider(config, bundle=None, scene_id=None, session=None):
    """
    Client for ``config``. Mock providers are built per scene so concurrent
    scenes never compete for positional fixtures.
    """
    if config.kind is ProviderKind.LIVE:
        return LiveProvider(config, session=session)
    if bundle is None:
        config.validate()
        bundle = load_fixture_bundle(config.fixtures_path)
    return MockProvider(bundle.records_for(scene_id))
