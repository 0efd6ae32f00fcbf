"""OpenAI-compatible chat-completions client."""

from __future__ import annotations

import logging
import threading
import time
from typing import Callable, Mapping

import httpx

from ..core import DecodingSettings
from ..errors import BackendRefusal, BackendUnavailable, ConfigError
from .base import ModelRole

logger = logging.getLogger(__name__)

CHAT_PATH = "/v1/chat/completions"


class HttpBackend:
    """Sends one chat-completions request per :meth:`complete` call.

    Transport errors and 5xx responses are retried ``retries`` times with
    exponential backoff starting at ``backoff`` seconds; a 4xx response fails
    immediately. At most ``max_in_flight`` requests run at once.
    """

    def __init__(
        self,
        endpoint: str,
        models: Mapping[ModelRole | str, str],
        api_key: str | None = None,
        *,
        max_in_flight: int = 4,
        timeout: float = 60.0,
        retries: int = 3,
        backoff: float = 0.5,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        self.url = endpoint.rstrip("/") + CHAT_PATH
        self.models = {ModelRole(r): m for r, m in models.items()}
        missing = set(ModelRole) - self.models.keys()
        if missing:
            raise ConfigError(f"no model configured for roles {sorted(r.value for r in missing)}")
        self.api_key = api_key
        self.retries = retries
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    def complete(self, role: ModelRole, prompt: str, decoding: DecodingSettings | None = None) -> str:
        if not prompt.strip():
            raise ValueError("empty prompt")
        decoding = decoding or DecodingSettings()
        body = {
            "model": self.models[ModelRole(role)],
            "messages": [{"role": "user", "content": prompt}],
            "temperature": decoding.temperature,
            "max_tokens": decoding.max_output_tokens,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        with self._gate:
            data = self._post(body, headers)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed completion payload: {exc!r}") from exc
        if not isinstance(content, str) or not content.strip():
            raise BackendRefusal("empty completion")
        return content

    def _post(self, body: dict, headers: dict) -> dict:
        last = ""
        for attempt in range(self.retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.url, json=body, headers=headers)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                logger.warning("request to %s failed (attempt %d): %s", self.url, attempt + 1, last)
                continue
            if 400 <= resp.status_code < 500:
                raise BackendUnavailable(f"HTTP {resp.status_code} from {self.url}: {resp.text[:200]}")
            if resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                logger.warning("server error from %s (attempt %d): %s", self.url, attempt + 1, last)
                continue
            try:
                return resp.json()
            except ValueError as exc:
                raise BackendUnavailable(f"non-JSON response from {self.url}") from exc
        raise BackendUnavailable(f"{self.url} unreachable after {self.retries + 1} attempts ({last})")
