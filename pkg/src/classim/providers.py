"""Model-provider client and configuration.

The provider is pluggable: anything with ``complete(prompt) -> str``
works. The HTTP client reads its API key from the MODEL_API_KEY
environment variable (never logged), retries with exponential backoff,
and bounds concurrent in-flight requests.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Optional

import httpx

from .model import ClassimError

log = logging.getLogger(__name__)

BACKEND_SCRIPTED = "Scripted"
BACKEND_MODEL = "ModelBacked"

API_KEY_ENV = "MODEL_API_KEY"
DEFAULT_CONCURRENCY = 4


class ProviderFailure(ClassimError):
    def __init__(self, cause: Exception):
        super().__init__(f"model provider failed: {cause}")
        self.cause = cause


@dataclass(frozen=True)
class ProviderConfig:
    backend: str = BACKEND_SCRIPTED
    endpoint: Optional[str] = None
    model_name: str = ""
    timeout_ms: int = 30_000
    max_retries: int = 2

    def __post_init__(self):
        if self.backend not in (BACKEND_SCRIPTED, BACKEND_MODEL):
            raise ClassimError(f"unknown backend {self.backend!r}")
        if self.timeout_ms <= 0:
            raise ClassimError("timeout_ms must be positive")
        if self.backend == BACKEND_MODEL and not self.endpoint:
            raise ClassimError("ModelBacked backend requires an endpoint")
        if self.backend == BACKEND_SCRIPTED and self.endpoint:
            raise ClassimError("Scripted backend takes no network fields")

    def to_json_dict(self) -> dict:
        return {
            "backend": self.backend,
            "endpoint": self.endpoint,
            "model_name": self.model_name,
            "timeout_ms": self.timeout_ms,
            "max_retries": self.max_retries,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ProviderConfig":
        return ProviderConfig(
            backend=d.get("backend", BACKEND_SCRIPTED),
            endpoint=d.get("endpoint"),
            model_name=d.get("model_name", ""),
            timeout_ms=d.get("timeout_ms", 30_000),
            max_retries=d.get("max_retries", 2),
        )


class HttpProvider:
    """JSON-over-HTTP completion client.

    POSTs {"model": ..., "prompt": ...} to the configured endpoint and
    expects {"completion": ...} back. Retries on any transport or server
    error with exponential backoff (0.5s, 1s, 2s, ...) up to max_retries."""

    def __init__(self, config: ProviderConfig,
                 concurrency: int = DEFAULT_CONCURRENCY):
        if config.backend != BACKEND_MODEL:
            raise ClassimError("HttpProvider requires a ModelBacked config")
        self.config = config
        self._semaphore = threading.Semaphore(concurrency)

    def complete(self, prompt: str) -> str:
        headers = {}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception = RuntimeError("no attempt made")
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(0.5 * 2 ** (attempt - 1))
            try:
                with self._semaphore:
                    response = httpx.post(
                        self.config.endpoint,
                        json={"model": self.config.model_name,
                              "prompt": prompt},
                        headers=headers,
                        timeout=self.config.timeout_ms / 1000,
                    )
                response.raise_for_status()
                return response.json()["completion"]
            except Exception as exc:
                last_error = exc
                log.warning("provider attempt %d failed: %s",
                            attempt + 1, type(exc).__name__)
        raise ProviderFailure(last_error)


def build_provider(config: ProviderConfig) -> Optional[HttpProvider]:
    """Provider for a config; None for the scripted backend."""
    if config.backend == BACKEND_SCRIPTED:
        return None
    return HttpProvider(config)
