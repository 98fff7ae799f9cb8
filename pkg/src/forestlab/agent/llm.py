"""Chat-completion client for the optional LLM planner/composer.

Configuration comes from environment variables; a custom httpx transport can
be injected for offline tests. All request/response logging redacts the key.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import httpx

from ..errors import EndpointUnreachable

log = logging.getLogger(__name__)

ENV_BASE_URL = "FORESTLAB_LLM_BASE_URL"
ENV_MODEL = "FORESTLAB_LLM_MODEL"
ENV_API_KEY = "FORESTLAB_LLM_API_KEY"
ENV_TIMEOUT = "FORESTLAB_LLM_TIMEOUT"


@dataclass(frozen=True)
class LlmConfig:
    base_url: str
    model: str
    api_key: str = ""
    timeout_s: float = 30.0

    @classmethod
    def from_env(cls) -> "LlmConfig | None":
        base = os.environ.get(ENV_BASE_URL, "").strip()
        if not base:
            return None
        return cls(
            base_url=base,
            model=os.environ.get(ENV_MODEL, "default").strip() or "default",
            api_key=os.environ.get(ENV_API_KEY, ""),
            timeout_s=float(os.environ.get(ENV_TIMEOUT, "30") or 30),
        )


class LlmClient:
    """Minimal chat client: POST {base_url}/chat/completions."""

    def __init__(self, config: LlmConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._client = httpx.Client(base_url=config.base_url,
                                    timeout=config.timeout_s,
                                    transport=transport)

    def complete(self, messages: list[dict]) -> str:
        body = {"model": self.config.model, "messages": messages}
        headers = {}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        log.debug("llm request model=%s messages=%s key=%s",
                  self.config.model, json.dumps(messages)[:2000],
                  "<redacted>" if self.config.api_key else "<none>")
        try:
            resp = self._client.post("/chat/completions", json=body,
                                     headers=headers)
        except httpx.HTTPError as exc:
            raise EndpointUnreachable(f"completion endpoint error: {exc}") from None
        if resp.status_code >= 400:
            raise EndpointUnreachable(
                f"completion endpoint returned {resp.status_code}")
        try:
            doc = resp.json()
            content = doc["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError):
            raise EndpointUnreachable(
                "completion endpoint returned an unexpected body") from None
        if not isinstance(content, str):
            raise EndpointUnreachable("completion content is not text")
        log.debug("llm response %s", content[:2000])
        return content

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
