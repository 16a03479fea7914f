"""HTTPS backends for chat-completion and embedding providers.

Speaks the OpenAI-compatible wire protocol that both configured providers
expose; credentials come from environment variables only. Retry policy lives
in the gateway, so this layer just classifies failures as transport-level
(retriable) or provider refusals (permanent).
"""

from __future__ import annotations

import os

import requests

from .gateway import ModelId, PromptTemplate, ProviderRefusalError, TransportError

_PROVIDERS = {
    "openai": ("https://api.openai.com/v1", "OPENAI_API_KEY"),
    "google": ("https://generativelanguage.googleapis.com/v1beta/openai", "GOOGLE_API_KEY"),
}


class MissingCredentialsError(Exception):
    """No API key in the environment for a configured provider."""


def _provider_settings(provider: str) -> tuple[str, str]:
    base_url, key_var = _PROVIDERS.get(
        provider, (f"https://{provider}.invalid/v1", f"{provider.upper()}_API_KEY"))
    base_url = os.environ.get(f"{provider.upper()}_BASE_URL", base_url)
    return base_url, key_var


def check_credentials(providers: set[str]) -> None:
    for provider in sorted(providers):
        _, key_var = _provider_settings(provider)
        if not os.environ.get(key_var):
            raise MissingCredentialsError(
                f"live backend needs {key_var} set for provider {provider!r}")


class LiveBackend:
    """One HTTP session shared across providers; keys resolved per request."""

    def __init__(self, timeout: float = 120.0):
        self.timeout = timeout
        self._session = requests.Session()

    def _post(self, model: ModelId, endpoint: str, payload: dict) -> dict:
        base_url, key_var = _provider_settings(model.provider)
        key = os.environ.get(key_var)
        if not key:
            raise MissingCredentialsError(
                f"live backend needs {key_var} set for provider {model.provider!r}")
        try:
            response = self._session.post(
                f"{base_url}/{endpoint}", json=payload,
                headers={"Authorization": f"Bearer {key}"}, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"{model}: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransportError(f"{model}: HTTP {response.status_code}: "
                                 f"{response.text[:300]}")
        if response.status_code >= 400:
            raise ProviderRefusalError(f"{model}: HTTP {response.status_code}: "
                                       f"{response.text[:500]}")
        try:
            return response.json()
        except ValueError as exc:
            raise TransportError(f"{model}: non-JSON response body") from exc

    def complete(self, template: PromptTemplate, bindings: dict, rendered: str,
                 model: ModelId, params: dict) -> str:
        payload = {"model": model.name,
                   "messages": [{"role": "user", "content": rendered}], **params}
        data = self._post(model, "chat/completions", payload)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"{model}: malformed completion response") from exc

    def embed(self, text: str, model: ModelId) -> list[float]:
        data = self._post(model, "embeddings", {"model": model.name, "input": text})
        try:
            return data["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"{model}: malformed embedding response") from exc
