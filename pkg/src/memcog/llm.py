"""Language-model client contract and its implementations.

A request is {system_prompt, messages, temperature}; a response is {text}.
Two client families exist: a live HTTP client configured from environment
variables, and a deterministic fixture client keyed by request digest that
hard-fails on unknown requests (it never improvises). A recording wrapper
turns any client into fixture material.
"""

from __future__ import annotations

import json
import os
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .errors import ClientError, FixtureMissingError
from .textutil import digest

ENV_ENDPOINT = "MEMCOG_LLM_ENDPOINT"
ENV_API_KEY = "MEMCOG_LLM_API_KEY"
ENV_MODEL = "MEMCOG_LLM_MODEL"


@dataclass(frozen=True)
class LMRequest:
    system_prompt: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0

    @classmethod
    def build(cls, system_prompt: str, messages: list[tuple[str, str]],
              temperature: float = 0.0) -> "LMRequest":
        return cls(system_prompt, tuple((role, content) for role, content in messages),
                   temperature)

    def to_dict(self) -> dict:
        return {
            "system_prompt": self.system_prompt,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
        }


@dataclass
class LMResponse:
    text: str


def request_digest(request: LMRequest) -> str:
    return digest(request.to_dict())


class LanguageModelClient(Protocol):
    def complete(self, request: LMRequest) -> LMResponse: ...


class FixtureClient:
    """Replays recorded responses keyed by request digest; misses are hard errors."""

    def __init__(self, fixtures: dict[str, str] | str | Path | None = None):
        self.responses: dict[str, str] = {}
        if isinstance(fixtures, dict):
            self.responses.update(fixtures)
        elif fixtures is not None:
            self.load(fixtures)

    def load(self, source: str | Path) -> None:
        """Load digest->response maps from a JSON file or a directory of them."""
        source = Path(source)
        if source.is_dir():
            files = sorted(source.rglob("*.json"))
        elif source.is_file():
            files = [source]
        else:
            raise ClientError(f"fixture source {source} does not exist")
        for path in files:
            raw = json.loads(path.read_text(encoding="utf-8"))
            if not isinstance(raw, dict):
                raise ClientError(f"{path}: fixture file must hold a digest->text map")
            for key, value in raw.items():
                if not isinstance(value, str):
                    raise ClientError(f"{path}: fixture values must be strings")
                self.responses[key] = value

    def record(self, request: LMRequest, text: str) -> str:
        key = request_digest(request)
        self.responses[key] = text
        return key

    def complete(self, request: LMRequest) -> LMResponse:
        key = request_digest(request)
        if key not in self.responses:
            raise FixtureMissingError(key)
        return LMResponse(self.responses[key])

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = json.dumps(self.responses, ensure_ascii=False, sort_keys=True, indent=2)
        path.write_text(payload + "\n", encoding="utf-8")


class RecordingClient:
    """Wraps another client and captures every exchange for later replay."""

    def __init__(self, inner: LanguageModelClient):
        self.inner = inner
        self.captured: dict[str, str] = {}

    def complete(self, request: LMRequest) -> LMResponse:
        response = self.inner.complete(request)
        self.captured[request_digest(request)] = response.text
        return response

    def save(self, path: str | Path) -> None:
        FixtureClient(self.captured).save(path)


class LiveClient:
    """Minimal OpenAI-style chat client; endpoint and key come from the environment."""

    def __init__(self, endpoint: str | None = None, api_key: str | None = None,
                 model: str | None = None, timeout: float = 60.0):
        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT, "")
        self.api_key = api_key or os.environ.get(ENV_API_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.timeout = timeout
        if not self.endpoint or not self.api_key:
            raise ClientError(
                f"live client needs {ENV_ENDPOINT} and {ENV_API_KEY} in the environment"
            )

    def complete(self, request: LMRequest) -> LMResponse:
        payload = {
            "model": self.model,
            "temperature": request.temperature,
            "messages": [{"role": "system", "content": request.system_prompt}]
            + [{"role": r, "content": c} for r, c in request.messages],
        }
        data = json.dumps(payload).encode("utf-8")
        http_request = urllib.request.Request(
            self.endpoint,
            data=data,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
        )
        try:
            with urllib.request.urlopen(http_request, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except Exception as exc:
            raise ClientError(f"live client request failed: {exc}") from exc
        try:
            return LMResponse(body["choices"][0]["message"]["content"])
        except (KeyError, IndexError, TypeError) as exc:
            raise ClientError(f"unexpected response shape: {exc}") from exc


def extract_json(text: str) -> object:
    """Parse the first JSON value embedded in model output.

    Tolerates prose around a JSON object or array; raises ValueError otherwise.
    """
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    spans = []
    for opener, closer in (("[", "]"), ("{", "}")):
        start = text.find(opener)
        end = text.rfind(closer)
        if start != -1 and end > start:
            spans.append((start, end))
    for start, end in sorted(spans):  # outermost value first
        try:
            return json.loads(text[start : end + 1])
        except json.JSONDecodeError:
            continue
    raise ValueError("no JSON value found in model output")
