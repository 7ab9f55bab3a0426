"""Pluggable text-completion backends for the labeling pipeline.

Three implementations: a generic HTTP chat-completion client, a deterministic
mock driven by a fixture mapping, and a fault-injecting mock for resilience
tests. All of them expose complete(prompt) -> text and a model_id.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx

from .extract import hash_type_for

log = logging.getLogger(__name__)


class BackendUnavailable(Exception):
    """Transport-level failure talking to the completion backend."""


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str = ""
    api_key_env_name: str = "IOCLABEL_API_KEY"
    model_id: str = "mock"
    max_concurrent_requests: int = 4
    request_timeout: float = 30.0
    retry_limit: int = 2

    def __post_init__(self) -> None:
        if self.max_concurrent_requests < 1:
            raise ValueError("max_concurrent_requests must be >= 1")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")


class CompletionBackend(Protocol):
    model_id: str

    def complete(self, prompt: str) -> str: ...


# --------- HTTP client ---------


class HttpCompletionBackend:
    """OpenAI-compatible chat-completion client."""

    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self.model_id = config.model_id
        headers = {}
        api_key = os.environ.get(config.api_key_env_name, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            headers=headers, timeout=config.request_timeout, transport=transport
        )

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        try:
            response = self._client.post(self.config.endpoint_url, json=payload)
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"transport failure: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailable(f"backend returned HTTP {response.status_code}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendUnavailable(f"malformed backend response: {exc}") from exc

    def close(self) -> None:
        self._client.close()


# --------- Mock clients ---------

_HEADER_RE = re.compile(r"^Extracted (URLs|IPs|Domains|Hashes):[ \t]*$", re.MULTILINE)

_FAMILY_BY_HEADER = {"URLs": "url", "IPs": "ip4", "Domains": "domain", "Hashes": "hash"}


def parse_prompt_indicators(prompt: str) -> tuple[str, list[str]]:
    """Recover (family, values) from a rendered prompt's indicator block."""
    matches = list(_HEADER_RE.finditer(prompt))
    if not matches:
        raise ValueError("prompt has no indicator list header")
    last = matches[-1]
    family = _FAMILY_BY_HEADER[last.group(1)]
    values = []
    for line in prompt[last.end() :].splitlines():
        line = line.strip()
        if line:
            values.append(line)
    return family, values


def wire_type_for(family: str, value: str) -> str:
    """Concrete type string for a value of the given family."""
    if family == "hash":
        return hash_type_for(value).value
    return family


class MockCompletionBackend:
    """Deterministic backend answering from a {type:value -> label} fixture."""

    model_id = "mock"

    def __init__(self, mapping: dict[str, dict[str, str]]):
        self._mapping = mapping

    def complete(self, prompt: str) -> str:
        family, values = parse_prompt_indicators(prompt)
        lines = []
        for value in values:
            entry = self._mapping.get(f"{wire_type_for(family, value)}:{value}")
            if entry is None:
                continue
            lines.append(f"{value},{entry['label']},{entry['justification']}")
        return "\n".join(lines)


class FaultInjectingBackend:
    """Mock that deterministically garbles or drops a fraction of lines.

    The RNG is seeded per prompt so concurrency and dispatch order never
    change which lines are affected.
    """

    model_id = "mock-faulty"

    def __init__(
        self,
        mapping: dict[str, dict[str, str]],
        malformed_rate: float = 0.0,
        drop_rate: float = 0.0,
        seed: int = 0,
    ):
        self._mapping = mapping
        self.malformed_rate = malformed_rate
        self.drop_rate = drop_rate
        self.seed = seed

    def complete(self, prompt: str) -> str:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        rng = random.Random(f"{self.seed}:{digest}")
        family, values = parse_prompt_indicators(prompt)
        lines = []
        for value in values:
            entry = self._mapping.get(f"{wire_type_for(family, value)}:{value}")
            if entry is None:
                continue
            roll = rng.random()
            if roll < self.drop_rate:
                continue
            if roll < self.drop_rate + self.malformed_rate:
                lines.append(f"{value};{entry['label']};{entry['justification']}")
                continue
            lines.append(f"{value},{entry['label']},{entry['justification']}")
        return "\n".join(lines)


def load_mock_fixture(path: str | Path) -> tuple[dict[str, dict[str, str]], dict]:
    """Read a mock fixture file: {"type:value": {label, justification}, "faults": {...}}."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    faults = raw.pop("faults", {})
    return raw, faults


def backend_from_fixture(path: str | Path) -> CompletionBackend:
    """Build the right mock for a fixture file (faulty when it declares faults)."""
    mapping, faults = load_mock_fixture(path)
    if faults:
        return FaultInjectingBackend(
            mapping,
            malformed_rate=float(faults.get("malformed_rate", 0.0)),
            drop_rate=float(faults.get("drop_rate", 0.0)),
            seed=int(faults.get("seed", 0)),
        )
    return MockCompletionBackend(mapping)
