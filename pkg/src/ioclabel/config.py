"""Layered runtime settings for the pipeline and the CLI.

Values are resolved in precedence order: built-in defaults, then a TOML or
JSON config file, then IOCLABEL_* environment variables, then explicit flag
overrides. Per-family vote thresholds merge family-wise across layers.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .backends import BackendConfig
from .extract import FAMILIES
from .segment import SegmentationConfig
from .voting import DEFAULT_THRESHOLD, VoteThresholds

log = logging.getLogger(__name__)

ENV_PREFIX = "IOCLABEL_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    window: int = 8000
    overlap: float = 0.5
    thresholds: dict[str, float] = field(default_factory=dict)
    backend_kind: str = "mock"
    mock_fixture: str | None = None
    tld_file: str | None = None
    whitelist: str | None = None
    reputation_file: str | None = None
    exchange_file: str | None = None
    data_dir: str = "sessions"
    listen: str = "127.0.0.1:8400"
    endpoint_url: str = ""
    model_id: str = "mock"
    api_key_env: str = "IOCLABEL_API_KEY"
    max_concurrent: int = 4
    request_timeout: float = 30.0
    retry_limit: int = 2

    def segmentation(self) -> SegmentationConfig:
        return SegmentationConfig(window_size=self.window, overlap_fraction=self.overlap)

    def vote_thresholds(self) -> VoteThresholds:
        by_family = {family: DEFAULT_THRESHOLD for family in FAMILIES}
        by_family.update(self.thresholds)
        return VoteThresholds(by_family=by_family)

    def backend_config(self) -> BackendConfig:
        return BackendConfig(
            endpoint_url=self.endpoint_url,
            api_key_env_name=self.api_key_env,
            model_id=self.model_id,
            max_concurrent_requests=self.max_concurrent,
            request_timeout=self.request_timeout,
            retry_limit=self.retry_limit,
        )


_INT_KEYS = {"window", "max_concurrent", "retry_limit"}
_FLOAT_KEYS = {"overlap", "request_timeout"}
_STR_KEYS = {
    "backend_kind",
    "mock_fixture",
    "tld_file",
    "whitelist",
    "reputation_file",
    "exchange_file",
    "data_dir",
    "listen",
    "endpoint_url",
    "model_id",
    "api_key_env",
}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | {"thresholds"}


def parse_threshold_arg(text: str) -> tuple[str, float]:
    """Parse one "family=ratio" pair, e.g. "url=0.75"."""
    family, sep, ratio_text = text.partition("=")
    family = family.strip().lower()
    if not sep or family not in FAMILIES:
        raise ConfigError(f"threshold must look like <family>=<ratio> with family in {FAMILIES}, got {text!r}")
    try:
        ratio = float(ratio_text)
    except ValueError:
        raise ConfigError(f"threshold ratio is not a number: {text!r}") from None
    if not 0.0 <= ratio <= 1.0:
        raise ConfigError(f"threshold ratio out of [0, 1]: {text!r}")
    return family, ratio


def _coerce(key: str, value) -> object:
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def _load_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        if path.suffix == ".toml":
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        else:
            raw = json.loads(path.read_text(encoding="utf-8"))
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a table of settings")
    unknown = set(raw) - _ALL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {sorted(unknown)}")
    return raw


def _from_env(env: dict[str, str]) -> dict:
    values: dict = {}
    for key in _ALL_KEYS - {"thresholds"}:
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = raw
    thresholds = {}
    for family in FAMILIES:
        raw = env.get(f"{ENV_PREFIX}THRESHOLD_{family.upper()}")
        if raw is not None:
            thresholds[family] = parse_threshold_arg(f"{family}={raw}")[1]
    if thresholds:
        values["thresholds"] = thresholds
    return values


def load_config(
    config_file: str | Path | None = None,
    env: dict[str, str] | None = None,
    overrides: dict | None = None,
) -> Config:
    """Resolve settings. `overrides` entries set to None are ignored."""
    env = os.environ if env is None else env
    merged: dict = {}
    thresholds: dict[str, float] = {}

    layers = []
    if config_file is not None:
        layers.append(_load_file(config_file))
    layers.append(_from_env(dict(env)))
    if overrides:
        layers.append({k: v for k, v in overrides.items() if v is not None})

    for layer in layers:
        for key, value in layer.items():
            if key == "thresholds":
                if not isinstance(value, dict):
                    raise ConfigError(f"thresholds must be a table, got {value!r}")
                for family, ratio in value.items():
                    family, ratio = parse_threshold_arg(f"{family}={ratio}")
                    thresholds[family] = ratio
            elif key in _ALL_KEYS:
                merged[key] = _coerce(key, value)
            else:
                raise ConfigError(f"unknown setting {key!r}")

    config = Config(thresholds=thresholds, **merged)
    try:
        config.segmentation()
        config.vote_thresholds()
        config.backend_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if config.backend_kind not in ("mock", "http"):
        raise ConfigError(f"backend must be mock or http, got {config.backend_kind!r}")
    return config
