"""Service configuration: JSON file plus environment overrides."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Mapping

ENV_CONFIG = "SCORER_SERVICE_CONFIG"
_ENV_FIELDS = {
    "SCORER_SERVICE_OBSERVER": ("observer_model", str),
    "SCORER_SERVICE_PERFORMER": ("performer_model", str),
    "SCORER_SERVICE_DEVICE": ("device", str),
    "SCORER_SERVICE_MAX_INPUT_TOKENS": ("max_input_tokens", int),
    "SCORER_SERVICE_PORT": ("port", int),
}
_DEVICES = ("cpu", "cuda", "mps")


class ConfigError(ValueError):
    """A service configuration that cannot be used."""


@dataclass(frozen=True)
class ServiceConfig:
    """The model pair, device, input cap, and listening port."""

    observer_model: str = "ngram-observer-v1"
    performer_model: str = "ngram-performer-v1"
    device: str = "cpu"
    max_input_tokens: int = 2048
    port: int = 8732

    def __post_init__(self) -> None:
        if self.max_input_tokens < 512:
            raise ConfigError("max_input_tokens must be >= 512, got "
                              f"{self.max_input_tokens}")
        if self.device not in _DEVICES:
            raise ConfigError(f"device must be one of {_DEVICES}, "
                              f"got {self.device!r}")
        if not (1 <= self.port <= 65535):
            raise ConfigError(f"port out of range: {self.port}")
        if not self.observer_model or not self.performer_model:
            raise ConfigError("both model ids must be non-empty")

    @property
    def model_label(self) -> str:
        return f"{self.observer_model}+{self.performer_model}"


def _from_dict(data: dict) -> ServiceConfig:
    known = {f.name for f in fields(ServiceConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ServiceConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_service_config(path: str | Path | None = None,
                        env: Mapping[str, str] = os.environ) -> ServiceConfig:
    """Defaults, then the JSON file, then environment overrides."""
    if path is None and env.get(ENV_CONFIG):
        path = env[ENV_CONFIG]
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: "
                              f"{exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        config = _from_dict(data)
    else:
        config = ServiceConfig()

    overrides = {}
    for var, (field_name, cast) in _ENV_FIELDS.items():
        if env.get(var):
            try:
                overrides[field_name] = cast(env[var])
            except ValueError as exc:
                raise ConfigError(f"{var}={env[var]!r}: {exc}") from exc
    return replace(config, **overrides) if overrides else config
