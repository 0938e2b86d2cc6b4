"""Pipeline configuration: one JSON file drives every subcommand.

The file holds partial overrides; anything omitted keeps the library
default, and unknown keys are rejected so typos fail loudly instead of
silently running with defaults.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .crawl import CrawlPolicy
from .extract import CdcParams
from .quality import CompliancePolicy, GopherThresholds
from .sample import ALGORITHM_BLAKE3, HashSelectSpec
from .scorer import MockProfile

#: Sites below this many compliant scored pages are reported as
#: "insufficient" rather than classified.
DEFAULT_MIN_COMPLIANT_PAGES = 15

SCORER_URL_ENV = "DEGENTWEB_SCORER_URL"


class ConfigError(ValueError):
    """Bad configuration file or missing run-time input."""


@dataclass(frozen=True)
class PipelinePaths:
    corpus: Path = Path("corpus.jsonl")
    model: Path = Path("model.json")
    reports: Path = Path("reports")


@dataclass(frozen=True)
class MockScorerConfig:
    seed: int = 0
    profile: MockProfile = field(default_factory=MockProfile)


@dataclass(frozen=True)
class RemoteScorerConfig:
    url: str
    batch_size: int = 16
    concurrency: int = 4

    def __post_init__(self) -> None:
        if not self.url:
            raise ConfigError("remote scorer url must be non-empty")
        if self.batch_size < 1 or self.concurrency < 1:
            raise ConfigError("batch and concurrency must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    paths: PipelinePaths = field(default_factory=PipelinePaths)
    compliance: CompliancePolicy = field(default_factory=CompliancePolicy)
    cdc: CdcParams = field(default_factory=CdcParams)
    crawl: CrawlPolicy = field(default_factory=CrawlPolicy)
    mock_scorer: MockScorerConfig | None = field(
        default_factory=MockScorerConfig)
    remote_scorer: RemoteScorerConfig | None = None
    sampling: HashSelectSpec = field(default_factory=lambda: HashSelectSpec(
        algorithm=ALGORITHM_BLAKE3, n=20))
    min_compliant_pages: int = DEFAULT_MIN_COMPLIANT_PAGES

    def __post_init__(self) -> None:
        backends = [b for b in (self.mock_scorer, self.remote_scorer)
                    if b is not None]
        if len(backends) != 1:
            raise ConfigError("exactly one scorer backend must be "
                              "configured (mock or remote)")
        if self.min_compliant_pages < 1:
            raise ConfigError("min_compliant_pages must be >= 1")


def default_config() -> PipelineConfig:
    return PipelineConfig()


def _build(cls, data: Mapping[str, Any], where: str,
           renames: Mapping[str, str] | None = None,
           nested: Mapping[str, Any] | None = None):
    """Construct a dataclass from a partial dict, rejecting unknown keys."""
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where} must be a JSON object")
    renames = renames or {}
    nested = nested or {}
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        name = renames.get(key, key)
        if name not in known:
            raise ConfigError(f"unknown key {key!r} in {where}")
        if name in nested:
            value = nested[name](value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad {where}: {exc}") from exc


def _paths_from(data: Mapping[str, Any]) -> PipelinePaths:
    return _build(PipelinePaths, data, "paths",
                  nested={"corpus": Path, "model": Path, "reports": Path})


def _compliance_from(data: Mapping[str, Any]) -> CompliancePolicy:
    return _build(
        CompliancePolicy, data, "compliance",
        nested={"gopher": lambda d: _build(
            GopherThresholds, d, "compliance.gopher",
            nested={"required_words": tuple})})


def _scorer_from(data: Mapping[str, Any]) -> dict[str, Any]:
    if not isinstance(data, Mapping):
        raise ConfigError("scorer must be a JSON object")
    unknown = set(data) - {"mock", "remote"}
    if unknown:
        raise ConfigError(f"unknown scorer backend keys: {sorted(unknown)}")
    out: dict[str, Any] = {"mock_scorer": None, "remote_scorer": None}
    if "mock" in data:
        out["mock_scorer"] = _build(
            MockScorerConfig, data["mock"], "scorer.mock",
            nested={"profile": lambda d: _build(MockProfile, d,
                                                "scorer.mock.profile")})
    if "remote" in data:
        out["remote_scorer"] = _build(RemoteScorerConfig, data["remote"],
                                      "scorer.remote",
                                      renames={"batch": "batch_size"})
    return out


def _sampling_from(data: Mapping[str, Any]) -> HashSelectSpec:
    return _build(HashSelectSpec, data, "sampling")


def config_from_dict(data: Mapping[str, Any]) -> PipelineConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a JSON object")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key == "paths":
            kwargs["paths"] = _paths_from(value)
        elif key == "compliance":
            kwargs["compliance"] = _compliance_from(value)
        elif key == "cdc":
            kwargs["cdc"] = _build(CdcParams, value, "cdc")
        elif key == "crawl":
            kwargs["crawl"] = _build(CrawlPolicy, value, "crawl")
        elif key == "scorer":
            kwargs.update(_scorer_from(value))
        elif key == "sampling":
            kwargs["sampling"] = _sampling_from(value)
        elif key == "min_compliant_pages":
            kwargs["min_compliant_pages"] = int(value)
        else:
            raise ConfigError(f"unknown top-level config key {key!r}")
    try:
        return PipelineConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config: {exc}") from exc


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    return config_from_dict(data)


def config_to_dict(config: PipelineConfig) -> dict:
    """Round-trippable plain-dict form (load(dump(c)) == c)."""
    out: dict[str, Any] = {
        "paths": {"corpus": str(config.paths.corpus),
                  "model": str(config.paths.model),
                  "reports": str(config.paths.reports)},
        "compliance": dataclasses.asdict(config.compliance),
        "cdc": dataclasses.asdict(config.cdc),
        "crawl": dataclasses.asdict(config.crawl),
        "sampling": {"algorithm": config.sampling.algorithm,
                     "n": config.sampling.n},
        "min_compliant_pages": config.min_compliant_pages,
    }
    if config.mock_scorer is not None:
        out["scorer"] = {"mock": {
            "seed": config.mock_scorer.seed,
            "profile": dataclasses.asdict(config.mock_scorer.profile)}}
    else:
        assert config.remote_scorer is not None
        out["scorer"] = {"remote": {
            "url": config.remote_scorer.url,
            "batch": config.remote_scorer.batch_size,
            "concurrency": config.remote_scorer.concurrency}}
    return out


def require_file(path: str | Path, what: str) -> Path:
    """Run-time existence check for a configured or flagged input."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path
