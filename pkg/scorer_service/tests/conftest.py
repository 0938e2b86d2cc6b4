"""Shared fixtures: the bundled model pair, scorer, and committed data."""
from __future__ import annotations

import json
from importlib import resources

import pytest

from scorer_service.lm import build_models
from scorer_service.scoring import PerplexityRatioScorer


def _load_data(name: str) -> dict:
    path = resources.files("scorer_service") / "data" / name
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def models():
    return build_models("ngram-observer-v1", "ngram-performer-v1")


@pytest.fixture(scope="session")
def scorer(models):
    observer, performer = models
    return PerplexityRatioScorer(observer=observer, performer=performer,
                                 max_input_tokens=2048)


@pytest.fixture(scope="session")
def fixture_snippets():
    return _load_data("fixture_snippets.json")


@pytest.fixture(scope="session")
def fixture_manifest():
    return _load_data("fixture_manifest.json")
