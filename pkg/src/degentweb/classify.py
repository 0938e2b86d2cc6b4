"""Site-level classification.

A site becomes a 9-value vector (the 10th..90th percentiles of its per-page
detector scores); a linear SVM trained with Pegasos-style projected
stochastic subgradient steps separates LLM-dominant sites from the rest.
Lower scores mean more LLM-like, so the decision rule is: llm-dominant iff
w.x + b < 0, with a tie at exactly zero resolved to not-llm-dominant (the
pipeline prioritizes a low false-positive rate).
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

LABEL_LLM_DOMINANT = "llm-dominant"
LABEL_NOT = "not"
LABELS = (LABEL_LLM_DOMINANT, LABEL_NOT)

#: Reported for sites with too few usable pages to classify at all.
LABEL_INSUFFICIENT = "insufficient"

GROUP_COMPANY = "company"
GROUP_PERSONAL = "personal"
GROUP_OTHER = "other"
GROUP_SYNTHETIC = "synthetic"
GROUPS = (GROUP_COMPANY, GROUP_PERSONAL, GROUP_OTHER, GROUP_SYNTHETIC)

DECILE_PERCENTILES = (10, 20, 30, 40, 50, 60, 70, 80, 90)

MODEL_VERSION = 1


class ClassifyError(ValueError):
    """Bad training data, vector, or model file."""


@dataclass(frozen=True)
class DecileVector:
    """Percentiles 10..90 of a site's page scores, plus the page count."""

    values: tuple[float, ...]
    n_pages: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != len(DECILE_PERCENTILES):
            raise ClassifyError(
                f"expected {len(DECILE_PERCENTILES)} values, "
                f"got {len(self.values)}")
        if any(not math.isfinite(v) for v in self.values):
            raise ClassifyError("vector values must be finite")
        if any(a > b for a, b in zip(self.values, self.values[1:])):
            raise ClassifyError("percentile values must be non-decreasing")
        if self.n_pages < 1:
            raise ClassifyError("n_pages must be >= 1")


@dataclass(frozen=True)
class LabeledSite:
    site: str
    vector: DecileVector
    label: str
    group: str
    #: Raw per-page scores, kept when the caller wants to re-aggregate at a
    #: smaller pages-per-site cap (the accuracy-vs-pages sweep).
    page_scores: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise ClassifyError(f"unknown label {self.label!r}")
        if self.group not in GROUPS:
            raise ClassifyError(f"unknown group {self.group!r}")
        if self.page_scores is not None:
            object.__setattr__(self, "page_scores",
                               tuple(float(s) for s in self.page_scores))


@dataclass(frozen=True)
class SvmHyperparams:
    lam: float = 1e-3
    epochs: int = 200
    seed: int = 42

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ClassifyError("lambda must be positive")
        if self.epochs < 1:
            raise ClassifyError("epochs must be >= 1")


@dataclass(frozen=True)
class SvmModel:
    weights: tuple[float, ...]
    bias: float
    means: tuple[float, ...]
    sds: tuple[float, ...]
    hyperparams: SvmHyperparams = field(default_factory=SvmHyperparams)
    trained_at: str | None = None
    training_stats: dict | None = None

    def __post_init__(self) -> None:
        n = len(DECILE_PERCENTILES)
        if not (len(self.weights) == len(self.means) == len(self.sds) == n):
            raise ClassifyError(f"model must have {n} weights/means/sds")
        if any(not math.isfinite(w) for w in self.weights):
            raise ClassifyError("weights must be finite")
        if not math.isfinite(self.bias):
            raise ClassifyError("bias must be finite")
        if any(sd <= 0 for sd in self.sds):
            raise ClassifyError("feature sds must be positive")


def _percentile(sorted_scores: Sequence[float], p: int) -> float:
    rank = p / 100 * (len(sorted_scores) - 1)
    lo = math.floor(rank)
    hi = math.ceil(rank)
    if lo == hi:
        return sorted_scores[lo]
    frac = rank - lo
    return sorted_scores[lo] + (sorted_scores[hi] - sorted_scores[lo]) * frac


def percentile(scores: Sequence[float], p: float) -> float:
    """Linear-interpolation percentile at rank p/100 * (n-1)."""
    if not scores:
        raise ClassifyError("cannot take a percentile of no scores")
    if not 0 <= p <= 100:
        raise ClassifyError(f"percentile must be in [0, 100], got {p}")
    if any(not math.isfinite(s) for s in scores):
        raise ClassifyError("scores must be finite")
    return _percentile(sorted(float(s) for s in scores), p)


def decile_vector(scores: Sequence[float]) -> DecileVector:
    """Sort ascending and read the nine percentiles by linear interpolation
    at rank p/100 * (n-1)."""
    if not scores:
        raise ClassifyError("cannot aggregate an empty score list")
    if any(not math.isfinite(s) for s in scores):
        raise ClassifyError("scores must be finite")
    ordered = sorted(float(s) for s in scores)
    return DecileVector(
        values=tuple(_percentile(ordered, p) for p in DECILE_PERCENTILES),
        n_pages=len(ordered))


def _standardize(model: SvmModel, values: Sequence[float]) -> list[float]:
    return [(v - m) / sd for v, m, sd in zip(values, model.means, model.sds)]


def _fit_scaling(rows: list[tuple[float, ...]]) -> tuple[tuple[float, ...],
                                                         tuple[float, ...]]:
    n = len(rows)
    dims = len(rows[0])
    means = tuple(sum(r[j] for r in rows) / n for j in range(dims))
    sds = []
    for j in range(dims):
        var = sum((r[j] - means[j]) ** 2 for r in rows) / n
        sd = math.sqrt(var)
        # A constant feature carries no signal; unit scale keeps it inert
        # without dividing by zero.
        sds.append(sd if sd > 0 else 1.0)
    return means, tuple(sds)


def _objective(lam: float, w: list[float], b: float,
               rows: list[list[float]], ys: list[int]) -> float:
    hinge = 0.0
    for x, y in zip(rows, ys):
        margin = y * (sum(wj * xj for wj, xj in zip(w, x)) + b)
        hinge += max(0.0, 1.0 - margin)
    return 0.5 * lam * sum(wj * wj for wj in w) + hinge / len(rows)


def train_svm(data: Sequence[LabeledSite],
              hp: SvmHyperparams = SvmHyperparams(),
              trained_at: str | None = None) -> SvmModel:
    """Hinge-loss linear SVM via Pegasos: eta_t = 1/(lambda t) steps over
    shuffled data, weights projected onto the 1/sqrt(lambda) ball, bias
    unregularized.  Deterministic for a given seed."""
    if not data:
        raise ClassifyError("no training data")
    labels = {site.label for site in data}
    if len(labels) < 2:
        raise ClassifyError(f"training data has a single class: {labels}")
    raw = [site.vector.values for site in data]
    if any(not math.isfinite(v) for row in raw for v in row):
        raise ClassifyError("training features must be finite")
    ys = [-1 if site.label == LABEL_LLM_DOMINANT else +1 for site in data]

    means, sds = _fit_scaling(raw)
    rows = [[(v - m) / sd for v, m, sd in zip(row, means, sds)]
            for row in raw]
    dims = len(DECILE_PERCENTILES)
    w = [0.0] * dims
    b = 0.0
    rng = random.Random(hp.seed)
    order = list(range(len(rows)))
    radius = 1.0 / math.sqrt(hp.lam)
    t = 0
    objective_by_epoch: list[float] = []
    for _ in range(hp.epochs):
        rng.shuffle(order)
        for i in order:
            t += 1
            eta = 1.0 / (hp.lam * t)
            x, y = rows[i], ys[i]
            margin = y * (sum(wj * xj for wj, xj in zip(w, x)) + b)
            decay = 1.0 - eta * hp.lam
            if margin < 1.0:
                w = [decay * wj + eta * y * xj for wj, xj in zip(w, x)]
                b += eta * y
            else:
                w = [decay * wj for wj in w]
            norm = math.sqrt(sum(wj * wj for wj in w))
            if norm > radius:
                w = [wj * (radius / norm) for wj in w]
        objective_by_epoch.append(_objective(hp.lam, w, b, rows, ys))

    correct = sum(
        1 for x, y in zip(rows, ys)
        if (LABEL_LLM_DOMINANT
            if sum(wj * xj for wj, xj in zip(w, x)) + b < 0 else LABEL_NOT)
        == (LABEL_LLM_DOMINANT if y == -1 else LABEL_NOT))
    stats = {
        "n_train": len(rows),
        "training_accuracy": correct / len(rows),
        "final_objective": objective_by_epoch[-1],
        "objective_by_epoch": objective_by_epoch,
    }
    return SvmModel(weights=tuple(w), bias=b, means=means, sds=sds,
                    hyperparams=hp, trained_at=trained_at,
                    training_stats=stats)


def predict(model: SvmModel, vector: DecileVector) -> tuple[str, float]:
    """Label plus signed distance (w.x + b)/||w||; negative side is
    llm-dominant, an exact 0 resolves to not-llm-dominant."""
    x = _standardize(model, vector.values)
    margin = sum(wj * xj for wj, xj in zip(model.weights, x)) + model.bias
    norm = math.sqrt(sum(wj * wj for wj in model.weights))
    distance = margin / norm if norm > 0 else margin
    label = LABEL_LLM_DOMINANT if distance < 0 else LABEL_NOT
    return label, distance


def accuracy(model: SvmModel, data: Iterable[LabeledSite]) -> float:
    sites = list(data)
    if not sites:
        raise ClassifyError("no evaluation data")
    correct = sum(1 for s in sites if predict(model, s.vector)[0] == s.label)
    return correct / len(sites)


def cap_pages(site: LabeledSite, pages_per_site: int) -> LabeledSite:
    """Rebuild the site's vector from its first ``pages_per_site`` scores."""
    if pages_per_site < 1:
        raise ClassifyError("pages_per_site must be >= 1")
    if site.page_scores is None:
        raise ClassifyError(
            f"site {site.site!r} has no page scores to re-aggregate")
    subset = site.page_scores[:pages_per_site]
    return LabeledSite(site=site.site, vector=decile_vector(subset),
                       label=site.label, group=site.group,
                       page_scores=site.page_scores)


@dataclass(frozen=True)
class FoldResult:
    train_group: str
    test_groups: tuple[str, ...]
    n_train: int
    n_test: int
    accuracy: float


@dataclass(frozen=True)
class CrossValidationResult:
    folds: tuple[FoldResult, ...]
    mean_accuracy: float
    pages_per_site: int | None


def ood_cross_validate(data: Sequence[LabeledSite],
                       pages_per_site: int | None = None,
                       hp: SvmHyperparams = SvmHyperparams(),
                       ) -> CrossValidationResult:
    """Two out-of-distribution folds: train on company sites, test on
    personal+other; then train on personal, test on company+other."""
    if pages_per_site is not None:
        data = [cap_pages(site, pages_per_site) for site in data]
    by_group: dict[str, list[LabeledSite]] = {}
    for site in data:
        by_group.setdefault(site.group, []).append(site)
    for group in (GROUP_COMPANY, GROUP_PERSONAL, GROUP_OTHER):
        if not by_group.get(group):
            raise ClassifyError(f"group {group!r} has no sites")

    folds = []
    for train_group in (GROUP_COMPANY, GROUP_PERSONAL):
        test_groups = tuple(g for g in (GROUP_COMPANY, GROUP_PERSONAL)
                            if g != train_group) + (GROUP_OTHER,)
        train = by_group[train_group]
        test = [s for g in test_groups for s in by_group.get(g, [])]
        model = train_svm(train, hp)
        folds.append(FoldResult(
            train_group=train_group,
            test_groups=test_groups,
            n_train=len(train),
            n_test=len(test),
            accuracy=accuracy(model, test)))
    mean = sum(f.accuracy for f in folds) / len(folds)
    return CrossValidationResult(folds=tuple(folds), mean_accuracy=mean,
                                 pages_per_site=pages_per_site)


# ---------------------------------------------------------------------------
# Model file IO
# ---------------------------------------------------------------------------

def model_to_dict(model: SvmModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "weights": list(model.weights),
        "bias": model.bias,
        "scaling": {"means": list(model.means), "sds": list(model.sds)},
        "hyperparams": {"lambda": model.hyperparams.lam,
                        "epochs": model.hyperparams.epochs,
                        "seed": model.hyperparams.seed},
        "trained_at": model.trained_at,
        "training_stats": model.training_stats,
    }


def model_from_dict(data: dict) -> SvmModel:
    try:
        version = data["version"]
        if version != MODEL_VERSION:
            raise ClassifyError(f"unsupported model version {version!r}")
        hp = data["hyperparams"]
        return SvmModel(
            weights=tuple(float(w) for w in data["weights"]),
            bias=float(data["bias"]),
            means=tuple(float(m) for m in data["scaling"]["means"]),
            sds=tuple(float(s) for s in data["scaling"]["sds"]),
            hyperparams=SvmHyperparams(lam=float(hp["lambda"]),
                                       epochs=int(hp["epochs"]),
                                       seed=int(hp["seed"])),
            trained_at=data.get("trained_at"),
            training_stats=data.get("training_stats"),
        )
    except (KeyError, TypeError) as exc:
        raise ClassifyError(f"malformed model file: {exc}") from exc


def save_model(model: SvmModel, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def load_model(path: str | Path) -> SvmModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ClassifyError(f"malformed model file: {exc}") from exc
    if not isinstance(data, dict):
        raise ClassifyError("model file must hold a JSON object")
    return model_from_dict(data)
