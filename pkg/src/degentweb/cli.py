"""Command surface: one config file, one subcommand per pipeline stage.

Exit status is 0 on success, 1 on operational errors (missing files, bad
records, scorer failures) and 2 on usage errors.  Every subcommand prints
a human-readable summary by default and a JSON object with ``--json``;
outputs are byte-identical when inputs and seeds are unchanged.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from collections import Counter
from datetime import date
from pathlib import Path
from typing import Sequence

from . import __version__
from .analyze import (
    AnalyzeError,
    CHATGPT_CUTOFF,
    MonetizationSignals,
    cluster_shared_ids,
    cohort_prevalence,
    detect_transition,
    extract_signals,
    infer_page_date,
    read_affiliate_patterns,
    read_easylist_selectors,
    shuffle_null,
)
from .classify import (
    ClassifyError,
    LABEL_INSUFFICIENT,
    LABEL_LLM_DOMINANT,
    LABEL_NOT,
    LABELS,
    GROUPS,
    LabeledSite,
    SvmHyperparams,
    accuracy,
    decile_vector,
    load_model,
    ood_cross_validate,
    predict,
    save_model,
    train_svm,
)
from .config import (
    SCORER_URL_ENV,
    ConfigError,
    MockScorerConfig,
    PipelineConfig,
    _compliance_from,
    default_config,
    load_config,
    require_file,
)
from .corpus import (
    CorpusError,
    SOURCE_PRE_EXTRACTED,
    group_by_site,
    read_records,
    write_records,
)
from .crawl import CrawlError, RequestsFetcher, TransportError, crawl_sites
from .extract import (build_site_index, chunk_text, duplicate_ratio,
                      extract_main_content)
from .quality import QualityError, assess_text
from .sample import HashSelectSpec, SampleError, hash_select, stride_sample
from .scorer import MockScorer, RemoteScorer, ScorerError, score_pages
from .sitegen import (
    STYLE_HUMAN,
    STYLE_LLM,
    STYLES,
    DirectoryFetcher,
    SitegenError,
    mock_site_docs,
    mock_site_plan,
    render_site,
    write_site,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2

STYLE_MIXED = "mixed"
MANIFEST_NAME = "manifest.json"
LABELS_NAME = "labels.json"

_OPERATIONAL_ERRORS = (ConfigError, CorpusError, ClassifyError, QualityError,
                       SampleError, AnalyzeError, SitegenError, CrawlError,
                       TransportError, ScorerError, OSError)


class UsageError(Exception):
    """Bad flag combination or malformed command-line input."""


# ---------------------------------------------------------------------------
# Shared plumbing


def _load_pipeline_config(args) -> PipelineConfig:
    config = load_config(args.config) if args.config else default_config()
    if getattr(args, "policy", None):
        policy_path = require_file(args.policy, "policy file")
        try:
            data = json.loads(policy_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"policy file {policy_path} is not valid "
                              f"JSON: {exc}")
        config = dataclasses.replace(config,
                                     compliance=_compliance_from(data))
    return config


def _scorer_backend(config: PipelineConfig, args):
    """Backend per precedence: --mock / --scorer-url flags, then the
    DEGENTWEB_SCORER_URL environment variable, then the config file."""
    if args.mock and args.scorer_url:
        raise UsageError("--mock and --scorer-url are mutually exclusive")
    if args.mock:
        mock = config.mock_scorer or MockScorerConfig()
        seed = args.seed if args.seed is not None else mock.seed
        return MockScorer(seed=seed, profile=mock.profile), "mock"
    url = args.scorer_url or os.environ.get(SCORER_URL_ENV)
    if url:
        remote = config.remote_scorer
        return RemoteScorer(
            url,
            batch_size=remote.batch_size if remote else 16,
            concurrency=remote.concurrency if remote else 4), url
    if config.remote_scorer is not None:
        remote = config.remote_scorer
        return RemoteScorer(remote.url, batch_size=remote.batch_size,
                            concurrency=remote.concurrency), remote.url
    mock = config.mock_scorer or MockScorerConfig()
    seed = args.seed if args.seed is not None else mock.seed
    return MockScorer(seed=seed, profile=mock.profile), "mock"


def _read_names(path: str | Path) -> list[str]:
    text = require_file(path, "names file").read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def _load_labels(path: str | Path) -> dict[str, tuple[str, str]]:
    """{site: (label, group)} from a JSON labels file."""
    labels_path = require_file(path, "labels file")
    try:
        data = json.loads(labels_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ClassifyError(f"labels file {labels_path} is not valid "
                            f"JSON: {exc}")
    if not isinstance(data, dict):
        raise ClassifyError("labels file must map site -> {label, group}")
    out: dict[str, tuple[str, str]] = {}
    for site, entry in data.items():
        if not isinstance(entry, dict) or "label" not in entry \
                or "group" not in entry:
            raise ClassifyError(
                f"labels entry for {site!r} needs 'label' and 'group'")
        label, group = entry["label"], entry["group"]
        if label not in LABELS:
            raise ClassifyError(f"unknown label {label!r} for {site!r}")
        if group not in GROUPS:
            raise ClassifyError(f"unknown group {group!r} for {site!r}")
        out[site] = (label, group)
    return out


def _site_scores(records) -> dict[str, list[float]]:
    """Per-site page scores in record order (sites in first-seen order)."""
    out: dict[str, list[float]] = {}
    for record in records:
        out.setdefault(record.site, [])
        if record.score is not None:
            out[record.site].append(record.score)
    return out


def _classify_sites(records, model, min_pages: int) -> list[dict]:
    results = []
    for site, scores in _site_scores(records).items():
        if len(scores) < min_pages:
            results.append({"site": site, "label": LABEL_INSUFFICIENT,
                            "distance": None, "n_pages": len(scores),
                            "deciles": None})
            continue
        vector = decile_vector(scores)
        label, distance = predict(model, vector)
        results.append({"site": site, "label": label, "distance": distance,
                        "n_pages": vector.n_pages,
                        "deciles": list(vector.values)})
    results.sort(key=lambda r: r["site"])
    return results


def _labeled_sites(records, labels: dict[str, tuple[str, str]],
                   min_pages: int) -> tuple[list[LabeledSite], list[str],
                                            list[str]]:
    """(usable sites, insufficient sites, unlabeled sites)."""
    usable: list[LabeledSite] = []
    insufficient: list[str] = []
    unlabeled: list[str] = []
    for site, scores in _site_scores(records).items():
        if site not in labels:
            unlabeled.append(site)
        elif len(scores) < min_pages:
            insufficient.append(site)
        else:
            label, group = labels[site]
            usable.append(LabeledSite(site=site,
                                      vector=decile_vector(scores),
                                      label=label, group=group,
                                      page_scores=tuple(scores)))
    return usable, sorted(insufficient), sorted(unlabeled)


def _site_csv_text(results: list[dict]) -> str:
    from .report import SITE_CSV_HEADER, site_rows
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SITE_CSV_HEADER)
    writer.writerows(
        ["" if cell is None else cell for cell in row]
        for row in site_rows(results))
    return buffer.getvalue()


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_sample(args) -> dict:
    config = _load_pipeline_config(args)
    names = _read_names(args.names_file)
    if args.stride is not None:
        selected = stride_sample(names, args.stride, args.offset)
        method = f"stride-{args.stride}+{args.offset}"
    else:
        spec = HashSelectSpec(
            algorithm=args.algorithm or config.sampling.algorithm,
            n=args.n if args.n is not None else config.sampling.n)
        selected = hash_select(names, spec)
        method = f"{spec.algorithm}-top-{spec.n}"
    if args.out:
        Path(args.out).write_text(
            "".join(name + "\n" for name in selected), encoding="utf-8")
    return {"input_names": len(names), "method": method,
            "selected": list(selected),
            "output": str(args.out) if args.out else None,
            "_text": "\n".join(selected)}


def _cmd_sitegen(args) -> dict:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    seed = args.seed if args.seed is not None else 0
    out_dir = Path(args.out_dir)
    fetcher = DirectoryFetcher(out_dir)
    manifest_sites = []
    labels: dict[str, dict[str, str]] = {}
    group_cycle = (GROUPS[0], GROUPS[1], GROUPS[2])
    for i in range(args.count):
        name = f"{args.name_prefix}-{i:03d}"
        if args.style == STYLE_MIXED:
            style = STYLE_LLM if i % 2 else STYLE_HUMAN
        else:
            style = args.style
        site_seed = seed + i
        plan = mock_site_plan(name, site_seed)
        rendered = render_site(plan,
                               mock_site_docs(plan, site_seed, style))
        write_site(rendered, out_dir / name)
        host = f"{name}{fetcher.domain_suffix}"
        manifest_sites.append({"name": name, "host": host, "style": style,
                               "seed": site_seed,
                               "slugs": list(plan.slugs())})
        labels[host] = {
            "label": (LABEL_LLM_DOMINANT if style == STYLE_LLM
                      else LABEL_NOT),
            "group": group_cycle[i % len(group_cycle)],
        }
    manifest = {"seed": seed, "style": args.style, "sites": manifest_sites}
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    (out_dir / LABELS_NAME).write_text(
        json.dumps(labels, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    return {"out_dir": str(out_dir), "sites": len(manifest_sites),
            "pages": sum(len(s["slugs"]) for s in manifest_sites),
            "manifest": str(out_dir / MANIFEST_NAME),
            "labels": str(out_dir / LABELS_NAME)}


def _sites_from_manifest(root: Path, fetcher: DirectoryFetcher,
                         ) -> dict[str, list[str]]:
    manifest_path = require_file(root / MANIFEST_NAME, "site manifest")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    sites: dict[str, list[str]] = {}
    for entry in manifest["sites"]:
        sites[entry["host"]] = [fetcher.url_for(entry["name"], slug)
                                for slug in entry["slugs"]]
    return sites


def _cmd_crawl(args) -> dict:
    config = _load_pipeline_config(args)
    policy = config.crawl
    if args.from_dir:
        root = Path(args.from_dir)
        fetcher = DirectoryFetcher(root)
        sites = _sites_from_manifest(root, fetcher)
        # No live server is involved, so the politeness delay is waived.
        policy = dataclasses.replace(policy, per_host_delay_s=1e-6)
    else:
        if not args.sites_file:
            raise UsageError("crawl needs --sites-file or --from-dir")
        sites_path = require_file(args.sites_file, "sites file")
        data = json.loads(sites_path.read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise CrawlError("sites file must map site -> [candidate URLs]")
        sites = {site: list(urls) for site, urls in data.items()}
        fetcher = RequestsFetcher()
    outcome = crawl_sites(sites, policy, fetcher,
                          concurrency=args.concurrency,
                          compliance=config.compliance)
    all_records = [record for site in sites
                   for record in outcome[site][0]]
    count = write_records(all_records, args.out)
    per_site = {
        site: {"pages": stats.pages_fetched,
               "requests": stats.requests_made,
               "errors": stats.errors,
               "robots_denied": stats.robots_denied,
               "stopped": stats.stopped_reason}
        for site, (_, stats) in sorted(outcome.items())}
    return {"sites": per_site, "pages_written": count,
            "output": str(args.out)}


def _cmd_filter(args) -> dict:
    config = _load_pipeline_config(args)
    records = read_records(require_file(args.records, "records file"))
    filtered = []
    n_compliant = 0
    samples = group_by_site(records)
    for sample in samples:
        texts = []
        for record in sample.pages:
            if record.raw_html is not None:
                texts.append(extract_main_content(record.raw_html))
            else:
                texts.append(record.extracted_text or "")
        chunk_sets = [chunk_text(text, config.cdc) for text in texts]
        for i, record in enumerate(sample.pages):
            site_index = build_site_index(chunk_sets, exclude=i)
            dup = duplicate_ratio(chunk_sets[i], site_index)
            result = assess_text(texts[i], dup, config.compliance)
            keep_text = (record.raw_html is not None
                         or record.source == SOURCE_PRE_EXTRACTED)
            filtered.append(dataclasses.replace(
                record,
                extracted_text=texts[i] if keep_text else None,
                token_count=result.token_count,
                compliance=result))
            n_compliant += result.compliant
    count = write_records(filtered, args.out)
    return {"pages": count, "sites": len(samples),
            "compliant": n_compliant, "output": str(args.out)}


def _cmd_score(args) -> dict:
    config = _load_pipeline_config(args)
    backend, backend_name = _scorer_backend(config, args)
    records = read_records(require_file(args.records, "records file"))
    to_score = [i for i, r in enumerate(records)
                if r.extracted_text
                and (r.compliance is None or r.compliance.compliant)]
    scores = score_pages(
        backend, [records[i].extracted_text for i in to_score]) \
        if to_score else []
    scored = list(records)
    for i, score in zip(to_score, scores):
        scored[i] = dataclasses.replace(records[i], score=score)
    count = write_records(scored, args.out)
    return {"pages": count, "scored": len(to_score),
            "skipped": count - len(to_score), "backend": backend_name,
            "output": str(args.out)}


def _cmd_train(args) -> dict:
    config = _load_pipeline_config(args)
    records = read_records(require_file(args.records, "records file"))
    labels = _load_labels(args.labels)
    data, insufficient, unlabeled = _labeled_sites(
        records, labels, config.min_compliant_pages)
    if not data:
        raise ClassifyError("no sites with enough scored pages to train on")
    hp = SvmHyperparams(seed=args.seed) if args.seed is not None \
        else SvmHyperparams()
    model = train_svm(data, hp)
    out = Path(args.model_out) if args.model_out else config.paths.model
    save_model(model, out)
    return {"sites_trained": len(data),
            "insufficient_sites": insufficient,
            "unlabeled_sites": unlabeled,
            "training_accuracy": accuracy(model, data),
            "model": str(out)}


def _cmd_classify(args) -> dict:
    config = _load_pipeline_config(args)
    model = load_model(require_file(args.model, "model file"))
    records = read_records(require_file(args.records, "records file"))
    results = _classify_sites(records, model, config.min_compliant_pages)
    csv_text = _site_csv_text(results)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(csv_text, encoding="utf-8")
    counts = Counter(r["label"] for r in results)
    return {"sites": results,
            "n_sites": len(results),
            "n_llm_dominant": counts.get(LABEL_LLM_DOMINANT, 0),
            "n_insufficient": counts.get(LABEL_INSUFFICIENT, 0),
            "output": str(args.out) if args.out else None,
            "_text": csv_text.rstrip("\n")}


def _cmd_cross_validate(args) -> dict:
    config = _load_pipeline_config(args)
    records = read_records(require_file(args.records, "records file"))
    labels = _load_labels(args.labels)
    data, insufficient, unlabeled = _labeled_sites(
        records, labels, config.min_compliant_pages)
    if not data:
        raise ClassifyError("no sites with enough scored pages")
    result = ood_cross_validate(data, pages_per_site=args.pages_per_site)
    return {"folds": [{"train_group": f.train_group,
                       "test_groups": list(f.test_groups),
                       "n_train": f.n_train, "n_test": f.n_test,
                       "accuracy": f.accuracy} for f in result.folds],
            "mean_accuracy": result.mean_accuracy,
            "pages_per_site": result.pages_per_site,
            "insufficient_sites": insufficient,
            "unlabeled_sites": unlabeled}


def _cmd_transition(args) -> dict:
    records = read_records(require_file(args.records, "records file"))
    cutoff = args.cutoff or CHATGPT_CUTOFF
    site_pages: dict[str, list[tuple[date, float]]] = {}
    for sample in group_by_site(records):
        pairs = []
        for record in sample.pages:
            day = infer_page_date(record)
            if day is not None and record.score is not None:
                pairs.append((day, record.score))
        site_pages[sample.site] = pairs
    results = [detect_transition(site, pairs, cutoff)
               for site, pairs in site_pages.items()]
    flagged = sorted(r.site for r in results if r.flagged)
    rows = [(r.site, r.n_pre, r.n_post, r.q25_pre, r.q75_post,
             int(r.flagged))
            for r in sorted(results, key=lambda r: r.site)]
    if args.out:
        from .report import write_csv
        write_csv(args.out,
                  ("site", "n_pre", "n_post", "q25_pre", "q75_post",
                   "flagged"), rows)
    summary = {"sites": len(results), "flagged": len(flagged),
               "flagged_sites": flagged, "cutoff": cutoff.isoformat(),
               "output": str(args.out) if args.out else None}
    if args.shuffles:
        summary["null_mean_flags"] = shuffle_null(
            site_pages, n_shuffles=args.shuffles,
            seed=args.seed if args.seed is not None else 0, cutoff=cutoff)
    return summary


def _merge_signals(parts: list[MonetizationSignals]) -> MonetizationSignals:
    ids: set[str] = set()
    links: list[str] = []
    elements = 0
    for part in parts:
        ids.update(part.adsense_ids)
        links.extend(part.affiliate_links)
        elements += part.ad_element_count
    return MonetizationSignals(adsense_ids=frozenset(ids),
                               affiliate_links=tuple(links),
                               ad_element_count=elements)


def _cmd_signals(args) -> dict:
    selectors: Sequence[str] = ()
    if args.easylist:
        selectors = read_easylist_selectors(
            require_file(args.easylist, "selector list")
            .read_text(encoding="utf-8"))
    patterns = None
    if args.affiliates:
        patterns = read_affiliate_patterns(
            require_file(args.affiliates, "affiliate pattern list")
            .read_text(encoding="utf-8"))

    def signals_of(html) -> MonetizationSignals:
        if patterns is None:
            return extract_signals(html, ad_selectors=selectors)
        return extract_signals(html, ad_selectors=selectors,
                               affiliate_patterns=patterns)

    site_signals: dict[str, MonetizationSignals] = {}
    if args.html_dir:
        root = Path(args.html_dir)
        if not root.is_dir():
            raise ConfigError(f"html directory not found: {root}")
        by_site: dict[str, list[MonetizationSignals]] = {}
        for path in sorted(root.rglob("*.html")):
            relative = path.relative_to(root)
            site = relative.parts[0] if len(relative.parts) > 1 \
                else relative.stem
            by_site.setdefault(site, []).append(
                signals_of(path.read_bytes()))
        site_signals = {site: _merge_signals(parts)
                        for site, parts in by_site.items()}
    else:
        if not args.records:
            raise UsageError("signals needs --records or --html-dir")
        records = read_records(require_file(args.records, "records file"))
        by_site = {}
        for record in records:
            if record.raw_html is not None:
                by_site.setdefault(record.site, []).append(
                    signals_of(record.raw_html))
        site_signals = {site: _merge_signals(parts)
                        for site, parts in by_site.items()}

    groups = cluster_shared_ids(site_signals)
    rows = [(site, ";".join(sorted(s.adsense_ids)),
             ";".join(s.affiliate_links), s.ad_element_count)
            for site, s in sorted(site_signals.items())]
    if args.out:
        from .report import write_csv
        write_csv(args.out, ("site", "adsense_ids", "affiliate_links",
                             "ad_element_count"), rows)
    return {"sites": len(site_signals),
            "sites_with_adsense": sum(1 for s in site_signals.values()
                                      if s.adsense_ids),
            "shared_id_groups": [{"sites": list(g.sites),
                                  "shared_keys": list(g.shared_keys)}
                                 for g in groups],
            "output": str(args.out) if args.out else None}


def _cmd_report(args) -> dict:
    from . import report
    config = _load_pipeline_config(args)
    model_path = Path(args.model) if args.model else config.paths.model
    model = load_model(require_file(model_path, "model file"))
    records = read_records(require_file(args.records, "records file"))
    out_dir = Path(args.out_dir) if args.out_dir else config.paths.reports
    out_dir.mkdir(parents=True, exist_ok=True)

    results = _classify_sites(records, model, config.min_compliant_pages)
    files = [report.write_csv(out_dir / "sites.csv", report.SITE_CSV_HEADER,
                              report.site_rows(results))]

    label_by_site = {r["site"]: r["label"] for r in results}
    scores_by_label: dict[str, list[float]] = {}
    for site, scores in _site_scores(records).items():
        scores_by_label.setdefault(label_by_site[site], []).extend(scores)
    files.append(report.score_distribution_figure(
        scores_by_label, out_dir / "page_scores.png"))

    distances = [r["distance"] for r in results
                 if r["distance"] is not None]
    files.append(report.distance_figure(distances,
                                        out_dir / "distances.png"))

    classified = {r["site"]: r["label"] for r in results
                  if r["label"] != LABEL_INSUFFICIENT}
    cohort = cohort_prevalence(
        (sample, classified[sample.site])
        for sample in group_by_site(records)
        if sample.site in classified)
    files.append(report.write_csv(
        out_dir / "prevalence.csv",
        ("cohort", "n_sites", "n_llm_dominant", "fraction"),
        [(b.label, b.n_sites, b.n_llm_dominant, b.fraction)
         for b in cohort.buckets]))
    files.append(report.prevalence_figure(cohort,
                                          out_dir / "prevalence.png"))

    return {"out_dir": str(out_dir),
            "files": sorted(str(f) for f in files),
            "n_sites": len(results),
            "n_llm_dominant": sum(1 for r in results
                                  if r["label"] == LABEL_LLM_DOMINANT),
            "n_insufficient": sum(1 for r in results
                                  if r["label"] == LABEL_INSUFFICIENT),
            "undated_sites": cohort.undated_sites}


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON file")
    common.add_argument("--policy",
                        help="compliance policy JSON overriding the config")
    common.add_argument("--seed", type=int, default=None,
                        help="seed override for stochastic stages")
    common.add_argument("--json", action="store_true",
                        help="print a JSON summary instead of text")
    common.add_argument("--scorer-url", default=None,
                        help="remote scorer base URL (overrides env/config)")
    common.add_argument("--mock", action="store_true",
                        help="force the in-process mock scorer")

    parser = argparse.ArgumentParser(
        prog="degentweb",
        description="Classify websites as LLM-dominant from per-page "
                    "detector scores.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="subcommand")

    p = sub.add_parser("sample", parents=[common],
                       help="deterministically select names from a list")
    p.add_argument("--names-file", required=True,
                   help="file with one name per line")
    p.add_argument("--n", type=int, default=None,
                   help="how many names to keep (hash selection)")
    p.add_argument("--algorithm", choices=("blake3", "sha256"), default=None)
    p.add_argument("--stride", type=int, default=None,
                   help="take every stride-th name instead of hashing")
    p.add_argument("--offset", type=int, default=0,
                   help="start index for --stride")
    p.add_argument("--out", help="write selected names to this file")
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("sitegen", parents=[common],
                       help="generate deterministic synthetic sites")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=2,
                   help="number of sites to generate")
    p.add_argument("--style",
                   choices=sorted(STYLES) + [STYLE_MIXED],
                   default=STYLE_MIXED)
    p.add_argument("--name-prefix", default="site")
    p.set_defaults(handler=_cmd_sitegen)

    p = sub.add_parser("crawl", parents=[common],
                       help="fetch candidate pages politely into a corpus")
    p.add_argument("--sites-file",
                   help="JSON mapping site -> candidate URL list")
    p.add_argument("--from-dir",
                   help="crawl a sitegen output directory offline")
    p.add_argument("--out", required=True, help="corpus records file")
    p.add_argument("--concurrency", type=int, default=8)
    p.set_defaults(handler=_cmd_crawl)

    p = sub.add_parser("filter", parents=[common],
                       help="re-extract text and apply the quality gates")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_filter)

    p = sub.add_parser("score", parents=[common],
                       help="score compliant pages with a detector backend")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("train", parents=[common],
                       help="train the site classifier from labeled scores")
    p.add_argument("--records", required=True)
    p.add_argument("--labels", required=True,
                   help="JSON mapping site -> {label, group}")
    p.add_argument("--model-out", help="defaults to the configured path")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("classify", parents=[common],
                       help="label each site with the trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--out", help="write the per-site CSV here")
    p.set_defaults(handler=_cmd_classify)

    p = sub.add_parser("cross-validate", parents=[common],
                       help="out-of-distribution group cross-validation")
    p.add_argument("--records", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--pages-per-site", type=int, default=None)
    p.set_defaults(handler=_cmd_cross_validate)

    p = sub.add_parser("transition", parents=[common],
                       help="flag per-site score drops around a cutoff date")
    p.add_argument("--records", required=True)
    p.add_argument("--cutoff", type=date.fromisoformat, default=None,
                   help="cutoff date, ISO format")
    p.add_argument("--shuffles", type=int, default=0,
                   help="also estimate the shuffled-date null")
    p.add_argument("--out", help="write the per-site CSV here")
    p.set_defaults(handler=_cmd_transition)

    p = sub.add_parser("signals", parents=[common],
                       help="extract monetization signals from raw HTML")
    p.add_argument("--records")
    p.add_argument("--html-dir")
    p.add_argument("--easylist", help="cosmetic filter list file")
    p.add_argument("--affiliates", help="affiliate URL pattern file")
    p.add_argument("--out", help="write the per-site CSV here")
    p.set_defaults(handler=_cmd_signals)

    p = sub.add_parser("report", parents=[common],
                       help="render figures and CSV summaries")
    p.add_argument("--records", required=True)
    p.add_argument("--model", help="defaults to the configured path")
    p.add_argument("--out-dir", help="defaults to the configured path")
    p.set_defaults(handler=_cmd_report)

    return parser


def _print_human(summary: dict) -> None:
    text = summary.pop("_text", None)
    if text is not None:
        print(text)
        return
    for key, value in summary.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        print(f"{key}: {value}")


def run_command(argv: Sequence[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        summary = args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _OPERATIONAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.json:
        summary.pop("_text", None)
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        _print_human(summary)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
