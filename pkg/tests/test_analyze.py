"""Cohorts, transitions with shuffle null, rank stats, monetization."""
from __future__ import annotations

import random
from datetime import date, datetime, timezone

import pytest

from degentweb.analyze import (
    AnalyzeError,
    CHATGPT_CUTOFF,
    CohortBucket,
    CohortReport,
    MonetizationSignals,
    TransitionResult,
    affiliate_tag,
    cluster_shared_ids,
    cohort_prevalence,
    count_transition_flags,
    detect_transition,
    extract_signals,
    half_year_label,
    infer_page_date,
    rank_stats,
    read_affiliate_patterns,
    read_easylist_selectors,
    shuffle_null,
    transition_for_site,
)
from degentweb.classify import LABEL_LLM_DOMINANT, LABEL_NOT
from degentweb.corpus import PageRecord, SiteSample

UTC = timezone.utc
NOW = datetime(2026, 1, 1, tzinfo=UTC)


def page(site: str, n: int = 0, archived_at: datetime | None = None,
         **kwargs) -> PageRecord:
    return PageRecord(url=f"https://{site}/p{n}", site=site, fetched_at=NOW,
                      source="archive", archived_at=archived_at,
                      raw_html=kwargs.pop("raw_html", "<p>x</p>"), **kwargs)


def dated_sample(site: str, when: datetime | None) -> SiteSample:
    return SiteSample.build(site, [page(site, archived_at=when)])


class TestCohortPrevalence:
    def test_november_2022_lands_in_h2(self):
        sample = dated_sample("a.example", datetime(2022, 11, 15, tzinfo=UTC))
        report = cohort_prevalence([(sample, LABEL_NOT)])
        assert [b.label for b in report.buckets] == ["2022H2"]
        assert report.buckets[0].n_sites == 1

    def test_half_fraction(self):
        when = datetime(2023, 3, 1, tzinfo=UTC)
        labeled = [(dated_sample(f"s{i}.example", when),
                    LABEL_LLM_DOMINANT if i < 2 else LABEL_NOT)
                   for i in range(4)]
        report = cohort_prevalence(labeled)
        assert report.buckets[0].label == "2023H1"
        assert report.buckets[0].fraction == 0.5

    def test_planted_rates_recovered_exactly(self):
        plan = {(2021, 2): 2, (2022, 3): 10, (2023, 4): 30}
        labeled = []
        for (year, month), n_llm in plan.items():
            when = datetime(year, month, 10, tzinfo=UTC)
            for i in range(100):
                label = LABEL_LLM_DOMINANT if i < n_llm else LABEL_NOT
                labeled.append(
                    (dated_sample(f"c{year}-{i}.example", when), label))
        random.Random(3).shuffle(labeled)
        report = cohort_prevalence(labeled)
        assert [b.label for b in report.buckets] == ["2021H1", "2022H1",
                                                     "2023H1"]
        assert [b.fraction for b in report.buckets] == [0.02, 0.10, 0.30]
        assert sum(b.n_sites for b in report.buckets) == len(labeled)
        assert report.undated_sites == 0

    def test_undated_sites_reported_separately(self):
        undated = SiteSample.build(
            "u.example", [page("u.example", archived_at=None)])
        dated = dated_sample("d.example", datetime(2024, 8, 1, tzinfo=UTC))
        report = cohort_prevalence([(undated, LABEL_NOT),
                                    (dated, LABEL_NOT)])
        assert report.undated_sites == 1
        assert sum(b.n_sites for b in report.buckets) == 1

    def test_buckets_chronological_across_years(self):
        stamps = [datetime(2024, 1, 5, tzinfo=UTC),
                  datetime(2022, 7, 5, tzinfo=UTC),
                  datetime(2023, 6, 30, tzinfo=UTC),
                  datetime(2023, 7, 1, tzinfo=UTC)]
        labeled = [(dated_sample(f"s{i}.example", ts), LABEL_NOT)
                   for i, ts in enumerate(stamps)]
        report = cohort_prevalence(labeled)
        assert [b.label for b in report.buckets] == ["2022H2", "2023H1",
                                                     "2023H2", "2024H1"]

    def test_report_validation(self):
        with pytest.raises(AnalyzeError):
            CohortReport(buckets=(CohortBucket("2023H1", 1, 0),
                                  CohortBucket("2022H2", 1, 0)))
        with pytest.raises(AnalyzeError):
            CohortReport(buckets=(CohortBucket("2023H1", 1, 2),))

    def test_half_year_label(self):
        assert half_year_label(date(2022, 6, 30)) == "2022H1"
        assert half_year_label(date(2022, 7, 1)) == "2022H2"


def days(side: str, count: int) -> list[date]:
    if side == "pre":
        return [date(2022, 1, 1 + i) for i in range(count)]
    return [date(2023, 1, 1 + i) for i in range(count)]


def split_pages(pre_scores, post_scores) -> list[tuple[date, float]]:
    pre = list(zip(days("pre", len(pre_scores)), pre_scores))
    post = list(zip(days("post", len(post_scores)), post_scores))
    return pre + post


class TestDetectTransition:
    def test_disjoint_ranges_flagged(self):
        result = detect_transition("s.example",
                                   split_pages([0.9] * 4, [0.7] * 4))
        assert result.flagged
        assert result.n_pre == 4 and result.n_post == 4
        assert result.q25_pre == 0.9 and result.q75_post == 0.7

    def test_three_pre_pages_insufficient(self):
        result = detect_transition("s.example",
                                   split_pages([0.5] * 3, [0.9] * 8))
        assert not result.flagged
        assert result.n_pre == 3

    def test_cutoff_day_belongs_to_neither_side(self):
        pages = split_pages([0.9] * 4, [0.7] * 4)
        pages.append((CHATGPT_CUTOFF, 0.1))
        result = detect_transition("s.example", pages)
        assert result.n_pre == 4 and result.n_post == 4
        assert result.flagged

    def test_monte_carlo_separated_distributions(self):
        flagged = 0
        for seed in range(100):
            rng = random.Random(seed)
            pre = [rng.gauss(0.95, 0.02) for _ in range(10)]
            post = [rng.gauss(0.75, 0.02) for _ in range(10)]
            flagged += detect_transition("s.example",
                                         split_pages(pre, post)).flagged
        assert flagged >= 99

    def test_invariant_to_within_side_permutation(self):
        rng = random.Random(11)
        pre = [rng.uniform(0.8, 1.0) for _ in range(6)]
        post = [rng.uniform(0.6, 0.9) for _ in range(6)]
        base = detect_transition("s.example", split_pages(pre, post))
        for _ in range(5):
            rng.shuffle(pre)
            rng.shuffle(post)
            again = detect_transition("s.example", split_pages(pre, post))
            assert again == base

    def test_datetime_dates_rejected(self):
        with pytest.raises(AnalyzeError):
            detect_transition("s.example",
                              [(datetime(2022, 1, 1, tzinfo=UTC), 0.5)])

    def test_result_consistency_enforced(self):
        with pytest.raises(AnalyzeError):
            TransitionResult(site="s", n_pre=4, n_post=4, q25_pre=0.9,
                             q75_post=0.7, flagged=False)
        with pytest.raises(AnalyzeError):
            TransitionResult(site="s", n_pre=3, n_post=4, q25_pre=0.9,
                             q75_post=0.7, flagged=True)


def transitioning_corpus(n_sites: int) -> dict[str, list[tuple[date, float]]]:
    sites = {}
    for i in range(n_sites):
        pre = [0.93 + 0.002 * j for j in range(5)]
        post = [0.70 + 0.002 * j for j in range(5)]
        sites[f"s{i}.example"] = split_pages(pre, post)
    return sites


class _IdentityRng:
    def __init__(self, seed):
        pass

    def shuffle(self, items) -> None:
        pass


class TestShuffleNull:
    def test_equal_scores_never_flag(self):
        sites = {"flat.example": split_pages([0.8] * 5, [0.8] * 5)}
        assert count_transition_flags(sites) == 0
        assert shuffle_null(sites, n_shuffles=20, seed=1) == 0.0

    def test_deterministic_for_fixed_seed(self):
        sites = transitioning_corpus(6)
        first = shuffle_null(sites, n_shuffles=30, seed=7)
        assert shuffle_null(sites, n_shuffles=30, seed=7) == first

    def test_identity_permutation_matches_unshuffled(self):
        sites = transitioning_corpus(9)
        unshuffled = count_transition_flags(sites)
        assert unshuffled == 9
        forced = shuffle_null(sites, n_shuffles=5, seed=3,
                              rng_factory=_IdentityRng)
        assert forced == float(unshuffled)

    def test_shuffling_destroys_transitions(self):
        sites = transitioning_corpus(20)
        unshuffled = count_transition_flags(sites)
        shuffled_mean = shuffle_null(sites, n_shuffles=50, seed=5)
        assert unshuffled == 20
        assert shuffled_mean < 0.5 * unshuffled

    def test_validation(self):
        with pytest.raises(AnalyzeError):
            shuffle_null({}, n_shuffles=0)


class TestInferPageDate:
    def test_dated_at_wins(self):
        record = page("a.example", dated_at=date(2020, 5, 4),
                      archived_at=datetime(2021, 1, 1, tzinfo=UTC))
        assert infer_page_date(record) == date(2020, 5, 4)

    def test_archived_at_next(self):
        record = page("a.example",
                      archived_at=datetime(2021, 1, 2, 3, tzinfo=UTC))
        assert infer_page_date(record) == date(2021, 1, 2)

    def test_meta_published_time(self):
        html = ('<html><head><meta property="article:published_time" '
                'content="2022-09-18T10:00:00+00:00"></head></html>')
        assert infer_page_date(page("a.example", raw_html=html)) == \
            date(2022, 9, 18)

    def test_meta_name_date(self):
        html = '<meta name="date" content="2019-04-02">'
        assert infer_page_date(page("a.example", raw_html=html)) == \
            date(2019, 4, 2)

    def test_meta_last_modified_rfc2822(self):
        html = ('<meta http-equiv="last-modified" '
                'content="Tue, 15 Nov 2022 12:45:26 GMT">')
        assert infer_page_date(page("a.example", raw_html=html)) == \
            date(2022, 11, 15)

    def test_url_date_pattern(self):
        record = PageRecord(url="https://a.example/2021/07/my-post",
                            site="a.example", fetched_at=NOW,
                            source="archive", raw_html="<p>x</p>")
        assert infer_page_date(record) == date(2021, 7, 1)

    def test_undatable(self):
        assert infer_page_date(page("a.example")) is None

    def test_transition_for_site_skips_undatable_and_unscored(self):
        site = "t.example"
        records = []
        for i, day in enumerate(days("pre", 4)):
            records.append(page(site, n=i, dated_at=day, score=0.9))
        for i, day in enumerate(days("post", 4)):
            records.append(page(site, n=10 + i, dated_at=day, score=0.6))
        records.append(page(site, n=20, score=0.1))           # undatable
        records.append(page(site, n=21, dated_at=date(2020, 1, 1)))  # no score
        result = transition_for_site(site, records)
        assert result.n_pre == 4 and result.n_post == 4
        assert result.flagged


class TestRankStats:
    def test_single_site_median(self):
        labels = {"a.example": LABEL_LLM_DOMINANT}
        summary = rank_stats([("q1", 3, "a.example"),
                              ("q2", 5, "a.example")], labels)
        stats = summary.per_label[LABEL_LLM_DOMINANT]
        assert stats.median_of_site_medians == 4.0
        assert stats.mean_links_per_site == 2.0

    def test_planted_statistics_recovered(self):
        labels = {}
        results = []
        # Three llm sites with per-site medians 5, 11, 17 (one rank each);
        # two human sites with medians 2 and 30.
        for i, rank in enumerate([5, 11, 17]):
            site = f"llm{i}.example"
            labels[site] = LABEL_LLM_DOMINANT
            results.append((f"lq{i}", rank, site))
        for i, rank in enumerate([2, 30]):
            site = f"hum{i}.example"
            labels[site] = LABEL_NOT
            results.append((f"hq{i}", rank, site))
        # Ten extra queries with only human hits in the top 10.
        for i in range(5):
            results.append((f"xq{i}", 1, "hum0.example"))
        summary = rank_stats(results, labels)
        llm = summary.per_label[LABEL_LLM_DOMINANT]
        assert llm.n_sites == 3
        assert llm.median_of_site_medians == 11.0
        assert llm.mean_of_site_medians == 11.0
        # hum0's ranks are [2, 1, 1, 1, 1, 1] (median 1.0), hum1's [30].
        human = summary.per_label[LABEL_NOT]
        assert human.median_of_site_medians == 15.5
        assert human.mean_of_site_medians == 15.5
        assert human.mean_links_per_site == 3.5
        # Queries: lq0 (rank 5, top10), lq1 (11, top20), lq2 (17, top20),
        # hq*, xq* (no llm hits) → 1/10 top-10, 3/10 top-20.
        assert summary.n_queries == 10
        assert summary.frac_queries_with_llm_top10 == 0.1
        assert summary.frac_queries_with_llm_top20 == 0.3

    def test_single_class_leaves_other_empty(self):
        labels = {"a.example": LABEL_NOT}
        summary = rank_stats([("q", 1, "a.example")], labels)
        llm = summary.per_label[LABEL_LLM_DOMINANT]
        assert llm.n_sites == 0
        assert llm.median_of_site_medians is None

    def test_validation(self):
        with pytest.raises(AnalyzeError):
            rank_stats([("q", 0, "a.example")], {"a.example": LABEL_NOT})
        with pytest.raises(AnalyzeError):
            rank_stats([("q", 1, "a.example")], {})


AD_PAGE = """
<html><body>
<script>google_ad_client = "ca-pub-1234567890123456";</script>
<div class="ad-banner">sponsored</div>
<div id="ad_top" class="ad-banner wide">x</div>
<ins class="adsbygoogle" data-ad-client="ca-pub-1234567890123456"></ins>
<a href="https://www.amazon.com/dp/B0TEST?tag=foo-20">deal</a>
<a href="https://example.com/review">plain link</a>
<a href="https://www.amazon.co.uk/gp/product/1?ref=x&tag=bar-21">uk deal</a>
</body></html>
"""


class TestExtractSignals:
    def test_publisher_id_extracted_anywhere(self):
        signals = extract_signals(AD_PAGE)
        assert signals.adsense_ids == {"ca-pub-1234567890123456"}

    def test_id_length_is_exact(self):
        assert extract_signals("ca-pub-123456789012345").adsense_ids == \
            frozenset()
        assert extract_signals("ca-pub-12345678901234567").adsense_ids == \
            frozenset()

    def test_empty_html(self):
        signals = extract_signals("")
        assert signals == MonetizationSignals()

    def test_affiliate_links_via_default_patterns(self):
        signals = extract_signals(AD_PAGE)
        assert signals.affiliate_links == (
            "https://www.amazon.com/dp/B0TEST?tag=foo-20",
            "https://www.amazon.co.uk/gp/product/1?ref=x&tag=bar-21")

    def test_ad_elements_counted_once_per_element(self):
        signals = extract_signals(
            AD_PAGE, ad_selectors=[".ad-banner", "#ad_top",
                                   "ins.adsbygoogle"])
        assert signals.ad_element_count == 3

    def test_bytes_input_and_broken_html(self):
        html = b'<div class="ad-banner">x</div><a href="?tag=z-20">y'
        signals = extract_signals(html, ad_selectors=[".ad-banner"])
        assert signals.ad_element_count == 1
        assert signals.affiliate_links == ("?tag=z-20",)

    def test_signal_validation(self):
        with pytest.raises(AnalyzeError):
            MonetizationSignals(adsense_ids=frozenset({"pub-123"}))
        with pytest.raises(AnalyzeError):
            MonetizationSignals(ad_element_count=-1)


EASYLIST_SNIPPET = """\
[Adblock Plus 2.0]
! Title: test list
##.ad-banner
##ins.adsbygoogle
example.com##.sponsored
##div > .nested
#@#.exception-rule
||ads.example.com^
##[data-ad]
##.promo-box
"""


class TestListFiles:
    def test_easylist_generic_subset(self):
        assert read_easylist_selectors(EASYLIST_SNIPPET) == [
            ".ad-banner", "ins.adsbygoogle", ".promo-box"]

    def test_affiliate_pattern_file(self):
        text = "# amazon\namazon\\.com/.*[?&]tag=\n\nshareasale\\.com\n"
        assert read_affiliate_patterns(text) == [
            "amazon\\.com/.*[?&]tag=", "shareasale\\.com"]
        with pytest.raises(AnalyzeError):
            read_affiliate_patterns("ok\n(*invalid\n")

    def test_affiliate_tag_extraction(self):
        url = "https://www.amazon.com/dp/B0TEST?ref=sr&tag=foo-20"
        assert affiliate_tag(url) == "tag=foo-20"
        assert affiliate_tag("https://example.com/x?utm=1") is None


def pub_id(k: int) -> str:
    return f"ca-pub-{k:016d}"


def signals_with(ids=(), links=()) -> MonetizationSignals:
    return MonetizationSignals(adsense_ids=frozenset(ids),
                               affiliate_links=tuple(links))


class TestClusterSharedIds:
    def test_disjoint_ids_no_groups(self):
        site_signals = {f"s{i}.example": signals_with([pub_id(i)])
                        for i in range(5)}
        assert cluster_shared_ids(site_signals) == []

    def test_transitive_grouping(self):
        site_signals = {
            "a.example": signals_with([pub_id(1)]),
            "b.example": signals_with([pub_id(1), pub_id(2)]),
            "c.example": signals_with([pub_id(2)]),
            "d.example": signals_with([pub_id(9)]),
        }
        groups = cluster_shared_ids(site_signals)
        assert len(groups) == 1
        assert groups[0].sites == ("a.example", "b.example", "c.example")
        assert groups[0].shared_keys == (pub_id(1), pub_id(2))

    def test_affiliate_tags_also_join(self):
        link = "https://www.amazon.com/dp/1?tag=shared-20"
        site_signals = {
            "a.example": signals_with(links=[link]),
            "b.example": signals_with(links=[link]),
            "c.example": signals_with([pub_id(5)]),
        }
        groups = cluster_shared_ids(site_signals)
        assert [g.sites for g in groups] == [("a.example", "b.example")]
        assert groups[0].shared_keys == ("tag=shared-20",)

    def test_random_fixture_matches_graph_oracle(self):
        rng = random.Random(41)
        site_signals = {}
        site_keys = {}
        for i in range(60):
            site = f"s{i:02d}.example"
            keys = {pub_id(rng.randrange(30))
                    for _ in range(rng.randint(0, 3))}
            site_keys[site] = keys
            site_signals[site] = signals_with(sorted(keys))

        # Brute-force connected components over the shared-key graph.
        adjacency = {s: set() for s in site_keys}
        for a in site_keys:
            for b in site_keys:
                if a < b and site_keys[a] & site_keys[b]:
                    adjacency[a].add(b)
                    adjacency[b].add(a)
        seen = set()
        want_groups = set()
        for start in sorted(site_keys):
            if start in seen or not adjacency[start]:
                continue
            component = set()
            frontier = [start]
            while frontier:
                node = frontier.pop()
                if node in component:
                    continue
                component.add(node)
                frontier.extend(adjacency[node] - component)
            seen |= component
            want_groups.add(frozenset(component))

        got = cluster_shared_ids(site_signals)
        assert {frozenset(g.sites) for g in got} == want_groups
        # Output is a partition: no site in two groups.
        flat = [s for g in got for s in g.sites]
        assert len(flat) == len(set(flat))
        for group in got:
            members = set(group.sites)
            for key in group.shared_keys:
                holders = [s for s in members if key in site_keys[s]]
                assert len(holders) >= 2
