from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chartweaver.gateway import Gateway, ModelProfile
from chartweaver.research import (
    FixtureCorpus,
    Learning,
    ModelFormatError,
    ResearchConfig,
    canonical_url,
    dedup_pages,
    keyword_slug,
    next_breadth,
    plan_queries,
    run_research,
    search_and_scrape,
    synthesize,
)

from helpers import (
    MemoryBackend,
    RuleTransport,
    page,
    queries_response,
    synthesis_response,
)

TEXT = ModelProfile(role="text_model", endpoint="test-model", temperature=0.0)


def live_gateway(transport) -> Gateway:
    return Gateway(mode="live", transport=transport, sleeper=lambda s: None)


class TestBreadth:
    @pytest.mark.parametrize("current,expected", [(3, 2), (1, 1), (4, 2), (2, 1), (7, 4)])
    def test_halving_rounded_up(self, current, expected):
        assert next_breadth(current) == expected

    @given(st.integers(min_value=1, max_value=10_000))
    def test_always_at_least_one(self, current):
        assert next_breadth(current) >= 1

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            next_breadth(0)


class TestCanonicalUrl:
    def test_case_and_slash_and_fragment(self):
        assert canonical_url("HTTPS://A.example/x/") == canonical_url("https://a.example/x")
        assert canonical_url("https://a.example/x#frag") == canonical_url("https://a.example/x")

    def test_query_preserved(self):
        assert canonical_url("https://a.example/x?q=1") != canonical_url("https://a.example/x")


class TestDedup:
    def test_exact_duplicate_collapses(self):
        p = page("https://a.example/x")
        assert dedup_pages([p, p]) == [p]

    def test_canonical_collision(self):
        first = page("https://A.example/x")
        second = page("https://a.example/x/")
        assert dedup_pages([first, second]) == [first]

    def test_disjoint_unchanged(self):
        pages = [page("https://a.example/1"), page("https://a.example/2")]
        assert dedup_pages(pages) == pages


class TestConfig:
    def test_defaults_valid(self):
        ResearchConfig().validate()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"rounds": 0},
            {"initial_breadth": 0},
            {"pages_per_keyword": -1},
            {"learnings_per_keyword": 0},
            {"max_questions": 0},
        ],
    )
    def test_positive_ints_enforced(self, kwargs):
        with pytest.raises(ValueError):
            ResearchConfig(**kwargs).validate()


class TestPlanQueries:
    def test_caps_at_breadth_and_dedups(self):
        transport = RuleTransport().add(
            "SERP queries",
            queries_response(["alpha beta", "Alpha Beta", "gamma", "delta"], "goal text"),
        )
        queries, goal = plan_queries(live_gateway(transport), TEXT, "topic", [], 3)
        assert queries == ["alpha beta", "gamma", "delta"]
        assert goal == "goal text"

    def test_breadth_one_collapses_to_single(self):
        transport = RuleTransport().add(
            "SERP queries", queries_response(["only query", "extra"], "g")
        )
        queries, _ = plan_queries(live_gateway(transport), TEXT, "topic", [], 1)
        assert queries == ["only query"]

    def test_prior_learnings_included_in_prompt(self):
        transport = RuleTransport().add("SERP queries", queries_response(["q"], "g"))
        learnings = [Learning("EVs reached 18% share", ())]
        plan_queries(live_gateway(transport), TEXT, "topic", learnings, 2)
        assert "EVs reached 18% share" in transport.calls[0][1]

    def test_reprompt_then_success(self):
        transport = RuleTransport()
        transport.add("no parseable queries", queries_response(["recovered"], "g2"))
        transport.add("SERP queries", "I cannot help with that.")
        queries, goal = plan_queries(live_gateway(transport), TEXT, "topic", [], 2)
        assert queries == ["recovered"]
        assert goal == "g2"
        assert len(transport.calls) == 2

    def test_format_error_after_reprompt(self):
        transport = RuleTransport().add("", "still prose, no lists")
        with pytest.raises(ModelFormatError):
            plan_queries(live_gateway(transport), TEXT, "topic", [], 2)

    def test_missing_goal_falls_back_to_topic(self):
        transport = RuleTransport().add("SERP queries", "1. some query")
        _, goal = plan_queries(live_gateway(transport), TEXT, "the topic", [], 2)
        assert goal == "the topic"


class TestSearchAndScrape:
    def test_truncates_to_limit(self):
        backend = MemoryBackend({"k": [page(f"https://s.example/{i}") for i in range(5)]})
        assert len(search_and_scrape(backend, "k", 3)) == 3

    def test_empty_result_is_not_an_error(self):
        backend = MemoryBackend({})
        assert search_and_scrape(backend, "nothing", 3) == []


class TestSynthesize:
    def test_zero_pages_short_circuits(self):
        transport = RuleTransport()
        gateway = live_gateway(transport)
        assert synthesize(gateway, TEXT, [], "kw", 3, 3) == ([], [])
        assert transport.calls == []

    def test_learning_bound_and_citations(self):
        transport = RuleTransport().add(
            "generate a list of learnings",
            synthesis_response(
                [
                    "Sales hit 14M ([IEA](https://iea.example/report))",
                    "Share was 18% ([IEA](https://iea.example/report), [BNEF](https://bnef.example/ev))",
                ],
                ["What about 2025?"],
            ),
        )
        pages = [page("https://iea.example/report", "IEA")]
        learnings, questions = synthesize(live_gateway(transport), TEXT, pages, "kw", 1, 3)
        assert len(learnings) == 1
        assert learnings[0].citations == ("https://iea.example/report",)
        assert questions == ["What about 2025?"]

    def test_page_urls_appear_in_prompt(self):
        transport = RuleTransport().add("", synthesis_response(["x ([a](https://a.example/p))"], []))
        pages = [page("https://a.example/p", "A page", "body text")]
        synthesize(live_gateway(transport), TEXT, pages, "kw", 3, 3)
        assert "https://a.example/p" in transport.calls[0][1]

    def test_format_error_after_reprompt(self):
        transport = RuleTransport().add("", "prose with no list at all")
        with pytest.raises(ModelFormatError):
            synthesize(live_gateway(transport), TEXT, [page("https://x.example/1")], "kw", 3, 3)


def build_run_world():
    """Scripted transport + backend for a 2-round research run."""
    transport = RuleTransport()
    transport.add(
        "<prompt>seed topic</prompt>",
        queries_response(["kw one", "kw two", "kw three"], "round zero goal"),
    )
    transport.add(
        "Follow-up research directions",
        queries_response(["kw four", "kw five"], "round one goal"),
        role="text_model",
    )
    for kw, url in [
        ("kw one", "https://s.example/one"),
        ("kw two", "https://s.example/two"),
        ("kw three", "https://s.example/three"),
        ("kw four", "https://s.example/four"),
        ("kw five", "https://s.example/five"),
    ]:
        transport.add(
            f"<query>{kw}</query>",
            synthesis_response(
                [f"fact about {kw} ([src]({url}))", f"second fact {kw} ([src]({url}))"],
                [f"question from {kw}?"],
            ),
        )
    backend = MemoryBackend(
        {
            "kw one": [page("https://s.example/one")],
            "kw two": [page("https://s.example/two"), page("https://s.example/one")],
            "kw three": [page("https://s.example/three")],
            "kw four": [page("https://s.example/four")],
            "kw five": [page("https://s.example/five")],
        }
    )
    return transport, backend


class TestRunResearch:
    def test_two_rounds_with_decaying_breadth(self):
        transport, backend = build_run_world()
        result = run_research(
            live_gateway(transport), TEXT, backend, "seed topic", ResearchConfig()
        )
        assert result.round_breadths == [3, 2]
        assert result.goal_trail == ["round zero goal", "round one goal"]
        assert backend.queries == ["kw one", "kw two", "kw three", "kw four", "kw five"]
        assert len(result.learnings) == 10
        assert transport.calls_for("SERP queries") == 2

    def test_pages_deduped_across_keywords(self):
        transport, backend = build_run_world()
        result = run_research(
            live_gateway(transport), TEXT, backend, "seed topic", ResearchConfig()
        )
        urls = [url for url, _ in result.references]
        assert len(urls) == len(set(urls))

    def test_reference_integrity(self):
        transport, backend = build_run_world()
        transport.rules.insert(
            0,
            (
                ("<query>kw five</query>", None),
                synthesis_response(
                    ["uncited source fact ([other](https://elsewhere.example/page))"], []
                ),
            ),
        )
        result = run_research(
            live_gateway(transport), TEXT, backend, "seed topic", ResearchConfig()
        )
        reference_urls = result.reference_urls()
        for learning in result.learnings:
            for url in learning.citations:
                assert canonical_url(url) in reference_urls

    def test_invalid_config_rejected_before_any_call(self):
        transport = RuleTransport()
        with pytest.raises(ValueError):
            run_research(
                live_gateway(transport), TEXT, MemoryBackend({}), "t", ResearchConfig(rounds=0)
            )
        assert transport.calls == []

    def test_empty_round_still_counts(self):
        transport = RuleTransport()
        transport.add("<prompt>seed topic</prompt>", queries_response(["missing kw"], "g0"))
        transport.add("Follow-up research directions", queries_response(["also missing"], "g1"))
        result = run_research(
            live_gateway(transport), TEXT, MemoryBackend({}), "seed topic", ResearchConfig()
        )
        assert result.round_breadths == [3, 2]
        assert result.learnings == []

    def test_round_context_attached_to_errors(self):
        transport = RuleTransport()
        transport.add("<prompt>seed topic</prompt>", queries_response(["kw one"], "g"))
        transport.add("<query>kw one</query>", "unparseable prose")
        backend = MemoryBackend({"kw one": [page("https://s.example/one")]})
        with pytest.raises(ModelFormatError, match="round 0, keyword 'kw one'"):
            run_research(live_gateway(transport), TEXT, backend, "seed topic", ResearchConfig())


class TestFixtureCorpus:
    def test_write_then_search_round_trip(self, tmp_path):
        corpus = FixtureCorpus(tmp_path)
        corpus.write_page("EV sales 2024", 1, "https://a.example/1", "First", "body one")
        corpus.write_page("EV sales 2024", 2, "https://a.example/2", "Second", "body two")
        pages = corpus.search("EV sales 2024", 3)
        assert [p.url for p in pages] == ["https://a.example/1", "https://a.example/2"]
        assert pages[0].content == "body one"
        assert pages[0].title == "First"

    def test_limit_respected(self, tmp_path):
        corpus = FixtureCorpus(tmp_path)
        for i in range(1, 5):
            corpus.write_page("k", i, f"https://a.example/{i}", f"t{i}", "b")
        assert len(corpus.search("k", 2)) == 2

    def test_unknown_keyword_yields_empty(self, tmp_path):
        assert FixtureCorpus(tmp_path).search("nope", 3) == []

    def test_slug(self):
        assert keyword_slug("EV sales, 2024!") == "ev-sales-2024"
