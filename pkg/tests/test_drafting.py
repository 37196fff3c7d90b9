from __future__ import annotations

import random

import pytest

from chartweaver.drafting import (
    ChartSegment,
    DraftFormatError,
    TextSegment,
    citation_warnings,
    draft_report,
    heading_warnings,
    parse_segments,
)
from chartweaver.fdv import serialize_fdv
from chartweaver.gateway import Gateway, ModelProfile
from chartweaver.planning import Outline, Section, StyleGuide
from chartweaver.research import Learning, LearningSet

from helpers import RuleTransport
from test_fdv import make_spec, random_document_with_blocks

TEXT = ModelProfile(role="text_model", endpoint="m-text", temperature=0.7)

BLOCK = serialize_fdv(make_spec(), delimited=True)
OUTLINE = Outline([Section(f"S{i}", "A summary sentence.") for i in range(4)])
STYLE = StyleGuide("palette of navy #123456")


def learning_set() -> LearningSet:
    ls = LearningSet(topic="t")
    ls.learnings = [Learning("point one ([a](https://a.example/p))", ("https://a.example/p",))]
    ls.references = [("https://a.example/p", "A page")]
    return ls


def gw(transport) -> Gateway:
    return Gateway(mode="live", transport=transport, sleeper=lambda s: None)


class TestParseSegments:
    def test_text_block_text(self):
        draft = f"Before text.\n{BLOCK}\nAfter text."
        segments = parse_segments(draft).segments
        assert [type(s) for s in segments] == [TextSegment, ChartSegment, TextSegment]
        assert segments[1].ordinal == 1

    def test_no_blocks_single_text(self):
        report = parse_segments("only prose\nlines here")
        assert [type(s) for s in report.segments] == [TextSegment]

    def test_malformed_block_kept_as_text_with_warning(self):
        draft = f"Start\n<visualization>\n{{bad json\n</visualization>\nEnd"
        report = parse_segments(draft)
        assert report.charts() == []
        assert len(report.warnings) == 1
        assert report.reconstruct() == draft

    def test_ordinals_consecutive_from_one(self):
        draft = "\n".join([BLOCK, "mid", BLOCK, "<visualization>\nnope", ""])
        report = parse_segments(draft)
        assert [c.ordinal for c in report.charts()] == [1, 2]

    def test_reconstruction_identity_on_fuzzed_documents(self):
        rng = random.Random(42)
        for _ in range(100):
            doc, _ = random_document_with_blocks(rng)
            assert parse_segments(doc).reconstruct() == doc

    def test_empty_document(self):
        report = parse_segments("")
        assert report.segments == []
        assert report.reconstruct() == ""


class TestDraftReport:
    def run_draft(self, transport):
        return draft_report(
            gw(transport), TEXT, "topic", OUTLINE, learning_set(), STYLE, ["exemplar"]
        )

    def test_draft_with_blocks_accepted(self):
        response = f"## Section\n\nProse.\n\n{BLOCK}\n\nMore prose."
        transport = RuleTransport().add("interleaved texts and visualization", response)
        assert self.run_draft(transport) == response

    def test_reprompt_path(self):
        transport = RuleTransport()
        transport.add("no parseable <visualization> block", f"## S\n{BLOCK}\n{BLOCK}")
        transport.add("interleaved texts and visualization", "## S\n\nNo charts here.")
        draft = self.run_draft(transport)
        assert len(parse_segments(draft).charts()) == 2
        assert len(transport.calls) == 2

    def test_zero_blocks_twice_fails(self):
        transport = RuleTransport().add("", "prose only, always")
        with pytest.raises(DraftFormatError):
            self.run_draft(transport)

    def test_prompt_carries_all_context(self):
        response = f"x\n{BLOCK}\ny"
        transport = RuleTransport().add("interleaved texts and visualization", response)
        self.run_draft(transport)
        prompt = transport.calls[0][1]
        for expected in ("topic", "S0", "navy #123456", "point one", "exemplar"):
            assert expected in prompt

    def test_malformed_block_is_retained_as_text(self):
        response = f"intro\n<visualization>\nbroken{{\n</visualization>\nmid\n{BLOCK}\nend"
        transport = RuleTransport().add("interleaved", response)
        draft = self.run_draft(transport)
        report = parse_segments(draft)
        assert len(report.charts()) == 1
        assert len(report.warnings) == 1
        assert report.reconstruct() == response


class TestCitationWarnings:
    def test_known_reference_silent(self):
        draft = "see [the source](https://a.example/p) for details"
        assert citation_warnings(draft, learning_set()) == []

    def test_unknown_reference_warned(self):
        draft = "see [elsewhere](https://unknown.example/x)"
        warnings = citation_warnings(draft, learning_set())
        assert len(warnings) == 1
        assert "unknown.example" in warnings[0]

    def test_canonicalization_applied(self):
        draft = "see [the source](HTTPS://A.EXAMPLE/p/)"
        assert citation_warnings(draft, learning_set()) == []

    def test_duplicates_warned_once(self):
        draft = "[a](https://u.example/x) and [b](https://u.example/x)"
        assert len(citation_warnings(draft, learning_set())) == 1


class TestHeadingWarnings:
    def test_h1_flagged(self):
        assert heading_warnings("# Top\n\n## Sub") != []

    def test_h2_clean(self):
        assert heading_warnings("## Section\n\n### Sub") == []
