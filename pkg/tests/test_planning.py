from __future__ import annotations

import pytest

from chartweaver.gateway import Gateway, ModelProfile
from chartweaver.planning import (
    Outline,
    PlanFormatError,
    Section,
    StyleGuide,
    make_plan,
    parse_outline,
    plan_from_meta,
    plan_to_meta,
    split_plan,
)
from chartweaver.research import Learning

from helpers import RuleTransport

TEXT = ModelProfile(role="text_model", endpoint="m-text", temperature=0.0)
LEARNINGS = [Learning("EV sales grew 35% in 2024", ("https://iea.example/r",))]

STYLE_TEXT = (
    "Use a restrained palette anchored on deep navy #1a355e with amber #e8a33d accents; "
    "headings in a serif face, data labels in a compact sans."
)


def plan_response(n_sections: int, style: str = STYLE_TEXT) -> str:
    parts = ["## Visualization Style Guide", "", style, ""]
    for i in range(1, n_sections + 1):
        parts.append(f"**Title:** Section {i} heading")
        parts.append(f"**Summary:** First point of section {i}. Second point. Third point.")
        parts.append("")
    return "\n".join(parts)


def gw(transport) -> Gateway:
    return Gateway(mode="live", transport=transport, sleeper=lambda s: None)


class TestParseOutline:
    def test_four_pairs(self):
        outline = parse_outline(plan_response(4))
        assert len(outline.sections) == 4
        assert outline.sections[0].title == "Section 1 heading"
        assert outline.sections[2].summary.startswith("First point of section 3.")

    def test_title_without_summary(self):
        bad = "**Title:** Lonely title\n\nSome prose but no summary marker"
        with pytest.raises(PlanFormatError) as exc:
            parse_outline(bad)
        assert exc.value.section_index == 0

    def test_prose_prefix_ignored(self):
        text = "Here is your outline, carefully crafted:\n\n" + plan_response(5)
        assert len(parse_outline(text).sections) == 5

    def test_marker_case_insensitive(self):
        text = plan_response(4).replace("**Title:**", "**TITLE:**")
        assert len(parse_outline(text).sections) == 4

    def test_no_markers(self):
        with pytest.raises(PlanFormatError):
            parse_outline("just prose")


class TestOutlineValidation:
    def make(self, n: int, summary: str = "One. Two. Three.") -> Outline:
        return Outline([Section(f"T{i}", summary) for i in range(n)])

    def test_window_enforced(self):
        for n in (4, 5, 6):
            self.make(n).validate()
        for n in (3, 7):
            with pytest.raises(PlanFormatError):
                self.make(n).validate()

    def test_duplicate_titles_rejected(self):
        outline = Outline([Section("Same", "A point.")] * 4)
        with pytest.raises(PlanFormatError):
            outline.validate()

    def test_summary_sentence_cap(self):
        too_long = " ".join(f"Sentence {i}." for i in range(9))
        with pytest.raises(PlanFormatError):
            self.make(4, too_long).validate()

    def test_summary_without_period_counts_as_one(self):
        self.make(4, "a short unpunctuated note").validate()

    def test_empty_summary_rejected(self):
        with pytest.raises(PlanFormatError):
            self.make(4, "   ").validate()


class TestStyleGuide:
    def test_hex_color_accepted(self):
        StyleGuide("anchor on #1a355e throughout").validate()

    def test_named_color_accepted(self):
        StyleGuide("use a navy and amber palette").validate()

    def test_missing_color_rejected(self):
        with pytest.raises(PlanFormatError):
            StyleGuide("make it look professional and clean").validate()

    def test_empty_rejected(self):
        with pytest.raises(PlanFormatError):
            StyleGuide("  ").validate()


class TestSplitPlan:
    def test_prefix_is_style(self):
        style, outline_text = split_plan(plan_response(4))
        assert "#1a355e" in style
        assert outline_text.startswith("**Title:**")

    def test_no_titles_all_style(self):
        style, outline_text = split_plan("only prose")
        assert style == "only prose"
        assert outline_text == ""


class TestMakePlan:
    def test_single_call_happy_path(self):
        transport = RuleTransport().add("structured outline", plan_response(5))
        outline, style = make_plan(gw(transport), TEXT, "topic", LEARNINGS, ["exemplar text"])
        assert len(outline.sections) == 5
        assert "#1a355e" in style.text
        assert len(transport.calls) == 1

    def test_exemplars_and_learnings_in_prompt(self):
        transport = RuleTransport().add("structured outline", plan_response(4))
        make_plan(gw(transport), TEXT, "topic", LEARNINGS, ["EXEMPLAR-MARKER"])
        prompt = transport.calls[0][1]
        assert "EXEMPLAR-MARKER" in prompt
        assert "EV sales grew 35% in 2024" in prompt

    def test_corrective_reprompt_recovers(self):
        transport = RuleTransport()
        transport.add("structurally invalid", plan_response(4))
        transport.add("structured outline", plan_response(3))
        outline, _ = make_plan(gw(transport), TEXT, "topic", LEARNINGS, [])
        assert len(outline.sections) == 4
        assert len(transport.calls) == 2

    def test_three_sections_twice_fails(self):
        transport = RuleTransport().add("", plan_response(3))
        with pytest.raises(PlanFormatError):
            make_plan(gw(transport), TEXT, "topic", LEARNINGS, [])
        assert len(transport.calls) == 2

    def test_colorless_style_after_reprompt_fails(self):
        transport = RuleTransport().add(
            "", plan_response(5, style="be consistent and tasteful")
        )
        with pytest.raises(PlanFormatError):
            make_plan(gw(transport), TEXT, "topic", LEARNINGS, [])

    def test_requires_learnings(self):
        with pytest.raises(ValueError):
            make_plan(gw(RuleTransport()), TEXT, "topic", [], [])

    def test_deterministic_for_same_transport(self):
        def fresh():
            transport = RuleTransport().add("structured outline", plan_response(6))
            return make_plan(gw(transport), TEXT, "topic", LEARNINGS, [])

        first_outline, first_style = fresh()
        second_outline, second_style = fresh()
        assert first_outline.to_dict() == second_outline.to_dict()
        assert first_style.text == second_style.text


class TestPersistence:
    def test_meta_round_trip(self):
        outline = Outline([Section(f"T{i}", f"Summary {i}.") for i in range(4)])
        style = StyleGuide(STYLE_TEXT)
        meta = plan_to_meta(outline, style)
        outline2, style2 = plan_from_meta(meta)
        assert outline2.to_dict() == outline.to_dict()
        assert style2.text == style.text
