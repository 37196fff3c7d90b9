from __future__ import annotations

import pytest

from chartweaver.forge import (
    ChartVersion,
    Critique,
    RefineConfig,
    critique_render,
    forge_all,
    format_console,
    generate_code,
    refine,
    run_refinement,
    select_final,
)
from chartweaver.gateway import ExtractionError, Gateway, ImagePart, ModelProfile
from chartweaver.render import ConsoleEntry, RenderResult, RenderTimeout

from helpers import RuleTransport
from stub_browser import screenshot_for
from test_fdv import make_spec

TEXT = ModelProfile(role="text_model", endpoint="m-text", temperature=0.0)
VISION = ModelProfile(role="vision_model", endpoint="m-vision", temperature=0.0)

CODE_V0 = "<!DOCTYPE html>\n<html><body>v0</body></html>"
SATISFIED = "The chart renders faithfully and is readable. No issues found."
UNSATISFIED = "1. Overlapping labels in the legend area.\n2. Title is truncated."


def gw(transport) -> Gateway:
    return Gateway(mode="live", transport=transport, sleeper=lambda s: None)


class FakeRenderer:
    """Renderer double with programmable failures and a render counter."""

    def __init__(self, fail_times: int = 0):
        self.calls = 0
        self.fail_times = fail_times
        self.documents: list[str] = []

    def __call__(self, document: str) -> RenderResult:
        self.calls += 1
        self.documents.append(document)
        if self.fail_times > 0:
            self.fail_times -= 1
            raise RenderTimeout(
                "page not ready within 1s", [ConsoleEntry("error", "Uncaught TypeError")]
            )
        return RenderResult(
            console=[], screenshot=screenshot_for(document, 32, 24), load_ms=1.0, settle_ms=1.0
        )


def chart_transport(critiques: list[str], selection: str | None = None) -> RuleTransport:
    transport = RuleTransport()
    versions = iter(range(1, 50))
    transport.add(
        "I need a professional HTML visualization", f"intro\n```html\n{CODE_V0}\n```"
    )
    transport.add(
        "regenerate the complete HTML code",
        lambda text: "```html\n<!DOCTYPE html>\n<html><body>v%d</body></html>\n```"
        % next(versions),
    )
    critique_iter = iter(critiques)
    transport.add("Here is a screenshot of the page", lambda text: next(critique_iter))
    if selection is not None:
        transport.add("identify which one best meets", selection)
    return transport


class TestCritique:
    def run(self, response: str) -> Critique:
        transport = RuleTransport().add("Here is a screenshot", response)
        return critique_render(gw(transport), VISION, b"\x89PNG fake", [])

    def test_sentinel_exact_match_satisfies(self):
        assert self.run(SATISFIED).satisfied is True

    def test_trailing_whitespace_trimmed(self):
        assert self.run(SATISFIED + "  \n\n").satisfied is True

    def test_lowercase_sentinel_rejected(self):
        assert self.run("everything fine. no issues found.").satisfied is False

    def test_sentinel_in_middle_rejected(self):
        assert self.run("No issues found. But wait, the legend overlaps.").satisfied is False

    def test_feedback_is_full_text(self):
        critique = self.run(UNSATISFIED)
        assert critique.satisfied is False
        assert critique.feedback == UNSATISFIED

    def test_console_included_in_prompt(self):
        transport = RuleTransport().add("Here is a screenshot", SATISFIED)
        console = [ConsoleEntry("error", "d3 is not defined")]
        critique_render(gw(transport), VISION, b"png", console)
        assert "d3 is not defined" in transport.calls[0][1]


class TestGenerateAndRefine:
    def test_generate_extracts_last_html_fence(self):
        transport = RuleTransport().add(
            "I need a professional HTML visualization",
            f"plan first\n```html\n<html>draft</html>\n```\nthen\n```html\n{CODE_V0}\n```",
        )
        assert generate_code(gw(transport), TEXT, make_spec(), "guide") == CODE_V0

    def test_generate_reprompts_once_then_fails(self):
        transport = RuleTransport().add("", "no code here at all")
        with pytest.raises(ExtractionError):
            generate_code(gw(transport), TEXT, make_spec(), "guide")
        assert len(transport.calls) == 2

    def test_generate_reprompt_recovers(self):
        transport = RuleTransport()
        transport.add("did not contain an ```html code block", f"```html\n{CODE_V0}\n```")
        transport.add("I need a professional HTML visualization", "prose only")
        assert generate_code(gw(transport), TEXT, make_spec(), "guide") == CODE_V0

    def test_refine_includes_context(self):
        transport = RuleTransport().add(
            "regenerate the complete HTML code", "```html\n<html>v1</html>\n```"
        )
        console = [ConsoleEntry("error", "SyntaxError line 12")]
        out = refine(gw(transport), TEXT, CODE_V0, console, "labels overlap")
        assert out == "<html>v1</html>"
        prompt = transport.calls[0][1]
        assert CODE_V0 in prompt
        assert "SyntaxError line 12" in prompt
        assert "labels overlap" in prompt

    def test_refine_with_empty_feedback_proceeds(self):
        transport = RuleTransport().add("regenerate", "```html\n<html>fixed</html>\n```")
        out = refine(gw(transport), TEXT, CODE_V0, [ConsoleEntry("error", "boom")], "")
        assert out == "<html>fixed</html>"


class TestSelect:
    def test_first_and_second_parsed(self):
        for word in ("first", "second"):
            transport = RuleTransport().add(
                "identify which one best meets",
                f"<evaluation>notes</evaluation>\n<selection>\n{word}\n</selection>",
            )
            choice, fallback = select_final(gw(transport), VISION, b"old", b"new", make_spec())
            assert choice == word
            assert fallback is False

    def test_malformed_defaults_to_newer(self):
        transport = RuleTransport().add("identify which one best meets", "I prefer the second")
        choice, fallback = select_final(gw(transport), VISION, b"old", b"new", make_spec())
        assert choice == "second"
        assert fallback is True

    def test_case_insensitive_tag(self):
        transport = RuleTransport().add(
            "identify", "<SELECTION>First</SELECTION>"
        )
        choice, _ = select_final(gw(transport), VISION, b"old", b"new", make_spec())
        assert choice == "first"


class TestRefinementLoop:
    def test_satisfied_first_critique(self):
        renderer = FakeRenderer()
        transport = chart_transport([SATISFIED])
        artifact = run_refinement(
            gw(transport), TEXT, VISION, make_spec(), "guide", RefineConfig(3), renderer
        )
        assert len(artifact.versions) == 1
        assert renderer.calls == 1
        assert artifact.selection_used is False
        assert artifact.final_index == 0
        assert artifact.failed is False
        assert artifact.iterations == 1

    def test_never_satisfied_produces_nmax_plus_one_versions(self):
        renderer = FakeRenderer()
        transport = chart_transport(
            [UNSATISFIED] * 3, selection="<selection>second</selection>"
        )
        artifact = run_refinement(
            gw(transport), TEXT, VISION, make_spec(), "guide", RefineConfig(3), renderer
        )
        assert len(artifact.versions) == 4
        assert renderer.calls == 4
        assert artifact.selection_used is True
        assert artifact.final_index == 3
        assert artifact.iterations == 3
        assert all(v.critique is not None for v in artifact.versions[:-1])

    def test_selection_sees_last_two_screenshots_in_old_new_order(self):
        renderer = FakeRenderer()
        transport = chart_transport(
            [UNSATISFIED] * 3, selection="<selection>first</selection>"
        )
        artifact = run_refinement(
            gw(transport), TEXT, VISION, make_spec(), "guide", RefineConfig(3), renderer
        )
        assert artifact.final_index == 2
        profile, messages = transport.raw_calls[-1]
        images = [p for m in messages for p in m.parts if isinstance(p, ImagePart)]
        assert len(images) == 2
        assert images[0].decoded() == artifact.versions[-2].screenshot
        assert images[1].decoded() == artifact.versions[-1].screenshot

    def test_minimal_loop_nmax_one(self):
        renderer = FakeRenderer()
        transport = chart_transport([UNSATISFIED], selection="<selection>second</selection>")
        artifact = run_refinement(
            gw(transport), TEXT, VISION, make_spec(), "guide", RefineConfig(1), renderer
        )
        assert len(artifact.versions) == 2
        assert renderer.calls == 2
        assert artifact.selection_used is True

    def test_satisfied_midway_still_selects_over_last_two(self):
        renderer = FakeRenderer()
        transport = chart_transport(
            [UNSATISFIED, SATISFIED], selection="<selection>second</selection>"
        )
        artifact = run_refinement(
            gw(transport), TEXT, VISION, make_spec(), "guide", RefineConfig(3), renderer
        )
        assert len(artifact.versions) == 2
        assert renderer.calls == 2
        assert artifact.selection_used is True
        assert artifact.final_index == 1

    def test_render_failure_synthesizes_critique_and_continues(self):
        renderer = FakeRenderer(fail_times=1)
        transport = chart_transport([SATISFIED])
        artifact = run_refinement(
            gw(transport), TEXT, VISION, make_spec(), "guide", RefineConfig(2), renderer
        )
        first = artifact.versions[0]
        assert first.render_error is not None
        assert first.critique.satisfied is False
        assert "Rendering failed" in first.critique.feedback
        assert artifact.failed is False
        assert artifact.final_index == 1

    def test_all_renders_fail_marks_artifact_failed(self):
        renderer = FakeRenderer(fail_times=99)
        transport = chart_transport([UNSATISFIED] * 2)
        artifact = run_refinement(
            gw(transport), TEXT, VISION, make_spec(), "guide", RefineConfig(2), renderer
        )
        assert artifact.failed is True
        assert artifact.final_index is None

    def test_final_index_always_in_last_two(self):
        for critiques, selection in [
            ([UNSATISFIED, UNSATISFIED], "<selection>first</selection>"),
            ([UNSATISFIED, SATISFIED], "<selection>second</selection>"),
            ([SATISFIED], None),
        ]:
            renderer = FakeRenderer()
            transport = chart_transport(critiques, selection=selection)
            artifact = run_refinement(
                gw(transport), TEXT, VISION, make_spec(), "guide", RefineConfig(2), renderer
            )
            assert artifact.final_index >= len(artifact.versions) - 2


class TestForgeAll:
    def test_order_preserved_and_isolated_failures(self):
        renderer = FakeRenderer()
        doomed = make_spec(1)
        doomed.data["Part-C.1"] = "FAIL-THIS-CHART"
        transport = RuleTransport()
        transport.add("FAIL-THIS-CHART", "no code fence at all")
        transport.add("I need a professional", f"```html\n{CODE_V0}\n```")
        transport.add("Here is a screenshot", SATISFIED)
        charts = [(1, doomed), (2, make_spec(2))]
        artifacts = forge_all(
            gw(transport), TEXT, VISION, charts, "guide", RefineConfig(1), renderer,
            parallelism=1,
        )
        assert [a.ordinal for a in artifacts] == [1, 2]
        assert artifacts[0].failed is True
        assert artifacts[1].failed is False

    def test_parallel_run_completes(self):
        renderer = FakeRenderer()
        transport = chart_transport([SATISFIED] * 4)
        charts = [(i, make_spec(i)) for i in range(1, 4)]
        artifacts = forge_all(
            gw(transport), TEXT, VISION, charts, "guide", RefineConfig(1), renderer,
            parallelism=2,
        )
        assert len(artifacts) == 3
        assert all(not a.failed for a in artifacts)


class TestFormatConsole:
    def test_empty(self):
        assert format_console([]) == "(no console messages)"

    def test_entries_rendered(self):
        out = format_console(
            [ConsoleEntry("error", "bad", "file.html:3"), ConsoleEntry("info", "ok")]
        )
        assert out == "[error] bad (file.html:3)\n[info] ok"
