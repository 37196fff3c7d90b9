"""Report outline and visualization style guide generation.

One model call returns both deliverables: a freeform style guide followed by
4-6 sections, each written as a ``**Title:** ... **Summary:** ...`` pair.
The style guide is treated as opaque text downstream, except that it must
mention at least one color specification.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .gateway import ChatMessage, Gateway, ModelProfile
from .research import Learning, format_learnings
from .textualize import render_example_reports
from . import prompts

SECTION_MIN = 4
SECTION_MAX = 6
SUMMARY_SENTENCES_MAX = 8


class PlanFormatError(Exception):
    def __init__(self, reason: str, section_index: int | None = None):
        super().__init__(reason)
        self.reason = reason
        self.section_index = section_index


@dataclass(frozen=True)
class Section:
    title: str
    summary: str


@dataclass
class Outline:
    sections: list[Section]

    def validate(self) -> None:
        count = len(self.sections)
        if not SECTION_MIN <= count <= SECTION_MAX:
            raise PlanFormatError(
                f"outline has {count} sections, expected {SECTION_MIN}-{SECTION_MAX}"
            )
        titles = [section.title.strip() for section in self.sections]
        if any(not title for title in titles):
            raise PlanFormatError("outline contains an empty section title")
        if len({t.casefold() for t in titles}) != len(titles):
            raise PlanFormatError("outline section titles are not pairwise distinct")
        for index, section in enumerate(self.sections):
            sentences = _sentence_count(section.summary)
            if sentences < 1:
                raise PlanFormatError(f"section {index + 1} has an empty summary", index)
            if sentences > SUMMARY_SENTENCES_MAX:
                raise PlanFormatError(
                    f"section {index + 1} summary has {sentences} sentences "
                    f"(max {SUMMARY_SENTENCES_MAX})",
                    index,
                )

    def render(self) -> str:
        parts = []
        for section in self.sections:
            parts.append(f"**Title:** {section.title}\n**Summary:** {section.summary}")
        return "\n\n".join(parts)

    def to_dict(self) -> dict:
        return {"sections": [{"title": s.title, "summary": s.summary} for s in self.sections]}

    @classmethod
    def from_dict(cls, data: dict) -> "Outline":
        return cls([Section(s["title"], s["summary"]) for s in data["sections"]])


# a color is either a hex token or a named palette color
_HEX_COLOR_RE = re.compile(r"#[0-9a-fA-F]{3}(?:[0-9a-fA-F]{3})?(?:[0-9a-fA-F]{2})?\b")
_NAMED_COLORS = (
    "black|white|gr[ae]y|red|orange|yellow|green|teal|cyan|blue|navy|purple|violet|"
    "magenta|pink|brown|maroon|olive|lime|aqua|silver|gold|indigo|coral|salmon|"
    "turquoise|beige|ivory|khaki|lavender|crimson|slate|charcoal|amber|emerald|sapphire"
)
_NAMED_COLOR_RE = re.compile(rf"\b(?:{_NAMED_COLORS})\b", re.IGNORECASE)


@dataclass
class StyleGuide:
    text: str

    def validate(self) -> None:
        if not self.text.strip():
            raise PlanFormatError("style guide is empty")
        if not (_HEX_COLOR_RE.search(self.text) or _NAMED_COLOR_RE.search(self.text)):
            raise PlanFormatError("style guide never mentions a color specification")


def _sentence_count(text: str) -> int:
    text = text.strip()
    if not text:
        return 0
    enders = re.findall(r"[.!?]+(?=\s|$)", text)
    return max(1, len(enders))


_TITLE_RE = re.compile(r"\*\*\s*title\s*:?\s*\*\*\s*:?", re.IGNORECASE)
_SUMMARY_RE = re.compile(r"\*\*\s*summary\s*:?\s*\*\*\s*:?", re.IGNORECASE)


def parse_outline(response: str) -> Outline:
    """Parse Title/Summary marker pairs; prose before the first title is
    ignored; a title without a summary is an error."""
    titles = list(_TITLE_RE.finditer(response))
    if not titles:
        raise PlanFormatError("no **Title:** markers found", section_index=0)
    sections = []
    for index, match in enumerate(titles):
        end = titles[index + 1].start() if index + 1 < len(titles) else len(response)
        chunk = response[match.end() : end]
        summary_match = _SUMMARY_RE.search(chunk)
        if summary_match is None:
            raise PlanFormatError(
                f"section {index + 1} has a title but no summary", section_index=index
            )
        title = chunk[: summary_match.start()].strip().strip("*").strip()
        summary = chunk[summary_match.end() :].strip()
        sections.append(Section(title, summary))
    return Outline(sections)


def split_plan(response: str) -> tuple[str, str]:
    """Split one response into (style guide text, outline text)."""
    first_title = _TITLE_RE.search(response)
    if first_title is None:
        return response.strip(), ""
    return response[: first_title.start()].strip(), response[first_title.start() :]


def make_plan(
    gateway: Gateway,
    profile: ModelProfile,
    topic: str,
    learnings: list[Learning],
    exemplars: list[str],
) -> tuple[Outline, StyleGuide]:
    """One call yields both the outline and the style guide; a structural
    violation earns exactly one corrective reprompt."""
    if not learnings:
        raise ValueError("make_plan requires non-empty learnings")
    messages = [
        ChatMessage.text(
            "system",
            prompts.fill(
                prompts.OUTLINE_SYSTEM, example_reports=render_example_reports(exemplars)
            ),
        ),
        ChatMessage.text(
            "user",
            prompts.fill(
                prompts.OUTLINE_USER, topic=topic, learning_str=format_learnings(learnings)
            ),
        ),
    ]
    response = gateway.complete(messages, profile)
    try:
        return _parse_and_validate(response)
    except PlanFormatError as first_error:
        retry = messages + [
            ChatMessage.text("assistant", response),
            ChatMessage.text(
                "user",
                f"Your previous response was structurally invalid: {first_error.reason}. "
                f"Respond again with the visualization style guide first, then "
                f"{SECTION_MIN}-{SECTION_MAX} sections, each as a **Title:** line followed "
                "by a **Summary:** narrative.",
            ),
        ]
        response = gateway.complete(retry, profile)
        return _parse_and_validate(response)


def _parse_and_validate(response: str) -> tuple[Outline, StyleGuide]:
    style_text, outline_text = split_plan(response)
    outline = parse_outline(outline_text)
    outline.validate()
    style = StyleGuide(style_text)
    style.validate()
    return outline, style


def plan_to_markdown(outline: Outline, style: StyleGuide) -> str:
    return f"## Visualization Style Guide\n\n{style.text}\n\n## Outline\n\n{outline.render()}\n"


def plan_to_meta(outline: Outline, style: StyleGuide) -> str:
    payload = {"style_guide": style.text, "outline": outline.to_dict()}
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def plan_from_meta(text: str) -> tuple[Outline, StyleGuide]:
    data = json.loads(text)
    return Outline.from_dict(data["outline"]), StyleGuide(data["style_guide"])
