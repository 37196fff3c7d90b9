"""Draft the interleaved report and split it into typed segments.

The draft is ordinary markdown in which every chart appears as a delimited
description block. Parsing never loses bytes: concatenating the parsed
segments (chart segments contribute their raw delimited text) reproduces the
source document exactly, and malformed blocks are kept as text with a
warning instead of being dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .fdv import FdvSpec, extract_fdv_blocks
from .gateway import ChatMessage, Gateway, ModelProfile
from .planning import Outline, StyleGuide
from .research import LearningSet, canonical_url, format_learnings
from .textualize import render_example_reports
from . import prompts


class DraftFormatError(Exception):
    pass


@dataclass(frozen=True)
class TextSegment:
    text: str


@dataclass(frozen=True)
class ChartSegment:
    spec: FdvSpec
    ordinal: int
    raw: str  # the delimited block verbatim, for byte-exact reconstruction


Segment = TextSegment | ChartSegment


@dataclass
class ReportDraft:
    segments: list[Segment] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def reconstruct(self) -> str:
        return "".join(
            seg.raw if isinstance(seg, ChartSegment) else seg.text for seg in self.segments
        )

    def charts(self) -> list[ChartSegment]:
        return [seg for seg in self.segments if isinstance(seg, ChartSegment)]


def parse_segments(draft: str) -> ReportDraft:
    """Split a draft into text and chart segments; reconstruction is identity."""
    report = ReportDraft()
    position = 0
    ordinal = 0
    for span, parsed in extract_fdv_blocks(draft):
        if span.start_offset > position:
            report.segments.append(TextSegment(draft[position : span.start_offset]))
        if isinstance(parsed, FdvSpec):
            ordinal += 1
            report.segments.append(ChartSegment(parsed, ordinal, span.raw_text))
        else:
            report.warnings.append(
                f"malformed chart block at offset {span.start_offset}: {parsed}"
            )
            report.segments.append(TextSegment(span.raw_text))
        position = span.end_offset
    if position < len(draft):
        report.segments.append(TextSegment(draft[position:]))
    return report


_H1_RE = re.compile(r"^#\s+\S", re.MULTILINE)


def draft_report(
    gateway: Gateway,
    profile: ModelProfile,
    topic: str,
    outline: Outline,
    learnings: LearningSet,
    style: StyleGuide,
    exemplars: list[str],
) -> str:
    """Generate the interleaved draft; it must contain at least one
    well-formed chart block (one corrective reprompt allowed)."""
    messages = [
        ChatMessage.text(
            "system",
            prompts.fill(
                prompts.REPORT_SYSTEM, example_reports=render_example_reports(exemplars)
            ),
        ),
        ChatMessage.text(
            "user",
            prompts.fill(
                prompts.REPORT_USER,
                topic=topic,
                outline=outline.render(),
                learning_str=format_learnings(learnings.learnings),
                visualization_style_guide=style.text,
            ),
        ),
    ]
    response = gateway.complete(messages, profile)
    if not parse_segments(response).charts():
        retry = messages + [
            ChatMessage.text("assistant", response),
            ChatMessage.text(
                "user",
                "Your previous response contained no parseable <visualization> block. "
                "Respond again and include at least one chart description block in the "
                "required four-part format.",
            ),
        ]
        response = gateway.complete(retry, profile)
        if not parse_segments(response).charts():
            raise DraftFormatError("draft has no parseable chart blocks after one reprompt")
    return response


_LINK_RE = re.compile(r"\[([^\]]*)\]\((https?://[^)\s]+)\)")


def citation_warnings(draft: str, learnings: LearningSet) -> list[str]:
    """Hyperlinks in the draft that do not resolve to the reference list.

    The model may cite any subset of the references; citing something that
    was never retrieved is reported, not fatal.
    """
    known = learnings.reference_urls()
    warnings = []
    seen: set[str] = set()
    for _, url in _LINK_RE.findall(draft):
        canon = canonical_url(url)
        if canon not in known and canon not in seen:
            seen.add(canon)
            warnings.append(f"draft cites unknown source: {url}")
    return warnings


def heading_warnings(draft: str) -> list[str]:
    """The drafting prompt demands second/third-level headings only."""
    if _H1_RE.search(draft):
        return ["draft uses a first-level heading; sections should start at second level"]
    return []
