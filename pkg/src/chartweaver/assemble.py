"""Assemble the final report bundle from the draft and chart artifacts.

Every chart segment becomes an image link (failed charts get a neutral
placeholder carrying the chart title plus a visible failure note), text
segments pass through byte-identical, a deduplicated references section is
appended, and a provenance manifest records the chosen version and
iteration count per chart.
"""

from __future__ import annotations

import base64
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .drafting import ChartSegment, ReportDraft, TextSegment
from .fdv import FdvSpec
from .forge import ChartArtifact
from .htmlout import render_body, render_page
from .imaging import placeholder_png
from .research import LearningSet, canonical_url


class MissingArtifactError(Exception):
    def __init__(self, ordinal: int):
        super().__init__(f"no chart artifact for ordinal {ordinal}")
        self.ordinal = ordinal


@dataclass
class ChartProvenance:
    ordinal: int
    caption: str
    failed: bool
    final_version: int | None
    versions: int
    iterations: int
    selection_used: bool

    def to_dict(self) -> dict:
        return {
            "ordinal": self.ordinal,
            "caption": self.caption,
            "failed": self.failed,
            "final_version": self.final_version,
            "versions": self.versions,
            "iterations": self.iterations,
            "selection_used": self.selection_used,
        }


@dataclass
class FinalReport:
    markdown: str
    outdir: Path
    chart_files: dict[int, Path] = field(default_factory=dict)
    references: list[tuple[str, str]] = field(default_factory=list)
    manifest: list[ChartProvenance] = field(default_factory=list)

    @property
    def markdown_path(self) -> Path:
        return self.outdir / "report.md"

    @property
    def html_path(self) -> Path:
        return self.outdir / "report.html"

    @property
    def manifest_path(self) -> Path:
        return self.outdir / "manifest.meta"


_TITLE_IN_LAYOUT_RE = re.compile(r"title[^\"']{0,60}[\"']([^\"']{1,120})[\"']", re.IGNORECASE)


def chart_caption(spec: FdvSpec, ordinal: int) -> str:
    """Caption from the quoted title text in the layout part, if any."""
    for value in spec.layout.values():
        match = _TITLE_IN_LAYOUT_RE.search(value)
        if match:
            return match.group(1).strip()
    return f"Figure {ordinal}"


def _ordered_references(markdown: str, learnings: LearningSet) -> list[tuple[str, str]]:
    """First-citation order within the report, uncited references after."""
    by_canon = {canonical_url(url): (url, title) for url, title in learnings.references}
    ordered: list[tuple[str, str]] = []
    seen: set[str] = set()
    for match in re.finditer(r"\]\((https?://[^)\s]+)\)", markdown):
        canon = canonical_url(match.group(1))
        if canon in by_canon and canon not in seen:
            seen.add(canon)
            ordered.append(by_canon[canon])
    for url, title in learnings.references:
        if canonical_url(url) not in seen:
            seen.add(canonical_url(url))
            ordered.append((url, title))
    return ordered


def manifest_json(manifest: list[ChartProvenance]) -> str:
    payload = {"charts": [entry.to_dict() for entry in manifest]}
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def assemble(
    draft: ReportDraft,
    artifacts: list[ChartArtifact],
    learnings: LearningSet,
    outdir: Path | str,
) -> FinalReport:
    """Write report.md, charts/, and manifest.meta under ``outdir``."""
    outdir = Path(outdir)
    charts_dir = outdir / "charts"
    charts_dir.mkdir(parents=True, exist_ok=True)

    by_ordinal = {artifact.ordinal: artifact for artifact in artifacts}
    segments = draft.charts()
    if len(segments) != len(artifacts):
        raise MissingArtifactError(
            segments[len(artifacts)].ordinal if len(artifacts) < len(segments) else -1
        )

    final = FinalReport(markdown="", outdir=outdir)
    pieces: list[str] = []
    for segment in draft.segments:
        if isinstance(segment, TextSegment):
            pieces.append(segment.text)
            continue
        assert isinstance(segment, ChartSegment)
        artifact = by_ordinal.get(segment.ordinal)
        if artifact is None:
            raise MissingArtifactError(segment.ordinal)
        caption = chart_caption(segment.spec, segment.ordinal)
        filename = f"chart_{segment.ordinal}.png"
        path = charts_dir / filename
        version = artifact.final_version
        if not artifact.failed and version is not None and version.screenshot is not None:
            path.write_bytes(version.screenshot)
            note = caption
        else:
            path.write_bytes(placeholder_png(caption))
            note = f"{caption} (chart rendering failed)"
        final.chart_files[segment.ordinal] = path
        pieces.append(f"![{caption}](charts/{filename})\n\n*{note}*")
        final.manifest.append(
            ChartProvenance(
                ordinal=segment.ordinal,
                caption=caption,
                failed=artifact.failed,
                final_version=artifact.final_index,
                versions=len(artifact.versions),
                iterations=artifact.iterations,
                selection_used=artifact.selection_used,
            )
        )

    markdown = "".join(pieces)
    final.references = _ordered_references(markdown, learnings)
    if final.references:
        lines = ["", "", "## References", ""]
        for index, (url, title) in enumerate(final.references, start=1):
            lines.append(f"{index}. [{title or url}]({url})")
        markdown += "\n".join(lines) + "\n"
    final.markdown = markdown

    final.markdown_path.write_text(markdown, encoding="utf-8")
    final.manifest_path.write_text(manifest_json(final.manifest), encoding="utf-8")
    return final


def emit_html(final: FinalReport, title: str = "Report") -> str:
    """Self-contained page: chart images embedded as base64 data URIs."""

    def image_src(src: str) -> str:
        path = final.outdir / src
        if path.is_file():
            encoded = base64.b64encode(path.read_bytes()).decode("ascii")
            return f"data:image/png;base64,{encoded}"
        return src

    page = render_page(title, render_body(final.markdown, image_src))
    final.html_path.write_text(page, encoding="utf-8")
    return page
