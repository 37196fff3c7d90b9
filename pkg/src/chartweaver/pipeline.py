"""Stage orchestration and run-directory persistence.

Every stage reads its inputs from the run directory and writes its own
outputs there, so stages can be re-run in isolation and a replay-mode rerun
overwrites each file with identical bytes.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .assemble import FinalReport, assemble, emit_html
from .config import ConfigError, RunConfig
from .drafting import citation_warnings, draft_report, heading_warnings, parse_segments
from .forge import ChartArtifact, forge_all
from .gateway import Gateway, HttpTransport, RecordStore
from .planning import Outline, StyleGuide, make_plan, plan_from_meta, plan_to_markdown, plan_to_meta
from .render import RenderHarness
from .research import (
    FirecrawlSearch,
    FixtureCorpus,
    LearningSet,
    SearchBackend,
    WebPage,
    format_learnings,
    keyword_slug,
    run_research,
)
from .textualize import ExemplarLibrary

logger = logging.getLogger(__name__)

LEARNINGS_META = "learnings.meta"
LEARNINGS_MD = "learnings.md"
PLAN_META = "plan.meta"
PLAN_MD = "plan.md"
DRAFT_MD = "draft.md"


class StageInputError(Exception):
    """A stage was invoked before its upstream outputs exist."""


def build_gateway(config: RunConfig) -> Gateway:
    store = RecordStore(config.paths.fixtures) if config.paths.fixtures else None
    if config.mode == "replay":
        return Gateway(mode="replay", store=store)
    transport = HttpTransport(base_url=config.base_url)
    return Gateway(
        mode=config.mode,
        store=store,
        transport=transport,
        requests_per_minute=dict(config.requests_per_minute),
    )


class RecordingSearch:
    """Live search that also writes every page into the fixture corpus."""

    def __init__(self, live: SearchBackend, corpus: FixtureCorpus):
        self.live = live
        self.corpus = corpus

    def search(self, keyword: str, limit: int) -> list[WebPage]:
        recorded = self.corpus.search(keyword, limit)
        if recorded:
            return recorded
        pages = self.live.search(keyword, limit)
        for rank, page in enumerate(pages, start=1):
            self.corpus.write_page(keyword, rank, page.url, page.title, page.content)
        return pages


def build_search_backend(config: RunConfig) -> SearchBackend:
    kind = config.resolved_search_backend()
    if kind == "corpus":
        if config.paths.corpus is None:
            raise ConfigError("corpus search backend requires paths.corpus")
        return FixtureCorpus(config.paths.corpus)
    api_key = os.environ.get("CW_SEARCH_API_KEY", "")
    if not api_key:
        raise ConfigError("live search requires CW_SEARCH_API_KEY")
    live = FirecrawlSearch(api_key, base_url=config.search_base_url)
    if config.mode == "record" and config.paths.corpus is not None:
        return RecordingSearch(live, FixtureCorpus(config.paths.corpus))
    return live


def resolve_run_id(config: RunConfig, topic: str) -> str:
    if config.run_id:
        return config.run_id
    slug = keyword_slug(topic)[:48] or "run"
    if config.mode == "replay":
        return f"replay-{config.seed}-{slug}"
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    return f"{stamp}-{slug}"


# -- stages ------------------------------------------------------------------


def learnings_markdown(learnings: LearningSet) -> str:
    lines = [f"# Learnings: {learnings.topic}", ""]
    lines.append(format_learnings(learnings.learnings))
    lines += ["", "## References", ""]
    for index, (url, title) in enumerate(learnings.references, start=1):
        lines.append(f"{index}. [{title or url}]({url})")
    return "\n".join(lines) + "\n"


def stage_research(
    config: RunConfig,
    gateway: Gateway,
    backend: SearchBackend,
    topic: str,
    outdir: Path,
) -> LearningSet:
    learnings = run_research(gateway, config.profiles.text, backend, topic, config.research)
    outdir.mkdir(parents=True, exist_ok=True)
    meta = json.dumps(learnings.to_dict(), indent=2, ensure_ascii=False) + "\n"
    (outdir / LEARNINGS_META).write_text(meta, encoding="utf-8")
    (outdir / LEARNINGS_MD).write_text(learnings_markdown(learnings), encoding="utf-8")
    return learnings


def load_learnings(outdir: Path) -> LearningSet:
    path = outdir / LEARNINGS_META
    if not path.is_file():
        raise StageInputError(f"no research output at {path}; run the research stage first")
    return LearningSet.from_dict(json.loads(path.read_text(encoding="utf-8")))


def load_exemplars(config: RunConfig, gateway: Gateway) -> list[str]:
    library = ExemplarLibrary(config.paths.exemplars)
    return library.load_all(gateway, config.profiles.vision)


def stage_plan(
    config: RunConfig,
    gateway: Gateway,
    topic: str,
    learnings: LearningSet,
    exemplars: list[str],
    outdir: Path,
) -> tuple[Outline, StyleGuide]:
    outline, style = make_plan(
        gateway, config.profiles.text, topic, learnings.learnings, exemplars
    )
    (outdir / PLAN_MD).write_text(plan_to_markdown(outline, style), encoding="utf-8")
    (outdir / PLAN_META).write_text(plan_to_meta(outline, style), encoding="utf-8")
    return outline, style


def load_plan(outdir: Path) -> tuple[Outline, StyleGuide]:
    path = outdir / PLAN_META
    if not path.is_file():
        raise StageInputError(f"no plan at {path}; run the plan stage first")
    return plan_from_meta(path.read_text(encoding="utf-8"))


def stage_draft(
    config: RunConfig,
    gateway: Gateway,
    topic: str,
    learnings: LearningSet,
    outline: Outline,
    style: StyleGuide,
    exemplars: list[str],
    outdir: Path,
) -> str:
    draft = draft_report(
        gateway, config.profiles.text, topic, outline, learnings, style, exemplars
    )
    (outdir / DRAFT_MD).write_text(draft, encoding="utf-8")
    for warning in (*citation_warnings(draft, learnings), *heading_warnings(draft)):
        logger.warning("%s", warning)
    return draft


def load_draft(outdir: Path) -> str:
    path = outdir / DRAFT_MD
    if not path.is_file():
        raise StageInputError(f"no draft at {path}; run the draft stage first")
    return path.read_text(encoding="utf-8")


def persist_artifact(artifact: ChartArtifact, charts_dir: Path) -> None:
    folder = charts_dir / str(artifact.ordinal)
    folder.mkdir(parents=True, exist_ok=True)
    for index, version in enumerate(artifact.versions):
        (folder / f"v{index}.html").write_text(version.code, encoding="utf-8")
        if version.screenshot is not None:
            (folder / f"v{index}.png").write_bytes(version.screenshot)
        console = [
            {"severity": e.severity, "text": e.text, "source": e.source}
            for e in (version.console or [])
        ]
        (folder / f"v{index}.console").write_text(
            json.dumps(console, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        if version.critique is not None:
            (folder / f"v{index}.critique").write_text(
                json.dumps(
                    {
                        "satisfied": version.critique.satisfied,
                        "feedback": version.critique.feedback,
                    },
                    indent=2,
                    ensure_ascii=False,
                )
                + "\n",
                encoding="utf-8",
            )


def stage_forge_and_assemble(
    config: RunConfig,
    gateway: Gateway,
    harness: RenderHarness,
    learnings: LearningSet,
    style: StyleGuide,
    draft: str,
    outdir: Path,
) -> FinalReport:
    report = parse_segments(draft)
    for warning in report.warnings:
        logger.warning("%s", warning)
    charts = [(segment.ordinal, segment.spec) for segment in report.charts()]
    artifacts = forge_all(
        gateway,
        config.profiles.text,
        config.profiles.vision,
        charts,
        style.text,
        config.refine,
        harness.render,
        parallelism=config.parallel_charts,
    )
    charts_dir = outdir / "charts"
    for artifact in artifacts:
        persist_artifact(artifact, charts_dir)
    final = assemble(report, artifacts, learnings, outdir)
    emit_html(final, title=learnings.topic)
    return final


@dataclass
class ReportRun:
    outdir: Path
    learnings: LearningSet
    final: FinalReport


def run_report_pipeline(
    config: RunConfig,
    topic: str,
    gateway: Gateway,
    backend: SearchBackend,
    harness: RenderHarness,
    exemplars: list[str],
    outdir: Path,
) -> ReportRun:
    """The four stages in order, everything persisted under ``outdir``."""
    learnings = stage_research(config, gateway, backend, topic, outdir)
    outline, style = stage_plan(config, gateway, topic, learnings, exemplars, outdir)
    draft = stage_draft(config, gateway, topic, learnings, outline, style, exemplars, outdir)
    final = stage_forge_and_assemble(config, gateway, harness, learnings, style, draft, outdir)
    return ReportRun(outdir=outdir, learnings=learnings, final=final)
