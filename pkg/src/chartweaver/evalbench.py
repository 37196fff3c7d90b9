"""Pairwise report judging, win/lose/tie aggregation, and chart statistics.

A seeded fair coin decides which report is presented first, the judge
response is parsed out of its XML-ish envelope, scores are de-permuted back
to (ours, other), and comparisons use exact rational arithmetic so that ties
are exact. Aggregation renders whole-percent rows whose remainder after
rounding win and lose is assigned to tie.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from .gateway import ChatMessage, Gateway, ImagePart, ModelProfile, TextPart, image_part
from . import prompts

METRICS = (
    "informativeness",
    "coherence",
    "verifiability",
    "visualization_quality",
    "visualization_consistency",
)
OVERALL = "overall"

CATEGORIES = (
    "Technology & Media",
    "Agriculture & Food",
    "Travel",
    "Population",
    "Healthcare",
    "Public Sector",
    "Energy",
    "Climate & Environment",
    "Education",
    "Economy & Work",
)

CHART_TAXONOMY = (
    "bar",
    "line",
    "pie",
    "scatter",
    "bubble",
    "sankey",
    "choropleth",
    "flowchart",
    "dashboard",
    "infographic",
    "others",
)

OUTCOMES = ("win", "lose", "tie")


class EvalError(Exception):
    pass


class VerdictFormatError(EvalError):
    pass


class QuantizationError(EvalError):
    def __init__(self, raw: str):
        super().__init__(f"score {raw!r} is not on the 1-5 half-point grid")
        self.raw = raw


class ManifestError(EvalError):
    pass


@dataclass(frozen=True)
class TopicEntry:
    category: str
    topic: str


@dataclass
class TopicManifest:
    entries: list[TopicEntry]

    def validate(self) -> None:
        if not self.entries:
            raise ManifestError("manifest has no topics")
        seen = set()
        for entry in self.entries:
            if entry.category not in CATEGORIES:
                raise ManifestError(f"unknown category {entry.category!r}")
            if not entry.topic.strip():
                raise ManifestError("empty topic")
            folded = entry.topic.casefold()
            if folded in seen:
                raise ManifestError(f"duplicate topic {entry.topic!r}")
            seen.add(folded)

    @classmethod
    def load(cls, path: Path | str) -> "TopicManifest":
        entries = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            category, _, topic = line.partition("\t")
            if not topic:
                raise ManifestError(f"bad manifest line (want category<TAB>topic): {line!r}")
            entries.append(TopicEntry(category.strip(), topic.strip()))
        manifest = cls(entries)
        manifest.validate()
        return manifest

    def save(self, path: Path | str) -> None:
        lines = [f"{entry.category}\t{entry.topic}" for entry in self.entries]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class MetricScore:
    score: Fraction
    justification: str


@dataclass
class JudgeVerdict:
    """Per-metric scores keyed by side, already de-permuted to ours/other."""

    ours: dict[str, MetricScore]
    other: dict[str, MetricScore]

    def validate(self) -> None:
        for side in (self.ours, self.other):
            missing = [metric for metric in METRICS if metric not in side]
            if missing:
                raise VerdictFormatError(f"verdict missing metrics: {missing}")


@dataclass(frozen=True)
class ComparisonResult:
    per_metric: dict[str, str]
    overall: str
    order: str  # ours_first | ours_second
    seed: int


def parse_score(raw: str) -> Fraction:
    text = raw.strip()
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise QuantizationError(raw) from None
    if not (1 <= value <= 5) or (2 * value).denominator != 1:
        raise QuantizationError(raw)
    return value


_METRIC_RE_TEMPLATE = (
    r"<{name}>\s*<score>(.*?)</score>\s*<justification>(.*?)</justification>"
)


def _parse_side(section: str) -> dict[str, MetricScore]:
    scores: dict[str, MetricScore] = {}
    for metric in METRICS:
        match = re.search(
            _METRIC_RE_TEMPLATE.format(name=metric), section, re.DOTALL | re.IGNORECASE
        )
        if match is None:
            raise VerdictFormatError(f"metric {metric!r} missing from verdict")
        scores[metric] = MetricScore(parse_score(match.group(1)), match.group(2).strip())
    return scores


def parse_verdict_sides(response: str) -> tuple[dict[str, MetricScore], dict[str, MetricScore]]:
    """Split the response into report A and report B sections and parse both.

    Tolerates the unclosed wrapper tags that models copy from the response
    template: section A runs until the first ``<report_b>`` marker.
    """
    lower = response.lower()
    start_a = lower.find("<report_a>")
    start_b = lower.find("<report_b>")
    if start_a == -1 or start_b == -1 or start_b <= start_a:
        raise VerdictFormatError("response lacks <report_a>/<report_b> sections")
    return (
        _parse_side(response[start_a:start_b]),
        _parse_side(response[start_b:]),
    )


def ours_first_for_seed(seed: int) -> bool:
    return random.Random(seed).random() < 0.5


def report_parts(bundle_dir: Path | str) -> list[TextPart | ImagePart]:
    """Alternate the bundle's text and chart images as message parts."""
    bundle_dir = Path(bundle_dir)
    markdown = (bundle_dir / "report.md").read_text(encoding="utf-8")
    parts: list[TextPart | ImagePart] = []
    position = 0
    pattern = re.compile(r"!\[[^\]]*\]\(([^)\s]+)\)")
    for match in pattern.finditer(markdown):
        if match.start() > position:
            parts.append(TextPart(markdown[position : match.start()]))
        image_path = bundle_dir / match.group(1)
        if image_path.is_file():
            parts.append(image_part(image_path.read_bytes(), "image/png"))
        else:
            parts.append(TextPart(match.group(0)))
        position = match.end()
    if position < len(markdown):
        parts.append(TextPart(markdown[position:]))
    if not parts:
        parts.append(TextPart("(empty report)"))
    return parts


def _judge_messages(
    topic: str,
    learnings_str: str,
    first: list[TextPart | ImagePart],
    second: list[TextPart | ImagePart],
) -> list[ChatMessage]:
    header = prompts.fill(prompts.JUDGE_USER_HEADER, topic=topic, learnings_str=learnings_str)
    parts: list[TextPart | ImagePart] = [TextPart(header)]
    parts.append(TextPart("\n<reportA>\n"))
    parts.extend(first)
    parts.append(TextPart("\n</reportA>\n<reportB>\n"))
    parts.extend(second)
    parts.append(TextPart("\n</reportB>"))
    return [
        ChatMessage.text("system", prompts.JUDGE_SYSTEM),
        ChatMessage("user", tuple(parts)),
    ]


def judge_pair(
    gateway: Gateway,
    profile: ModelProfile,
    topic: str,
    learnings_str: str,
    ours_dir: Path | str,
    other_dir: Path | str,
    seed: int,
) -> tuple[JudgeVerdict, str]:
    """Judge one report pair with seeded presentation order.

    Scores come back keyed (ours, other) regardless of which report was
    shown first. A malformed verdict earns exactly one corrective reprompt.
    """
    ours_parts = report_parts(ours_dir)
    other_parts = report_parts(other_dir)
    if not any(isinstance(p, ImagePart) for p in ours_parts):
        raise EvalError(f"report bundle {ours_dir} has no chart images")
    if not any(isinstance(p, ImagePart) for p in other_parts):
        raise EvalError(f"report bundle {other_dir} has no chart images")

    ours_first = ours_first_for_seed(seed)
    order = "ours_first" if ours_first else "ours_second"
    first, second = (ours_parts, other_parts) if ours_first else (other_parts, ours_parts)
    messages = _judge_messages(topic, learnings_str, first, second)
    response = gateway.complete(messages, profile)
    try:
        side_a, side_b = parse_verdict_sides(response)
    except VerdictFormatError as exc:
        retry = messages + [
            ChatMessage.text("assistant", response),
            ChatMessage.text(
                "user",
                f"Your previous response was not parseable: {exc}. Respond again using "
                "exactly the XML response format from the instructions, with all five "
                "metrics for <report_a> and <report_b>.",
            ),
        ]
        response = gateway.complete(retry, profile)
        side_a, side_b = parse_verdict_sides(response)

    verdict = (
        JudgeVerdict(ours=side_a, other=side_b)
        if ours_first
        else JudgeVerdict(ours=side_b, other=side_a)
    )
    verdict.validate()
    return verdict, order


def compare(verdict: JudgeVerdict, order: str = "ours_first", seed: int = 0) -> ComparisonResult:
    """Per-metric and overall win/lose/tie from the ours perspective.

    Overall compares the unweighted means of the five metric scores; all
    arithmetic is exact, so ties are exact equality.
    """
    verdict.validate()
    per_metric: dict[str, str] = {}
    for metric in METRICS:
        per_metric[metric] = _outcome(verdict.ours[metric].score, verdict.other[metric].score)
    ours_mean = sum(verdict.ours[m].score for m in METRICS) / len(METRICS)
    other_mean = sum(verdict.other[m].score for m in METRICS) / len(METRICS)
    return ComparisonResult(per_metric, _outcome(ours_mean, other_mean), order, seed)


def _outcome(ours: Fraction, other: Fraction) -> str:
    if ours > other:
        return "win"
    if ours < other:
        return "lose"
    return "tie"


def _display_percent(count: int, total: int) -> int:
    """Round half up at whole-percent granularity, exactly."""
    return math.floor(Fraction(count * 100, total) + Fraction(1, 2))


@dataclass
class SummaryRow:
    metric: str
    win: int
    lose: int
    tie: int
    win_pct: int
    lose_pct: int
    tie_pct: int


@dataclass
class Summary:
    rows: list[SummaryRow] = field(default_factory=list)

    def row(self, metric: str) -> SummaryRow:
        for row in self.rows:
            if row.metric == metric:
                return row
        raise KeyError(metric)

    def render_tsv(self) -> str:
        lines = ["metric\twin\tlose\ttie"]
        for row in self.rows:
            lines.append(f"{row.metric}\t{row.win_pct}%\t{row.lose_pct}%\t{row.tie_pct}%")
        return "\n".join(lines) + "\n"

    def render_table(self) -> str:
        width = max(len(row.metric) for row in self.rows)
        lines = [f"{'Metric'.ljust(width)}  Win   Lose  Tie"]
        for row in self.rows:
            lines.append(
                f"{row.metric.ljust(width)}  "
                f"{str(row.win_pct) + '%':<5} {str(row.lose_pct) + '%':<5} {str(row.tie_pct) + '%'}"
            )
        return "\n".join(lines)


def aggregate(results: Sequence[ComparisonResult]) -> Summary:
    """Counts and whole-percent rates per metric plus the overall row."""
    if not results:
        raise EvalError("no comparison results to aggregate")
    summary = Summary()
    total = len(results)
    for metric in (*METRICS, OVERALL):
        counts = {outcome: 0 for outcome in OUTCOMES}
        for result in results:
            outcome = result.overall if metric == OVERALL else result.per_metric[metric]
            counts[outcome] += 1
        win_pct = _display_percent(counts["win"], total)
        lose_pct = _display_percent(counts["lose"], total)
        summary.rows.append(
            SummaryRow(
                metric=metric,
                win=counts["win"],
                lose=counts["lose"],
                tie=counts["tie"],
                win_pct=win_pct,
                lose_pct=lose_pct,
                tie_pct=100 - win_pct - lose_pct,
            )
        )
    return summary


def results_tsv(topics: Sequence[str], results: Sequence[ComparisonResult]) -> str:
    header = ["topic", *METRICS, OVERALL, "seed", "order"]
    lines = ["\t".join(header)]
    for topic, result in zip(topics, results):
        row = [topic]
        row.extend(result.per_metric[m] for m in METRICS)
        row.extend([result.overall, str(result.seed), result.order])
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


# -- chart statistics --------------------------------------------------------

Classifier = Callable[[bytes, str], str]


@dataclass
class ChartStats:
    reports: int
    total_charts: int
    histogram: dict[str, int]

    @property
    def average(self) -> float:
        return self.total_charts / self.reports if self.reports else 0.0


def chart_stats(bundle_dirs: Sequence[Path | str], classifier: Classifier) -> ChartStats:
    """Average successful charts per report and a type histogram."""
    histogram = {label: 0 for label in CHART_TAXONOMY}
    total = 0
    reports = 0
    for bundle in bundle_dirs:
        bundle = Path(bundle)
        manifest_path = bundle if bundle.name.endswith(".meta") else bundle / "manifest.meta"
        data = json.loads(manifest_path.read_text(encoding="utf-8"))
        reports += 1
        for chart in data.get("charts", []):
            if chart.get("failed"):
                continue
            total += 1
            image_path = manifest_path.parent / "charts" / f"chart_{chart['ordinal']}.png"
            image = image_path.read_bytes() if image_path.is_file() else b""
            label = classifier(image, chart.get("caption", ""))
            if label not in CHART_TAXONOMY:
                raise EvalError(f"classifier returned unknown label {label!r}")
            histogram[label] += 1
    return ChartStats(reports=reports, total_charts=total, histogram=histogram)


_CAPTION_KEYWORDS = (
    ("sankey", "sankey"),
    ("choropleth", "choropleth"),
    ("map", "choropleth"),
    ("flowchart", "flowchart"),
    ("flow chart", "flowchart"),
    ("dashboard", "dashboard"),
    ("infographic", "infographic"),
    ("bubble", "bubble"),
    ("scatter", "scatter"),
    ("pie", "pie"),
    ("donut", "pie"),
    ("line", "line"),
    ("trend", "line"),
    ("bar", "bar"),
    ("column", "bar"),
)


def caption_classifier(image: bytes, caption: str) -> str:
    """Offline keyword fallback (the vision classifier is the real thing)."""
    lowered = caption.lower()
    for keyword, label in _CAPTION_KEYWORDS:
        if keyword in lowered:
            return label
    return "others"


class VisionClassifier:
    """Ask the vision model for one taxonomy label per chart image."""

    def __init__(self, gateway: Gateway, profile: ModelProfile):
        self.gateway = gateway
        self.profile = profile

    def __call__(self, image: bytes, caption: str) -> str:
        if not image:
            return "others"
        messages = [
            ChatMessage.with_images(
                "user", image_part(image, "image/png"), TextPart(prompts.CHART_CLASSIFY_USER)
            )
        ]
        response = self.gateway.complete(messages, self.profile).strip().lower()
        for label in CHART_TAXONOMY:
            if re.search(rf"\b{label}\b", response):
                return label
        return "others"
