"""Iterative research loop: query planning, search, dedup, and synthesis.

Each round asks the text model for search queries and a research goal,
fetches pages for every query through a pluggable search backend, and
synthesizes per-keyword learnings with markdown-hyperlink citations. The
keyword budget halves (rounded up) every round, narrowing breadth as depth
grows; the next round researches a topic composed from the returned goal
plus the follow-up questions.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Protocol
from urllib.parse import urlsplit, urlunsplit

from .gateway import ChatMessage, Gateway, ModelFormatError, ModelProfile
from . import prompts

logger = logging.getLogger(__name__)

PAGE_CONTENT_LIMIT = 25_000  # characters of page markdown sent to the model


class ResearchError(Exception):
    pass


class SearchProviderError(ResearchError):
    pass


@dataclass(frozen=True)
class ResearchConfig:
    rounds: int = 2
    initial_breadth: int = 3
    pages_per_keyword: int = 3
    learnings_per_keyword: int = 3
    max_questions: int | None = None  # None tracks the round's breadth

    def validate(self) -> None:
        for name in ("rounds", "initial_breadth", "pages_per_keyword", "learnings_per_keyword"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.max_questions is not None and self.max_questions < 1:
            raise ValueError("max_questions must be a positive integer when set")


@dataclass(frozen=True)
class WebPage:
    url: str
    title: str
    content: str
    retrieved_at: datetime

    def __post_init__(self):
        if not self.content.strip():
            raise ValueError("page content must be non-empty after scrape filtering")


@dataclass(frozen=True)
class Learning:
    text: str
    citations: tuple[str, ...]

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("learning text must be non-empty")
        for url in self.citations:
            if not is_absolute_url(url):
                raise ValueError(f"citation is not an absolute URL: {url!r}")


@dataclass
class LearningSet:
    """Accumulated findings plus the reference list and per-round goal trail."""

    topic: str
    goal_trail: list[str] = field(default_factory=list)
    learnings: list[Learning] = field(default_factory=list)
    references: list[tuple[str, str]] = field(default_factory=list)
    round_breadths: list[int] = field(default_factory=list)

    def reference_urls(self) -> set[str]:
        return {canonical_url(url) for url, _ in self.references}

    def add_reference(self, url: str, title: str) -> None:
        if canonical_url(url) not in self.reference_urls():
            self.references.append((url, title))

    def to_dict(self) -> dict:
        return {
            "topic": self.topic,
            "goal_trail": list(self.goal_trail),
            "round_breadths": list(self.round_breadths),
            "learnings": [
                {"text": l.text, "citations": list(l.citations)} for l in self.learnings
            ],
            "references": [[url, title] for url, title in self.references],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LearningSet":
        out = cls(topic=data["topic"])
        out.goal_trail = list(data.get("goal_trail", []))
        out.round_breadths = list(data.get("round_breadths", []))
        out.learnings = [
            Learning(item["text"], tuple(item["citations"]))
            for item in data.get("learnings", [])
        ]
        out.references = [(url, title) for url, title in data.get("references", [])]
        return out


def is_absolute_url(url: str) -> bool:
    parts = urlsplit(url)
    return parts.scheme in ("http", "https") and bool(parts.netloc)


def canonical_url(url: str) -> str:
    """Lowercase scheme and host, strip fragment, strip one trailing slash."""
    parts = urlsplit(url)
    path = parts.path
    if path.endswith("/"):
        path = path[:-1]
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), path, parts.query, ""))


class SearchBackend(Protocol):
    def search(self, keyword: str, limit: int) -> list[WebPage]: ...


def keyword_slug(keyword: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", keyword.lower()).strip("-")


class FixtureCorpus:
    """Directory-of-fixtures search backend.

    Layout: ``<root>/<keyword-slug>/<rank>.page`` where each file starts with
    ``url:`` and ``title:`` header lines, a blank line, then the markdown body.
    """

    RETRIEVED_AT = datetime(2025, 1, 1, tzinfo=timezone.utc)

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def search(self, keyword: str, limit: int) -> list[WebPage]:
        folder = self.root / keyword_slug(keyword)
        if not folder.is_dir():
            return []
        pages = []
        files = sorted(folder.glob("*.page"), key=lambda p: int(p.stem))
        for path in files[:limit]:
            pages.append(self._parse_page(path))
        return pages

    def _parse_page(self, path: Path) -> WebPage:
        raw = path.read_text(encoding="utf-8")
        header, _, body = raw.partition("\n\n")
        fields = {}
        for line in header.splitlines():
            key, _, value = line.partition(":")
            fields[key.strip().lower()] = value.strip()
        try:
            return WebPage(fields["url"], fields.get("title", ""), body, self.RETRIEVED_AT)
        except (KeyError, ValueError) as exc:
            raise SearchProviderError(f"bad corpus page {path}: {exc}") from exc

    def write_page(self, keyword: str, rank: int, url: str, title: str, body: str) -> Path:
        folder = self.root / keyword_slug(keyword)
        folder.mkdir(parents=True, exist_ok=True)
        path = folder / f"{rank}.page"
        path.write_text(f"url: {url}\ntitle: {title}\n\n{body}", encoding="utf-8")
        return path


class FirecrawlSearch:
    """Live search-and-scrape provider (markdown page contents)."""

    def __init__(self, api_key: str, base_url: str = "https://api.firecrawl.dev"):
        self.api_key = api_key
        self.base_url = base_url.rstrip("/")

    def search(self, keyword: str, limit: int) -> list[WebPage]:
        import httpx

        try:
            response = httpx.post(
                f"{self.base_url}/v1/search",
                json={
                    "query": keyword,
                    "limit": limit,
                    "scrapeOptions": {"formats": ["markdown"]},
                },
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=60.0,
            )
        except httpx.HTTPError as exc:
            raise SearchProviderError(f"search transport failure: {exc}") from exc
        if response.status_code != 200:
            raise SearchProviderError(
                f"search provider returned {response.status_code}: {response.text[:300]}"
            )
        now = datetime.now(timezone.utc)
        pages = []
        for hit in response.json().get("data", []):
            content = (hit.get("markdown") or "").strip()
            url = hit.get("url") or ""
            if not content or not is_absolute_url(url):
                continue
            pages.append(WebPage(url, hit.get("title") or url, content, now))
        return pages[:limit]


_BULLET_RE = re.compile(r"^\s*(?:[-*+]|\d+[.)])\s+(.*\S)\s*$")
_GOAL_RE = re.compile(r"^\s*goal\s*:\s*(.*\S)\s*$", re.IGNORECASE)
_MARKDOWN_LINK_RE = re.compile(r"\[([^\]]*)\]\((https?://[^)\s]+)\)")


def _parse_list_lines(text: str) -> list[str]:
    items = []
    for line in text.splitlines():
        match = _BULLET_RE.match(line)
        if match:
            items.append(match.group(1))
    return items


def next_breadth(current: int) -> int:
    """Halve the keyword budget, rounding up; never below one."""
    if current < 1:
        raise ValueError("breadth must be >= 1")
    return math.ceil(current / 2)


def format_learnings(learnings: list[Learning]) -> str:
    if not learnings:
        return "(none yet)"
    return "\n".join(f"{i}. {l.text}" for i, l in enumerate(learnings, start=1))


def plan_queries(
    gateway: Gateway,
    profile: ModelProfile,
    topic: str,
    prior_learnings: list[Learning],
    breadth: int,
) -> tuple[list[str], str]:
    """Ask for up to ``breadth`` distinct search queries plus the next goal."""
    if breadth < 1:
        raise ValueError("breadth must be >= 1")
    user = prompts.fill(
        prompts.SERP_QUERIES_USER,
        queries_num=str(breadth),
        query=topic,
        learning_str=format_learnings(prior_learnings),
    )
    messages = [
        ChatMessage.text("system", prompts.RESEARCHER_SYSTEM),
        ChatMessage.text("user", user),
    ]
    response = gateway.complete(messages, profile)
    queries, goal = _parse_queries(response)
    if not queries:
        retry = messages + [
            ChatMessage.text("assistant", response),
            ChatMessage.text(
                "user",
                "Your previous reply contained no parseable queries. Respond again with a "
                "numbered list of queries (one per line) followed by a final line starting "
                'with "Goal:".',
            ),
        ]
        response = gateway.complete(retry, profile)
        queries, goal = _parse_queries(response)
        if not queries:
            raise ModelFormatError("no parseable search queries after one reprompt")
    deduped: list[str] = []
    seen = set()
    for query in queries:
        folded = query.casefold()
        if folded not in seen:
            seen.add(folded)
            deduped.append(query)
    return deduped[:breadth], goal or topic


def _parse_queries(response: str) -> tuple[list[str], str]:
    goal = ""
    lines = []
    for line in response.splitlines():
        goal_match = _GOAL_RE.match(line)
        if goal_match:
            goal = goal_match.group(1)
        else:
            lines.append(line)
    return _parse_list_lines("\n".join(lines)), goal


def search_and_scrape(backend: SearchBackend, keyword: str, limit: int) -> list[WebPage]:
    """Fetch up to ``limit`` pages; an empty result is not an error."""
    try:
        pages = backend.search(keyword, limit)
    except SearchProviderError:
        raise
    except Exception as exc:
        raise SearchProviderError(f"search backend failed for {keyword!r}: {exc}") from exc
    return pages[:limit]


def dedup_pages(pages: list[WebPage]) -> list[WebPage]:
    """Keep the first occurrence of each canonical URL, preserving order."""
    seen: set[str] = set()
    kept = []
    for page in pages:
        key = canonical_url(page.url)
        if key not in seen:
            seen.add(key)
            kept.append(page)
    return kept


def _render_contents(pages: list[WebPage]) -> str:
    sections = []
    for page in pages:
        body = page.content[:PAGE_CONTENT_LIMIT]
        sections.append(f"### Source: [{page.title}]({page.url})\n\n{body}")
    return "\n\n".join(sections)


def synthesize(
    gateway: Gateway,
    profile: ModelProfile,
    pages: list[WebPage],
    keyword: str,
    max_learnings: int,
    max_questions: int,
) -> tuple[list[Learning], list[str]]:
    """Turn one keyword's pages into cited learnings and follow-up questions."""
    if not pages:
        return [], []
    user = prompts.fill(
        prompts.LEARNINGS_USER,
        query=keyword,
        learning_num=str(max_learnings),
        question_num=str(max_questions),
        contents=_render_contents(pages),
    )
    messages = [
        ChatMessage.text("system", prompts.RESEARCHER_SYSTEM),
        ChatMessage.text("user", user),
    ]
    response = gateway.complete(messages, profile)
    learnings, questions = _parse_synthesis(response)
    if not learnings:
        retry = messages + [
            ChatMessage.text("assistant", response),
            ChatMessage.text(
                "user",
                'Your previous reply was not parseable. Respond again with a "Learnings:" '
                'line followed by a numbered list, then a "Follow-up questions:" line '
                "followed by a numbered list.",
            ),
        ]
        response = gateway.complete(retry, profile)
        learnings, questions = _parse_synthesis(response)
        if not learnings:
            raise ModelFormatError(f"no parseable learnings for keyword {keyword!r}")
    return learnings[:max_learnings], questions[:max_questions]


def _parse_synthesis(response: str) -> tuple[list[Learning], list[str]]:
    lower = response.lower()
    split_at = lower.find("follow-up questions")
    learnings_text = response if split_at == -1 else response[:split_at]
    questions_text = "" if split_at == -1 else response[split_at:]
    learnings = []
    for item in _parse_list_lines(learnings_text):
        citations = tuple(dict.fromkeys(url for _, url in _MARKDOWN_LINK_RE.findall(item)))
        learnings.append(Learning(item, citations))
    questions = _parse_list_lines(questions_text)
    return learnings, questions


def compose_next_topic(goal: str, questions: list[str]) -> str:
    lines = [goal, "", "Follow-up research directions:"]
    lines.extend(f"- {q}" for q in questions)
    return "\n".join(lines)


def run_research(
    gateway: Gateway,
    profile: ModelProfile,
    backend: SearchBackend,
    topic: str,
    config: ResearchConfig,
) -> LearningSet:
    """Run the full multi-round loop and return the accumulated learning set."""
    config.validate()
    state = LearningSet(topic=topic)
    seen_urls: set[str] = set()
    breadth = config.initial_breadth
    current_topic = topic

    for round_index in range(config.rounds):
        state.round_breadths.append(breadth)
        question_budget = config.max_questions or breadth
        try:
            keywords, goal = plan_queries(gateway, profile, current_topic, state.learnings, breadth)
        except ModelFormatError as exc:
            raise ModelFormatError(f"round {round_index}: {exc}") from exc
        state.goal_trail.append(goal)
        round_questions: list[str] = []

        for keyword in keywords:
            try:
                pages = search_and_scrape(backend, keyword, config.pages_per_keyword)
            except SearchProviderError as exc:
                raise SearchProviderError(
                    f"round {round_index}, keyword {keyword!r}: {exc}"
                ) from exc
            pages = [p for p in dedup_pages(pages) if canonical_url(p.url) not in seen_urls]
            for page in pages:
                seen_urls.add(canonical_url(page.url))
                state.add_reference(page.url, page.title)
            try:
                learnings, questions = synthesize(
                    gateway,
                    profile,
                    pages,
                    keyword,
                    config.learnings_per_keyword,
                    question_budget,
                )
            except ModelFormatError as exc:
                raise ModelFormatError(
                    f"round {round_index}, keyword {keyword!r}: {exc}"
                ) from exc
            for learning in learnings:
                state.learnings.append(learning)
                # reference integrity: every citation resolves to the reference list
                for url in learning.citations:
                    if canonical_url(url) not in state.reference_urls():
                        host = urlsplit(url).netloc
                        state.add_reference(url, host)
            round_questions.extend(questions)

        current_topic = compose_next_topic(goal, round_questions)
        breadth = next_breadth(breadth)

    return state
