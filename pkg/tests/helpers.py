"""Shared test doubles: rule-based transports and in-memory search backends."""

from __future__ import annotations

from datetime import datetime, timezone

from chartweaver.gateway import TextPart
from chartweaver.research import WebPage

NOW = datetime(2025, 1, 1, tzinfo=timezone.utc)


def page(url: str, title: str = "", content: str = "some markdown body") -> WebPage:
    return WebPage(url, title or url, content, NOW)


def flatten_text(messages) -> str:
    return "\n".join(
        part.text for message in messages for part in message.parts if isinstance(part, TextPart)
    )


class RuleTransport:
    """Answer model calls by matching substrings of the flattened request text.

    Rules are checked in insertion order; the first match wins. A response
    may be a string or a callable taking the flattened request text.
    """

    def __init__(self):
        self.rules: list[tuple] = []
        self.calls: list[tuple[str, str]] = []
        self.raw_calls: list[tuple] = []

    def add(self, substring: str, response, role: str | None = None) -> "RuleTransport":
        self.rules.append(((substring, role), response))
        return self

    def __call__(self, profile, messages):
        text = flatten_text(messages)
        self.calls.append((profile.role, text))
        self.raw_calls.append((profile, list(messages)))
        for (substring, role), response in self.rules:
            if role is not None and profile.role != role:
                continue
            if substring in text:
                body = response(text) if callable(response) else response
                return body, {}
        raise AssertionError(f"no transport rule matched request: {text[:300]!r}")

    def calls_for(self, substring: str) -> int:
        return sum(1 for _, text in self.calls if substring in text)


class MemoryBackend:
    """Search backend backed by a keyword -> pages dict."""

    def __init__(self, hits: dict[str, list[WebPage]]):
        self.hits = hits
        self.queries: list[str] = []

    def search(self, keyword: str, limit: int) -> list[WebPage]:
        self.queries.append(keyword)
        return list(self.hits.get(keyword, []))[:limit]


def queries_response(queries: list[str], goal: str) -> str:
    lines = [f"{i}. {q}" for i, q in enumerate(queries, start=1)]
    lines.append(f"Goal: {goal}")
    return "\n".join(lines)


def synthesis_response(learnings: list[str], questions: list[str]) -> str:
    lines = ["Learnings:"]
    lines += [f"{i}. {text}" for i, text in enumerate(learnings, start=1)]
    lines.append("")
    lines.append("Follow-up questions:")
    lines += [f"{i}. {q}" for i, q in enumerate(questions, start=1)]
    return "\n".join(lines)
