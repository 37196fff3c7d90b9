"""Tiny deterministic markdown-to-HTML renderer for the report bundle.

Covers the subset the pipeline emits: headings, paragraphs, ordered and
unordered lists, links, images, emphasis, inline code, and code fences.
Output is byte-stable for identical input.
"""

from __future__ import annotations

import html
import re
from typing import Callable

_IMAGE_RE = re.compile(r"!\[([^\]]*)\]\(([^)\s]+)(?:\s+\"[^\"]*\")?\)")
_LINK_RE = re.compile(r"\[([^\]]+)\]\((https?://[^)\s]+|[^)\s]+)\)")
_BOLD_RE = re.compile(r"\*\*([^*]+)\*\*")
_ITALIC_RE = re.compile(r"(?<!\*)\*([^*\n]+)\*(?!\*)")
_CODE_RE = re.compile(r"`([^`]+)`")
_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*)$")
_BULLET_RE = re.compile(r"^\s*[-*+]\s+(.*)$")
_ORDERED_RE = re.compile(r"^\s*\d+[.)]\s+(.*)$")


def _inline(text: str, image_src: Callable[[str], str]) -> str:
    escaped = html.escape(text, quote=False)

    def image(match: re.Match) -> str:
        alt = match.group(1)
        src = image_src(match.group(2))
        return f'<img src="{src}" alt="{alt}">'

    escaped = _IMAGE_RE.sub(image, escaped)
    escaped = _LINK_RE.sub(lambda m: f'<a href="{m.group(2)}">{m.group(1)}</a>', escaped)
    escaped = _CODE_RE.sub(lambda m: f"<code>{m.group(1)}</code>", escaped)
    escaped = _BOLD_RE.sub(lambda m: f"<strong>{m.group(1)}</strong>", escaped)
    escaped = _ITALIC_RE.sub(lambda m: f"<em>{m.group(1)}</em>", escaped)
    return escaped


def render_body(markdown: str, image_src: Callable[[str], str] = lambda s: s) -> str:
    """Render markdown to an HTML fragment; image sources pass through
    ``image_src`` so callers can embed them as data URIs."""
    out: list[str] = []
    paragraph: list[str] = []
    list_items: list[str] = []
    list_tag = ""
    fence: list[str] | None = None

    def flush_paragraph():
        nonlocal paragraph
        if paragraph:
            out.append(f"<p>{_inline(' '.join(paragraph), image_src)}</p>")
            paragraph = []

    def flush_list():
        nonlocal list_items, list_tag
        if list_items:
            items = "".join(f"<li>{_inline(item, image_src)}</li>" for item in list_items)
            out.append(f"<{list_tag}>{items}</{list_tag}>")
            list_items = []
            list_tag = ""

    def flush_fence(lines: list[str]):
        joined = html.escape("\n".join(lines))
        out.append(f"<pre><code>{joined}</code></pre>")

    for line in markdown.splitlines():
        if fence is not None:
            if line.startswith("```"):
                flush_fence(fence)
                fence = None
            else:
                fence.append(line)
            continue
        if line.startswith("```"):
            flush_paragraph()
            flush_list()
            fence = []
            continue
        heading = _HEADING_RE.match(line)
        if heading:
            flush_paragraph()
            flush_list()
            level = len(heading.group(1))
            out.append(f"<h{level}>{_inline(heading.group(2), image_src)}</h{level}>")
            continue
        bullet = _BULLET_RE.match(line)
        ordered = _ORDERED_RE.match(line)
        if bullet or ordered:
            flush_paragraph()
            tag = "ul" if bullet else "ol"
            if list_tag and list_tag != tag:
                flush_list()
            list_tag = tag
            list_items.append((bullet or ordered).group(1))
            continue
        if not line.strip():
            flush_paragraph()
            flush_list()
            continue
        flush_list()
        paragraph.append(line.strip())
    flush_paragraph()
    flush_list()
    if fence is not None:
        flush_fence(fence)
    return "\n".join(out)


_PAGE_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{title}</title>
<style>
body {{ max-width: 860px; margin: 2rem auto; padding: 0 1rem; font-family: Georgia, serif; line-height: 1.55; color: #1c2733; }}
img {{ max-width: 100%; display: block; margin: 1.2rem auto; }}
h1, h2, h3 {{ font-family: Helvetica, Arial, sans-serif; color: #10212f; }}
em {{ color: #5a6775; }}
pre {{ background: #f4f5f7; padding: 0.8rem; overflow-x: auto; }}
</style>
</head>
<body>
{body}
</body>
</html>
"""


def render_page(title: str, body: str) -> str:
    return _PAGE_TEMPLATE.format(title=title, body=body)
