"""Compile chart descriptions to browser code and refine via actor-critic.

The text model writes a self-contained HTML+D3 document for a chart
description; the harness renders it; the vision model critiques the
screenshot (plus console output) and is satisfied only when its response
ends with the exact sentinel sentence. Unsatisfied feedback drives a
regeneration, up to a bounded number of critique rounds. When more than one
version exists, the vision model picks the final chart from the last two.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .fdv import FdvSpec, serialize_fdv
from .gateway import (
    ChatMessage,
    ExtractionError,
    Gateway,
    ImagePart,
    ModelProfile,
    TextPart,
    extract_fenced_block,
    image_part,
)
from .render import ConsoleEntry, RenderError, RenderResult
from . import prompts

logger = logging.getLogger(__name__)

Renderer = Callable[[str], RenderResult]


class ForgeError(Exception):
    pass


class SelectionFormatError(ForgeError):
    pass


@dataclass(frozen=True)
class RefineConfig:
    max_rounds: int = 3  # critique iterations before forcing selection

    def validate(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass(frozen=True)
class Critique:
    satisfied: bool
    feedback: str


@dataclass
class ChartVersion:
    code: str
    console: list[ConsoleEntry] | None = None
    screenshot: bytes | None = None
    critique: Critique | None = None
    render_error: str | None = None

    @property
    def rendered(self) -> bool:
        return self.screenshot is not None


@dataclass
class ChartArtifact:
    ordinal: int
    fdv: FdvSpec
    versions: list[ChartVersion] = field(default_factory=list)
    final_index: int | None = None
    failed: bool = False
    selection_used: bool = False
    selection_fallback: bool = False
    failure_reason: str | None = None

    @property
    def final_version(self) -> ChartVersion | None:
        if self.final_index is None:
            return None
        return self.versions[self.final_index]

    @property
    def iterations(self) -> int:
        return sum(1 for v in self.versions if v.critique is not None)


def format_console(console: Sequence[ConsoleEntry] | None) -> str:
    if not console:
        return "(no console messages)"
    lines = []
    for entry in console:
        suffix = f" ({entry.source})" if entry.source else ""
        lines.append(f"[{entry.severity}] {entry.text}{suffix}")
    return "\n".join(lines)


def _complete_with_code(
    gateway: Gateway, profile: ModelProfile, messages: list[ChatMessage]
) -> str:
    response = gateway.complete(messages, profile)
    try:
        return extract_fenced_block(response, "html")
    except ExtractionError:
        retry = messages + [
            ChatMessage.text("assistant", response),
            ChatMessage.text(
                "user",
                "Your previous reply did not contain an ```html code block. Respond again "
                "with the complete, self-contained HTML file inside a single ```html block.",
            ),
        ]
        response = gateway.complete(retry, profile)
        return extract_fenced_block(response, "html")


def generate_code(
    gateway: Gateway, profile: ModelProfile, fdv: FdvSpec, style_guide: str
) -> str:
    """First code version for a chart description."""
    user = prompts.fill(
        prompts.CHART_CODE_USER,
        chart_design=serialize_fdv(fdv, delimited=True),
        visualization_style_guide=style_guide,
    )
    messages = [
        ChatMessage.text("system", prompts.CHART_CODE_SYSTEM),
        ChatMessage.text("user", user),
    ]
    return _complete_with_code(gateway, profile, messages)


def critique_render(
    gateway: Gateway,
    profile: ModelProfile,
    screenshot: bytes,
    console: Sequence[ConsoleEntry] | None,
) -> Critique:
    """Vision-model verdict; satisfied only on the exact closing sentinel."""
    user = prompts.fill(prompts.CHART_EVAL_USER, console_message=format_console(console))
    messages = [
        ChatMessage.text("system", prompts.CHART_CODE_SYSTEM),
        ChatMessage.with_images(
            "user", image_part(screenshot, "image/png"), TextPart(user)
        ),
    ]
    response = gateway.complete(messages, profile)
    satisfied = response.rstrip().endswith(prompts.SATISFIED_SENTINEL)
    return Critique(satisfied, response)


def refine(
    gateway: Gateway,
    profile: ModelProfile,
    previous_code: str,
    console: Sequence[ConsoleEntry] | None,
    feedback: str,
) -> str:
    """Regenerate the document from the previous code, console, and critique."""
    user = prompts.fill(
        prompts.CHART_REGEN_USER,
        previous_code=previous_code,
        console_message=format_console(console),
        feedback=feedback or "(no visual feedback; fix the console errors)",
    )
    messages = [
        ChatMessage.text("system", prompts.CHART_CODE_SYSTEM),
        ChatMessage.text("user", user),
    ]
    return _complete_with_code(gateway, profile, messages)


_SELECTION_RE = re.compile(r"<selection>(.*?)</selection>", re.DOTALL | re.IGNORECASE)


def select_final(
    gateway: Gateway,
    profile: ModelProfile,
    older_screenshot: bytes,
    newer_screenshot: bytes,
    fdv: FdvSpec,
) -> tuple[str, bool]:
    """Pick "first" (older) or "second" (newer); falls back to the newer
    candidate when the selection tag cannot be parsed."""
    user = prompts.fill(
        prompts.CHART_SELECT_USER, chart_design=serialize_fdv(fdv, delimited=True)
    )
    messages = [
        ChatMessage.text("system", prompts.CHART_SELECT_SYSTEM),
        ChatMessage.with_images(
            "user",
            TextPart(user),
            image_part(older_screenshot, "image/png"),
            image_part(newer_screenshot, "image/png"),
        ),
    ]
    response = gateway.complete(messages, profile)
    matches = _SELECTION_RE.findall(response)
    for match in reversed(matches):
        word = re.search(r"\b(first|second)\b", match, re.IGNORECASE)
        if word:
            return word.group(1).lower(), False
    logger.warning("unparseable selection response; defaulting to the newer candidate")
    return "second", True


def _render_into(version: ChartVersion, renderer: Renderer) -> None:
    try:
        result = renderer(version.code)
    except RenderError as exc:
        version.render_error = str(exc)
        version.console = list(getattr(exc, "console", []) or [])
        return
    version.console = result.console
    version.screenshot = result.screenshot


def run_refinement(
    gateway: Gateway,
    text_profile: ModelProfile,
    vision_profile: ModelProfile,
    fdv: FdvSpec,
    style_guide: str,
    config: RefineConfig,
    renderer: Renderer,
    ordinal: int = 1,
) -> ChartArtifact:
    """Generate, render, critique, refine, and select one chart."""
    config.validate()
    artifact = ChartArtifact(ordinal=ordinal, fdv=fdv)
    code = generate_code(gateway, text_profile, fdv, style_guide)
    artifact.versions.append(ChartVersion(code))

    for _ in range(config.max_rounds):
        current = artifact.versions[-1]
        _render_into(current, renderer)
        if current.rendered:
            current.critique = critique_render(
                gateway, vision_profile, current.screenshot, current.console
            )
        else:
            # console output alone can drive a fix; synthesize the verdict
            current.critique = Critique(False, f"Rendering failed: {current.render_error}")
        if current.critique.satisfied:
            break
        new_code = refine(
            gateway, text_profile, current.code, current.console, current.critique.feedback
        )
        artifact.versions.append(ChartVersion(new_code))

    versions = artifact.versions
    if len(versions) == 1:
        artifact.final_index = 0 if versions[0].rendered else None
    else:
        newest = versions[-1]
        if not newest.rendered and newest.render_error is None:
            _render_into(newest, renderer)
        older, newer = versions[-2], versions[-1]
        if older.rendered and newer.rendered:
            choice, fallback = select_final(
                gateway, vision_profile, older.screenshot, newer.screenshot, fdv
            )
            artifact.selection_used = True
            artifact.selection_fallback = fallback
            artifact.final_index = len(versions) - (2 if choice == "first" else 1)
        elif newer.rendered:
            artifact.final_index = len(versions) - 1
        elif older.rendered:
            artifact.final_index = len(versions) - 2

    if artifact.final_index is None:
        artifact.failed = True
        artifact.failure_reason = "every render of the last versions failed"
    return artifact


def forge_all(
    gateway: Gateway,
    text_profile: ModelProfile,
    vision_profile: ModelProfile,
    charts: Sequence[tuple[int, FdvSpec]],
    style_guide: str,
    config: RefineConfig,
    renderer: Renderer,
    parallelism: int = 2,
) -> list[ChartArtifact]:
    """Refine every chart; one chart's failure never aborts the report."""

    def forge_one(item: tuple[int, FdvSpec]) -> ChartArtifact:
        ordinal, fdv = item
        try:
            return run_refinement(
                gateway,
                text_profile,
                vision_profile,
                fdv,
                style_guide,
                config,
                renderer,
                ordinal=ordinal,
            )
        except Exception as exc:
            logger.error("chart %d failed: %s", ordinal, exc)
            return ChartArtifact(
                ordinal=ordinal, fdv=fdv, failed=True, failure_reason=str(exc)
            )

    if parallelism <= 1 or len(charts) <= 1:
        return [forge_one(item) for item in charts]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(forge_one, charts))
