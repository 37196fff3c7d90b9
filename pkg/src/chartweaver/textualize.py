"""Turn a multimodal exemplar report into an all-text one.

Every embedded image is shown to the vision model, which extracts the
four-part chart description; the image reference is then spliced out and the
delimited description block put in its place. Text outside the image spans
is preserved byte for byte, and a failed image keeps its original reference
rather than leaving a corrupt description in an exemplar.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .fdv import FdvBlockSpan, FdvParseError, FdvSpec, extract_fdv_blocks, parse_fdv, serialize_fdv, splice
from .gateway import (
    ChatMessage,
    Gateway,
    ImageDecodeError,
    ModelFormatError,
    ModelProfile,
    TextPart,
    image_part,
)
from .imaging import sniff_media_type
from . import prompts

logger = logging.getLogger(__name__)

_IMAGE_REF_RE = re.compile(r"!\[([^\]]*)\]\(([^)\s]+)(?:\s+\"[^\"]*\")?\)")

AssetResolver = Callable[[str], bytes]


class TextualizeError(Exception):
    pass


@dataclass(frozen=True)
class MissingAsset:
    reference: str
    reason: str


@dataclass(frozen=True)
class LocatedImage:
    span: FdvBlockSpan
    data: bytes
    alt: str


class DirectoryAssets:
    """Resolve relative image references against a report's asset directory."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def __call__(self, target: str) -> bytes:
        if target.startswith("data:"):
            return _decode_data_uri(target)
        if re.match(r"^[a-z][a-z0-9+.-]*://", target):
            raise FileNotFoundError(f"remote reference not fetched: {target}")
        path = (self.root / target).resolve()
        return path.read_bytes()


def _decode_data_uri(uri: str) -> bytes:
    header, _, payload = uri.partition(",")
    if not payload or "base64" not in header:
        raise ValueError(f"unsupported data URI: {header}")
    try:
        return base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ValueError(f"bad base64 payload in data URI: {exc}") from exc


def locate_images(
    markdown: str, asset_resolver: AssetResolver
) -> tuple[list[LocatedImage], list[MissingAsset]]:
    """Find every markdown image reference and resolve it to bytes.

    Dangling references are reported, not fatal; spans come back
    non-overlapping and in document order.
    """
    found: list[LocatedImage] = []
    missing: list[MissingAsset] = []
    for match in _IMAGE_REF_RE.finditer(markdown):
        target = match.group(2)
        span = FdvBlockSpan(match.start(), match.end(), match.group(0))
        try:
            data = asset_resolver(target)
        except Exception as exc:
            missing.append(MissingAsset(target, str(exc)))
            continue
        found.append(LocatedImage(span, data, match.group(1)))
    return found, missing


def _spec_from_response(response: str) -> FdvSpec | None:
    for _, parsed in extract_fdv_blocks(response):
        if isinstance(parsed, FdvSpec):
            return parsed
    try:
        return parse_fdv(response)
    except FdvParseError:
        return None


def image_to_fdv(gateway: Gateway, profile: ModelProfile, image: bytes) -> FdvSpec:
    """Extract the chart description of one image via the vision model."""
    media_type = sniff_media_type(image)
    messages = [
        ChatMessage.text("system", prompts.DESIGN_EXTRACT_SYSTEM),
        ChatMessage.with_images(
            "user", image_part(image, media_type), TextPart(prompts.DESIGN_EXTRACT_USER)
        ),
    ]
    response = gateway.complete(messages, profile)
    spec = _spec_from_response(response)
    if spec is None:
        retry = messages + [
            ChatMessage.text("assistant", response),
            ChatMessage.text(
                "user",
                "Your previous response did not contain a valid design document. Respond "
                "again with exactly one <visualization> block in the required format.",
            ),
        ]
        response = gateway.complete(retry, profile)
        spec = _spec_from_response(response)
        if spec is None:
            raise ModelFormatError("no parseable design document after one reprompt")
    return spec


@dataclass
class TextualizeResult:
    text: str
    images_found: int
    images_replaced: int
    errors: list[MissingAsset]


def textualize_report(
    gateway: Gateway,
    profile: ModelProfile,
    markdown: str,
    asset_resolver: AssetResolver,
) -> TextualizeResult:
    """Replace each embedded image with its extracted description block.

    Replacement is applied back to front so earlier spans stay valid. Fails
    only when at least one image was present and none could be processed.
    """
    located, missing = locate_images(markdown, asset_resolver)
    errors = list(missing)
    total_refs = len(located) + len(missing)
    replacements: list[tuple[FdvBlockSpan, str]] = []
    for image in located:
        try:
            spec = image_to_fdv(gateway, profile, image.data)
        except (ModelFormatError, ImageDecodeError) as exc:
            logger.warning("image %r left in place: %s", image.span.raw_text[:60], exc)
            errors.append(MissingAsset(image.span.raw_text, str(exc)))
            continue
        replacements.append((image.span, serialize_fdv(spec, delimited=True)))

    if located and not replacements:
        raise TextualizeError(f"no image could be textualized ({len(errors)} errors)")

    text = markdown
    for span, block in sorted(replacements, key=lambda item: -item[0].start_offset):
        text = splice(text, span, block)
    return TextualizeResult(text, total_refs, len(replacements), errors)


def render_example_reports(exemplars: list[str]) -> str:
    """Join textualized exemplars the way downstream prompts expect them."""
    if not exemplars:
        return "(no example reports available)"
    sections = []
    for index, text in enumerate(exemplars, start=1):
        sections.append(f"### Example Report {index}\n\n{text}")
    return "\n\n".join(sections)


class ExemplarLibrary:
    """Directory of exemplar reports with on-disk textualization caching.

    Layout: ``<root>/<name>/report.md`` plus ``<root>/<name>/assets/...``;
    the cache lives at ``<root>/<name>/report.textualized.md`` with a
    content-hash sidecar so edits to the report or its assets invalidate it.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def names(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(
            entry.name for entry in self.root.iterdir() if (entry / "report.md").is_file()
        )

    def _content_hash(self, name: str) -> str:
        digest = hashlib.sha256()
        digest.update((self.root / name / "report.md").read_bytes())
        assets = self.root / name / "assets"
        if assets.is_dir():
            for path in sorted(assets.rglob("*")):
                if path.is_file():
                    digest.update(path.name.encode("utf-8"))
                    digest.update(path.read_bytes())
        return digest.hexdigest()

    def textualized(self, name: str, gateway: Gateway, profile: ModelProfile) -> str:
        report = self.root / name / "report.md"
        cache = self.root / name / "report.textualized.md"
        sidecar = self.root / name / "report.textualized.hash"
        content_hash = self._content_hash(name)
        if cache.is_file() and sidecar.is_file() and sidecar.read_text().strip() == content_hash:
            return cache.read_text(encoding="utf-8")
        resolver = DirectoryAssets(self.root / name)
        result = textualize_report(
            gateway, profile, report.read_text(encoding="utf-8"), resolver
        )
        cache.write_text(result.text, encoding="utf-8")
        sidecar.write_text(content_hash + "\n", encoding="utf-8")
        return result.text

    def load_all(self, gateway: Gateway, profile: ModelProfile) -> list[str]:
        return [self.textualized(name, gateway, profile) for name in self.names()]
