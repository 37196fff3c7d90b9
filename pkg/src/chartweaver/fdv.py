"""Parse, validate, serialize, and locate structured chart-description blocks.

A chart description is a four-part structured object (overall layout,
plotting scale, data, marks) embedded in markdown between delimiter lines.
A block is opened by a line consisting solely of ``<visualization>`` and
closed by the next line consisting solely of either ``</visualization>`` or
``<visualization>`` (model output uses both forms, so both are accepted).
The body is a JSON object with exactly four top-level keys, one per part,
each mapping ``Part-<letter>.<n>`` subkeys to non-empty text.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

OPEN_DELIMITER = "<visualization>"
CLOSE_DELIMITERS = ("</visualization>", "<visualization>")

PART_LETTERS = ("A", "B", "C", "D")
PART_HEADERS = {
    "A": "Part-A: Overall Layout",
    "B": "Part-B: Plotting Scale",
    "C": "Part-C: Data",
    "D": "Part-D: Marks",
}
_HEADER_TO_LETTER = {v: k for k, v in PART_HEADERS.items()}
_SUBKEY_RE = re.compile(r"^Part-([A-D])\.([1-9][0-9]*)$")


class FdvParseError(ValueError):
    """Base class for chart-description parse failures."""


class MalformedObjectError(FdvParseError):
    """The block body is not a well-formed structured object."""


class MissingPartError(FdvParseError):
    """One of the four required parts is absent or empty."""

    def __init__(self, letter: str):
        super().__init__(f"missing or empty part: {PART_HEADERS[letter]}")
        self.letter = letter


class BadKeyError(FdvParseError):
    """A key does not match the required pattern or is duplicated/misplaced."""

    def __init__(self, key: str, reason: str):
        super().__init__(f"bad key {key!r}: {reason}")
        self.key = key


class EmptyValueError(FdvParseError):
    """A subkey maps to empty text."""

    def __init__(self, key: str):
        super().__init__(f"empty value for key {key!r}")
        self.key = key


class SpanOutOfBoundsError(ValueError):
    """A block span does not address the given document."""


@dataclass(eq=False)
class FdvSpec:
    """Four ordered part maps plus any extra top-level keys kept verbatim.

    Part maps are insertion-ordered; equality is order-sensitive because the
    serialized form preserves key order. Treat instances as immutable.
    """

    layout: dict[str, str]
    scale: dict[str, str]
    data: dict[str, str]
    marks: dict[str, str]
    extras: dict[str, str] = field(default_factory=dict)

    def part(self, letter: str) -> dict[str, str]:
        return {"A": self.layout, "B": self.scale, "C": self.data, "D": self.marks}[letter]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FdvSpec):
            return NotImplemented
        for letter in PART_LETTERS:
            if list(self.part(letter).items()) != list(other.part(letter).items()):
                return False
        return list(self.extras.items()) == list(other.extras.items())

    def __hash__(self):
        return hash(tuple(tuple(self.part(p).items()) for p in PART_LETTERS))

    def validate(self, strict: bool = False) -> None:
        """Raise a parse error if the invariants do not hold."""
        for letter in PART_LETTERS:
            part = self.part(letter)
            if not part:
                raise MissingPartError(letter)
            integers = []
            for key, value in part.items():
                match = _SUBKEY_RE.match(key)
                if match is None:
                    raise BadKeyError(key, "expected Part-<letter>.<positive integer>")
                if match.group(1) != letter:
                    raise BadKeyError(key, f"letter does not match enclosing part {letter}")
                if not isinstance(value, str) or not value.strip():
                    raise EmptyValueError(key)
                integers.append(int(match.group(2)))
            if len(set(integers)) != len(integers):
                raise BadKeyError(f"Part-{letter}.*", "duplicate key integers")
            if strict and integers != list(range(1, len(integers) + 1)):
                raise BadKeyError(
                    f"Part-{letter}.*",
                    f"key integers {integers} not contiguous from 1",
                )


@dataclass(frozen=True)
class FdvBlockSpan:
    """Location of one delimited block inside a source document.

    Offsets index into the document string; ``raw_text`` is the delimited
    block verbatim, i.e. ``source[start_offset:end_offset]``.
    """

    start_offset: int
    end_offset: int
    raw_text: str

    def __post_init__(self):
        if self.start_offset >= self.end_offset:
            raise ValueError("span must be non-empty")


def _strip_delimiters(text: str) -> str:
    lines = text.split("\n")
    start = 0
    end = len(lines)
    while start < end and not lines[start].strip():
        start += 1
    while end > start and not lines[end - 1].strip():
        end -= 1
    if start < end and lines[start].rstrip("\r") == OPEN_DELIMITER:
        start += 1
    if start < end and lines[end - 1].rstrip("\r") in CLOSE_DELIMITERS:
        end -= 1
    return "\n".join(lines[start:end])


_TRAILING_COMMA_RE = re.compile(r",(\s*[}\]])")


def _load_object(body: str):
    def reject_duplicates(pairs):
        keys = [k for k, _ in pairs]
        for k in keys:
            if keys.count(k) > 1:
                raise BadKeyError(k, "duplicate key")
        return dict(pairs)

    try:
        return json.loads(body, object_pairs_hook=reject_duplicates)
    except BadKeyError:
        raise
    except json.JSONDecodeError:
        pass
    # one repair attempt: models frequently leave trailing commas
    repaired = _TRAILING_COMMA_RE.sub(r"\1", body)
    try:
        return json.loads(repaired, object_pairs_hook=reject_duplicates)
    except json.JSONDecodeError as exc:
        raise MalformedObjectError(f"body is not a structured object: {exc}") from exc


def _flatten_value(key: str, value) -> str:
    """Render one accidental level of nesting as concatenated text."""
    if isinstance(value, dict):
        pieces = value.values()
    elif isinstance(value, list):
        pieces = value
    else:
        raise MalformedObjectError(f"value of {key!r} has unsupported type {type(value).__name__}")
    texts = []
    for piece in pieces:
        if isinstance(piece, str):
            texts.append(piece)
        elif isinstance(piece, (int, float, bool)):
            texts.append(json.dumps(piece))
        else:
            raise MalformedObjectError(f"value of {key!r} is nested more than one level")
    return " ".join(texts)


def _read_part(letter: str, raw, strict: bool) -> dict[str, str]:
    if not isinstance(raw, dict):
        raise MalformedObjectError(f"part {PART_HEADERS[letter]!r} is not an object")
    if not raw:
        raise MissingPartError(letter)
    part: dict[str, str] = {}
    for key, value in raw.items():
        if not isinstance(key, str) or _SUBKEY_RE.match(key) is None:
            raise BadKeyError(str(key), "expected Part-<letter>.<positive integer>")
        if isinstance(value, str):
            text = value
        elif isinstance(value, (int, float, bool)):
            if strict:
                raise BadKeyError(key, "value is not text")
            text = json.dumps(value)
        else:
            if strict:
                raise BadKeyError(key, "value is nested, not text")
            text = _flatten_value(key, value)
            logger.warning("flattened nested value under %s", key)
        part[key] = text
    return part


def parse_fdv(text: str, strict: bool = False) -> FdvSpec:
    """Parse one block (delimiter lines optional) into a spec.

    Lenient mode (default) flattens one level of accidental nesting,
    coerces scalar values to text, and shunts unknown top-level keys into
    ``extras``. Strict mode rejects all three and additionally requires the
    subkey integers of each part to be contiguous from 1.
    """
    body = _strip_delimiters(text)
    if not body.strip():
        raise MalformedObjectError("empty block body")
    obj = _load_object(body)
    if not isinstance(obj, dict):
        raise MalformedObjectError("block body is not an object")

    parts: dict[str, dict[str, str]] = {}
    extras: dict[str, str] = {}
    for key, value in obj.items():
        letter = _HEADER_TO_LETTER.get(key)
        if letter is None:
            if strict:
                raise BadKeyError(key, "unknown top-level key")
            extras[key] = value if isinstance(value, str) else json.dumps(value, ensure_ascii=False)
            logger.warning("kept unknown top-level key %r in extras", key)
            continue
        parts[letter] = _read_part(letter, value, strict)

    for letter in PART_LETTERS:
        if letter not in parts:
            raise MissingPartError(letter)

    spec = FdvSpec(parts["A"], parts["B"], parts["C"], parts["D"], extras)
    spec.validate(strict=strict)
    return spec


def serialize_fdv(spec: FdvSpec, delimited: bool = False) -> str:
    """Serialize a valid spec; the output re-parses to an equal spec."""
    obj: dict[str, object] = {PART_HEADERS[p]: dict(spec.part(p)) for p in PART_LETTERS}
    obj.update(spec.extras)
    body = json.dumps(obj, indent=2, ensure_ascii=False)
    if not delimited:
        return body
    return f"{OPEN_DELIMITER}\n{body}\n{CLOSE_DELIMITERS[0]}"


def _iter_lines(document: str):
    """Yield (line_start, line_end, text) with line_end excluding the newline."""
    pos = 0
    length = len(document)
    while pos < length:
        newline = document.find("\n", pos)
        if newline == -1:
            yield pos, length, document[pos:length]
            return
        yield pos, newline, document[pos:newline]
        pos = newline + 1


def extract_fdv_blocks(
    document: str, strict: bool = False
) -> list[tuple[FdvBlockSpan, FdvSpec | FdvParseError]]:
    """Locate every delimited block in document order.

    Malformed blocks are returned with their parse error rather than being
    dropped; a block opened but never closed extends to end of document and
    carries a :class:`MalformedObjectError`. Spans never overlap: a line that
    closes one block is consumed and does not open the next.
    """
    results: list[tuple[FdvBlockSpan, FdvSpec | FdvParseError]] = []
    block_start: int | None = None
    body_start = 0
    for line_start, line_end, text in _iter_lines(document):
        stripped = text.rstrip("\r")
        if block_start is None:
            if stripped == OPEN_DELIMITER:
                block_start = line_start
                body_start = min(line_end + 1, len(document))
        elif stripped in CLOSE_DELIMITERS:
            span = FdvBlockSpan(block_start, line_end, document[block_start:line_end])
            body = document[body_start:line_start]
            try:
                parsed: FdvSpec | FdvParseError = parse_fdv(body, strict=strict)
            except FdvParseError as exc:
                parsed = exc
            results.append((span, parsed))
            block_start = None
    if block_start is not None:
        span = FdvBlockSpan(block_start, len(document), document[block_start:])
        results.append((span, MalformedObjectError("block not terminated before end of document")))
    return results


def splice(document: str, span: FdvBlockSpan, replacement: str) -> str:
    """Replace exactly the spanned bytes; everything outside is untouched."""
    if not (0 <= span.start_offset < span.end_offset <= len(document)):
        raise SpanOutOfBoundsError(
            f"span [{span.start_offset}, {span.end_offset}) outside document of length {len(document)}"
        )
    if document[span.start_offset : span.end_offset] != span.raw_text:
        raise SpanOutOfBoundsError("span text does not match document")
    return document[: span.start_offset] + replacement + document[span.end_offset :]
