"""Small raster-image helpers shared across the pipeline."""

from __future__ import annotations

import io
import struct

from PIL import Image, ImageDraw

from .gateway import ImageDecodeError

_FORMAT_TO_MEDIA = {
    "PNG": "image/png",
    "JPEG": "image/jpeg",
    "GIF": "image/gif",
    "WEBP": "image/webp",
    "BMP": "image/bmp",
}


def sniff_media_type(data: bytes) -> str:
    """Return the raster media type, or raise if the bytes are not an image."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            fmt = img.format
    except Exception as exc:
        raise ImageDecodeError(f"bytes do not decode as a raster image: {exc}") from exc
    media = _FORMAT_TO_MEDIA.get(fmt or "")
    if media is None:
        raise ImageDecodeError(f"unsupported raster format: {fmt}")
    return media


def png_dimensions(data: bytes) -> tuple[int, int]:
    """Read (width, height) straight from the PNG header."""
    if len(data) < 24 or data[:8] != b"\x89PNG\r\n\x1a\n":
        raise ImageDecodeError("not a PNG stream")
    width, height = struct.unpack(">II", data[16:24])
    return width, height


def placeholder_png(caption: str, width: int = 960, height: int = 540) -> bytes:
    """A neutral stand-in image for a chart whose rendering failed."""
    img = Image.new("RGB", (width, height), (240, 240, 244))
    draw = ImageDraw.Draw(img)
    draw.rectangle([4, 4, width - 5, height - 5], outline=(170, 170, 180), width=2)
    lines = [caption.strip() or "chart unavailable", "(rendering failed)"]
    y = height // 2 - 14 * len(lines)
    for line in lines:
        box = draw.textbbox((0, 0), line)
        draw.text(((width - box[2]) // 2, y), line, fill=(70, 70, 80))
        y += 24
    out = io.BytesIO()
    img.save(out, format="PNG")
    return out.getvalue()
