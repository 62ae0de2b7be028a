"""Binary PGM (P5) reading and writing, 8-bit only."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class PgmError(ValueError):
    pass


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated header tokens (``#`` comments skipped) and the offset after them."""
    out = []
    pos = 0
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise PgmError("truncated PGM header")
        if data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        out.append(data[start:pos])
    return out, pos


def parse_pgm(data: bytes) -> np.ndarray:
    """Pixels of a P5 image as a ``(rows, cols)`` uint8 array."""
    if not data.startswith(b"P5"):
        raise PgmError("not a binary PGM (missing P5 magic)")
    try:
        tokens, pos = _tokens(data, 4)
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PgmError(f"malformed PGM header: {exc}") from None
    if width < 1 or height < 1:
        raise PgmError(f"invalid PGM size {width}x{height}")
    if not 0 < maxval < 256:
        raise PgmError(f"only 8-bit PGM is supported, got maxval {maxval}")
    # exactly one whitespace byte separates the header from the raster
    pos += 1
    raster = data[pos:pos + width * height]
    if len(raster) < width * height:
        raise PgmError(f"truncated PGM raster ({len(raster)} of {width * height} bytes)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def read_pgm(path: str | Path) -> np.ndarray:
    return parse_pgm(Path(path).read_bytes())


def format_pgm(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise PgmError(f"expected a 2-D image, got shape {pixels.shape}")
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.astype(np.uint8).tobytes()


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    Path(path).write_bytes(format_pgm(pixels))
