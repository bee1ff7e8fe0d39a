"""Flood-surface rasters and their file formats.

A surface is a single-channel byte raster: cell value 0 means dry, anything
positive means wet (the magnitude is depth and is irrelevant to overlap
analytics).  Surfaces load from binary PGM (P5, maxval <= 255) or greyscale
PNG and always normalise to one byte per pixel.
"""

from __future__ import annotations

import hashlib
import io
import re
from dataclasses import dataclass, field

import numpy as np
from PIL import Image


class RasterError(ValueError):
    pass


@dataclass
class RasterSurface:
    id: str
    name: str
    width: int
    height: int
    cells: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.cells.dtype != np.uint8:
            raise RasterError("surface cells must be uint8")
        if self.cells.shape != (self.height, self.width):
            raise RasterError(
                f"cells shape {self.cells.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if not self.cells.flags["C_CONTIGUOUS"]:
            self.cells = np.ascontiguousarray(self.cells)

    @property
    def payload_bytes(self) -> int:
        return self.width * self.height

    def digest(self) -> str:
        return hashlib.sha256(self.cells.tobytes()).hexdigest()

    def wet_mask(self) -> np.ndarray:
        return self.cells > 0


_PGM_HEADER = re.compile(
    rb"^P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+"
    rb"(?:#[^\n]*\n\s*)*(\d+)\s"
)


def parse_pgm(data: bytes) -> tuple[int, int, np.ndarray]:
    """Parse binary PGM (P5).  Returns (width, height, cells)."""
    match = _PGM_HEADER.match(data)
    if not match:
        raise RasterError("not a binary PGM (P5) file")
    width, height, maxval = (int(g) for g in match.groups())
    if maxval > 255:
        raise RasterError("16-bit PGM is not supported; maxval must be <= 255")
    if width < 1 or height < 1:
        raise RasterError("PGM dimensions must be positive")
    pixels = data[match.end():]
    expected = width * height
    if len(pixels) < expected:
        raise RasterError(
            f"PGM truncated: expected {expected} pixel bytes, got {len(pixels)}"
        )
    cells = np.frombuffer(pixels[:expected], dtype=np.uint8).reshape(height, width)
    return width, height, cells.copy()


def write_pgm(cells: np.ndarray) -> bytes:
    if cells.dtype != np.uint8 or cells.ndim != 2:
        raise RasterError("PGM writer needs a 2-D uint8 array")
    height, width = cells.shape
    header = f"P5\n{width} {height}\n255\n".encode()
    return header + cells.tobytes()


def decode_surface_bytes(data: bytes) -> tuple[int, int, np.ndarray]:
    """Decode PGM or greyscale PNG bytes to (width, height, uint8 cells)."""
    if data[:2] == b"P5":
        return parse_pgm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        img = Image.open(io.BytesIO(data))
        if img.mode not in ("L", "I;16", "1", "P", "I"):
            raise RasterError(
                f"PNG must be single-channel greyscale, got mode {img.mode!r}"
            )
        img = img.convert("L")
        cells = np.asarray(img, dtype=np.uint8)
        return img.width, img.height, cells.copy()
    raise RasterError("unrecognised surface format (expected PGM P5 or PNG)")


def load_surface(path_or_bytes, *, id: str = "", name: str = "") -> RasterSurface:
    if isinstance(path_or_bytes, (bytes, bytearray)):
        data = bytes(path_or_bytes)
    else:
        from pathlib import Path

        p = Path(path_or_bytes)
        data = p.read_bytes()
        name = name or p.name
    width, height, cells = decode_surface_bytes(data)
    sid = id or hashlib.sha256(data).hexdigest()[:12]
    return RasterSurface(
        id=sid, name=name or sid, width=width, height=height, cells=cells
    )


def rgba_to_png_bytes(rgba: np.ndarray) -> bytes:
    if rgba.dtype != np.uint8 or rgba.ndim != 3 or rgba.shape[2] != 4:
        raise RasterError("PNG writer needs an (h, w, 4) uint8 array")
    buf = io.BytesIO()
    Image.fromarray(rgba, "RGBA").save(buf, format="PNG")
    return buf.getvalue()
