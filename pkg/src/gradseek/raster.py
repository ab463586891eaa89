"""Deterministic 2-D rasterization with a minimal PNG codec.

The encoder always emits the same bytes for the same pixels (fixed
filter, fixed zlib level), which is what makes golden-image tests and
byte-identical replay possible. The decoder handles the full set of
PNG scanline filters for 8-bit RGB, enough to read anything we write
plus reasonably vanilla external files.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np


class EncodeFailure(Exception):
    pass


class DecodeFailure(Exception):
    pass


_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, body: bytes) -> bytes:
    return (
        struct.pack(">I", len(body))
        + tag
        + body
        + struct.pack(">I", zlib.crc32(tag + body) & 0xFFFFFFFF)
    )


def encode_png(img: np.ndarray) -> bytes:
    """Encode an (H, W, 3) uint8 array as a deterministic RGB PNG."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise EncodeFailure(f"expected (H, W, 3) uint8, got {img.shape} {img.dtype}")
    h, w = img.shape[:2]
    if h == 0 or w == 0:
        raise EncodeFailure("empty image")
    # Filter type 0 on every row: deterministic and trivially reversible.
    raw = np.empty((h, w * 3 + 1), dtype=np.uint8)
    raw[:, 0] = 0
    raw[:, 1:] = img.reshape(h, w * 3)
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    idat = zlib.compress(raw.tobytes(), 6)
    return _PNG_SIG + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")


def _unfilter(raw: np.ndarray, h: int, w: int) -> np.ndarray:
    bpp = 3
    stride = w * bpp
    out = np.zeros((h, stride), dtype=np.uint8)
    for row in range(h):
        ftype = int(raw[row * (stride + 1)])
        line = raw[row * (stride + 1) + 1 : (row + 1) * (stride + 1)].astype(np.int32)
        prior = out[row - 1].astype(np.int32) if row > 0 else np.zeros(stride, np.int32)
        if ftype == 0:
            cur = line
        elif ftype == 2:
            cur = (line + prior) & 0xFF
        else:
            cur = np.zeros(stride, np.int32)
            for i in range(stride):
                left = cur[i - bpp] if i >= bpp else 0
                up = prior[i]
                ul = prior[i - bpp] if i >= bpp else 0
                if ftype == 1:
                    pred = left
                elif ftype == 3:
                    pred = (left + up) // 2
                elif ftype == 4:
                    p = left + up - ul
                    pa, pb, pc = abs(p - left), abs(p - up), abs(p - ul)
                    pred = left if (pa <= pb and pa <= pc) else (up if pb <= pc else ul)
                else:
                    raise DecodeFailure(f"unsupported filter type {ftype}")
                cur[i] = (line[i] + pred) & 0xFF
        out[row] = cur.astype(np.uint8)
    return out.reshape(h, w, 3)


def decode_png(data: bytes) -> np.ndarray:
    """Decode an 8-bit RGB non-interlaced PNG into an (H, W, 3) uint8 array."""
    if not data.startswith(_PNG_SIG):
        raise DecodeFailure("not a PNG")
    pos = len(_PNG_SIG)
    width = height = None
    idat = b""
    while pos < len(data):
        if pos + 8 > len(data):
            raise DecodeFailure("truncated chunk header")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        body = data[pos + 8 : pos + 8 + length]
        if len(body) != length:
            raise DecodeFailure("truncated chunk body")
        if tag == b"IHDR":
            width, height, depth, ctype, _, _, interlace = struct.unpack(">IIBBBBB", body)
            if depth != 8 or ctype != 2 or interlace != 0:
                raise DecodeFailure(
                    f"unsupported PNG (depth={depth}, color={ctype}, interlace={interlace})")
        elif tag == b"IDAT":
            idat += body
        elif tag == b"IEND":
            break
        pos += 12 + length
    if width is None or not idat:
        raise DecodeFailure("missing IHDR or IDAT")
    try:
        raw = np.frombuffer(zlib.decompress(idat), dtype=np.uint8)
    except zlib.error as e:
        raise DecodeFailure(f"bad IDAT stream: {e}") from e
    expect = height * (width * 3 + 1)
    if raw.shape[0] != expect:
        raise DecodeFailure(f"scanline payload {raw.shape[0]} != expected {expect}")
    return _unfilter(raw, height, width)


def fill_rect(img: np.ndarray, col0: int, row0: int, col1: int, row1: int, color):
    """Fill a half-open pixel rectangle, clipped to the image."""
    h, w = img.shape[:2]
    c0, c1 = max(0, min(col0, col1)), min(w, max(col0, col1))
    r0, r1 = max(0, min(row0, row1)), min(h, max(row0, row1))
    if c0 < c1 and r0 < r1:
        img[r0:r1, c0:c1] = color


class WorldView:
    """Fixed camera: an axis-aligned world window mapped onto a pixel grid.

    World +y points up on screen (row 0 is the top of the window).
    """

    def __init__(self, x0: float, x1: float, y0: float, y1: float,
                 width: int, height: int):
        if x1 <= x0 or y1 <= y0:
            raise ValueError("degenerate world window")
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        self.width, self.height = width, height

    def to_px(self, x: float, y: float) -> tuple[int, int]:
        col = int((x - self.x0) / (self.x1 - self.x0) * self.width)
        row = int((self.y1 - y) / (self.y1 - self.y0) * self.height)
        return col, row

    def draw_square(self, img: np.ndarray, x: float, y: float, half_px: int, color):
        col, row = self.to_px(x, y)
        fill_rect(img, col - half_px, row - half_px, col + half_px, row + half_px, color)

    def draw_world_rect(self, img: np.ndarray, x0: float, y0: float,
                        x1: float, y1: float, color):
        c0, r1 = self.to_px(x0, y0)
        c1, r0 = self.to_px(x1, y1)
        fill_rect(img, c0, r0, c1, r1, color)
