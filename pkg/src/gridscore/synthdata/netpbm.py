"""Binary PGM (P5) and PPM (P6) reading and PGM writing."""

import numpy as np

from ..errors import ParseError

_WHITESPACE = b" \t\n\r\x0b\x0c"


def _skip_space_and_comments(data, pos):
    while pos < len(data):
        ch = data[pos:pos + 1]
        if ch in _WHITESPACE:
            pos += 1
        elif ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        else:
            break
    return pos


def _read_int(data, pos, what):
    pos = _skip_space_and_comments(data, pos)
    start = pos
    while pos < len(data) and data[pos:pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise ParseError(f"expected {what}", start)
    return int(data[start:pos]), pos


def parse_netpbm(data):
    """Decode a binary PGM/PPM file.

    Returns a ``uint8`` array of shape ``(H, W)`` for P5 or ``(H, W, 3)`` for
    P6.  Samples are rescaled to 0..255 when ``maxval < 255``; 16-bit files
    are rejected.
    """
    data = bytes(data)
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported magic {magic!r}; expected P5 or P6", 0)
    channels = 1 if magic == b"P5" else 3
    width, pos = _read_int(data, 2, "width")
    height, pos = _read_int(data, pos, "height")
    maxval, pos = _read_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise ParseError(f"image dimensions must be positive, got {width}x{height}", pos)
    if not 1 <= maxval <= 255:
        raise ParseError(f"maxval must be in 1..255, got {maxval}", pos)
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise ParseError("expected a single whitespace byte after maxval", pos)
    pos += 1
    need = width * height * channels
    if len(data) - pos < need:
        raise ParseError(f"raster truncated: need {need} bytes, found {len(data) - pos}", len(data))
    raster = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    if raster.max(initial=0) > maxval:
        bad = int(np.argmax(raster > maxval))
        raise ParseError(f"sample exceeds maxval {maxval}", pos + bad)
    if maxval != 255:
        raster = np.floor(raster.astype(np.float64) * 255.0 / maxval + 0.5).astype(np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return raster.reshape(shape).copy()


def encode_pgm(pixels):
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError(f"PGM needs a 2-D array, got shape {pixels.shape}")
    h, w = pixels.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()


def encode_ppm(pixels):
    pixels = np.asarray(pixels)
    h, w, _ = pixels.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()


def read_netpbm(path):
    with open(path, "rb") as fh:
        return parse_netpbm(fh.read())


def write_pgm(path, pixels):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(pixels))
