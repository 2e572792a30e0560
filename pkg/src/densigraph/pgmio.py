"""Binary PGM (P5) image I/O plus best-effort decoding of other formats.

P5 with maxval 255 is the bit-exact interchange format; PNG/JPEG decode
through Pillow when it is installed. Color images are reduced to grayscale
with the standard luma weights.
"""

from __future__ import annotations

import io

import numpy as np

try:
    from PIL import Image

    _HAVE_PIL = True
except ImportError:
    _HAVE_PIL = False

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def to_grayscale(r, g, b):
    """Luma conversion of 8-bit channels, rounded and clamped to [0, 255].

    Accepts scalars or arrays.
    """
    y = np.rint(
        LUMA_WEIGHTS[0] * np.asarray(r, dtype=np.float64)
        + LUMA_WEIGHTS[1] * np.asarray(g, dtype=np.float64)
        + LUMA_WEIGHTS[2] * np.asarray(b, dtype=np.float64)
    )
    y = np.clip(y, 0, 255)
    if np.isscalar(r):
        return int(y)
    return y.astype(np.uint8)


def write_p5(pixels: np.ndarray) -> bytes:
    """Serialize a 2-D uint8 array as a binary PGM."""
    arr = np.ascontiguousarray(pixels, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError("P5 output requires a 2-D array")
    h, w = arr.shape
    return b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes()


def read_p5(data: bytes) -> np.ndarray:
    """Parse a binary PGM with maxval 255 into a 2-D uint8 array.

    Raises ValueError on anything that is not a well-formed P5.
    """
    if not data.startswith(b"P5"):
        raise ValueError("not a P5 PGM")
    pos = 2
    fields = []
    while len(fields) < 3:
        # skip whitespace and '#' comment lines between header tokens
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end == -1:
                raise ValueError("truncated P5 header")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated P5 header")
        fields.append(data[start:pos])
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise ValueError("bad P5 header") from exc
    if maxval != 255 or w < 1 or h < 1:
        raise ValueError("P5 must be 8-bit with positive dimensions")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + w * h]
    if len(raster) != w * h:
        raise ValueError("P5 raster size mismatch")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w)


def decode_image(data: bytes) -> np.ndarray | None:
    """Decode bytes into a grayscale uint8 array, or None if undecodable."""
    if data.startswith(b"P5"):
        try:
            return read_p5(data)
        except ValueError:
            return None
    if _HAVE_PIL:
        try:
            img = Image.open(io.BytesIO(data))
            img.load()
        except Exception:
            return None
        arr = np.asarray(img.convert("RGB"))
        return to_grayscale(arr[..., 0], arr[..., 1], arr[..., 2])
    return None


def sniff_extension(data: bytes) -> str:
    """File extension for the storage layout, from magic bytes."""
    if data.startswith(b"P5"):
        return "pgm"
    if data.startswith(b"\x89PNG"):
        return "png"
    if data.startswith(b"\xff\xd8"):
        return "jpg"
    return "bin"
