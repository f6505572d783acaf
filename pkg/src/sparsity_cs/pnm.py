"""Minimal binary PGM (P5) / PPM (P6) reader and PGM writer."""

import re

import numpy as np

from .errors import InvalidInputError
from .sensing import luminance

__all__ = ["PnmError", "read_pnm", "read_luminance", "write_pgm", "write_ppm"]


class PnmError(InvalidInputError):
    pass


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header(data):
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PnmError("truncated header")
        fields.append(m.group(1))
        pos = m.end()
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PnmError("missing whitespace after maxval")
    magic = fields[0]
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise PnmError("non-integer header field") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise PnmError(f"bad header values {width}x{height} maxval={maxval}")
    return magic, width, height, maxval, pos + 1


def read_pnm(path):
    """Read a P5 or P6 file.

    Returns ``(array, maxval)``; the array is ``(h, w)`` for P5 and
    ``(h, w, 3)`` for P6, as float64.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as err:
        raise PnmError(f"cannot read {path}: {err.strerror}") from None
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise PnmError(f"{path}: not a binary PGM/PPM file (magic {magic!r})")
    _, width, height, maxval, offset = _header(data)
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    raster = data[offset : offset + count * dtype.itemsize]
    if len(raster) < count * dtype.itemsize:
        raise PnmError(f"{path}: raster truncated")
    arr = np.frombuffer(raster, dtype=dtype).astype(np.float64)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return arr.reshape(shape), maxval


def read_luminance(path):
    """Grayscale image and its peak value; colour input goes through luminance."""
    arr, maxval = read_pnm(path)
    if arr.ndim == 3:
        arr = luminance(arr[..., 0], arr[..., 1], arr[..., 2])
    return arr, float(maxval)


def write_pgm(path, image, maxval=255):
    """Write a P5 file, rounding and clipping to ``[0, maxval]``."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise PnmError("write_pgm expects a 2D array")
    h, w = image.shape
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    raster = np.clip(np.rint(image), 0, maxval).astype(dtype)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        fh.write(raster.tobytes())


def write_ppm(path, image, maxval=255):
    """Write a P6 file from an ``(h, w, 3)`` array."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise PnmError("write_ppm expects an (h, w, 3) array")
    h, w, _ = image.shape
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    raster = np.clip(np.rint(image), 0, maxval).astype(dtype)
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n%d\n" % (w, h, maxval))
        fh.write(raster.tobytes())
