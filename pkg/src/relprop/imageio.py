"""Bit-exact readers and writers for the portable pixmap family.

Binary PPM (P6) for RGB, binary PGM (P5) for grayscale, and PAM (P7) with
DEPTH 4 for RGBA overlays. The P6 writer emits exactly
``P6\\n<w> <h>\\n255\\n`` followed by raw bytes, and read(write(x)) is
byte-identical. Parsers track byte offsets so corruption reports point at the
problem; trailing bytes after the payload are treated as corruption too.
"""

import numpy as np

from .errors import FormatError
from .heatmap import RgbaImage, RgbImage
from .serialize import write_bytes_atomic


def _encode_header(magic, width, height):
    return f"{magic}\n{width} {height}\n255\n".encode("ascii")


def write_ppm(image, path):
    """Binary P6 with maxval 255."""
    payload = _encode_header("P6", image.width, image.height) + image.pixels.tobytes()
    write_bytes_atomic(path, payload)


def write_pgm(image2d, path):
    """Binary P5; accepts an (H, W) uint8 array."""
    arr = np.asarray(image2d)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise ValueError(f"write_pgm needs an (H, W) uint8 array, got {arr.shape} {arr.dtype}")
    payload = _encode_header("P5", arr.shape[1], arr.shape[0]) + arr.tobytes()
    write_bytes_atomic(path, payload)


class _TokenScanner:
    """Whitespace-delimited header tokens with byte-offset tracking."""

    def __init__(self, data):
        self.data = data
        self.pos = 0

    def token(self, what):
        data, n = self.data, len(self.data)
        while self.pos < n and data[self.pos : self.pos + 1].isspace():
            self.pos += 1
        start = self.pos
        while self.pos < n and not data[self.pos : self.pos + 1].isspace():
            self.pos += 1
        if start == self.pos:
            raise FormatError(f"missing {what} in header", start)
        return data[start : self.pos].decode("ascii", errors="replace"), start

    def int_token(self, what):
        text, offset = self.token(what)
        try:
            value = int(text)
        except ValueError:
            raise FormatError(f"bad {what} {text!r}", offset) from None
        return value, offset

    def single_space(self, what):
        if self.pos >= len(self.data) or not self.data[self.pos : self.pos + 1].isspace():
            raise FormatError(f"expected whitespace before {what}", self.pos)
        self.pos += 1


def _read_netpbm(path, magic, channels):
    with open(path, "rb") as fh:
        data = fh.read()
    scanner = _TokenScanner(data)
    found, offset = scanner.token("magic number")
    if found != magic:
        raise FormatError(f"expected {magic} file, found {found!r}", offset)
    width, woff = scanner.int_token("width")
    height, hoff = scanner.int_token("height")
    if width < 1 or height < 1:
        raise FormatError(f"bad dimensions {width}x{height}", min(woff, hoff))
    maxval, moff = scanner.int_token("maxval")
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}; only 255 is handled", moff)
    scanner.single_space("pixel data")
    expected = width * height * channels
    payload = data[scanner.pos :]
    if len(payload) < expected:
        raise FormatError(
            f"pixel data truncated: need {expected} bytes, found {len(payload)}",
            scanner.pos + len(payload),
        )
    if len(payload) > expected:
        raise FormatError(
            f"{len(payload) - expected} trailing byte(s) after pixel data",
            scanner.pos + expected,
        )
    array = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        return array.reshape(height, width).copy()
    return array.reshape(height, width, channels).copy()


def read_ppm(path):
    return RgbImage(_read_netpbm(path, "P6", 3))


def read_pgm(path):
    return _read_netpbm(path, "P5", 1)


def write_pam_rgba(image, path):
    """PAM (P7) container for the RGBA overlay output."""
    header = (
        "P7\n"
        f"WIDTH {image.width}\n"
        f"HEIGHT {image.height}\n"
        "DEPTH 4\n"
        "MAXVAL 255\n"
        "TUPLTYPE RGB_ALPHA\n"
        "ENDHDR\n"
    ).encode("ascii")
    write_bytes_atomic(path, header + image.pixels.tobytes())


def read_pam_rgba(path):
    with open(path, "rb") as fh:
        data = fh.read()
    marker = b"ENDHDR\n"
    end = data.find(marker)
    if not data.startswith(b"P7\n") or end < 0:
        raise FormatError("not a P7 PAM file", 0)
    fields = {}
    for line in data[3:end].decode("ascii", errors="replace").splitlines():
        parts = line.split()
        if len(parts) == 2:
            fields[parts[0]] = parts[1]
    try:
        width = int(fields["WIDTH"])
        height = int(fields["HEIGHT"])
        depth = int(fields["DEPTH"])
        maxval = int(fields["MAXVAL"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"incomplete PAM header: {exc}", 3) from exc
    if depth != 4 or maxval != 255:
        raise FormatError(f"unsupported PAM depth {depth}/maxval {maxval}", 3)
    payload = data[end + len(marker) :]
    expected = width * height * 4
    if len(payload) != expected:
        raise FormatError(
            f"pixel data length {len(payload)} != expected {expected}",
            end + len(marker) + min(len(payload), expected),
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 4).copy()
    return RgbaImage(pixels)


def to_grayscale(image):
    """Standard luma combination of an RgbImage, or a PGM array unchanged."""
    if isinstance(image, RgbImage):
        rgb = image.pixels.astype(np.float64)
        return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return np.asarray(image, dtype=np.float64)


def load_grayscale(path):
    """Read a PGM or PPM file as a float grayscale array."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        return read_pgm(path).astype(np.float64)
    if magic == b"P6":
        return to_grayscale(read_ppm(path))
    raise FormatError(
        f"unsupported image format {magic!r}; expected binary PGM (P5) or PPM (P6)",
        0,
    )
