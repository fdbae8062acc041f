"""Line-oriented text container used by the model file formats.

Numeric payloads are written with ``repr`` so every float64 value round-trips
exactly through base-10 text. Readers track byte offsets so parse errors can
point at the offending line.
"""

import os

import numpy as np

from .errors import FormatError


def format_floats(values):
    """One space-separated payload line for a flat float array."""
    return " ".join(repr(float(v)) for v in np.asarray(values, dtype=np.float64).ravel())


class LineReader:
    """Iterates over decoded lines while tracking their byte offsets."""

    def __init__(self, data: bytes):
        self._lines = []
        offset = 0
        for raw in data.split(b"\n"):
            self._lines.append((raw, offset))
            offset += len(raw) + 1
        self._pos = 0
        self._size = len(data)

    @property
    def offset(self):
        """Byte offset of the next unread line (end of data when exhausted)."""
        if self._pos < len(self._lines):
            return self._lines[self._pos][1]
        return self._size

    def next_line(self, context="content"):
        """Next non-empty line as (text, offset); FormatError at end of data."""
        while self._pos < len(self._lines):
            raw, offset = self._lines[self._pos]
            self._pos += 1
            try:
                text = raw.decode("ascii").strip()
            except UnicodeDecodeError as exc:
                raise FormatError(f"non-ASCII byte while reading {context}", offset) from exc
            if text:
                return text, offset
        raise FormatError(f"unexpected end of file while reading {context}", self._size)

    def expect(self, expected, context=None):
        text, offset = self.next_line(context or repr(expected))
        if text != expected:
            raise FormatError(f"expected {expected!r}, got {text!r}", offset)
        return offset

    def read_keyword(self, keyword):
        """Line of the form ``<keyword> <tok> ...``; returns the token list."""
        text, offset = self.next_line(keyword)
        parts = text.split()
        if parts[0] != keyword:
            raise FormatError(f"expected {keyword!r} line, got {text!r}", offset)
        return parts[1:], offset

    def read_ints(self, keyword, count=None):
        tokens, offset = self.read_keyword(keyword)
        try:
            values = [int(t) for t in tokens]
        except ValueError as exc:
            raise FormatError(f"bad integer in {keyword!r} line", offset) from exc
        if count is not None and len(values) != count:
            raise FormatError(
                f"{keyword!r} line has {len(values)} values, expected {count}", offset
            )
        return values

    def read_array(self, keyword):
        """Array block: ``<keyword> <d1> <d2> ...`` then one payload line."""
        shape = self.read_ints(keyword)
        if any(d < 1 for d in shape):
            raise FormatError(f"{keyword!r} declares a non-positive dimension {shape}")
        expected = int(np.prod(shape)) if shape else 1
        text, offset = self.next_line(f"{keyword} payload")
        tokens = text.split()
        if len(tokens) != expected:
            raise FormatError(
                f"{keyword!r} payload has {len(tokens)} values, shape {shape} needs {expected}",
                offset,
            )
        try:
            values = np.array([float(t) for t in tokens], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"bad float in {keyword!r} payload", offset) from exc
        return values.reshape(shape)


class BlockWriter:
    """Accumulates the text body of a model file."""

    def __init__(self, magic):
        self._parts = [magic]

    def line(self, *tokens):
        self._parts.append(" ".join(str(t) for t in tokens))

    def array(self, keyword, values):
        arr = np.asarray(values, dtype=np.float64)
        self.line(keyword, *arr.shape)
        self._parts.append(format_floats(arr))

    def text(self):
        return "\n".join(self._parts) + "\n"


def write_text_atomic(path, text):
    """Write text via a temp file and rename so readers never see partial files."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_bytes_atomic(path, payload: bytes):
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def read_magic(path):
    """First line of a file, for sniffing model file kinds."""
    with open(path, "rb") as fh:
        first = fh.readline()
    return first.decode("ascii", errors="replace").strip()


def write_relevance_map(values, path, mode="none"):
    """Persist a 2-D relevance map as RELPROP-RELMAP v1 text."""
    writer = BlockWriter("RELPROP-RELMAP v1")
    writer.line("mode", mode)
    writer.array("map", np.asarray(values, dtype=np.float64))
    write_text_atomic(path, writer.text())


def read_relevance_map(path):
    """Load a RELPROP-RELMAP v1 file; returns (values, mode)."""
    with open(path, "rb") as fh:
        reader = LineReader(fh.read())
    reader.expect("RELPROP-RELMAP v1", context="file header")
    tokens, offset = reader.read_keyword("mode")
    if len(tokens) != 1:
        raise FormatError("mode line must carry exactly one token", offset)
    values = reader.read_array("map")
    if values.ndim != 2:
        raise FormatError(f"relevance map must be 2-D, got shape {values.shape}")
    return values, tokens[0]
