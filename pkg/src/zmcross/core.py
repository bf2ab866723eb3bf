"""Alphabets, symbol sequences, seeded randomness and sequence text I/O.

Symbols are dense integer indices ``0..size-1``; glyphs only matter when a
sequence is rendered to or parsed from text.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import AlphabetError, SequenceParseError

__all__ = [
    "Alphabet",
    "Sequence",
    "RngStream",
    "shift",
    "stream_id_for",
    "read_sequence",
    "write_sequence",
    "format_sequence",
    "parse_sequence",
    "as_sequence",
]


@dataclass(frozen=True)
class Alphabet:
    size: int
    glyphs: tuple[str, ...] | None = None

    def __post_init__(self):
        if int(self.size) < 1:
            raise AlphabetError(f"alphabet size must be >= 1, got {self.size}")
        object.__setattr__(self, "size", int(self.size))
        if self.glyphs is not None:
            glyphs = tuple(self.glyphs)
            if len(glyphs) != self.size:
                raise AlphabetError(f"{len(glyphs)} glyphs given for alphabet of size {self.size}")
            if any(len(g) != 1 for g in glyphs):
                raise AlphabetError("glyphs must be single characters")
            if len(set(glyphs)) != len(glyphs):
                raise AlphabetError("glyphs must be pairwise distinct")
            if "," in glyphs:
                raise AlphabetError("',' is reserved as the index separator")
            object.__setattr__(self, "glyphs", glyphs)

    @classmethod
    def binary(cls) -> "Alphabet":
        return cls(2, ("0", "1"))

    @classmethod
    def digits(cls, size: int) -> "Alphabet":
        """Alphabet whose glyphs are ``0``, ``1``, ... (size <= 10)."""
        if not 1 <= size <= 10:
            raise AlphabetError("digit glyphs exist only for sizes 1..10")
        return cls(size, tuple(str(i) for i in range(size)))

    @classmethod
    def from_json(cls, obj) -> "Alphabet":
        glyphs = obj.get("glyphs")
        if isinstance(glyphs, str):
            glyphs = tuple(glyphs)
        return cls(int(obj["size"]), glyphs)

    def to_json(self) -> dict:
        out = {"size": self.size}
        if self.glyphs is not None:
            out["glyphs"] = list(self.glyphs)
        return out

    @property
    def dtype(self):
        if self.size <= 256:
            return np.uint8
        if self.size <= 65536:
            return np.uint16
        return np.int32


class Sequence:
    """Immutable finite word over an :class:`Alphabet`.

    ``data`` is a read-only numpy array of symbol indices.  Slicing returns a
    new ``Sequence`` sharing the buffer.
    """

    __slots__ = ("alphabet", "data")

    def __init__(self, data, alphabet: Alphabet, *, validate: bool = True):
        arr = np.asarray(data)
        if arr.ndim != 1:
            raise AlphabetError("sequence data must be one-dimensional")
        if validate and arr.size:
            if not np.issubdtype(arr.dtype, np.integer):
                raise AlphabetError("symbols must be integers")
            lo, hi = int(arr.min()), int(arr.max())
            if lo < 0 or hi >= alphabet.size:
                bad = int(np.flatnonzero((arr < 0) | (arr >= alphabet.size))[0])
                raise AlphabetError(
                    f"symbol {int(arr[bad])} at index {bad} outside alphabet of size {alphabet.size}"
                )
        if arr.dtype != alphabet.dtype:
            arr = arr.astype(alphabet.dtype)
        elif arr.flags.writeable:
            arr = arr.copy()
        arr.flags.writeable = False
        self.data = arr
        self.alphabet = alphabet

    @classmethod
    def from_symbols(cls, symbols: Iterable[int], alphabet: Alphabet) -> "Sequence":
        return cls(np.fromiter(symbols, dtype=np.int64), alphabet)

    def __len__(self) -> int:
        return int(self.data.shape[0])

    def __iter__(self):
        return (int(s) for s in self.data)

    def __getitem__(self, item):
        if isinstance(item, slice):
            out = object.__new__(Sequence)
            out.data = self.data[item]
            out.alphabet = self.alphabet
            return out
        return int(self.data[item])

    def __eq__(self, other):
        if not isinstance(other, Sequence):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.alphabet, self.data.tobytes()))

    def __add__(self, other: "Sequence") -> "Sequence":
        if other.alphabet != self.alphabet:
            raise AlphabetError("cannot concatenate sequences over different alphabets")
        return Sequence(np.concatenate([self.data, other.data]), self.alphabet, validate=False)

    def __repr__(self):
        text = format_sequence(self)
        if len(text) > 40:
            text = text[:37] + "..."
        return f"Sequence({text!r}, size={self.alphabet.size})"

    def __str__(self):
        return format_sequence(self)

    def tolist(self) -> list[int]:
        return self.data.tolist()


def shift(s: Sequence, j: int) -> Sequence:
    """Drop the first ``j`` symbols (the shift map applied ``j`` times)."""
    if j < 0 or j > len(s):
        raise IndexError(f"cannot shift a sequence of length {len(s)} by {j}")
    return s[j:]


def stream_id_for(*labels) -> int:
    """Stable 64-bit stream id derived from arbitrary labels."""
    digest = hashlib.blake2b(repr(labels).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """Seeded random stream backed by the counter-based Philox-4x64 generator.

    The Philox key is ``(seed, stream_id)`` (both reduced mod 2**64), so equal
    pairs produce identical draws on every platform and distinct stream ids
    give independent streams. Each instance is meant to have one owner.
    """

    MASK = (1 << 64) - 1

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & self.MASK
        self.stream_id = int(stream_id) & self.MASK
        self._gen = np.random.Generator(np.random.Philox(key=[self.seed, self.stream_id]))

    def uniform(self, n) -> np.ndarray:
        """``n`` doubles in [0, 1); successive calls continue the same stream."""
        return self._gen.random(n)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size=size)

    def child(self, *labels) -> "RngStream":
        return RngStream(self.seed, stream_id_for(self.stream_id, *labels))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def format_sequence(s: Sequence) -> str:
    glyphs = s.alphabet.glyphs
    if glyphs is not None:
        return "".join(glyphs[i] for i in s.data.tolist())
    return ",".join(str(i) for i in s.data.tolist())


def parse_sequence(text: str, alphabet: Alphabet) -> Sequence:
    """Parse glyph text (or comma-separated indices when glyphs are absent).

    Positions in error messages are 1-based.
    """
    text = text.rstrip("\r\n")
    if alphabet.glyphs is not None:
        if text.isascii() and all(g.isascii() for g in alphabet.glyphs):
            table = np.full(128, -1, dtype=np.int64)
            for i, g in enumerate(alphabet.glyphs):
                table[ord(g)] = i
            out = table[np.frombuffer(text.encode("ascii"), dtype=np.uint8)]
            bad = np.flatnonzero(out < 0)
            if bad.size:
                pos = int(bad[0])
                raise SequenceParseError(f"unknown glyph {text[pos]!r}", pos + 1)
            return Sequence(out, alphabet, validate=False)
        lookup = {g: i for i, g in enumerate(alphabet.glyphs)}
        out = np.empty(len(text), dtype=np.int64)
        for pos, ch in enumerate(text):
            try:
                out[pos] = lookup[ch]
            except KeyError:
                raise SequenceParseError(f"unknown glyph {ch!r}", pos + 1) from None
        return Sequence(out, alphabet, validate=False)
    if not text:
        return Sequence(np.empty(0, dtype=np.int64), alphabet, validate=False)
    fields = text.split(",")
    out = np.empty(len(fields), dtype=np.int64)
    for pos, field in enumerate(fields):
        field = field.strip()
        if not field.isdigit() or int(field) >= alphabet.size:
            raise SequenceParseError(f"invalid symbol index {field!r}", pos + 1)
        out[pos] = int(field)
    return Sequence(out, alphabet, validate=False)


def read_sequence(source: str | PathLike, alphabet: Alphabet) -> Sequence:
    """Read a sequence from a file path, or parse it directly if given text.

    A ``str`` that names an existing file is read as a file; ``Path`` objects
    always are.
    """
    if isinstance(source, PathLike) or (isinstance(source, str) and _is_file(source)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    return parse_sequence(text, alphabet)


def _is_file(text: str) -> bool:
    if "\n" in text or len(text) > 4096:
        return False
    try:
        return Path(text).is_file()
    except OSError:
        return False


def write_sequence(s: Sequence, path: str | PathLike) -> None:
    Path(path).write_text(format_sequence(s) + "\n", encoding="utf-8")


def as_sequence(obj, alphabet: Alphabet) -> Sequence:
    if isinstance(obj, Sequence):
        return obj
    if isinstance(obj, str):
        return parse_sequence(obj, alphabet)
    if isinstance(obj, np.ndarray):
        return Sequence(obj, alphabet)
    return Sequence(np.asarray(list(obj), dtype=np.int64), alphabet)
