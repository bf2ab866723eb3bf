"""Suffix-automaton substring index over a fixed reference sequence.

The automaton is stored as flat arrays (dense ``states x alphabet`` transition
table, suffix links, max lengths) so that the build and the left-to-right
matching loops run under numba.  Waiting times are computed by scanning, never
by indexing, because the scanned sequence may be an unbounded stream.
"""

from __future__ import annotations

from typing import Iterator

import numba
import numpy as np

from .core import Sequence
from .errors import AlphabetError, NotFound

__all__ = [
    "MatchIndex",
    "MatchCursor",
    "build_index",
    "contains",
    "longest_prefix_match",
    "waiting_time",
]


@numba.njit(cache=True)
def _build_sam(data, n_symbols):
    n = data.shape[0]
    cap = max(2 * n, 2)
    nxt = np.full((cap, n_symbols), -1, dtype=np.int32)
    link = np.full(cap, -1, dtype=np.int32)
    length = np.zeros(cap, dtype=np.int32)
    size = 1
    last = 0
    for i in range(n):
        c = data[i]
        cur = size
        size += 1
        length[cur] = length[last] + 1
        p = last
        while p != -1 and nxt[p, c] == -1:
            nxt[p, c] = cur
            p = link[p]
        if p == -1:
            link[cur] = 0
        else:
            q = nxt[p, c]
            if length[p] + 1 == length[q]:
                link[cur] = q
            else:
                clone = size
                size += 1
                length[clone] = length[p] + 1
                for a in range(n_symbols):
                    nxt[clone, a] = nxt[q, a]
                link[clone] = link[q]
                while p != -1 and nxt[p, c] == q:
                    nxt[p, c] = clone
                    p = link[p]
                link[q] = clone
                link[cur] = clone
        last = cur
    return nxt[:size].copy(), link[:size].copy(), length[:size].copy()


@numba.njit(cache=True)
def _walk(nxt, word, start, cap):
    """Length of the longest prefix of word[start:start+cap] accepted from the root."""
    s = 0
    j = start
    stop = min(word.shape[0], start + cap)
    while j < stop:
        t = nxt[s, word[j]]
        if t == -1:
            break
        s = t
        j += 1
    return j - start


@numba.njit(cache=True)
def _zm_cuts(nxt, y):
    n = y.shape[0]
    ends = np.empty(n, dtype=np.int64)
    singleton = np.zeros(n, dtype=np.bool_)
    c = 0
    i = 0
    while i < n:
        s = 0
        j = i
        while j < n:
            t = nxt[s, y[j]]
            if t == -1:
                break
            s = t
            j += 1
        if j == i:
            j = i + 1
            singleton[c] = True
        ends[c] = j
        c += 1
        i = j
    return ends[:c].copy(), singleton[:c].copy()


@numba.njit(cache=True)
def _count_accepted(nxt, flat, offsets):
    hits = 0
    for w in range(offsets.shape[0] - 1):
        a = offsets[w]
        b = offsets[w + 1]
        s = 0
        ok = True
        for j in range(a, b):
            s = nxt[s, flat[j]]
            if s == -1:
                ok = False
                break
        if ok:
            hits += 1
    return hits


@numba.njit(cache=True)
def _accepted_spans(nxt, data, starts, ends):
    out = np.zeros(starts.shape[0], dtype=np.bool_)
    for w in range(starts.shape[0]):
        s = 0
        ok = True
        for j in range(starts[w], ends[w]):
            s = nxt[s, data[j]]
            if s == -1:
                ok = False
                break
        out[w] = ok
    return out


@numba.njit(cache=True)
def _find(hay, needle, start):
    """First index >= start where needle occurs in hay, else -1 (naive scan)."""
    m = needle.shape[0]
    last = hay.shape[0] - m
    first = needle[0]
    for r in range(start, last + 1):
        if hay[r] != first:
            continue
        ok = True
        for j in range(1, m):
            if hay[r + j] != needle[j]:
                ok = False
                break
        if ok:
            return r
    return -1


class MatchIndex:
    """Suffix automaton of ``source``: accepts exactly its substrings."""

    def __init__(self, source: Sequence):
        self.source = source
        self.n_symbols = source.alphabet.size
        self.next, self.link, self.length = _build_sam(source.data, self.n_symbols)
        for arr in (self.next, self.link, self.length):
            arr.flags.writeable = False

    @property
    def n_states(self) -> int:
        return int(self.length.shape[0])

    def _check(self, w: Sequence):
        if w.alphabet.size != self.n_symbols:
            raise AlphabetError(
                f"query alphabet size {w.alphabet.size} != index alphabet size {self.n_symbols}"
            )

    def contains(self, w: Sequence) -> bool:
        self._check(w)
        return _walk(self.next, w.data, 0, len(w)) == len(w)

    def longest_prefix_match(self, y: Sequence, cap: int | None = None, start: int = 0) -> int:
        self._check(y)
        if cap is None:
            cap = len(y) - start
        return int(_walk(self.next, y.data, start, cap))

    def cursor(self) -> "MatchCursor":
        return MatchCursor(self)

    def count_accepted(self, words: list[Sequence]) -> int:
        if not words:
            return 0
        for w in words:
            self._check(w)
        offsets = np.zeros(len(words) + 1, dtype=np.int64)
        np.cumsum([len(w) for w in words], out=offsets[1:])
        flat = np.concatenate([w.data for w in words])
        return int(_count_accepted(self.next, flat, offsets))

    def accepted_spans(self, y: Sequence, starts, ends) -> np.ndarray:
        """Boolean mask: does y[starts[j]:ends[j]] occur in the indexed sequence?"""
        self._check(y)
        starts = np.ascontiguousarray(starts, dtype=np.int64)
        ends = np.ascontiguousarray(ends, dtype=np.int64)
        return _accepted_spans(self.next, y.data, starts, ends)

    def __repr__(self):
        return f"MatchIndex(len={len(self.source)}, states={self.n_states})"


class MatchCursor:
    """Incremental left-to-right matcher: extend one symbol at a time."""

    def __init__(self, index: MatchIndex):
        self.index = index
        self.state = 0
        self.matched = 0

    def extend(self, symbol: int) -> bool:
        """Append ``symbol`` to the current match; False (and no change) if impossible."""
        t = int(self.index.next[self.state, symbol])
        if t == -1:
            return False
        self.state = t
        self.matched += 1
        return True

    def reset(self):
        self.state = 0
        self.matched = 0


def build_index(x: Sequence) -> MatchIndex:
    return MatchIndex(x)


def contains(idx: MatchIndex, w: Sequence) -> bool:
    return idx.contains(w)


def longest_prefix_match(idx: MatchIndex, y: Sequence, cap: int | None = None) -> int:
    """Largest l <= cap such that y[:l] occurs in the indexed sequence (0 if none)."""
    return idx.longest_prefix_match(y, cap)


def _scan_array(hay: np.ndarray, needle: np.ndarray, start: int = 0) -> int:
    if hay.dtype == np.uint8 and needle.dtype == np.uint8:
        return hay.tobytes().find(needle.tobytes(), start)
    return int(_find(hay, needle.astype(hay.dtype), start))


def waiting_time(x, a: Sequence, horizon: int | None = None) -> int:
    """Smallest r >= 1 with x[r-1 : r-1+len(a)] == a, scanning at most ``horizon`` symbols.

    ``x`` is a :class:`Sequence`, a 1-d array, or an iterable of array chunks
    (a stream).  Raises :class:`NotFound` when no match lies entirely within the
    first ``horizon`` symbols.
    """
    ell = len(a)
    if ell == 0:
        raise ValueError("waiting time is defined for words of length >= 1")
    needle = np.ascontiguousarray(a.data)
    if isinstance(x, Sequence) or isinstance(x, np.ndarray):
        hay = x.data if isinstance(x, Sequence) else x
        if isinstance(x, Sequence) and x.alphabet.size != a.alphabet.size:
            raise AlphabetError("alphabet mismatch between stream and word")
        if horizon is None:
            horizon = hay.shape[0]
        hay = np.ascontiguousarray(hay[:horizon])
        r = _scan_array(hay, needle)
        if r < 0:
            raise NotFound(horizon)
        return r + 1
    if horizon is None:
        raise ValueError("a horizon is required when scanning a stream")
    return _waiting_time_stream(iter(x), needle, horizon)


def _waiting_time_stream(chunks: Iterator[np.ndarray], needle: np.ndarray, horizon: int) -> int:
    ell = needle.shape[0]
    carry = needle[:0]
    offset = 0  # absolute 0-based position of carry[0]
    consumed = 0
    for chunk in chunks:
        if consumed >= horizon:
            break
        chunk = chunk[: horizon - consumed]
        consumed += chunk.shape[0]
        hay = np.concatenate([carry.astype(chunk.dtype), chunk])
        r = _scan_array(hay, needle)
        if r >= 0:
            return offset + r + 1
        keep = min(ell - 1, hay.shape[0])
        offset += hay.shape[0] - keep
        carry = hay[hay.shape[0] - keep:]
    raise NotFound(horizon)

