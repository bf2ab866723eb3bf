"""Sequential parsings of a target sequence y.

* Ziv-Merhav cross parsing of y against a reference x (the count c_N(y|x)).
* LZ78 incremental parsing of y alone.
* Probability-threshold parsing: shortest prefixes with P[word] <= theta.
* Block parsing: threshold parsing restarted on consecutive blocks of length
  floor(N**alpha), each block ending in a (possibly empty) buffer.

Word boundaries are stored as cumulative end offsets, so word ``j`` is
``y[ends[j-1]:ends[j]]`` with ``ends[-1] == len(y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import Sequence
from .errors import AlphabetError, SupportViolation
from .matcher import MatchIndex, _zm_cuts, build_index
from .sources import CylinderMeasure

__all__ = [
    "ZmParse",
    "Lz78Parse",
    "ThresholdParse",
    "Block",
    "BlockParse",
    "zm_parse",
    "lz78_parse",
    "threshold_parse",
    "block_parse",
    "block_length",
    "classify_blocks",
    "count_words_matched",
]

# slack on ln P[w] <= ln theta so that exact ties survive rounding of the running sum
THRESHOLD_RTOL = 1e-12


def _split(y: Sequence, ends: np.ndarray, start: int = 0) -> list[Sequence]:
    out = []
    prev = start
    for e in ends.tolist():
        out.append(y[prev:e])
        prev = e
    return out


@dataclass
class ZmParse:
    y: Sequence
    ends: np.ndarray
    singleton: np.ndarray
    final_exhausted: bool  # last word stopped at the end of y, not at a mismatch
    x_length: int

    @property
    def c(self) -> int:
        return int(self.ends.shape[0])

    @property
    def boundaries(self) -> list[int]:
        return self.ends.tolist()

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.ends, prepend=0)

    @property
    def words(self) -> list[Sequence]:
        return _split(self.y, self.ends)

    def flags(self) -> list[str]:
        out = ["singleton" if s else "match" for s in self.singleton.tolist()]
        if self.final_exhausted and out:
            out[-1] = "final"
        return out

    def to_json(self) -> dict:
        return {"c": self.c, "boundaries": self.boundaries, "flags": self.flags()}


def zm_parse(x: Sequence, y: Sequence, index: MatchIndex | None = None) -> ZmParse:
    """Greedy parsing of y into longest prefixes that occur as substrings of x.

    When not even the next single symbol occurs in x, a one-letter word is
    emitted and flagged as a singleton.  A prebuilt ``index`` of x may be passed.
    """
    if len(y) == 0:
        raise ValueError("cannot parse an empty sequence")
    if x.alphabet.size != y.alphabet.size:
        raise AlphabetError("x and y must share an alphabet")
    idx = index if index is not None else build_index(x)
    ends, singleton = _zm_cuts(idx.next, y.data)
    # a non-singleton last word can only have stopped because y ran out
    return ZmParse(y, ends, singleton, not bool(singleton[-1]), len(x))


@numba.njit(cache=True)
def _lz78_cuts(y, A):
    n = y.shape[0]
    child = np.full((n + 1, A), -1, dtype=np.int32)
    parent = np.full(n + 1, -1, dtype=np.int32)
    symbol = np.full(n + 1, -1, dtype=np.int32)
    ends = np.empty(n, dtype=np.int64)
    nodes = np.empty(n, dtype=np.int32)
    size = 1
    c = 0
    node = 0
    for i in range(n):
        b = y[i]
        t = child[node, b]
        if t == -1:
            child[node, b] = size
            parent[size] = node
            symbol[size] = b
            ends[c] = i + 1
            nodes[c] = size
            size += 1
            c += 1
            node = 0
        else:
            node = t
    trailing = node != 0
    if trailing:
        ends[c] = n
        nodes[c] = node
        c += 1
    return ends[:c].copy(), nodes[:c].copy(), parent[:size].copy(), symbol[:size].copy(), trailing


@dataclass
class Lz78Parse:
    """LZ78 phrases of y with the phrase trie.

    Trie node 0 is the empty phrase; node ``v`` spells the phrase of
    ``parent[v]`` followed by ``symbol[v]``.  ``nodes[j]`` is the trie node of
    phrase ``j``.
    """

    y: Sequence
    ends: np.ndarray
    nodes: np.ndarray
    parent: np.ndarray
    symbol: np.ndarray
    trailing_repeat: bool

    @property
    def count(self) -> int:
        return int(self.ends.shape[0])

    @property
    def boundaries(self) -> list[int]:
        return self.ends.tolist()

    @property
    def phrases(self) -> list[Sequence]:
        return _split(self.y, self.ends)

    def spell(self, node: int) -> list[int]:
        out = []
        while node > 0:
            out.append(int(self.symbol[node]))
            node = int(self.parent[node])
        return out[::-1]

    def flags(self) -> list[str]:
        out = ["new"] * self.count
        if self.trailing_repeat:
            out[-1] = "repeat"
        return out

    def to_json(self) -> dict:
        return {"c": self.count, "boundaries": self.boundaries, "flags": self.flags()}


def lz78_parse(y: Sequence) -> Lz78Parse:
    """Incremental parsing: each phrase is the shortest prefix not yet a phrase.

    If the input ends in the middle of an extension, the trailing (repeated)
    phrase is still counted.
    """
    if len(y) == 0:
        raise ValueError("cannot parse an empty sequence")
    ends, nodes, parent, symbol, trailing = _lz78_cuts(y.data, y.alphabet.size)
    return Lz78Parse(y, ends, nodes, parent, symbol, bool(trailing))


@dataclass
class ThresholdParse:
    y: Sequence
    ends: np.ndarray
    theta: float
    last_complete: bool
    start: int = 0

    @property
    def count(self) -> int:
        return int(self.ends.shape[0])

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.ends, prepend=self.start)

    @property
    def words(self) -> list[Sequence]:
        return _split(self.y, self.ends, self.start)

    @property
    def complete_words(self) -> list[Sequence]:
        words = self.words
        return words if self.last_complete else words[:-1]

    @property
    def boundaries(self) -> list[int]:
        return self.ends.tolist()

    def flags(self) -> list[str]:
        out = ["complete"] * self.count
        if out and not self.last_complete:
            out[-1] = "incomplete"
        return out

    def to_json(self) -> dict:
        return {"c": self.count, "boundaries": self.boundaries, "flags": self.flags(),
                "theta": self.theta}


def _cuts(y: Sequence, P: CylinderMeasure, start: int, stop: int, log_theta: float):
    if y.alphabet.size != P.alphabet.size:
        raise AlphabetError("sequence and measure alphabets differ")
    tol = THRESHOLD_RTOL * max(1.0, abs(log_theta))
    ends, complete, bad = P._threshold_kernel(y.data, start, stop, log_theta, tol)
    if bad >= 0:
        raise SupportViolation(int(bad) + 1)
    return ends, bool(complete)


def threshold_parse(y: Sequence, P: CylinderMeasure, theta: float | None = None, *,
                    log_theta: float | None = None) -> ThresholdParse:
    """Sequential shortest prefixes w of the remainder of y with P[w] <= theta.

    Comparisons are made in log space.  The final word may fall short of the
    threshold when y runs out; ``last_complete`` says whether it did.
    Positions in :class:`SupportViolation` are 1-based.
    """
    if log_theta is None:
        if theta is None or not 0.0 < theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")
        log_theta = math.log(theta)
    elif log_theta > 0:
        raise ValueError("log_theta must be <= 0")
    if theta is None:
        theta = math.exp(log_theta)
    ends, complete = _cuts(y, P, 0, len(y), log_theta)
    return ThresholdParse(y, ends, theta, complete)


def block_length(N: int, alpha: float) -> int:
    """Integer part of N**alpha (guarded against rounding just below an integer)."""
    return max(1, int(math.floor(N**alpha * (1 + 1e-12))))


@dataclass
class Block:
    start: int
    stop: int
    word_ends: np.ndarray  # absolute end offsets of the complete words
    buffer_start: int
    good: bool = True

    @property
    def d(self) -> int:
        return int(self.word_ends.shape[0])

    @property
    def buffer_length(self) -> int:
        return self.stop - self.buffer_start


@dataclass
class BlockParse:
    """Blocks stored as flat arrays; :attr:`blocks` gives per-block views.

    ``word_ends`` holds the absolute end offsets of all complete words and
    ``word_block`` the block each belongs to.  A word starts where the previous
    word of its block ended, or at the block start.
    """

    y: Sequence
    N: int
    eps: float
    alpha: float
    block_len: int
    log_theta: float
    word_ends: np.ndarray
    word_block: np.ndarray
    buffer_start: np.ndarray
    good: np.ndarray = field(default=None)

    @property
    def M(self) -> int:
        return int(self.buffer_start.shape[0])

    def block_start(self, s: int) -> int:
        return s * self.block_len

    def block_stop(self, s: int) -> int:
        return min((s + 1) * self.block_len, len(self.y))

    @property
    def word_starts(self) -> np.ndarray:
        starts = np.empty_like(self.word_ends)
        if starts.size:
            starts[0] = self.block_start(int(self.word_block[0]))
            starts[1:] = self.word_ends[:-1]
            first = np.flatnonzero(np.diff(self.word_block) != 0) + 1
            starts[first] = self.word_block[first] * self.block_len
        return starts

    @property
    def d(self) -> list[int]:
        return np.bincount(self.word_block, minlength=self.M).tolist()

    @property
    def c_tilde(self) -> int:
        return int(self.word_ends.shape[0])

    def _span(self, s: int):
        lo, hi = np.searchsorted(self.word_block, [s, s + 1])
        return int(lo), int(hi)

    @property
    def blocks(self) -> list[Block]:
        out = []
        for s in range(self.M):
            lo, hi = self._span(s)
            out.append(Block(self.block_start(s), self.block_stop(s), self.word_ends[lo:hi],
                             int(self.buffer_start[s]), bool(self.good[s])))
        return out

    def block_words(self, s: int) -> list[Sequence]:
        lo, hi = self._span(s)
        return _split(self.y, self.word_ends[lo:hi], self.block_start(s))

    def buffer(self, s: int) -> Sequence:
        return self.y[int(self.buffer_start[s]):self.block_stop(s)]

    def all_words(self) -> list[Sequence]:
        return [self.y[a:b] for a, b in zip(self.word_starts.tolist(), self.word_ends.tolist())]

    @property
    def labels(self) -> list[str]:
        return ["good" if g else "bad" for g in self.good.tolist()]

    def to_json(self) -> dict:
        bounds = []
        flags = []
        for b in self.blocks:
            bounds.extend(b.word_ends.tolist())
            flags.extend(["word"] * b.d)
            if b.buffer_length:
                bounds.append(b.stop)
                flags.append("buffer")
        return {
            "c": self.c_tilde,
            "boundaries": bounds,
            "flags": flags,
            "M": self.M,
            "block_length": self.block_len,
            "d": self.d,
            "labels": self.labels,
        }


def block_parse(y: Sequence, P: CylinderMeasure, N: int | None = None, eps: float = 0.1,
                alpha: float = 0.5) -> BlockParse:
    """Threshold parsing with theta = N**(-1-eps), restarted on each block of length floor(N**alpha).

    Leftover symbols of a block that cannot complete a word form its buffer.
    Blocks are labelled good when their complete words are pairwise distinct.
    """
    if N is None:
        N = len(y)
    if len(y) == 0:
        raise ValueError("cannot parse an empty sequence")
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if y.alphabet.size != P.alphabet.size:
        raise AlphabetError("sequence and measure alphabets differ")
    L = block_length(N, alpha)
    log_theta = -(1.0 + eps) * math.log(N)
    tol = THRESHOLD_RTOL * max(1.0, abs(log_theta))
    ends, owner, buf, bad = P._block_kernel(y.data, L, log_theta, tol)
    if bad >= 0:
        raise SupportViolation(int(bad) + 1)
    bp = BlockParse(y, N, eps, alpha, L, log_theta, ends, owner, buf)
    classify_blocks(bp)
    return bp


def classify_blocks(bp: BlockParse) -> tuple[list[int], list[int]]:
    """Split block indices into (good, bad); stores the labels on ``bp``."""
    good = np.ones(bp.M, dtype=bool)
    data = bp.y.data
    seen: dict[int, set] = {}
    for a, b, s in zip(bp.word_starts.tolist(), bp.word_ends.tolist(), bp.word_block.tolist()):
        if not good[s]:
            continue
        key = data[a:b].tobytes()
        bucket = seen.setdefault(s, set())
        if key in bucket:
            good[s] = False
        bucket.add(key)
    bp.good = good
    idx = np.arange(bp.M)
    return idx[good].tolist(), idx[~good].tolist()


def count_words_matched(words: list[Sequence], idx: MatchIndex) -> int:
    """Number of words (counted with multiplicity) that occur in the indexed sequence."""
    return idx.count_accepted(words)
