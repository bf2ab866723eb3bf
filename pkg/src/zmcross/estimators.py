"""Empirical entropy estimators (nats).

* Ziv-Merhav cross entropy  Q_N = c_N(y|x) ln N / N, computed either from the
  parse or from clamped longest-match lengths.
* Wyner-Ziv waiting time  ln W_l / l.
* LZ78 entropy  c ln c / N  (or c (ln c + ln #A) / N as a variant).
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

from .core import RngStream, Sequence
from .errors import AlphabetError
from .matcher import MatchIndex, build_index, waiting_time
from .parsers import lz78_parse, zm_parse
from .sources import CylinderMeasure

__all__ = [
    "EstimateRecord",
    "zm_estimate",
    "zm_estimate_via_matches",
    "match_lengths",
    "wz_estimate",
    "lz78_entropy_estimate",
    "zm_relative_estimate",
]


@dataclass
class EstimateRecord:
    N: int
    c: int
    q_hat: float
    h_hat: float | None = None
    h_r_hat: float | None = None
    lz78_count: int | None = None
    seeds: tuple | None = None
    wall_time: float | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        if self.seeds is not None:
            out["seeds"] = list(self.seeds)
        return out


def _qhat(c: int, N: int) -> float:
    return c * math.log(N) / N


def _check(x: Sequence, y: Sequence):
    if len(y) < 2:
        raise ValueError("estimators need N = len(y) >= 2")
    if x.alphabet.size != y.alphabet.size:
        raise AlphabetError("x and y must share an alphabet")


def zm_estimate(x: Sequence, y: Sequence, index: MatchIndex | None = None) -> EstimateRecord:
    _check(x, y)
    t0 = time.perf_counter()
    p = zm_parse(x, y, index)
    N = len(y)
    return EstimateRecord(N, p.c, _qhat(p.c, N), wall_time=time.perf_counter() - t0)


def match_lengths(x: Sequence, y: Sequence, index: MatchIndex | None = None) -> list[int]:
    """Word lengths min(max(1, longest match of the remaining y in x), N - L)."""
    idx = index if index is not None else build_index(x)
    N = len(y)
    L = 0
    out = []
    while L < N:
        lam = max(1, idx.longest_prefix_match(y, start=L))
        ell = min(lam, N - L)
        out.append(ell)
        L += ell
    return out


def zm_estimate_via_matches(x: Sequence, y: Sequence, index: MatchIndex | None = None) -> EstimateRecord:
    """Same count as :func:`zm_estimate`, rebuilt from longest-match lengths."""
    _check(x, y)
    t0 = time.perf_counter()
    c = len(match_lengths(x, y, index))
    N = len(y)
    return EstimateRecord(N, c, _qhat(c, N), wall_time=time.perf_counter() - t0)


def wz_estimate(x, y: Sequence, ell: int, horizon: int | None = None,
                rng: RngStream | None = None, chunk: int = 1 << 20) -> float:
    """ln W_ell(y, x) / ell.

    ``x`` may be a sequence, an iterable of chunks, or a measure (in which case
    a stream is drawn from it with ``rng``).  :class:`NotFound` propagates.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if len(y) < ell:
        raise ValueError("y is shorter than ell")
    if isinstance(x, CylinderMeasure):
        if rng is None:
            raise ValueError("an RngStream is required to stream from a measure")
        if horizon is None:
            raise ValueError("a horizon is required when streaming")
        x = x.stream(rng, chunk=min(chunk, horizon))
    w = waiting_time(x, y[:ell], horizon)
    return math.log(w) / ell


def lz78_entropy_estimate(y: Sequence, with_alphabet: bool = False) -> float:
    """c ln c / N with c the LZ78 phrase count; ``with_alphabet`` uses c (ln c + ln #A) / N."""
    N = len(y)
    if N < 2:
        raise ValueError("estimators need N >= 2")
    c = lz78_parse(y).count
    extra = math.log(y.alphabet.size) if with_alphabet else 0.0
    return c * (math.log(c) + extra) / N


def zm_relative_estimate(x: Sequence, y: Sequence, with_alphabet: bool = False,
                         index: MatchIndex | None = None) -> EstimateRecord:
    """Q_N minus the LZ78 entropy estimate of y; negative values are kept."""
    rec = zm_estimate(x, y, index)
    t0 = time.perf_counter()
    lz = lz78_parse(y)
    extra = math.log(y.alphabet.size) if with_alphabet else 0.0
    rec.lz78_count = lz.count
    rec.h_hat = lz.count * (math.log(lz.count) + extra) / rec.N
    rec.h_r_hat = rec.q_hat - rec.h_hat
    rec.wall_time += time.perf_counter() - t0
    return rec
