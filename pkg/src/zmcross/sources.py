"""Exact, sampleable source measures.

Every model here implements the :class:`CylinderMeasure` contract: natural-log
cylinder probabilities (``-inf`` for zero mass), support tests, exact
enumeration of small word lengths, and deterministic sampling from an
:class:`~zmcross.core.RngStream`.

Order-k Markov chains are stored as order-1 chains on the block alphabet
A^k.  A k-word ``w_1..w_k`` has state code ``sum(w_i * A**(k-i))`` (oldest
symbol most significant), which is also the row order of ``transitions`` in
the JSON schema.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Iterator

import numba
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import Alphabet, RngStream, Sequence, as_sequence
from .errors import AlphabetError, BudgetExceeded, ModelError, SupportViolation

__all__ = [
    "CylinderMeasure",
    "MarkovModel",
    "HmmModel",
    "SupportTable",
    "stationary_distribution",
    "sample",
    "log_cylinder",
    "in_support",
    "lump",
    "enumerate_support",
    "load_model",
    "model_from_json",
    "save_model",
    "ad_counterexample",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 2**22
ROW_TOL = 1e-9
DENSE_LIMIT = 512
NEG_INF = -math.inf


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _check_stochastic(M, name):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ModelError(f"{name} must be a matrix")
    if not np.all(np.isfinite(M)) or np.any(M < 0):
        raise ModelError(f"{name} has negative or non-finite entries")
    sums = M.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL)
    if bad.size:
        raise ModelError(f"row {int(bad[0])} of {name} sums to {sums[bad[0]]!r}, not 1")
    return M / sums[:, None]


def stationary_distribution(P, *, allow_transient: bool = False) -> np.ndarray:
    """Invariant probability row vector of a row-stochastic matrix.

    With ``allow_transient`` the chain may have transient states as long as it
    has a single closed communicating class; the result vanishes off that
    class.  Otherwise any reducibility is an error.
    """
    P = _check_stochastic(P, "P")
    n = P.shape[0]
    if P.shape[1] != n:
        raise ModelError("transition matrix must be square")
    n_comp, labels = connected_components(csr_matrix(P > 0), directed=True, connection="strong")
    if n_comp == 1:
        members = np.arange(n)
    else:
        if not allow_transient:
            raise ModelError(f"chain is reducible ({n_comp} communicating classes)")
        closed = []
        for c in range(n_comp):
            idx = np.flatnonzero(labels == c)
            outside = np.ones(n, dtype=bool)
            outside[idx] = False
            if not np.any(P[np.ix_(idx, outside)] > 0):
                closed.append(idx)
        if len(closed) != 1:
            raise ModelError(f"chain is reducible ({len(closed)} closed classes)")
        members = closed[0]

    if np.all(P == P[0]):
        # rank one: every row is already invariant
        return P[0].copy()

    sub = P[np.ix_(members, members)]
    m = members.size
    if m <= DENSE_LIMIT:
        A = sub.T - np.eye(m)
        A[-1, :] = 1.0
        b = np.zeros(m)
        b[-1] = 1.0
        pi_sub = np.linalg.solve(A, b)
    else:
        lazy = 0.5 * (sub + np.eye(m))
        pi_sub = np.full(m, 1.0 / m)
        for _ in range(1_000_000):
            new = pi_sub @ lazy
            if np.max(np.abs(new - pi_sub)) < 1e-15:
                pi_sub = new
                break
            pi_sub = new
    pi_sub = np.clip(pi_sub, 0.0, None)
    pi_sub /= pi_sub.sum()
    pi = np.zeros(n)
    pi[members] = pi_sub
    resid = np.max(np.abs(pi @ P - pi))
    if resid > 1e-10:
        raise ModelError(f"stationary solve did not converge (residual {resid:.3g})")
    return pi


def _cumulative(rows):
    """Inverse-CDF tables with the last positive entry pinned to exactly 1."""
    cum = np.cumsum(rows, axis=-1)
    cum = np.atleast_2d(cum).copy()
    rows2 = np.atleast_2d(rows)
    for i in range(cum.shape[0]):
        pos = np.flatnonzero(rows2[i] > 0)
        if pos.size:
            cum[i, pos[-1]:] = 1.0
    return cum


@dataclass
class SupportTable:
    """Words of a fixed length with positive probability, and their log-probs."""

    alphabet: Alphabet
    words: np.ndarray  # (count, n) symbol matrix, lexicographic order
    logp: np.ndarray

    def __len__(self):
        return int(self.logp.shape[0])

    def __iter__(self):
        for row, lp in zip(self.words, self.logp):
            yield Sequence(row, self.alphabet, validate=False), float(lp)


def _word_matrix(n: int, A: int) -> np.ndarray:
    codes = np.arange(A**n, dtype=np.int64)
    powers = A ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (codes[:, None] // powers[None, :]) % A


def _code(data, A) -> int:
    c = 0
    for s in data:
        c = c * A + int(s)
    return c


class CylinderMeasure(ABC):
    """Stationary measure with exact log-cylinder scoring and sampling."""

    alphabet: Alphabet

    @abstractmethod
    def prefix_log_probs(self, a: Sequence) -> np.ndarray:
        """Array whose entry j-1 is ln P[a_1^j]; -inf once the prefix leaves the support."""

    @abstractmethod
    def log_prob_table(self, n: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
        """ln P[w] for all A**n words w in lexicographic code order."""

    @abstractmethod
    def sampler(self, rng: RngStream) -> "_Sampler":
        ...

    @abstractmethod
    def _threshold_kernel(self, data, start, stop, log_theta, tol):
        """Numba-backed shortest-prefix-under-threshold cuts of data[start:stop]."""

    @abstractmethod
    def _block_kernel(self, data, L, log_theta, tol):
        """Threshold cuts restarted on every block of length L.

        Returns (complete word ends, block index of each word, buffer start of
        each block, 0-based offending position or -1).
        """

    @abstractmethod
    def to_json(self) -> dict:
        ...

    def _coerce(self, a) -> Sequence:
        a = as_sequence(a, self.alphabet)
        if a.alphabet.size != self.alphabet.size:
            raise AlphabetError("word alphabet does not match the model alphabet")
        return a

    def log_cylinder(self, a) -> float:
        a = self._coerce(a)
        if len(a) == 0:
            return 0.0
        return float(self.prefix_log_probs(a)[-1])

    def in_support(self, a) -> bool:
        return self.log_cylinder(a) > NEG_INF

    def sample(self, n: int, rng: RngStream) -> Sequence:
        if n < 0:
            raise ValueError("sample length must be nonnegative")
        return Sequence(self.sampler(rng).draw(n), self.alphabet, validate=False)

    def stream(self, rng: RngStream, chunk: int = 1 << 20) -> Iterator[np.ndarray]:
        """Endless iterator of sample chunks; their concatenation equals ``sample``."""
        s = self.sampler(rng)
        while True:
            yield s.draw(chunk)

    def enumerate_support(self, n: int, budget: int = DEFAULT_BUDGET) -> SupportTable:
        A = self.alphabet.size
        if A**n > budget:
            raise BudgetExceeded(f"{A}**{n} words exceed the enumeration budget {budget}; use a smaller n")
        table = self.log_prob_table(n, budget)
        keep = np.flatnonzero(table > NEG_INF)
        words = _word_matrix(n, A)[keep]
        return SupportTable(self.alphabet, words, table[keep])


class _Sampler:
    def draw(self, n: int) -> np.ndarray:
        raise NotImplementedError


# ---------------------------------------------------------------- Markov ---


@numba.njit(cache=True)
def _markov_prefix(y, A, k, logmarg, offsets, logT):
    n = y.shape[0]
    out = np.empty(n)
    Ak = A**k
    code = 0
    lp = 0.0
    for i in range(n):
        b = y[i]
        if i < k:
            code = code * A + b
            lp = logmarg[offsets[i + 1] + code]
        else:
            lp += logT[code, b]
            code = (code * A + b) % Ak
        out[i] = lp
    return out


@numba.njit(cache=True)
def _markov_threshold(y, start, stop, A, k, logmarg, offsets, logT, log_theta, tol):
    ends = np.empty(max(stop - start, 1), dtype=np.int64)
    Ak = A**k
    c = 0
    i = start
    complete = True
    while i < stop:
        code = 0
        lp = 0.0
        j = i
        hit = False
        while j < stop:
            b = y[j]
            L = j - i
            if L < k:
                code = code * A + b
                lp = logmarg[offsets[L + 1] + code]
            else:
                lp += logT[code, b]
                code = (code * A + b) % Ak
            if lp == -np.inf:
                return ends[:c].copy(), False, j
            j += 1
            if lp <= log_theta + tol:
                hit = True
                break
        ends[c] = j
        c += 1
        complete = hit
        i = j
    return ends[:c].copy(), complete, -1


@numba.njit(cache=True)
def _markov_blocks(y, L, A, k, logmarg, offsets, logT, log_theta, tol):
    n = y.shape[0]
    M = (n + L - 1) // L
    word_ends = np.empty(n, dtype=np.int64)
    word_block = np.empty(n, dtype=np.int64)
    buffer_start = np.empty(M, dtype=np.int64)
    c = 0
    for s in range(M):
        start = s * L
        stop = min(start + L, n)
        ends, complete, bad = _markov_threshold(y, start, stop, A, k, logmarg, offsets, logT,
                                                log_theta, tol)
        if bad >= 0:
            return word_ends[:c].copy(), word_block[:c].copy(), buffer_start, bad
        d = ends.shape[0] if complete else ends.shape[0] - 1
        for j in range(d):
            word_ends[c] = ends[j]
            word_block[c] = s
            c += 1
        buffer_start[s] = ends[d - 1] if d > 0 else start
    return word_ends[:c].copy(), word_block[:c].copy(), buffer_start, -1


@numba.njit(cache=True)
def _draw_symbol(cum_row, u):
    b = 0
    while u >= cum_row[b]:
        b += 1
    return b


@numba.njit(cache=True)
def _markov_walk(u, code, A, Ak, cumT, out):
    for i in range(u.shape[0]):
        b = _draw_symbol(cumT[code], u[i])
        out[i] = b
        code = (code * A + b) % Ak
    return code


class _MarkovSampler(_Sampler):
    def __init__(self, model: "MarkovModel", rng: RngStream):
        self.m = model
        self.rng = rng
        self.code = -1
        self.pending = np.empty(0, dtype=model.alphabet.dtype)

    def draw(self, n):
        m = self.m
        out = np.empty(n, dtype=m.alphabet.dtype)
        filled = 0
        if self.code < 0 and n > 0:
            u0 = self.rng.uniform(1)[0]
            self.code = int(_draw_symbol(m._cum_pi, u0))
            self.pending = _word_matrix(m.order, m.alphabet.size)[self.code].astype(out.dtype)
        if self.pending.size:
            take = min(n, self.pending.size)
            out[:take] = self.pending[:take]
            self.pending = self.pending[take:]
            filled = take
        rest = n - filled
        if rest:
            u = self.rng.uniform(rest)
            self.code = int(_markov_walk(u, self.code, m.alphabet.size, m.n_states, m._cumT, out[filled:]))
        return out


class MarkovModel(CylinderMeasure):
    """Stationary order-k Markov measure.

    ``transitions`` has one row per k-word state (``A**k`` rows, ``A``
    columns).  A user-supplied ``pi`` over the k-word states is accepted only
    if it is stationary to 1e-10; otherwise it is computed.
    """

    def __init__(self, alphabet: Alphabet, transitions, order: int = 1, pi=None):
        if order < 1:
            raise ModelError("Markov order must be >= 1")
        A = alphabet.size
        T = _check_stochastic(transitions, "transitions")
        if T.shape != (A**order, A):
            raise ModelError(f"transitions must have shape {(A**order, A)}, got {T.shape}")
        self.alphabet = alphabet
        self.order = int(order)
        self.transitions = T
        self.n_states = A**order
        lifted = self.state_matrix()
        if pi is None:
            pi = stationary_distribution(lifted, allow_transient=True)
        else:
            pi = np.array(pi, dtype=np.float64)
            if pi.shape != (self.n_states,) or np.any(pi < 0) or abs(pi.sum() - 1) > ROW_TOL:
                raise ModelError("pi must be a probability vector over the k-word states")
            resid = np.max(np.abs(pi @ lifted - pi))
            if resid > 1e-10:
                raise ModelError(f"supplied pi is not stationary (residual {resid:.3g})")
            stationary_distribution(lifted, allow_transient=True)  # irreducibility check
        self.pi = pi
        for arr in (self.transitions, self.pi):
            arr.flags.writeable = False
        self.log_transitions = _log(T)
        # marginal tables for word lengths 1..k, concatenated
        tables = []
        for j in range(1, self.order + 1):
            tables.append(pi.reshape(A**j, A ** (self.order - j)).sum(axis=1))
        tables[-1] = pi
        self.offsets = np.zeros(self.order + 2, dtype=np.int64)
        self.offsets[2:] = np.cumsum([t.size for t in tables])
        self.log_marginals = _log(np.concatenate(tables))
        self._cum_pi = _cumulative(pi)[0]
        self._cumT = _cumulative(T)

    # constructors -----------------------------------------------------
    @classmethod
    def iid(cls, probs, alphabet: Alphabet | None = None) -> "MarkovModel":
        probs = np.asarray(probs, dtype=np.float64)
        if alphabet is None:
            alphabet = Alphabet.digits(len(probs)) if len(probs) <= 10 else Alphabet(len(probs))
        return cls(alphabet, np.tile(probs, (len(probs), 1)), order=1)

    @classmethod
    def bernoulli(cls, p: float) -> "MarkovModel":
        """Binary iid measure with P[1] = p."""
        return cls.iid([1.0 - p, p], Alphabet.binary())

    def state_matrix(self) -> np.ndarray:
        """Order-1 transition matrix on the k-word states."""
        A, Ak = self.alphabet.size, self.n_states
        S = np.zeros((Ak, Ak))
        for w in range(Ak):
            for b in range(A):
                S[w, (w * A + b) % Ak] += self.transitions[w, b]
        return S

    def with_order(self, order: int) -> "MarkovModel":
        """The same measure written as a chain of a higher order."""
        if order < self.order:
            raise ModelError("cannot lower the order of a Markov model")
        if order == self.order:
            return self
        A = self.alphabet.size
        words = _word_matrix(order, A)
        ctx = np.zeros(words.shape[0], dtype=np.int64)
        for col in words[:, order - self.order:].T:
            ctx = ctx * A + col
        T = self.transitions[ctx]
        pi = np.exp(self.log_prob_table(order))
        return MarkovModel(self.alphabet, T, order=order, pi=pi)

    # CylinderMeasure --------------------------------------------------
    def prefix_log_probs(self, a) -> np.ndarray:
        a = self._coerce(a)
        return _markov_prefix(a.data, self.alphabet.size, self.order, self.log_marginals,
                              self.offsets, self.log_transitions)

    def marginal_log_table(self, j: int) -> np.ndarray:
        """ln P[w] for all words of length j <= k (stored, not recomputed)."""
        return self.log_marginals[self.offsets[j]:self.offsets[j + 1]]

    def log_prob_table(self, n: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
        A, k = self.alphabet.size, self.order
        if A**n > budget:
            raise BudgetExceeded(f"{A}**{n} words exceed the enumeration budget {budget}")
        if n == 0:
            return np.zeros(1)
        if n <= k:
            return self.marginal_log_table(n).copy()
        table = self.marginal_log_table(k).copy()
        for _ in range(n - k):
            ctx = np.arange(table.size) % self.n_states
            table = (table[:, None] + self.log_transitions[ctx]).ravel()
        return table

    def sampler(self, rng):
        return _MarkovSampler(self, rng)

    def _threshold_kernel(self, data, start, stop, log_theta, tol):
        return _markov_threshold(data, start, stop, self.alphabet.size, self.order,
                                 self.log_marginals, self.offsets, self.log_transitions,
                                 log_theta, tol)

    def _block_kernel(self, data, L, log_theta, tol):
        return _markov_blocks(data, L, self.alphabet.size, self.order, self.log_marginals,
                              self.offsets, self.log_transitions, log_theta, tol)

    def to_json(self) -> dict:
        return {
            "type": "markov",
            "alphabet": self.alphabet.to_json(),
            "order": self.order,
            "transitions": self.transitions.tolist(),
            "pi": self.pi.tolist(),
        }

    def __repr__(self):
        return f"MarkovModel(alphabet={self.alphabet.size}, order={self.order})"


# ------------------------------------------------------------------- HMM ---


@numba.njit(cache=True)
def _hmm_prefix(y, pi, P, R):
    n = y.shape[0]
    S = pi.shape[0]
    out = np.full(n, -np.inf)
    if n == 0:
        return out
    alpha = pi * R[:, y[0]]
    s = alpha.sum()
    if s == 0.0:
        return out
    lp = np.log(s)
    alpha = alpha / s
    out[0] = lp
    for i in range(1, n):
        new = np.zeros(S)
        for u in range(S):
            au = alpha[u]
            if au != 0.0:
                for v in range(S):
                    new[v] += au * P[u, v]
        b = y[i]
        s = 0.0
        for v in range(S):
            new[v] *= R[v, b]
            s += new[v]
        if s == 0.0:
            return out
        lp += np.log(s)
        alpha = new / s
        out[i] = lp
    return out


@numba.njit(cache=True)
def _hmm_threshold(y, start, stop, pi, P, R, log_theta, tol):
    ends = np.empty(max(stop - start, 1), dtype=np.int64)
    S = pi.shape[0]
    c = 0
    i = start
    complete = True
    alpha = np.empty(S)
    new = np.empty(S)
    while i < stop:
        j = i
        lp = 0.0
        hit = False
        while j < stop:
            b = y[j]
            if j == i:
                for v in range(S):
                    new[v] = pi[v] * R[v, b]
            else:
                for v in range(S):
                    new[v] = 0.0
                for u in range(S):
                    au = alpha[u]
                    if au != 0.0:
                        for v in range(S):
                            new[v] += au * P[u, v]
                for v in range(S):
                    new[v] *= R[v, b]
            s = 0.0
            for v in range(S):
                s += new[v]
            if s == 0.0:
                return ends[:c].copy(), False, j
            lp += np.log(s)
            for v in range(S):
                alpha[v] = new[v] / s
            j += 1
            if lp <= log_theta + tol:
                hit = True
                break
        ends[c] = j
        c += 1
        complete = hit
        i = j
    return ends[:c].copy(), complete, -1


@numba.njit(cache=True)
def _hmm_blocks(y, L, pi, P, R, log_theta, tol):
    n = y.shape[0]
    M = (n + L - 1) // L
    word_ends = np.empty(n, dtype=np.int64)
    word_block = np.empty(n, dtype=np.int64)
    buffer_start = np.empty(M, dtype=np.int64)
    c = 0
    for s in range(M):
        start = s * L
        stop = min(start + L, n)
        ends, complete, bad = _hmm_threshold(y, start, stop, pi, P, R, log_theta, tol)
        if bad >= 0:
            return word_ends[:c].copy(), word_block[:c].copy(), buffer_start, bad
        d = ends.shape[0] if complete else ends.shape[0] - 1
        for j in range(d):
            word_ends[c] = ends[j]
            word_block[c] = s
            c += 1
        buffer_start[s] = ends[d - 1] if d > 0 else start
    return word_ends[:c].copy(), word_block[:c].copy(), buffer_start, -1


@numba.njit(cache=True)
def _hmm_walk(u, state, cumP, cumR, out):
    for i in range(out.shape[0]):
        state = _draw_symbol(cumP[state], u[i, 0])
        out[i] = _draw_symbol(cumR[state], u[i, 1])
    return state


class _HmmSampler(_Sampler):
    def __init__(self, model: "HmmModel", rng: RngStream):
        self.m = model
        self.rng = rng
        self.state = -1

    def draw(self, n):
        m = self.m
        out = np.empty(n, dtype=m.alphabet.dtype)
        if n == 0:
            return out
        u = self.rng.uniform(2 * n).reshape(n, 2)
        if self.state < 0:
            self.state = int(_draw_symbol(m._cum_pi, u[0, 0]))
            out[0] = _draw_symbol(m._cumR[self.state], u[0, 1])
            if n > 1:
                self.state = int(_hmm_walk(u[1:], self.state, m._cumP, m._cumR, out[1:]))
            return out
        self.state = int(_hmm_walk(u, self.state, m._cumP, m._cumR, out))
        return out


class HmmModel(CylinderMeasure):
    """Stationary hidden-Markov measure given by (pi, P, R).

    ``P`` is the hidden transition matrix and ``R[s, a]`` the probability of
    emitting ``a`` from hidden state ``s``.
    """

    def __init__(self, alphabet: Alphabet, P, R, pi=None):
        P = _check_stochastic(P, "P")
        R = _check_stochastic(R, "R")
        S = P.shape[0]
        if P.shape != (S, S):
            raise ModelError("P must be square")
        if R.shape != (S, alphabet.size):
            raise ModelError(f"R must have shape {(S, alphabet.size)}, got {R.shape}")
        computed = stationary_distribution(P)
        if pi is None:
            pi = computed
        else:
            pi = np.array(pi, dtype=np.float64)
            if pi.shape != (S,) or np.max(np.abs(pi @ P - pi)) > 1e-10 or abs(pi.sum() - 1) > ROW_TOL:
                raise ModelError("supplied pi is not a stationary probability vector for P")
        self.alphabet = alphabet
        self.P, self.R, self.pi = P, R, pi
        for arr in (P, R, pi):
            arr.flags.writeable = False
        self.hidden_size = S
        self._cum_pi = _cumulative(pi)[0]
        self._cumP = _cumulative(P)
        self._cumR = _cumulative(R)

    def prefix_log_probs(self, a) -> np.ndarray:
        a = self._coerce(a)
        return _hmm_prefix(a.data, self.pi, self.P, self.R)

    def log_prob_table(self, n: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
        A = self.alphabet.size
        if A**n > budget:
            raise BudgetExceeded(f"{A}**{n} words exceed the enumeration budget {budget}")
        if n == 0:
            return np.zeros(1)
        alpha = self.pi[None, :] * self.R.T  # (A, S)
        scale = alpha.sum(axis=1)
        logs = _log(scale)
        with np.errstate(invalid="ignore", divide="ignore"):
            alpha = np.where(scale[:, None] > 0, alpha / scale[:, None], 0.0)
        for _ in range(n - 1):
            moved = alpha @ self.P  # (W, S)
            alpha = (moved[:, None, :] * self.R.T[None, :, :]).reshape(-1, self.hidden_size)
            scale = alpha.sum(axis=1)
            logs = (logs[:, None] + _log(scale).reshape(-1, A)).ravel()
            with np.errstate(invalid="ignore", divide="ignore"):
                alpha = np.where(scale[:, None] > 0, alpha / scale[:, None], 0.0)
        return logs

    def sampler(self, rng):
        return _HmmSampler(self, rng)

    def _threshold_kernel(self, data, start, stop, log_theta, tol):
        return _hmm_threshold(data, start, stop, self.pi, self.P, self.R, log_theta, tol)

    def _block_kernel(self, data, L, log_theta, tol):
        return _hmm_blocks(data, L, self.pi, self.P, self.R, log_theta, tol)

    def to_json(self) -> dict:
        return {
            "type": "hmm",
            "alphabet": self.alphabet.to_json(),
            "hidden_size": self.hidden_size,
            "P": self.P.tolist(),
            "R": self.R.tolist(),
            "pi": self.pi.tolist(),
        }

    def __repr__(self):
        return f"HmmModel(alphabet={self.alphabet.size}, hidden={self.hidden_size})"


def lump(hidden: MarkovModel, f, alphabet: Alphabet | None = None) -> HmmModel:
    """Function-Markov measure: observe ``f(s)`` of an order-1 hidden chain."""
    if hidden.order != 1:
        raise ModelError("lumping needs an order-1 hidden chain")
    f = [int(v) for v in f]
    S = hidden.n_states
    if len(f) != S:
        raise ModelError(f"lumping map has {len(f)} entries for {S} hidden states")
    if alphabet is None:
        size = max(f) + 1
        alphabet = Alphabet.digits(size) if size <= 10 else Alphabet(size)
    R = np.zeros((S, alphabet.size))
    R[np.arange(S), f] = 1.0
    return HmmModel(alphabet, hidden.transitions, R, pi=hidden.pi)


# ------------------------------------------------------- functional API ---


def sample(model: CylinderMeasure, n: int, rng: RngStream) -> Sequence:
    return model.sample(n, rng)


def log_cylinder(model: CylinderMeasure, a) -> float:
    return model.log_cylinder(a)


def in_support(model: CylinderMeasure, a) -> bool:
    return model.in_support(a)


def enumerate_support(model: CylinderMeasure, n: int, budget: int = DEFAULT_BUDGET) -> SupportTable:
    return model.enumerate_support(n, budget)


RESERVED_TYPES = {"g-measure", "equilibrium"}


def model_from_json(obj: dict) -> CylinderMeasure:
    kind = obj.get("type")
    if kind in RESERVED_TYPES:
        raise ModelError(f"model type {kind!r} is reserved but has no sampler")
    alphabet = Alphabet.from_json(obj["alphabet"])
    if kind == "markov":
        return MarkovModel(alphabet, obj["transitions"], order=int(obj.get("order", 1)),
                           pi=obj.get("pi"))
    if kind == "hmm":
        model = HmmModel(alphabet, obj["P"], obj["R"], pi=obj.get("pi"))
        if "hidden_size" in obj and int(obj["hidden_size"]) != model.hidden_size:
            raise ModelError("hidden_size does not match the shape of P")
        return model
    raise ModelError(f"unknown model type {kind!r}")


def load_model(path: str | PathLike) -> CylinderMeasure:
    return model_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def save_model(model: CylinderMeasure, path: str | PathLike) -> None:
    Path(path).write_text(json.dumps(model.to_json(), indent=2) + "\n", encoding="utf-8")


def ad_counterexample() -> HmmModel:
    """Illustrative 4-state lumped chain on which the one-letter extension bound fails.

    Two hidden states emit letter 0.  Only the one that leaves quickly can be
    followed by letter 1, and after a long run of 0s the posterior sits on the
    slow one, so a following 1 becomes exponentially unlikely in the run length.
    This is a hand-built example, not a reconstruction of any published chain.
    """
    hidden = MarkovModel(
        Alphabet.digits(4),
        [
            [0.9, 0.0, 0.0, 0.1],
            [0.0, 0.5, 0.5, 0.0],
            [0.5, 0.5, 0.0, 0.0],
            [0.5, 0.5, 0.0, 0.0],
        ],
    )
    return lump(hidden, [0, 0, 1, 2], Alphabet.digits(3))
