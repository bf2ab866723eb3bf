"""Slow, obviously-correct reference implementations used only by the tests."""

import itertools
import math


def substrings(x):
    """Set of all substrings (as tuples) of a symbol list, including the empty word."""
    x = tuple(x)
    out = {()}
    for i in range(len(x)):
        for j in range(i + 1, len(x) + 1):
            out.add(x[i:j])
    return out


def accepted_set(idx):
    """Every word spelled by a path from the root of an automaton's transition table."""
    out = set()
    stack = [(0, ())]
    while stack:
        state, word = stack.pop()
        out.add(word)
        for a in range(idx.n_symbols):
            t = int(idx.next[state, a])
            if t != -1:
                stack.append((t, word + (a,)))
    return out


def occurs(x, w):
    x, w = list(x), list(w)
    if not w:
        return True
    return any(x[i:i + len(w)] == w for i in range(len(x) - len(w) + 1))


def zm_parse_naive(x, y):
    """Quadratic greedy parser: longest prefix of the rest of y that occurs in x, else one letter."""
    x, y = list(x), list(y)
    subs = substrings(x)
    words, i = [], 0
    while i < len(y):
        best = 0
        for j in range(i + 1, len(y) + 1):
            if tuple(y[i:j]) in subs:
                best = j - i
        ell = max(best, 1)
        words.append(y[i:i + ell])
        i += ell
    return words


def lz78_naive(y):
    seen, words, cur = set(), [], ()
    for s in y:
        cur = cur + (s,)
        if cur not in seen:
            seen.add(cur)
            words.append(cur)
            cur = ()
    if cur:
        words.append(cur)
    return words


def waiting_time_naive(x, a):
    x, a = list(x), list(a)
    for r in range(len(x) - len(a) + 1):
        if x[r:r + len(a)] == a:
            return r + 1
    return None


def hmm_prob_bruteforce(pi, P, R, word):
    """Sum over every hidden path of pi_{s1} R_{s1,a1} P_{s1,s2} R_{s2,a2} ..."""
    S = len(pi)
    total = 0.0
    for path in itertools.product(range(S), repeat=len(word)):
        p = pi[path[0]] * R[path[0]][word[0]]
        for t in range(1, len(word)):
            p *= P[path[t - 1]][path[t]] * R[path[t]][word[t]]
        total += p
    return total


def markov_prob_direct(pi, T, word):
    """Order-1 chain probability by the textbook product."""
    p = pi[word[0]]
    for a, b in zip(word, word[1:]):
        p *= T[a][b]
    return p


def cross_entropy_enumerated(q_prob, p_prob, alphabet_size, n):
    """-(1/n) sum_a Q[a] ln P[a] using per-word probability callables."""
    total = 0.0
    for w in itertools.product(range(alphabet_size), repeat=n):
        q = q_prob(w)
        if q == 0:
            continue
        p = p_prob(w)
        if p == 0:
            return math.inf
        total += q * math.log(p)
    return -total / n


def random_stochastic(rng, rows, cols, zero_prob=0.0):
    M = rng.uniform(0.05, 1.0, size=(rows, cols))
    if zero_prob:
        M[rng.uniform(size=M.shape) < zero_prob] = 0.0
        for r in range(rows):
            if M[r].sum() == 0:
                M[r, rng.integers(cols)] = 1.0
    return M / M.sum(axis=1, keepdims=True)
