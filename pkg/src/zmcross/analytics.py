"""Ground-truth entropy quantities (nats).

Closed forms for stationary Markov measures, plus finite-n definitional sums
over enumerated cylinders that work for any :class:`CylinderMeasure` and act
as a brute-force oracle.  Divergence is reported as ``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlphabetError, ModelError
from .sources import DEFAULT_BUDGET, CylinderMeasure, MarkovModel

__all__ = [
    "EntropyReport",
    "exact_entropy",
    "exact_cross_entropy",
    "truncated_cross_entropy",
    "truncated_entropy",
    "relative_entropy",
    "entropy_report",
]


def _json_float(v):
    if v is None:
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return v


@dataclass
class EntropyReport:
    h: float
    h_c: float
    h_r: float
    method: str  # "exact-markov" or "truncated-n"
    n: int | None = None

    def to_json(self, bits: bool = False) -> dict:
        scale = 1.0 / math.log(2) if bits else 1.0
        return {
            "h": _json_float(self.h * scale),
            "h_c": _json_float(self.h_c * scale),
            "h_r": _json_float(self.h_r * scale),
            "method": self.method,
            "n": self.n,
            "units": "bits" if bits else "nats",
        }


def _require_markov(*models):
    for m in models:
        if not isinstance(m, MarkovModel):
            raise ModelError("closed-form entropies are available for Markov models only")


def _xlogy_terms(w, p):
    """Terms w * ln p with 0 * ln(anything) := 0; None if some w > 0 meets p == 0."""
    mask = w > 0
    if np.any(p[mask] == 0):
        return None
    return (w[mask] * np.log(p[mask])).ravel()


def exact_entropy(Q: MarkovModel) -> float:
    """Entropy rate -sum_w pi(w) sum_b T(w,b) ln T(w,b)."""
    _require_markov(Q)
    weights = Q.pi[:, None] * Q.transitions
    terms = _xlogy_terms(weights, Q.transitions)
    return -math.fsum(terms.tolist()) + 0.0


def exact_cross_entropy(Q: MarkovModel, P: MarkovModel) -> float:
    """Cross-entropy rate of Q relative to P; ``inf`` when Q charges P-null words.

    Both chains are first written at a common order.
    """
    _require_markov(Q, P)
    if Q.alphabet.size != P.alphabet.size:
        raise AlphabetError("models must share an alphabet")
    k = max(Q.order, P.order)
    Q, P = Q.with_order(k), P.with_order(k)
    if np.any((Q.pi > 0) & (P.pi == 0)):
        return math.inf
    weights = Q.pi[:, None] * Q.transitions
    terms = _xlogy_terms(weights, P.transitions)
    if terms is None:
        return math.inf
    return -math.fsum(terms.tolist()) + 0.0


def truncated_cross_entropy(Q: CylinderMeasure, P: CylinderMeasure, n: int,
                            budget: int = DEFAULT_BUDGET) -> float:
    """-(1/n) sum over a in A^n of Q[a] ln P[a], by exhaustive enumeration."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if Q.alphabet.size != P.alphabet.size:
        raise AlphabetError("models must share an alphabet")
    lq = Q.log_prob_table(n, budget)
    lp = lq if P is Q else P.log_prob_table(n, budget)
    mask = lq > -math.inf
    if np.any(lp[mask] == -math.inf):
        return math.inf
    terms = np.exp(lq[mask]) * lp[mask]
    return -math.fsum(terms.tolist()) / n + 0.0


def truncated_entropy(Q: CylinderMeasure, n: int, budget: int = DEFAULT_BUDGET) -> float:
    return truncated_cross_entropy(Q, Q, n, budget)


def relative_entropy(h_c: float, h: float) -> float:
    """h_r = h_c - h; an infinite h_c propagates."""
    if math.isinf(h_c):
        return h_c
    return h_c - h


def entropy_report(Q: CylinderMeasure, P: CylinderMeasure, trunc: int | None = None,
                   budget: int = DEFAULT_BUDGET) -> EntropyReport:
    """Closed forms when both models are Markov and ``trunc`` is None, else finite-n sums."""
    if trunc is None:
        _require_markov(Q, P)
        h = exact_entropy(Q)
        h_c = exact_cross_entropy(Q, P)
        return EntropyReport(h, h_c, relative_entropy(h_c, h), "exact-markov")
    h = truncated_entropy(Q, trunc, budget)
    h_c = truncated_cross_entropy(Q, P, trunc, budget)
    return EntropyReport(h, h_c, relative_entropy(h_c, h), "truncated-n", trunc)
