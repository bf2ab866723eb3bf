"""Numerical audits of the decoupling and decay assumptions for concrete models.

Two routes compute every quantity:

* ``enumerate``: brute force over all words of the required lengths; works for
  any :class:`CylinderMeasure` within the enumeration budget.
* ``structural``: Markov shortcuts.  For an order-k chain the log-ratio
  ln P[ab] - ln P[a] - ln P[b] depends on a only through its last min(n,k)
  symbols and on b only through its first min(m,k), so sup/inf over all
  (n, m) reduce to lengths <= k.  Extremal cylinder probabilities come from a
  max/min-product recursion over k-word states, and their exponential rates
  from Karp's extremal mean cycle.

Verdicts are the strings PASS, FAIL or INCONCLUSIVE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta

from .analytics import _json_float, exact_cross_entropy
from .core import RngStream, Sequence, as_sequence, stream_id_for
from .errors import BudgetExceeded, ModelError, NotFound, SupportViolation
from .matcher import waiting_time
from .sources import DEFAULT_BUDGET, CylinderMeasure, MarkovModel, _word_matrix

__all__ = [
    "ConditionReport",
    "IdRatios",
    "id_ratios",
    "ad_ratio",
    "decay_rates",
    "kb_bound",
    "kb_check",
    "birkhoff_sum_check",
    "smb_check",
    "audit",
    "sublinear_verdict",
]

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"
TOL = 1e-9
NEG_INF = -math.inf


def _finite_max(a):
    a = a[np.isfinite(a)]
    return float(a.max()) if a.size else NEG_INF


def _finite_min(a):
    a = a[np.isfinite(a)]
    return float(a.min()) if a.size else math.inf


# ------------------------------------------------------------------ ratios ---


def _ratio_enum(P: CylinderMeasure, n: int, m: int, budget: int):
    """Matrix of ln P[ab] - ln P[a] - ln P[b] over supported a (rows), b (cols)."""
    A = P.alphabet.size
    if A ** (n + m) > budget:
        raise BudgetExceeded(f"{A}**{n + m} words exceed the enumeration budget {budget}")
    ln_a = P.log_prob_table(n, budget)
    ln_b = P.log_prob_table(m, budget)
    ln_ab = P.log_prob_table(n + m, budget).reshape(ln_a.size, ln_b.size)
    ra = np.flatnonzero(ln_a > NEG_INF)
    rb = np.flatnonzero(ln_b > NEG_INF)
    with np.errstate(invalid="ignore"):
        return ln_ab[np.ix_(ra, rb)] - ln_a[ra, None] - ln_b[None, rb]


def _ratio_markov_tail(P: MarkovModel, m: int):
    """Ratio matrix for |a| >= k: ln P[b | context] - ln P[b] with |b| = m <= k.

    Rows are supported k-word contexts, columns supported m-words.  For an iid
    chain the conditional and the marginal are the same numbers, so the result
    is exactly zero.
    """
    A, k = P.alphabet.size, P.order
    ctx = np.flatnonzero(P.pi > 0)
    ln_b = P.marginal_log_table(m)
    cols = np.flatnonzero(ln_b > NEG_INF)
    words = _word_matrix(m, A)[cols]
    cond = np.zeros((ctx.size, cols.size))
    state = np.repeat(ctx[:, None], cols.size, axis=1)
    for t in range(m):
        b = words[:, t][None, :]
        cond = cond + P.log_transitions[state, b]
        state = (state * A + b) % P.n_states
    return cond - ln_b[cols][None, :]


@dataclass
class IdRatios:
    n: list[int]
    m_max: int
    sup: list[float]  # max over m <= m_max
    inf: list[float]  # min over supported concatenations
    inf_unrestricted: list[float]  # -inf as soon as some supported a, b have P[ab] = 0
    sup_nm: np.ndarray  # (n_max, m_max)
    inf_nm: np.ndarray
    method: str

    @property
    def k(self) -> list[float]:
        """Fitted k_n = max(sup, -inf)."""
        return [max(s, -i) for s, i in zip(self.sup, self.inf)]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m_max": self.m_max,
            "sup_ln_ratio": [_json_float(v) for v in self.sup],
            "inf_ln_ratio": [_json_float(v) for v in self.inf],
            "inf_ln_ratio_unrestricted": [_json_float(v) for v in self.inf_unrestricted],
            "k_n": [_json_float(v) for v in self.k],
            "method": self.method,
        }


def _pick_method(P, method):
    if method == "auto":
        return "structural" if isinstance(P, MarkovModel) else "enumerate"
    if method == "structural" and not isinstance(P, MarkovModel):
        raise ModelError("structural formulas exist for Markov models only")
    if method not in ("structural", "enumerate"):
        raise ValueError(f"unknown method {method!r}")
    return method


def id_ratios(P: CylinderMeasure, n_max: int, m_max: int, budget: int = DEFAULT_BUDGET,
              method: str = "auto") -> IdRatios:
    """Extremes of ln(P[ab] / (P[a] P[b])) for |a| = n <= n_max, |b| = m <= m_max.

    The infimum is taken over concatenations ab in the support; the
    unrestricted infimum is also reported.
    """
    if n_max < 1 or m_max < 1:
        raise ValueError("n_max and m_max must be >= 1")
    method = _pick_method(P, method)
    sup_nm = np.full((n_max, m_max), NEG_INF)
    inf_nm = np.full((n_max, m_max), math.inf)
    unres_nm = np.full((n_max, m_max), math.inf)
    cache = {}
    for n in range(1, n_max + 1):
        for m in range(1, m_max + 1):
            if method == "structural":
                k = P.order
                key = (min(n, k), min(m, k))
                if key not in cache:
                    if n >= k:
                        cache[key] = _ratio_markov_tail(P, key[1])
                    else:
                        cache[key] = _ratio_enum(P, key[0], key[1], budget)
                R = cache[key]
            else:
                R = _ratio_enum(P, n, m, budget)
            sup_nm[n - 1, m - 1] = _finite_max(R)
            inf_nm[n - 1, m - 1] = _finite_min(R)
            unres_nm[n - 1, m - 1] = float(R.min()) if R.size else math.inf
    return IdRatios(
        n=list(range(1, n_max + 1)),
        m_max=m_max,
        sup=sup_nm.max(axis=1).tolist(),
        inf=inf_nm.min(axis=1).tolist(),
        inf_unrestricted=unres_nm.min(axis=1).tolist(),
        sup_nm=sup_nm,
        inf_nm=inf_nm,
        method=method,
    )


def sublinear_verdict(k, tol: float = TOL) -> str:
    """Heuristic o(n) verdict for a finite stretch k_1..k_n of a fitted sequence.

    PASS if the second half of the sequence is flat, FAIL if it keeps growing
    by roughly constant steps (linear growth), INCONCLUSIVE otherwise.
    """
    k = np.maximum.accumulate(np.asarray(k, dtype=float))
    if not np.all(np.isfinite(k)):
        return FAIL
    if k.size < 3:
        return INCONCLUSIVE
    d = np.diff(k)[(k.size - 1) // 2:]
    if np.all(d <= tol):
        return PASS
    if np.all(d > tol) and d.min() >= 0.5 * d.mean():
        return FAIL
    return INCONCLUSIVE


@dataclass
class AdTable:
    n: list[int]
    min_ln_ratio: list[float]
    k: list[float]
    verdicts: list[str]
    k_ad: list[float]
    verdict: str

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "ad_min_ln_ratio": [_json_float(v) for v in self.min_ln_ratio],
            "k_n": [_json_float(v) for v in self.k],
            "per_n": self.verdicts,
            "k_n_needed": [_json_float(v) for v in self.k_ad],
            "verdict": self.verdict,
        }


def _ad_enum(P, n, budget):
    A = P.alphabet.size
    if A ** (n + 1) > budget:
        raise BudgetExceeded(f"{A}**{n + 1} words exceed the enumeration budget {budget}")
    ln_a = P.log_prob_table(n, budget)
    ln_ab = P.log_prob_table(n + 1, budget).reshape(ln_a.size, A)
    rows = ln_a > NEG_INF
    with np.errstate(invalid="ignore"):
        return _finite_min(ln_ab[rows] - ln_a[rows, None])


def ad_ratio(P: CylinderMeasure, n_max: int, k=None, budget: int = DEFAULT_BUDGET,
             method: str = "auto", tol: float = TOL) -> AdTable:
    """min over supported a (|a| = n) and ab in the support of ln(P[ab] / P[a]).

    Each level is compared with -k_n (fitted from :func:`id_ratios` when ``k``
    is not given).  The overall verdict asks whether the k_n needed to make the
    bound hold, max(k_n, -min ratio), looks sublinear.
    """
    method = _pick_method(P, method)
    if k is None:
        # the widest m the enumeration budget allows, capped at n_max
        A = P.alphabet.size
        m_max = n_max
        if method == "enumerate":
            while m_max > 1 and A ** (n_max + m_max) > budget:
                m_max -= 1
        k = id_ratios(P, n_max, m_max, budget, method).k
    vals = []
    for n in range(1, n_max + 1):
        if method == "structural" and n >= P.order:
            T = P.log_transitions[P.pi > 0]
            vals.append(_finite_min(T))
        else:
            vals.append(_ad_enum(P, n, budget))
    per = [PASS if v >= -kn - tol else FAIL for v, kn in zip(vals, k)]
    k_ad = [max(kn, -v) for v, kn in zip(vals, k)]
    return AdTable(list(range(1, n_max + 1)), vals, list(k), per, k_ad, sublinear_verdict(k_ad, tol))


# ------------------------------------------------------------ decay rates ---


def _karp(W):
    """Maximum mean cycle weight of a strongly connected digraph (W[u,v] = -inf for no edge)."""
    n = W.shape[0]
    D = np.full((n + 1, n), NEG_INF)
    D[0, :] = 0.0
    for j in range(1, n + 1):
        D[j] = np.max(D[j - 1][:, None] + W, axis=0)
    best = NEG_INF
    for v in range(n):
        if D[n, v] == NEG_INF:
            continue
        worst = math.inf
        for j in range(n):
            if D[j, v] > NEG_INF:
                worst = min(worst, (D[n, v] - D[j, v]) / (n - j))
        best = max(best, worst)
    return best


@dataclass
class DecayRates:
    n: list[int]
    gamma_plus: list[float]
    gamma_minus: list[float]
    gamma_plus_asymptotic: float
    gamma_minus_asymptotic: float
    fe_verdict: str
    se_verdict: str
    method: str

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "gamma_plus": self.gamma_plus,
            "gamma_minus": self.gamma_minus,
            "gamma_plus_asymptotic": _json_float(self.gamma_plus_asymptotic),
            "gamma_minus_asymptotic": _json_float(self.gamma_minus_asymptotic),
            "FE": self.fe_verdict,
            "SE": self.se_verdict,
            "method": self.method,
        }


def _markov_extremes(P: MarkovModel, n_max: int):
    k = P.order
    hi, lo = [], []
    for n in range(1, min(k, n_max) + 1):
        t = P.marginal_log_table(n)
        hi.append(_finite_max(t))
        lo.append(_finite_min(t))
    if n_max <= k:
        return hi, lo
    A, S = P.alphabet.size, P.n_states
    src = np.repeat(np.arange(S), A)
    sym = np.tile(np.arange(A), S)
    dst = (src * A + sym) % S
    w = P.log_transitions[src, sym]
    keep = np.isfinite(w)
    src, dst, w = src[keep], dst[keep], w[keep]
    vmax = P.marginal_log_table(k).copy()
    vmin = np.where(vmax > NEG_INF, vmax, math.inf)
    for _ in range(k + 1, n_max + 1):
        cand = vmax[src] + w
        new_max = np.full(S, NEG_INF)
        np.maximum.at(new_max, dst, cand)
        cand = vmin[src] + w
        new_min = np.full(S, math.inf)
        np.minimum.at(new_min, dst, cand)
        vmax, vmin = new_max, new_min
        hi.append(float(vmax.max()))
        lo.append(_finite_min(vmin))
    return hi, lo


def _markov_asymptotic(P: MarkovModel):
    live = np.flatnonzero(P.pi > 0)
    A = P.alphabet.size
    W = np.full((live.size, live.size), NEG_INF)
    where = {int(s): i for i, s in enumerate(live)}
    for i, s in enumerate(live):
        for b in range(A):
            t = (int(s) * A + b) % P.n_states
            if t in where and P.transitions[s, b] > 0:
                W[i, where[t]] = P.log_transitions[s, b]
    gp = _karp(W)
    gm = -_karp(np.where(W > NEG_INF, -W, NEG_INF))
    return gp, gm


def _slope(n, g):
    """Least-squares slope of n * gamma(n) over the second half of the table."""
    n = np.asarray(n, dtype=float)
    y = n * np.asarray(g, dtype=float)
    h = len(n) // 2
    if len(n) - h < 2:
        return float(g[-1])
    return float(np.polyfit(n[h:], y[h:], 1)[0])


def decay_rates(P: CylinderMeasure, n_max: int, budget: int = DEFAULT_BUDGET,
                method: str = "auto", tol: float = TOL) -> DecayRates:
    """gamma_+(n) = ln max P[a] / n and gamma_-(n) = ln min P[a] / n over supported |a| = n.

    The FE verdict requires the asymptotic gamma_+ to be negative; a deterministic
    cycle, whose cylinder probabilities stay bounded below, fails it.
    """
    method = _pick_method(P, method)
    ns = list(range(1, n_max + 1))
    if method == "structural":
        hi, lo = _markov_extremes(P, n_max)
        gp_inf, gm_inf = _markov_asymptotic(P)
    else:
        hi, lo = [], []
        for n in ns:
            t = P.log_prob_table(n, budget)
            hi.append(_finite_max(t))
            lo.append(_finite_min(t))
    gp = [h / n for h, n in zip(hi, ns)]
    gm = [v / n for v, n in zip(lo, ns)]
    if method != "structural":
        gp_inf, gm_inf = _slope(ns, gp), _slope(ns, gm)
    fe = PASS if gp_inf < -tol else FAIL
    se = PASS if math.isfinite(gm_inf) else FAIL
    return DecayRates(ns, gp, gm, gp_inf, gm_inf, fe, se, method)


# ------------------------------------------------------------------- KB ---


def kb_bound(log_pa: float, r, ell: int, k: float = 0.0, tau: int = 0):
    """exp(-e^{-k} P[a] floor((r - 1) / (ell + tau)))."""
    r = np.asarray(r, dtype=np.int64)
    pa = math.exp(log_pa) if log_pa > NEG_INF else 0.0
    return np.exp(-math.exp(-k) * pa * ((r - 1) // (ell + tau)))


@dataclass
class KbTable:
    word: str
    r: list[int]
    empirical: list[float]
    upper_ci: list[float]
    bound: list[float]
    verdicts: list[str]
    trials: int
    verdict: str

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in
                ("word", "r", "empirical", "upper_ci", "bound", "verdicts", "trials", "verdict")}


def _cp_upper(s: int, n: int, level: float = 0.95) -> float:
    """Upper end of the two-sided Clopper-Pearson interval for s successes in n."""
    if s >= n:
        return 1.0
    return float(beta.ppf(1 - (1 - level) / 2, s + 1, n - s))


def kb_check(P: CylinderMeasure, a, r_grid, k: float = 0.0, tau: int = 0, trials: int = 10_000,
             seed: int = 0, level: float = 0.95) -> KbTable:
    """Monte Carlo test of P{W_l(a, x) >= r} against the KB tail bound.

    Each trial draws ``max(r_grid) + l - 1`` symbols of x from its own stream.
    The verdict at r passes when the upper confidence limit of the empirical
    tail does not exceed the bound.
    """
    a = as_sequence(a, P.alphabet)
    ell = len(a)
    r_grid = [int(r) for r in r_grid]
    R = max(r_grid)
    length = R + ell - 1
    W = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        x = P.sample(length, RngStream(seed, stream_id_for("kb", t)))
        try:
            W[t] = waiting_time(x, a)
        except NotFound:
            W[t] = R + 1  # no match at any start position <= R
    emp, up, verdicts = [], [], []
    bound = kb_bound(P.log_cylinder(a), r_grid, ell, k, tau).tolist()
    for r, b in zip(r_grid, bound):
        s = int(np.count_nonzero(W >= r))
        emp.append(s / trials)
        u = _cp_upper(s, trials, level)
        up.append(u)
        verdicts.append(PASS if u <= b + TOL else FAIL)
    overall = PASS if all(v == PASS for v in verdicts) else FAIL
    return KbTable(str(a), r_grid, emp, up, bound, verdicts, trials, overall)


# ------------------------------------------------------- Birkhoff / SMB ---


def birkhoff_sum_check(P: CylinderMeasure, words: list[Sequence], k_max: float | None = None) -> dict:
    """(sum_j ln P[w_j] - ln P[w_1 ... w_c]) / N for a parse covering y.

    For Markov models every boundary contributes at most the largest absolute
    decoupling ratio, so |residual| <= (c - 1) k_max / N; the bound is
    returned alongside the residual and checked.
    """
    if not words:
        raise ValueError("empty parse")
    y = words[0]
    for w in words[1:]:
        y = y + w
    N = len(y)
    total = P.prefix_log_probs(y)
    if total[-1] == NEG_INF:
        bad = int(np.flatnonzero(total == NEG_INF)[0])
        raise SupportViolation(bad + 1)
    parts = [P.log_cylinder(w) for w in words]
    residual = (math.fsum(parts) - float(total[-1])) / N
    out = {"N": N, "words": len(words), "residual": residual}
    if k_max is None and isinstance(P, MarkovModel):
        r = id_ratios(P, P.order, P.order)
        k_max = max(max(r.sup), -min(r.inf))
    if k_max is not None:
        bound = (len(words) - 1) * k_max / N
        out["bound"] = bound
        out["within_bound"] = abs(residual) <= bound + 1e-12 * max(1.0, abs(float(total[-1]))) / N
    return out


@dataclass
class SmbTable:
    N: list[int]
    mean: list[float]
    std: list[float]
    exact: float | None
    verdict: str

    def to_json(self) -> dict:
        return {"N": self.N, "mean": [_json_float(v) for v in self.mean],
                "std": [_json_float(v) for v in self.std],
                "exact": _json_float(self.exact) if self.exact is not None else None,
                "verdict": self.verdict}


def smb_check(P: CylinderMeasure, Q: CylinderMeasure, N_grid, trials: int = 16,
              seed: int = 0) -> SmbTable:
    """Sample mean and spread of -ln P[y_1^N] / N for y ~ Q along a grid of N.

    PASS when the last mean is within 3 standard errors (plus 1e-9) of the
    exact cross entropy and the spread did not grow; without a closed form the
    verdict is INCONCLUSIVE.
    """
    means, stds = [], []
    for N in N_grid:
        vals = []
        for t in range(trials):
            y = Q.sample(N, RngStream(seed, stream_id_for("smb", N, t)))
            vals.append(-P.log_cylinder(y) / N)
        v = np.asarray(vals)
        if np.all(np.isfinite(v)):
            means.append(float(v.mean()))
            stds.append(float(v.std(ddof=1)) if trials > 1 else 0.0)
        else:
            means.append(math.inf)
            stds.append(math.nan)
    exact = None
    if isinstance(P, MarkovModel) and isinstance(Q, MarkovModel):
        exact = exact_cross_entropy(Q, P)
    if exact is None:
        verdict = INCONCLUSIVE
    elif math.isinf(exact):
        verdict = PASS if math.isinf(means[-1]) else FAIL
    else:
        se = stds[-1] / math.sqrt(trials)
        close = abs(means[-1] - exact) <= 3 * se + 1e-9
        shrinking = stds[-1] <= stds[0] + 1e-12
        verdict = PASS if close and shrinking else FAIL
    return SmbTable(list(N_grid), means, stds, exact, verdict)


# --------------------------------------------------------------- report ---


@dataclass
class ConditionReport:
    id: IdRatios
    ad: AdTable
    rates: DecayRates
    id_verdict: str
    kb: KbTable | None = None
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "ID": {**self.id.to_json(), "verdict": self.id_verdict},
            "Ad": self.ad.to_json(),
            "rates": self.rates.to_json(),
        }
        if self.kb is not None:
            out["KB"] = self.kb.to_json()
        out.update(self.extras)
        return out


def audit(P: CylinderMeasure, n_max: int = 8, m_max: int = 8, budget: int = DEFAULT_BUDGET,
          kb_word=None, kb_trials: int = 10_000, kb_r=None, seed: int = 0) -> ConditionReport:
    ids = id_ratios(P, n_max, m_max, budget)
    ad = ad_ratio(P, n_max, ids.k, budget)
    rates = decay_rates(P, n_max, budget)
    kb = None
    if kb_word is not None:
        a = as_sequence(kb_word, P.alphabet)
        ell = len(a)
        tau = 0 if isinstance(P, MarkovModel) and _is_iid(P) else ell
        if kb_r is None:
            pa = math.exp(P.log_cylinder(a)) if P.in_support(a) else 0.0
            top = int(min(1e6, max(10 * (ell + tau), 3 * (ell + tau) / pa))) if pa > 0 else 10 * (ell + tau)
            kb_r = np.unique(np.linspace(1, top, 10).astype(int)).tolist()
        kb_k = ids.k[min(ell, n_max) - 1]
        kb = kb_check(P, a, kb_r, kb_k, tau, kb_trials, seed)
    return ConditionReport(ids, ad, rates, sublinear_verdict(ids.k), kb)


def _is_iid(P: MarkovModel) -> bool:
    return bool(np.all(P.transitions == P.transitions[0]))
