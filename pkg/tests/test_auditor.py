import itertools
import math

import numpy as np
import pytest
from oracles import markov_prob_direct, random_stochastic

from zmcross.auditor import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    _cp_upper,
    _karp,
    ad_ratio,
    audit,
    birkhoff_sum_check,
    decay_rates,
    id_ratios,
    kb_bound,
    kb_check,
    smb_check,
    sublinear_verdict,
)
from zmcross.core import Alphabet, RngStream
from zmcross.errors import BudgetExceeded, ModelError
from zmcross.parsers import zm_parse
from zmcross.sources import MarkovModel, ad_counterexample

BIN = Alphabet.binary()
CHAIN = MarkovModel(BIN, [[0.8, 0.2], [0.35, 0.65]])


def brute_ratios(P, n, m):
    """Extremes of ln P[ab]/(P[a]P[b]) by the textbook product formula."""
    T, pi, A = P.transitions, P.pi, P.alphabet.size
    lo, hi = math.inf, -math.inf
    for a in itertools.product(range(A), repeat=n):
        pa = markov_prob_direct(pi, T, a)
        if pa == 0:
            continue
        for b in itertools.product(range(A), repeat=m):
            pb = markov_prob_direct(pi, T, b)
            pab = markov_prob_direct(pi, T, a + b)
            if pb == 0 or pab == 0:
                continue
            r = math.log(pab) - math.log(pa) - math.log(pb)
            lo, hi = min(lo, r), max(hi, r)
    return hi, lo


class TestIdRatios:
    def test_against_bruteforce(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            P = MarkovModel(Alphabet.digits(3), random_stochastic(rng, 3, 3, 0.2))
            r = id_ratios(P, 3, 3, method="enumerate")
            for n in range(1, 4):
                for m in range(1, 4):
                    hi, lo = brute_ratios(P, n, m)
                    assert math.isclose(r.sup_nm[n - 1, m - 1], hi, rel_tol=1e-9, abs_tol=1e-12)
                    assert math.isclose(r.inf_nm[n - 1, m - 1], lo, rel_tol=1e-9, abs_tol=1e-12)

    def test_structural_equals_enumerate(self):
        rng = np.random.default_rng(2)
        for order in (1, 2):
            T = random_stochastic(rng, 2**order, 2, 0.15)
            P = MarkovModel(BIN, T, order=order)
            a = id_ratios(P, 6, 6, method="structural")
            b = id_ratios(P, 6, 6, method="enumerate")
            assert np.allclose(a.sup_nm, b.sup_nm, atol=1e-12)
            assert np.allclose(a.inf_nm, b.inf_nm, atol=1e-12)

    def test_iid_is_exactly_zero(self):
        r = id_ratios(MarkovModel.iid([0.2, 0.3, 0.5]), 10, 10)
        assert r.k == [0.0] * 10

    def test_order_one_boundary_formula(self):
        # two-sided extremes are ln T(i, j) / pi_j over positive entries
        vals = np.log(CHAIN.transitions / CHAIN.pi[None, :])
        r = id_ratios(CHAIN, 7, 7)
        assert math.isclose(max(r.sup), vals.max(), rel_tol=1e-12)
        assert math.isclose(min(r.inf), vals.min(), rel_tol=1e-12)

    def test_unrestricted_inf(self):
        P = MarkovModel(BIN, [[0.5, 0.5], [1.0, 0.0]])
        r = id_ratios(P, 3, 3)
        assert all(v == -math.inf for v in r.inf_unrestricted)
        assert all(math.isfinite(v) for v in r.inf)

    def test_budget_and_methods(self):
        with pytest.raises(BudgetExceeded):
            id_ratios(ad_counterexample(), 12, 12, budget=1000)
        with pytest.raises(ModelError):
            id_ratios(ad_counterexample(), 2, 2, method="structural")
        with pytest.raises(ValueError):
            id_ratios(CHAIN, 0, 2)


class TestSublinear:
    def test_verdicts(self):
        assert sublinear_verdict([1.0, 2.0, 3.0, 3.0, 3.0, 3.0]) == PASS
        assert sublinear_verdict([0.5 * n for n in range(1, 11)]) == FAIL
        assert sublinear_verdict([1.0, 2.0, 2.5, 2.7, 2.8, 2.85, 2.85, 2.9]) == INCONCLUSIVE
        assert sublinear_verdict([1.0, math.inf, 2.0]) == FAIL
        assert sublinear_verdict([1.0]) == INCONCLUSIVE


class TestAd:
    def test_markov_passes(self):
        t = ad_ratio(CHAIN, 8)
        # the needed k_n is the constant -ln min T, so it is bounded
        assert t.verdict == PASS
        assert np.allclose(t.k_ad, -math.log(0.2))
        assert math.isclose(t.min_ln_ratio[-1], math.log(0.2), rel_tol=1e-12)

    def test_counterexample_fails(self):
        P = ad_counterexample()
        t = ad_ratio(P, 10)
        assert t.verdict == FAIL
        # after a run of 0s the chance of a 1 decays geometrically with ratio about 0.5/0.9
        steps = np.diff(t.min_ln_ratio[4:])
        assert np.allclose(steps, math.log(0.5 / 0.9), atol=0.05)

    def test_enumerate_matches_structural(self):
        a = ad_ratio(CHAIN, 6, method="structural")
        b = ad_ratio(CHAIN, 6, method="enumerate")
        assert np.allclose(a.min_ln_ratio, b.min_ln_ratio, atol=1e-12)


class TestKarp:
    def test_against_cycle_enumeration(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            n = int(rng.integers(1, 5))
            W = rng.normal(size=(n, n))
            W[rng.uniform(size=(n, n)) < 0.3] = -math.inf
            np.fill_diagonal(W, np.where(rng.uniform(size=n) < 0.5, -math.inf, np.diag(W)))
            # make it strongly connected with a Hamiltonian cycle
            for i in range(n):
                j = (i + 1) % n
                if W[i, j] == -math.inf:
                    W[i, j] = rng.normal()
            best = -math.inf
            for k in range(1, n + 1):
                for cyc in itertools.permutations(range(n), k):
                    edges = [W[cyc[i], cyc[(i + 1) % k]] for i in range(k)]
                    if all(e > -math.inf for e in edges):
                        best = max(best, sum(edges) / k)
            assert math.isclose(_karp(W), best, rel_tol=1e-12, abs_tol=1e-12)


class TestDecay:
    def test_iid_rates(self):
        r = decay_rates(MarkovModel.iid([0.2, 0.3, 0.5]), 6)
        assert np.allclose(r.gamma_plus, math.log(0.5))
        assert np.allclose(r.gamma_minus, math.log(0.2))
        assert r.fe_verdict == PASS and r.se_verdict == PASS

    def test_structural_vs_enumerate(self):
        a = decay_rates(CHAIN, 10, method="structural")
        b = decay_rates(CHAIN, 10, method="enumerate")
        assert np.allclose(a.gamma_plus, b.gamma_plus, atol=1e-12)
        assert np.allclose(a.gamma_minus, b.gamma_minus, atol=1e-12)
        # the most likely long word repeats 0, the least likely repeats 1 (0.65 > sqrt(0.2*0.35))
        assert math.isclose(a.gamma_plus_asymptotic, math.log(0.8), rel_tol=1e-12)
        assert math.isclose(a.gamma_minus_asymptotic, 0.5 * math.log(0.2 * 0.35), rel_tol=1e-12)

    def test_deterministic_cycle_fails_fe(self):
        cyc = MarkovModel(BIN, [[0.0, 1.0], [1.0, 0.0]])
        r = decay_rates(cyc, 8)
        assert r.fe_verdict == FAIL
        assert r.gamma_plus_asymptotic == 0.0

    def test_hmm_enumerate(self):
        r = decay_rates(ad_counterexample(), 8)
        assert r.method == "enumerate" and r.fe_verdict == PASS


class TestKb:
    def test_bound_shape(self):
        b = kb_bound(math.log(0.25), [1, 2, 3, 5, 9], ell=2)
        assert b.tolist() == [1.0, 1.0, math.exp(-0.25), math.exp(-0.5), math.exp(-1.0)]
        assert kb_bound(-math.inf, [10], 1).tolist() == [1.0]

    def test_clopper_pearson(self):
        assert _cp_upper(10, 10) == 1.0
        # known value: 0 successes in 10 at 95% two-sided gives 1 - 0.025**(1/10)
        assert math.isclose(_cp_upper(0, 10), 1 - 0.025 ** 0.1, rel_tol=1e-9)

    def test_iid_passes(self):
        P = MarkovModel.bernoulli(0.5)
        t = kb_check(P, "01", [1, 5, 10, 20, 40], trials=2000, seed=1)
        assert t.verdict == PASS
        assert t.empirical[0] == 1.0 and t.empirical == sorted(t.empirical, reverse=True)

    def test_reproducible(self):
        P = MarkovModel.bernoulli(0.5)
        a = kb_check(P, "11", [4, 8], trials=300, seed=7)
        b = kb_check(P, "11", [4, 8], trials=300, seed=7)
        assert a.empirical == b.empirical


class TestBirkhoff:
    def test_iid_residual_zero(self):
        P = MarkovModel.bernoulli(0.3)
        x, y = P.sample(2000, RngStream(1)), P.sample(2000, RngStream(2))
        out = birkhoff_sum_check(P, zm_parse(x, y).words)
        assert abs(out["residual"]) < 1e-12 and out["within_bound"]

    def test_markov_within_bound(self):
        x, y = CHAIN.sample(4000, RngStream(3)), CHAIN.sample(4000, RngStream(4))
        p = zm_parse(x, y)
        out = birkhoff_sum_check(CHAIN, p.words)
        assert out["within_bound"] and out["words"] == p.c
        assert abs(out["residual"]) > 0


class TestSmb:
    def test_markov_converges(self):
        Q = MarkovModel(BIN, [[0.6, 0.4], [0.5, 0.5]])
        t = smb_check(CHAIN, Q, [2**10, 2**14], trials=16, seed=3)
        assert t.verdict == PASS

    def test_hmm_inconclusive(self):
        t = smb_check(ad_counterexample(), ad_counterexample(), [256], trials=4)
        assert t.verdict == INCONCLUSIVE


class TestAudit:
    def test_report_keys(self):
        rep = audit(CHAIN, 6, 6, kb_word="01", kb_trials=500).to_json()
        assert set(rep) >= {"ID", "Ad", "rates", "KB"}
        assert rep["ID"]["verdict"] == PASS and rep["rates"]["FE"] == PASS

    def test_counterexample(self):
        with pytest.raises(BudgetExceeded):
            audit(ad_counterexample(), 8, 8)
        rep = audit(ad_counterexample(), 8, 5).to_json()
        assert rep["Ad"]["verdict"] == FAIL and rep["ID"]["verdict"] == FAIL
