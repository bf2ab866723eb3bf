"""Acceptance criteria 1 to 13, each at its stated tolerance.

Every test records one PASS/FAIL line that is printed in the terminal summary.
A criterion that cannot be met as stated is recorded as FAIL and marked xfail
with the reason, rather than being weakened until it passes.
"""

import math
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest
from acceptance_log import record
from oracles import accepted_set, substrings, zm_parse_naive

from zmcross.analytics import exact_cross_entropy, exact_entropy, truncated_cross_entropy
from zmcross.auditor import id_ratios, kb_check
from zmcross.core import Alphabet, RngStream, Sequence, parse_sequence
from zmcross.estimators import lz78_entropy_estimate, zm_estimate, zm_estimate_via_matches
from zmcross.harness import ExperimentConfig, run_block_diagnostics, run_convergence, run_wz
from zmcross.matcher import build_index
from zmcross.parsers import zm_parse
from zmcross.sources import MarkovModel, save_model

pytestmark = pytest.mark.acceptance

BIN = Alphabet.binary()
A3 = Alphabet.digits(3)
FAIR = MarkovModel.bernoulli(0.5)
P_CHAIN = MarkovModel(BIN, [[0.8, 0.2], [0.3, 0.7]])
Q_CHAIN = MarkovModel(BIN, [[0.6, 0.4], [0.5, 0.5]])
WORKERS = 8


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_c01_worked_example():
    x = parse_sequence("010001011101001110010001", A3)
    y = parse_sequence("011001010001020111010010", A3)
    zm_estimate(x, y)  # compile the kernels once; the bound is on the warm call
    (p, rec), dt = _timed(lambda: (zm_parse(x, y), zm_estimate(x, y)))
    words = "|".join(str(w) for w in p.words)
    ok = (words == "011|00101|00010|2|011101001|0" and p.c == 6
          and rec.q_hat == 6 * math.log(24) / 24 and dt < 1e-3)
    record(1, ok, f"{words} c={p.c} q_hat={rec.q_hat!r} warm time {dt * 1e3:.3f} ms")
    assert ok


def test_c02_parser_oracle_equivalence():
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(1000):
        A = int(rng.integers(1, 4))
        n = int(rng.integers(2, 65))
        x, y = rng.integers(0, A, size=n), rng.integers(0, A, size=n)
        xs, ys = Sequence(x, Alphabet(A)), Sequence(y, Alphabet(A))
        words = [w.tolist() for w in zm_parse(xs, ys).words]
        a, b = zm_estimate(xs, ys), zm_estimate_via_matches(xs, ys)
        if words != zm_parse_naive(x.tolist(), y.tolist()) or a.c != b.c or a.q_hat != b.q_hat:
            bad += 1
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 5
    record(2, ok, f"1000 pairs, {bad} mismatches, {dt:.2f} s")
    assert ok


def test_c03_index_correctness():
    rng = np.random.default_rng(33)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(200):
        A = int(rng.integers(1, 4))
        n = int(rng.integers(0, 65))
        x = rng.integers(0, A, size=n)
        idx = build_index(Sequence(x, Alphabet(A)))
        if accepted_set(idx) != substrings(x.tolist()) or (n >= 2 and idx.n_states > 2 * n - 1):
            bad += 1
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 5
    record(3, ok, f"200 random x, {bad} mismatches, {dt:.2f} s")
    assert ok


def _uniform_binary_chain(rng):
    a = rng.uniform(size=2)
    return MarkovModel(BIN, [[a[0], 1 - a[0]], [a[1], 1 - a[1]]])


def test_c04_exact_analytics():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    self_err = 0.0
    for _ in range(50):
        S = int(rng.integers(2, 5))
        T = rng.dirichlet(np.ones(S), size=S)
        Q = MarkovModel(Alphabet(S), T)
        self_err = max(self_err, abs(exact_cross_entropy(Q, Q) - exact_entropy(Q)))
    markov_err = []
    for _ in range(20):
        Q, P = _uniform_binary_chain(rng), _uniform_binary_chain(rng)
        markov_err.append(abs(truncated_cross_entropy(Q, P, 12) - exact_cross_entropy(Q, P)))
    iid_err = 0.0
    for _ in range(20):
        q, p = rng.uniform(size=2)
        Q, P = MarkovModel.bernoulli(q), MarkovModel.bernoulli(p)
        iid_err = max(iid_err, abs(truncated_cross_entropy(Q, P, 12) - exact_cross_entropy(Q, P)))
    dt = time.perf_counter() - t0
    within = sum(e <= 1e-2 for e in markov_err)
    ok_self, ok_iid, ok_markov = self_err <= 1e-12, iid_err <= 1e-9, within == 20
    ok = ok_self and ok_iid and ok_markov and dt < 30
    record(4, ok, f"self {self_err:.1e}, iid {iid_err:.1e}, order-1 pairs within 1e-2: {within}/20 "
                  f"(worst {max(markov_err):.3f}), {dt:.2f} s")
    assert ok_self and ok_iid and dt < 30
    if not ok_markov:
        # at n = 12 the error is (H(pi_Q; pi_P) - h_c) / 12, which exceeds 1e-2 for many pairs
        pytest.xfail("truncation bias of the order-1 sum at n = 12 exceeds 1e-2")


def _converge(P, Q, grid, seed):
    cfg = ExperimentConfig(P, Q, N_grid=grid, trials=16, seed=seed, workers=WORKERS)
    return run_convergence(cfg)


def test_c05_convergence():
    t0 = time.perf_counter()
    grid = [2**12, 2**16, 2**20]
    parts, ok = [], True
    for name, (P, Q) in {"Bern(1/2)": (FAIR, FAIR), "Markov": (P_CHAIN, Q_CHAIN)}.items():
        _, s = _converge(P, Q, grid, seed=1)
        h_c = s["h_c_exact"]
        med = s["per_N"][-1]["q_hat"]["0.5"]
        errs = [e["median_abs_err_q"] for e in s["per_N"]]
        rel = abs(med - h_c) / h_c
        mono = all(b <= a for a, b in zip(errs, errs[1:]))
        ok &= rel < 0.15 and mono
        parts.append(f"{name}: rel err {rel:.3f}, median abs err {[round(e, 4) for e in errs]}")
    dt = time.perf_counter() - t0
    ok &= dt < 120
    record(5, ok, "; ".join(parts) + f"; {dt:.1f} s")
    assert ok


def test_c06_divergence():
    t0 = time.perf_counter()
    P3 = MarkovModel.iid([0.5, 0.5, 0.0], A3)
    Q3 = MarkovModel.iid([0.45, 0.45, 0.1], A3)
    rows, s = _converge(P3, Q3, [2**14, 2**16, 2**18], seed=2)
    # c_N >= #occurrences of the letter 2 (a P-null word of length k = 1);
    # its frequency tends to Q[2] = 0.1, the constant of the bound
    const = 0.1
    med = s["per_N"][1]["c_over_N_median"]
    q14 = {r["trial"]: r["q_hat"] for r in rows if r["N"] == 2**14}
    q18 = {r["trial"]: r["q_hat"] for r in rows if r["N"] == 2**18}
    grew = sum(q18[t] > q14[t] for t in q14)
    dt = time.perf_counter() - t0
    ok = med > const and grew >= 14 and dt < 60
    record(6, ok, f"median c_N/N at 2^16 = {med:.4f} > {const}; Q_N grew in {grew}/16 seeds; {dt:.1f} s")
    assert ok


def test_c06_per_trial_counting_bound():
    P3 = MarkovModel.iid([0.5, 0.5, 0.0], A3)
    Q3 = MarkovModel.iid([0.45, 0.45, 0.1], A3)
    for t in range(8):
        x = P3.sample(2**12, RngStream(6, 2 * t))
        y = Q3.sample(2**12, RngStream(6, 2 * t + 1))
        assert zm_parse(x, y).c >= int(np.count_nonzero(y.data == 2))


def test_c07_wyner_ziv():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(FAIR, FAIR, N_grid=[2], ell_grid=[20], trials=64, seed=3,
                           workers=WORKERS, horizon=2**28)
    rows, s = run_wz(cfg)
    med = s["per_ell"][0]["median_wz"]
    rel = abs(med - math.log(2)) / math.log(2)
    dt = time.perf_counter() - t0
    ok = rel < 0.10 and all(r["found"] for r in rows) and dt < 120
    record(7, ok, f"median ln W/l = {med:.4f}, rel err {rel:.3f}, {dt:.1f} s")
    assert ok


def test_c08_lz78():
    t0 = time.perf_counter()
    Q = MarkovModel.bernoulli(0.3)
    h = -0.3 * math.log(0.3) - 0.7 * math.log(0.7)
    errs = {}
    for N in (2**14, 2**20):
        vals = [lz78_entropy_estimate(Q.sample(N, RngStream(5, i))) for i in range(16)]
        errs[N] = abs(float(np.median(vals)) - h)
    dt = time.perf_counter() - t0
    rel = errs[2**20] / h
    ok = rel < 0.20 and errs[2**20] <= errs[2**14] and dt < 60
    record(8, ok, f"rel err at 2^20 {rel:.3f}, abs err {errs[2**14]:.4f} -> {errs[2**20]:.4f}, {dt:.1f} s")
    assert ok


def test_c09_auditor_exactness():
    t0 = time.perf_counter()
    vals = np.log(P_CHAIN.transitions / P_CHAIN.pi[None, :])
    hi, lo = float(vals.max()), float(vals.min())
    dev = 0.0
    for method in ("structural", "enumerate"):
        r = id_ratios(P_CHAIN, 6, 6, method=method)
        dev = max(dev, float(np.max(np.abs(r.sup_nm - hi))), float(np.max(np.abs(r.inf_nm - lo))))
    k_iid = id_ratios(MarkovModel.iid([0.2, 0.3, 0.5]), 6, 6).k
    k_iid_enum = id_ratios(MarkovModel.bernoulli(0.3), 6, 6, method="enumerate").k
    dt = time.perf_counter() - t0
    ok = dev <= 1e-10 and k_iid == [0.0] * 6 and max(k_iid_enum) < 1e-12 and dt < 60
    record(9, ok, f"max deviation from boundary formula {dev:.1e}; iid k_n = {k_iid}; "
                  f"enumerated iid max {max(k_iid_enum):.1e}; {dt:.2f} s")
    assert ok


def test_c10_kb():
    t0 = time.perf_counter()
    pa = 1 / 16
    r_grid = np.unique(np.linspace(1, 3 * 4 / pa, 10).astype(int)).tolist()
    t = kb_check(FAIR, "0101", r_grid, k=0.0, tau=0, trials=10_000, seed=10)
    dt = time.perf_counter() - t0
    ok = t.verdict == "PASS" and len(r_grid) == 10 and dt < 60
    worst = max(u - b for u, b in zip(t.upper_ci, t.bound))
    record(10, ok, f"10-point grid up to r = {r_grid[-1]}, max(upper CI - bound) = {worst:.4f}, {dt:.1f} s")
    assert ok


def test_c11_block_diagnostics():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(P_CHAIN, Q_CHAIN, N_grid=[2**18], trials=20, seed=4, eps=0.1,
                           workers=WORKERS)
    rep = run_block_diagnostics(cfg)
    share = rep["per_N"][0]["share_trials_bad_below_eps"]
    ordering = rep["per_N"][0]["ordering_ok_all"]
    L = rep["per_N"][0]["block_length"]
    dt = time.perf_counter() - t0
    ok = share >= 0.9 and ordering and dt < 180
    note = " (blocks have one symbol at this alpha, so no block can be bad)" if L == 1 else ""
    record(11, ok, f"alpha = {rep['alpha']:.4f}, block length {L}, trials with bad fraction < eps: "
                   f"{share:.2f}, c_N >= #unmatched in all trials: {ordering}{note}; {dt:.1f} s")
    assert ok


def test_c11_informative_alpha():
    """Outside the criterion: with alpha = 1/2 the blocks are long and the statements still hold."""
    cfg = ExperimentConfig(P_CHAIN, Q_CHAIN, N_grid=[2**18], trials=20, seed=4, eps=0.1,
                           alpha=0.5, workers=WORKERS)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = run_block_diagnostics(cfg)
    assert rep["per_N"][0]["block_length"] == 512
    assert rep["per_N"][0]["share_trials_bad_below_eps"] >= 0.9
    assert rep["per_N"][0]["ordering_ok_all"]


PERF_SCRIPT = """
import resource, sys, time
from zmcross.core import RngStream
from zmcross.parsers import zm_parse
from zmcross.sources import MarkovModel
P = MarkovModel.bernoulli(0.5)
x, y = P.sample(10**6, RngStream(12, 1)), P.sample(10**6, RngStream(12, 2))
zm_parse(x[:100], y[:100])
t0 = time.perf_counter()
c = zm_parse(x, y).c
dt = time.perf_counter() - t0
print(dt, resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024, c)
"""


def test_c12_performance():
    # a fresh process, so the peak resident size covers every allocator, numba's included
    out = subprocess.run([sys.executable, "-c", PERF_SCRIPT], check=True, capture_output=True, text=True)
    dt, peak, c = out.stdout.split()
    dt, peak = float(dt), float(peak)
    ok = dt < 2 and peak < 512
    record(12, ok, f"N = 10^6 build + parse in {dt:.2f} s, peak RSS of the whole process {peak:.0f} MB, c = {c}")
    assert ok


def test_c13_determinism(tmp_path):
    p, q = tmp_path / "p.json", tmp_path / "q.json"
    save_model(P_CHAIN, p)
    save_model(Q_CHAIN, q)
    outputs = []
    for run, workers in enumerate((1, 8, 1, 8)):
        out = tmp_path / f"run{run}.csv"
        cmd = [sys.executable, "-m", "zmcross.cli", "experiment", "converge", "--p", str(p), "--q", str(q),
               "--N", "1024", "16384", "--trials", "8", "--seed", "13", "--workers", str(workers),
               "--csv", str(out), "--summary", str(tmp_path / f"run{run}.json")]
        subprocess.run(cmd, check=True)
        outputs.append(out.read_bytes())
    ok = len(set(outputs)) == 1 and len(outputs[0].splitlines()) == 17
    record(13, ok, f"4 CLI runs (1, 8, 1, 8 workers): {len(set(outputs))} distinct CSV byte strings")
    assert ok
