"""Experiment orchestration: convergence sweeps, block diagnostics, waiting times.

Every trial draws x ~ P and y ~ Q from their own Philox streams keyed by
``(seed, stream_id_for(experiment, N, trial, role))``, so results do not depend
on the number of workers or the order in which trials run.  Rows are sorted by
(N, trial) before they are written.
"""

from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing as mp
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .analytics import exact_cross_entropy, exact_entropy, relative_entropy
from .auditor import decay_rates
from .core import RngStream, stream_id_for
from .errors import ConfigError, ModelError, NotFound
from .estimators import lz78_entropy_estimate, match_lengths
from .matcher import build_index, waiting_time
from .parsers import block_length, block_parse, zm_parse
from .sources import CylinderMeasure, MarkovModel, load_model, model_from_json

__all__ = [
    "ExperimentConfig",
    "SCHEMA",
    "CONVERGE_COLUMNS",
    "WZ_COLUMNS",
    "run_convergence",
    "run_block_diagnostics",
    "run_wz",
    "default_alpha",
    "write_csv",
]

SCHEMA = "v1"
CONVERGE_COLUMNS = [
    "schema", "trial", "seed", "N", "c_N", "q_hat", "q_hat_matches", "h_c_exact",
    "h_hat", "h_exact", "h_r_hat", "h_r_exact", "rel_err_q", "rel_err_h",
]
WZ_COLUMNS = ["schema", "trial", "seed", "ell", "horizon", "found", "W", "wz", "h_c_exact"]


@dataclass
class ExperimentConfig:
    p_model: object
    q_model: object
    N_grid: list = field(default_factory=lambda: [2**12, 2**16])
    trials: int = 4
    seed: int = 0
    eps: float = 0.1
    alpha: float | None = None
    workers: int = 1
    csv_path: str | None = None
    summary_path: str | None = None
    lz78_with_alphabet: bool = False
    include_runtime: bool = False
    ell_grid: list = field(default_factory=lambda: [8, 12, 16])
    horizon: int = 2**26

    def __post_init__(self):
        self.P = _as_model(self.p_model, "p_model")
        self.Q = _as_model(self.q_model, "q_model")
        if self.P.alphabet.size != self.Q.alphabet.size:
            raise ConfigError("q_model", "alphabet differs from p_model")
        grid = self.N_grid
        if not isinstance(grid, (list, tuple)) or not grid:
            raise ConfigError("N_grid", "must be a non-empty list")
        try:
            grid = [int(v) for v in grid]
        except (TypeError, ValueError):
            raise ConfigError("N_grid", "entries must be integers") from None
        if any(v < 2 for v in grid):
            raise ConfigError("N_grid", "values must be >= 2")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("N_grid", "values must be strictly increasing")
        self.N_grid = grid
        if int(self.trials) < 1:
            raise ConfigError("trials", "must be >= 1")
        self.trials = int(self.trials)
        if not 0 < float(self.eps) < 0.5:
            raise ConfigError("eps", "must lie in (0, 1/2)")
        if self.alpha is not None and not 0 < float(self.alpha) < 1:
            raise ConfigError("alpha", "must lie in (0, 1)")
        if int(self.workers) < 1:
            raise ConfigError("workers", "must be >= 1")
        self.workers = int(self.workers)
        if any(int(v) < 1 for v in self.ell_grid):
            raise ConfigError("ell_grid", "lengths must be >= 1")
        self.ell_grid = [int(v) for v in self.ell_grid]
        if int(self.horizon) < 1:
            raise ConfigError("horizon", "must be >= 1")
        self.horizon = int(self.horizon)
        self.seed = int(self.seed)

    @classmethod
    def from_json(cls, obj: dict, base: Path | None = None, **overrides) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        merged = dict(obj)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(merged) - names
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration field")
        for key in ("p_model", "q_model"):
            if key not in merged:
                raise ConfigError(key, "required")
            if isinstance(merged[key], str) and base is not None:
                path = Path(merged[key])
                merged[key] = str(path if path.is_absolute() else base / path)
        return cls(**merged)

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        path = Path(path)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError("config", str(e)) from None
        return cls.from_json(obj, path.parent, **overrides)


def _as_model(source, name) -> CylinderMeasure:
    if isinstance(source, CylinderMeasure):
        return source
    try:
        if isinstance(source, dict):
            return model_from_json(source)
        return load_model(source)
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise ConfigError(name, f"cannot load model ({e})") from None
    except ModelError as e:
        raise ConfigError(name, str(e)) from None


def _streams(seed, experiment, N, trial):
    return (RngStream(seed, stream_id_for(experiment, N, trial, "x")),
            RngStream(seed, stream_id_for(experiment, N, trial, "y")))


def _exact(P, Q):
    if isinstance(P, MarkovModel) and isinstance(Q, MarkovModel):
        h = exact_entropy(Q)
        h_c = exact_cross_entropy(Q, P)
        return h_c, h, relative_entropy(h_c, h)
    return math.nan, math.nan, math.nan


def _rel(est, exact):
    if math.isnan(exact) or math.isinf(exact) or exact == 0:
        return math.nan
    return (est - exact) / exact


def _run_pool(fn, tasks, workers):
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as ex:
        return list(ex.map(fn, tasks))


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_csv(rows: list[dict], columns: list[str], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _write_json(obj, path):
    if path is not None:
        Path(path).write_text(json.dumps(obj, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    raise TypeError(type(v))


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return _fmt(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_json_safe(x) for x in v]
    return v


# ------------------------------------------------------------ convergence ---


def _converge_trial(task):
    cfg, N, trial = task
    t0 = time.perf_counter()
    rx, ry = _streams(cfg.seed, "converge", N, trial)
    x = cfg.P.sample(N, rx)
    y = cfg.Q.sample(N, ry)
    idx = build_index(x)
    c = zm_parse(x, y, idx).c
    c_m = len(match_lengths(x, y, idx))
    lnN = math.log(N)
    q_hat = c * lnN / N
    q_hat_m = c_m * lnN / N
    h_hat = lz78_entropy_estimate(y, cfg.lz78_with_alphabet)
    h_c, h, h_r = cfg._exact
    row = {
        "schema": SCHEMA, "trial": trial, "seed": cfg.seed, "N": N, "c_N": c,
        "q_hat": q_hat, "q_hat_matches": q_hat_m, "h_c_exact": h_c, "h_hat": h_hat,
        "h_exact": h, "h_r_hat": q_hat - h_hat, "h_r_exact": h_r,
        "rel_err_q": _rel(q_hat, h_c), "rel_err_h": _rel(h_hat, h),
        "runtime_ms": (time.perf_counter() - t0) * 1e3,
    }
    return row


def _quantiles(v):
    v = np.asarray(v, dtype=float)
    return {q: float(np.quantile(v, q)) for q in (0.1, 0.25, 0.5, 0.75, 0.9)}


def run_convergence(config: ExperimentConfig):
    """All estimators and exact references for every (N, trial); returns (rows, summary)."""
    config._exact = _exact(config.P, config.Q)
    tasks = [(config, N, t) for N in config.N_grid for t in range(config.trials)]
    rows = _run_pool(_converge_trial, tasks, config.workers)
    rows.sort(key=lambda r: (r["N"], r["trial"]))
    h_c, h, h_r = config._exact
    per_n = []
    for N in config.N_grid:
        sel = [r for r in rows if r["N"] == N]
        q = [r["q_hat"] for r in sel]
        entry = {
            "N": N,
            "q_hat": _quantiles(q),
            "h_hat_median": float(np.median([r["h_hat"] for r in sel])),
            "h_r_hat_median": float(np.median([r["h_r_hat"] for r in sel])),
            "c_over_N_median": float(np.median([r["c_N"] / N for r in sel])),
            "matches_agree": all(r["q_hat"] == r["q_hat_matches"] for r in sel),
        }
        if math.isfinite(h_c):
            entry["median_abs_err_q"] = float(np.median([abs(v - h_c) for v in q]))
        per_n.append(entry)
    errs = [e.get("median_abs_err_q") for e in per_n]
    if all(e is not None for e in errs):
        improving = all(b <= a for a, b in zip(errs, errs[1:]))
    else:
        meds = [e["q_hat"][0.5] for e in per_n]
        improving = all(b >= a for a, b in zip(meds, meds[1:]))  # divergent: Q_N should grow
    summary = _json_safe({
        "schema": SCHEMA,
        "seed": config.seed,
        "trials": config.trials,
        "h_c_exact": h_c, "h_exact": h, "h_r_exact": h_r,
        "divergent": math.isinf(h_c),
        "per_N": [{**e, "q_hat": {str(k): v for k, v in e["q_hat"].items()}} for e in per_n],
        "monotone_improvement": improving,
    })
    columns = CONVERGE_COLUMNS + (["runtime_ms"] if config.include_runtime else [])
    write_csv(rows, columns, config.csv_path)
    _write_json(summary, config.summary_path)
    return rows, summary


# ------------------------------------------------------ block diagnostics ---


def default_alpha(P: CylinderMeasure, n_max: int = 12) -> tuple[float, float, float]:
    """min(1/2, 0.9 * gamma_+ / (8 gamma_-)) from the asymptotic decay rates of P."""
    r = decay_rates(P, n_max)
    gp, gm = float(r.gamma_plus_asymptotic), float(r.gamma_minus_asymptotic)
    if not (math.isfinite(gp) and math.isfinite(gm)) or gm >= 0 or gp >= 0:
        return 0.5, gp, gm
    return float(min(0.5, 0.9 * gp / (8 * gm))), gp, gm


def _block_trial(task):
    cfg, N, trial = task
    rx, ry = _streams(cfg.seed, "blocks", N, trial)
    x = cfg.P.sample(N, rx)
    y = cfg.Q.sample(N, ry)
    idx = build_index(x)
    bp = block_parse(y, cfg.P, N, cfg.eps, cfg._alpha)
    gm = cfg._gamma_minus
    ell_minus = math.log(N) / (-2 * gm) if math.isfinite(gm) and gm < 0 else 1.0
    d_plus = 2 * bp.block_len / ell_minus
    hit = idx.accepted_spans(y, bp.word_starts, bp.word_ends)
    unmatched = int(hit.size - np.count_nonzero(hit))
    per_block = np.bincount(bp.word_block[hit], minlength=bp.M)
    exceed = int(np.count_nonzero(bp.good & (per_block > cfg.eps * d_plus)))
    good = np.flatnonzero(bp.good)
    c = zm_parse(x, y, idx).c
    return {
        "N": N, "trial": trial, "M": bp.M, "block_length": bp.block_len,
        "bad": bp.M - len(good), "fraction_bad": (bp.M - len(good)) / bp.M,
        "c_tilde": bp.c_tilde, "good_exceeding": exceed,
        "fraction_good_exceeding": exceed / len(good) if len(good) else 0.0,
        "d_plus": d_plus, "c_N": c, "unmatched_words": unmatched,
        "ordering_ok": c >= unmatched,
    }


def run_block_diagnostics(config: ExperimentConfig) -> dict:
    """Bad-block fractions, matched words in good blocks, and c_N >= #unmatched words."""
    alpha_auto, gp, gm = default_alpha(config.P)
    alpha = config.alpha if config.alpha is not None else alpha_auto
    limit = gp / (8 * gm) if (math.isfinite(gp) and math.isfinite(gm) and gm < 0) else math.nan
    alpha_ok = not (math.isfinite(limit) and alpha >= limit)
    if not alpha_ok:
        warnings.warn(f"alpha = {alpha} does not satisfy alpha < gamma_+/(8 gamma_-) = {limit:.4g}",
                      stacklevel=2)
    config._alpha = alpha
    config._gamma_minus = gm
    tasks = [(config, N, t) for N in config.N_grid for t in range(config.trials)]
    trials = _run_pool(_block_trial, tasks, config.workers)
    trials.sort(key=lambda r: (r["N"], r["trial"]))
    per_n = []
    for N in config.N_grid:
        sel = [r for r in trials if r["N"] == N]
        per_n.append({
            "N": N,
            "block_length": block_length(N, alpha),
            "share_trials_bad_below_eps": float(np.mean([r["fraction_bad"] < config.eps for r in sel])),
            "median_fraction_bad": float(np.median([r["fraction_bad"] for r in sel])),
            "ordering_ok_all": all(r["ordering_ok"] for r in sel),
        })
    report = _json_safe({
        "schema": SCHEMA,
        "eps": config.eps,
        "alpha": alpha,
        "alpha_limit": limit,
        "alpha_ok": alpha_ok,
        "gamma_plus": gp,
        "gamma_minus": gm,
        "per_N": per_n,
        "trials": trials,
    })
    _write_json(report, config.summary_path)
    return report


# ------------------------------------------------------------ Wyner-Ziv ---


def _wz_trial(task):
    cfg, ell, trial = task
    rx, ry = _streams(cfg.seed, "wz", ell, trial)
    a = cfg.Q.sample(ell, ry)
    chunk = min(cfg.horizon, 1 << 20)
    try:
        W = waiting_time(cfg.P.stream(rx, chunk), a, cfg.horizon)
        found, wz = True, math.log(W) / ell
    except NotFound:
        W, found, wz = 0, False, math.nan
    return {"schema": SCHEMA, "trial": trial, "seed": cfg.seed, "ell": ell, "horizon": cfg.horizon,
            "found": found, "W": W, "wz": wz, "h_c_exact": cfg._exact[0]}


def run_wz(config: ExperimentConfig):
    """ln W_l / l over a grid of l, with x streamed from P; returns (rows, summary)."""
    config._exact = _exact(config.P, config.Q)
    tasks = [(config, ell, t) for ell in config.ell_grid for t in range(config.trials)]
    rows = _run_pool(_wz_trial, tasks, config.workers)
    rows.sort(key=lambda r: (r["ell"], r["trial"]))
    per_ell = []
    for ell in config.ell_grid:
        sel = [r for r in rows if r["ell"] == ell]
        vals = [r["wz"] for r in sel if r["found"]]
        per_ell.append({
            "ell": ell,
            "not_found_rate": 1 - len(vals) / len(sel),
            "median_wz": float(np.median(vals)) if vals else math.nan,
        })
    summary = _json_safe({"schema": SCHEMA, "h_c_exact": config._exact[0], "per_ell": per_ell})
    write_csv(rows, WZ_COLUMNS, config.csv_path)
    _write_json(summary, config.summary_path)
    return rows, summary


def config_dict(config: ExperimentConfig) -> dict:
    out = {}
    for f in fields(config):
        v = getattr(config, f.name)
        out[f.name] = v.to_json() if isinstance(v, CylinderMeasure) else v
    return out

