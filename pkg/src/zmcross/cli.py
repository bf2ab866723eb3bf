"""Command-line interface: ``zmcross <command> ...``.

Exit codes: 0 success, 2 configuration or input error, 3 support violation,
4 enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import analytics, auditor, harness
from .core import Alphabet, RngStream, read_sequence, stream_id_for, write_sequence
from .errors import BudgetExceeded, ConfigError, SupportViolation, ZmError
from .estimators import zm_relative_estimate
from .matcher import build_index
from .parsers import block_parse, lz78_parse, threshold_parse, zm_parse
from .sources import DEFAULT_BUDGET, load_model

EXIT_OK, EXIT_CONFIG, EXIT_SUPPORT, EXIT_BUDGET = 0, 2, 3, 4


def _dump(obj, out=None):
    text = json.dumps(harness._json_safe(obj), indent=2, default=harness._json_default) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _alphabet(args, *texts) -> Alphabet:
    """Alphabet from --model, --alphabet glyphs, or the sorted glyphs seen in the inputs."""
    if getattr(args, "model", None):
        return load_model(args.model).alphabet
    if args.alphabet:
        return Alphabet(len(args.alphabet), tuple(args.alphabet))
    seen = sorted(set("".join(t.rstrip("\r\n") for t in texts)))
    if not seen:
        return Alphabet.binary()
    return Alphabet(len(seen), tuple(seen))


def _text(source: str) -> str:
    p = Path(source)
    return p.read_text(encoding="utf-8") if p.is_file() else source


def cmd_simulate(args):
    model = load_model(args.model)
    sid = args.stream_id if args.stream_id is not None else stream_id_for("simulate")
    s = model.sample(args.n, RngStream(args.seed, sid))
    if args.out:
        write_sequence(s, args.out)
    else:
        sys.stdout.write(str(s) + "\n")


def cmd_parse(args):
    texts = [_text(args.y)] + ([_text(args.x)] if args.x else [])
    model = load_model(args.model) if args.model else None
    A = model.alphabet if model is not None else _alphabet(args, *texts)
    y = read_sequence(texts[0], A)
    if args.kind == "zm":
        if not args.x:
            raise ConfigError("x", "parse zm needs --x")
        res = zm_parse(read_sequence(texts[1], A), y).to_json()
    elif args.kind == "lz78":
        res = lz78_parse(y).to_json()
    else:
        if model is None:
            raise ConfigError("model", f"parse {args.kind} needs --model")
        if args.kind == "threshold":
            res = threshold_parse(y, model, args.theta).to_json()
        else:
            res = block_parse(y, model, len(y), args.eps, args.alpha).to_json()
    _dump(res, args.out)


def cmd_estimate(args):
    tx, ty = _text(args.x), _text(args.y)
    A = _alphabet(args, tx, ty)
    x, y = read_sequence(tx, A), read_sequence(ty, A)
    rec = zm_relative_estimate(x, y, args.lz78_with_alphabet, build_index(x))
    obj = rec.to_json()
    if args.bits:
        for k in ("q_hat", "h_hat", "h_r_hat"):
            obj[k] /= math.log(2)
        obj["units"] = "bits"
    else:
        obj["units"] = "nats"
    if args.json:
        _dump(obj, args.out)
    else:
        sys.stdout.write(f"N={obj['N']} c_N={obj['c']} q_hat={obj['q_hat']!r} h_hat={obj['h_hat']!r} "
                         f"h_r_hat={obj['h_r_hat']!r} ({obj['units']})\n")


def cmd_exact(args):
    P, Q = load_model(args.p), load_model(args.q)
    rep = analytics.entropy_report(Q, P, args.trunc, args.budget)
    _dump(rep.to_json(bits=args.bits), args.out)


def cmd_audit(args):
    P = load_model(args.model)
    rep = auditor.audit(P, args.nmax, args.mmax, args.budget, kb_word=args.kb,
                        kb_trials=args.trials, seed=args.seed)
    _dump(rep.to_json(), args.out)


def cmd_experiment(args):
    overrides = {
        "N_grid": args.N, "trials": args.trials, "seed": args.seed, "eps": args.eps,
        "alpha": args.alpha, "workers": args.workers, "csv_path": args.csv,
        "summary_path": args.summary, "ell_grid": args.ell, "horizon": args.horizon,
        "p_model": args.p, "q_model": args.q,
        "include_runtime": True if args.runtime else None,
        "lz78_with_alphabet": True if args.lz78_with_alphabet else None,
    }
    if args.config:
        cfg = harness.ExperimentConfig.load(args.config, **overrides)
    else:
        cfg = harness.ExperimentConfig.from_json({}, None, **overrides)
    if args.kind == "converge":
        _, summary = harness.run_convergence(cfg)
        if not cfg.summary_path:
            _dump(summary)
    elif args.kind == "blocks":
        report = harness.run_block_diagnostics(cfg)
        if not cfg.summary_path:
            _dump(report)
    else:
        _, summary = harness.run_wz(cfg)
        if not cfg.summary_path:
            _dump(summary)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zmcross", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a sequence from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream-id", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("parse", help="parse y and print JSON boundaries")
    p.add_argument("kind", choices=["zm", "lz78", "threshold", "block"])
    p.add_argument("--y", required=True, help="sequence file or literal text")
    p.add_argument("--x", help="reference sequence (zm)")
    p.add_argument("--model", help="measure for threshold/block parsing")
    p.add_argument("--alphabet", help="glyph string, e.g. 012")
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("estimate", help="cross, entropy and relative entropy estimates")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--alphabet")
    p.add_argument("--json", action="store_true")
    p.add_argument("--bits", action="store_true")
    p.add_argument("--lz78-with-alphabet", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("exact", help="exact or truncated h, h_c, h_r")
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("--trunc", type=int)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--bits", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("audit", help="decoupling and decay audits of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--nmax", type=int, default=8)
    p.add_argument("--mmax", type=int, default=8)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--kb", help="word for the waiting-time tail check")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("experiment", help="run a batch experiment")
    p.add_argument("kind", choices=["converge", "blocks", "wz"])
    p.add_argument("--config", help="JSON configuration; flags override its fields")
    p.add_argument("--p")
    p.add_argument("--q")
    p.add_argument("--N", type=int, nargs="+")
    p.add_argument("--ell", type=int, nargs="+")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--csv")
    p.add_argument("--summary")
    p.add_argument("--runtime", action="store_true", help="add a runtime_ms column (not reproducible)")
    p.add_argument("--lz78-with-alphabet", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except SupportViolation as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SUPPORT
    except BudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except BrokenPipeError:
        # reader went away (e.g. ``| head``); silence the flush at interpreter exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except (ZmError, OSError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
