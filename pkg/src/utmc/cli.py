"""Command line interface.

Subcommands: gen, chain, mh, theory, oracle, sweep, validate. Flags mirror
the JSON config keys; when both a config file and flags are given, flags
win. Errors exit nonzero; with --error-json they are also emitted as a
JSON object on stderr. The default output directory comes from the
UTMC_OUTDIR environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import chain as chain_mod
from . import harness, observables, oracle, streams, theory, validation
from .grammar import GrammarParams, generate_batch, sample_grammar, save_grammar


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--error-json", action="store_true", help="emit errors as JSON on stderr")


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _add_grammar_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--v", type=int, required=True, help="alphabet size")
    p.add_argument("--s", type=int, default=2, help="branching factor")
    p.add_argument("--depth", type=int, required=True, help="tree depth L")
    p.add_argument("--m", type=int, required=True, help="rules per symbol")
    p.add_argument("--shared-rules", action="store_true")


def _outdir(args) -> Path:
    out = args.out if args.out is not None else harness.default_outdir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_gen(args) -> int:
    params = GrammarParams(v=args.v, s=args.s, L=args.depth, m=args.m, seed=_seed(args))
    g = sample_grammar(params, shared_rules=args.shared_rules)
    out = _outdir(args)
    path = out / "grammar.json"
    save_grammar(g, path)
    print(f"wrote {path}")
    if args.samples > 0:
        rng = streams.stream(_seed(args), streams.DATA)
        batch = generate_batch(g, args.samples, rng)
        spath = out / "samples.csv"
        np.savetxt(spath, batch[0], fmt="%d", delimiter=",")
        print(f"wrote {spath} ({args.samples} sentences)")
    return 0


def _cmd_chain(args) -> int:
    cfg = harness.ExperimentConfig(
        v=args.v,
        s=args.s,
        L=args.depth,
        m_list=[args.m],
        k_list=[args.k],
        mask_budgets=[args.k * args.steps],
        chains=args.chains,
        realizations=args.realizations,
        seed=_seed(args),
        shared_rules=args.shared_rules,
    )
    manifest = harness.run_sweep(cfg, out_dir=_outdir(args))
    print(f"wrote {len(manifest['files'])} files to {_outdir(args)}")
    return 0


def _cmd_mh(args) -> int:
    params = GrammarParams(
        v=args.v, s=args.s, L=args.depth, m=args.m,
        seed=streams.derive_seed(_seed(args), streams.GRAMMAR, 0, 0),
    )
    g = sample_grammar(params, shared_rules=args.shared_rules)
    energy = chain_mod.energy_from_json(json.loads(args.energy))
    out = _outdir(args)
    rng_init = streams.stream(_seed(args), streams.INIT)
    x0 = generate_batch(g, args.chains, rng_init)
    visits: dict[bytes, int] = {}

    def on_record(n, levels):
        if n == 0:
            return
        for row in levels[0]:
            key = row.astype(np.int32).tobytes()
            visits[key] = visits.get(key, 0) + 1

    rng = streams.stream(_seed(args), streams.CHAIN)
    _, accepts = chain_mod.run_chain_batch(
        g, x0, k=args.k, n_steps=args.steps, rng=rng, callback=on_record, energy=energy
    )
    rate = float(accepts.sum() / (args.chains * args.steps)) if args.steps else 0.0
    total = sum(visits.values())
    rows = sorted(visits.items())
    import csv

    hpath = out / "mh_histogram.csv"
    with open(hpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sentence", "count", "frequency"])
        for key, count in rows:
            sent = "|".join(str(x) for x in np.frombuffer(key, dtype=np.int32))
            w.writerow([sent, count, harness.FLOAT_FMT % (count / total)])
    with open(out / "mh_meta.json", "w") as fh:
        json.dump(
            {
                "acceptance_rate": rate,
                "steps": args.steps,
                "chains": args.chains,
                "k": args.k,
                "energy": json.loads(args.energy),
                "distinct_states": len(rows),
            },
            fh,
            indent=1,
        )
    print(f"acceptance rate {rate:.4f}; {len(rows)} distinct states -> {hpath}")
    return 0


def _cmd_theory(args) -> int:
    f_grid = None
    if args.f_grid:
        lo, hi, num = args.f_grid
        f_grid = np.linspace(float(lo), float(hi), int(num)).tolist()
    rep = theory.threshold_report(args.mode, s=args.s, v=args.v, L=args.depth, f_grid=f_grid)
    out = _outdir(args)
    path = out / "thresholds.json"
    with open(path, "w") as fh:
        fh.write(rep.to_json())
    per = "none" if rep.f_per is None else f"{rep.f_per:.6f}"
    inv = "none" if rep.f_inv is None else f"{rep.f_inv:.6f}"
    print("mode      v        s   L    f_per       f_inv       residuals")
    print(
        f"{rep.mode:<9} {rep.v if rep.v else '-':<8} {rep.s:<3} {rep.L if rep.L else '-':<4} "
        f"{per:<11} {inv:<11} "
        f"{rep.f_per_residual if rep.f_per_residual is not None else '-'}, "
        f"{rep.f_inv_residual if rep.f_inv_residual is not None else '-'}"
    )
    print(f"wrote {path}")
    return 0


def _cmd_oracle(args) -> int:
    rows = harness.component_stats(
        v=args.v,
        s=args.s,
        L=args.depth,
        m_list=args.m_list,
        realizations=args.realizations,
        seed=_seed(args),
        budget=args.budget,
    )
    out = _outdir(args)
    path = out / "components.csv"
    harness.write_component_csv(path, rows)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def _cmd_sweep(args) -> int:
    if args.config:
        cfg = harness.ExperimentConfig.from_json(Path(args.config).read_text())
        for key in ("seed", "workers"):
            val = getattr(args, key)
            if val is not None:
                setattr(cfg, key, val)
    else:
        if not (args.v and args.depth and args.m_list and args.k_list):
            raise ValueError("sweep needs --config or --v/--depth/--m-list/--k-list")
        cfg = harness.ExperimentConfig(
            v=args.v,
            s=args.s,
            L=args.depth,
            m_list=args.m_list,
            k_list=args.k_list,
            mask_budgets=args.budgets,
            chains=args.chains,
            realizations=args.realizations,
            seed=_seed(args),
            workers=args.workers or 0,
        )
    manifest = harness.run_sweep(cfg, out_dir=args.out)
    outdir = args.out if args.out else (cfg.output_dir or harness.default_outdir())
    print(f"sweep complete: {len(manifest['cells'])} cells, files in {outdir}")
    return 0


def _cmd_validate(args) -> int:
    ok = validation.run_all(verbose=True)
    print("validation:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="utmc", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a grammar and serialize it")
    _add_common(p)
    _add_grammar_args(p)
    p.add_argument("--samples", type=int, default=0, help="also emit this many sentences")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("chain", help="run relaxation chains, emit correlation curves")
    _add_common(p)
    _add_grammar_args(p)
    p.add_argument("--k", type=int, default=1, help="masked positions per step")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--chains", type=int, default=16)
    p.add_argument("--realizations", type=int, default=1)
    p.set_defaults(fn=_cmd_chain)

    p = sub.add_parser("mh", help="energy-biased chains, emit state histogram")
    _add_common(p)
    _add_grammar_args(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--chains", type=int, default=8)
    p.add_argument(
        "--energy",
        default='{"kind": "zero"}',
        help='energy JSON, e.g. {"kind": "leaf_count", "symbol": 1, "weight": 1.0}',
    )
    p.set_defaults(fn=_cmd_mh)

    p = sub.add_parser("theory", help="threshold predictions")
    _add_common(p)
    p.add_argument("--mode", choices=["asymptotic", "finite"], default="asymptotic")
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--v", type=int, default=None)
    p.add_argument("--depth", type=int, default=None, help="tree depth L (finite mode)")
    p.add_argument("--f-grid", nargs=3, metavar=("LO", "HI", "NUM"), default=None)
    p.set_defaults(fn=_cmd_theory)

    p = sub.add_parser("oracle", help="enumerate sentences, component statistics")
    _add_common(p)
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--m-list", type=int, nargs="+", required=True)
    p.add_argument("--realizations", type=int, default=20)
    p.add_argument("--budget", type=int, default=oracle.DEFAULT_BUDGET)
    p.set_defaults(fn=_cmd_oracle)

    p = sub.add_parser("sweep", help="full (f, rho) phase-diagram run")
    _add_common(p)
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    p.add_argument("--v", type=int, default=None)
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--m-list", type=int, nargs="+", default=None)
    p.add_argument("--k-list", type=int, nargs="+", default=None)
    p.add_argument("--budgets", type=int, nargs="+", default=[10_000])
    p.add_argument("--chains", type=int, default=16)
    p.add_argument("--realizations", type=int, default=2)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("validate", help="run built-in correctness checks")
    _add_common(p)
    p.set_defaults(fn=_cmd_validate)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as e:
        if getattr(args, "error_json", False):
            print(
                json.dumps({"error": type(e).__name__, "detail": str(e)}),
                file=sys.stderr,
            )
        else:
            print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
