"""Built-in correctness checks behind the ``validate`` CLI subcommand.

A fast subset of the full acceptance suite: exact-kernel detailed balance,
message passing against brute-force enumeration, and the analytic ergodic
baseline against Monte Carlo pairs. Each check returns (name, ok, detail).
"""

from __future__ import annotations

import numpy as np

from . import chain, inference, observables, oracle, streams
from .grammar import GrammarParams, sample_grammar
from .inference import MaskedLeaves


def check_detailed_balance(seed: int = 11) -> tuple[str, bool, str]:
    g = sample_grammar(GrammarParams(v=4, s=2, L=2, m=2, seed=seed))
    worst_sym, worst_col = 0.0, 0.0
    for k in (1, 2, 4):
        U, _ = chain.exact_kernel(g, k)
        worst_sym = max(worst_sym, float(np.abs(U - U.T).max()))
        worst_col = max(worst_col, float(np.abs(U.sum(axis=0) - 1.0).max()))
    ok = worst_sym <= 1e-12 and worst_col <= 1e-12
    return (
        "detailed balance (kernel symmetry, column sums)",
        ok,
        f"max asymmetry {worst_sym:.2e}, max column-sum error {worst_col:.2e}",
    )


def check_bp_against_enumeration(cases: int = 12, seed: int = 12) -> tuple[str, bool, str]:
    rng = streams.stream(seed, streams.MISC)
    worst = 0.0
    for c in range(cases):
        v = int(rng.integers(2, 6))
        s = 2
        L = int(rng.integers(1, 4))
        m_max = min(v ** (s - 1), 3)
        m = int(rng.integers(1, m_max + 1))
        g = sample_grammar(GrammarParams(v=v, s=s, L=L, m=m, seed=int(rng.integers(2**31))))
        sset = oracle.enumerate_sentences(g, budget=10**5)
        x = sset.tree(int(rng.integers(sset.n)))
        n_mask = int(rng.integers(0, g.params.d + 1))
        pos = rng.choice(g.params.d, size=n_mask, replace=False)
        masked = MaskedLeaves.from_sample(x, pos)
        exact = oracle.posterior_brute(sset, masked)
        got = inference.posterior_marginals(g, masked)
        for l in range(g.params.L + 1):
            worst = max(worst, float(np.abs(got[l] - exact.marginals[l]).max()))
    ok = worst <= 1e-10
    return (
        "message passing vs brute-force marginals",
        ok,
        f"{cases} random cases, max abs deviation {worst:.2e}",
    )


def check_ergodic_baseline(seed: int = 13) -> tuple[str, bool, str]:
    # The analytic value averages over rule draws, so pool per-grammar pair
    # means across realizations and test against the realization scatter.
    rng = streams.stream(seed, streams.MISC)
    worst_sigma = 0.0
    reals, pairs = 24, 800
    for v, s, L, m in [(4, 2, 1, 4), (4, 2, 2, 2), (8, 2, 3, 3)]:
        if abs(observables.ergodic_baseline(v, s, L, m, L) - 1.0 / v) > 1e-15:
            return ("ergodic baseline", False, "root baseline differs from 1/v")
        per_real = []
        for _ in range(reals):
            g = sample_grammar(GrammarParams(v=v, s=s, L=L, m=m, seed=int(rng.integers(2**31))))
            per_real.append(observables.independent_pair_stats(g, pairs, rng).means)
        per_real = np.array(per_real)
        for l in range(L + 1):
            mu = observables.ergodic_baseline(v, s, L, m, l)
            sem = per_real[:, l].std(ddof=1) / np.sqrt(reals)
            worst_sigma = max(worst_sigma, abs(per_real[:, l].mean() - mu) / sem)
    ok = worst_sigma <= 4.5
    return (
        "analytic ergodic baseline vs independent pairs",
        ok,
        f"worst deviation {worst_sigma:.2f} sigma over 3 parameter sets x {reals} rule draws",
    )


ALL_CHECKS = [check_detailed_balance, check_bp_against_enumeration, check_ergodic_baseline]


def run_all(verbose: bool = True) -> bool:
    all_ok = True
    for fn in ALL_CHECKS:
        name, ok, detail = fn()
        all_ok &= ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return all_ok
