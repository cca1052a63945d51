import json
import math

import numpy as np
import pytest

from utmc import oracle, streams
from utmc.chain import (
    ZERO,
    LatentCount,
    LeafCount,
    UturnConfig,
    ZeroEnergy,
    energy_from_json,
    energy_to_json,
    exact_kernel,
    export_trace_csv,
    mh_step,
    reachable_ids,
    run_chain,
    run_chain_batch,
    step_batch,
    uturn_step,
)
from utmc.grammar import GrammarParams, sample_grammar
from utmc.inference import parse, TreeSample

from conftest import repeat_levels, sentence_coder


def test_uturn_config():
    cfg = UturnConfig.from_rho(0.26, d=16, n_steps=10)
    assert cfg.k == 4 and cfg.rho(16) == 0.25
    assert UturnConfig.from_rho(0.001, d=16, n_steps=1).k == 1  # rounds up to 1
    with pytest.raises(ValueError):
        UturnConfig(k=0, n_steps=1)
    with pytest.raises(ValueError):
        UturnConfig.from_rho(1.5, d=4, n_steps=1)


def test_uturn_step_stays_on_support_and_is_local(tiny):
    g, sset = tiny
    ids = sentence_coder(sset)
    rng = streams.stream(3, streams.CHAIN)
    x = sset.tree(12)
    for k in (1, 2, 4):
        for _ in range(20):
            y = uturn_step(g, x, k, rng)
            assert ids(y.leaves[None, :])[0] >= 0  # valid sentence
            assert (y.leaves != x.leaves).sum() <= k  # only masked positions move


def test_uturn_step_k1_frozen_on_isolated_m1(frozen_m1):
    g, sset = frozen_m1
    rng = streams.stream(4, streams.CHAIN)
    x = sset.tree(1)
    for _ in range(50):
        y = uturn_step(g, x, 1, rng)
        assert np.array_equal(y.leaves, x.leaves)


def test_uturn_step_full_mask_is_fresh_sample(tiny):
    from scipy.stats import chisquare

    g, sset = tiny
    ids = sentence_coder(sset)
    x0 = repeat_levels(sset, 5, 120_000)
    new = step_batch(g, x0, g.params.d, streams.stream(5, streams.CHAIN))
    counts = np.bincount(ids(new[0]), minlength=sset.n)
    assert chisquare(counts).pvalue > 1e-4


@pytest.mark.parametrize("k", [1, 2])
def test_one_step_law_matches_exact_kernel(tiny, k):
    # k=1 exercises the path-restricted sampler, k=2 the general sweep
    g, sset = tiny
    ids = sentence_coder(sset)
    U, _ = exact_kernel(g, k, sentences=sset)
    rng = streams.stream(40 + k, streams.CHAIN)
    B = 40_000
    for start in (0, 7, 19):
        new = step_batch(g, repeat_levels(sset, start, B), k, rng)
        got = ids(new[0])
        assert got.min() >= 0
        counts = np.bincount(got, minlength=sset.n)
        col = U[:, start]
        assert (counts[col == 0] == 0).all()
        sigma = np.sqrt(B * col * (1 - col))
        ok = col > 0
        assert (np.abs(counts - B * col)[ok] <= 4 * np.maximum(sigma[ok], 1.0)).all()


def test_run_chain_zero_steps_records_only_x0(tiny):
    g, sset = tiny
    trace = run_chain(g, sset.tree(0), UturnConfig(k=1, n_steps=0, seed=1))
    assert list(trace.steps) == [0]
    assert len(trace.samples) == 1


def test_run_chain_deterministic_under_seed(tiny):
    g, sset = tiny
    cfg = UturnConfig(k=2, n_steps=40, seed=99)
    a = run_chain(g, sset.tree(3), cfg)
    b = run_chain(g, sset.tree(3), cfg)
    for xa, xb in zip(a.samples, b.samples):
        assert np.array_equal(xa.leaves, xb.leaves)


def test_run_chain_full_mask_histogram_uniform(tiny):
    from scipy.stats import chisquare

    g, sset = tiny
    ids = sentence_coder(sset)
    x0 = repeat_levels(sset, 2, 400)
    counts = np.zeros(sset.n, dtype=np.int64)

    def cb(n, levels):
        if n > 0:
            np.add.at(counts, ids(levels[0]), 1)

    run_chain_batch(g, x0, k=g.params.d, n_steps=250, rng=streams.stream(6, streams.CHAIN), callback=cb)
    assert chisquare(counts).pvalue > 1e-4


def test_run_chain_frozen_m1(frozen_m1):
    g, sset = frozen_m1
    x0 = sset.tree(2)
    trace = run_chain(g, x0, UturnConfig(k=1, n_steps=30, seed=0))
    for sample in trace.samples:
        assert np.array_equal(sample.leaves, x0.leaves)


def test_observers_see_recorded_steps(tiny):
    g, sset = tiny
    seen = []
    run_chain(
        g,
        sset.tree(1),
        UturnConfig(k=1, n_steps=10, record_stride=3, seed=2),
        observers=[lambda n, x: seen.append(n)],
    )
    assert seen == [0, 3, 6, 9, 10]


def test_mh_zero_energy_always_accepts(tiny):
    g, sset = tiny
    trace = run_chain(g, sset.tree(0), UturnConfig(k=2, n_steps=60, seed=3), energy=ZERO)
    assert trace.accepted.all()


class _ShiftEnergy:
    """Test rig: H = 0 on the reference object, ``delta`` elsewhere, making
    every proposal carry a fixed energy increase."""

    def __init__(self, ref, delta):
        self.ref = ref
        self.delta = delta

    def __call__(self, x):
        return 0.0 if x is self.ref else self.delta


def test_mh_acceptance_probability_formula(tiny):
    g, sset = tiny
    x0 = sset.tree(0)
    rng = streams.stream(11, streams.CHAIN)

    n1 = 30_000
    acc = sum(mh_step(g, x0, 2, _ShiftEnergy(x0, 1.0), rng)[1] for _ in range(n1))
    p = math.exp(-1.0)
    assert abs(acc / n1 - p) <= 4 * math.sqrt(p * (1 - p) / n1)

    n2 = 250_000
    acc = sum(mh_step(g, x0, 2, _ShiftEnergy(x0, 10.0), rng)[1] for _ in range(n2))
    p = math.exp(-10.0)
    assert abs(acc / n2 - p) <= 4 * math.sqrt(p * (1 - p) / n2)


def test_mh_rejected_steps_keep_state_and_flags(tiny):
    g, sset = tiny
    x0 = sset.tree(6)
    rng = streams.stream(12, streams.CHAIN)
    x, ok = mh_step(g, x0, 2, _ShiftEnergy(x0, 50.0), rng)
    assert not ok
    assert x is x0


def test_mh_batch_matches_reweighted_law(tiny):
    g, sset = tiny
    ids = sentence_coder(sset)
    energy = LeafCount(symbol=1, weight=1.0)
    U, _ = exact_kernel(g, 2, sentences=sset)
    members = reachable_ids(U, 0)
    exact = oracle.reweighted_law(sset, energy, members=members)
    counts = np.zeros(sset.n, dtype=np.int64)

    def cb(n, levels):
        if n > 500:
            np.add.at(counts, ids(levels[0]), 1)

    run_chain_batch(
        g,
        repeat_levels(sset, 0, 40),
        k=2,
        n_steps=5_500,
        rng=streams.stream(13, streams.CHAIN),
        callback=cb,
        energy=energy,
    )
    emp = counts / counts.sum()
    assert 0.5 * np.abs(emp - exact).sum() <= 0.03


def test_exact_kernel_columns_and_symmetry(tiny):
    g, sset = tiny
    for k in (1, 2, 3, 4):
        U, _ = exact_kernel(g, k, sentences=sset)
        assert np.abs(U.sum(axis=0) - 1.0).max() <= 1e-12
        assert np.abs(U - U.T).max() <= 1e-12


def test_exact_kernel_full_mask_columns_uniform(tiny):
    g, sset = tiny
    U, _ = exact_kernel(g, g.params.d, sentences=sset)
    assert np.abs(U - 1.0 / sset.n).max() <= 1e-12


def test_exact_kernel_blocks_match_flip_components(tiny):
    g, sset = tiny
    U, _ = exact_kernel(g, 1, sentences=sset)
    graph = oracle.build_flip_graph(sset)
    labels = graph.labels
    cross = labels[:, None] != labels[None, :]
    assert (U[cross] == 0).all()


def test_exact_kernel_budget_refusal():
    g = sample_grammar(GrammarParams(v=4, s=2, L=3, m=4, seed=0))
    with pytest.raises(oracle.BudgetExceededError):
        exact_kernel(g, 1, max_sentences=100)


def test_energy_json_roundtrip():
    for e in (ZERO, LeafCount(2, 1.5), LatentCount(1, 3, 0.5)):
        assert energy_from_json(energy_to_json(e)) == e
    assert energy_from_json(None) == ZERO
    with pytest.raises(ValueError):
        energy_from_json({"kind": "nope"})


def test_energy_batched_matches_scalar(tiny):
    g, sset = tiny
    levels = [lvl[:10].astype(np.int64) for lvl in sset.levels]
    for e in (LeafCount(1, 2.0), LatentCount(1, 2, 1.0), ZeroEnergy()):
        batched = e.of_levels(levels)
        scalar = [e(sset.tree(i)) for i in range(10)]
        assert np.allclose(batched, scalar)


def test_export_trace_csv(tmp_path, tiny):
    g, sset = tiny
    trace = run_chain(g, sset.tree(0), UturnConfig(k=2, n_steps=8, seed=5), energy=ZERO)
    path = tmp_path / "trace.csv"
    export_trace_csv(trace, path, chain_id=3)
    rows = path.read_text().strip().split("\n")
    assert rows[0] == "chain_id,n,cumulative_masks,level,overlap"
    assert len(rows) == 1 + len(trace.steps) * 3
    meta = json.loads((tmp_path / "trace.csv.meta.json").read_text())
    assert meta["k"] == 2 and meta["accepted_fraction"] == 1.0


def test_batch_and_scalar_share_support(tiny):
    # every batched state parses as valid
    g, sset = tiny
    x0 = repeat_levels(sset, 8, 64)
    final, _ = run_chain_batch(g, x0, k=3, n_steps=50, rng=streams.stream(21, streams.CHAIN))
    for row in final[0]:
        assert isinstance(parse(g, row), TreeSample)
