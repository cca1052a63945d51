import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utmc import oracle, streams
from utmc.grammar import MASK, GrammarParams, TreeSample, sample_grammar
from utmc.inference import (
    InconsistentLeavesError,
    Invalid,
    MaskedLeaves,
    marginals_batch,
    parse,
    posterior_marginals,
    posterior_sample,
    sample_down_batch,
    upward_pass,
    upward_pass_batch,
)

from conftest import repeat_levels, sentence_coder


def test_parse_roundtrip(tiny):
    g, sset = tiny
    for i in range(sset.n):
        t = parse(g, sset.sequences[i])
        assert isinstance(t, TreeSample)
        for l in range(3):
            assert np.array_equal(t.levels[l], sset.levels[l][i])


def test_parse_single_flip_invalid_on_isolated_m1(frozen_m1):
    # every single-leaf flip leaves the sentence set (flip graph verified
    # to be fully isolated for this rule draw)
    g, sset = frozen_m1
    for i in range(sset.n):
        leaves = sset.sequences[i]
        for pos in range(g.params.d):
            for sym in range(1, g.params.v + 1):
                if sym == leaves[pos]:
                    continue
                flipped = leaves.copy()
                flipped[pos] = sym
                assert isinstance(parse(g, flipped), Invalid)


def test_parse_full_density_accepts_everything():
    g = sample_grammar(GrammarParams(v=2, s=2, L=2, m=2, seed=1))
    sset = oracle.enumerate_sentences(g)
    assert sset.n == 2**4  # all sequences are sentences at full density
    for code in range(16):
        leaves = np.array([(code >> i) & 1 for i in range(4)]) + 1
        assert isinstance(parse(g, leaves), TreeSample)


def test_parse_invalid_reports_lowest_level():
    g, _ = _isolated()
    sset = oracle.enumerate_sentences(g)
    leaves = sset.sequences[0].copy()
    leaves[1] = leaves[1] % g.params.v + 1
    bad = parse(g, leaves)
    assert isinstance(bad, Invalid)
    assert bad.level == 1 and bad.position == 0  # node 0 covers leaves 0..1


def _isolated():
    g = sample_grammar(GrammarParams(v=4, s=2, L=2, m=1, seed=2))
    return g, None


def test_upward_no_masks_gives_root_indicator(tiny):
    g, sset = tiny
    i = 9
    msgs = upward_pass(g, MaskedLeaves(sset.sequences[i]))
    root = msgs.root_weights
    true_root = sset.levels[2][i][0]
    assert root[true_root - 1] == pytest.approx(1.0)
    assert np.count_nonzero(root) == 1


def test_upward_all_masked_uniform_root(tiny):
    g, _ = tiny
    msgs = upward_pass(g, MaskedLeaves(np.zeros(4, dtype=int)))
    # per-level symmetric tables make every root symbol carry m**I weight
    assert np.allclose(msgs.root_weights, 0.25, atol=1e-12)


def test_upward_single_mask_marginal_vs_brute(tiny):
    g, sset = tiny
    masked = MaskedLeaves.from_sample(sset.tree(13), [2])
    exact = oracle.posterior_brute(sset, masked)
    got = posterior_marginals(g, masked)
    for l in range(3):
        assert np.abs(got[l] - exact.marginals[l]).max() <= 1e-10


def test_inconsistent_input_raises(frozen_m1):
    g, sset = frozen_m1
    leaves = sset.sequences[0].copy()
    leaves[0] = leaves[0] % g.params.v + 1  # invalid flip
    leaves[3] = MASK  # masking elsewhere cannot repair it
    with pytest.raises(InconsistentLeavesError):
        upward_pass(g, MaskedLeaves(leaves))


def test_marginals_rows_normalized_and_consistent(tiny):
    g, sset = tiny
    masked = MaskedLeaves.from_sample(sset.tree(20), [0, 3])
    marg = posterior_marginals(g, masked)
    for l, mg in enumerate(marg):
        assert np.abs(mg.sum(axis=1) - 1.0).max() <= 1e-12
    # observed leaves have indicator marginals
    for pos in (1, 2):
        assert marg[0][pos, masked.values[pos] - 1] == pytest.approx(1.0)


def test_marginals_fully_masked_root_uniform(tiny):
    g, _ = tiny
    marg = posterior_marginals(g, MaskedLeaves(np.zeros(4, dtype=int)))
    assert np.allclose(marg[2][0], 0.25, atol=1e-12)


def test_marginals_match_brute_random_cases():
    rng = streams.stream(77, streams.MISC)
    for _ in range(25):
        v = int(rng.integers(2, 6))
        L = int(rng.integers(1, 4))
        m = int(rng.integers(1, min(v, 4)))
        g = sample_grammar(GrammarParams(v=v, s=2, L=L, m=m, seed=int(rng.integers(2**31))))
        sset = oracle.enumerate_sentences(g, budget=10**5)
        x = sset.tree(int(rng.integers(sset.n)))
        pos = rng.choice(g.params.d, size=int(rng.integers(0, g.params.d + 1)), replace=False)
        masked = MaskedLeaves.from_sample(x, pos)
        got = posterior_marginals(g, masked)
        exact = oracle.posterior_brute(sset, masked)
        for l in range(L + 1):
            assert np.abs(got[l] - exact.marginals[l]).max() <= 1e-10


def test_posterior_sample_zero_masks_returns_parse(tiny):
    g, sset = tiny
    rng = streams.stream(1, streams.MISC)
    x = sset.tree(4)
    for _ in range(5):
        y = posterior_sample(g, MaskedLeaves(x.leaves), rng)
        for l in range(3):
            assert np.array_equal(y.levels[l], x.levels[l])


def test_posterior_sample_all_masked_is_generation_law(tiny):
    from scipy.stats import chisquare

    g, sset = tiny
    ids = sentence_coder(sset)
    rng = streams.stream(8, streams.MISC)
    B = 200_000
    masked = np.zeros((B, g.params.d), dtype=np.int64)
    ups, prods = upward_pass_batch(g, masked)
    levels = sample_down_batch(g, ups, prods, rng)
    counts = np.bincount(ids(levels[0]), minlength=sset.n)
    assert chisquare(counts).pvalue > 1e-4


def test_posterior_sample_two_masks_matches_brute_conditional(tiny):
    g, sset = tiny
    ids = sentence_coder(sset)
    x = sset.tree(17)
    masked = MaskedLeaves.from_sample(x, [1, 3])
    exact = oracle.posterior_brute(sset, masked)
    law = np.zeros(sset.n)
    law[exact.ids] = exact.probs
    B = 1_000_000
    stack = np.repeat(masked.values[None, :], B, axis=0)
    ups, prods = upward_pass_batch(g, stack)
    levels = sample_down_batch(g, ups, prods, streams.stream(9, streams.MISC))
    got = ids(levels[0])
    assert got.min() >= 0
    counts = np.bincount(got, minlength=sset.n)
    sigma = np.sqrt(B * law * (1 - law))
    assert (counts[law == 0] == 0).all()
    ok = law > 0
    assert np.abs(counts - B * law)[ok].max() <= 4 * sigma[ok].max()


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    v=st.integers(2, 6),
    L=st.integers(1, 3),
    data=st.data(),
)
def test_posterior_sample_masking_consistency(seed, v, L, data):
    # output always parses and agrees with the input on unmasked leaves
    m = data.draw(st.integers(1, min(v, 4)))
    g = sample_grammar(GrammarParams(v=v, s=2, L=L, m=m, seed=seed))
    rng = streams.stream(seed, streams.MISC)
    from utmc.grammar import generate

    x = generate(g, rng)
    n_mask = data.draw(st.integers(0, g.params.d))
    pos = rng.choice(g.params.d, size=n_mask, replace=False)
    masked = MaskedLeaves.from_sample(x, pos)
    y = posterior_sample(g, masked, rng)
    assert y.is_consistent(g)
    keep = np.setdiff1d(np.arange(g.params.d), pos)
    assert np.array_equal(y.leaves[keep], x.leaves[keep])


def test_no_underflow_at_large_depth():
    # per-node renormalization keeps messages finite far beyond d = 4096
    g = sample_grammar(GrammarParams(v=4, s=2, L=12, m=2, seed=0))
    rng = streams.stream(0, streams.MISC)
    from utmc.grammar import generate

    x = generate(g, rng)
    masked = x.leaves.copy()
    masked[rng.random(g.params.d) < 0.5] = MASK
    ups, _ = upward_pass_batch(g, masked[None, :])
    for u in ups:
        assert np.isfinite(u).all()
        assert (u.sum(axis=2) > 0).all()


def test_batched_marginals_agree_with_scalar(tiny):
    g, sset = tiny
    inputs = np.stack(
        [
            MaskedLeaves.from_sample(sset.tree(i), [i % 4]).values
            for i in range(6)
        ]
    )
    ups, prods = upward_pass_batch(g, inputs)
    batch = marginals_batch(g, ups, prods)
    for b in range(6):
        scalar = posterior_marginals(g, MaskedLeaves(inputs[b]))
        for l in range(3):
            assert np.abs(batch[l][b] - scalar[l]).max() <= 1e-14


def test_input_validation(tiny):
    g, _ = tiny
    with pytest.raises(ValueError):
        posterior_marginals(g, MaskedLeaves(np.array([1, 2, 3])))  # wrong d
    with pytest.raises(ValueError):
        posterior_marginals(g, MaskedLeaves(np.array([1, 2, 3, 9])))  # symbol > v
    with pytest.raises(ValueError):
        MaskedLeaves(np.array([-1, 2, 3, 4]))
