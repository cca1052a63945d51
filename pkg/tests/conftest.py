import numpy as np
import pytest

from utmc import oracle
from utmc.grammar import GrammarParams, sample_grammar


@pytest.fixture(scope="session")
def tiny():
    """The 32-sentence reference instance used across kernel tests."""
    g = sample_grammar(GrammarParams(v=4, s=2, L=2, m=2, seed=7))
    sset = oracle.enumerate_sentences(g)
    return g, sset


@pytest.fixture(scope="session")
def frozen_m1():
    """An m=1 instance whose flip graph is fully isolated (verified), so
    single-mask chains cannot move."""
    g = sample_grammar(GrammarParams(v=4, s=2, L=2, m=1, seed=2))
    sset = oracle.enumerate_sentences(g)
    graph = oracle.build_flip_graph(sset)
    assert graph.n_components == g.params.v  # precondition for freezing
    return g, sset


def sentence_coder(sset):
    """leaves (..., d) -> sentence ids, -1 for invalid sequences."""
    g = sset.grammar
    v, d = g.params.v, g.params.d
    pw = v ** np.arange(d)
    table = -np.ones(v**d, dtype=np.int64)
    table[((sset.sequences - 1) * pw).sum(1)] = np.arange(sset.n)

    def ids(leaves):
        codes = ((np.asarray(leaves) - 1) * pw).sum(axis=-1)
        return table[codes]

    return ids


def repeat_levels(sset, idx, n):
    """Stack one enumerated sentence's tree n times for batched runs."""
    return [np.repeat(lvl[idx][None, :].astype(np.int64), n, axis=0) for lvl in sset.levels]
