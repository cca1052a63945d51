"""Brute-force ground truth on small grammar instances.

Everything here works by exhaustive enumeration, independently of the
message-passing code, so it can serve as the reference against which
inference and chain dynamics are checked: the full sentence set, exact
conditional posteriors, the single-flip connectivity graph and its
components, and exact reweighted stationary laws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grammar import MASK, Grammar, TreeSample

DEFAULT_BUDGET = 10**6


class BudgetExceededError(Exception):
    def __init__(self, count: int, budget: int):
        super().__init__(f"instance has {count} sentences, over the budget of {budget}")
        self.count = count
        self.budget = budget


class EmptySupportError(Exception):
    """No enumerated sentence matches the observed leaves."""


@dataclass
class SentenceSet:
    """All valid configurations of a grammar, one row per sentence.

    ``levels[l]`` has shape (N, s**(L-l)); row i across all levels is the
    unique derivation tree of sentence i. Row order is deterministic:
    root-symbol major, rule choices lexicographic.
    """

    grammar: Grammar
    levels: list[np.ndarray]
    _index: dict[bytes, int] = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.levels[0].shape[0]

    @property
    def sequences(self) -> np.ndarray:
        return self.levels[0]

    def tree(self, i: int) -> TreeSample:
        return TreeSample([lvl[i].astype(np.int64).copy() for lvl in self.levels])

    def id_of(self, leaves) -> int:
        if not self._index:
            for i in range(self.n):
                self._index[self._row_key(self.sequences[i])] = i
        key = self._row_key(np.asarray(leaves))
        if key not in self._index:
            raise KeyError("sequence is not a valid sentence of this grammar")
        return self._index[key]

    @staticmethod
    def _row_key(row: np.ndarray) -> bytes:
        return np.ascontiguousarray(row, dtype=np.int32).tobytes()


def enumerate_sentences(grammar: Grammar, budget: int = DEFAULT_BUDGET) -> SentenceSet:
    """Depth-first expansion of every root symbol through every rule choice.

    Verifies the count identity v * m**n_internal and pairwise distinctness
    of the visible rows (unambiguity) before returning. Refuses instances
    whose exact count exceeds ``budget``.
    """
    p = grammar.params
    count = p.n_sentences
    if count > budget:
        raise BudgetExceededError(count, budget)

    # expansions[a] for the current level: list over sub-levels j (0..level)
    # of arrays (rows, s**(level-j)) holding every assignment of the subtree
    # under a node with symbol a.
    expansions: list[list[np.ndarray]] = [
        [np.array([[a + 1]], dtype=np.int32)] for a in range(p.v)
    ]
    for level in range(1, p.L + 1):
        nxt: list[list[np.ndarray]] = []
        rows_child = expansions[0][0].shape[0]
        for a in range(p.v):
            per_level_parts: list[list[np.ndarray]] = [[] for _ in range(level)]
            for j in range(p.m):
                children = grammar.rule_children[level - 1][a, j]  # s symbols
                combo = _combo_indices(rows_child, p.s)
                for sub in range(level):
                    parts = [expansions[c - 1][sub][combo[i]] for i, c in enumerate(children)]
                    per_level_parts[sub].append(np.concatenate(parts, axis=1))
            merged = [np.concatenate(parts, axis=0) for parts in per_level_parts]
            n_rows = merged[0].shape[0]
            merged.append(np.full((n_rows, 1), a + 1, dtype=np.int32))
            nxt.append(merged)
        expansions = nxt

    levels = [
        np.concatenate([expansions[a][sub] for a in range(p.v)], axis=0)
        for sub in range(p.L + 1)
    ]
    sset = SentenceSet(grammar=grammar, levels=levels)
    if sset.n != count:
        raise AssertionError(f"enumerated {sset.n} sentences, expected {count}")
    if len(np.unique(sset.sequences, axis=0)) != count:
        raise AssertionError("duplicate visible sequences: grammar is ambiguous")
    return sset


def _combo_indices(rows_child: int, s: int) -> list[np.ndarray]:
    """Row indices realizing the cartesian product of s children with
    ``rows_child`` expansions each, child 0 slowest."""
    total = rows_child**s
    out = []
    for i in range(s):
        block = rows_child ** (s - 1 - i)
        idx = np.arange(total) // block % rows_child
        out.append(idx)
    return out


# -- single-flip connectivity -------------------------------------------------


@dataclass
class FlipGraph:
    """Adjacency of sentences differing in exactly one leaf symbol."""

    edges: np.ndarray  # (E, 2) sentence ids, first < second
    labels: np.ndarray  # (N,) component label per sentence
    sizes: np.ndarray  # (n_components,) member counts

    @property
    def n_components(self) -> int:
        return self.sizes.size

    def component_members(self, label: int) -> np.ndarray:
        return np.nonzero(self.labels == label)[0]

    def largest_fraction(self) -> float:
        return float(self.sizes.max() / self.labels.size)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n)

    def find(self, i: int) -> int:
        p = self.parent
        root = i
        while p[root] != root:
            root = p[root]
        while p[i] != root:  # path compression
            p[i], i = root, p[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def build_flip_graph(sset: SentenceSet) -> FlipGraph:
    """Exact single-flip adjacency via leave-one-out bucketing.

    Sentences sharing all leaves except position i land in one bucket, so
    each bucket is a clique of valid single flips; total work is O(N d)
    keys instead of O(N^2) comparisons.
    """
    seq = np.ascontiguousarray(sset.sequences, dtype=np.int32)
    n, d = seq.shape
    uf = _UnionFind(n)
    edges: list[tuple[int, int]] = []
    for pos in range(d):
        keep = np.ascontiguousarray(np.delete(seq, pos, axis=1))
        buckets: dict[bytes, list[int]] = {}
        for i in range(n):
            buckets.setdefault(keep[i].tobytes(), []).append(i)
        for members in buckets.values():
            if len(members) < 2:
                continue
            for a_i in range(len(members)):
                for b_i in range(a_i + 1, len(members)):
                    a, b = members[a_i], members[b_i]
                    edges.append((a, b))
                    uf.union(a, b)
    roots = np.array([uf.find(i) for i in range(n)])
    _, labels = np.unique(roots, return_inverse=True)
    sizes = np.bincount(labels)
    edge_arr = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    return FlipGraph(edges=edge_arr, labels=labels, sizes=sizes)


def exact_component_plateau(graph: FlipGraph, sset: SentenceSet, x0, level: int) -> float:
    """Long-time overlap of the single-flip chain started at ``x0``.

    Equals the mean level-``level`` overlap between x0 and the uniform
    distribution over x0's connected component, the chain's stationary law
    restricted to that component.
    """
    x0_id = x0 if isinstance(x0, (int, np.integer)) else sset.id_of(np.asarray(x0.leaves))
    members = graph.component_members(int(graph.labels[x0_id]))
    ref = sset.levels[level][x0_id]
    return float((sset.levels[level][members] == ref).mean())


# -- exact conditionals and reweighted laws -----------------------------------


@dataclass
class BrutePosterior:
    """Exact conditional law given observed leaves, by enumeration."""

    ids: np.ndarray  # surviving sentence ids
    probs: np.ndarray  # uniform weights over ids
    marginals: list[np.ndarray]  # per level (width, v), rows sum to 1


def posterior_brute(sset: SentenceSet, masked) -> BrutePosterior:
    """Filter the sentence set on the observed leaves and tally exact
    marginals at every node."""
    values = np.asarray(getattr(masked, "values", masked), dtype=np.int64)
    obs = np.nonzero(values != MASK)[0]
    match = np.all(sset.sequences[:, obs] == values[obs], axis=1)
    ids = np.nonzero(match)[0]
    if ids.size == 0:
        raise EmptySupportError("observed leaves match no valid sentence")
    v = sset.grammar.params.v
    marginals = []
    for lvl in sset.levels:
        sub = lvl[ids]
        counts = np.zeros((sub.shape[1], v))
        for col in range(sub.shape[1]):
            counts[col] = np.bincount(sub[:, col] - 1, minlength=v)
        marginals.append(counts / ids.size)
    probs = np.full(ids.size, 1.0 / ids.size)
    return BrutePosterior(ids=ids, probs=probs, marginals=marginals)


def reweighted_law(sset: SentenceSet, energy, members: np.ndarray | None = None) -> np.ndarray:
    """Exact stationary law proportional to exp(-H) over the sentence set
    (uniform base measure), optionally restricted to a component's members.

    Returns a length-N vector; entries outside ``members`` are zero.
    """
    n = sset.n
    ids = np.arange(n) if members is None else np.asarray(members)
    h = np.array([float(energy(sset.tree(int(i)))) for i in ids])
    w = np.exp(-(h - h.min()))
    out = np.zeros(n)
    out[ids] = w / w.sum()
    return out
