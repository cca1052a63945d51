"""Exact posterior inference on hierarchy trees with partially masked leaves.

Message passing on the derivation tree gives the exact posterior over all
latent and visible variables given any subset of observed leaves: parsing
(zero masks), single-node marginals, and ancestral posterior sampling, the
Bayes-optimal denoiser for mask corruption.

The numeric core is batch-first: every routine operates on a stack of B
independent masked inputs against one shared grammar, which is what makes
long chain simulations cheap. The public single-input API wraps B = 1.
Messages are renormalized per node at every level, so no underflow occurs
even for thousands of leaves; only ratios ever matter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .grammar import MASK, Grammar, TreeSample


class InconsistentLeavesError(Exception):
    """Observed leaves admit no valid completion under the grammar.

    Cannot occur when the input was produced by masking a valid sample.
    """


@dataclass(frozen=True)
class Invalid:
    """Parse failure: the node at ``(level, position)`` has no parent rule.

    ``level`` is the level of the missing parent (1..L); ``position`` the
    node index within that level.
    """

    level: int
    position: int


@dataclass
class MaskedLeaves:
    """A visible sequence with some positions unobserved (MASK = 0)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.values.ndim != 1:
            raise ValueError("masked leaves must be a flat array")
        if self.values.min() < 0:
            raise ValueError("leaf entries must be MASK (0) or symbols >= 1")

    @property
    def mask_count(self) -> int:
        return int(np.count_nonzero(self.values == MASK))

    @property
    def d(self) -> int:
        return self.values.size

    @classmethod
    def from_sample(cls, x: TreeSample, positions) -> "MaskedLeaves":
        vals = x.leaves.astype(np.int64).copy()
        vals[np.asarray(positions, dtype=np.int64)] = MASK
        return cls(vals)


@dataclass
class MessageSet:
    """Upward messages for one masked input.

    ``upward[l][i]`` is the length-v weight vector of node i at level l:
    the (normalized) likelihood of each candidate symbol given the observed
    leaves below the node. ``rule_products[l - 1][i, a, j]`` caches, for the
    level-l node i, candidate symbol a and rule j, the product of its
    children's message entries at that rule's child tuple; posterior
    sampling and marginals reuse it.
    """

    upward: list[np.ndarray]
    rule_products: list[np.ndarray]

    @property
    def root_weights(self) -> np.ndarray:
        return self.upward[-1][0]


# -- batched message passing -------------------------------------------------


def _leaf_messages(grammar: Grammar, masked: np.ndarray) -> np.ndarray:
    """Leaf message stack (B, d, v): one-hot rows for observed leaves,
    uniform rows for masked ones."""
    p = grammar.params
    B, d = masked.shape
    W = np.zeros((B, d, p.v), dtype=np.float64)
    is_masked = masked == MASK
    W[is_masked] = 1.0 / p.v
    bb, ii = np.nonzero(~is_masked)
    W[bb, ii, masked[bb, ii] - 1] = 1.0
    return W


def upward_pass_batch(grammar: Grammar, masked: np.ndarray):
    """Upward messages for a stack of masked inputs.

    masked: (B, d) ints, 0 = MASK. Returns (ups, prods) where ups[l] has
    shape (B, s**(L-l), v) and prods[l-1] shape (B, s**(L-l), v, m) for
    l = 1..L. Raises InconsistentLeavesError if any input in the stack has
    no valid completion.
    """
    p = grammar.params
    masked = np.asarray(masked, dtype=np.int64)
    ups = [_leaf_messages(grammar, masked)]
    prods = []
    for l in range(1, p.L + 1):
        width = p.level_width(l)
        child = ups[-1].reshape(-1, width, p.s, p.v)
        C0 = grammar._children0[l - 1]  # (v, m, s)
        prod = np.ones((child.shape[0], width, p.v, p.m), dtype=np.float64)
        for i in range(p.s):
            prod *= child[:, :, i, C0[:, :, i]]
        up = prod.sum(axis=3)
        tot = up.sum(axis=2)
        if np.any(tot == 0.0):
            b, i = np.argwhere(tot == 0.0)[0]
            raise InconsistentLeavesError(
                f"no valid completion: level {l}, node {int(i)} (input {int(b)})"
            )
        up /= tot[:, :, None]
        prod /= tot[:, :, None, None]
        ups.append(up)
        prods.append(prod)
    return ups, prods


def sample_down_batch(grammar, ups, prods, rng) -> list[np.ndarray]:
    """Ancestral posterior sample for each input in the stack.

    Samples the root from the root message, then at each internal node one
    of its m rules with probability proportional to the cached children
    message product for the sampled parent symbol. Returns per-level symbol
    arrays (B, width). Draw order: root block, then one block per level
    moving down.
    """
    p = grammar.params
    B = ups[0].shape[0]
    levels: list[np.ndarray | None] = [None] * (p.L + 1)
    root_probs = ups[p.L][:, 0, :]
    levels[p.L] = (_categorical_rows(root_probs, rng) + 1).reshape(B, 1)
    for l in range(p.L, 0, -1):
        parents0 = levels[l] - 1  # (B, width)
        pr = np.take_along_axis(prods[l - 1], parents0[:, :, None, None], axis=2)[:, :, 0, :]
        probs = pr / pr.sum(axis=2, keepdims=True)
        j = _categorical_rows(probs, rng)
        children0 = grammar._children0[l - 1][parents0, j]  # (B, width, s)
        levels[l - 1] = children0.reshape(B, -1) + 1
    return levels  # type: ignore[return-value]


def _categorical_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of a (..., K) probability array."""
    cum = probs.cumsum(axis=-1)
    u = rng.random(size=probs.shape[:-1] + (1,)) * cum[..., -1:]
    idx = (cum < u).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def marginals_batch(grammar, ups, prods) -> list[np.ndarray]:
    """Exact single-node posterior marginals for each input in the stack.

    Standard downward sweep against the cached upward quantities. Returns
    per-level arrays (B, width, v), rows summing to 1.
    """
    p = grammar.params
    B = ups[0].shape[0]
    down: list[np.ndarray | None] = [None] * (p.L + 1)
    down[p.L] = np.full((B, 1, p.v), 1.0 / p.v)
    for l in range(p.L, 0, -1):
        width = p.level_width(l)
        child = ups[l - 1].reshape(B, width, p.s, p.v)
        C0 = grammar._children0[l - 1]
        # gathered child messages per rule slot: G[i] has shape (B, width, v, m)
        G = [child[:, :, i, C0[:, :, i]] for i in range(p.s)]
        # leave-one-out products over rule slots
        prefix = [np.ones((B, width, p.v, p.m))]
        for i in range(p.s - 1):
            prefix.append(prefix[-1] * G[i])
        suffix = np.ones((B, width, p.v, p.m))
        dp = down[l][:, :, :, None]  # (B, width, v, 1)
        scatter = _scatter_matrices(grammar, l)
        down_children = np.empty((B, width, p.s, p.v))
        for i in range(p.s - 1, -1, -1):
            loo = dp * prefix[i] * suffix  # (B, width, v, m)
            down_children[:, :, i, :] = loo.reshape(B, width, -1) @ scatter[i]
            suffix = suffix * G[i]
        down[l - 1] = down_children.reshape(B, width * p.s, p.v)
    marg = []
    for l in range(p.L + 1):
        raw = down[l] * ups[l]
        marg.append(raw / raw.sum(axis=2, keepdims=True))
    return marg


def _scatter_matrices(grammar: Grammar, level: int) -> list[np.ndarray]:
    """Per rule slot i, a (v*m, v) 0/1 matrix mapping flattened (parent
    symbol, rule) weights onto the symbol each rule assigns to child i."""
    cache = getattr(grammar, "_scatter_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(grammar, "_scatter_cache", cache)
    if level not in cache:
        p = grammar.params
        C0 = grammar._children0[level - 1]
        mats = []
        for i in range(p.s):
            mat = np.zeros((p.v * p.m, p.v))
            mat[np.arange(p.v * p.m), C0[:, :, i].reshape(-1)] = 1.0
            mats.append(mat)
        cache[level] = mats
    return cache[level]


# -- single-input API ---------------------------------------------------------


def upward_pass(grammar: Grammar, masked: MaskedLeaves) -> MessageSet:
    """Exact upward messages for one masked input."""
    _check_input(grammar, masked)
    ups, prods = upward_pass_batch(grammar, masked.values[None, :])
    return MessageSet(upward=[u[0] for u in ups], rule_products=[q[0] for q in prods])


def posterior_sample(grammar: Grammar, masked: MaskedLeaves, rng: np.random.Generator) -> TreeSample:
    """One exact draw from the posterior over full trees given the
    observed leaves; agrees with the input on every unmasked position."""
    _check_input(grammar, masked)
    ups, prods = upward_pass_batch(grammar, masked.values[None, :])
    levels = sample_down_batch(grammar, ups, prods, rng)
    return TreeSample([lvl[0].copy() for lvl in levels])


def posterior_marginals(grammar: Grammar, masked: MaskedLeaves) -> list[np.ndarray]:
    """Exact per-node marginals, one (width, v) row-stochastic array per
    level."""
    _check_input(grammar, masked)
    ups, prods = upward_pass_batch(grammar, masked.values[None, :])
    return [mg[0] for mg in marginals_batch(grammar, ups, prods)]


def _check_input(grammar: Grammar, masked: MaskedLeaves) -> None:
    p = grammar.params
    if masked.d != p.d:
        raise ValueError(f"expected {p.d} leaves, got {masked.d}")
    if masked.values.max() > p.v:
        raise ValueError("leaf symbol outside 1..v")


def parse(grammar: Grammar, leaves) -> TreeSample | Invalid:
    """The unique derivation tree of a full visible sequence, or where it
    fails.

    Bottom-up lookup through the inverse rule tables. An Invalid result is
    a normal outcome naming the lowest level whose node has no producing
    rule.
    """
    p = grammar.params
    leaves = np.asarray(leaves, dtype=np.int64)
    if leaves.shape != (p.d,):
        raise ValueError(f"expected {p.d} leaves")
    if leaves.min() < 1 or leaves.max() > p.v:
        raise ValueError("parse needs fully observed symbols in 1..v")
    levels = [leaves]
    for l in range(1, p.L + 1):
        tuples0 = (levels[-1] - 1).reshape(-1, p.s)
        codes = np.zeros(tuples0.shape[0], dtype=np.int64)
        for i in range(p.s):
            codes += tuples0[:, i] * p.v**i
        packed = grammar.parent_table(l)[codes]
        bad = np.nonzero(packed < 0)[0]
        if bad.size:
            return Invalid(level=l, position=int(bad[0]))
        levels.append(packed // p.m + 1)
    return TreeSample(levels)


def marginals_to_json(marginals: list[np.ndarray]) -> str:
    """Debug export of a marginal set as a JSON document."""
    return json.dumps({"levels": [mg.tolist() for mg in marginals]}, indent=1)
