"""Mask-resample (U-turn) Markov chains and their exact small-instance kernel.

One chain step masks k leaf positions chosen uniformly without replacement
and redraws them from the exact posterior, so every state stays a valid
sentence. With an exact denoiser the step kernel is symmetric over the
uniform sentence distribution (detailed balance); adding a Metropolis
acceptance on an energy H targets the reweighted law prop. to exp(-H).

``exact_kernel`` builds the full transition matrix by enumeration and is
deliberately independent of the message-passing sampler, so the two can be
checked against each other.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import oracle, streams
from .grammar import MASK, Grammar, TreeSample
from .inference import _categorical_rows, sample_down_batch, upward_pass_batch


@dataclass(frozen=True)
class UturnConfig:
    """Chain parameters. k (masked positions per step) is the primitive;
    the masking fraction rho = k/d is derived to avoid rounding drift."""

    k: int
    n_steps: int
    record_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @classmethod
    def from_rho(cls, rho: float, d: int, **kw) -> "UturnConfig":
        if not 0.0 < rho <= 1.0:
            raise ValueError("rho must lie in (0, 1]")
        k = max(1, round(rho * d))
        return cls(k=min(k, d), **kw)

    def rho(self, d: int) -> float:
        return self.k / d


# -- energies -----------------------------------------------------------------


@dataclass(frozen=True)
class ZeroEnergy:
    """H = 0: plain unbiased dynamics."""

    def __call__(self, x: TreeSample) -> float:
        return 0.0

    def of_levels(self, levels: list[np.ndarray]) -> np.ndarray:
        return np.zeros(levels[0].shape[0])


@dataclass(frozen=True)
class LeafCount:
    """H = weight * (number of leaves equal to ``symbol``)."""

    symbol: int
    weight: float = 1.0

    def __call__(self, x: TreeSample) -> float:
        return self.weight * int(np.count_nonzero(x.leaves == self.symbol))

    def of_levels(self, levels: list[np.ndarray]) -> np.ndarray:
        return self.weight * (levels[0] == self.symbol).sum(axis=1)


@dataclass(frozen=True)
class LatentCount:
    """H = weight * (number of level-``level`` symbols equal to ``symbol``)."""

    level: int
    symbol: int
    weight: float = 1.0

    def __call__(self, x: TreeSample) -> float:
        return self.weight * int(np.count_nonzero(x.levels[self.level] == self.symbol))

    def of_levels(self, levels: list[np.ndarray]) -> np.ndarray:
        return self.weight * (levels[self.level] == self.symbol).sum(axis=1)


ZERO = ZeroEnergy()


def energy_to_json(energy) -> dict:
    if isinstance(energy, ZeroEnergy):
        return {"kind": "zero"}
    if isinstance(energy, LeafCount):
        return {"kind": "leaf_count", "symbol": energy.symbol, "weight": energy.weight}
    if isinstance(energy, LatentCount):
        return {
            "kind": "latent_count",
            "level": energy.level,
            "symbol": energy.symbol,
            "weight": energy.weight,
        }
    raise TypeError(f"cannot serialize energy {energy!r}")


def energy_from_json(doc: dict | None):
    if doc is None:
        return ZERO
    kind = doc.get("kind")
    if kind == "zero":
        return ZERO
    if kind == "leaf_count":
        return LeafCount(symbol=int(doc["symbol"]), weight=float(doc.get("weight", 1.0)))
    if kind == "latent_count":
        return LatentCount(
            level=int(doc["level"]),
            symbol=int(doc["symbol"]),
            weight=float(doc.get("weight", 1.0)),
        )
    raise ValueError(f"unknown energy kind {kind!r}")


# -- single-chain stepping ------------------------------------------------------


def uturn_step(grammar: Grammar, x: TreeSample, k: int, rng: np.random.Generator) -> TreeSample:
    """Mask k distinct uniformly chosen leaves of x and redraw them from the
    exact posterior. Unmasked leaves carry over unchanged."""
    p = grammar.params
    if not 1 <= k <= p.d:
        raise ValueError(f"k={k} outside [1, d={p.d}]")
    positions = rng.choice(p.d, size=k, replace=False)
    masked = x.leaves.astype(np.int64).copy()
    masked[positions] = MASK
    ups, prods = upward_pass_batch(grammar, masked[None, :])
    levels = sample_down_batch(grammar, ups, prods, rng)
    return TreeSample([lvl[0].copy() for lvl in levels])


def mh_step(grammar: Grammar, x: TreeSample, k: int, energy, rng: np.random.Generator):
    """One Metropolis-corrected step: propose a mask-resample move, accept
    with probability min(1, exp(-(H(x') - H(x)))).

    The proposal ratio cancels because the unbiased kernel is symmetric;
    that symmetry is enforced by the exact-kernel test suite rather than
    assumed silently. The acceptance uniform is always drawn, so the RNG
    stream advances identically whether or not the move is accepted.
    """
    proposal = uturn_step(grammar, x, k, rng)
    delta = float(energy(proposal)) - float(energy(x))
    u = rng.random()
    accepted = delta <= 0 or u < math.exp(-delta)
    if accepted:
        return proposal, True
    return x, False


@dataclass
class ChainTrace:
    """Recorded states of one chain: step indices, samples at those steps,
    acceptance flags when an energy was active, and the seed/config echo."""

    steps: np.ndarray
    samples: list[TreeSample] | None
    accepted: np.ndarray | None
    k: int
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def cumulative_masks(self) -> np.ndarray:
        return self.steps * self.k


def run_chain(
    grammar: Grammar,
    x0: TreeSample,
    cfg: UturnConfig,
    observers=(),
    energy=None,
    keep_samples: bool = True,
) -> ChainTrace:
    """Iterate mask-resample steps from x0.

    Observers are callables ``observer(step, sample)`` invoked at step 0
    and at every ``record_stride``-th step (and the final step). With an
    energy, steps go through the Metropolis acceptance and per-step flags
    are recorded. Deterministic under a fixed config seed.
    """
    rng = streams.stream(cfg.seed, streams.CHAIN)
    x = x0
    steps, samples = [], []
    flags = [] if energy is not None else None

    def record(n, sample):
        steps.append(n)
        if keep_samples:
            samples.append(sample.copy())
        for obs in observers:
            obs(n, sample)

    record(0, x)
    for n in range(1, cfg.n_steps + 1):
        if energy is None:
            x = uturn_step(grammar, x, cfg.k, rng)
        else:
            x, ok = mh_step(grammar, x, cfg.k, energy, rng)
            flags.append(ok)
        if n % cfg.record_stride == 0 or n == cfg.n_steps:
            record(n, x)
    return ChainTrace(
        steps=np.array(steps),
        samples=samples if keep_samples else None,
        accepted=np.array(flags, dtype=bool) if flags is not None else None,
        k=cfg.k,
        seed=cfg.seed,
        meta={"n_steps": cfg.n_steps, "record_stride": cfg.record_stride},
    )


# -- batched stepping -----------------------------------------------------------


def step_batch(grammar: Grammar, levels: list[np.ndarray], k: int, rng: np.random.Generator):
    """One mask-resample step applied to a stack of B chains at once.

    Each lane masks its own uniform k-subset of leaf positions; the exact
    posterior redraw runs vectorized over the stack. Returns new per-level
    arrays (B, width). k = 1 takes the path-restricted route below; both
    routes realize the same kernel and both are checked against the exact
    transition matrix.
    """
    p = grammar.params
    leaves = levels[0]
    B = leaves.shape[0]
    if k == 1:
        return _step_single_mask(grammar, levels, rng)
    if k < p.d:
        order = rng.random((B, p.d)).argpartition(k - 1, axis=1)[:, :k]
        masked = leaves.copy()
        np.put_along_axis(masked, order, MASK, axis=1)
    else:
        masked = np.full_like(leaves, MASK)
    ups, prods = upward_pass_batch(grammar, masked)
    return sample_down_batch(grammar, ups, prods, rng)


def _step_single_mask(grammar: Grammar, levels: list[np.ndarray], rng: np.random.Generator):
    """Exact single-mask step without touching nodes off the mask's root
    path.

    With one masked leaf, every node whose subtree is fully observed has an
    indicator message (unambiguity), so the posterior only redistributes
    the symbols on the path from the masked leaf to the root. Messages are
    passed along that path with indicator factors for the observed
    siblings; the downward redraw then rewrites the path and leaves the
    rest of the tree untouched. Per lane the masked position is uniform.
    """
    p = grammar.params
    B = levels[0].shape[0]
    pos = rng.integers(0, p.d, size=B)
    lanes = np.arange(B)

    # upward along the path, recording rule products for the downward pass
    path_msg = np.ones((B, p.v))
    prods = []
    node = pos
    for l in range(1, p.L + 1):
        parent = node // p.s
        slot = node % p.s
        width = p.level_width(l)
        kids0 = levels[l - 1].reshape(B, width, p.s)[lanes, parent, :] - 1  # (B, s)
        C0 = grammar._children0[l - 1]  # (v, m, s)
        sel = np.moveaxis(C0, 2, 0)[slot]  # (B, v, m): path-slot child symbol per rule
        prod = np.take_along_axis(path_msg, sel.reshape(B, -1), axis=1).reshape(B, p.v, p.m)
        for i in range(p.s):
            eq = C0[None, :, :, i] == kids0[:, i, None, None]
            prod = prod * np.where((slot != i)[:, None, None], eq, True)
        up = prod.sum(axis=2)
        tot = up.sum(axis=1, keepdims=True)
        path_msg = up / tot
        prods.append(prod / tot[:, :, None])
        node = parent

    # downward: resample the path, keep everything else
    out = [lvl.copy() for lvl in levels]
    sym0 = _categorical_rows(path_msg, rng)  # root, 0-based
    out[p.L][:, 0] = sym0 + 1
    for l in range(p.L, 0, -1):
        node = pos // p.s**l
        pr = np.take_along_axis(prods[l - 1], sym0[:, None, None], axis=1)[:, 0, :]
        j = _categorical_rows(pr / pr.sum(axis=1, keepdims=True), rng)
        child_syms0 = grammar._children0[l - 1][sym0, j]  # (B, s)
        cols = node[:, None] * p.s + np.arange(p.s)[None, :]
        out[l - 1][lanes[:, None], cols] = child_syms0 + 1
        child_node = pos // p.s ** (l - 1)
        sym0 = child_syms0[lanes, child_node % p.s]
    return out


def run_chain_batch(
    grammar: Grammar,
    x0_levels: list[np.ndarray],
    k: int,
    n_steps: int,
    rng: np.random.Generator,
    record_ns=None,
    callback=None,
    energy=None,
):
    """Advance B chains in lockstep for n_steps.

    ``callback(step, levels)`` fires at each recorded step (default: every
    step). With an energy, each lane applies its own Metropolis acceptance
    against the shared stream. Returns (final levels, acceptance counts or
    None).
    """
    p = grammar.params
    levels = [np.array(lvl, dtype=np.int64) for lvl in x0_levels]
    B = levels[0].shape[0]
    recorded = set(int(n) for n in record_ns) if record_ns is not None else None
    accept_counts = np.zeros(B, dtype=np.int64) if energy is not None else None
    h_cur = energy.of_levels(levels).astype(np.float64) if energy is not None else None
    if callback is not None and (recorded is None or 0 in recorded):
        callback(0, levels)
    for n in range(1, n_steps + 1):
        proposal = step_batch(grammar, levels, k, rng)
        if energy is None:
            levels = proposal
        else:
            h_new = energy.of_levels(proposal).astype(np.float64)
            accept = rng.random(B) < np.exp(-np.maximum(h_new - h_cur, 0.0))
            for l in range(p.L + 1):
                levels[l] = np.where(accept[:, None], proposal[l], levels[l])
            h_cur = np.where(accept, h_new, h_cur)
            accept_counts += accept
        if callback is not None and (recorded is None or n in recorded):
            callback(n, levels)
    return levels, accept_counts


# -- exact kernel -----------------------------------------------------------------


def exact_kernel(
    grammar: Grammar,
    k: int,
    sentences: oracle.SentenceSet | None = None,
    max_sentences: int = 10_000,
    max_patterns: int = 200_000,
) -> tuple[np.ndarray, oracle.SentenceSet]:
    """Exact one-step transition matrix of the mask-resample kernel.

    U[next, prev] averages, over all C(d, k) mask patterns, the exact
    conditional probability of ``next`` given ``prev`` with that pattern
    hidden: sentences agreeing with ``prev`` off the pattern are
    equiprobable. Columns sum to 1; with the uniform sentence law,
    detailed balance is equivalent to symmetry of this matrix.
    """
    p = grammar.params
    if not 1 <= k <= p.d:
        raise ValueError(f"k={k} outside [1, d={p.d}]")
    sset = sentences if sentences is not None else oracle.enumerate_sentences(
        grammar, budget=max_sentences
    )
    if sset.n > max_sentences:
        raise oracle.BudgetExceededError(sset.n, max_sentences)
    n_patterns = math.comb(p.d, k)
    if n_patterns > max_patterns:
        raise ValueError(f"{n_patterns} mask patterns exceed the budget of {max_patterns}")
    seq = sset.sequences
    U = np.zeros((sset.n, sset.n))
    for pattern in itertools.combinations(range(p.d), k):
        keep = np.setdiff1d(np.arange(p.d), pattern)
        if keep.size == 0:
            groups = [np.arange(sset.n)]
        else:
            _, inverse = np.unique(seq[:, keep], axis=0, return_inverse=True)
            order = np.argsort(inverse, kind="stable")
            bounds = np.flatnonzero(np.diff(inverse[order])) + 1
            groups = np.split(order, bounds)
        for ids in groups:
            U[np.ix_(ids, ids)] += 1.0 / (n_patterns * ids.size)
    return U, sset


def reachable_ids(U: np.ndarray, start: int) -> np.ndarray:
    """Sentence ids reachable from ``start`` under a kernel's support."""
    n = U.shape[0]
    seen = np.zeros(n, dtype=bool)
    frontier = [start]
    seen[start] = True
    while frontier:
        i = frontier.pop()
        nxt = np.nonzero((U[:, i] > 0) & ~seen)[0]
        seen[nxt] = True
        frontier.extend(int(j) for j in nxt)
    return np.nonzero(seen)[0]


# -- trace export -------------------------------------------------------------------

FLOAT_FMT = "%.12g"


def export_trace_csv(trace: ChainTrace, path, chain_id: int = 0) -> None:
    """Write a recorded trace as layer overlaps against its first state.

    Columns: chain_id, n, cumulative_masks, level, overlap. A JSON sidecar
    (same path + .meta.json) echoes the config and seed.
    """
    if not trace.samples:
        raise ValueError("trace was recorded without samples")
    x0 = trace.samples[0]
    depth = x0.depth
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chain_id", "n", "cumulative_masks", "level", "overlap"])
        for step, sample in zip(trace.steps, trace.samples):
            for level in range(depth + 1):
                ov = float((sample.levels[level] == x0.levels[level]).mean())
                w.writerow([chain_id, int(step), int(step) * trace.k, level, FLOAT_FMT % ov])
    sidecar = {
        "k": trace.k,
        "seed": trace.seed,
        "meta": trace.meta,
        "accepted_fraction": (
            float(trace.accepted.mean()) if trace.accepted is not None and trace.accepted.size else None
        ),
    }
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(sidecar, fh, indent=1)
