"""Random hierarchy grammars: rule-table sampling, data generation, serialization.

A grammar lives on a rooted regular tree of depth ``L`` with branching
factor ``s``.  Levels are counted from the leaves: level 0 holds the
``d = s**L`` visible symbols, level ``L`` the single root.  Every symbol
takes values in ``{1..v}``.  Each parent symbol at level ``l`` owns ``m``
production rules, each rule an s-tuple of child symbols at level ``l-1``.
Rule tables are drawn uniformly without replacement under the unambiguity
constraint: within a level no child tuple belongs to two parents, so every
valid visible sequence has exactly one derivation tree and all valid
sequences are equally likely under ancestral generation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import streams

#: Sentinel for an unobserved leaf. Real symbols are 1..v.
MASK = 0

# Above this many possible child tuples, sample codes by hash-set rejection
# instead of materializing a permutation of the full tuple space.
_DENSE_TUPLE_LIMIT = 1 << 22


@dataclass(frozen=True)
class GrammarParams:
    """Size parameters of a random hierarchy grammar.

    v: alphabet size (>= 2)
    s: branching factor (>= 2)
    L: tree depth (>= 1)
    m: production rules per symbol, 1 <= m <= v**(s-1)
    seed: 64-bit seed for rule-table sampling
    """

    v: int
    s: int
    L: int
    m: int
    seed: int = 0

    def __post_init__(self):
        if self.v < 2:
            raise ValueError(f"alphabet size v must be >= 2, got {self.v}")
        if self.s < 2:
            raise ValueError(f"branching factor s must be >= 2, got {self.s}")
        if self.L < 1:
            raise ValueError(f"depth L must be >= 1, got {self.L}")
        if not 1 <= self.m <= self.v ** (self.s - 1):
            raise ValueError(
                f"m={self.m} outside [1, v**(s-1)]={self.v ** (self.s - 1)}; "
                "unambiguous rule tables need v*m <= v**s"
            )

    @property
    def f(self) -> float:
        """Rule density: fraction m / v**(s-1) of child tuples in use."""
        return self.m / self.v ** (self.s - 1)

    @property
    def d(self) -> int:
        """Number of visible leaves, s**L."""
        return self.s**self.L

    @property
    def n_internal(self) -> int:
        """Internal (non-leaf) node count, (s**L - 1) / (s - 1)."""
        return (self.s**self.L - 1) // (self.s - 1)

    @property
    def n_sentences(self) -> int:
        """Exact number of valid visible sequences, v * m**n_internal."""
        return self.v * self.m**self.n_internal

    def level_width(self, level: int) -> int:
        if not 0 <= level <= self.L:
            raise ValueError(f"level {level} outside [0, {self.L}]")
        return self.s ** (self.L - level)


def _sample_tuple_codes(v: int, s: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """`count` distinct integers drawn uniformly from [0, v**s)."""
    space = v**s
    if space <= _DENSE_TUPLE_LIMIT:
        return rng.choice(space, size=count, replace=False)
    if count > _DENSE_TUPLE_LIMIT:
        raise ValueError(f"rule table with {count} tuples is too large to sample")
    seen: set[int] = set()
    out = np.empty(count, dtype=np.int64)
    filled = 0
    while filled < count:
        draw = rng.integers(0, space, size=2 * (count - filled))
        for c in draw:
            ci = int(c)
            if ci not in seen:
                seen.add(ci)
                out[filled] = ci
                filled += 1
                if filled == count:
                    break
    return out


def _codes_to_tuples(codes: np.ndarray, v: int, s: int) -> np.ndarray:
    """Decode base-v integers into s-tuples of symbols 1..v (position 0 is
    the least significant digit)."""
    rest = codes.astype(np.int64, copy=True)
    tup = np.empty(codes.shape + (s,), dtype=np.int32)
    for i in range(s):
        tup[..., i] = rest % v + 1
        rest //= v
    return tup


def _sample_rule_table(v: int, s: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """One level's rule table, shape (v, m, s): v*m distinct child tuples
    partitioned into v blocks of m, one block per parent symbol."""
    codes = _sample_tuple_codes(v, s, v * m, rng)
    return _codes_to_tuples(codes, v, s).reshape(v, m, s)


@dataclass
class Grammar:
    """A fixed draw of per-level rule tables.

    ``rule_children[l - 1][p - 1, j]`` is the s-tuple (symbols 1..v) that
    rule ``j`` of parent symbol ``p`` at level ``l`` produces at level
    ``l - 1``.  Immutable after construction; shareable across workers.
    """

    params: GrammarParams
    rule_children: tuple[np.ndarray, ...]
    shared_rules: bool = False
    _children0: tuple[np.ndarray, ...] = field(init=False, repr=False)
    _parent_lut: list = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.rule_children) != self.params.L:
            raise ValueError("need one rule table per level 1..L")
        for tbl in self.rule_children:
            tbl.setflags(write=False)
        self._children0 = tuple(
            np.ascontiguousarray(tbl.astype(np.int64) - 1) for tbl in self.rule_children
        )
        self._parent_lut = [None] * self.params.L

    # -- reverse lookup ----------------------------------------------------

    def parent_table(self, level: int) -> np.ndarray:
        """Dense inverse of the level-``level`` rule table.

        Entry at tuple code ``sum_i (sym_i - 1) * v**i`` is
        ``(parent - 1) * m + rule_index``, or -1 for unused tuples.
        """
        p = self.params
        idx = level - 1
        if not 1 <= level <= p.L:
            raise ValueError(f"rule level {level} outside [1, {p.L}]")
        if self._parent_lut[idx] is None:
            space = p.v**p.s
            if space > _DENSE_TUPLE_LIMIT:
                raise ValueError("tuple space too large for a dense parent table")
            lut = np.full(space, -1, dtype=np.int64)
            c0 = self._children0[idx]  # (v, m, s)
            codes = np.zeros((p.v, p.m), dtype=np.int64)
            for i in range(p.s):
                codes += c0[:, :, i] * p.v**i
            packed = np.arange(p.v * p.m, dtype=np.int64).reshape(p.v, p.m)
            lut[codes] = packed
            self._parent_lut[idx] = lut
        return self._parent_lut[idx]

    @property
    def reverse(self) -> list[dict[tuple[int, ...], tuple[int, int]]]:
        """Per level, a map child-tuple -> (parent symbol, rule index)."""
        out = []
        for tbl in self.rule_children:
            level_map: dict[tuple[int, ...], tuple[int, int]] = {}
            v, m, _ = tbl.shape
            for p in range(v):
                for j in range(m):
                    level_map[tuple(int(c) for c in tbl[p, j])] = (p + 1, j)
            out.append(level_map)
        return out

    def validate(self) -> None:
        """Raise if any grammar invariant fails."""
        p = self.params
        for lvl, tbl in enumerate(self.rule_children, start=1):
            if tbl.shape != (p.v, p.m, p.s):
                raise ValueError(f"level {lvl} table has shape {tbl.shape}")
            if tbl.min() < 1 or tbl.max() > p.v:
                raise ValueError(f"level {lvl} table has symbols outside 1..v")
            flat = tbl.reshape(p.v * p.m, p.s)
            if len(np.unique(flat, axis=0)) != p.v * p.m:
                raise ValueError(f"level {lvl} reuses a child tuple (ambiguous)")


@dataclass(eq=False)
class TreeSample:
    """One full assignment of all tree variables.

    ``levels[l]`` is an int array of length ``s**(L-l)`` with symbols in
    ``1..v``; ``levels[0]`` is the visible sequence, ``levels[L]`` the
    single root symbol.
    """

    levels: list[np.ndarray]

    @property
    def leaves(self) -> np.ndarray:
        return self.levels[0]

    @property
    def root(self) -> int:
        return int(self.levels[-1][0])

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def key(self) -> bytes:
        """Hashable identity. Unambiguity makes the leaves sufficient."""
        return np.ascontiguousarray(self.levels[0], dtype=np.int32).tobytes()

    def copy(self) -> "TreeSample":
        return TreeSample([lvl.copy() for lvl in self.levels])

    def is_consistent(self, grammar: Grammar) -> bool:
        """True iff every internal node reproduces its children through one
        of its rules."""
        p = grammar.params
        if len(self.levels) != p.L + 1:
            return False
        for l in range(p.L + 1):
            arr = self.levels[l]
            if arr.shape != (p.level_width(l),):
                return False
            if arr.min() < 1 or arr.max() > p.v:
                return False
        for l in range(1, p.L + 1):
            tbl = grammar.rule_children[l - 1]  # (v, m, s)
            kids = self.levels[l - 1].reshape(-1, p.s)
            for node, parent in enumerate(self.levels[l]):
                if not (tbl[parent - 1] == kids[node]).all(axis=1).any():
                    return False
        return True


def sample_grammar(params: GrammarParams, shared_rules: bool = False) -> Grammar:
    """Draw a grammar from its own seed-derived stream.

    Per level, v*m distinct child tuples are drawn uniformly from the v**s
    possibilities and split into v consecutive blocks of m, so unambiguity
    holds by construction. With ``shared_rules`` one table is drawn and
    reused at every level.
    """
    rng = streams.stream(params.seed, streams.GRAMMAR)
    if shared_rules:
        table = _sample_rule_table(params.v, params.s, params.m, rng)
        tables = tuple(table for _ in range(params.L))
    else:
        tables = tuple(
            _sample_rule_table(params.v, params.s, params.m, rng) for _ in range(params.L)
        )
    return Grammar(params=params, rule_children=tables, shared_rules=shared_rules)


def generate_batch(grammar: Grammar, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """``n`` independent samples, as per-level arrays of shape (n, width).

    Roots are uniform on 1..v; each internal node expands through one of
    its m rules chosen uniformly. Draw order: root symbols first, then one
    rule-index block per level from the root down.
    """
    p = grammar.params
    levels: list[np.ndarray | None] = [None] * (p.L + 1)
    levels[p.L] = rng.integers(1, p.v + 1, size=(n, 1)).astype(np.int64)
    for l in range(p.L, 0, -1):
        width = p.level_width(l)
        parents0 = levels[l] - 1  # (n, width)
        choices = rng.integers(0, p.m, size=(n, width))
        children0 = grammar._children0[l - 1][parents0, choices]  # (n, width, s)
        levels[l - 1] = children0.reshape(n, width * p.s) + 1
    return levels  # type: ignore[return-value]


def generate(grammar: Grammar, rng: np.random.Generator) -> TreeSample:
    """One sample from the grammar's uniform sentence distribution."""
    batch = generate_batch(grammar, 1, rng)
    return TreeSample([lvl[0].copy() for lvl in batch])


# -- serialization ----------------------------------------------------------

_FORMAT = "rhm-grammar-v1"


def grammar_to_json(grammar: Grammar) -> str:
    doc = {
        "format": _FORMAT,
        "params": {
            "v": grammar.params.v,
            "s": grammar.params.s,
            "L": grammar.params.L,
            "m": grammar.params.m,
            "seed": grammar.params.seed,
        },
        "shared_rules": grammar.shared_rules,
        "rules": [tbl.tolist() for tbl in grammar.rule_children],
    }
    return json.dumps(doc, indent=1)


def grammar_from_json(text: str) -> Grammar:
    doc = json.loads(text)
    if doc.get("format") != _FORMAT:
        raise ValueError(f"unrecognized grammar document format: {doc.get('format')!r}")
    params = GrammarParams(**doc["params"])
    tables = tuple(np.asarray(tbl, dtype=np.int32) for tbl in doc["rules"])
    g = Grammar(params=params, rule_children=tables, shared_rules=bool(doc["shared_rules"]))
    g.validate()
    return g


def save_grammar(grammar: Grammar, path) -> None:
    with open(path, "w") as fh:
        fh.write(grammar_to_json(grammar))


def load_grammar(path) -> Grammar:
    with open(path) as fh:
        return grammar_from_json(fh.read())
