"""Branching predictions for the percolation and layer-inversion thresholds.

A single accepted leaf flip opens further flips at leaves sharing an
ancestor with it. Counting the mean number of newly opened flips n(f)
gives a branching criterion: the single-flip move graph percolates when
n(f) > 1, so the threshold solves n(f_per) = 1. The layer-ordering
inversion balances the factor-s population shrinkage per level against the
probability that a change cascades one level up.

Finite-size mode keeps the alphabet size and depth explicit through the
admissible-value recursion

    N_L = v,   N_{l-1} = 1 + (v - 1) (m N_l - 1) / (v**s - 1),

where N_l is the mean number of values a level-l variable can take with
the rest of its layer held fixed. A change at level l-1 survives to level
l with probability 1 - 1/N_l, and

    n(f) = sum_{l=1..L} (s**l - s**(l-1)) (N_0 - 1) p(0 -> l-1)**2
           * [1 - (N_{l-1} - 1) / (v - 1)]

with p the cascade product. Asymptotic mode (v, L -> infinity at fixed f)
collapses N_l -> 1/(1-f) and the sum to the closed form
f (s-1) / ((1 - s f**2)(1 - f)), valid for f < 1/sqrt(s); there the
inversion threshold is exactly 1/s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


class NoBracketError(Exception):
    """The branching number stays below 1 on the admissible range: no
    transition predicted."""


@dataclass
class RootResult:
    f: float
    residual: float
    bracket: tuple[float, float]
    iterations: int


def admissible_counts(v: int, s: int, L: int, m: float) -> np.ndarray:
    """Mean admissible-value counts per level, indexed by level 0..L.

    ``m`` may be fractional when scanning the rule density continuously;
    realizable grammars use integers. All entries lie in [1, v].
    """
    if v < 2 or s < 2 or L < 1:
        raise ValueError("need v >= 2, s >= 2, L >= 1")
    if not 1.0 <= m <= float(v) ** (s - 1):
        raise ValueError(f"m={m} outside [1, v**(s-1)]")
    counts = np.empty(L + 1)
    counts[L] = float(v)
    denom = float(v) ** s - 1.0
    for l in range(L, 0, -1):
        counts[l - 1] = 1.0 + (v - 1.0) * (m * counts[l] - 1.0) / denom
    return counts


def cascade_probability(counts: np.ndarray, level_from: int, level_to: int) -> float:
    """Probability that a change at ``level_from`` propagates up to
    ``level_to``: the product of one-step factors 1 - 1/N_r."""
    L = counts.size - 1
    if not 0 <= level_from <= level_to <= L:
        raise ValueError("need 0 <= level_from <= level_to <= L")
    out = 1.0
    for r in range(level_from + 1, level_to + 1):
        out *= 1.0 - 1.0 / counts[r]
    return out


def branching_finite(f: float, v: int, s: int, L: int) -> float:
    """Mean number of newly opened flips per accepted flip, finite v and L."""
    m = f * float(v) ** (s - 1)
    counts = admissible_counts(v, s, L, m)
    extra = counts[0] - 1.0
    total = 0.0
    for l in range(1, L + 1):
        pair_sites = s**l - s ** (l - 1)
        casc = cascade_probability(counts, 0, l - 1)
        newly_enabled = 1.0 - (counts[l - 1] - 1.0) / (v - 1.0)
        total += pair_sites * extra * casc**2 * newly_enabled
    return total


def branching_asymptotic(f: float, s: int) -> float:
    """Closed-form branching number in the infinite-alphabet, infinite-depth
    limit: f (s-1) / ((1 - s f**2)(1 - f)). Defined for 0 < f < 1/sqrt(s)."""
    if not 0.0 < f < 1.0 / math.sqrt(s):
        raise ValueError(f"f={f} outside the convergence range (0, 1/sqrt(s))")
    return f * (s - 1) / ((1.0 - s * f * f) * (1.0 - f))


def _bisect(fn, lo: float, hi: float, tol: float = 1e-13, max_iter: int = 200) -> RootResult:
    """Plain bisection on a sign change; unconditionally robust and free of
    fit hyperparameters."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return RootResult(lo, 0.0, (lo, hi), 0)
    if fhi == 0.0:
        return RootResult(hi, 0.0, (lo, hi), 0)
    if np.sign(flo) == np.sign(fhi):
        raise NoBracketError(f"no sign change on [{lo}, {hi}]")
    bracket = (lo, hi)
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0:
            lo = hi = mid
            break
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
        it += 1
    root = 0.5 * (lo + hi)
    return RootResult(root, abs(fn(root)), bracket, it)


def _first_crossing_bracket(fn, lo: float, hi: float, n_grid: int = 512):
    """Scan a grid and return the first interval where fn changes sign from
    negative to positive; the finite-size branching number returns to zero
    at f = 1, so the lowest crossing is the physical one."""
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([fn(g) for g in grid])
    for i in range(n_grid - 1):
        if vals[i] <= 0.0 < vals[i + 1]:
            return grid[i], grid[i + 1]
    raise NoBracketError("branching number stays below 1: no transition predicted")


def solve_f_per(mode: str, s: int, v: int | None = None, L: int | None = None) -> RootResult:
    """Rule density where the branching number crosses 1.

    Asymptotic mode bisects the closed form on (0, 1/sqrt(s)); finite mode
    scans the admissible range for the lowest upward crossing of the
    finite-size sum and bisects there.
    """
    if mode == "asymptotic":
        eps = 1e-12
        hi = 1.0 / math.sqrt(s) - eps

        def g(f):
            return branching_asymptotic(f, s) - 1.0

        lo = 1e-9
        # expand away from 0 until the bracket is negative at lo
        while g(lo) > 0 and lo > 1e-15:
            lo /= 10.0
        return _bisect(g, lo, hi)
    if mode == "finite":
        if v is None or L is None:
            raise ValueError("finite mode needs v and L")
        f_min = 1.0 / float(v) ** (s - 1)

        def g(f):
            return branching_finite(f, v, s, L) - 1.0

        lo, hi = _first_crossing_bracket(g, f_min, 1.0)
        return _bisect(g, lo, hi)
    raise ValueError(f"unknown mode {mode!r}")


def solve_f_inv(mode: str, s: int, v: int | None = None, L: int | None = None) -> RootResult:
    """Rule density where the layer-ordering of relaxation inverts.

    Asymptotic mode returns 1/s exactly. Finite mode solves
    s * (1 - 1/N_1(f)) = 1 for the first latent level's cascade factor.
    """
    if mode == "asymptotic":
        f = 1.0 / s
        return RootResult(f, 0.0, (f, f), 0)
    if mode == "finite":
        if v is None or L is None:
            raise ValueError("finite mode needs v and L")
        f_min = 1.0 / float(v) ** (s - 1)

        def g(f):
            m = f * float(v) ** (s - 1)
            counts = admissible_counts(v, s, L, m)
            return s * (1.0 - 1.0 / counts[1]) - 1.0

        if g(f_min) >= 0.0 or g(1.0) <= 0.0:
            raise NoBracketError("cascade balance has no root on the admissible range")
        return _bisect(g, f_min, 1.0)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class ThresholdReport:
    """Solved thresholds plus the profile data behind them."""

    mode: str
    s: int
    v: int | None = None
    L: int | None = None
    f_per: float | None = None
    f_per_residual: float | None = None
    f_per_bracket: tuple[float, float] | None = None
    f_per_iterations: int | None = None
    f_inv: float | None = None
    f_inv_residual: float | None = None
    f_grid: list[float] = field(default_factory=list)
    branching: list[float] = field(default_factory=list)
    counts_at_f_per: list[float] = field(default_factory=list)
    cascade_at_f_per: list[float] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {k: v for k, v in self.__dict__.items()}
        doc["f_per_bracket"] = list(self.f_per_bracket) if self.f_per_bracket else None
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ThresholdReport":
        doc = json.loads(text)
        if doc.get("f_per_bracket"):
            doc["f_per_bracket"] = tuple(doc["f_per_bracket"])
        return cls(**doc)


def threshold_report(
    mode: str,
    s: int,
    v: int | None = None,
    L: int | None = None,
    f_grid=None,
) -> ThresholdReport:
    """Solve both thresholds and collect diagnostics in one report."""
    rep = ThresholdReport(mode=mode, s=s, v=v, L=L)
    try:
        per = solve_f_per(mode, s, v=v, L=L)
        rep.f_per = per.f
        rep.f_per_residual = per.residual
        rep.f_per_bracket = per.bracket
        rep.f_per_iterations = per.iterations
        if mode == "finite":
            m = per.f * float(v) ** (s - 1)
            counts = admissible_counts(v, s, L, m)
            rep.counts_at_f_per = counts.tolist()
            rep.cascade_at_f_per = [
                cascade_probability(counts, 0, l) for l in range(L + 1)
            ]
    except NoBracketError as e:
        rep.notes.append(f"f_per: {e}")
    try:
        inv = solve_f_inv(mode, s, v=v, L=L)
        rep.f_inv = inv.f
        rep.f_inv_residual = inv.residual
    except NoBracketError as e:
        rep.notes.append(f"f_inv: {e}")
    if f_grid is not None:
        rep.f_grid = [float(f) for f in f_grid]
        if mode == "asymptotic":
            lim = 1.0 / math.sqrt(s)
            rep.branching = [
                branching_asymptotic(f, s) if 0.0 < f < lim else float("nan")
                for f in rep.f_grid
            ]
        else:
            rep.branching = [branching_finite(f, v, s, L) for f in rep.f_grid]
    return rep
