"""Layer-wise relaxation observables.

The central quantity is the level-l overlap between the chain state after
n steps and its initial state: the fraction of matching symbols at that
level. Two independent samples of the same grammar already overlap by a
nonzero amount because the hierarchy correlates symbols, so curves are
normalized against that analytic ergodic baseline before plateaus and
relaxation times are read off.

With r = (v**(s-1) - 1) / (v**s - 1) and a = (1 - r) / m, the expected
overlap of two independent samples at level l is

    mu_l = (1/v) * [r/(1-a) + (1 - r/(1-a)) * a**(L-l)]
           + (1 - 1/v) * (r/(1-a)) * (1 - a**(L-l)),

which equals 1/v exactly at the root. The normalized curve is
(C - mu_l) / (1 - mu_l): 1 at start, 0 at full ergodic mixing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .grammar import Grammar, TreeSample, generate_batch

#: Returned by relaxation_time when the curve never crosses 1/e.
NOT_RELAXED = None


def layer_overlap(x0: TreeSample, xn: TreeSample, level: int) -> float:
    """Fraction of matching symbols at one level."""
    if not 0 <= level < len(x0.levels):
        raise ValueError(f"level {level} out of range")
    a, b = x0.levels[level], xn.levels[level]
    if a.shape != b.shape:
        raise ValueError("samples come from different tree shapes")
    return float((a == b).mean())


def ergodic_baseline(v: int, s: int, L: int, m: float, level: int) -> float:
    """Expected level-``level`` overlap of two independent samples."""
    if not 0 <= level <= L:
        raise ValueError(f"level {level} outside [0, {L}]")
    r = (v ** (s - 1) - 1) / (v**s - 1)
    a = (1.0 - r) / m
    ra = r / (1.0 - a)
    decay = a ** (L - level)
    return (1.0 / v) * (ra + (1.0 - ra) * decay) + (1.0 - 1.0 / v) * ra * (1.0 - decay)


def baseline_profile(v: int, s: int, L: int, m: float) -> np.ndarray:
    """Ergodic baselines for all levels 0..L."""
    return np.array([ergodic_baseline(v, s, L, m, l) for l in range(L + 1)])


@dataclass
class BaselineStats:
    """Monte Carlo overlap statistics of independent sample pairs, used to
    decide when a plateau is statistically indistinguishable from ergodic
    mixing."""

    means: np.ndarray  # per level
    stds: np.ndarray  # per level, single-pair std
    n_pairs: int

    @property
    def sems(self) -> np.ndarray:
        return self.stds / np.sqrt(self.n_pairs)


def independent_pair_stats(grammar: Grammar, n_pairs: int, rng: np.random.Generator) -> BaselineStats:
    """Per-level mean and standard deviation of the overlap between
    ``n_pairs`` pairs of independently generated samples."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    a = generate_batch(grammar, n_pairs, rng)
    b = generate_batch(grammar, n_pairs, rng)
    L = grammar.params.L
    means = np.empty(L + 1)
    stds = np.empty(L + 1)
    for l in range(L + 1):
        ov = (a[l] == b[l]).mean(axis=1)
        means[l] = ov.mean()
        stds[l] = ov.std(ddof=1) if n_pairs > 1 else 0.0
    return BaselineStats(means=means, stds=stds, n_pairs=n_pairs)


@dataclass
class CorrelationCurve:
    """Layer overlap versus chain step for one level.

    ``C`` holds raw overlaps at the recorded steps ``ns`` (C[0] = 1 when
    the curve starts at step 0); ``baseline`` is the ergodic mean used by
    the normalized view ``C_tilde``; ``k`` converts steps to cumulative
    masked positions. ``stderr`` is the standard error across averaged
    chains (and realizations), in raw overlap units.
    """

    level: int
    ns: np.ndarray
    C: np.ndarray
    baseline: float
    k: int = 1
    stderr: np.ndarray | None = None
    n_chains: int = 1

    def __post_init__(self):
        self.ns = np.asarray(self.ns)
        self.C = np.asarray(self.C, dtype=np.float64)
        if self.ns.shape != self.C.shape:
            raise ValueError("ns and C must align")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=np.float64)

    @property
    def C_tilde(self) -> np.ndarray:
        if self.baseline >= 1.0:
            raise ValueError("degenerate baseline = 1")
        return (self.C - self.baseline) / (1.0 - self.baseline)

    @property
    def cumulative_masks(self) -> np.ndarray:
        return self.ns * self.k


def normalized_curve(curve: CorrelationCurve, baseline: float) -> CorrelationCurve:
    """The same curve with its ergodic baseline attached; the affine map
    (C - baseline) / (1 - baseline) is then available as ``C_tilde``."""
    if baseline >= 1.0:
        raise ValueError("degenerate baseline = 1")
    return replace(curve, baseline=baseline)


def curve_from_overlaps(
    level: int,
    ns,
    overlaps: np.ndarray,
    baseline: float,
    k: int = 1,
) -> CorrelationCurve:
    """Average per-chain overlap trajectories (n_records, B) into a curve
    with standard errors across the B chains."""
    overlaps = np.asarray(overlaps, dtype=np.float64)
    n_chains = overlaps.shape[1]
    mean = overlaps.mean(axis=1)
    stderr = (
        overlaps.std(axis=1, ddof=1) / np.sqrt(n_chains) if n_chains > 1 else np.zeros(len(mean))
    )
    return CorrelationCurve(
        level=level, ns=np.asarray(ns), C=mean, baseline=baseline, k=k, stderr=stderr, n_chains=n_chains
    )


def merge_curves(curves: list[CorrelationCurve]) -> CorrelationCurve:
    """Average curves from independent grammar realizations (chains were
    already averaged within each). Standard errors come from the scatter
    across realizations when there are at least two."""
    if not curves:
        raise ValueError("nothing to merge")
    ref = curves[0]
    for c in curves[1:]:
        if not np.array_equal(c.ns, ref.ns) or c.level != ref.level:
            raise ValueError("curves must share level and recording grid")
    stack = np.stack([c.C for c in curves])
    mean = stack.mean(axis=0)
    if len(curves) > 1:
        stderr = stack.std(axis=0, ddof=1) / np.sqrt(len(curves))
    else:
        stderr = ref.stderr if ref.stderr is not None else np.zeros_like(mean)
    baseline = float(np.mean([c.baseline for c in curves]))
    return CorrelationCurve(
        level=ref.level,
        ns=ref.ns.copy(),
        C=mean,
        baseline=baseline,
        k=ref.k,
        stderr=stderr,
        n_chains=sum(c.n_chains for c in curves),
    )


class OverlapRecorder:
    """Chain observer collecting per-level overlaps against a reference
    state; plug into run_chain and read ``curves`` afterwards."""

    def __init__(self, x0: TreeSample, k: int = 1):
        self.x0 = x0
        self.k = k
        self.ns: list[int] = []
        self.rows: list[list[float]] = []

    def __call__(self, n: int, sample: TreeSample) -> None:
        self.ns.append(n)
        self.rows.append(
            [layer_overlap(self.x0, sample, l) for l in range(len(self.x0.levels))]
        )

    def curve(self, level: int, baseline: float) -> CorrelationCurve:
        data = np.array(self.rows)
        return CorrelationCurve(
            level=level, ns=np.array(self.ns), C=data[:, level], baseline=baseline, k=self.k
        )


def plateau(
    curve: CorrelationCurve,
    n_max: int | None = None,
    window_fraction: float = 0.1,
    min_points: int = 3,
) -> tuple[float, float]:
    """Late-time plateau of the normalized curve.

    Averages ``C_tilde`` over the trailing ``window_fraction`` of recorded
    points at steps <= n_max (all points by default) and reports the
    scatter-based standard error of that window mean.
    """
    ct = curve.C_tilde
    if n_max is not None:
        keep = curve.ns <= n_max
        if not keep.any():
            raise ValueError("curve has no points at or before n_max")
        ct = ct[keep]
    n_window = max(min_points, int(np.ceil(window_fraction * len(ct))))
    if len(ct) < min_points:
        raise ValueError(f"need at least {min_points} recorded points, have {len(ct)}")
    window = ct[-n_window:]
    err = window.std(ddof=1) / np.sqrt(len(window)) if len(window) > 1 else 0.0
    return float(window.mean()), float(err)


def relaxation_time(
    curve: CorrelationCurve,
    n_max: int | None = None,
    window_fraction: float = 0.1,
):
    """First time the plateau-subtracted normalized curve decays to 1/e.

    With plateau p, the decaying part is D(n) = (C_tilde(n) - p) / (1 - p);
    the crossing is interpolated linearly between recorded points and the
    first crossing wins under non-monotonic noise. Returns NOT_RELAXED
    (None) when D never reaches 1/e by n_max, or when p >= 1 (frozen
    chain).
    """
    target = float(np.exp(-1.0))
    p, _ = plateau(curve, n_max=n_max, window_fraction=window_fraction)
    if p >= 1.0:
        return NOT_RELAXED
    keep = slice(None) if n_max is None else curve.ns <= n_max
    ns = curve.ns[keep]
    D = (curve.C_tilde[keep] - p) / (1.0 - p)
    below = np.nonzero(D <= target)[0]
    if below.size == 0:
        return NOT_RELAXED
    i = below[0]
    if i == 0:
        return float(ns[0])
    n0, n1 = ns[i - 1], ns[i]
    d0, d1 = D[i - 1], D[i]
    if d0 == d1:
        return float(n1)
    frac = (d0 - target) / (d0 - d1)
    return float(n0 + frac * (n1 - n0))


# -- CSV schemas ------------------------------------------------------------------

FLOAT_FMT = "%.12g"


def write_curves_csv(path, curves: list[CorrelationCurve]) -> int:
    """Columns: level, n, cumulative_masks, C, C_tilde, stderr. Returns the
    number of data rows."""
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "n", "cumulative_masks", "C", "C_tilde", "stderr"])
        for c in curves:
            ct = c.C_tilde
            se = c.stderr if c.stderr is not None else np.zeros_like(c.C)
            for i in range(len(c.ns)):
                w.writerow(
                    [
                        c.level,
                        int(c.ns[i]),
                        int(c.ns[i]) * c.k,
                        FLOAT_FMT % c.C[i],
                        FLOAT_FMT % ct[i],
                        FLOAT_FMT % se[i],
                    ]
                )
                rows += 1
    return rows


def write_summary_csv(path, rows: list[dict]) -> int:
    """Columns: f, rho, level, plateau, plateau_over_std, tau, status."""
    cols = ["f", "rho", "level", "plateau", "plateau_over_std", "tau", "status"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            out = []
            for c in cols:
                val = row[c]
                if isinstance(val, float):
                    out.append(FLOAT_FMT % val)
                else:
                    out.append(val)
            w.writerow(out)
    return len(rows)
