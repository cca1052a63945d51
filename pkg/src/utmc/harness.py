"""Experiment orchestration: configs, sweeps over (f, rho) grids, seeding,
parallel execution, and persistence.

A sweep cell is one (m, k) pair; each cell runs ``realizations``
independent grammar draws with ``chains`` chains per draw. Every task
derives its RNG streams from the master seed and its (cell, realization)
indices, and results are merged in sorted task order, so outputs are
byte-identical for any worker count. Floats in CSV files are always
rendered with the %.12g format.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chain as chain_mod
from . import observables as obs
from . import oracle as oracle_mod
from . import streams, theory
from .grammar import Grammar, GrammarParams, generate_batch, sample_grammar

FLOAT_FMT = "%.12g"
ENV_OUTDIR = "UTMC_OUTDIR"


def default_outdir() -> Path:
    return Path(os.environ.get(ENV_OUTDIR, "utmc_out"))


@dataclass
class ExperimentConfig:
    """Sweep definition; see README for the JSON schema."""

    v: int
    s: int
    L: int
    m_list: list[int] = field(default_factory=list)
    f_list: list[float] = field(default_factory=list)
    k_list: list[int] = field(default_factory=list)
    rho_list: list[float] = field(default_factory=list)
    mask_budgets: list[int] = field(default_factory=lambda: [10_000])
    chains: int = 16
    realizations: int = 2
    record_points: int = 300
    baseline_pairs: int = 4000
    plateau_window: float = 0.1
    shared_rules: bool = False
    share_x0: bool = False
    energy: dict | None = None
    seed: int = 0
    workers: int = 0
    output_dir: str = ""

    def __post_init__(self):
        if not self.m_list and not self.f_list:
            raise ValueError("config needs m_list or f_list")
        if not self.k_list and not self.rho_list:
            raise ValueError("config needs k_list or rho_list")
        if not 1 <= len(self.mask_budgets) <= 2:
            raise ValueError("mask_budgets takes one or two cutoffs")
        d = self.s**self.L
        for m in self.resolved_m_list():
            GrammarParams(v=self.v, s=self.s, L=self.L, m=m)  # validates m range
        for k in self.resolved_k_list():
            if not 1 <= k <= d:
                raise ValueError(f"k={k} outside [1, d={d}]")

    def resolved_m_list(self) -> list[int]:
        if self.m_list:
            return [int(m) for m in self.m_list]
        cap = self.v ** (self.s - 1)
        return [int(np.clip(round(f * cap), 1, cap)) for f in self.f_list]

    def resolved_k_list(self) -> list[int]:
        d = self.s**self.L
        if self.k_list:
            return [int(k) for k in self.k_list]
        return [int(np.clip(round(r * d), 1, d)) for r in self.rho_list]

    def requested_f(self, idx: int) -> float:
        if self.f_list:
            return float(self.f_list[idx])
        return self.m_list[idx] / self.v ** (self.s - 1)

    def cells(self) -> list[dict]:
        """Flattened grid, one entry per (m, k) pair, in grid order."""
        d = self.s**self.L
        out = []
        ms = self.resolved_m_list()
        ks = self.resolved_k_list()
        idx = 0
        for mi, m in enumerate(ms):
            for k in ks:
                out.append(
                    {
                        "cell": idx,
                        "m": m,
                        "k": k,
                        "f_requested": self.requested_f(mi),
                        "f": m / self.v ** (self.s - 1),
                        "rho": k / d,
                    }
                )
                idx += 1
        return out

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=1)


def record_schedule(n_steps: int, n_points: int = 300) -> np.ndarray:
    """Recording steps: dense at the start, geometric afterwards, always
    including 0 and n_steps."""
    if n_steps <= n_points:
        return np.arange(n_steps + 1)
    dense = np.arange(min(16, n_steps) + 1)
    geom = np.round(np.geomspace(16, n_steps, n_points)).astype(np.int64)
    return np.unique(np.concatenate([dense, geom, [n_steps]]))


# -- per-task work (top level so process pools can pickle it) -----------------


def _run_cell_realization(payload: dict) -> dict:
    """One (cell, realization) task: sample a grammar, run a batch of
    chains, and reduce to per-level mean curves plus baseline statistics."""
    master = payload["seed"]
    cell = payload["cell"]
    real = payload["realization"]
    gseed = streams.derive_seed(master, streams.GRAMMAR, cell, real)
    params = GrammarParams(
        v=payload["v"], s=payload["s"], L=payload["L"], m=payload["m"], seed=gseed
    )
    g = sample_grammar(params, shared_rules=payload["shared_rules"])
    B = payload["chains"]
    init_rng = streams.stream(master, streams.INIT, cell, real)
    if payload["share_x0"]:
        one = generate_batch(g, 1, init_rng)
        x0 = [np.repeat(lvl, B, axis=0) for lvl in one]
    else:
        x0 = generate_batch(g, B, init_rng)
    record_ns = np.asarray(payload["record_ns"])
    n_levels = params.L + 1
    sums = np.zeros((n_levels, len(record_ns), B))
    slot = {int(n): i for i, n in enumerate(record_ns)}

    def on_record(n, levels):
        i = slot[n]
        for l in range(n_levels):
            sums[l, i] = (levels[l] == x0[l]).mean(axis=1)

    chain_rng = streams.stream(master, streams.CHAIN, cell, real)
    energy = chain_mod.energy_from_json(payload["energy"]) if payload["energy"] else None
    _, accepts = chain_mod.run_chain_batch(
        g,
        x0,
        k=payload["k"],
        n_steps=payload["n_steps"],
        rng=chain_rng,
        record_ns=record_ns,
        callback=on_record,
        energy=energy,
    )
    base_rng = streams.stream(master, streams.BASELINE, cell, real)
    stats = obs.independent_pair_stats(g, payload["baseline_pairs"], base_rng)
    return {
        "cell": cell,
        "realization": real,
        "grammar_seed": gseed,
        "mean": sums.mean(axis=2),
        "std": sums.std(axis=2, ddof=1) if B > 1 else np.zeros_like(sums.mean(axis=2)),
        "chains": B,
        "baseline_means": stats.means,
        "baseline_stds": stats.stds,
        "accept_rate": float(accepts.sum() / (B * payload["n_steps"]))
        if accepts is not None and payload["n_steps"] > 0
        else None,
    }


def _cell_tasks(cfg: ExperimentConfig) -> list[dict]:
    tasks = []
    for cell in cfg.cells():
        n_steps = int(np.ceil(max(cfg.mask_budgets) / cell["k"]))
        record_ns = record_schedule(n_steps, cfg.record_points)
        cut_ns = [min(n_steps, budget // cell["k"]) for budget in cfg.mask_budgets]
        record_ns = np.unique(np.concatenate([record_ns, cut_ns]))
        for real in range(cfg.realizations):
            tasks.append(
                {
                    "seed": cfg.seed,
                    "cell": cell["cell"],
                    "realization": real,
                    "v": cfg.v,
                    "s": cfg.s,
                    "L": cfg.L,
                    "m": cell["m"],
                    "k": cell["k"],
                    "n_steps": n_steps,
                    "record_ns": record_ns,
                    "chains": cfg.chains,
                    "baseline_pairs": cfg.baseline_pairs,
                    "shared_rules": cfg.shared_rules,
                    "share_x0": cfg.share_x0,
                    "energy": cfg.energy,
                }
            )
    return tasks


@dataclass
class CellResult:
    cell: dict
    record_ns: np.ndarray
    curves: list[obs.CorrelationCurve]  # merged across realizations, per level
    baseline_means: np.ndarray
    baseline_stds: np.ndarray
    grammar_seeds: list[int]
    accept_rate: float | None = None
    error: str | None = None


def run_sweep(cfg: ExperimentConfig, out_dir: Path | None = None) -> dict:
    """Run the full grid and write curves, summaries, and a manifest.

    Returns the manifest dict. Outputs: ``curves_cell{i:03d}.csv`` per
    cell, one ``summary_budget{B}.csv`` per mask budget with columns
    (f, rho, level, plateau, plateau_over_std, tau, status), and
    ``manifest.json``.
    """
    out = Path(out_dir) if out_dir is not None else (
        Path(cfg.output_dir) if cfg.output_dir else default_outdir()
    )
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    tasks = _cell_tasks(cfg)
    if cfg.workers and cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            raw = list(pool.map(_run_cell_realization, tasks))
    else:
        raw = [_run_cell_realization(t) for t in tasks]
    raw.sort(key=lambda r: (r["cell"], r["realization"]))

    by_cell: dict[int, list[dict]] = {}
    for r in raw:
        by_cell.setdefault(r["cell"], []).append(r)

    cells = cfg.cells()
    results: list[CellResult] = []
    for cell in cells:
        parts = by_cell[cell["cell"]]
        task = next(t for t in tasks if t["cell"] == cell["cell"])
        record_ns = np.asarray(task["record_ns"])
        n_levels = cfg.L + 1
        curves = []
        for l in range(n_levels):
            mu = obs.ergodic_baseline(cfg.v, cfg.s, cfg.L, cell["m"], l)
            per_real = [
                obs.CorrelationCurve(
                    level=l,
                    ns=record_ns,
                    C=p["mean"][l],
                    baseline=mu,
                    k=cell["k"],
                    stderr=p["std"][l] / np.sqrt(p["chains"]),
                    n_chains=p["chains"],
                )
                for p in parts
            ]
            curves.append(obs.merge_curves(per_real))
        results.append(
            CellResult(
                cell=cell,
                record_ns=record_ns,
                curves=curves,
                baseline_means=np.mean([p["baseline_means"] for p in parts], axis=0),
                baseline_stds=np.mean([p["baseline_stds"] for p in parts], axis=0),
                grammar_seeds=[p["grammar_seed"] for p in parts],
                accept_rate=parts[0]["accept_rate"],
            )
        )

    files = []
    for res in results:
        path = out / f"curves_cell{res.cell['cell']:03d}.csv"
        rows = obs.write_curves_csv(path, res.curves)
        files.append({"path": path.name, "rows": rows})

    inversion = {}
    for budget in cfg.mask_budgets:
        rows = []
        for res in results:
            n_cut = min(int(res.record_ns[-1]), budget // res.cell["k"])
            taus = {}
            for l, curve in enumerate(res.curves):
                try:
                    p_val, _ = obs.plateau(curve, n_max=n_cut, window_fraction=cfg.plateau_window)
                    tau = obs.relaxation_time(curve, n_max=n_cut, window_fraction=cfg.plateau_window)
                    std = res.baseline_stds[l]
                    scaled = p_val * (1.0 - curve.baseline)
                    over = scaled / std if std > 0 else (np.inf if scaled > 0 else 0.0)
                    taus[l] = tau
                    rows.append(
                        {
                            "f": res.cell["f"],
                            "rho": res.cell["rho"],
                            "level": l,
                            "plateau": p_val,
                            "plateau_over_std": over,
                            "tau": tau if tau is not None else float("nan"),
                            "status": "ok" if tau is not None else "not_relaxed",
                        }
                    )
                except Exception as e:  # isolate per-cell failures
                    rows.append(
                        {
                            "f": res.cell["f"],
                            "rho": res.cell["rho"],
                            "level": l,
                            "plateau": float("nan"),
                            "plateau_over_std": float("nan"),
                            "tau": float("nan"),
                            "status": f"failed:{type(e).__name__}",
                        }
                    )
            lo, hi = 0, cfg.L - 1 if cfg.L > 1 else cfg.L
            t_lo, t_hi = taus.get(lo), taus.get(hi)
            inversion[(res.cell["cell"], budget)] = (
                None if t_lo is None or t_hi is None else float(np.sign(t_hi - t_lo))
            )
        path = out / f"summary_budget{budget}.csv"
        n_rows = obs.write_summary_csv(path, rows)
        files.append({"path": path.name, "rows": n_rows})

    manifest = {
        "config": json.loads(cfg.to_json()),
        "version": _version(),
        "started": started,
        "finished": time.time(),
        "cells": [
            {
                **res.cell,
                "grammar_seeds": res.grammar_seeds,
                "baseline_means": res.baseline_means.tolist(),
                "baseline_stds": res.baseline_stds.tolist(),
                "accept_rate": res.accept_rate,
                "inversion_sign": {
                    str(b): inversion[(res.cell["cell"], b)] for b in cfg.mask_budgets
                },
            }
            for res in results
        ],
        "files": files,
        "float_format": FLOAT_FMT,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    return manifest


def _version() -> str:
    from . import __version__

    return __version__


# -- oracle sweep ----------------------------------------------------------------


def component_stats(
    v: int,
    s: int,
    L: int,
    m_list: list[int],
    realizations: int,
    seed: int,
    budget: int = oracle_mod.DEFAULT_BUDGET,
) -> list[dict]:
    """Exact flip-graph component statistics across rule densities.

    One row per (m, realization): sentence count, component count, largest
    component fraction.
    """
    rows = []
    for mi, m in enumerate(m_list):
        for real in range(realizations):
            gseed = streams.derive_seed(seed, streams.GRAMMAR, mi, real)
            g = sample_grammar(GrammarParams(v=v, s=s, L=L, m=m, seed=gseed))
            sset = oracle_mod.enumerate_sentences(g, budget=budget)
            graph = oracle_mod.build_flip_graph(sset)
            rows.append(
                {
                    "v": v,
                    "s": s,
                    "L": L,
                    "m": m,
                    "f": m / v ** (s - 1),
                    "realization": real,
                    "n_sentences": sset.n,
                    "n_components": graph.n_components,
                    "largest_fraction": graph.largest_fraction(),
                }
            )
    return rows


def write_component_csv(path, rows: list[dict]) -> int:
    import csv

    cols = ["v", "s", "L", "m", "f", "realization", "n_sentences", "n_components", "largest_fraction"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow(
                [FLOAT_FMT % row[c] if isinstance(row[c], float) else row[c] for c in cols]
            )
    return len(rows)
