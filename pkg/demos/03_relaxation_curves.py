"""Layer-wise relaxation of mask-resample chains at two rule densities.

Dense grammars forget their initial state down to the ergodic baseline;
sparse grammars keep a finite memory plateau because the single-flip
move graph fragments.
"""

import numpy as np

from utmc.harness import ExperimentConfig, run_sweep

cfg = ExperimentConfig(
    v=16, s=2, L=4,
    m_list=[3, 10],           # f = 0.1875 (fragmented) and f = 0.625 (mixing)
    k_list=[1],
    mask_budgets=[3000],
    chains=16, realizations=2, baseline_pairs=2000,
    seed=12, workers=2,
)
manifest = run_sweep(cfg, out_dir="run_demo_curves")

import csv

for cell in manifest["cells"]:
    path = f"run_demo_curves/curves_cell{cell['cell']:03d}.csv"
    rows = [r for r in csv.DictReader(open(path)) if r["level"] == "0"]
    ns = np.array([int(r["n"]) for r in rows])
    ct = np.array([float(r["C_tilde"]) for r in rows])
    print(f"\nf = {cell['f']:.4f} (m = {cell['m']}), leaf level:")
    for target in (0, 10, 100, 1000, 3000):
        i = np.argmin(np.abs(ns - target))
        print(f"  n = {ns[i]:5d}   C~ = {ct[i]:+.3f}")
print("\nfull curves in run_demo_curves/, summaries in summary_budget3000.csv")
