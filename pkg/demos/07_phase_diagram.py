"""Desk-scale (f, rho) phase-diagram sweep.

Writes summary CSVs and a threshold report into run_demo/, ready for the
plotting package:

    plot heatmap  --in run_demo/summary_budget10000.csv \
                  --thresholds run_demo/thresholds.json --out phase.png
    plot tau_vs_f --in run_demo/summary_budget10000.csv \
                  --thresholds run_demo/thresholds.json --out tau.png
    plot curves   --in run_demo/curves_cell000.csv --out curves.png
"""

import csv
from pathlib import Path

from utmc import theory
from utmc.harness import ExperimentConfig, run_sweep

out = Path("run_demo")
cfg = ExperimentConfig(
    v=16, s=2, L=4,
    m_list=[2, 4, 6, 8, 10, 12],
    k_list=[1, 2, 8],
    mask_budgets=[1000, 10_000],
    chains=16, realizations=2, baseline_pairs=2000,
    seed=99, workers=4,
)
manifest = run_sweep(cfg, out_dir=out)

rep = theory.threshold_report("finite", 2, v=16, L=4, f_grid=[m / 16 for m in cfg.m_list])
(out / "thresholds.json").write_text(rep.to_json())

print(f"{len(manifest['cells'])} cells -> {out}/")
print(f"thresholds: f_per = {rep.f_per:.4f}, f_inv = {rep.f_inv:.4f}\n")
print("leaf-level plateau in pair-std units (rows rho, cols f):")
rows = [r for r in csv.DictReader(open(out / "summary_budget10000.csv")) if r["level"] == "0"]
rhos = sorted({r["rho"] for r in rows}, key=float)
fs = sorted({r["f"] for r in rows}, key=float)
print("         " + "  ".join(f"{float(f):6.3f}" for f in fs))
for rho in rhos:
    vals = [next(r for r in rows if r["rho"] == rho and r["f"] == f) for f in fs]
    line = "  ".join(f"{float(r['plateau_over_std']):6.1f}" for r in vals)
    print(f"rho={float(rho):5.3f}  {line}")
