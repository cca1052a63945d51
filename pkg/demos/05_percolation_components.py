"""Fragmentation of the single-flip graph across rule densities.

Exact enumeration on a small instance: as the rule density grows past the
finite-size threshold, the largest connected component swallows the
sentence set.
"""

from utmc import theory
from utmc.harness import component_stats

v, s, L = 8, 2, 3
f_per = theory.solve_f_per("finite", s, v=v, L=L).f
print(f"finite-size percolation threshold at v={v}, L={L}: f_per = {f_per:.4f}\n")
print(" m      f    sentences  components  largest fraction (5 rule draws)")

rows = component_stats(v=v, s=s, L=L, m_list=[1, 2, 3, 4], realizations=5, seed=3)
by_m = {}
for r in rows:
    by_m.setdefault(r["m"], []).append(r)
for m, group in sorted(by_m.items()):
    frac = sum(r["largest_fraction"] for r in group) / len(group)
    comps = sum(r["n_components"] for r in group) / len(group)
    marker = "  <- f_per" if abs(group[0]["f"] - f_per) < 0.5 / v else ""
    print(f"{m:2d}  {group[0]['f']:.3f}  {group[0]['n_sentences']:9d}  {comps:10.1f}  {frac:16.3f}{marker}")
