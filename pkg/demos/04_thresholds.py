"""Branching predictions of the percolation and layer-inversion thresholds.

The single-flip move graph percolates once each accepted flip opens more
than one new flip on average; the layer ordering of relaxation inverts
where the per-level population shrinkage balances the cascade
probability.
"""

import numpy as np

from utmc import theory

print("asymptotic (v, L -> infinity):")
for s in (2, 3, 4, 8):
    per = theory.solve_f_per("asymptotic", s).f
    inv = theory.solve_f_inv("asymptotic", s).f
    print(f"  s={s}: f_per = {per:.5f}   f_inv = {inv:.5f}   1/s - 1/s^2 = {1/s - 1/s**2:.5f}")

print("\nfinite-size corrections at s=2:")
for v, L in [(16, 4), (32, 6), (32, 8), (10**4, 20), (10**6, 60)]:
    per = theory.solve_f_per("finite", 2, v=v, L=L).f
    inv = theory.solve_f_inv("finite", 2, v=v, L=L).f
    print(f"  v={v:>7} L={L:>2}: f_per = {per:.5f}   f_inv = {inv:.5f}")

f = 0.3
counts = theory.admissible_counts(16, 2, 4, f * 16)
print(f"\nadmissible counts at v=16, L=4, f={f}: {np.round(counts, 3)} (root = v)")
print(f"cascade to the top: {theory.cascade_probability(counts, 0, 4):.4f}")
print(f"branching number n(f): finite {theory.branching_finite(f, 16, 2, 4):.4f}, "
      f"asymptotic {theory.branching_asymptotic(f, 2):.4f}")
