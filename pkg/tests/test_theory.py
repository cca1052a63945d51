import json
import math

import numpy as np
import pytest

from utmc.theory import (
    NoBracketError,
    ThresholdReport,
    admissible_counts,
    branching_asymptotic,
    branching_finite,
    cascade_probability,
    solve_f_inv,
    solve_f_per,
    threshold_report,
)


def test_admissible_counts_root_and_bounds():
    for v, s, L, m in [(4, 2, 3, 2), (16, 2, 4, 7.5), (8, 3, 2, 30)]:
        counts = admissible_counts(v, s, L, m)
        assert counts[L] == v
        assert (counts >= 1.0).all() and (counts <= v).all()


def test_admissible_counts_full_density_fixed_point():
    for v, s in [(4, 2), (8, 2), (3, 3)]:
        counts = admissible_counts(v, s, 4, float(v ** (s - 1)))
        assert np.allclose(counts, v, atol=1e-12)


def test_admissible_counts_large_alphabet_limit():
    # deep below the root the counts converge to 1/(1-f)
    v, s, L, f = 10**8, 2, 60, 0.3
    counts = admissible_counts(v, s, L, f * v)
    assert counts[0] == pytest.approx(1.0 / (1.0 - f), rel=1e-7)
    assert counts[20] == pytest.approx(1.0 / (1.0 - f), rel=1e-7)


def test_admissible_counts_validation():
    with pytest.raises(ValueError):
        admissible_counts(4, 2, 3, 0.5)
    with pytest.raises(ValueError):
        admissible_counts(4, 2, 3, 5.0)


def test_cascade_probability_basics():
    counts = np.array([1.5, 1.0, 4.0])
    assert cascade_probability(counts, 0, 2) == 0.0  # a unit count blocks
    assert cascade_probability(counts, 1, 2) == pytest.approx(0.75)
    assert cascade_probability(counts, 0, 0) == 1.0
    v = 7
    counts = admissible_counts(v, 2, 3, 3)
    assert cascade_probability(counts, 2, 3) == pytest.approx(1 - 1 / v)
    with pytest.raises(ValueError):
        cascade_probability(counts, 2, 1)


def test_cascade_probability_asymptotic_power():
    f = 0.37
    counts = np.full(7, 1.0 / (1.0 - f))
    for level in range(1, 7):
        assert cascade_probability(counts, 0, level) == pytest.approx(f**level, rel=1e-12)


def test_branching_finite_single_level():
    v, s, f = 9, 2, 0.4
    counts = admissible_counts(v, s, 1, f * v)
    n0 = counts[0]
    expected = (s - 1) * (n0 - 1) * (1 - (n0 - 1) / (v - 1))
    assert branching_finite(f, v, s, 1) == pytest.approx(expected, rel=1e-12)


def test_branching_finite_converges_to_asymptotic():
    # the leading finite-alphabet correction is ~1/v, so the gap at
    # v = 1e6 floors just above 1e-6 and shrinks exactly tenfold at 1e7
    for f in (0.02, 0.1, 0.35):
        gap6 = abs(branching_finite(f, 10**6, 2, 60) - branching_asymptotic(f, 2))
        gap7 = abs(branching_finite(f, 10**7, 2, 60) - branching_asymptotic(f, 2))
        assert gap6 <= 5e-6
        assert gap7 <= 0.11 * gap6
        assert gap7 <= 1e-6


def test_branching_finite_monotone_below_threshold():
    v, s, L = 16, 2, 4
    f_per = solve_f_per("finite", s, v=v, L=L).f
    grid = np.linspace(1.0 / v, f_per, 40)
    vals = [branching_finite(f, v, s, L) for f in grid]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_branching_asymptotic_hand_value():
    # f(s-1) / ((1 - s f^2)(1 - f)) at f=0.2, s=2
    assert branching_asymptotic(0.2, 2) == pytest.approx(0.27174, abs=5e-6)


def test_branching_asymptotic_limits():
    assert branching_asymptotic(1e-9, 2) < 1e-8
    assert branching_asymptotic(1 / math.sqrt(2) - 1e-9, 2) > 1e6
    with pytest.raises(ValueError):
        branching_asymptotic(1 / math.sqrt(2), 2)
    with pytest.raises(ValueError):
        branching_asymptotic(0.0, 2)


def test_reduction_identity_per_term():
    # with counts pinned at 1/(1-f) the finite summand reproduces
    # (s^l - s^(l-1)) f^(2l-1) / (1-f); the newly-enabled factor tends to 1
    f, s, v, L = 0.3, 2, 10**8, 12
    counts = np.full(L + 1, 1.0 / (1.0 - f))
    for l in range(1, L + 1):
        sites = s**l - s ** (l - 1)
        casc = cascade_probability(counts, 0, l - 1)
        term = sites * (counts[0] - 1.0) * casc**2
        expected = sites * f ** (2 * l - 1) / (1.0 - f)
        assert abs(term - expected) <= 1e-9
        enabled = 1.0 - (counts[l - 1] - 1.0) / (v - 1.0)
        assert abs(enabled - 1.0) <= 1e-7


def _per_root_oracle_s2():
    # independent bisection of the rearranged threshold polynomial
    # 2 f^3 - 2 f^2 - 2 f + 1 = 0 on (0.3, 0.45)
    def poly(f):
        return 2 * f**3 - 2 * f**2 - 2 * f + 1

    lo, hi = 0.3, 0.45
    assert poly(lo) > 0 > poly(hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if poly(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_solve_f_per_asymptotic_s2():
    oracle_root = _per_root_oracle_s2()
    assert oracle_root == pytest.approx(0.40303, abs=1e-5)
    res = solve_f_per("asymptotic", 2)
    assert res.f == pytest.approx(oracle_root, abs=1e-4)
    assert res.residual <= 1e-9


def test_solve_f_per_large_s_expansion():
    for s in (8, 16, 32, 64):
        f = solve_f_per("asymptotic", s).f
        assert abs(f - (1.0 / s - 1.0 / s**2)) <= 5.0 / s**3


def test_solve_f_inv_asymptotic_exact():
    assert solve_f_inv("asymptotic", 2).f == 0.5
    assert solve_f_inv("asymptotic", 3).f == pytest.approx(1 / 3, abs=1e-15)


def test_finite_mode_converges_to_asymptotic():
    per = solve_f_per("finite", 2, v=10**6, L=60)
    inv = solve_f_inv("finite", 2, v=10**6, L=60)
    assert abs(per.f - solve_f_per("asymptotic", 2).f) <= 1e-3
    assert abs(inv.f - 0.5) <= 1e-3
    assert per.residual <= 1e-9


def test_thresholds_lie_in_unit_interval():
    for mode, v, L in [("asymptotic", None, None), ("finite", 16, 4), ("finite", 32, 6)]:
        for s in (2, 3):
            per = solve_f_per(mode, s, v=v, L=L)
            inv = solve_f_inv(mode, s, v=v, L=L)
            assert 0.0 < per.f < 1.0
            assert 0.0 < inv.f < 1.0


def test_no_bracket_reported():
    # at L=1 the first latent level is the root, whose count ignores f
    with pytest.raises(NoBracketError):
        solve_f_inv("finite", 2, v=2, L=1)


def test_solver_needs_finite_parameters():
    with pytest.raises(ValueError):
        solve_f_per("finite", 2)
    with pytest.raises(ValueError):
        solve_f_per("nonsense", 2)


def test_threshold_report_json_roundtrip(tmp_path):
    rep = threshold_report("finite", 2, v=16, L=4, f_grid=[0.2, 0.3, 0.4])
    text = rep.to_json()
    back = ThresholdReport.from_json(text)
    assert back.f_per == rep.f_per
    assert back.f_inv == rep.f_inv
    assert back.branching == rep.branching
    doc = json.loads(text)
    assert doc["mode"] == "finite" and len(doc["counts_at_f_per"]) == 5


def test_threshold_report_records_no_bracket():
    rep = threshold_report("finite", 2, v=2, L=1)
    assert rep.f_inv is None
    assert any("f_inv" in n for n in rep.notes)
