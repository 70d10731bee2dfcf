"""Discontinuity test: null simulation, studentized statistic, selection."""

import csv
import math

import numpy as np
import pytest

from cojump import bootstrap, jumps, jwc, modwt

N = 540
CFG = jwc.JwcConfig(g_spacing=5)


def _detect(returns):
    w1 = modwt.level1_coefficients(returns, modwt.haar())
    return jumps.detect_jumps(returns, w1, jumps.universal_threshold(w1))


def _run_day(seed, jump_spec=(), b_reps=199):
    """One synthetic day-pair through detection, IC, and the test."""
    r_1, r_2 = bootstrap.simulate_null_day(
        1e-4, 1.44e-4, 0.5, N, np.random.default_rng(seed)
    )
    r_1, r_2 = r_1.copy(), r_2.copy()
    for leg, idx, size in jump_spec:
        (r_1 if leg == 0 else r_2)[idx] += size
    j_1, j_2 = _detect(r_1), _detect(r_2)
    adjusted = np.vstack([jumps.adjust_returns(r_1, j_1), jumps.adjust_returns(r_2, j_2)])
    ic = jwc.jwc_integrated_covariance(adjusted, CFG)
    out = bootstrap.bootstrap_statistic(
        r_1, r_2, j_1, j_2, ic, b_reps=b_reps, alpha=0.05, seed=seed
    )
    return out, j_1, j_2


def test_critical_value():
    assert bootstrap.critical_value(0.05) == pytest.approx(1.959964, abs=1e-5)
    assert bootstrap.critical_value(0.01) == pytest.approx(2.575829, abs=1e-5)
    for bad in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ValueError):
            bootstrap.critical_value(bad)


def test_null_day_rho_one_proportional():
    r_1, r_2 = bootstrap.simulate_null_day(1e-4, 4e-4, 1.0, 64, 3)
    assert r_2 == pytest.approx(2.0 * r_1, rel=1e-12)


def test_null_day_zero_diag_zero_series():
    r_1, r_2 = bootstrap.simulate_null_day(0.0, 1e-4, 0.3, 64, 3)
    assert np.all(r_1 == 0.0)
    assert np.any(r_2 != 0.0)


def test_null_day_moments():
    rng = np.random.default_rng(77)
    r_1, r_2 = bootstrap.simulate_null_day(1e-4, 1.44e-4, 0.6, 100_000, rng)
    assert np.corrcoef(r_1, r_2)[0, 1] == pytest.approx(0.6, abs=0.01)
    assert float(np.var(r_1)) * 100_000 == pytest.approx(1e-4, rel=0.02)
    assert float(np.var(r_2)) * 100_000 == pytest.approx(1.44e-4, rel=0.02)


def test_null_day_validation():
    with pytest.raises(ValueError, match="rho"):
        bootstrap.simulate_null_day(1e-4, 1e-4, 1.5, 16, 0)
    with pytest.raises(ValueError, match="non-negative"):
        bootstrap.simulate_null_day(-1e-4, 1e-4, 0.5, 16, 0)


def test_null_day_deterministic():
    a = bootstrap.simulate_null_day(1e-4, 2e-4, 0.4, 32, 123)
    b = bootstrap.simulate_null_day(1e-4, 2e-4, 0.4, 32, 123)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_quiet_day_accepts():
    out, j_1, j_2 = _run_day(0)
    assert j_1.count == 0 and j_2.count == 0
    assert not out.rejected
    assert not out.inconclusive
    assert out.classification == "no_discontinuity"
    # bootstrap centering reflects the estimator's partition deficit nbar_G/n_S
    assert out.mean_z_star == pytest.approx((536 / 5) / 540, abs=0.05)


def test_common_jump_rejects_as_co_jump():
    out, j_1, j_2 = _run_day(0, [(0, 200, 0.05), (1, 200, 0.06)])
    assert j_1.jump_indices.tolist() == [200]
    assert j_2.jump_indices.tolist() == [200]
    assert out.rejected
    assert out.classification == "co_jump"
    assert out.z > bootstrap.critical_value(0.05)


def test_disjoint_jumps_reject_as_disjoint_only():
    out, j_1, j_2 = _run_day(1, [(0, 100, 0.05), (1, 400, -0.06)])
    assert j_1.jump_indices.tolist() == [100]
    assert j_2.jump_indices.tolist() == [400]
    assert out.rejected
    assert out.classification == "disjoint_only"


def test_detected_jump_without_rejection_is_no_discontinuity():
    out, j_1, j_2 = _run_day(0, [(0, 100, 0.08)])
    assert j_1.count == 1 and j_2.count == 0
    assert not out.rejected
    assert out.classification == "no_discontinuity"


def test_rejection_matches_p_value():
    for seed, spec in [(0, ()), (0, [(0, 200, 0.05), (1, 200, 0.06)]), (4, ())]:
        out, _, _ = _run_day(seed, spec)
        assert out.rejected == (out.p_value < out.alpha)
        assert 0.0 <= out.p_value <= 1.0


def test_statistic_deterministic():
    a, _, _ = _run_day(0, [(0, 200, 0.05), (1, 200, 0.06)])
    b, _, _ = _run_day(0, [(0, 200, 0.05), (1, 200, 0.06)])
    assert a.z == b.z
    assert a.p_value == b.p_value
    assert a.mean_z_star == b.mean_z_star
    assert a.var_z_star == b.var_z_star


def test_minimum_replications_enforced():
    with pytest.raises(ValueError, match="100"):
        _run_day(0, b_reps=99)


def test_zero_qv_inconclusive():
    n = 64
    zero = np.zeros(n)
    j = jumps.JumpSeries(n=n, jump_indices=np.empty(0, dtype=int),
                         jump_sizes=np.zeros(n), threshold=0.0, degenerate=True)
    ic = jwc.jwc_integrated_covariance(np.vstack([zero, zero]), jwc.JwcConfig(g_spacing=5))
    out = bootstrap.bootstrap_statistic(zero, zero, j, j, ic, b_reps=150)
    assert out.inconclusive
    assert not out.rejected
    assert math.isnan(out.z) and math.isnan(out.p_value)
    assert out.classification == "no_discontinuity"


def test_zero_diagonal_inconclusive():
    rng = np.random.default_rng(8)
    r_1 = rng.standard_normal(N) * 1e-3
    r_2 = rng.standard_normal(N) * 1e-3
    j = jumps.JumpSeries(n=N, jump_indices=np.empty(0, dtype=int),
                         jump_sizes=np.zeros(N), threshold=1.0)
    # one leg fully suppressed: its IC diagonal is exactly zero
    ic = jwc.jwc_integrated_covariance(np.vstack([np.zeros(N), r_2]), CFG)
    assert ic.values[0, 0] == 0.0
    out = bootstrap.bootstrap_statistic(r_1, r_2, j, j, ic, b_reps=150)
    assert out.inconclusive


def test_select_ic_star_branches():
    def outcome(z, inconclusive=False):
        return bootstrap.TestOutcome(
            date=None, pair=("a", "b"), z=z, p_value=0.5, rejected=False,
            mean_z_star=0.0, var_z_star=1.0, b_reps=999, alpha=0.05, seed=0,
            classification="no_discontinuity", inconclusive=inconclusive,
        )

    qv, robust = 2.0, 1.5
    assert bootstrap.select_ic_star(outcome(0.0), qv, robust) == qv
    assert bootstrap.select_ic_star(outcome(10.0), qv, robust) == robust
    assert bootstrap.select_ic_star(outcome(-10.0), qv, robust) == robust
    crit = bootstrap.critical_value(0.05)
    assert bootstrap.select_ic_star(outcome(crit), qv, robust) == qv  # boundary accepts
    assert bootstrap.select_ic_star(outcome(float("nan"), inconclusive=True), qv, robust) == robust


def test_outcome_classification_validated():
    with pytest.raises(ValueError, match="classification"):
        bootstrap.TestOutcome(
            date=None, pair=("a", "b"), z=0.0, p_value=1.0, rejected=False,
            mean_z_star=0.0, var_z_star=1.0, b_reps=999, alpha=0.05, seed=0,
            classification="maybe",
        )


def test_write_outcomes_schema(tmp_path):
    out, _, _ = _run_day(0, [(0, 200, 0.05), (1, 200, 0.06)])
    out.date = "2026-01-05"
    out.pair = ("AAA", "BBB")
    quiet, _, _ = _run_day(0)
    quiet.date = "2026-01-06"
    quiet.pair = ("AAA", "BBB")
    path = tmp_path / "outcomes.csv"
    bootstrap.write_outcomes([out, quiet], path)
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["date", "pair", "Z", "p", "rejected", "classification", "B", "alpha", "seed"]
    assert rows[1][0] == "2026-01-05"
    assert rows[1][1] == "AAA-BBB"
    assert float(rows[1][2]) == out.z
    assert rows[1][4] == "1" and rows[2][4] == "0"
    assert rows[1][5] == "co_jump"
    assert rows[2][5] == "no_discontinuity"
    assert rows[1][6] == "199"
