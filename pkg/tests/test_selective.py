import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from screject.exceptions import InvalidInputError
from screject.selective import (
    ScoredPrediction,
    accept,
    aurc,
    coverage_at_risk,
    rc_curve,
    rc_curve_from_predictions,
    reject,
    risk_at_coverage,
    select_threshold,
    shift_mix_report,
)

from oracles import brute_aurc, brute_coverage_at_risk, brute_rc_points, brute_risk_at_coverage

U4 = [0.1, 0.2, 0.3, 0.4]
C4 = [True, True, False, True]


@st.composite
def scored_sets(draw, max_n=60):
    n = draw(st.integers(1, max_n))
    # few distinct levels so ties are common
    levels = draw(st.integers(1, n))
    u = draw(st.lists(st.integers(0, levels), min_size=n, max_size=n))
    c = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    return np.array(u, dtype=float) / 7.0, np.array(c)


def test_accept_reject_boundary():
    assert accept(0.3, 0.3)
    assert reject(0.31, 0.3)
    assert reject(-0.9, -0.95)


def test_four_sample_curve():
    curve = rc_curve(U4, C4)
    np.testing.assert_allclose(curve.coverage, [0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(curve.risk, [0, 0, 1 / 3, 0.25])
    assert aurc(curve) == pytest.approx(7 / 48, abs=1e-15)
    assert coverage_at_risk(curve, 0.25) == 1.0
    assert coverage_at_risk(curve, 0.10) == 0.5
    assert risk_at_coverage(curve, 0.75) == pytest.approx(1 / 3)
    assert risk_at_coverage(curve, 0.6) == pytest.approx(1 / 3)
    assert risk_at_coverage(curve, 1.0) == 0.25
    assert select_threshold(U4, C4, 0.10) == 0.2


def test_degenerate_curves():
    curve = rc_curve([0.5] * 4, [True, False, True, True])
    assert len(curve) == 1
    assert (curve.coverage[0], curve.risk[0]) == (1.0, 0.25)
    ok = rc_curve([0.1, 0.2, 0.3], [True] * 3)
    assert np.all(ok.risk == 0) and aurc(ok) == 0.0
    assert coverage_at_risk(ok, 0.0) == 1.0
    assert select_threshold([0.1, 0.2, 0.3], [True] * 3, 0.0) == 0.3
    bad = rc_curve([0.1, 0.2], [False, False])
    assert aurc(bad) == 1.0
    assert select_threshold([0.1, 0.2], [False, False], 0.0) == -np.inf
    assert coverage_at_risk(bad, 0.5) == 0.0


def test_input_validation():
    with pytest.raises(InvalidInputError):
        rc_curve([], [])
    with pytest.raises(InvalidInputError):
        rc_curve([0.1, 0.2], [True])
    with pytest.raises(InvalidInputError):
        rc_curve([np.nan], [True])
    with pytest.raises(InvalidInputError):
        risk_at_coverage(rc_curve(U4, C4), 0.0)
    with pytest.raises(InvalidInputError):
        rc_curve_from_predictions([ScoredPrediction(0.1, True, 1), ScoredPrediction(0.2, False, 1)])


def test_from_predictions_matches_arrays():
    preds = [ScoredPrediction(u, c, i) for i, (u, c) in enumerate(zip(U4, C4))]
    curve = rc_curve_from_predictions(reversed(preds))
    assert aurc(curve) == pytest.approx(7 / 48)


def test_brute_force_oracle_500_instances(rng):
    for _ in range(500):
        n = int(rng.integers(1, 201))
        u = rng.integers(0, max(1, n // 3), n) / 10.0  # inject ties
        c = rng.random(n) < rng.uniform(0.2, 0.95)
        curve = rc_curve(u, c)
        pts = brute_rc_points(u, c)
        assert len(curve) == len(pts)
        np.testing.assert_allclose(curve.coverage, [p[0] for p in pts], rtol=0, atol=1e-12)
        np.testing.assert_allclose(curve.risk, [p[1] for p in pts], rtol=0, atol=1e-12)
        np.testing.assert_array_equal(curve.threshold, [p[2] for p in pts])
        assert abs(aurc(curve) - brute_aurc(u, c)) <= 1e-12
        for target in (0.0, 0.05, 0.2, 0.5):
            assert abs(coverage_at_risk(curve, target) - brute_coverage_at_risk(u, c, target)) <= 1e-12
        for cov in (0.01, 0.3, 0.5, 0.77, 1.0):
            assert abs(risk_at_coverage(curve, cov) - brute_risk_at_coverage(u, c, cov)) <= 1e-12


def test_shift_mix_examples():
    rep = shift_mix_report([0.1, 0.2, 0.15], [True, True, False], ["id", "id", "shift"], 2 / 3)
    assert (rep["id"].count, rep["id"].errors, rep["id"].error_rate) == (1, 0, 0.0)
    assert (rep["shift"].count, rep["shift"].errors, rep["shift"].error_rate) == (1, 1, 1.0)

    c = np.array([True, False, True, True, False, False])
    src = ["id", "id", "id", "shift", "shift", "shift"]
    full = shift_mix_report(np.arange(6) / 6, c, src, 1.0)
    assert full["id"].error_rate == pytest.approx(1 / 3)
    assert full["shift"].error_rate == pytest.approx(2 / 3)

    sep = shift_mix_report([0.1, 0.2, 0.3, 0.8, 0.9], [True] * 5, ["id"] * 3 + ["shift"] * 2, 3 / 5)
    assert sep["shift"].count == 0
    assert np.isnan(sep["shift"].error_rate)


@given(scored_sets())
def test_full_coverage_risk_is_error_rate(case):
    u, c = case
    curve = rc_curve(u, c)
    assert curve.risk[-1] == (~c).sum() / len(c)
    assert risk_at_coverage(curve, 1.0) == curve.risk[-1]


@given(scored_sets(), st.data())
def test_permutation_invariance(case, data):
    u, c = case
    perm = np.array(data.draw(st.permutations(range(len(u)))))
    a, b = rc_curve(u, c), rc_curve(u[perm], c[perm])
    np.testing.assert_array_equal(a.coverage, b.coverage)
    np.testing.assert_array_equal(a.risk, b.risk)
    assert aurc(a) == aurc(b)


@given(scored_sets())
def test_aurc_rank_only(case):
    u, c = case
    assert aurc(rc_curve(u, c)) == pytest.approx(aurc(rc_curve(np.exp(3 * u) - 5, c)), abs=1e-15)


@given(scored_sets(), st.floats(0, 1), st.floats(0, 1))
def test_coverage_at_risk_monotone(case, r1, r2):
    curve = rc_curve(*case)
    lo, hi = min(r1, r2), max(r1, r2)
    assert coverage_at_risk(curve, lo) <= coverage_at_risk(curve, hi)


@given(scored_sets(), st.floats(0, 1))
def test_select_threshold_meets_target(case, target):
    u, c = case
    tau = select_threshold(u, c, target)
    taken = accept(u, tau)
    if taken.any():
        assert (~c[taken]).mean() <= target
        assert taken.mean() == coverage_at_risk(rc_curve(u, c), target)
    else:
        assert tau == -np.inf
