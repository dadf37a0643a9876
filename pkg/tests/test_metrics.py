import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bookcast.metrics import (MetricReport, aql, aqcr, evaluate,
                              format_mean_std, mae, r2, rmse, summarize_runs)

Q3 = (0.1, 0.5, 0.9)


def test_aql_perfect_predictions():
    y = np.array([1.0, 2.0, 3.0])
    yhat = np.tile(y[:, None], (1, 3))
    assert aql(y, yhat, Q3) == 0.0


def test_aql_hand_example():
    # single sample, two quantiles, both predicting 6 against truth 10
    y = np.array([10.0])
    yhat = np.array([[6.0, 6.0]])
    assert aql(y, yhat, (0.1, 0.9)) == pytest.approx((0.4 + 3.6) / 2)


def test_aql_equals_half_mae_at_median():
    rng = np.random.default_rng(0)
    y = rng.normal(size=500)
    yhat = rng.normal(size=(500, 1))
    assert aql(y, yhat, (0.5,)) == pytest.approx(mae(y, yhat[:, 0]) / 2, abs=1e-12)


def test_aql_errors():
    with pytest.raises(ValueError):
        aql(np.empty(0), np.empty((0, 1)), (0.5,))
    with pytest.raises(ValueError):
        aql(np.ones(3), np.ones((3, 2)), (0.5,))


def test_aqcr_hand_enumerated():
    yhat = np.array([[5.0, 4.0, 6.0]])
    assert aqcr(yhat, Q3) == pytest.approx(1 / 3)


def test_aqcr_monotone_zero():
    yhat = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    assert aqcr(yhat, Q3) == 0.0


def test_aqcr_fully_crossed():
    yhat = np.array([[3.0, 2.0, 1.0]])
    assert aqcr(yhat, Q3) == 1.0


def test_aqcr_needs_two_levels():
    with pytest.raises(ValueError):
        aqcr(np.ones((3, 1)), (0.5,))


def test_pointwise_hand_example():
    y = np.array([0.0, 2.0])
    yhat = np.array([1.0, 1.0])
    assert rmse(y, yhat) == 1.0
    assert mae(y, yhat) == 1.0
    assert r2(y, yhat) == 0.0


def test_pointwise_perfect_and_mean():
    y = np.array([1.0, 2.0, 4.0])
    assert rmse(y, y) == 0.0 and mae(y, y) == 0.0 and r2(y, y) == 1.0
    assert r2(y, np.full(3, y.mean())) == 0.0


def test_r2_constant_target_errors():
    with pytest.raises(ValueError):
        r2(np.ones(5), np.zeros(5))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)),
                min_size=1, max_size=50))
def test_rmse_geq_mae(pairs):
    y = np.array([p[0] for p in pairs])
    yhat = np.array([p[1] for p in pairs])
    assert rmse(y, yhat) >= mae(y, yhat) - 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-50, 50))
def test_shift_and_permutation_invariance(seed, c):
    rng = np.random.default_rng(seed)
    n = 40
    y = rng.normal(size=n) * 10
    yhat = rng.normal(size=(n, 3)) * 10
    yhat.sort(axis=1)  # occasional crossings remain from ties; fine
    base_aql = aql(y, yhat, Q3)
    base_aqcr = aqcr(yhat, Q3)
    perm = rng.permutation(n)
    assert aql(y[perm], yhat[perm], Q3) == pytest.approx(base_aql, rel=1e-12)
    assert aqcr(yhat[perm], Q3) == base_aqcr
    assert aql(y + c, yhat + c, Q3) == pytest.approx(base_aql, rel=1e-9, abs=1e-9)
    assert rmse(y + c, yhat[:, 1] + c) == pytest.approx(rmse(y, yhat[:, 1]), rel=1e-9)
    assert mae(y + c, yhat[:, 1] + c) == pytest.approx(mae(y, yhat[:, 1]), rel=1e-9)
    assert r2(y + c, yhat[:, 1] + c) == pytest.approx(r2(y, yhat[:, 1]), rel=1e-6)


def test_evaluate_report_fields():
    rng = np.random.default_rng(1)
    y = rng.normal(size=30)
    yhat = np.sort(rng.normal(size=(30, 3)), axis=1)
    rep = evaluate(y, yhat, Q3)
    assert isinstance(rep, MetricReport)
    assert rep.n_samples == 30
    assert rep.aql >= 0 and 0 <= rep.aqcr <= 1
    assert rep.rmse >= rep.mae >= 0
    assert rep.r2 <= 1
    assert rep.quantiles == Q3
    assert rep.to_dict()["n_samples"] == 30


def test_evaluate_requires_median_head():
    with pytest.raises(ValueError):
        evaluate(np.ones(3), np.ones((3, 2)), (0.1, 0.9))


def test_format_mean_std():
    assert format_mean_std(3.304, 0.012) == "3.30±0.01"
    assert format_mean_std(0.0123, 0.0007, as_percent=True) == "1.23±0.07"


def test_summarize_runs():
    reports = [MetricReport(1.0, 0.1, 2.0, 1.5, 0.8, 10, Q3),
               MetricReport(3.0, 0.3, 4.0, 2.5, 0.6, 10, Q3)]
    s = summarize_runs(reports)
    assert s["aql"]["mean"] == 2.0
    assert s["aql"]["std"] == 1.0
    with pytest.raises(ValueError):
        summarize_runs([])
