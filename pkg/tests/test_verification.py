import math

import pytest

import utils.verification as verification
from utils.errors import ParameterError, QuadratureError
from utils.verification import (
    CRITERIA, Criterion, _worst, _wright_series_mp, criteria_for, evaluate, run_suite,
)


def test_every_criterion_belongs_to_a_suite():
    assert [c.number for c in CRITERIA] == list(range(1, 12))
    assert [c.number for c in criteria_for("kernels")] == [3, 4]
    assert [c.number for c in criteria_for("subordination")] == [5, 6, 7, 11]
    assert len(criteria_for("all")) == 11
    with pytest.raises(ParameterError):
        criteria_for("everything")


def test_worst_subcheck_by_ratio():
    checks = [("a", 1e-9, 1e-8), ("b", 5e-6, 1e-5), ("c", 1e-12, 1e-10)]
    assert _worst(checks, None, True) == ("b", 5e-6, 1e-5, True)
    label, value, threshold, passed = _worst(checks, 1e-6, True)
    assert (label, threshold, passed) == ("b", 1e-6, False)
    assert _worst(checks, 1e-6, False)[3]


def test_non_finite_value_fails():
    label, _, _, passed = _worst([("ok", 0.0, 1.0), ("nan", math.nan, 1.0)], None, True)
    assert label == "nan" and not passed


def test_raising_criterion_becomes_failed_row(cfg):
    def broken(cfg):
        raise QuadratureError("did not converge")

    outcome = evaluate(Criterion(99, "kernels", "broken", broken), cfg)
    assert not outcome.passed
    assert math.isnan(outcome.value)
    assert "did not converge" in outcome.error


def test_reference_wright_series():
    for z in (0.0, 1.0, 3.0):
        assert _wright_series_mp(0.5, z) == pytest.approx(math.exp(-z * z / 4.0) / math.sqrt(math.pi),
                                                          rel=1e-13)


def test_angle_planner_criterion(cfg):
    outcome = evaluate(CRITERIA[10], cfg)
    assert outcome.criterion == 11 and outcome.passed
    assert outcome.as_row()['suite'] == "subordination"


@pytest.mark.slow
def test_specfun_suite(cfg):
    outcomes = run_suite("specfun", cfg)
    assert [o.criterion for o in outcomes] == [1, 2]
    assert all(o.passed for o in outcomes)


@pytest.mark.slow
def test_stochastic_suite_ignores_tolerance_override(cfg):
    (outcome,) = run_suite("stochastic", cfg, tol=1e-30)
    assert outcome.threshold in (3.0, 0.01)


def test_angle_planner_criterion_catches_wrong_angles(cfg, monkeypatch):
    monkeypatch.setattr(verification, "analyticity_angle", lambda alpha, theta: math.pi / 2.0)
    outcome = evaluate(CRITERIA[10], cfg)
    assert not outcome.passed
    assert outcome.description == "angle planner"
