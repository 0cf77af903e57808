import math
from datetime import datetime, timezone

import pytest

from backend.database import database
from backend.database.models import CheckResult, VerificationRun, utc_now
from utils.verification import CheckOutcome


def outcomes(*passed):
    return [CheckOutcome(i + 1, "specfun", f"criterion {i + 1}", 1e-12, 1e-10, ok)
            for i, ok in enumerate(passed)]


def test_connection(ledger):
    assert ledger.test_connection()


def test_record_passed_run(ledger):
    run_id = database.record_verification("specfun", outcomes(True, True), {'tol': None},
                                          datetime.now(timezone.utc))
    with ledger.get_session() as session:
        run = session.get(VerificationRun, run_id)
        assert run.status == "passed"
        assert (run.checks_passed, run.checks_failed) == (2, 0)
        assert [c.criterion for c in run.checks] == [1, 2]
        assert run.parameters == {'tol': None}
        assert run.end_time >= run.start_time


def test_record_failed_and_errored_runs(ledger):
    failed = ledger.record_verification("specfun", outcomes(True, False), {}, datetime.now(timezone.utc))
    broken = [CheckOutcome(3, "kernels", "kernel masses", math.nan, math.nan, False, error="no convergence")]
    errored = ledger.record_verification("kernels", broken, {}, datetime.now(timezone.utc))
    aborted = ledger.record_verification("all", [], {}, datetime.now(timezone.utc), error="interrupted")
    with ledger.get_session() as session:
        assert session.get(VerificationRun, failed).status == "failed"
        run = session.get(VerificationRun, errored)
        assert run.status == "error"
        assert "no convergence" in run.error_log
        assert session.get(VerificationRun, aborted).error_log == "interrupted"
        assert session.query(CheckResult).count() == 3


def test_no_ledger_is_a_no_op(no_ledger):
    assert database.record_verification("specfun", outcomes(True), {}, datetime.now(timezone.utc)) is None


def test_manager_needs_a_url(no_ledger):
    with pytest.raises(ValueError):
        database.DatabaseManager()


def test_ledger_url_precedence(monkeypatch):
    monkeypatch.setenv('DATABASE_URL', 'sqlite:///b.db')
    monkeypatch.setenv('FRACRES_LEDGER_URL', 'sqlite:///a.db')
    assert database.ledger_url() == 'sqlite:///a.db'
    monkeypatch.delenv('FRACRES_LEDGER_URL')
    assert database.ledger_url() == 'sqlite:///b.db'


def test_run_timestamps_are_utc(ledger):
    assert utc_now().tzinfo is timezone.utc
    run_id = ledger.record_verification("specfun", outcomes(True), {}, datetime.now(timezone.utc))
    with ledger.get_session() as session:
        run = session.get(VerificationRun, run_id)
        assert run.end_time.replace(tzinfo=None) >= run.start_time.replace(tzinfo=None)
