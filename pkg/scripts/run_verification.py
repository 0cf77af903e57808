#!/usr/bin/env python3
"""
Scheduled verification runner.
Runs one or more suites, records each run in the ledger and prints a summary.
"""

import os
import sys
import logging
import argparse
from datetime import datetime, timezone

# Add project root to path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.append(project_root)

from dotenv import load_dotenv

from backend.database.database import init_database, ledger_url
from backend.database.models import VerificationRun
from utils.quadrature import QuadratureConfig
from utils.verification import SUITES, run_suite

load_dotenv()

# Configure logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

class VerificationRunner:
    """Runs verification suites and keeps the ledger up to date."""

    def __init__(self, database_url=None):
        self.manager = None
        url = database_url or ledger_url()
        if url is None:
            logger.warning("No ledger configured; results are only printed")
            return
        self.manager = init_database(url)

    def run(self, suites, tol=None):
        """Run the suites in order and return the ids of the recorded runs."""
        cfg = QuadratureConfig.from_env()
        summary = []
        for suite in suites:
            started = datetime.now(timezone.utc)
            logger.info(f"Starting suite {suite}")
            try:
                outcomes = run_suite(suite, cfg, tol)
                error = None
            except Exception as e:
                logger.error(f"Suite {suite} aborted: {e}")
                outcomes, error = [], str(e)
            run_id = None
            if self.manager is not None:
                run_id = self.manager.record_verification(
                    suite, outcomes, {'tol': tol, 'rel_tol': cfg.rel_tol}, started, error)
            failed = [o.criterion for o in outcomes if not o.passed]
            summary.append({'suite': suite, 'run_id': run_id, 'failed': failed, 'error': error})
        return summary

    def show_history(self, limit=10):
        """Print the most recent ledger runs."""
        if self.manager is None:
            print("No ledger configured")
            return
        with self.manager.get_session() as session:
            runs = (session.query(VerificationRun)
                    .order_by(VerificationRun.start_time.desc())
                    .limit(limit).all())
            print("\nRECENT VERIFICATION RUNS:")
            for r in runs:
                print(f"  #{r.id} {r.start_time:%Y-%m-%d %H:%M} {r.suite:<14} {r.status:<7} "
                      f"{r.checks_passed} passed, {r.checks_failed} failed")

def main():
    parser = argparse.ArgumentParser(description="Run verification suites and record them in the ledger")
    parser.add_argument('--suite', nargs='+', choices=SUITES, default=['all'], help='Suites to run (default: all)')
    parser.add_argument('--tol', type=float, help='Residual bound override')
    parser.add_argument('--ledger', help='Ledger URL (default: FRACRES_LEDGER_URL or DATABASE_URL)')
    parser.add_argument('--show-history', action='store_true', help='Show recent ledger runs only')

    args = parser.parse_args()

    try:
        runner = VerificationRunner(args.ledger)

        if args.show_history:
            runner.show_history()
            return 0

        summary = runner.run(args.suite, args.tol)
        status = 0
        for row in summary:
            if row['error']:
                print(f"{row['suite']}: error: {row['error']}")
                status = 3
            elif row['failed']:
                print(f"{row['suite']}: failed criteria {row['failed']}")
                status = 3
            else:
                print(f"{row['suite']}: all criteria passed")
        if runner.manager is not None:
            runner.show_history(len(summary))
    except Exception as e:
        logger.error(f"Verification run failed: {e}")
        print(f"Error: {e}")
        return 4

    return status

if __name__ == "__main__":
    exit(main())
