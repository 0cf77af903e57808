import os
from datetime import datetime
from typing import Dict, Iterable, Optional
from sqlalchemy import create_engine, text
from sqlalchemy.orm import sessionmaker, Session
from sqlalchemy.pool import StaticPool
from contextlib import contextmanager
import logging
from .models import Base, CheckResult, VerificationRun, utc_now

logger = logging.getLogger(__name__)

def ledger_url() -> Optional[str]:
    """Ledger URL from FRACRES_LEDGER_URL, then DATABASE_URL; None means no ledger."""
    url = os.getenv('FRACRES_LEDGER_URL') or os.getenv('DATABASE_URL')
    return url or None

class DatabaseManager:
    """Manages the verification ledger connection."""

    def __init__(self, database_url: str = None):
        """
        Initialize database manager.

        Args:
            database_url: Database connection URL. If None, uses the ledger environment variables.
        """
        if database_url is None:
            database_url = ledger_url()
        if database_url is None:
            raise ValueError("no ledger configured: set FRACRES_LEDGER_URL or DATABASE_URL")

        self.database_url = database_url
        self.engine = None
        self.SessionLocal = None
        self._setup_database()

    def _setup_database(self):
        """Set up database engine and session factory."""
        try:
            if self.database_url.startswith('sqlite'):
                # one shared connection so verification threads see the same in-memory ledger
                self.engine = create_engine(
                    self.database_url,
                    connect_args={"check_same_thread": False},
                    poolclass=StaticPool,
                    echo=False
                )
            else:
                self.engine = create_engine(
                    self.database_url,
                    pool_size=5,
                    max_overflow=0,
                    echo=False
                )

            self.SessionLocal = sessionmaker(
                autocommit=False,
                autoflush=False,
                expire_on_commit=False,
                bind=self.engine
            )

            logger.info(f"Ledger configured with URL: {self.engine.url.render_as_string(hide_password=True)}")

        except Exception as e:
            logger.error(f"Failed to setup ledger: {e}")
            raise

    def create_tables(self):
        """Create the ledger tables."""
        try:
            Base.metadata.create_all(bind=self.engine)
            logger.info("Ledger tables created successfully")
        except Exception as e:
            logger.error(f"Failed to create tables: {e}")
            raise

    @contextmanager
    def get_session(self) -> Session:
        """
        Get a database session with automatic cleanup.

        Yields:
            Session: SQLAlchemy session
        """
        session = self.SessionLocal()
        try:
            yield session
            session.commit()
        except Exception as e:
            session.rollback()
            logger.error(f"Ledger session error: {e}")
            raise
        finally:
            session.close()

    def test_connection(self) -> bool:
        """
        Test database connection.

        Returns:
            bool: True if connection successful, False otherwise
        """
        try:
            with self.get_session() as session:
                session.execute(text("SELECT 1"))
            logger.info("Ledger connection test successful")
            return True
        except Exception as e:
            logger.error(f"Ledger connection test failed: {e}")
            return False

    def record_verification(self, suite: str, outcomes: Iterable, parameters: Dict,
                            started: datetime, error: Optional[str] = None) -> int:
        """
        Store one verification run with its criterion rows.

        Args:
            outcomes: CheckOutcome rows in criterion order
            parameters: settings the run used (stored as JSON)
            started: wall-clock start of the run
            error: message when the run aborted

        Returns:
            int: id of the stored run
        """
        outcomes = list(outcomes)
        passed = sum(1 for o in outcomes if o.passed)
        failed = len(outcomes) - passed
        if error is not None or any(o.error for o in outcomes):
            status = 'error'
        else:
            status = 'passed' if failed == 0 else 'failed'
        errors = [f"criterion {o.criterion}: {o.error}" for o in outcomes if o.error]
        if error is not None:
            errors.append(error)
        with self.get_session() as session:
            run = VerificationRun(
                suite=suite,
                start_time=started,
                end_time=utc_now(),
                status=status,
                checks_passed=passed,
                checks_failed=failed,
                parameters=parameters,
                error_log="\n".join(errors) or None,
            )
            session.add(run)
            for o in outcomes:
                run.checks.append(CheckResult(
                    criterion=o.criterion,
                    description=o.description,
                    value=o.value,
                    threshold=o.threshold,
                    passed=o.passed,
                ))
            session.flush()
            run_id = run.id
        logger.info(f"Recorded {suite} run {run_id}: {status} ({passed} passed, {failed} failed)")
        return run_id

# Global database manager instance
db_manager = None

def init_database(database_url: str = None, create_tables: bool = True) -> DatabaseManager:
    """
    Initialize the ledger with optional table creation.

    Args:
        database_url: Database connection URL
        create_tables: Whether to create tables
    """
    global db_manager
    db_manager = DatabaseManager(database_url)

    if create_tables:
        db_manager.create_tables()

    # Test connection
    if not db_manager.test_connection():
        raise ConnectionError("Failed to connect to the verification ledger")

    logger.info("Ledger initialized successfully")
    return db_manager

def record_verification(suite: str, outcomes: Iterable, parameters: Dict, started: datetime,
                        error: Optional[str] = None) -> Optional[int]:
    """
    Record a run in the configured ledger; a no-op returning None when no ledger is set.
    """
    if db_manager is None and ledger_url() is None:
        logger.debug("No ledger configured; verification run not recorded")
        return None
    manager = db_manager or init_database()
    return manager.record_verification(suite, outcomes, parameters, started, error)

