from sqlalchemy import Column, Integer, String, Text, DateTime, Float, Boolean, ForeignKey, JSON
from sqlalchemy.orm import declarative_base, relationship
from datetime import datetime, timezone

Base = declarative_base()


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


class VerificationRun(Base):
    """Model for tracking verification suite runs."""
    __tablename__ = 'verification_runs'

    id = Column(Integer, primary_key=True)
    suite = Column(String(50), nullable=False)  # specfun, kernels, subordination, cauchy, stochastic, all
    start_time = Column(DateTime(timezone=True), default=utc_now)
    end_time = Column(DateTime(timezone=True))
    status = Column(String(20), default='running')  # running, passed, failed, error
    checks_passed = Column(Integer, default=0)
    checks_failed = Column(Integer, default=0)
    parameters = Column(JSON)  # tolerance overrides, thread cap, seed
    error_log = Column(Text)

    # Relationships
    checks = relationship("CheckResult", back_populates="run", order_by="CheckResult.criterion")

class CheckResult(Base):
    """Model for one acceptance-criterion row of a run."""
    __tablename__ = 'check_results'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('verification_runs.id'), nullable=False)
    criterion = Column(Integer, nullable=False)
    description = Column(Text)
    value = Column(Float)  # NaN when the criterion raised
    threshold = Column(Float)
    passed = Column(Boolean, nullable=False)

    # Relationships
    run = relationship("VerificationRun", back_populates="checks")
