"""SQLAlchemy Base and the recorded experiment runs."""

import uuid
from datetime import datetime, timezone
from typing import Optional

from sqlalchemy import DateTime, Float, String, Text
from sqlalchemy.dialects.postgresql import UUID
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column


class Base(DeclarativeBase):
    id: Mapped[uuid.UUID] = mapped_column(
        UUID(as_uuid=True), primary_key=True, index=True, default=uuid.uuid4
    )
    created_at: Mapped[datetime] = mapped_column(
        DateTime(timezone=True), default=lambda: datetime.now(timezone.utc)
    )
    updated_at: Mapped[datetime] = mapped_column(
        DateTime(timezone=True), default=lambda: datetime.now(timezone.utc)
    )


# MODELS

class ExperimentRun(Base):
    __tablename__ = "experiment_run"

    config_digest: Mapped[str] = mapped_column(String(64), index=True, nullable=False)
    tool_version: Mapped[str] = mapped_column(nullable=False)
    # u64 seeds overflow signed BIGINT
    master_seed: Mapped[str] = mapped_column(String(20), nullable=False)
    functional_id: Mapped[str] = mapped_column(nullable=False)
    family_kind: Mapped[str] = mapped_column(nullable=False)
    n: Mapped[int] = mapped_column(nullable=False)
    m: Mapped[int] = mapped_column(nullable=False)
    output_dir: Mapped[str] = mapped_column(nullable=False)
    duration_seconds: Mapped[float] = mapped_column(Float, nullable=False)
    predicted_mean: Mapped[float] = mapped_column(Float, nullable=False)
    predicted_variance: Mapped[float] = mapped_column(Float, nullable=False)
    empirical_mean: Mapped[float] = mapped_column(Float, nullable=False)
    empirical_variance: Mapped[float] = mapped_column(Float, nullable=False)
    ks_statistic: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    ks_pvalue: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    degenerate: Mapped[bool] = mapped_column(default=False, nullable=False)
    report_json: Mapped[str] = mapped_column(Text, nullable=False)
