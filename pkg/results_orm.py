"""
Results store using SQLAlchemy ORM.
Keeps runs, per-epoch metrics and sweep cells in any async-capable database;
SQLite through aiosqlite is the default target.
"""

import asyncio
import json
import os
import time
from contextlib import asynccontextmanager
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional
from urllib.parse import urlparse

from sqlalchemy import (
    DateTime,
    Float,
    ForeignKey,
    Identity,
    Index,
    Integer,
    String,
    Text,
    select,
)
from sqlalchemy.ext.asyncio import AsyncSession, async_sessionmaker, create_async_engine
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column, relationship
from sqlalchemy.pool import NullPool, StaticPool

from utils.logger import logger


def _get_naive_utc_now():
    """Returns the current UTC datetime as a naive datetime object."""
    return datetime.now(timezone.utc).replace(tzinfo=None)


class Base(DeclarativeBase):
    """Base class for all database models."""

    def to_dict(self) -> Dict[str, Any]:
        """Converts the model instance to a dictionary."""
        return {c.name: getattr(self, c.name) for c in self.__table__.columns}


class Run(Base):
    """One (config, seed) training run."""

    __tablename__ = "runs"

    id: Mapped[int] = mapped_column(
        Integer, Identity(start=1, cycle=False), primary_key=True
    )
    config_name: Mapped[str] = mapped_column(String(100), nullable=False)
    config_json: Mapped[str] = mapped_column(Text, nullable=False)
    seed: Mapped[int] = mapped_column(Integer, nullable=False)
    final_test_acc: Mapped[Optional[float]] = mapped_column(Float)
    wall_time_seconds: Mapped[Optional[float]] = mapped_column(Float)
    created_at: Mapped[datetime] = mapped_column(DateTime, default=_get_naive_utc_now)

    epochs: Mapped[List["EpochMetric"]] = relationship(
        "EpochMetric", back_populates="run", order_by="EpochMetric.epoch"
    )

    __table_args__ = (Index("ix_runs_config_seed", "config_name", "seed"),)


class EpochMetric(Base):
    """Metrics of one epoch of a run."""

    __tablename__ = "epoch_metrics"

    id: Mapped[int] = mapped_column(
        Integer, Identity(start=1, cycle=False), primary_key=True
    )
    run_id: Mapped[int] = mapped_column(Integer, ForeignKey("runs.id"), nullable=False)
    epoch: Mapped[int] = mapped_column(Integer, nullable=False)
    train_loss: Mapped[float] = mapped_column(Float, nullable=False)
    train_acc: Mapped[float] = mapped_column(Float, nullable=False)
    test_acc: Mapped[float] = mapped_column(Float, nullable=False)
    wall_time_seconds: Mapped[float] = mapped_column(Float, default=0.0)

    run: Mapped["Run"] = relationship("Run", back_populates="epochs")

    __table_args__ = (Index("ix_epoch_metrics_run_epoch", "run_id", "epoch"),)


class SweepCell(Base):
    """One cell of a sweep or ablation table."""

    __tablename__ = "sweep_cells"

    id: Mapped[int] = mapped_column(
        Integer, Identity(start=1, cycle=False), primary_key=True
    )
    sweep_name: Mapped[str] = mapped_column(String(100), nullable=False)
    n_qubits: Mapped[int] = mapped_column(Integer, nullable=False)
    column_key: Mapped[str] = mapped_column(String(50), nullable=False)
    status: Mapped[str] = mapped_column(String(20), nullable=False)
    mean_acc: Mapped[Optional[float]] = mapped_column(Float)
    std_acc: Mapped[Optional[float]] = mapped_column(Float)
    error: Mapped[Optional[str]] = mapped_column(Text)
    created_at: Mapped[datetime] = mapped_column(DateTime, default=_get_naive_utc_now)

    __table_args__ = (Index("ix_sweep_cells_sweep", "sweep_name"),)


class ResultsStore:
    """Async results database."""

    def __init__(self, database_url=None, for_testing=False):
        self.database_url = database_url or os.getenv("QCSAM_DATABASE_URL")
        if not self.database_url:
            raise ValueError("QCSAM_DATABASE_URL environment variable is required")

        # Detect database type using URL scheme
        parsed_url = urlparse(self.database_url)
        self.is_sqlite = parsed_url.scheme.startswith("sqlite")

        engine_kwargs = {
            "echo": False,
            "future": True,
        }

        if for_testing and self.is_sqlite:
            engine_kwargs["poolclass"] = StaticPool
            engine_kwargs["connect_args"] = {"check_same_thread": False}
        else:
            engine_kwargs["poolclass"] = NullPool
            engine_kwargs["pool_pre_ping"] = True

        self.engine = create_async_engine(self.database_url, **engine_kwargs)
        self.session_factory = async_sessionmaker(
            self.engine, class_=AsyncSession, expire_on_commit=False
        )

        self.max_retries = 3
        self.retry_delay = 1.0

    @asynccontextmanager
    async def _get_session(self):
        """Context manager for sessions; retries only session creation failures."""
        last_error = None

        for attempt in range(self.max_retries):
            start_time = time.time()
            try:
                session = self.session_factory()
            except Exception as e:
                last_error = e
                logger.database_operation(
                    operation="session_failed",
                    table="session_pool",
                    success=False,
                    attempt=attempt + 1,
                    connection_time=f"{time.time() - start_time:.3f}s",
                    error=str(e),
                )
                if attempt < self.max_retries - 1:
                    await asyncio.sleep(self.retry_delay * (attempt + 1))
                    continue
                raise last_error

            try:
                yield session
                return
            finally:
                try:
                    await asyncio.wait_for(session.close(), timeout=5.0)
                except (asyncio.TimeoutError, Exception) as close_error:
                    logger.warning(f"Session close timeout/failure: {close_error}")

    @asynccontextmanager
    async def transaction(self):
        """Context manager for atomic database transactions."""
        async with self._get_session() as session:
            try:
                yield session
                await session.commit()
            except Exception as e:
                await session.rollback()
                logger.error(f"Transaction failed, rolling back: {e}")
                raise

    async def _log_operation(
        self,
        operation: str,
        table: str,
        start_time: float,
        success: bool = True,
        **kwargs,
    ):
        """Log database operation timing"""
        execution_time = time.time() - start_time
        logger.database_operation(
            operation=operation,
            table=table,
            success=success,
            execution_time=f"{execution_time:.3f}s",
            **kwargs,
        )
        return execution_time

    async def initialize(self):
        """Create all tables"""
        start_time = time.time()
        try:
            async with self.engine.begin() as conn:
                await conn.run_sync(Base.metadata.create_all)
            await self._log_operation("create_all", "database", start_time)
        except Exception as e:
            await self._log_operation(
                "create_all", "database", start_time, success=False, error=str(e)
            )
            raise

    async def close(self):
        await self.engine.dispose()

    async def record_run(
        self,
        config_name: str,
        config: Dict[str, Any],
        seed: int,
        final_test_acc: Optional[float] = None,
        wall_time_seconds: Optional[float] = None,
    ) -> int:
        """Insert a run row and return its id"""
        start_time = time.time()
        try:
            async with self.transaction() as session:
                run = Run(
                    config_name=config_name,
                    config_json=json.dumps(config, sort_keys=True),
                    seed=seed,
                    final_test_acc=final_test_acc,
                    wall_time_seconds=wall_time_seconds,
                )
                session.add(run)
                await session.flush()  # Use flush to get the ID before commit
                run_id = run.id

            await self._log_operation(
                "insert", "runs", start_time, config=config_name, seed=seed, run_id=run_id
            )
            return run_id
        except Exception as e:
            await self._log_operation(
                "insert", "runs", start_time, success=False, seed=seed, error=str(e)
            )
            raise e

    async def add_epoch_metrics(self, run_id: int, records: List[Dict[str, Any]]):
        """Append per-epoch rows (dicts with epoch/train_loss/train_acc/test_acc)"""
        start_time = time.time()
        try:
            async with self.transaction() as session:
                for record in records:
                    session.add(
                        EpochMetric(
                            run_id=run_id,
                            epoch=record["epoch"],
                            train_loss=record["train_loss"],
                            train_acc=record["train_acc"],
                            test_acc=record["test_acc"],
                            wall_time_seconds=record.get("wall_time_seconds", 0.0),
                        )
                    )
            await self._log_operation(
                "insert", "epoch_metrics", start_time, run_id=run_id, rows=len(records)
            )
        except Exception as e:
            await self._log_operation(
                "insert",
                "epoch_metrics",
                start_time,
                success=False,
                run_id=run_id,
                error=str(e),
            )
            raise e

    async def get_run_metrics(self, run_id: int) -> List[Dict[str, Any]]:
        """Epoch rows of a run, ordered by epoch"""
        start_time = time.time()
        async with self._get_session() as session:
            result = await session.execute(
                select(EpochMetric)
                .where(EpochMetric.run_id == run_id)
                .order_by(EpochMetric.epoch)
            )
            rows = [row.to_dict() for row in result.scalars().all()]
        await self._log_operation(
            "select", "epoch_metrics", start_time, run_id=run_id, rows=len(rows)
        )
        return rows

    async def get_runs(self, config_name: Optional[str] = None) -> List[Dict[str, Any]]:
        start_time = time.time()
        async with self._get_session() as session:
            query = select(Run).order_by(Run.id)
            if config_name is not None:
                query = query.where(Run.config_name == config_name)
            result = await session.execute(query)
            rows = [row.to_dict() for row in result.scalars().all()]
        await self._log_operation("select", "runs", start_time, rows=len(rows))
        return rows

    async def record_sweep_cell(
        self,
        sweep_name: str,
        n_qubits: int,
        column: str,
        status: str,
        mean_acc: Optional[float] = None,
        std_acc: Optional[float] = None,
        error: Optional[str] = None,
    ):
        start_time = time.time()
        try:
            async with self.transaction() as session:
                session.add(
                    SweepCell(
                        sweep_name=sweep_name,
                        n_qubits=n_qubits,
                        column_key=column,
                        status=status,
                        mean_acc=mean_acc,
                        std_acc=std_acc,
                        error=error,
                    )
                )
            await self._log_operation(
                "insert",
                "sweep_cells",
                start_time,
                sweep=sweep_name,
                n_qubits=n_qubits,
                column=column,
                status=status,
            )
        except Exception as e:
            await self._log_operation(
                "insert", "sweep_cells", start_time, success=False, error=str(e)
            )
            raise e

    async def get_sweep_cells(self, sweep_name: str) -> List[Dict[str, Any]]:
        start_time = time.time()
        async with self._get_session() as session:
            result = await session.execute(
                select(SweepCell)
                .where(SweepCell.sweep_name == sweep_name)
                .order_by(SweepCell.id)
            )
            rows = [row.to_dict() for row in result.scalars().all()]
        await self._log_operation(
            "select", "sweep_cells", start_time, sweep=sweep_name, rows=len(rows)
        )
        return rows
