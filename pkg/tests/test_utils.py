"""
Tests for utility modules and functions.
"""

import logging
from pathlib import Path

import pytest

from qcsam.errors import ConfigError, DataError, IdxFormatError, SampleDegenerateError
from utils.base_command import (
    EXIT_CONFIG,
    EXIT_DATA,
    CommandRequest,
    exit_code_for,
)
from utils.config import ExperimentConfig
from utils.decorators import monitor_performance
from utils.helpers import (
    format_mean_std,
    get_database_url,
    get_default_workers,
    mean_std,
    resolve_data_paths,
    summarize_seeds,
    write_metrics_csv,
)
from utils.logger import RunLogger, logger


class TestLogger:
    """Test the key=value log format."""

    def test_format_message(self):
        message = RunLogger()._format_message(
            "Epoch 3 finished", seed=2, rows=12000, loss=0.12345, ok=True, skip=None
        )
        assert message == "Epoch 3 finished | seed=2 | rows=12,000 | loss=0.123 | ok=True"

    def test_set_level(self):
        run_logger = RunLogger("qcsam.test_level")
        run_logger.set_level("warning")
        assert run_logger.logger.level == logging.WARNING
        run_logger.set_level("DEBUG")
        assert run_logger.logger.level == logging.DEBUG

    def test_check_result_levels(self, mocker):
        error = mocker.patch.object(logger, "error")
        info = mocker.patch.object(logger, "info")
        logger.check_result("hadamard_oracle", False, max_error=0.5)
        logger.check_result("prep_transpose", True)
        error.assert_called_once_with("Check failed: hadamard_oracle", max_error=0.5)
        info.assert_called_once_with("Check passed: prep_transpose")


class TestHelpers:
    """Test helper functions."""

    def test_mean_std(self):
        mean, std = mean_std([0.98, 1.0])
        assert mean == pytest.approx(0.99)
        assert std == pytest.approx(0.0141421356)

    def test_single_seed_has_zero_std(self):
        assert mean_std([0.5]) == (0.5, 0.0)

    def test_mean_std_empty(self):
        with pytest.raises(ValueError):
            mean_std([])

    def test_format_mean_std(self):
        assert format_mean_std([0.9984, 0.9984]) == "99.84±0.00"

    def test_summarize_seeds_orders_by_seed(self):
        summary = summarize_seeds({2: 1.0, 0: 0.5})
        assert list(summary["final_test_acc"]) == ["0", "2"]
        assert summary["mean_test_acc"] == pytest.approx(0.75)
        assert summary["test_acc_pct"].startswith("75.00±")

    def test_metrics_csv_is_deterministic(self, tmp_path):
        rows = [
            {"seed": 0, "epoch": 0, "train_loss": 0.69314718, "train_acc": 0.5, "test_acc": 0.5},
            {"seed": 0, "epoch": 1, "train_loss": 0.4, "train_acc": 0.75, "test_acc": 2 / 3},
        ]
        write_metrics_csv(tmp_path / "a.csv", rows)
        write_metrics_csv(tmp_path / "b.csv", rows)
        data = (tmp_path / "a.csv").read_bytes()
        assert data == (tmp_path / "b.csv").read_bytes()
        assert data.decode().splitlines() == [
            "seed,epoch,train_loss,train_acc,test_acc",
            "0,0,0.693147,0.500000,0.500000",
            "0,1,0.400000,0.750000,0.666667",
        ]

    def test_resolve_data_paths_from_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("QCSAM_DATA_DIR", str(tmp_path))
        explicit = str(tmp_path / "my-labels")
        paths = resolve_data_paths(ExperimentConfig(dataset="fashion", test_labels=explicit))
        assert paths["train_images"] == tmp_path / "fashion" / "train-images-idx3-ubyte"
        assert paths["test_labels"] == Path(explicit)

    def test_database_url(self, monkeypatch):
        monkeypatch.delenv("QCSAM_DATABASE_URL", raising=False)
        assert get_database_url() is None
        monkeypatch.setenv("QCSAM_DATABASE_URL", "sqlite+aiosqlite:///runs.db")
        assert get_database_url() == "sqlite+aiosqlite:///runs.db"
        assert get_database_url("sqlite+aiosqlite:///other.db") == "sqlite+aiosqlite:///other.db"

    @pytest.mark.parametrize("value, expected", [("4", 4), ("0", None), ("many", None), ("", None)])
    def test_default_workers(self, monkeypatch, value, expected):
        monkeypatch.setenv("QCSAM_WORKERS", value)
        assert get_default_workers() == expected


class TestDecorators:
    """Test utility decorators."""

    def test_monitor_performance_sync(self, mocker):
        info = mocker.patch.object(logger, "info")

        @monitor_performance("pca_fit")
        def fit(x):
            return x * 2

        assert fit(3) == 6
        assert info.call_args.args[0] == "pca_fit completed successfully"

    @pytest.mark.asyncio
    async def test_monitor_performance_async(self, mocker):
        info = mocker.patch.object(logger, "info")

        @monitor_performance()
        async def train_epoch():
            return "done"

        assert await train_epoch() == "done"
        assert info.call_args.kwargs["operation"] == "train_epoch"

    def test_monitor_performance_failure(self, mocker):
        error = mocker.patch.object(logger, "error")

        @monitor_performance("broken")
        def broken():
            raise RuntimeError("nope")

        with pytest.raises(RuntimeError):
            broken()
        assert error.call_args.kwargs["error"] == "nope"


class TestBaseCommand:
    """Test request resolution and exit code mapping."""

    @pytest.mark.parametrize(
        "error, expected",
        [
            (ConfigError("bad", field="epochs"), EXIT_CONFIG),
            (DataError("too few samples"), EXIT_DATA),
            (IdxFormatError("bad magic", offset=0), EXIT_DATA),
            (SampleDegenerateError("cancel"), EXIT_DATA),
            (FileNotFoundError("gone"), EXIT_DATA),
            (RuntimeError("bug"), None),
        ],
    )
    def test_exit_code_for(self, error, expected):
        assert exit_code_for(error) == expected

    def test_request_defaults(self):
        assert CommandRequest().resolve() == ExperimentConfig()

    def test_request_file_then_overrides(self, tmp_path):
        path = tmp_path / "config.json"
        ExperimentConfig(epochs=4, n_qubits=6).save(path)
        config = CommandRequest(config_path=str(path), overrides={"epochs": 2}).resolve()
        assert (config.epochs, config.n_qubits) == (2, 6)

    def test_request_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            CommandRequest(config_path=str(tmp_path / "nope.json")).resolve()
