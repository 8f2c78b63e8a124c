"""
Tests for the property/oracle check suite.
"""

import math

import pytest

from qcsam import verification
from qcsam.verification import CHECKS, DEFAULT_TRIALS, run_checks

FAST_TRIALS = {name: 2 for name in DEFAULT_TRIALS}


class TestRunChecks:
    """Test the check runner."""

    def test_checks_and_defaults_cover_the_same_names(self):
        assert set(CHECKS) == set(DEFAULT_TRIALS)
        assert len(CHECKS) == 7

    def test_small_suite_passes(self):
        report = run_checks(seed=0, trials=FAST_TRIALS)
        failed = [(c.name, c.max_error, c.detail) for c in report.checks if not c.passed]
        assert failed == []
        assert report.passed

    def test_only_filter(self):
        report = run_checks(seed=1, trials=FAST_TRIALS, only=["readout_sanity"])
        assert [c.name for c in report.checks] == ["readout_sanity"]

    def test_report_is_seed_deterministic(self):
        only = ["hadamard_oracle", "block_encoding_roundtrip"]
        a = run_checks(seed=5, trials=FAST_TRIALS, only=only)
        b = run_checks(seed=5, trials=FAST_TRIALS, only=only)
        assert [c.max_error for c in a.checks] == [c.max_error for c in b.checks]

    def test_exception_marks_check_failed(self, mocker):
        mocker.patch.dict(
            verification.CHECKS,
            {"readout_sanity": (mocker.Mock(side_effect=RuntimeError("boom")), 1e-9)},
        )
        report = run_checks(seed=0, trials=FAST_TRIALS, only=["readout_sanity"])
        check = report.checks[0]
        assert not check.passed
        assert math.isinf(check.max_error)
        assert "RuntimeError: boom" in check.detail

    def test_to_dict(self):
        report = run_checks(seed=0, trials=FAST_TRIALS, only=["prep_transpose"])
        data = report.to_dict()
        assert data["seed"] == 0
        assert data["passed"] is True
        assert data["checks"][0]["name"] == "prep_transpose"


class TestRandomCircuits:
    """Test the random instance generators."""

    def test_random_circuit_width(self, rng):
        circ = verification.random_circuit(3, 10, rng)
        assert circ.n_qubits == 3
        assert len(circ.gates) == 10

    def test_single_qubit_never_gets_two_qubit_gates(self, rng):
        circ = verification.random_circuit(1, 30, rng)
        assert all(len(g.qubits) == 1 for g in circ.gates)

    @pytest.mark.slow
    def test_circuit_path_real_overlap(self, rng):
        assert verification.check_circuit_path(3, rng, attention_mode="real_overlap") < 1e-6
