"""
Tests for parameterized circuits, the QFM/QFFN builders and state preparation.
"""

import numpy as np
import pytest

from qcsam.circuitlib import (
    DATA,
    PARAM,
    BoundCircuit,
    CircuitOp,
    ParamCircuit,
    QffnSpec,
    QfmSpec,
    Slot,
    bind_and_run,
    build_qffn,
    build_qfm,
    build_state_prep,
    concat,
    run_batch,
    unitary,
)
from qcsam.errors import BindingError, ConfigError, ShapeError
from qcsam.simcore import GateOp, zero_state


class TestQfm:
    """Test the quantum feature mapping."""

    def test_parameter_count_chain(self):
        """Chain topology: n - 1 ZZ plus n Ry parameters per layer."""
        qfm = build_qfm(QfmSpec(4, n_layers=2))
        assert qfm.n_params == 2 * (3 + 4)
        assert qfm.n_data == 4

    def test_ring_adds_closing_pair(self):
        assert QfmSpec(4, topology="ring").n_params == 4 + 4

    def test_gate_counts(self):
        """One layer on 3 qubits: two encoding layers, 2 ZZ, 3 Ry."""
        counts = build_qfm(QfmSpec(3)).gate_counts()
        assert counts == {"Rx": 6, "ZZ": 2, "Ry": 3}

    def test_single_qubit_zero_params_is_rx_squared(self):
        """n=1, x=pi, theta=0 gives Rx(pi)Rx(pi)|0> = -|0>."""
        state = bind_and_run(build_qfm(QfmSpec(1)), [np.pi], [0.0])
        np.testing.assert_allclose(state.amps, [-1.0, 0.0], atol=1e-12)

    def test_bind_length_checks(self):
        qfm = build_qfm(QfmSpec(2))
        with pytest.raises(BindingError):
            qfm.bind([0.1], np.zeros(qfm.n_params))
        with pytest.raises(BindingError):
            qfm.bind([0.1, 0.2], np.zeros(qfm.n_params + 1))

    def test_invalid_spec(self):
        with pytest.raises(ConfigError):
            QfmSpec(2, order="bad")
        with pytest.raises(ConfigError):
            QfmSpec(2, n_layers=0)

    def test_order_changes_state(self):
        """zz_ry and ry_zz orders give different circuits for generic angles."""
        params = np.array([0.4, 0.9, -0.3])
        a = bind_and_run(build_qfm(QfmSpec(2, order="zz_ry")), [0.5, 1.1], params)
        b = bind_and_run(build_qfm(QfmSpec(2, order="ry_zz")), [0.5, 1.1], params)
        assert not np.allclose(a.amps, b.amps)

    def test_dump_lists_slots(self):
        text = build_qfm(QfmSpec(2)).dump()
        assert "Rx 0 data[0]" in text
        assert "ZZ 0,1 param[0]" in text


class TestQffn:
    """Test the hardware-efficient feed-forward layer."""

    def test_parameter_count(self):
        assert build_qffn(QffnSpec(4, n_layers=2)).n_params == 24

    def test_ring_closure_only_from_three_qubits(self):
        assert build_qffn(QffnSpec(2)).gate_counts()["CNOT"] == 1
        assert build_qffn(QffnSpec(3)).gate_counts()["CNOT"] == 3

    def test_zero_params_two_qubits(self):
        """All-zero angles leave only the CNOT, which fixes |00>."""
        state = bind_and_run(build_qffn(QffnSpec(2)), [], np.zeros(6))
        np.testing.assert_allclose(state.amps, zero_state(2).amps, atol=1e-12)


class TestBatchAndBinding:
    """Test batched evaluation and slot validation."""

    def test_run_batch_matches_bind_and_run(self, rng):
        qfm = build_qfm(QfmSpec(3))
        params = rng.uniform(-1, 1, size=qfm.n_params)
        rows = rng.uniform(0, np.pi, size=(5, 3))
        batched = run_batch(qfm, rows, params)
        for b in range(5):
            single = bind_and_run(qfm, rows[b], params)
            np.testing.assert_allclose(batched[b], single.amps, atol=1e-12)

    def test_slot_on_fixed_gate_rejected(self):
        with pytest.raises(BindingError):
            ParamCircuit(1, (CircuitOp(GateOp("H", (0,)), Slot(PARAM, 0)),), n_params=1)

    def test_slot_index_out_of_family(self):
        with pytest.raises(BindingError):
            ParamCircuit(
                1, (CircuitOp(GateOp("Rx", (0,), 0.0), Slot(DATA, 1)),), n_params=0, n_data=1
            )


class TestBoundCircuit:
    """Test inverse, transpose and concatenation."""

    def test_inverse_is_conjugate_transpose(self, rng):
        qfm = build_qfm(QfmSpec(2))
        circ = qfm.bind([0.3, 1.2], rng.uniform(-1, 1, size=qfm.n_params))
        np.testing.assert_allclose(
            unitary(circ.inverse()), unitary(circ).conj().T, atol=1e-12
        )

    def test_transpose_with_y_and_controls(self):
        circ = BoundCircuit(
            2,
            (
                GateOp("H", (0,)),
                GateOp("Y", (1,), controls=(0,)),
                GateOp("Ry", (0,), 0.7, controls=(1,), control_values=(0,)),
                GateOp("S", (1,)),
                GateOp("Rz", (1,), -0.4),
            ),
        )
        np.testing.assert_allclose(unitary(circ.transpose()), unitary(circ).T, atol=1e-12)

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            BoundCircuit(1, (GateOp("CNOT", (0, 1)),))
        with pytest.raises(ShapeError):
            concat([BoundCircuit(1), BoundCircuit(2)])
        with pytest.raises(ShapeError):
            BoundCircuit(2).run(zero_state(1))


class TestStatePrep:
    """Test exact state preparation."""

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_prepares_amplitudes_exactly(self, n, rng):
        """U|0> equals the target, global phase included."""
        target = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        target /= np.linalg.norm(target)
        state = build_state_prep(target).run(zero_state(n))
        np.testing.assert_allclose(state.amps, target, atol=1e-12)

    def test_sparse_target(self):
        target = np.array([0, 0, -1j, 0], dtype=complex)
        state = build_state_prep(target).run(zero_state(2))
        np.testing.assert_allclose(state.amps, target, atol=1e-12)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ShapeError):
            build_state_prep([1.0, 0.0, 0.0])
        with pytest.raises(ShapeError):
            build_state_prep([0.0, 0.0])
