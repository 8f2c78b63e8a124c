"""
Tests for the complex linear combination of unitaries and the weight block encoding.
"""

import numpy as np
import pytest

from qcsam.circuitlib import BoundCircuit, unitary
from qcsam.clcu import (
    ClcuCoefficients,
    block_encode_weights,
    block_encoding_circuit,
    build_prep,
    build_prep_transpose,
    clcu_apply_analytic,
    clcu_apply_circuit,
    clcu_circuit,
    encode_weights,
    linear_combination,
    select_gates,
    to_mag_phase,
)
from qcsam.errors import (
    DegenerateCoefficientsError,
    DestructiveCancellationError,
    ShapeError,
)
from qcsam.simcore import GateOp, Statevector, zero_state


def single(kind, angle=None):
    return BoundCircuit(1, (GateOp(kind, (0,), angle),))


class TestMagPhase:
    """Test polar decomposition."""

    def test_negative_real_has_phase_pi(self):
        assert to_mag_phase(-2.0).phase == pytest.approx(np.pi)

    def test_zero_has_zero_phase(self):
        mp = to_mag_phase(0j)
        assert mp.magnitude == 0 and mp.phase == 0

    def test_round_trip(self):
        assert to_mag_phase(1 - 1j).to_complex() == pytest.approx(1 - 1j)


class TestCoefficients:
    """Test coefficient padding and PREP amplitudes."""

    def test_padding_and_omega(self):
        """omega = sqrt(sum |alpha_j|), the norm of the PREP amplitudes sqrt|alpha_j|."""
        c = ClcuCoefficients.from_alphas([1.0, 1j, -2.0])
        assert c.n_ancilla == 2
        assert c.alphas.shape == (4,)
        assert c.omega == pytest.approx(2.0)
        np.testing.assert_allclose(np.linalg.norm(c.prep_amplitudes()), 1.0, atol=1e-12)

    def test_success_probability_uses_omega_squared(self):
        """(I, X, Z) on |0> sums to -|0> + i|1>, so p = (sqrt(2) / omega^2)^2 = 1/8."""
        c = ClcuCoefficients.from_alphas([1.0, 1j, -2.0])
        out, prob = clcu_apply_circuit(
            c, [BoundCircuit(1), single("X"), single("Z")], zero_state(1)
        )
        assert prob == pytest.approx((np.sqrt(2.0) / c.omega**2) ** 2)
        assert prob == pytest.approx(0.125)
        np.testing.assert_allclose(out.amps, [-1 / np.sqrt(2), 1j / np.sqrt(2)], atol=1e-12)

    def test_all_zero_rejected(self):
        with pytest.raises(DegenerateCoefficientsError):
            ClcuCoefficients.from_alphas([0.0, 0.0])

    def test_prep_state(self, rng):
        """PREP|0> carries sqrt|alpha| with half the phase."""
        alphas = rng.normal(size=4) + 1j * rng.normal(size=4)
        c = ClcuCoefficients.from_alphas(alphas)
        prepared = build_prep(c).run(zero_state(2)).amps
        expected = np.sqrt(np.abs(alphas)) * np.exp(0.5j * np.angle(alphas)) / c.omega
        np.testing.assert_allclose(prepared, expected, atol=1e-12)

    def test_prep_transpose_is_matrix_transpose(self, rng):
        c = ClcuCoefficients.from_alphas(rng.normal(size=3) + 1j * rng.normal(size=3))
        np.testing.assert_allclose(
            unitary(build_prep_transpose(c)), unitary(build_prep(c)).T, atol=1e-12
        )


class TestClcu:
    """Test circuit and analytic CLCU."""

    def test_x_plus_z_on_zero(self):
        """alphas (1, 1) over (X, Z) on |0> gives (|0> + |1>)/sqrt(2) with p = 1/2."""
        out, prob = clcu_apply_circuit(
            ClcuCoefficients.from_alphas([1.0, 1.0]), [single("X"), single("Z")], zero_state(1)
        )
        np.testing.assert_allclose(out.amps, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)
        assert prob == pytest.approx(0.5)

    def test_complex_coefficient_phase(self):
        """alphas (1, i) over (I, X) on |0> keeps the relative phase."""
        out, _ = clcu_apply_circuit(
            ClcuCoefficients.from_alphas([1.0, 1j]), [BoundCircuit(1), single("X")], zero_state(1)
        )
        np.testing.assert_allclose(out.amps, [1 / np.sqrt(2), 1j / np.sqrt(2)], atol=1e-12)

    def test_circuit_matches_analytic(self, rng):
        """Post-selected CLCU equals the normalized sum, with the success-probability law."""
        for n_terms in (2, 3, 4):
            alphas = rng.normal(size=n_terms) + 1j * rng.normal(size=n_terms)
            us = [
                BoundCircuit(
                    2,
                    (
                        GateOp("Ry", (0,), float(rng.uniform(-3, 3))),
                        GateOp("CNOT", (0, 1)),
                        GateOp("Rz", (1,), float(rng.uniform(-3, 3))),
                    ),
                )
                for _ in range(n_terms)
            ]
            raw = rng.normal(size=4) + 1j * rng.normal(size=4)
            psi = Statevector.from_amplitudes(raw, normalize=True)
            coeffs = ClcuCoefficients.from_alphas(alphas)
            out, prob = clcu_apply_circuit(coeffs, us, psi)
            images = [u.run(psi) for u in us]
            analytic = clcu_apply_analytic(alphas, images)
            np.testing.assert_allclose(out.amps, analytic.amps, atol=1e-10)
            _, omega_prime = linear_combination(alphas, np.stack([s.amps for s in images]))
            assert prob == pytest.approx((omega_prime / coeffs.omega**2) ** 2)

    @pytest.mark.parametrize("scale", [3.0, -0.5, 2j, 0.3 - 0.7j, 1e-3 * np.exp(2.1j)])
    def test_common_scale_leaves_state_unchanged(self, rng, scale):
        """alpha -> c * alpha changes the output by a global phase at most."""
        alphas = rng.normal(size=3) + 1j * rng.normal(size=3)
        us = [
            BoundCircuit(
                2,
                (
                    GateOp("Ry", (0,), float(rng.uniform(-3, 3))),
                    GateOp("CNOT", (0, 1)),
                    GateOp("Rx", (1,), float(rng.uniform(-3, 3))),
                ),
            )
            for _ in range(3)
        ]
        psi = Statevector.from_amplitudes(
            rng.normal(size=4) + 1j * rng.normal(size=4), normalize=True
        )
        images = [u.run(psi) for u in us]

        base = clcu_apply_analytic(alphas, images)
        scaled = clcu_apply_analytic(scale * alphas, images)
        assert abs(np.vdot(base.amps, scaled.amps)) == pytest.approx(1.0, abs=1e-10)

        base_c, _ = clcu_apply_circuit(ClcuCoefficients.from_alphas(alphas), us, psi)
        scaled_c, _ = clcu_apply_circuit(
            ClcuCoefficients.from_alphas(scale * alphas), us, psi
        )
        assert abs(np.vdot(base_c.amps, scaled_c.amps)) == pytest.approx(1.0, abs=1e-10)

    def test_single_term_keeps_phase(self):
        """One term needs no ancilla and only contributes its phase."""
        c = ClcuCoefficients.from_alphas([2j])
        assert c.n_ancilla == 0
        out, prob = clcu_apply_circuit(c, [single("X")], zero_state(1))
        np.testing.assert_allclose(out.amps, [0.0, 1j], atol=1e-12)
        assert prob == 1.0

    def test_destructive_cancellation(self):
        """alphas (1, -1) over (I, I) cancels."""
        with pytest.raises(DestructiveCancellationError):
            clcu_apply_circuit(
                ClcuCoefficients.from_alphas([1.0, -1.0]),
                [BoundCircuit(1), BoundCircuit(1)],
                zero_state(1),
            )
        with pytest.raises(DestructiveCancellationError):
            clcu_apply_analytic([1.0, -1.0], [zero_state(1), zero_state(1)])

    def test_circuit_is_prep_select_prep_transpose(self):
        """The whole circuit equals PREP^T . SELECT . PREP on the joint register."""
        c = ClcuCoefficients.from_alphas([1.0, -0.5j, 0.25])
        us = [single("X"), single("Ry", 0.4), BoundCircuit(1)]
        circ = clcu_circuit(c, us)
        assert circ.n_qubits == 3

        prep = BoundCircuit(3, build_prep(c).embed(3, 0))
        select = BoundCircuit(3, select_gates(us, 2, 1))
        prep_t = BoundCircuit(3, build_prep_transpose(c).embed(3, 0))
        np.testing.assert_allclose(
            unitary(circ), unitary(prep_t) @ unitary(select) @ unitary(prep), atol=1e-12
        )

    def test_mismatched_inputs(self):
        c = ClcuCoefficients.from_alphas([1.0, 1.0])
        with pytest.raises(ShapeError):
            clcu_circuit(c, [single("X")])
        with pytest.raises(ShapeError):
            clcu_circuit(c, [single("X"), BoundCircuit(2)])
        with pytest.raises(ShapeError):
            clcu_apply_circuit(c, [single("X"), single("Z")], zero_state(2))


class TestBlockEncoding:
    """Test diagonal weight block encoding."""

    def test_encoded_amplitudes_equal_normalized_weights(self, rng):
        for m in (1, 2, 3):
            weights = rng.normal(size=2**m) + 1j * rng.normal(size=2**m)
            state, _ = block_encode_weights(weights)
            np.testing.assert_allclose(
                state.amps, weights / np.linalg.norm(weights), atol=1e-12
            )

    def test_prescale(self):
        enc, scale = encode_weights([0.5, -0.25j])
        assert scale == pytest.approx(0.5)
        np.testing.assert_allclose(enc.thetas, [0.0, np.arccos(0.5)])
        np.testing.assert_allclose(enc.phis, [0.0, -np.pi / 2])

    def test_flag_qubit_layout(self):
        enc, _ = encode_weights([1.0, 0.5, 1j, -1.0])
        circ = block_encoding_circuit(enc)
        assert circ.n_qubits == 3
        assert all(g.targets == (0,) for g in circ.gates if g.kind in ("Ry", "Rz"))

    def test_invalid_sizes(self):
        with pytest.raises(ShapeError):
            encode_weights([1.0, 2.0, 3.0])
        with pytest.raises(ShapeError):
            encode_weights([1.0])
        with pytest.raises(DegenerateCoefficientsError):
            encode_weights([0.0, 0.0])
