"""
Complex linear combination of unitaries.

Circuit path: PREP on an ancilla register, SELECT (U_j controlled on
ancilla basis state |j>), the gate-level transpose of PREP, post-selection of
the ancillas on |0...0>. Because PREP^T (not PREP^†) closes the sandwich, the
ancilla-zero block is sum_j alpha_j U_j / sum_j |alpha_j|, phases included.

Also hosts the diagonal weight block encoding and magnitude/phase helpers.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from qcsam.circuitlib import BoundCircuit, build_state_prep, concat
from qcsam.errors import (
    DegenerateCoefficientsError,
    DestructiveCancellationError,
    PostSelectionError,
    ShapeError,
)
from qcsam.simcore import (
    POSTSELECT_TOL,
    GateOp,
    Statevector,
    apply_gate_amps,
    post_select,
)

PHASE_EPS = 1e-15


@dataclass(frozen=True)
class MagPhase:
    magnitude: float
    phase: float

    def to_complex(self) -> complex:
        return self.magnitude * complex(math.cos(self.phase), math.sin(self.phase))


def to_mag_phase(c: complex) -> MagPhase:
    """Polar form with phase in (-pi, pi]; zero has phase 0."""
    c = complex(c)
    magnitude = abs(c)
    if magnitude < PHASE_EPS:
        return MagPhase(magnitude, 0.0)
    phase = math.atan2(c.imag, c.real)
    if phase <= -math.pi:
        phase += 2.0 * math.pi
    return MagPhase(magnitude, phase)


@dataclass(frozen=True, eq=False)
class ClcuCoefficients:
    """
    Coefficients padded with zeros to 2^n_ancilla entries. ``omega`` is the
    normalization of the prepared ancilla state sqrt(sum_j |alpha_j|), so the
    post-selected block carries the factor 1/omega^2.
    """

    alphas: np.ndarray
    omega: float
    n_ancilla: int
    n_terms: int

    @classmethod
    def from_alphas(cls, alphas: Sequence[complex]) -> "ClcuCoefficients":
        arr = np.asarray(alphas, dtype=complex).reshape(-1)
        if arr.shape[0] < 1:
            raise DegenerateCoefficientsError("CLCU needs at least one coefficient")
        total = float(np.sum(np.abs(arr)))
        if total == 0.0:
            raise DegenerateCoefficientsError("all CLCU coefficients are zero")
        n_terms = arr.shape[0]
        n_ancilla = math.ceil(math.log2(n_terms)) if n_terms > 1 else 0
        padded = np.zeros(2**n_ancilla, dtype=complex)
        padded[:n_terms] = arr
        padded.setflags(write=False)
        return cls(padded, math.sqrt(total), n_ancilla, n_terms)

    def prep_amplitudes(self) -> np.ndarray:
        """sqrt|alpha_j| e^{i theta_j / 2} / omega."""
        mags = np.sqrt(np.abs(self.alphas))
        phases = np.array([to_mag_phase(a).phase for a in self.alphas])
        return mags * np.exp(0.5j * phases) / self.omega


@dataclass(frozen=True, eq=False)
class WeightEncoding:
    """Rotation angles of the diagonal block encoding."""

    thetas: np.ndarray
    phis: np.ndarray
    n_work: int


def build_prep(c: ClcuCoefficients) -> BoundCircuit:
    """U_PREP|0> = sum_j sqrt|alpha_j| e^{i theta_j/2}|j> / omega."""
    if c.n_ancilla == 0:
        return BoundCircuit(0, ())
    return build_state_prep(c.prep_amplitudes())


def build_prep_transpose(c: ClcuCoefficients) -> BoundCircuit:
    """Gate-wise transpose of build_prep, in reverse order."""
    return build_prep(c).transpose()


def select_gates(
    us: Sequence[BoundCircuit], n_ancilla: int, n_work: int
) -> Tuple[GateOp, ...]:
    """Each U_j controlled on ancilla basis state |j>; padded terms are identities."""
    gates = []
    controls = tuple(range(n_ancilla))
    n_total = n_ancilla + n_work
    for j, u in enumerate(us):
        values = tuple((j >> (n_ancilla - 1 - a)) & 1 for a in controls)
        gates.extend(u.embed(n_total, n_ancilla, controls=controls, values=values))
    return tuple(gates)


def clcu_circuit(c: ClcuCoefficients, us: Sequence[BoundCircuit]) -> BoundCircuit:
    """PREP -> SELECT -> PREP^T on ancillas (qubits 0..m-1) plus working register."""
    if len(us) != c.n_terms:
        raise ShapeError(f"{c.n_terms} coefficients but {len(us)} unitaries")
    widths = {u.n_qubits for u in us}
    if len(widths) != 1:
        raise ShapeError(f"unitaries act on different widths {sorted(widths)}")
    n_work = widths.pop()
    if c.n_ancilla == 0:
        # a single term only contributes its phase
        phase = to_mag_phase(c.alphas[0]).phase
        gates = list(us[0].gates)
        if phase != 0.0:
            gates.append(GateOp("GPHASE", (), phase))
        return BoundCircuit(n_work, tuple(gates))
    n_total = c.n_ancilla + n_work
    return concat(
        [
            BoundCircuit(n_total, build_prep(c).embed(n_total, 0)),
            BoundCircuit(n_total, select_gates(us, c.n_ancilla, n_work)),
            BoundCircuit(n_total, build_prep_transpose(c).embed(n_total, 0)),
        ]
    )


def clcu_apply_circuit(
    c: ClcuCoefficients, us: Sequence[BoundCircuit], psi: Statevector
) -> Tuple[Statevector, float]:
    """Simulate the CLCU circuit and post-select the ancillas on |0...0>."""
    circuit = clcu_circuit(c, us)
    if circuit.n_qubits - c.n_ancilla != psi.n_qubits:
        raise ShapeError("input state width does not match the unitaries")
    if c.n_ancilla == 0:
        return circuit.run(psi), 1.0
    start = np.kron(np.eye(2**c.n_ancilla, 1, dtype=complex).reshape(-1), psi.amps)
    amps = start
    for g in circuit.gates:
        amps = apply_gate_amps(amps, circuit.n_qubits, g)
    full = Statevector(circuit.n_qubits, amps)
    try:
        return post_select(full, tuple(range(c.n_ancilla)), "0" * c.n_ancilla)
    except PostSelectionError as exc:
        raise DestructiveCancellationError(
            "CLCU output cancels to zero; ancilla post-selection failed"
        ) from exc


def linear_combination(
    alphas: Sequence[complex], amps: np.ndarray
) -> Tuple[np.ndarray, float]:
    """
    Normalized sum_j alpha_j amps[j] and its norm Omega'. ``amps`` has one
    state per row.
    """
    alphas = np.asarray(alphas, dtype=complex).reshape(-1)
    amps = np.asarray(amps, dtype=complex)
    if amps.ndim != 2 or amps.shape[0] != alphas.shape[0]:
        raise ShapeError(
            f"{alphas.shape[0]} coefficients for state block of shape {amps.shape}"
        )
    total = float(np.sum(np.abs(alphas)))
    if total == 0.0:
        raise DegenerateCoefficientsError("all combination coefficients are zero")
    combined = alphas @ amps
    norm = float(np.linalg.norm(combined))
    if (norm / total) ** 2 <= POSTSELECT_TOL:
        raise DestructiveCancellationError(
            f"linear combination cancels (norm {norm:.3e})"
        )
    return combined / norm, norm


def clcu_apply_analytic(
    alphas: Sequence[complex], states: Sequence[Statevector]
) -> Statevector:
    """(1/Omega') sum_j alpha_j |psi_j>."""
    if len(states) == 0:
        raise ShapeError("no states to combine")
    widths = {s.n_qubits for s in states}
    if len(widths) != 1:
        raise ShapeError(f"states have different widths {sorted(widths)}")
    combined, _ = linear_combination(alphas, np.stack([s.amps for s in states]))
    return Statevector(states[0].n_qubits, combined)


def encode_weights(weights: Sequence[complex]) -> Tuple[WeightEncoding, float]:
    """Angles for the block encoding plus the 1/max|w| prescale that was applied."""
    w = np.asarray(weights, dtype=complex).reshape(-1)
    size = w.shape[0]
    m = int(round(math.log2(size))) if size > 0 else -1
    if m < 1 or 2**m != size:
        raise ShapeError(f"block encoding needs 2^m >= 2 weights, got {size}")
    scale = float(np.max(np.abs(w)))
    if scale == 0.0:
        raise DegenerateCoefficientsError("all attention weights are zero")
    scaled = w / scale
    mags = np.clip(np.abs(scaled), 0.0, 1.0)
    thetas = np.arccos(mags)
    phis = np.array([to_mag_phase(v).phase for v in scaled])
    return WeightEncoding(thetas, phis, m), scale


def block_encoding_circuit(enc: WeightEncoding) -> BoundCircuit:
    """
    Flag qubit 0 above an m-qubit working register: H on the work qubits, then
    per basis index j a C^m-Ry(2 theta_j) and C^m-Rz(-2 phi_j) on the flag.
    The flag-|0> block then holds cos(theta_j) e^{+i phi_j}.
    """
    m = enc.n_work
    work = tuple(range(1, m + 1))
    gates = [GateOp("H", (q,)) for q in work]
    for j in range(2**m):
        values = tuple((j >> (m - 1 - k)) & 1 for k in range(m))
        if enc.thetas[j] != 0.0:
            gates.append(GateOp("Ry", (0,), 2.0 * float(enc.thetas[j]), work, values))
        if enc.phis[j] != 0.0:
            gates.append(GateOp("Rz", (0,), -2.0 * float(enc.phis[j]), work, values))
    return BoundCircuit(m + 1, tuple(gates))


def block_encode_weights(weights: Sequence[complex]) -> Tuple[Statevector, float]:
    """Post-selected working-register state with amplitudes proportional to the weights."""
    enc, _ = encode_weights(weights)
    circuit = block_encoding_circuit(enc)
    start = np.zeros(2**circuit.n_qubits, dtype=complex)
    start[0] = 1.0
    full = Statevector(circuit.n_qubits, circuit.run_amps(start))
    return post_select(full, (0,), "0")
