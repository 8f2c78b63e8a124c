"""
Complex attention weights <K|Q>, computed directly from simulated states
and through the selection/auxiliary/working-register Hadamard test.
"""

from dataclasses import dataclass

from qcsam.circuitlib import BoundCircuit
from qcsam.errors import InconsistentReadoutError, ShapeError
from qcsam.simcore import GateOp, inner_product, zero_state

MAGNITUDE_TOL = 1e-9
READOUT_TOL = 1e-6

SELECTION_QUBIT = 0
AUXILIARY_QUBIT = 1
WORK_OFFSET = 2


@dataclass(frozen=True)
class ComplexWeight:
    value: complex

    def __post_init__(self):
        if abs(self.value) > 1.0 + MAGNITUDE_TOL:
            raise InconsistentReadoutError(
                f"attention weight {self.value} exceeds unit magnitude"
            )

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def imag(self) -> float:
        return self.value.imag


@dataclass(frozen=True)
class HadamardTestReadout:
    """P(q0=0, q1=0) and P(q0=1, q1=0) of the Hadamard-test circuit."""

    p0_real_branch: float
    p0_imag_branch: float

    def __post_init__(self):
        for name in ("p0_real_branch", "p0_imag_branch"):
            p = getattr(self, name)
            if not -MAGNITUDE_TOL <= p <= 0.5 + MAGNITUDE_TOL:
                raise InconsistentReadoutError(f"{name}={p} outside [0, 1/2]")


def _check_widths(uq: BoundCircuit, uk: BoundCircuit):
    if uq.n_qubits != uk.n_qubits:
        raise ShapeError(
            f"query circuit has {uq.n_qubits} qubits, key circuit {uk.n_qubits}"
        )


def attention_weight_analytic(uq: BoundCircuit, uk: BoundCircuit) -> ComplexWeight:
    """<0|U_K^† U_Q|0> as the inner product of the two prepared states."""
    _check_widths(uq, uk)
    start = zero_state(uq.n_qubits)
    return ComplexWeight(inner_product(uk.run(start), uq.run(start)))


def hadamard_test_circuit(uq: BoundCircuit, uk: BoundCircuit) -> BoundCircuit:
    """
    H on q0 and q1, controlled-(U_K^† U_Q) from q1 onto the working register,
    controlled-S from q0 onto q1, final H on q1.
    """
    _check_widths(uq, uk)
    n_total = uq.n_qubits + WORK_OFFSET
    overlap = uq.then(uk.inverse())
    gates = [
        GateOp("H", (SELECTION_QUBIT,)),
        GateOp("H", (AUXILIARY_QUBIT,)),
    ]
    gates.extend(overlap.embed(n_total, WORK_OFFSET, controls=(AUXILIARY_QUBIT,)))
    gates.append(GateOp("S", (AUXILIARY_QUBIT,), controls=(SELECTION_QUBIT,)))
    gates.append(GateOp("H", (AUXILIARY_QUBIT,)))
    return BoundCircuit(n_total, tuple(gates))


def hadamard_test(uq: BoundCircuit, uk: BoundCircuit) -> HadamardTestReadout:
    """Exact joint probabilities of (q0, q1) = (0, 0) and (1, 0)."""
    circuit = hadamard_test_circuit(uq, uk)
    final = circuit.run(zero_state(circuit.n_qubits))
    probs = final.probabilities().reshape(2, 2, -1).sum(axis=2)
    return HadamardTestReadout(float(probs[0, 0]), float(probs[1, 0]))


def weight_from_readout(r: HadamardTestReadout) -> ComplexWeight:
    """Invert P = (1 + Re)/4 and P = (1 - Im)/4."""
    value = complex(4.0 * r.p0_real_branch - 1.0, 1.0 - 4.0 * r.p0_imag_branch)
    magnitude = abs(value)
    if magnitude > 1.0 + READOUT_TOL:
        raise InconsistentReadoutError(
            f"readout {r} implies |<K|Q>| = {magnitude:.9f} > 1"
        )
    if magnitude > 1.0:
        value = value / magnitude
    return ComplexWeight(value)


def hadamard_weight(uq: BoundCircuit, uk: BoundCircuit) -> ComplexWeight:
    return weight_from_readout(hadamard_test(uq, uk))

