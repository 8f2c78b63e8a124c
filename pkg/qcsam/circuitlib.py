"""
Parameterized circuits: the quantum feature mapping (QFM), the
hardware-efficient QFFN layer, exact state preparation, and the
ParamCircuit / BoundCircuit representations they share.
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from qcsam.errors import BindingError, ConfigError, ShapeError
from qcsam.simcore import (
    GateOp,
    ROTATION_KINDS,
    Statevector,
    apply_gate_amps,
)

DATA = "data"
PARAM = "param"

QFM_ORDERS = ("zz_ry", "ry_zz")
TOPOLOGIES = ("chain", "ring")

# generator P of each rotation, G(theta) = exp(-i theta P / 2)
GENERATORS = {"Rx": ("X",), "Ry": ("Y",), "Rz": ("Z",), "ZZ": ("Z", "Z")}


@dataclass(frozen=True)
class Slot:
    """Where a gate angle comes from: data[index] or params[index]."""

    family: str
    index: int


@dataclass(frozen=True)
class CircuitOp:
    gate: GateOp
    slot: Optional[Slot] = None


@dataclass(frozen=True)
class BoundCircuit:
    """A concrete gate list on n_qubits."""

    n_qubits: int
    gates: Tuple[GateOp, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.n_qubits:
                    raise ShapeError(f"{g} does not fit {self.n_qubits} qubits")

    def run(self, state: Statevector) -> Statevector:
        if state.n_qubits != self.n_qubits:
            raise ShapeError(
                f"circuit on {self.n_qubits} qubits applied to {state.n_qubits}-qubit state"
            )
        amps = state.amps
        for g in self.gates:
            amps = apply_gate_amps(amps, self.n_qubits, g)
        return Statevector(self.n_qubits, amps)

    def run_amps(self, amps: np.ndarray) -> np.ndarray:
        for g in self.gates:
            amps = apply_gate_amps(amps, self.n_qubits, g)
        return amps

    def inverse(self) -> "BoundCircuit":
        return BoundCircuit(self.n_qubits, tuple(g.dagger() for g in reversed(self.gates)))

    def transpose(self) -> "BoundCircuit":
        gates: List[GateOp] = []
        for g in reversed(self.gates):
            gates.extend(g.transpose())
        return BoundCircuit(self.n_qubits, tuple(gates))

    def then(self, other: "BoundCircuit") -> "BoundCircuit":
        if other.n_qubits != self.n_qubits:
            raise ShapeError("cannot concatenate circuits of different widths")
        return BoundCircuit(self.n_qubits, self.gates + other.gates)

    def embed(self, n_total: int, offset: int, controls: Sequence[int] = (),
              values: Sequence[int] = ()) -> Tuple[GateOp, ...]:
        """Gates shifted by ``offset`` inside a wider register, optionally controlled."""
        shifted = []
        for g in self.gates:
            moved = GateOp(
                g.kind,
                tuple(t + offset for t in g.targets),
                g.angle,
                tuple(c + offset for c in g.controls),
                g.control_values,
            )
            if controls:
                moved = moved.controlled_by(controls, values)
            shifted.append(moved)
        for g in shifted:
            for q in g.qubits:
                if q >= n_total:
                    raise ShapeError(f"{g} does not fit {n_total} qubits")
        return tuple(shifted)

    def dump(self) -> str:
        return "\n".join(str(g) for g in self.gates)


@dataclass(frozen=True)
class ParamCircuit:
    """
    Gate list whose rotation angles may come from a data slot or a trainable
    parameter slot. Slot families are disjoint and numbered from 0.
    """

    n_qubits: int
    ops: Tuple[CircuitOp, ...]
    n_params: int
    n_data: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if op.slot is None:
                continue
            if op.gate.kind not in ROTATION_KINDS:
                raise BindingError(f"slot attached to non-rotation {op.gate.kind}")
            bound = self.n_params if op.slot.family == PARAM else self.n_data
            if not 0 <= op.slot.index < bound:
                raise BindingError(f"slot {op.slot} outside family size {bound}")

    def _check_lengths(self, data, params):
        if len(data) != self.n_data:
            raise BindingError(f"expected {self.n_data} data values, got {len(data)}")
        if len(params) != self.n_params:
            raise BindingError(f"expected {self.n_params} parameters, got {len(params)}")

    def bind(self, data: Sequence[float] = (), params: Sequence[float] = ()) -> BoundCircuit:
        data = np.asarray(data, dtype=float).reshape(-1)
        params = np.asarray(params, dtype=float).reshape(-1)
        self._check_lengths(data, params)
        gates = []
        for op in self.ops:
            if op.slot is None:
                gates.append(op.gate)
            else:
                source = data if op.slot.family == DATA else params
                gates.append(op.gate.with_angle(float(source[op.slot.index])))
        return BoundCircuit(self.n_qubits, tuple(gates))

    def angles(self, data_rows: np.ndarray, params: np.ndarray) -> List[object]:
        """Per-op angle: None, a float, or a (B,) array for data slots."""
        out = []
        for op in self.ops:
            if op.slot is None:
                out.append(op.gate.angle)
            elif op.slot.family == DATA:
                out.append(data_rows[:, op.slot.index])
            else:
                out.append(float(params[op.slot.index]))
        return out

    def gate_counts(self) -> dict:
        counts: dict = {}
        for op in self.ops:
            counts[op.gate.kind] = counts.get(op.gate.kind, 0) + 1
        return counts

    def dump(self) -> str:
        lines = []
        for op in self.ops:
            g = op.gate
            angle = f"{op.slot.family}[{op.slot.index}]" if op.slot else (
                f"{g.angle:.6f}" if g.angle is not None else ""
            )
            lines.append(f"{g.kind} {','.join(map(str, g.targets))} {angle}".rstrip())
        return "\n".join(lines)


@dataclass(frozen=True)
class QfmSpec:
    n_qubits: int
    n_layers: int = 1
    order: str = "zz_ry"
    topology: str = "chain"

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ConfigError("QFM needs at least one qubit", field="n_qubits")
        if self.n_layers < 1:
            raise ConfigError("QFM needs at least one layer", field="qfm_layers")
        if self.order not in QFM_ORDERS:
            raise ConfigError(f"unknown QFM order {self.order!r}", field="qfm_order")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"unknown topology {self.topology!r}", field="qfm_topology")

    def pairs(self) -> List[Tuple[int, int]]:
        pairs = [(q, q + 1) for q in range(self.n_qubits - 1)]
        if self.topology == "ring" and self.n_qubits >= 3:
            pairs.append((self.n_qubits - 1, 0))
        return pairs

    @property
    def n_params(self) -> int:
        return self.n_layers * (len(self.pairs()) + self.n_qubits)


@dataclass(frozen=True)
class QffnSpec:
    n_qubits: int
    n_layers: int = 1

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ConfigError("QFFN needs at least one qubit", field="n_qubits")
        if self.n_layers < 1:
            raise ConfigError("QFFN needs at least one layer", field="qffn_layers")

    @property
    def n_params(self) -> int:
        return 3 * self.n_qubits * self.n_layers


def build_qfm(spec: QfmSpec) -> ParamCircuit:
    """
    Per layer: Rx(x_q) on every qubit, trainable ZZ on each entangling pair and
    trainable Ry on every qubit (order per ``spec.order``). A final Rx(x_q)
    layer closes the data mapping.
    """
    n = spec.n_qubits
    ops: List[CircuitOp] = []
    slot = 0

    def encoding():
        for q in range(n):
            ops.append(CircuitOp(GateOp("Rx", (q,), 0.0), Slot(DATA, q)))

    for _ in range(spec.n_layers):
        encoding()
        zz = []
        for a, b in spec.pairs():
            zz.append((GateOp("ZZ", (a, b), 0.0)))
        ry = [GateOp("Ry", (q,), 0.0) for q in range(n)]
        blocks = (zz, ry) if spec.order == "zz_ry" else (ry, zz)
        for block in blocks:
            for gate in block:
                ops.append(CircuitOp(gate, Slot(PARAM, slot)))
                slot += 1
    encoding()
    return ParamCircuit(n, tuple(ops), n_params=slot, n_data=n)


def build_qffn(spec: QffnSpec) -> ParamCircuit:
    """Rz-Ry-Rz on every qubit, then a CNOT chain closed into a ring for n >= 3."""
    n = spec.n_qubits
    ops: List[CircuitOp] = []
    slot = 0
    for _ in range(spec.n_layers):
        for q in range(n):
            for kind in ("Rz", "Ry", "Rz"):
                ops.append(CircuitOp(GateOp(kind, (q,), 0.0), Slot(PARAM, slot)))
                slot += 1
        for q in range(n - 1):
            ops.append(CircuitOp(GateOp("CNOT", (q, q + 1))))
        if n >= 3:
            ops.append(CircuitOp(GateOp("CNOT", (n - 1, 0))))
    return ParamCircuit(n, tuple(ops), n_params=slot, n_data=0)


def bind_and_run(
    circ: ParamCircuit,
    data: Sequence[float],
    params: Sequence[float],
    input: Optional[Statevector] = None,
) -> Statevector:
    """Bind both slot families and apply the gates in order."""
    bound = circ.bind(data, params)
    if input is None:
        amps = np.zeros(2**circ.n_qubits, dtype=complex)
        amps[0] = 1.0
        input = Statevector(circ.n_qubits, amps)
    return bound.run(input)


def run_batch(
    circ: ParamCircuit,
    data_rows: np.ndarray,
    params: Sequence[float],
    input_amps: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Evaluate one circuit on B data rows at once; returns (B, 2^n) amplitudes.
    Row b equals bind_and_run(circ, data_rows[b], params).amps.
    """
    data_rows = np.atleast_2d(np.asarray(data_rows, dtype=float))
    params = np.asarray(params, dtype=float).reshape(-1)
    if data_rows.shape[1] != circ.n_data:
        raise BindingError(f"expected {circ.n_data} data columns, got {data_rows.shape[1]}")
    if params.shape[0] != circ.n_params:
        raise BindingError(f"expected {circ.n_params} parameters, got {params.shape[0]}")
    batch = data_rows.shape[0]
    if input_amps is None:
        amps = np.zeros((batch, 2**circ.n_qubits), dtype=complex)
        amps[:, 0] = 1.0
    else:
        amps = np.broadcast_to(input_amps, (batch, 2**circ.n_qubits)).astype(complex)
    for op, angle in zip(circ.ops, circ.angles(data_rows, params)):
        amps = apply_gate_amps(amps, circ.n_qubits, op.gate, angle)
    return amps


def build_state_prep(amplitudes: Sequence[complex]) -> BoundCircuit:
    """
    Exact preparation U|0...0> = amplitudes (normalized), global phase included.
    Magnitudes come from a multiplexed Ry tree (qubit 0 first), phases from a
    multiplexed Rz tree plus one GPHASE.
    """
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    size = amps.shape[0]
    n = int(round(np.log2(size))) if size > 1 else 0
    if size < 2 or 2**n != size:
        raise ShapeError(f"state preparation needs 2^n >= 2 amplitudes, got {size}")
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise ShapeError("cannot prepare the zero vector")
    amps = amps / norm
    mags = np.abs(amps)
    phases = np.where(mags > 0, np.angle(amps), 0.0)
    gates: List[GateOp] = []

    for level in range(n):
        block = 2 ** (n - level)
        for prefix in range(2**level):
            chunk = mags[prefix * block:(prefix + 1) * block]
            a0 = np.linalg.norm(chunk[: block // 2])
            a1 = np.linalg.norm(chunk[block // 2:])
            if a1 == 0:
                continue
            theta = 2.0 * np.arctan2(a1, a0)
            gates.append(_multiplexed("Ry", level, prefix, theta))

    for level in reversed(range(n)):
        merged = np.zeros(2**level)
        for prefix in range(2**level):
            # phase of each child subtree after deeper levels were resolved
            lo = phases[2 * prefix]
            hi = phases[2 * prefix + 1]
            if not np.isclose(hi, lo, rtol=0.0, atol=1e-15):
                gates.append(_multiplexed("Rz", level, prefix, hi - lo))
            merged[prefix] = (lo + hi) / 2.0
        phases = merged
    if abs(phases[0]) > 1e-15:
        gates.append(GateOp("GPHASE", (), float(phases[0])))
    return BoundCircuit(n, tuple(gates))


def _multiplexed(kind: str, level: int, prefix: int, angle: float) -> GateOp:
    controls = tuple(range(level))
    values = tuple((prefix >> (level - 1 - c)) & 1 for c in controls)
    return GateOp(kind, (level,), float(angle), controls, values)


def unitary(circuit: BoundCircuit) -> np.ndarray:
    """Dense matrix of a bound circuit, built column by column from basis states."""
    dim = 2**circuit.n_qubits
    columns = circuit.run_amps(np.eye(dim, dtype=complex))
    return columns.T


def concat(circuits: Iterable[BoundCircuit]) -> BoundCircuit:
    circuits = list(circuits)
    if not circuits:
        raise ShapeError("nothing to concatenate")
    out = circuits[0]
    for c in circuits[1:]:
        out = out.then(c)
    return out
