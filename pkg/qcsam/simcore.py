"""
Dense complex statevector engine.

Qubit 0 is the most significant bit of the amplitude index, so the basis
state |q0 q1 ... q_{n-1}> lives at index q0*2^(n-1) + ... + q_{n-1}.
All kernels work on a copy of the amplitude array reshaped to one axis per
qubit; an optional leading batch axis lets one call evolve many states with
per-state rotation angles.
"""

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from qcsam.errors import (
    GateSpecError,
    PostSelectionError,
    QcsamError,
    QubitIndexError,
    ShapeError,
    SizeError,
)

MAX_QUBITS = 24
NORM_TOL = 1e-9
POSTSELECT_TOL = 1e-12

ComplexScalar = complex
Angle = Union[float, np.ndarray]

FIXED_KINDS = frozenset({"H", "X", "Y", "Z", "S", "SDG", "CNOT"})
ROTATION_KINDS = frozenset({"Rx", "Ry", "Rz", "ZZ", "GPHASE"})
GATE_KINDS = FIXED_KINDS | ROTATION_KINDS

_N_TARGETS = {
    "H": 1,
    "X": 1,
    "Y": 1,
    "Z": 1,
    "S": 1,
    "SDG": 1,
    "Rx": 1,
    "Ry": 1,
    "Rz": 1,
    "ZZ": 2,
    "CNOT": 2,
    "GPHASE": 0,
}

_SQRT_HALF = 1.0 / np.sqrt(2.0)
_FIXED_MATRICES = {
    "H": np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
}

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": _FIXED_MATRICES["X"],
    "Y": _FIXED_MATRICES["Y"],
    "Z": _FIXED_MATRICES["Z"],
}


@dataclass(frozen=True, eq=False)
class Statevector:
    """Unit-norm amplitude vector over n_qubits."""

    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        if amps.shape[0] != 2**self.n_qubits:
            raise ShapeError(
                f"statevector of {self.n_qubits} qubits needs {2 ** self.n_qubits} "
                f"amplitudes, got {amps.shape[0]}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ShapeError(f"statevector norm {norm:.12f} is not 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_amplitudes(cls, amps: Sequence[complex], normalize: bool = False):
        """Build a state from raw amplitudes, optionally rescaling to unit norm."""
        arr = np.asarray(amps, dtype=complex).reshape(-1)
        n = int(round(np.log2(arr.shape[0]))) if arr.shape[0] > 0 else -1
        if n < 0 or 2**n != arr.shape[0]:
            raise ShapeError(f"amplitude count {arr.shape[0]} is not a power of two")
        if normalize:
            norm = np.linalg.norm(arr)
            if norm < POSTSELECT_TOL:
                raise ShapeError("cannot normalize the zero vector")
            arr = arr / norm
        return cls(n, arr)

    @property
    def dim(self) -> int:
        return self.amps.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def __repr__(self) -> str:
        return f"Statevector(n_qubits={self.n_qubits}, amps={np.round(self.amps, 6)})"


@dataclass(frozen=True)
class PauliString:
    """Signed tensor product of single-qubit Paulis."""

    n_qubits: int
    factors: Tuple[str, ...]
    sign: int = 1

    def __post_init__(self):
        factors = tuple(self.factors)
        object.__setattr__(self, "factors", factors)
        if len(factors) != self.n_qubits:
            raise ShapeError(
                f"Pauli string has {len(factors)} factors for {self.n_qubits} qubits"
            )
        if any(f not in PAULI_MATRICES for f in factors):
            raise GateSpecError(f"unknown Pauli factor in {factors}")
        if self.sign not in (1, -1):
            raise GateSpecError(f"Pauli sign must be +1 or -1, got {self.sign}")

    @classmethod
    def from_map(cls, n_qubits: int, paulis: dict, sign: int = 1) -> "PauliString":
        """PauliString.from_map(3, {0: "X", 1: "Y"}) -> X⊗Y⊗I"""
        factors = ["I"] * n_qubits
        for qubit, kind in paulis.items():
            if not 0 <= qubit < n_qubits:
                raise QubitIndexError(f"Pauli qubit {qubit} outside 0..{n_qubits - 1}")
            factors[qubit] = kind
        return cls(n_qubits, tuple(factors), sign)

    def __str__(self) -> str:
        body = "".join(
            f"{f}{q}" for q, f in enumerate(self.factors) if f != "I"
        ) or "I"
        return ("+" if self.sign == 1 else "-") + body


@dataclass(frozen=True)
class GateOp:
    """
    One gate. ``controls`` with ``control_values`` turns any kind into its
    controlled version; a control value of 0 is an open (negated) control.
    CNOT keeps its own two-target form (control, target).
    """

    kind: str
    targets: Tuple[int, ...]
    angle: Optional[float] = None
    controls: Tuple[int, ...] = ()
    control_values: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        values = tuple(self.control_values) or (1,) * len(self.controls)
        object.__setattr__(self, "control_values", tuple(int(v) for v in values))

        if self.kind not in GATE_KINDS:
            raise GateSpecError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != _N_TARGETS[self.kind]:
            raise GateSpecError(
                f"{self.kind} takes {_N_TARGETS[self.kind]} targets, got {self.targets}"
            )
        if (self.angle is not None) != (self.kind in ROTATION_KINDS):
            raise GateSpecError(f"angle must be given iff {self.kind} is a rotation")
        if len(self.control_values) != len(self.controls):
            raise GateSpecError("control_values must match controls")
        if any(v not in (0, 1) for v in self.control_values):
            raise GateSpecError("control values must be 0 or 1")
        qubits = self.targets + self.controls
        if len(set(qubits)) != len(qubits):
            raise GateSpecError(f"gate qubits must be distinct, got {qubits}")
        if any(q < 0 for q in qubits):
            raise QubitIndexError(f"negative qubit index in {qubits}")

    @property
    def qubits(self) -> Tuple[int, ...]:
        return self.controls + self.targets

    def controlled_by(self, controls: Iterable[int], values: Iterable[int] = ()) -> "GateOp":
        """Return this gate with extra controls prepended."""
        controls = tuple(controls)
        values = tuple(values) or (1,) * len(controls)
        return GateOp(
            self.kind,
            self.targets,
            self.angle,
            controls + self.controls,
            values + self.control_values,
        )

    def with_angle(self, angle: float) -> "GateOp":
        return GateOp(self.kind, self.targets, angle, self.controls, self.control_values)

    def dagger(self) -> "GateOp":
        if self.kind in ROTATION_KINDS:
            return self.with_angle(-self.angle)
        if self.kind == "S":
            return GateOp("SDG", self.targets, None, self.controls, self.control_values)
        if self.kind == "SDG":
            return GateOp("S", self.targets, None, self.controls, self.control_values)
        return self

    def transpose(self) -> Tuple["GateOp", ...]:
        """
        Gates whose product is the matrix transpose of this gate. Controls
        only add identity blocks, so they pass through unchanged.
        """
        if self.kind == "Ry":
            return (self.with_angle(-self.angle),)
        if self.kind == "Y":
            # Y^T = -Y
            phase = GateOp("GPHASE", (), np.pi, self.controls, self.control_values)
            return (self, phase)
        return (self,)

    def __str__(self) -> str:
        parts = [self.kind, ",".join(str(t) for t in self.targets) or "-"]
        if self.angle is not None:
            parts.append(f"{self.angle:.6f}")
        if self.controls:
            ctrl = ",".join(
                f"{c}" if v else f"~{c}"
                for c, v in zip(self.controls, self.control_values)
            )
            parts.append(f"ctrl={ctrl}")
        return " ".join(parts)


def zero_state(n: int) -> Statevector:
    """|0...0> on n qubits."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise SizeError(f"qubit count must be in 1..{MAX_QUBITS}, got {n}")
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = 1.0
    return Statevector(int(n), amps)


def basis_state(n: int, index: int) -> Statevector:
    if not 1 <= n <= MAX_QUBITS:
        raise SizeError(f"qubit count must be in 1..{MAX_QUBITS}, got {n}")
    if not 0 <= index < 2**n:
        raise QubitIndexError(f"basis index {index} outside register of {n} qubits")
    amps = np.zeros(2**n, dtype=complex)
    amps[index] = 1.0
    return Statevector(n, amps)


def _rotation_matrix(kind: str, angle: Angle) -> np.ndarray:
    """2x2 (or Bx2x2 for an angle array) rotation matrix."""
    half = np.asarray(angle, dtype=float) / 2.0
    c = np.cos(half)
    s = np.sin(half)
    if kind == "Rx":
        mat = np.stack([np.stack([c, -1j * s], -1), np.stack([-1j * s, c], -1)], -2)
    elif kind == "Ry":
        mat = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    elif kind == "Rz":
        zero = np.zeros_like(c)
        em = np.exp(-1j * half)
        ep = np.exp(1j * half)
        mat = np.stack([np.stack([em, zero], -1), np.stack([zero, ep], -1)], -2)
    else:
        raise GateSpecError(f"{kind} is not a single-qubit rotation")
    return mat.astype(complex)


def gate_matrix(g: GateOp) -> np.ndarray:
    """Matrix of the uncontrolled single-qubit part of a gate."""
    if g.kind in _FIXED_MATRICES:
        return _FIXED_MATRICES[g.kind]
    return _rotation_matrix(g.kind, g.angle)


def _check_range(g: GateOp, n: int):
    for q in g.qubits:
        if not 0 <= q < n:
            raise QubitIndexError(f"qubit {q} outside register of {n} qubits in {g}")


def _apply_single(sub: np.ndarray, axis: int, mat: np.ndarray) -> np.ndarray:
    moved = np.moveaxis(sub, axis, -1)
    if mat.ndim == 2:
        out = moved @ mat.T
    else:
        out = np.einsum("b...j,bij->b...i", moved, mat)
    return np.moveaxis(out, -1, axis)


def _batch_broadcast(values: np.ndarray, ndim: int) -> np.ndarray:
    """Reshape a per-batch array (B, *tail) to broadcast against a (B, ...) block."""
    tail = values.shape[1:]
    return values.reshape((values.shape[0],) + (1,) * (ndim - 1 - len(tail)) + tail)


def apply_gate_amps(
    amps: np.ndarray, n_qubits: int, g: GateOp, angle: Optional[Angle] = None
) -> np.ndarray:
    """
    Apply ``g`` to a (2^n,) or (B, 2^n) amplitude array and return a new array.
    ``angle`` overrides ``g.angle`` and may be a length-B array for batched input.
    """
    _check_range(g, n_qubits)
    batched = amps.ndim == 2
    tensor = np.array(amps, dtype=complex).reshape((-1,) + (2,) * n_qubits)
    theta = g.angle if angle is None else angle
    if theta is not None and np.ndim(theta) > 0 and not batched:
        raise ShapeError("per-state angles need a batched amplitude array")

    kind = g.kind
    targets = g.targets
    controls = list(g.controls)
    values = list(g.control_values)
    if kind == "CNOT":
        controls.append(targets[0])
        values.append(1)
        targets = (targets[1],)
        kind = "X"

    index = [slice(None)] * (n_qubits + 1)
    for c, v in zip(controls, values):
        index[c + 1] = v
    index = tuple(index)
    sub = tensor[index]

    def axis_of(q: int) -> int:
        return 1 + sum(1 for r in range(q) if r not in controls)

    if kind == "GPHASE":
        phase = np.exp(1j * np.asarray(theta, dtype=float))
        if np.ndim(phase) > 0:
            phase = _batch_broadcast(phase, sub.ndim)
        tensor[index] = sub * phase
    elif kind == "ZZ":
        a1, a2 = axis_of(targets[0]), axis_of(targets[1])
        half = np.asarray(theta, dtype=float) / 2.0
        em = np.exp(-1j * half)
        ep = np.exp(1j * half)
        table = np.stack([np.stack([em, ep], -1), np.stack([ep, em], -1)], -2)
        moved = np.moveaxis(sub, (a1, a2), (-2, -1))
        if table.ndim == 3:
            table = _batch_broadcast(table, moved.ndim)
        tensor[index] = np.moveaxis(moved * table, (-2, -1), (a1, a2))
    else:
        if kind in _FIXED_MATRICES:
            mat = _FIXED_MATRICES[kind]
        else:
            mat = _rotation_matrix(kind, theta)
        tensor[index] = _apply_single(sub, axis_of(targets[0]), mat)

    return tensor.reshape(amps.shape)


def apply_gate(state: Statevector, g: GateOp) -> Statevector:
    """U_g applied to ``state``."""
    return Statevector(state.n_qubits, apply_gate_amps(state.amps, state.n_qubits, g))


def apply_pauli_amps(amps: np.ndarray, n_qubits: int, m: PauliString) -> np.ndarray:
    """P|amps> without the sign (works on batched arrays)."""
    if m.n_qubits != n_qubits:
        raise ShapeError(f"Pauli string on {m.n_qubits} qubits, state on {n_qubits}")
    out = amps
    for q, f in enumerate(m.factors):
        if f != "I":
            out = apply_gate_amps(out, n_qubits, GateOp(f, (q,)))
    return out


def inner_product(bra: Statevector, ket: Statevector) -> ComplexScalar:
    """<bra|ket> = sum_k conj(bra_k) ket_k."""
    if bra.n_qubits != ket.n_qubits:
        raise ShapeError(
            f"inner product of {bra.n_qubits}- and {ket.n_qubits}-qubit states"
        )
    return complex(np.vdot(bra.amps, ket.amps))


def expectation(state: Statevector, m: PauliString) -> float:
    """sign * <psi|P|psi>."""
    if m.n_qubits != state.n_qubits:
        raise ShapeError(
            f"Pauli string on {m.n_qubits} qubits, state on {state.n_qubits}"
        )
    value = complex(np.vdot(state.amps, apply_pauli_amps(state.amps, state.n_qubits, m)))
    if abs(value.imag) > NORM_TOL:
        raise QcsamError(f"non-real Pauli expectation {value}")
    return m.sign * value.real


def _outcome_mask(n: int, qubits: Sequence[int], outcome: str) -> np.ndarray:
    qubits = tuple(qubits)
    if len(outcome) != len(qubits) or any(b not in "01" for b in outcome):
        raise ShapeError(f"outcome {outcome!r} does not match qubits {qubits}")
    if len(set(qubits)) != len(qubits):
        raise ShapeError(f"duplicate qubits {qubits}")
    for q in qubits:
        if not 0 <= q < n:
            raise QubitIndexError(f"qubit {q} outside register of {n} qubits")
    indices = np.arange(2**n)
    mask = np.ones(2**n, dtype=bool)
    for q, bit in zip(qubits, outcome):
        mask &= ((indices >> (n - 1 - q)) & 1) == int(bit)
    return mask


def project(
    state: Statevector, qubits: Sequence[int], outcome: str
) -> Tuple[Statevector, float]:
    """
    Project ``qubits`` onto ``outcome`` (bit i belongs to qubits[i]).
    Returns the renormalized full-register state and the outcome probability.
    """
    mask = _outcome_mask(state.n_qubits, qubits, outcome)
    kept = np.where(mask, state.amps, 0.0)
    prob = float(np.vdot(kept, kept).real)
    if prob <= POSTSELECT_TOL:
        raise PostSelectionError(
            f"post-selection of {outcome!r} on qubits {tuple(qubits)} has probability {prob:.3e}"
        )
    return Statevector(state.n_qubits, kept / np.sqrt(prob)), prob


def post_select(
    state: Statevector, qubits: Sequence[int], outcome: str
) -> Tuple[Statevector, float]:
    """project() and drop the measured qubits, keeping the rest in order."""
    remaining = state.n_qubits - len(tuple(qubits))
    if remaining < 1:
        raise ShapeError("post_select must leave at least one qubit")
    projected, prob = project(state, qubits, outcome)
    mask = _outcome_mask(state.n_qubits, qubits, outcome)
    return Statevector(remaining, projected.amps[mask]), prob
