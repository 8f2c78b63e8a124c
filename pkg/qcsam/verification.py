"""
Property and oracle checks run by the ``verify`` command.

Each check draws random instances from a seeded generator, compares two
independent computations of the same quantity and reports the worst
deviation seen.
"""

import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from qcsam.circuitlib import BoundCircuit, unitary
from qcsam.clcu import (
    ClcuCoefficients,
    block_encode_weights,
    build_prep,
    build_prep_transpose,
    clcu_apply_analytic,
    clcu_apply_circuit,
    linear_combination,
)
from qcsam.gradients import adjoint_gradient, finite_difference_gradient
from qcsam.model import QcsamModel, class_probs, measurement_ops
from qcsam.similarity import attention_weight_analytic, hadamard_weight
from qcsam.simcore import (
    PAULI_MATRICES,
    GateOp,
    Statevector,
    basis_state,
    zero_state,
)
from utils.logger import logger

DEFAULT_TRIALS = {
    "hadamard_oracle": 500,
    "clcu_equivalence": 300,
    "block_encoding_roundtrip": 200,
    "prep_transpose": 50,
    "circuit_path_consistency": 6,
    "gradient_check": 4,
    "readout_sanity": 1000,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int
    max_error: float
    tolerance: float
    seconds: float = 0.0
    detail: str = ""


@dataclass
class VerificationReport:
    seed: int
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
        }


def random_circuit(n_qubits: int, depth: int, rng: np.random.Generator) -> BoundCircuit:
    """Random gate sequence over the full gate alphabet, on n_qubits."""
    gates = []
    for _ in range(depth):
        q = int(rng.integers(n_qubits))
        kind = str(rng.choice(["H", "S", "Rx", "Ry", "Rz", "ZZ", "CNOT"]))
        if kind in ("ZZ", "CNOT") and n_qubits < 2:
            kind = "Ry"
        if kind in ("ZZ", "CNOT"):
            a, b = rng.choice(n_qubits, size=2, replace=False)
            angle = float(rng.uniform(-np.pi, np.pi)) if kind == "ZZ" else None
            gates.append(GateOp(kind, (int(a), int(b)), angle))
        elif kind in ("H", "S"):
            gates.append(GateOp(kind, (q,)))
        else:
            gates.append(GateOp(kind, (q,), float(rng.uniform(-np.pi, np.pi))))
    return BoundCircuit(n_qubits, tuple(gates))


def random_state(n_qubits: int, rng: np.random.Generator) -> Statevector:
    raw = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return Statevector.from_amplitudes(raw, normalize=True)


def random_complex(count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(size=count) + 1j * rng.normal(size=count)


def check_hadamard_oracle(trials: int, rng: np.random.Generator) -> float:
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 4))
        uq = random_circuit(n, 6, rng)
        uk = random_circuit(n, 6, rng)
        direct = attention_weight_analytic(uq, uk).value
        recovered = hadamard_weight(uq, uk).value
        worst = max(worst, abs(direct - recovered))
    return worst


def check_clcu_equivalence(trials: int, rng: np.random.Generator) -> float:
    """Worst of fidelity defect and success-probability-law deviation."""
    worst = 0.0
    for t in range(trials):
        n_terms = (2, 4, 8)[t % 3]
        alphas = random_complex(n_terms, rng)
        us = [random_circuit(2, 5, rng) for _ in range(n_terms)]
        psi = random_state(2, rng)
        coeffs = ClcuCoefficients.from_alphas(alphas)
        out_c, prob = clcu_apply_circuit(coeffs, us, psi)
        images = [u.run(psi) for u in us]
        out_a = clcu_apply_analytic(alphas, images)
        _, omega_prime = linear_combination(alphas, np.stack([s.amps for s in images]))
        fidelity = abs(np.vdot(out_c.amps, out_a.amps))
        law = (omega_prime / coeffs.omega**2) ** 2
        worst = max(worst, 1.0 - fidelity, abs(prob - law))
    return worst


def check_block_encoding(trials: int, rng: np.random.Generator) -> float:
    worst = 0.0
    for t in range(trials):
        m = 1 + t % 3
        weights = random_complex(2**m, rng)
        state, _ = block_encode_weights(weights)
        target = weights / np.linalg.norm(weights)
        worst = max(worst, 1.0 - abs(np.vdot(target, state.amps)))
    return worst


def check_prep_transpose(trials: int, rng: np.random.Generator) -> float:
    """Unitarity, PREP|0> amplitudes and the gate-level transpose identity."""
    worst = 0.0
    for t in range(trials):
        n_terms = (2, 3, 4, 5, 8)[t % 5]
        coeffs = ClcuCoefficients.from_alphas(random_complex(n_terms, rng))
        u = unitary(build_prep(coeffs))
        ut = unitary(build_prep_transpose(coeffs))
        eye = np.eye(u.shape[0])
        worst = max(
            worst,
            float(np.max(np.abs(u.conj().T @ u - eye))),
            float(np.max(np.abs(ut - u.T))),
            float(np.max(np.abs(u[:, 0] - coeffs.prep_amplitudes()))),
        )
    return worst


SMALL_CONFIGS = (
    # (n_qubits, head grids, classes)
    (2, ((1, 2),), 2),
    (2, ((2, 2),), 3),
    (3, ((1, 2),), 4),
    (2, ((1, 2), (1, 1)), 2),
    (3, ((2, 2), (1, 2)), 3),
    (2, ((1, 1),), 2),
)


def _random_sample(model: QcsamModel, rng: np.random.Generator) -> list:
    return [rng.uniform(0.0, np.pi, size=(h.n_patches, model.n_qubits)) for h in model.heads]


def check_circuit_path(trials: int, rng: np.random.Generator, attention_mode: str = "complex") -> float:
    worst = 0.0
    for t in range(trials):
        n, grids, classes = SMALL_CONFIGS[t % len(SMALL_CONFIGS)]
        model = QcsamModel(n, classes, grids, attention_mode=attention_mode)
        params = model.init_params(rng, init_scale=1.0, weight_noise=0.5)
        sample = _random_sample(model, rng)
        analytic = model.forward(sample, params).distribution.probs
        circuit = model.forward_circuit(sample, params).distribution.probs
        worst = max(worst, float(np.max(np.abs(analytic - circuit))))
    return worst


def gradient_mismatch(adjoint: np.ndarray, reference: np.ndarray) -> float:
    """Worst coordinate error divided by its allowance (<= 1 passes)."""
    allowance = np.maximum(1e-4 * np.abs(reference), 1e-7)
    return float(np.max(np.abs(adjoint - reference) / allowance))


def check_gradient(trials: int, rng: np.random.Generator) -> float:
    model = QcsamModel(2, 2, ((1, 2),))
    params = model.init_params(rng, init_scale=1.0, weight_noise=0.5)
    worst = 0.0
    for _ in range(trials):
        sample = _random_sample(model, rng)
        label = int(rng.integers(2))
        _, adj = adjoint_gradient(model, sample, label, params)
        _, ref = finite_difference_gradient(model, sample, label, params)
        worst = max(worst, gradient_mismatch(adj, ref))
    return worst


def dense_pauli(factors) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = np.kron(out, PAULI_MATRICES[f])
    return out


def check_readout(trials: int, rng: np.random.Generator) -> float:
    worst = 0.0
    fixed = [
        (basis_state(2, 0), 3, [0.25, 0.25, 0.5]),
        (zero_state(2), 2, [1.0, 0.0]),
    ]
    for state, classes, expected in fixed:
        probs = class_probs(state, measurement_ops(classes, 2)).probs
        worst = max(worst, float(np.max(np.abs(probs - expected))))
    for t in range(trials):
        classes = (2, 3, 4)[t % 3]
        state = random_state(2, rng)
        ops = measurement_ops(classes, 2)
        probs = class_probs(state, ops).probs
        dense = np.array(
            [m.sign * np.vdot(state.amps, dense_pauli(m.factors) @ state.amps).real for m in ops]
        )
        oracle = (1.0 + dense) / np.sum(1.0 + dense)
        worst = max(worst, abs(probs.sum() - 1.0), float(np.max(np.abs(probs - oracle))))
    return worst


CHECKS: Dict[str, tuple] = {
    "hadamard_oracle": (check_hadamard_oracle, 1e-9),
    "clcu_equivalence": (check_clcu_equivalence, 1e-9),
    "block_encoding_roundtrip": (check_block_encoding, 1e-9),
    "prep_transpose": (check_prep_transpose, 1e-10),
    "circuit_path_consistency": (check_circuit_path, 1e-6),
    "gradient_check": (check_gradient, 1.0),
    "readout_sanity": (check_readout, 1e-9),
}


def run_checks(
    seed: int = 0,
    trials: Optional[Dict[str, int]] = None,
    only: Optional[List[str]] = None,
) -> VerificationReport:
    counts = dict(DEFAULT_TRIALS)
    counts.update(trials or {})
    report = VerificationReport(seed)
    for offset, (name, (fn, tolerance)) in enumerate(CHECKS.items()):
        if only and name not in only:
            continue
        rng = np.random.default_rng([seed, offset])
        started = time.time()
        try:
            worst = fn(counts[name], rng)
            detail = ""
        except Exception as e:
            worst, detail = float("inf"), f"{type(e).__name__}: {e}"
        result = CheckResult(
            name,
            worst <= tolerance,
            counts[name],
            worst,
            tolerance,
            time.time() - started,
            detail,
        )
        logger.check_result(
            name,
            result.passed,
            trials=result.trials,
            max_error=f"{worst:.3e}",
            seconds=result.seconds,
            detail=detail or None,
        )
        report.checks.append(result)
    return report
