"""
QCSAM forward pass.

Per head: QFM-Q/K/V states for every patch, the complex attention matrix
A[k, j] = <K_j|Q_k>, per-query states |S_k> = sum_j A[k, j]|V_j>, the
trainable patch combination |G> = sum_k beta_k |S_k>. Heads are merged with
trainable gamma, then the QFFN and the Pauli readout give class
probabilities. Every combination is normalized, as a post-selected CLCU
would leave it.

``forward`` evaluates the analytic path; ``forward_circuit`` realizes every
stage with circuits (Hadamard tests, block encoding, CLCU post-selection).
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from qcsam.circuitlib import (
    BoundCircuit,
    ParamCircuit,
    QffnSpec,
    QfmSpec,
    build_qffn,
    build_qfm,
    build_state_prep,
    run_batch,
)
from qcsam.clcu import (
    ClcuCoefficients,
    block_encode_weights,
    clcu_apply_circuit,
    linear_combination,
)
from qcsam.errors import (
    ConfigError,
    DegenerateCoefficientsError,
    DegenerateReadoutError,
    InputDomainError,
    PostSelectionError,
    SampleDegenerateError,
    ShapeError,
)
from qcsam.similarity import hadamard_weight
from qcsam.simcore import (
    POSTSELECT_TOL,
    PauliString,
    Statevector,
    apply_pauli_amps,
    expectation,
    zero_state,
)

ATTENTION_MODES = ("complex", "real_overlap")
SUPPORTED_GRIDS = ((2, 2), (7, 7))
PROB_FLOOR = 1e-12
READOUT_TOL = 1e-9
DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class HeadSpec:
    patch_grid: Tuple[int, int]
    qfm: QfmSpec

    def __post_init__(self):
        object.__setattr__(self, "patch_grid", tuple(self.patch_grid))
        rows, cols = self.patch_grid
        if rows < 1 or cols < 1:
            raise ConfigError(f"invalid patch grid {self.patch_grid}", field="head_grids")

    @property
    def n_patches(self) -> int:
        return self.patch_grid[0] * self.patch_grid[1]


@dataclass
class HeadParams:
    qfm_q: np.ndarray
    qfm_k: np.ndarray
    qfm_v: np.ndarray
    beta: np.ndarray


@dataclass
class ModelParams:
    heads: List[HeadParams]
    gamma: np.ndarray
    qffn: np.ndarray

    def flatten(self) -> np.ndarray:
        """
        Canonical layout: per head qfm_q, qfm_k, qfm_v, then beta as
        (Re, Im) pairs; gamma as (Re, Im) pairs; qffn angles last.
        """
        chunks = []
        for head in self.heads:
            chunks += [head.qfm_q, head.qfm_k, head.qfm_v, _pairs(head.beta)]
        chunks += [_pairs(self.gamma), self.qffn]
        return np.concatenate([np.asarray(c, dtype=float).reshape(-1) for c in chunks])

    def copy(self) -> "ModelParams":
        return ModelParams(
            [
                HeadParams(h.qfm_q.copy(), h.qfm_k.copy(), h.qfm_v.copy(), h.beta.copy())
                for h in self.heads
            ],
            self.gamma.copy(),
            self.qffn.copy(),
        )


def _pairs(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    return np.stack([values.real, values.imag], axis=-1).reshape(-1)


def _unpairs(flat: np.ndarray) -> np.ndarray:
    flat = np.asarray(flat, dtype=float).reshape(-1, 2)
    return flat[:, 0] + 1j * flat[:, 1]


@dataclass(frozen=True, eq=False)
class AttentionMatrix:
    """entries[k, j] = <K_j|Q_k>."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ShapeError(f"attention matrix must be square, got {entries.shape}")
        if np.any(np.abs(entries) > 1.0 + READOUT_TOL):
            raise ShapeError("attention entries exceed unit magnitude")
        object.__setattr__(self, "entries", entries)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def real_overlap(self) -> "AttentionMatrix":
        """|A[k, j]|^2, the magnitude-only ablation variant."""
        return AttentionMatrix(np.abs(self.entries) ** 2 + 0j)


@dataclass(frozen=True, eq=False)
class ClassDistribution:
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if np.any(probs < -READOUT_TOL) or np.any(probs > 1.0 + READOUT_TOL):
            raise DegenerateReadoutError(f"class probabilities out of range: {probs}")
        if abs(probs.sum() - 1.0) > READOUT_TOL:
            raise DegenerateReadoutError(f"class probabilities sum to {probs.sum()}")
        object.__setattr__(self, "probs", probs)

    def predicted(self) -> int:
        return int(np.argmax(self.probs))


def check_features(features: np.ndarray, n_qubits: int) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if features.shape[1] != n_qubits:
        raise ShapeError(
            f"patch features have length {features.shape[1]}, expected {n_qubits}"
        )
    if np.any(features < -DOMAIN_TOL) or np.any(features > np.pi + DOMAIN_TOL):
        raise InputDomainError("patch features must lie in [0, pi]")
    return features


def encode_patches(
    features: np.ndarray, role_params: Sequence[float], qfm: QfmSpec
) -> List[Statevector]:
    """One QFM state per patch row of ``features``."""
    features = check_features(features, qfm.n_qubits)
    amps = run_batch(build_qfm(qfm), features, role_params)
    return [Statevector(qfm.n_qubits, row) for row in amps]


def attention_matrix(qs: Sequence[Statevector], ks: Sequence[Statevector]) -> AttentionMatrix:
    if len(qs) != len(ks):
        raise ShapeError(f"{len(qs)} queries but {len(ks)} keys")
    if {s.n_qubits for s in qs} != {s.n_qubits for s in ks}:
        raise ShapeError("query and key states have different widths")
    q = np.stack([s.amps for s in qs])
    k = np.stack([s.amps for s in ks])
    return AttentionMatrix(q @ k.conj().T)


def attention_matrix_hadamard(
    q_circuits: Sequence[BoundCircuit], k_circuits: Sequence[BoundCircuit]
) -> AttentionMatrix:
    """Entry-by-entry Hadamard-test realization of attention_matrix."""
    if len(q_circuits) != len(k_circuits):
        raise ShapeError(f"{len(q_circuits)} queries but {len(k_circuits)} keys")
    m = len(q_circuits)
    entries = np.zeros((m, m), dtype=complex)
    for k in range(m):
        for j in range(m):
            entries[k, j] = hadamard_weight(q_circuits[k], k_circuits[j]).value
    return AttentionMatrix(entries)


def _normalize_rows(block: np.ndarray, scale: np.ndarray, stage: str) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(block, axis=1)
    if np.any((norms / np.maximum(scale, 1e-300)) ** 2 <= POSTSELECT_TOL):
        raise SampleDegenerateError(f"destructive cancellation in {stage}")
    return block / norms[:, None], norms


def attention_output(
    a: AttentionMatrix, vs: Sequence[Statevector], beta: Sequence[complex]
) -> Statevector:
    """|G> = sum_k beta_k |S_k>, |S_k> = sum_j A[k, j]|V_j>, both normalized."""
    if a.size != len(vs) or len(beta) != len(vs):
        raise ShapeError("attention matrix, value states and beta disagree on M")
    v = np.stack([s.amps for s in vs])
    s_block, _ = _normalize_rows(
        a.entries @ v, np.sum(np.abs(a.entries), axis=1), "per-query weighted sum"
    )
    try:
        g, _ = linear_combination(beta, s_block)
    except (PostSelectionError, DegenerateCoefficientsError) as exc:
        raise SampleDegenerateError(f"patch combination failed: {exc}") from exc
    return Statevector(vs[0].n_qubits, g)


def multi_head_combine(gs: Sequence[Statevector], gamma: Sequence[complex]) -> Statevector:
    if len(gs) < 1 or len(gamma) != len(gs):
        raise ShapeError(f"{len(gs)} head states but {len(gamma)} head weights")
    try:
        combined, _ = linear_combination(gamma, np.stack([g.amps for g in gs]))
    except (PostSelectionError, DegenerateCoefficientsError) as exc:
        raise SampleDegenerateError(f"multi-head combination failed: {exc}") from exc
    return Statevector(gs[0].n_qubits, combined)


# class count -> ({qubit: pauli}, sign) per class
READOUT_TERMS = {
    2: (({0: "Z"}, 1), ({0: "Z"}, -1)),
    3: (({0: "X"}, 1), ({0: "Y"}, 1), ({0: "Z"}, 1)),
    4: (
        ({0: "X", 1: "X"}, 1),
        ({0: "Y", 1: "X"}, 1),
        ({0: "Z", 1: "X"}, 1),
        ({0: "X", 1: "Y"}, 1),
    ),
}


def measurement_ops(n_classes: int, n_qubits: int) -> List[PauliString]:
    """
    C=2: +Z0 and -Z0, so y0 = (1 + <Z0>)/2. C=3: X0, Y0, Z0.
    C=4: X0X1, Y0X1, Z0X1, X0Y1.
    """
    terms = READOUT_TERMS.get(n_classes)
    if terms is None:
        raise ConfigError(f"unsupported class count {n_classes}", field="classes")
    needed = 1 + max(q for factors, _ in terms for q in factors)
    if n_qubits < needed:
        raise ConfigError(
            f"{n_classes}-class readout measures {needed} qubits, got {n_qubits}",
            field="n_qubits",
        )
    return [PauliString.from_map(n_qubits, factors, sign=sign) for factors, sign in terms]


def _probs_from_expectations(values: np.ndarray) -> Tuple[np.ndarray, float]:
    shifted = 1.0 + values
    denom = float(shifted.sum())
    if denom <= READOUT_TOL:
        raise DegenerateReadoutError(f"readout normalizer {denom:.3e} vanishes")
    return shifted / denom, denom


def class_probs(psi: Statevector, ms: Sequence[PauliString]) -> ClassDistribution:
    """y_k = (1 + <M_k>) / sum_j (1 + <M_j>)."""
    values = np.array([expectation(psi, m) for m in ms])
    probs, _ = _probs_from_expectations(values)
    return ClassDistribution(probs)


def cross_entropy(yhat: ClassDistribution, label: int) -> float:
    if not 0 <= label < yhat.probs.shape[0]:
        raise ShapeError(f"label {label} outside {yhat.probs.shape[0]} classes")
    return float(-np.log(max(yhat.probs[label], PROB_FLOOR)))


@dataclass
class HeadCache:
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    overlaps: np.ndarray
    weights: np.ndarray
    s: np.ndarray
    s_norms: np.ndarray
    g: np.ndarray
    g_norm: float


@dataclass
class ForwardCache:
    """Intermediates of one analytic forward, reused by the gradient pass."""

    heads: List[HeadCache] = field(default_factory=list)
    psi: Optional[np.ndarray] = None
    psi_norm: float = 1.0
    phi: Optional[np.ndarray] = None
    expectations: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    denom: float = 1.0


@dataclass
class ForwardResult:
    distribution: ClassDistribution
    state: Statevector


class QcsamModel:
    """Circuits and shapes of one QCSAM configuration."""

    def __init__(
        self,
        n_qubits: int,
        n_classes: int,
        head_grids: Sequence[Tuple[int, int]] = ((2, 2),),
        qfm_layers: int = 1,
        qffn_layers: int = 1,
        attention_mode: str = "complex",
        qfm_order: str = "zz_ry",
        qfm_topology: str = "chain",
    ):
        if attention_mode not in ATTENTION_MODES:
            raise ConfigError(
                f"unknown attention mode {attention_mode!r}", field="attention_mode"
            )
        if not head_grids:
            raise ConfigError("model needs at least one head", field="heads")
        self.n_qubits = n_qubits
        self.n_classes = n_classes
        self.attention_mode = attention_mode
        qfm_spec = QfmSpec(n_qubits, qfm_layers, qfm_order, qfm_topology)
        self.heads = [HeadSpec(tuple(grid), qfm_spec) for grid in head_grids]
        self.qfm_spec = qfm_spec
        self.qffn_spec = QffnSpec(n_qubits, qffn_layers)
        self.qfm: ParamCircuit = build_qfm(qfm_spec)
        self.qffn: ParamCircuit = build_qffn(self.qffn_spec)
        self.readout = measurement_ops(n_classes, n_qubits)

    @classmethod
    def from_config(cls, config) -> "QcsamModel":
        return cls(
            n_qubits=config.n_qubits,
            n_classes=len(config.classes),
            head_grids=config.head_grids,
            qfm_layers=config.qfm_layers,
            qffn_layers=config.qffn_layers,
            attention_mode=config.attention_mode,
            qfm_order=config.qfm_order,
            qfm_topology=config.qfm_topology,
        )

    @property
    def n_heads(self) -> int:
        return len(self.heads)

    def n_params(self) -> int:
        per_head = [3 * self.qfm.n_params + 2 * h.n_patches for h in self.heads]
        return sum(per_head) + 2 * self.n_heads + self.qffn.n_params

    def init_params(
        self, rng: np.random.Generator, init_scale: float = 0.1, weight_noise: float = 0.1
    ) -> ModelParams:
        """Angles uniform in [-init_scale, init_scale]; complex weights 1 + noise."""

        def angles(count: int) -> np.ndarray:
            return rng.uniform(-init_scale, init_scale, size=count)

        def weights(count: int) -> np.ndarray:
            noise = rng.normal(0.0, weight_noise, size=(count, 2))
            return (1.0 + noise[:, 0]) + 1j * noise[:, 1]

        heads = []
        for head in self.heads:
            heads.append(
                HeadParams(
                    angles(self.qfm.n_params),
                    angles(self.qfm.n_params),
                    angles(self.qfm.n_params),
                    weights(head.n_patches),
                )
            )
        gamma = weights(self.n_heads)
        return ModelParams(heads, gamma, angles(self.qffn.n_params))

    def unflatten(self, flat: np.ndarray) -> ModelParams:
        flat = np.asarray(flat, dtype=float).reshape(-1)
        if flat.shape[0] != self.n_params():
            raise ShapeError(f"expected {self.n_params()} parameters, got {flat.shape[0]}")
        pos = 0

        def take(count: int) -> np.ndarray:
            nonlocal pos
            chunk = flat[pos:pos + count].copy()
            pos += count
            return chunk

        heads = []
        p = self.qfm.n_params
        for head in self.heads:
            qfm_q, qfm_k, qfm_v = take(p), take(p), take(p)
            heads.append(HeadParams(qfm_q, qfm_k, qfm_v, _unpairs(take(2 * head.n_patches))))
        gamma = _unpairs(take(2 * self.n_heads))
        return ModelParams(heads, gamma, take(self.qffn.n_params))

    def _check_sample(self, sample: Sequence[np.ndarray]) -> List[np.ndarray]:
        if len(sample) != self.n_heads:
            raise ShapeError(f"sample has {len(sample)} heads, model has {self.n_heads}")
        checked = []
        for head, feats in zip(self.heads, sample):
            feats = check_features(feats, self.n_qubits)
            if feats.shape[0] != head.n_patches:
                raise ShapeError(
                    f"head with grid {head.patch_grid} got {feats.shape[0]} patches"
                )
            checked.append(feats)
        return checked

    def _head_forward(self, feats: np.ndarray, hp: HeadParams) -> HeadCache:
        q = run_batch(self.qfm, feats, hp.qfm_q)
        k = run_batch(self.qfm, feats, hp.qfm_k)
        v = run_batch(self.qfm, feats, hp.qfm_v)
        overlaps = q @ k.conj().T
        if self.attention_mode == "real_overlap":
            weights = np.abs(overlaps) ** 2 + 0j
        else:
            weights = overlaps
        s, s_norms = _normalize_rows(
            weights @ v, np.sum(np.abs(weights), axis=1), "per-query weighted sum"
        )
        try:
            g, g_norm = linear_combination(hp.beta, s)
        except (PostSelectionError, DegenerateCoefficientsError) as exc:
            raise SampleDegenerateError(f"patch combination failed: {exc}") from exc
        return HeadCache(q, k, v, overlaps, weights, s, s_norms, g, g_norm)

    def forward_cache(self, sample: Sequence[np.ndarray], params: ModelParams) -> ForwardCache:
        feats = self._check_sample(sample)
        cache = ForwardCache()
        for head_feats, hp in zip(feats, params.heads):
            cache.heads.append(self._head_forward(head_feats, hp))
        try:
            psi, psi_norm = linear_combination(
                params.gamma, np.stack([h.g for h in cache.heads])
            )
        except (PostSelectionError, DegenerateCoefficientsError) as exc:
            raise SampleDegenerateError(f"multi-head combination failed: {exc}") from exc
        cache.psi, cache.psi_norm = psi, psi_norm
        cache.phi = self.qffn.bind((), params.qffn).run_amps(psi)
        cache.expectations = np.array(
            [
                m.sign * np.vdot(cache.phi, apply_pauli_amps(cache.phi, self.n_qubits, m)).real
                for m in self.readout
            ]
        )
        cache.probs, cache.denom = _probs_from_expectations(cache.expectations)
        return cache

    def forward(self, sample: Sequence[np.ndarray], params: ModelParams) -> ForwardResult:
        """Analytic forward: class distribution and the final (post-QFFN) state."""
        cache = self.forward_cache(sample, params)
        return ForwardResult(
            ClassDistribution(cache.probs), Statevector(self.n_qubits, cache.phi)
        )

    def loss(self, sample: Sequence[np.ndarray], label: int, params: ModelParams) -> float:
        return cross_entropy(self.forward(sample, params).distribution, label)

    def forward_circuit(self, sample: Sequence[np.ndarray], params: ModelParams) -> ForwardResult:
        """
        Circuit-realized forward: Hadamard tests for every <K_j|Q_k>, block
        encoding of each attention row, CLCU circuits for S, G and the head
        sum. Intermediate states become unitaries through exact state
        preparation. Intended for small verification configs.
        """
        feats = self._check_sample(sample)
        zero = zero_state(self.n_qubits)
        head_states = []
        for head_feats, hp in zip(feats, params.heads):
            uq = [self.qfm.bind(x, hp.qfm_q) for x in head_feats]
            uk = [self.qfm.bind(x, hp.qfm_k) for x in head_feats]
            uv = [self.qfm.bind(x, hp.qfm_v) for x in head_feats]
            a = attention_matrix_hadamard(uq, uk)
            if self.attention_mode == "real_overlap":
                a = a.real_overlap()
            s_states = []
            for row in a.entries:
                alphas = _reencode_row(row)
                s_states.append(self._clcu(alphas, uv, zero))
            preps = [build_state_prep(s.amps) for s in s_states]
            head_states.append(self._clcu(hp.beta, preps, zero))
        preps = [build_state_prep(g.amps) for g in head_states]
        psi = self._clcu(params.gamma, preps, zero)
        phi = self.qffn.bind((), params.qffn).run(psi)
        return ForwardResult(class_probs(phi, self.readout), phi)

    @staticmethod
    def _clcu(alphas, unitaries, start: Statevector) -> Statevector:
        try:
            out, _ = clcu_apply_circuit(
                ClcuCoefficients.from_alphas(alphas), unitaries, start
            )
        except (PostSelectionError, DegenerateCoefficientsError) as exc:
            raise SampleDegenerateError(f"CLCU stage failed: {exc}") from exc
        return out


def _reencode_row(row: np.ndarray) -> np.ndarray:
    """
    Block-encode one attention row and read the coefficients back from the
    post-selected amplitudes (equal to the row up to a positive scale).
    """
    m = row.shape[0]
    if m == 1:
        return row
    size = 1 << (m - 1).bit_length()
    padded = np.zeros(size, dtype=complex)
    padded[:m] = row
    try:
        encoded, _ = block_encode_weights(padded)
    except (PostSelectionError, DegenerateCoefficientsError) as exc:
        raise SampleDegenerateError(f"weight block encoding failed: {exc}") from exc
    return encoded.amps[:m]
