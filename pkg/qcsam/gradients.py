"""
Per-sample loss gradients.

``adjoint_gradient`` runs one reverse sweep over the cached forward:
readout, QFFN (gate-by-gate adjoint), the multi-head and patch
combinations with their normalizations, the attention matrix, and finally
the three QFM circuits of every head, evaluated for all patches at once.
Cotangents follow the convention dL = Re(<lambda|dz>).

``finite_difference_gradient`` is the central-difference fallback.
"""

from typing import Sequence, Tuple

import numpy as np

from qcsam.circuitlib import GENERATORS, PARAM, ParamCircuit
from qcsam.model import (
    PROB_FLOOR,
    ForwardCache,
    HeadCache,
    ModelParams,
    QcsamModel,
)
from qcsam.simcore import ROTATION_KINDS, GateOp, apply_gate_amps, apply_pauli_amps

GRADIENT_METHODS = ("adjoint", "finite_difference")
FD_STEP = 1e-5


def _apply_generator(amps: np.ndarray, n_qubits: int, gate: GateOp) -> np.ndarray:
    """-i/2 * P|amps> for the generator P of an uncontrolled rotation."""
    out = amps
    for factor, target in zip(GENERATORS[gate.kind], gate.targets):
        out = apply_gate_amps(out, n_qubits, GateOp(factor, (target,)))
    return -0.5j * out


def _circuit_adjoint(
    circ: ParamCircuit,
    angles: Sequence[object],
    final: np.ndarray,
    lam: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reverse sweep through ``circ`` given its output amplitudes and their
    cotangent (1-D or batched). Returns parameter gradients, summed over the
    batch, and the cotangent of the circuit input.
    """
    grads = np.zeros(circ.n_params)
    b = final
    for op, angle in zip(reversed(circ.ops), reversed(angles)):
        gate = op.gate
        if op.slot is not None and op.slot.family == PARAM:
            d = _apply_generator(b, circ.n_qubits, gate)
            grads[op.slot.index] += float(np.sum(np.conj(lam) * d).real)
        if gate.kind in ROTATION_KINDS:
            neg = -np.asarray(angle)
            b = apply_gate_amps(b, circ.n_qubits, gate, neg)
            lam = apply_gate_amps(lam, circ.n_qubits, gate, neg)
        else:
            inv = gate.dagger()
            b = apply_gate_amps(b, circ.n_qubits, inv)
            lam = apply_gate_amps(lam, circ.n_qubits, inv)
    return grads, lam


def _normalize_backward(z: np.ndarray, lam_z: np.ndarray, norm) -> np.ndarray:
    """Cotangent of w given z = w / |w| (row-wise for 2-D input)."""
    if z.ndim == 1:
        return (lam_z - np.vdot(z, lam_z).real * z) / norm
    proj = np.sum(np.conj(z) * lam_z, axis=1).real
    return (lam_z - proj[:, None] * z) / np.asarray(norm)[:, None]


def _weights_backward(lam: np.ndarray, states: np.ndarray, weights: np.ndarray):
    """
    For out = sum_j w_j states[j]: gradients with respect to (Re w_j, Im w_j)
    interleaved, and the cotangent of every state.
    """
    v = states @ lam.conj()
    pairs = np.stack([v.real, -v.imag], axis=-1).reshape(-1)
    lam_states = np.conj(weights)[:, None] * lam[None, :]
    return pairs, lam_states


def _readout_backward(model: QcsamModel, cache: ForwardCache, label: int) -> np.ndarray:
    probs = cache.probs
    if probs[label] < PROB_FLOOR:
        return np.zeros_like(cache.phi)
    d_e = np.full(len(model.readout), 1.0 / cache.denom)
    d_e[label] -= 1.0 / (1.0 + cache.expectations[label])
    lam = np.zeros_like(cache.phi)
    for coeff, m in zip(d_e, model.readout):
        lam += 2.0 * coeff * m.sign * apply_pauli_amps(cache.phi, model.n_qubits, m)
    return lam


def _head_backward(
    model: QcsamModel,
    feats: np.ndarray,
    hp,
    hc: HeadCache,
    lam_g_unit: np.ndarray,
) -> np.ndarray:
    lam_g = _normalize_backward(hc.g, lam_g_unit, hc.g_norm)
    beta_grad, lam_s_unit = _weights_backward(lam_g, hc.s, hp.beta)
    lam_s = _normalize_backward(hc.s, lam_s_unit, hc.s_norms)

    lam_v = hc.weights.conj().T @ lam_s
    lam_w = lam_s @ hc.v.conj().T
    if model.attention_mode == "real_overlap":
        lam_a = 2.0 * lam_w.real * hc.overlaps
    else:
        lam_a = lam_w
    lam_q = lam_a @ hc.k
    lam_k = lam_a.conj().T @ hc.q

    role_grads = []
    for role_params, final, lam in (
        (hp.qfm_q, hc.q, lam_q),
        (hp.qfm_k, hc.k, lam_k),
        (hp.qfm_v, hc.v, lam_v),
    ):
        angles = model.qfm.angles(feats, np.asarray(role_params, dtype=float))
        grads, _ = _circuit_adjoint(model.qfm, angles, final, lam)
        role_grads.append(grads)
    return np.concatenate(role_grads + [beta_grad])


def adjoint_gradient(
    model: QcsamModel, sample: Sequence[np.ndarray], label: int, params: ModelParams
) -> Tuple[float, np.ndarray]:
    """Loss and its gradient in the ModelParams.flatten() layout."""
    cache = model.forward_cache(sample, params)
    loss = float(-np.log(max(cache.probs[label], PROB_FLOOR)))

    lam_phi = _readout_backward(model, cache, label)
    qffn_angles = model.qffn.angles(np.zeros((1, 0)), np.asarray(params.qffn, dtype=float))
    qffn_grad, lam_psi = _circuit_adjoint(model.qffn, qffn_angles, cache.phi, lam_phi)

    lam_raw = _normalize_backward(cache.psi, lam_psi, cache.psi_norm)
    g_block = np.stack([hc.g for hc in cache.heads])
    gamma_grad, lam_gs = _weights_backward(lam_raw, g_block, params.gamma)

    chunks = []
    for feats, hp, hc, lam_g in zip(sample, params.heads, cache.heads, lam_gs):
        feats = np.atleast_2d(np.asarray(feats, dtype=float))
        chunks.append(_head_backward(model, feats, hp, hc, lam_g))
    chunks += [gamma_grad, qffn_grad]
    return loss, np.concatenate(chunks)


def finite_difference_gradient(
    model: QcsamModel,
    sample: Sequence[np.ndarray],
    label: int,
    params: ModelParams,
    step: float = FD_STEP,
) -> Tuple[float, np.ndarray]:
    """Central differences over every flattened parameter."""
    flat = params.flatten()
    loss = model.loss(sample, label, params)
    grad = np.zeros_like(flat)
    for i in range(flat.shape[0]):
        shifted = flat.copy()
        shifted[i] += step
        plus = model.loss(sample, label, model.unflatten(shifted))
        shifted[i] -= 2.0 * step
        minus = model.loss(sample, label, model.unflatten(shifted))
        grad[i] = (plus - minus) / (2.0 * step)
    return loss, grad


def sample_gradient(
    model: QcsamModel,
    sample: Sequence[np.ndarray],
    label: int,
    params: ModelParams,
    method: str = "adjoint",
) -> Tuple[float, np.ndarray]:
    if method == "adjoint":
        return adjoint_gradient(model, sample, label, params)
    if method == "finite_difference":
        return finite_difference_gradient(model, sample, label, params)
    raise ValueError(f"unknown gradient method {method!r}")
