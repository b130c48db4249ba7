"""Exact density-matrix evolution for small-register cross-checks.

This is the analytic counterpart of the Pauli-trajectory noise machinery
in :mod:`ewfs_lab.qsim`: it composes the depolarizing channel exactly, so
trajectory averages can be validated against it.  Operators are expanded
to the full register by explicit bit arithmetic -- deliberately a separate
code path from the tensor-reshape application used by the statevector
engine.  Memory is O(4^n); keep it to a handful of qubits.
"""

from __future__ import annotations

import itertools

import numpy as np

from .qsim import PAULIS, Circuit, Gate, NoiseModel

_MAX_QUBITS = 6


def expand_operator(matrix: np.ndarray, targets: tuple[int, ...],
                    control: int | None, num_qubits: int) -> np.ndarray:
    """Full 2^n x 2^n operator for a (possibly controlled) small unitary."""
    dim = 2 ** num_qubits
    k = len(targets)
    full = np.zeros((dim, dim), dtype=complex)
    clear_mask = ~sum(1 << q for q in targets)
    for col in range(dim):
        if control is not None and not (col >> control) & 1:
            full[col, col] = 1.0
            continue
        sub_in = 0
        for j, q in enumerate(targets):
            sub_in |= ((col >> q) & 1) << j
        base = col & clear_mask
        for sub_out in range(2 ** k):
            row = base
            for j, q in enumerate(targets):
                row |= ((sub_out >> j) & 1) << q
            amp = matrix[sub_out, sub_in]
            if amp != 0:
                full[row, col] += amp
    return full


def _expand_gate(gate: Gate, num_qubits: int) -> np.ndarray:
    return expand_operator(gate.matrix, gate.targets, gate.control, num_qubits)


def depolarize(rho: np.ndarray, p: float, qubits: tuple[int, ...],
               num_qubits: int) -> np.ndarray:
    """Exact channel (1-p) rho + p * twirl(rho) over ``qubits``.

    The twirl averages conjugation by all Pauli strings on ``qubits``,
    which replaces that subsystem by the maximally mixed state.
    """
    if p == 0.0:
        return rho
    k = len(qubits)
    twirled = np.zeros_like(rho)
    for combo in itertools.product(range(4), repeat=k):
        op = np.eye(rho.shape[0], dtype=complex)
        for q, pauli in zip(qubits, combo):
            if pauli:
                op = expand_operator(PAULIS[pauli], (q,), None, num_qubits) @ op
        twirled += op @ rho @ op.conj().T
    twirled /= 4 ** k
    return (1.0 - p) * rho + p * twirled


def evolve_density(circuit: Circuit, noise: NoiseModel) -> np.ndarray:
    """Exact noisy density matrix of the circuit applied to |0...0>."""
    if circuit.num_qubits > _MAX_QUBITS:
        raise ValueError(
            f"density oracle limited to {_MAX_QUBITS} qubits "
            f"(got {circuit.num_qubits})"
        )
    dim = 2 ** circuit.num_qubits
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    all_qubits = tuple(range(circuit.num_qubits))
    for gate in circuit.gates:
        u = _expand_gate(gate, circuit.num_qubits)
        rho = u @ rho @ u.conj().T
        p = noise.p1 if gate.weight == 1 else noise.p2
        if p > 0.0:
            where = all_qubits if noise.depolarizing_scope == "global" else gate.qubits
            rho = depolarize(rho, p, where, circuit.num_qubits)
    return rho


def diagonal_expectation(rho: np.ndarray, valuation: np.ndarray) -> float:
    """tr(rho diag(valuation)) for a +-1 valuation over basis states."""
    return float(np.real(np.sum(np.diagonal(rho) * valuation)))
