"""Dense statevector simulation engine.

Provides gate application, exact diagonal-observable expectations, shot
sampling with readout error, and Monte Carlo Pauli-trajectory realisations
of per-gate depolarizing noise.

Conventions used throughout the package:

* Basis ordering is little-endian: qubit 0 is the least significant bit of
  the basis index, i.e. ``amplitudes[z]`` with ``z = sum(bit_q << q)``.
* Gate matrices use the same convention over their own target list:
  ``targets[0]`` is the least significant bit of the matrix index.
* Nothing here touches global numpy random state; every stochastic
  operation draws from an explicit :class:`RngStream`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

UNITARITY_TOL = 1e-10
NORM_TOL = 1e-10

_MASK64 = (1 << 64) - 1

_SQ2 = 1.0 / math.sqrt(2.0)

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)

#: Pauli matrices indexed 0..3 = I, X, Y, Z (trajectory noise draws these).
PAULIS = (_I2, _X, _Y, _Z)


class SimulationError(ValueError):
    """Raised for inconsistent gate/state/qubit-index combinations."""


class RngStream:
    """Deterministic random stream keyed by ``(master_seed, stream_id)``.

    Two streams constructed with equal keys produce identical draw
    sequences, independent of where or when they run.  ``stream_id`` may be
    a single integer (e.g. a trial index) or a tuple of integers for
    hierarchical derivation; it is fed to numpy's ``SeedSequence`` spawn
    key, so distinct keys give statistically independent streams.
    """

    def __init__(self, master_seed: int, stream_id: int | tuple[int, ...] = 0):
        self.master_seed = int(master_seed) & _MASK64
        if isinstance(stream_id, int):
            stream_id = (stream_id,)
        self.stream_id = tuple(int(s) for s in stream_id)
        self._gen: np.random.Generator | None = None

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            seq = np.random.SeedSequence(
                entropy=self.master_seed, spawn_key=self.stream_id
            )
            self._gen = np.random.Generator(np.random.PCG64(seq))
        return self._gen

    def child(self, *key: int) -> "RngStream":
        """Derived stream with ``key`` appended to this stream's id."""
        return RngStream(self.master_seed, self.stream_id + tuple(int(k) for k in key))

    def derive_seed(self) -> int:
        """A fresh 64-bit seed deterministically derived from this key.

        Does not consume from (or create) this stream's generator.
        """
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=self.stream_id)
        lo, hi = seq.generate_state(2, dtype=np.uint32)
        return int(lo) | (int(hi) << 32)

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"


@dataclass(frozen=True)
class NoiseModel:
    """Per-gate depolarizing noise plus independent readout bit flips.

    ``p1``/``p2`` are the depolarizing probabilities applied after each
    single-/multi-qubit gate.  ``depolarizing_scope`` selects how the
    channel ``(1-p) rho + p I/2^k`` is read: ``"global"`` depolarizes the
    whole register (k = number of circuit qubits, the reading under which
    traceless expectations scale exactly by ``(1-p1)^g1 (1-p2)^g2``);
    ``"local"`` depolarizes only the gate's own qubits.  ``p_readout`` is
    the per-measured-bit flip probability applied at sampling time only.
    """

    p1: float = 0.0
    p2: float = 0.0
    p_readout: float = 0.0
    depolarizing_scope: str = "global"

    def __post_init__(self):
        for name in ("p1", "p2", "p_readout"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.depolarizing_scope not in ("global", "local"):
            raise ValueError(f"unknown depolarizing_scope {self.depolarizing_scope!r}")

    @property
    def depolarizing_free(self) -> bool:
        return self.p1 == 0.0 and self.p2 == 0.0

    @property
    def noiseless(self) -> bool:
        return self.depolarizing_free and self.p_readout == 0.0


def _check_unitary(matrix: np.ndarray) -> None:
    dim = matrix.shape[0]
    if matrix.shape != (dim, dim) or dim & (dim - 1):
        raise SimulationError(f"gate matrix shape {matrix.shape} is not a 2^k square")
    dev = np.abs(matrix.conj().T @ matrix - np.eye(dim)).max()
    if dev >= UNITARITY_TOL:
        raise SimulationError(f"gate matrix is not unitary (max deviation {dev:.2e})")


@dataclass(frozen=True, eq=False)
class Gate:
    """A unitary applied to specific qubits.

    ``targets`` lists the qubits the dense ``matrix`` acts on, with
    ``targets[0]`` the least significant bit of the matrix index.  When
    ``control`` is set the gate is a controlled dense unitary: ``matrix``
    acts on ``targets`` only where the control qubit is 1.  ``weight`` is 1
    for single-qubit gates and 2 for anything larger (gate counting).
    """

    name: str
    targets: tuple[int, ...]
    matrix: np.ndarray
    control: int | None = None

    def __post_init__(self):
        targets = tuple(int(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        qubits = self.qubits
        if len(set(qubits)) != len(qubits):
            raise SimulationError(f"gate {self.name}: repeated qubit in {qubits}")
        if any(q < 0 for q in qubits):
            raise SimulationError(f"gate {self.name}: negative qubit index")
        if self.matrix.shape != (2 ** len(targets), 2 ** len(targets)):
            raise SimulationError(
                f"gate {self.name}: matrix shape {self.matrix.shape} does not "
                f"match {len(targets)} target(s)"
            )
        _check_unitary(self.matrix)

    @property
    def qubits(self) -> tuple[int, ...]:
        """All qubits the gate touches (control first, if any)."""
        if self.control is None:
            return self.targets
        return (self.control,) + self.targets

    @property
    def weight(self) -> int:
        return 1 if len(self.qubits) == 1 else 2

    def dagger(self) -> "Gate":
        return Gate(
            name=self.name + "†" if not self.name.endswith("†") else self.name[:-1],
            targets=self.targets,
            matrix=self.matrix.conj().T,
            control=self.control,
        )


def x(q: int) -> Gate:
    return Gate("x", (q,), _X)


def y(q: int) -> Gate:
    return Gate("y", (q,), _Y)


def z(q: int) -> Gate:
    return Gate("z", (q,), _Z)


def h(q: int) -> Gate:
    return Gate("h", (q,), _H)


def s(q: int) -> Gate:
    return Gate("s", (q,), _S)


def phase(q: int, lam: float) -> Gate:
    """diag(1, e^{i lam}) on qubit ``q`` (lam in radians)."""
    return Gate("phase", (q,), np.array([[1, 0], [0, np.exp(1j * lam)]], dtype=complex))


def ry(q: int, angle: float) -> Gate:
    """Real rotation about Y by ``angle`` radians."""
    c, sn = math.cos(angle / 2.0), math.sin(angle / 2.0)
    return Gate("ry", (q,), np.array([[c, -sn], [sn, c]], dtype=complex))


def cnot(control: int, target: int) -> Gate:
    # little-endian over (control, target): basis 1 = control set -> flips target
    m = np.array(
        [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
    )
    return Gate("cnot", (control, target), m)


def controlled_unitary(control: int, targets: Sequence[int], u: np.ndarray,
                       name: str = "cu") -> Gate:
    """Controlled dense unitary: ``u`` on ``targets`` where ``control`` is 1."""
    targets = tuple(targets)
    if control in targets:
        raise SimulationError("control qubit overlaps targets")
    return Gate(name, targets, np.asarray(u, dtype=complex), control=control)


@dataclass(frozen=True, eq=False)
class Circuit:
    """Ordered gate sequence on ``num_qubits`` qubits, applied to |0...0>."""

    num_qubits: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.num_qubits:
                raise SimulationError(
                    f"gate {g.name} on {g.qubits} exceeds register of "
                    f"{self.num_qubits} qubits"
                )

    def inverse(self) -> "Circuit":
        """Reversed-conjugate circuit; composing with self gives identity."""
        return Circuit(self.num_qubits, tuple(g.dagger() for g in reversed(self.gates)))

    def __len__(self) -> int:
        return len(self.gates)


@dataclass(eq=False)
class StateVector:
    """Complex amplitudes over the 2^n computational basis states."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.num_qubits < 1:
            raise SimulationError("num_qubits must be >= 1")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2 ** self.num_qubits,):
            raise SimulationError(
                f"amplitude length {self.amplitudes.shape} != 2^{self.num_qubits}"
            )

    @classmethod
    def zero(cls, num_qubits: int) -> "StateVector":
        amps = np.zeros(2 ** num_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def _apply_matrix(amps: np.ndarray, num_qubits: int, targets: Sequence[int],
                  matrix: np.ndarray) -> np.ndarray:
    """Apply a dense 2^k unitary to ``targets`` of a flat amplitude array."""
    k = len(targets)
    # reshaped axis of qubit q is num_qubits-1-q; feed axes most-significant
    # first so the flattened row index is little-endian over ``targets``
    axes = [num_qubits - 1 - q for q in reversed(targets)]
    psi = np.moveaxis(amps.reshape((2,) * num_qubits), axes, range(k))
    shape = psi.shape
    out = matrix @ psi.reshape(2 ** k, -1)
    out = np.moveaxis(out.reshape(shape), range(k), axes)
    return np.ascontiguousarray(out).reshape(-1)


def _apply_controlled_matrix(amps: np.ndarray, num_qubits: int, control: int,
                             targets: Sequence[int], matrix: np.ndarray) -> np.ndarray:
    """Apply ``matrix`` on ``targets`` restricted to the control=1 subspace."""
    k = len(targets)
    out = amps.copy()
    arr = out.reshape((2,) * num_qubits)
    caxis = num_qubits - 1 - control
    taxes = [num_qubits - 1 - q for q in reversed(targets)]
    moved = np.moveaxis(arr, [caxis] + taxes, range(k + 1))
    sub = moved[1]
    transformed = matrix @ sub.reshape(2 ** k, -1)
    sub[...] = transformed.reshape(sub.shape)
    return out


def _apply_gate_raw(amps: np.ndarray, num_qubits: int, gate: Gate) -> np.ndarray:
    if gate.control is None:
        return _apply_matrix(amps, num_qubits, gate.targets, gate.matrix)
    return _apply_controlled_matrix(amps, num_qubits, gate.control, gate.targets,
                                    gate.matrix)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Return a new state with ``gate`` applied; norm preserved to 1e-10."""
    if max(gate.qubits) >= state.num_qubits:
        raise SimulationError(
            f"gate {gate.name} on {gate.qubits} out of range for "
            f"{state.num_qubits}-qubit state"
        )
    amps = _apply_gate_raw(state.amplitudes, state.num_qubits, gate)
    new = StateVector(state.num_qubits, amps)
    if abs(new.norm_sq() - 1.0) >= NORM_TOL:
        raise SimulationError("gate application broke normalization")
    return new


def apply_controlled_unitary(state: StateVector, control: int,
                             targets: Sequence[int], u: np.ndarray) -> StateVector:
    """Apply dense ``u`` to ``targets`` where ``control`` reads 1."""
    return apply_gate(state, controlled_unitary(control, tuple(targets), u))


def run_circuit(circuit: Circuit, initial: StateVector | None = None) -> StateVector:
    """Evolve ``initial`` (default |0...0>) through the circuit, noiselessly."""
    if initial is None:
        amps = np.zeros(2 ** circuit.num_qubits, dtype=complex)
        amps[0] = 1.0
    else:
        if initial.num_qubits != circuit.num_qubits:
            raise SimulationError("initial state size does not match circuit")
        amps = initial.amplitudes.copy()
    for gate in circuit.gates:
        amps = _apply_gate_raw(amps, circuit.num_qubits, gate)
    return StateVector(circuit.num_qubits, amps)


def _bit_columns(indices: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Extract per-qubit bits of basis indices into a (len, k) uint8 matrix."""
    qubits = np.asarray(qubits, dtype=np.int64)
    return ((indices[:, None] >> qubits[None, :]) & 1).astype(np.uint8)


def _sub_indices(num_qubits: int, qubits: Sequence[int]) -> np.ndarray:
    """For every basis index z, the packed little-endian value of ``qubits``."""
    zs = np.arange(2 ** num_qubits, dtype=np.int64)
    sub = np.zeros_like(zs)
    for j, q in enumerate(qubits):
        sub |= ((zs >> q) & 1) << j
    return sub


def exact_pair_expectation(state: StateVector, decoder_a, qubits_a: Sequence[int],
                           decoder_b, qubits_b: Sequence[int]) -> float:
    """Exact <A B> for two diagonal +-1 decoders on disjoint qubit sets.

    Computes ``sum_z |amp_z|^2 a(z|qubits_a) b(z|qubits_b)`` with no
    sampling.  Decoders must be deterministic (see
    :func:`ewfs_lab.infer.decoder_as_diagonal`).
    """
    from .infer import decoder_as_diagonal  # local import avoids a cycle

    if set(qubits_a) & set(qubits_b):
        raise SimulationError("qubit lists overlap")
    probs = state.probabilities()
    va = decoder_as_diagonal(decoder_a)[_sub_indices(state.num_qubits, qubits_a)]
    vb = decoder_as_diagonal(decoder_b)[_sub_indices(state.num_qubits, qubits_b)]
    return float(np.sum(probs * va * vb))


def exact_single_expectation(state: StateVector, decoder, qubits: Sequence[int]) -> float:
    """Exact <A> of one diagonal +-1 decoder on ``qubits``."""
    from .infer import decoder_as_diagonal

    probs = state.probabilities()
    v = decoder_as_diagonal(decoder)[_sub_indices(state.num_qubits, qubits)]
    return float(np.sum(probs * v))


def sample_shots(state: StateVector, measured_qubits: Sequence[int],
                 p_readout: float, rng: RngStream, shots: int) -> np.ndarray:
    """Draw ``shots`` bitstrings from the Born distribution, then flip bits.

    Returns a (shots, len(measured_qubits)) uint8 matrix; column j is the
    outcome of ``measured_qubits[j]``.  Each bit is independently flipped
    with probability ``p_readout`` after sampling.
    """
    probs = state.probabilities()
    total = probs.sum()
    if abs(total - 1.0) > 1e-8:
        raise SimulationError(f"state not normalized (sum p = {total})")
    probs = probs / total
    idx = rng.gen.choice(probs.size, size=shots, p=probs)
    bits = _bit_columns(idx, measured_qubits)
    if p_readout > 0.0:
        flips = rng.gen.random(bits.shape) < p_readout
        bits ^= flips.astype(np.uint8)
    return bits


def sample_shot(state: StateVector, measured_qubits: Sequence[int],
                p_readout: float, rng: RngStream) -> np.ndarray:
    """Single-shot convenience wrapper around :func:`sample_shots`."""
    return sample_shots(state, measured_qubits, p_readout, rng, 1)[0]


def _insert_pauli(amps: np.ndarray, num_qubits: int, qubits: Sequence[int],
                  rng: RngStream) -> np.ndarray:
    """Apply an independently uniform Pauli (I/X/Y/Z) to each listed qubit."""
    draws = rng.gen.integers(0, 4, size=len(qubits))
    for q, p in zip(qubits, draws):
        if p:
            amps = _apply_matrix(amps, num_qubits, (q,), PAULIS[p])
    return amps


def run_noisy_trajectory(circuit: Circuit, noise: NoiseModel,
                         rng: RngStream) -> StateVector:
    """One stochastic-Pauli realisation of per-gate depolarizing noise.

    After each gate, with probability p1 (single-qubit gates) or p2
    (larger gates), a uniformly random Pauli string -- identity included --
    is applied over the whole register (``global`` scope) or over the
    gate's own qubits (``local`` scope).  Averaging trajectories converges
    to composing the depolarizing channel ``(1-p) rho + p I/2^k`` after
    each gate.
    """
    amps = np.zeros(2 ** circuit.num_qubits, dtype=complex)
    amps[0] = 1.0
    all_qubits = tuple(range(circuit.num_qubits))
    for gate in circuit.gates:
        amps = _apply_gate_raw(amps, circuit.num_qubits, gate)
        p = noise.p1 if gate.weight == 1 else noise.p2
        if p > 0.0 and rng.gen.random() < p:
            where = all_qubits if noise.depolarizing_scope == "global" else gate.qubits
            amps = _insert_pauli(amps, circuit.num_qubits, where, rng)
    return StateVector(circuit.num_qubits, amps)
