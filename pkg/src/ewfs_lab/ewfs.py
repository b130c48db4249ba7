"""Construction of Extended Wigner's Friend Scenario circuits.

The circuit template: a two-qubit singlet is shared between system qubits
S_C (Alice/Charlie side) and S_D (Bob/Debbie side).  Each friend measures
its system qubit in its setting-1 basis -- realised as a basis-change
rotation on the system qubit followed by a controlled "record" unitary
onto the friend register.  The observers then either PEEK (read the friend
register directly) or REVERSE (undo the friend unitary and re-measure the
system qubit in a rotated basis).

Angles are degrees at every public interface; radians internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Union

import numpy as np

from . import qsim
from .qsim import Circuit, Gate, RngStream, SimulationError, StateVector

#: Dense-matrix feasibility bound for controlled friend unitaries.
MAX_DENSE_FRIEND = 12


@dataclass(frozen=True)
class Ghz:
    """CNOT-ladder friend: branches are |0...0> and |1...1>."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"Ghz register size must be >= 1 (got {self.n})")


@dataclass(frozen=True)
class RandomUnitary:
    """Friend recorded by a controlled Haar-random unitary (seeded)."""

    n: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"register size must be >= 1 (got {self.n})")
        if self.n > MAX_DENSE_FRIEND:
            raise ValueError(
                f"RandomUnitary limited to {MAX_DENSE_FRIEND} qubits "
                f"(dense 2^n matrix; got {self.n})"
            )


@dataclass(frozen=True)
class Dicke:
    """Friend recorded into the equal superposition of weight-k bitstrings."""

    n: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k < self.n:
            raise ValueError(f"Dicke needs 1 <= k < n (got n={self.n}, k={self.k})")


FriendKind = Union[Ghz, RandomUnitary, Dicke]


def friend_kind_name(kind: FriendKind) -> str:
    return {Ghz: "ghz", RandomUnitary: "random_unitary", Dicke: "dicke"}[type(kind)]


class Setting(IntEnum):
    """Observer measurement settings; 1 reads the friend, 2/3 reverse it."""

    PEEK = 1
    REVERSE1 = 2
    REVERSE2 = 3


@dataclass(frozen=True)
class MeasurementAngles:
    """Three Alice angles (theta) and three Bob angles (beta), in degrees."""

    theta: tuple[float, float, float]
    beta: tuple[float, float, float]

    def __post_init__(self):
        for name in ("theta", "beta"):
            vals = getattr(self, name)
            if len(vals) != 3 or not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{name} must be three finite angles")
            object.__setattr__(self, name, tuple(float(v) % 360.0 for v in vals))

    def theta_rad(self, setting: int) -> float:
        return math.radians(self.theta[setting - 1])

    def beta_rad(self, setting: int) -> float:
        return math.radians(self.beta[setting - 1])

    @classmethod
    def legacy(cls) -> "MeasurementAngles":
        """Historic three-setting assignment (168/0/118, beta = 220 - theta).

        Chosen in the original photonic experiment to violate the
        friendliness inequalities while satisfying Bell-local ones; kept as
        a named preset, not as a violation-maximising choice.
        """
        theta = (168.0, 0.0, 118.0)
        return cls(theta=theta, beta=tuple(220.0 - t for t in theta))

    @classmethod
    def chsh_optimal(cls) -> "MeasurementAngles":
        """Angles attaining 2*sqrt(2) - 2 on the four-correlator inequalities.

        theta_1=0, theta_3=90, beta_2=45, beta_3=135 is the standard
        CHSH-optimal assignment for the semi-Brukner form; the remaining
        two angles are placed to keep Brukner and Bell-non-LF at their
        optima as well.
        """
        return cls(theta=(0.0, 45.0, 90.0), beta=(90.0, 45.0, 135.0))


@dataclass(frozen=True, eq=False)
class EwfsCircuit:
    """A built scenario circuit plus its measurement bookkeeping."""

    circuit: Circuit
    alice_measured_qubits: tuple[int, ...]
    bob_measured_qubits: tuple[int, ...]
    qubit_layout: dict

    def __post_init__(self):
        roles = [tuple(v) if isinstance(v, (list, tuple)) else (v,)
                 for v in self.qubit_layout.values()]
        flat = [q for role in roles for q in role]
        if len(set(flat)) != len(flat) or set(flat) != set(range(self.circuit.num_qubits)):
            raise SimulationError("qubit layout roles must partition the register")


def basis_change_gate(theta_deg: float, qubit: int = 0) -> Gate:
    """The rotation M(theta) sending the theta-basis to the computational one.

    M(theta) = H diag(1, e^{-i theta}), so a computational-basis
    measurement after it realises the +-1 observable onto the equatorial
    basis (|0> +- e^{i theta}|1>)/sqrt(2), outcome 0 <-> +1.
    """
    theta = math.radians(theta_deg)
    m = _H2 @ np.diag([1.0, np.exp(-1j * theta)])
    return Gate("m", (qubit,), m)


_H2 = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)


def rebase_gate(old_deg: float, new_deg: float, qubit: int) -> Gate:
    """Re-measurement rotation M(new) M(old)^dag = H diag(1, e^{-i delta}) H.

    Emitted as one gate: after a reversal the system qubit is still
    expressed in the friend's ``old`` basis, and this maps it directly
    into the ``new`` measurement basis.
    """
    delta = math.radians(new_deg - old_deg)
    m = _H2 @ np.diag([1.0, np.exp(-1j * delta)]) @ _H2
    return Gate("rebase", (qubit,), m)


def singlet_prep(q_a: int = 0, q_b: int = 1) -> tuple[Gate, ...]:
    """Gates preparing the singlet (amplitudes [0, +1, -1, 0]/sqrt(2)) on |00>."""
    return (qsim.h(q_a), qsim.cnot(q_a, q_b), qsim.ry(q_b, -math.pi))


def haar_unitary(n: int, seed: int) -> np.ndarray:
    """Haar-distributed 2^n x 2^n unitary, deterministic per seed.

    Ginibre matrix -> QR -> phase fix by the diagonal of R (the standard
    orthonormalisation construction giving exact Haar measure).
    """
    if n > MAX_DENSE_FRIEND:
        raise ValueError(f"haar_unitary limited to {MAX_DENSE_FRIEND} qubits")
    gen = RngStream(seed).gen
    dim = 2 ** n
    zmat = (gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim)))
    q, r = np.linalg.qr(zmat)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases[None, :]


def dicke_state(n: int, k: int) -> StateVector:
    """Equal superposition of all weight-k basis strings on n qubits."""
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n (got n={n}, k={k})")
    if n > 20:
        raise ValueError("dicke_state limited to 20 qubits")
    zs = np.arange(2 ** n, dtype=np.int64)
    weights = np.zeros(zs.shape, dtype=np.int64)
    for b in range(n):
        weights += (zs >> b) & 1
    amps = np.where(weights == k, 1.0, 0.0).astype(complex)
    amps /= math.sqrt(math.comb(n, k))
    return StateVector(n, amps)


def dicke_prep_unitary(n: int, k: int) -> np.ndarray:
    """A unitary whose first column is the Dicke state D(n, k).

    Householder reflection V = I - w w^dag with w = e0 - d: real,
    symmetric, orthogonal, and V|0...0> = D(n, k).
    """
    if n > MAX_DENSE_FRIEND:
        raise ValueError(f"dense Dicke prep limited to {MAX_DENSE_FRIEND} qubits")
    d = dicke_state(n, k).amplitudes.real
    w = -d.copy()
    w[0] += 1.0
    return np.eye(2 ** n) - np.outer(w, w)


def friend_unitary(kind: FriendKind, system: int, register: tuple[int, ...]) -> tuple[Gate, ...]:
    """The friend's recording unitary, controlled from ``system``.

    Ghz(n): the chained CNOT ladder CNOT(system, f1), CNOT(f1, f2), ...,
    CNOT(f_{n-1}, f_n).  RandomUnitary / Dicke: a single controlled dense
    unitary preparing the friend's branch-1 state on the register.
    """
    if len(register) != kind.n:
        raise SimulationError(
            f"register size {len(register)} does not match friend kind {kind}"
        )
    if isinstance(kind, Ghz):
        chain = (system,) + tuple(register)
        return tuple(qsim.cnot(chain[i], chain[i + 1]) for i in range(kind.n))
    if isinstance(kind, RandomUnitary):
        u = haar_unitary(kind.n, kind.seed)
        return (qsim.controlled_unitary(system, register, u, name="c-haar"),)
    if isinstance(kind, Dicke):
        v = dicke_prep_unitary(kind.n, kind.k)
        return (qsim.controlled_unitary(system, register, v, name="c-dicke"),)
    raise SimulationError(f"unknown friend kind {kind!r}")


def _observer_gates(setting: Setting, angles_deg: tuple[float, float, float],
                    system: int, kind: FriendKind, register: tuple[int, ...]):
    """Setting-dependent tail gates and the measured qubits for one side."""
    if setting is Setting.PEEK:
        return (), register
    undo = Circuit(max(register) + 1,
                   friend_unitary(kind, system, register)).inverse().gates
    rotation = rebase_gate(angles_deg[0], angles_deg[setting - 1], system)
    return undo + (rotation,), (system,)


def build_ewfs_circuit(kind_charlie: FriendKind, kind_debbie: FriendKind,
                       angles: MeasurementAngles, x: Setting, y: Setting) -> EwfsCircuit:
    """Assemble the full scenario circuit for one setting pair (x, y).

    Layout: qubit 0 = S_C, qubit 1 = S_D, then Charlie's register, then
    Debbie's.  Both friends measure in their setting-1 basis before the
    controlled record; REVERSE settings undo the record and re-measure the
    system qubit in the setting's basis.
    """
    x, y = Setting(x), Setting(y)
    n_c, n_d = kind_charlie.n, kind_debbie.n
    charlie = tuple(range(2, 2 + n_c))
    debbie = tuple(range(2 + n_c, 2 + n_c + n_d))
    num_qubits = 2 + n_c + n_d

    gates: list[Gate] = list(singlet_prep(0, 1))
    gates.append(basis_change_gate(angles.theta[0], 0))
    gates.append(basis_change_gate(angles.beta[0], 1))
    gates.extend(friend_unitary(kind_charlie, 0, charlie))
    gates.extend(friend_unitary(kind_debbie, 1, debbie))

    alice_tail, alice_measured = _observer_gates(x, angles.theta, 0, kind_charlie, charlie)
    bob_tail, bob_measured = _observer_gates(y, angles.beta, 1, kind_debbie, debbie)
    gates.extend(alice_tail)
    gates.extend(bob_tail)

    return EwfsCircuit(
        circuit=Circuit(num_qubits, tuple(gates)),
        alice_measured_qubits=alice_measured,
        bob_measured_qubits=bob_measured,
        qubit_layout={"s_c": (0,), "s_d": (1,), "charlie": charlie, "debbie": debbie},
    )


def friend_preparation_gates(kind_charlie: FriendKind, kind_debbie: FriendKind) -> tuple[Gate, ...]:
    """Just the two friend-record unitaries (the state-preparation segment).

    This is the segment whose gate counts bound the prepared-friend
    fidelity in the validation argument.
    """
    n_c = kind_charlie.n
    charlie = tuple(range(2, 2 + n_c))
    debbie = tuple(range(2 + n_c, 2 + n_c + kind_debbie.n))
    return friend_unitary(kind_charlie, 0, charlie) + friend_unitary(kind_debbie, 1, debbie)
