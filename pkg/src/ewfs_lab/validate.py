"""Worst-case certification of violations and gate-count resource estimates.

A measured violation only certifies the target branch factor if it
survives the fraction 1 - q of runs where the friend state was prepared
wrong.  Treating invalid runs adversarially, a shifted inequality value
X~ (the LHS minus its offset) measured over data that is valid with
probability q bounds the valid-data value by

    X_valid >= (X~ + M (q - 1)) / q,

where M is twice the sum of coefficient magnitudes (M = 8 for the
four-correlator inequalities).  The preparation validity q itself is
estimated from gate counts under per-gate depolarizing noise:
q = (1 - p1)^singles * (1 - p2)^doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize as _sciopt

from .qsim import Circuit, NoiseModel
from .branch import generic_unitary_gate_bound

#: Default worst-case excursion factor: four correlator terms, each able to
#: swing an expectation across the full [-1, 1] range.
DEFAULT_EXCURSION = 8.0
#: Default violation threshold for the four-correlator inequalities.
DEFAULT_THRESHOLD = 2.0


@dataclass(frozen=True)
class GateCounts:
    """Single- and two-qubit gate counts after decomposition to 1q + CNOT.

    ``exact`` is False when any count came from a synthesis bound rather
    than an explicit decomposition (controlled dense unitaries).
    """

    singles: int
    doubles: int
    exact: bool = True

    def __post_init__(self):
        if self.singles < 0 or self.doubles < 0:
            raise ValueError("gate counts must be nonnegative")

    def __add__(self, other: "GateCounts") -> "GateCounts":
        return GateCounts(
            self.singles + other.singles,
            self.doubles + other.doubles,
            self.exact and other.exact,
        )


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the worst-case certification argument."""

    q: float
    x_tilde: float
    x_valid_lower: float
    q_min: float
    certified: bool


def worst_case_valid_x(x_tilde: float, q: float,
                       excursion: float = DEFAULT_EXCURSION) -> float:
    """Lower bound (x_tilde + excursion*(q-1)) / q on the valid-data value."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must lie in (0, 1] (got {q})")
    if abs(x_tilde) > excursion / 2.0 + 1e-9:
        raise ValueError(
            f"|x_tilde| = {abs(x_tilde)} exceeds the attainable range "
            f"{excursion / 2.0}"
        )
    return (x_tilde + excursion * (q - 1.0)) / q


def min_valid_probability(x_tilde_max: float,
                          excursion: float = DEFAULT_EXCURSION,
                          threshold: float = DEFAULT_THRESHOLD) -> float:
    """Smallest q for which the bound can still clear ``threshold``.

    Solving worst_case_valid_x(x_tilde_max, q) >= threshold gives
    q >= (excursion - x_tilde_max) / (excursion - threshold); for the
    four-correlator inequalities this is (8 - X~_max)/6.
    """
    if not threshold < x_tilde_max <= excursion / 2.0:
        raise ValueError(
            f"x_tilde_max must lie in ({threshold}, {excursion / 2.0}] "
            f"(got {x_tilde_max}); at or below {threshold} no q <= 1 suffices"
        )
    return (excursion - x_tilde_max) / (excursion - threshold)


def depolarizing_fidelity(counts: GateCounts, p1: float, p2: float) -> float:
    """(1-p1)^singles * (1-p2)^doubles.

    Under whole-register depolarizing after each gate this is both the
    surviving-state weight (the validity probability q) and the exact
    factor by which every traceless expectation is scaled.
    """
    if not (0.0 <= p1 < 1.0 and 0.0 <= p2 < 1.0):
        raise ValueError("gate error probabilities must lie in [0, 1)")
    return (1.0 - p1) ** counts.singles * (1.0 - p2) ** counts.doubles


def count_gates(circuit_or_gates) -> GateCounts:
    """Count 1q/2q gates; controlled dense unitaries use a synthesis bound.

    Explicit one- and two-qubit gates count exactly.  A controlled dense
    unitary on n target qubits is charged ceil((4^n - 3n - 1)/9) two-qubit
    gates -- the generic-synthesis lower bound -- and marks the counts as
    non-exact.
    """
    gates = getattr(circuit_or_gates, "gates", circuit_or_gates)
    singles = doubles = 0
    exact = True
    for gate in gates:
        qubits = gate.qubits
        if len(qubits) == 1:
            singles += 1
        elif gate.control is not None and len(gate.targets) > 1:
            doubles += math.ceil(generic_unitary_gate_bound(len(gate.targets)))
            exact = False
        elif len(qubits) == 2:
            doubles += 1
        else:
            raise ValueError(
                f"cannot count {len(qubits)}-qubit gate {gate.name!r} "
                "without a decomposition"
            )
    return GateCounts(singles, doubles, exact)


def certify(x_tilde_mean: float, x_tilde_std: float, counts: GateCounts,
            noise: NoiseModel, excursion: float = DEFAULT_EXCURSION,
            threshold: float = DEFAULT_THRESHOLD,
            x_tilde_max: float | None = None) -> ValidationReport:
    """Assemble the certification report for one measured violation.

    The validity probability comes from the friend-preparation gate
    counts; the worst-case bound consumes the 3-standard-deviation lower
    edge of the measured X~ (matching 3-sigma error bars).  ``certified``
    means the worst-case valid-data value still clears the threshold.
    """
    if x_tilde_max is None:
        x_tilde_max = threshold * math.sqrt(2.0)  # CHSH-type quantum maximum
    q = depolarizing_fidelity(counts, noise.p1, noise.p2)
    cap = excursion / 2.0
    low_edge = min(max(x_tilde_mean - 3.0 * x_tilde_std, -cap), cap)
    x_valid = worst_case_valid_x(low_edge, q, excursion)
    q_min = min_valid_probability(x_tilde_max, excursion, threshold)
    return ValidationReport(
        q=q,
        x_tilde=x_tilde_mean,
        x_valid_lower=x_valid,
        q_min=q_min,
        certified=bool(x_valid >= threshold),
    )


def max_two_qubit_error(counts: GateCounts, target: float,
                        p1_to_p2_ratio: float = 0.1) -> float:
    """Largest p2 keeping the depolarizing fidelity at or above ``target``.

    p1 is tied to p2 by ``p1 = p1_to_p2_ratio * p2`` (single-qubit gates
    are typically an order of magnitude cleaner).  Solved by bracketed
    root finding on the fidelity product.
    """
    if not 0.0 < target < 1.0:
        raise ValueError("target fidelity must lie in (0, 1)")

    def gap(p2: float) -> float:
        return depolarizing_fidelity(counts, p1_to_p2_ratio * p2, p2) - target

    upper = 0.999999 / max(1.0, p1_to_p2_ratio)
    if gap(upper) > 0.0:
        return upper
    return float(_sciopt.brentq(gap, 0.0, upper, xtol=1e-12))
