"""Branch-factor calculators for the supported friend families.

The branch factor of a friend's two pointer states is its interference
complexity minus its distinguishability complexity (at discrimination
level delta = 1 throughout): high values mean the record is easy to read
out but hard to interfere, i.e. behaves like a classical observer's
memory.  Exact values are only claimed where they can be derived; bounds
and asymptotic orders carry explicit flags and are never presented as
exact.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ewfs import Dicke, FriendKind, Ghz, RandomUnitary

EXACT = "exact"
LOWER_BOUND = "lower_bound"
UPPER_BOUND = "upper_bound"
ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class ComplexityBound:
    """A complexity value qualified by how it was obtained."""

    value: float
    flag: str

    def __post_init__(self):
        if self.flag not in (EXACT, LOWER_BOUND, UPPER_BOUND, ASYMPTOTIC):
            raise ValueError(f"unknown flag {self.flag!r}")


@dataclass(frozen=True)
class BranchFactorReport:
    """Interference/distinguishability complexities and their difference."""

    c_interference: ComplexityBound
    c_distinguishability: ComplexityBound
    branch_factor: ComplexityBound
    friend: object
    delta: float = 1.0


def _difference_flag(ci_flag: str, cd_flag: str) -> str:
    # exact - exact stays exact; any asymptotic input keeps the result
    # asymptotic; a lower bound on C_I minus an upper bound on C_D is a
    # lower bound on the difference.
    if ASYMPTOTIC in (ci_flag, cd_flag):
        return ASYMPTOTIC
    if ci_flag == EXACT and cd_flag == EXACT:
        return EXACT
    return LOWER_BOUND


def _report(friend, ci: ComplexityBound, cd: ComplexityBound) -> BranchFactorReport:
    value = ci.value - cd.value
    flag = _difference_flag(ci.flag, cd.flag)
    if flag == LOWER_BOUND:
        value = max(0.0, value)
    return BranchFactorReport(ci, cd, ComplexityBound(value, flag), friend)


def generic_unitary_gate_bound(n: int) -> float:
    """(4^n - 3n - 1)/9: dimension-counting lower bound for a dense n-qubit unitary."""
    return (4 ** n - 3 * n - 1) / 9.0


def branch_factor(kind: FriendKind) -> BranchFactorReport:
    """Branch-factor report for one friend family at delta = 1.

    Ghz(n): interfering |0^n> with |1^n> takes weight n (pairwise X x X
    flips plus one leftover X for odd n) while a single Z distinguishes
    them, so C_I = n, C_D = 1, B = n - 1, all exact.

    RandomUnitary(n): the branch-1 state is generic, so C_I inherits the
    dimension-counting bound (4^n - 3n - 1)/9, C_D <= n, and the branch
    factor is lower-bounded by their difference (clamped at zero for
    small n, flag retained).

    Dicke(n, k): preparation circuits of weight order k*n are known and
    assumed tight, while a constant number of single-qubit reads already
    distinguishes the branches; values are order-of-growth proxies with
    unit constants, flagged asymptotic.
    """
    if isinstance(kind, Ghz):
        return _report(
            kind,
            ComplexityBound(float(kind.n), EXACT),
            ComplexityBound(1.0, EXACT),
        )
    if isinstance(kind, RandomUnitary):
        ci = max(0.0, generic_unitary_gate_bound(kind.n))
        return _report(
            kind,
            ComplexityBound(ci, LOWER_BOUND),
            ComplexityBound(float(kind.n), UPPER_BOUND),
        )
    if isinstance(kind, Dicke):
        return _report(
            kind,
            ComplexityBound(float(kind.k * kind.n), ASYMPTOTIC),
            ComplexityBound(1.0, ASYMPTOTIC),
        )
    raise TypeError(f"unknown friend kind {kind!r}")


def two_random_circuit_bounds(n: int, d0: int, d1: int) -> BranchFactorReport:
    """Order-of-growth report for two random circuit states of depths d0, d1.

    C_I grows like (d0 + d1) * n and C_D like min(d0, d1) * n; reported
    with unit constants and flagged asymptotic.
    """
    if n < 1 or d0 < 0 or d1 < 0:
        raise ValueError("need n >= 1 and nonnegative depths")
    ci = ComplexityBound(float((d0 + d1) * n), ASYMPTOTIC)
    cd = ComplexityBound(float(min(d0, d1) * n), ASYMPTOTIC)
    label = f"two_random_circuits(n={n}, d0={d0}, d1={d1})"
    return _report(label, ci, cd)
