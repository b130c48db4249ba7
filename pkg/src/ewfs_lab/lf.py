"""Local-friendliness inequalities, their closed-form oracle, and angle search.

Each inequality is a linear combination of observer marginals <A_x>, <B_y>
and correlators <A_x B_y> plus a constant offset, bounded by 0 under local
friendliness; a positive left-hand side is a violation.

On the singlet with equatorial measurement bases, every marginal vanishes
and the correlators take the closed form <A_i B_j> = -cos(beta_j -
theta_i), which turns each left-hand side into a smooth function of six
angles; :func:`optimize_angles` maximises it by multi-start Nelder-Mead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as _sciopt

from .ewfs import MeasurementAngles


class MissingExpectationError(ValueError):
    """An inequality referenced an expectation that was never measured."""


@dataclass(frozen=True)
class InequalitySpec:
    """Coefficients of one inequality: sum(coeff * expectation) + offset <= 0."""

    name: str
    a_coeffs: tuple[float, float, float]
    b_coeffs: tuple[float, float, float]
    ab_coeffs: tuple[tuple[float, float, float], ...]
    offset: float

    def required_pairs(self) -> tuple[tuple[int, int], ...]:
        """Setting pairs (1-based) with nonzero correlator coefficient."""
        return tuple(
            (i + 1, j + 1)
            for i in range(3)
            for j in range(3)
            if self.ab_coeffs[i][j] != 0.0
        )

    def abs_coeff_sum(self) -> float:
        """Sum of |coefficients| over all marginal and correlator terms."""
        return float(
            sum(abs(c) for c in self.a_coeffs)
            + sum(abs(c) for c in self.b_coeffs)
            + sum(abs(c) for row in self.ab_coeffs for c in row)
        )

    def violation_threshold(self) -> float:
        """The coefficient-sum value the LHS-minus-offset must reach: -offset."""
        return -self.offset


GENUINE_LF = InequalitySpec(
    "genuine_lf",
    a_coeffs=(-1.0, -1.0, 0.0),
    b_coeffs=(-1.0, -1.0, 0.0),
    ab_coeffs=((-1.0, -2.0, 0.0), (-2.0, 2.0, -1.0), (0.0, -1.0, -1.0)),
    offset=-6.0,
)

BELL_I3322 = InequalitySpec(
    "bell_i3322",
    a_coeffs=(-1.0, 1.0, 0.0),
    b_coeffs=(1.0, -1.0, 0.0),
    ab_coeffs=((1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 0.0)),
    offset=-4.0,
)

BRUKNER = InequalitySpec(
    "brukner",
    a_coeffs=(0.0, 0.0, 0.0),
    b_coeffs=(0.0, 0.0, 0.0),
    ab_coeffs=((1.0, 0.0, -1.0), (-1.0, 0.0, -1.0), (0.0, 0.0, 0.0)),
    offset=-2.0,
)

SEMI_BRUKNER = InequalitySpec(
    "semi_brukner",
    a_coeffs=(0.0, 0.0, 0.0),
    b_coeffs=(0.0, 0.0, 0.0),
    ab_coeffs=((0.0, -1.0, 1.0), (0.0, 0.0, 0.0), (0.0, -1.0, -1.0)),
    offset=-2.0,
)

BELL_NON_LF = InequalitySpec(
    "bell_non_lf",
    a_coeffs=(0.0, 0.0, 0.0),
    b_coeffs=(0.0, 0.0, 0.0),
    ab_coeffs=((0.0, 0.0, 0.0), (0.0, 1.0, -1.0), (0.0, -1.0, -1.0)),
    offset=-2.0,
)

INEQUALITIES: dict[str, InequalitySpec] = {
    spec.name: spec
    for spec in (GENUINE_LF, BELL_I3322, BRUKNER, SEMI_BRUKNER, BELL_NON_LF)
}


@dataclass
class ExpectationTable:
    """Estimated marginals and correlators, with optional per-trial records.

    ``a``/``b`` hold <A_x>/<B_y> (index 0 = setting 1), ``ab`` the 3x3
    correlators, ``available`` masks which setting pairs were actually
    measured.  A marginal counts as available when any pair in its row
    (column) was measured.  When built from trials, ``trial_*`` stack the
    per-trial estimates so inequality statistics can be propagated from
    per-trial left-hand sides.
    """

    a: np.ndarray
    b: np.ndarray
    ab: np.ndarray
    available: np.ndarray
    trial_a: np.ndarray | None = None
    trial_b: np.ndarray | None = None
    trial_ab: np.ndarray | None = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).reshape(3)
        self.b = np.asarray(self.b, dtype=float).reshape(3)
        self.ab = np.asarray(self.ab, dtype=float).reshape(3, 3)
        self.available = np.asarray(self.available, dtype=bool).reshape(3, 3)
        tol = 1e-9
        if (np.abs(self.a) > 1 + tol).any() or (np.abs(self.b) > 1 + tol).any() \
                or (np.abs(self.ab) > 1 + tol).any():
            raise ValueError("expectation values must lie in [-1, 1]")

    @property
    def trial_count(self) -> int:
        return 0 if self.trial_ab is None else self.trial_ab.shape[0]

    @classmethod
    def full(cls, a, b, ab) -> "ExpectationTable":
        return cls(a=a, b=b, ab=ab, available=np.ones((3, 3), dtype=bool))

    @classmethod
    def from_trials(cls, trial_a: np.ndarray, trial_b: np.ndarray,
                    trial_ab: np.ndarray, available: np.ndarray) -> "ExpectationTable":
        trial_a = np.asarray(trial_a, dtype=float)
        trial_b = np.asarray(trial_b, dtype=float)
        trial_ab = np.asarray(trial_ab, dtype=float)
        return cls(
            a=trial_a.mean(axis=0),
            b=trial_b.mean(axis=0),
            ab=trial_ab.mean(axis=0),
            available=available,
            trial_a=trial_a,
            trial_b=trial_b,
            trial_ab=trial_ab,
        )

    def marginal_a_available(self, i: int) -> bool:
        return bool(self.available[i].any())

    def marginal_b_available(self, j: int) -> bool:
        return bool(self.available[:, j].any())


def _check_coverage(spec: InequalitySpec, table: ExpectationTable) -> None:
    for i in range(3):
        if spec.a_coeffs[i] != 0.0 and not table.marginal_a_available(i):
            raise MissingExpectationError(f"{spec.name} needs <A_{i + 1}>")
        if spec.b_coeffs[i] != 0.0 and not table.marginal_b_available(i):
            raise MissingExpectationError(f"{spec.name} needs <B_{i + 1}>")
    for i in range(3):
        for j in range(3):
            if spec.ab_coeffs[i][j] != 0.0 and not table.available[i, j]:
                raise MissingExpectationError(
                    f"{spec.name} needs <A_{i + 1} B_{j + 1}>"
                )


def _combine(spec: InequalitySpec, a: np.ndarray, b: np.ndarray,
             ab: np.ndarray) -> float:
    value = float(np.dot(spec.a_coeffs, a) + np.dot(spec.b_coeffs, b))
    value += float(np.sum(np.asarray(spec.ab_coeffs) * ab))
    return value + spec.offset


def evaluate(spec: InequalitySpec, table: ExpectationTable) -> float:
    """Left-hand side of the inequality; values above 0 are violations."""
    _check_coverage(spec, table)
    return _combine(spec, table.a, table.b, table.ab)


def evaluate_trials(spec: InequalitySpec, table: ExpectationTable) -> np.ndarray:
    """Per-trial left-hand sides (requires a table built from trials)."""
    _check_coverage(spec, table)
    if table.trial_ab is None:
        raise ValueError("table carries no per-trial records")
    return np.array([
        _combine(spec, table.trial_a[t], table.trial_b[t], table.trial_ab[t])
        for t in range(table.trial_count)
    ])


def lhs_statistics(spec: InequalitySpec, table: ExpectationTable) -> tuple[float, float]:
    """(mean, sample std) of the LHS, from per-trial values when present.

    With no trial records the point value is returned with zero spread.
    Reported error bars elsewhere default to 3 standard deviations.
    """
    if table.trial_ab is not None and table.trial_count > 1:
        values = evaluate_trials(spec, table)
        return float(values.mean()), float(values.std(ddof=1))
    return evaluate(spec, table), 0.0


def analytic_expectations(angles: MeasurementAngles) -> ExpectationTable:
    """The singlet closed form: zero marginals, ab[i][j] = -cos(beta_j - theta_i)."""
    theta = np.radians(np.asarray(angles.theta))
    beta = np.radians(np.asarray(angles.beta))
    ab = -np.cos(beta[None, :] - theta[:, None])
    return ExpectationTable.full(np.zeros(3), np.zeros(3), ab)


def _analytic_lhs(spec: InequalitySpec, theta_rad: np.ndarray,
                  beta_rad: np.ndarray) -> float:
    ab = -np.cos(beta_rad[None, :] - theta_rad[:, None])
    return float(np.sum(np.asarray(spec.ab_coeffs) * ab)) + spec.offset


def optimize_angles(spec: InequalitySpec, n_starts: int = 64, seed: int = 0,
                    tol: float = 1e-7) -> tuple[MeasurementAngles, float]:
    """Maximise the closed-form LHS over the six free angles.

    Multi-start derivative-free search: ``n_starts`` uniform random starts
    (deterministic per seed), each refined by Nelder-Mead to ``tol`` on the
    objective.  Among starts whose objectives tie within 1e-9 the lowest
    start index wins, so results are reproducible.
    """
    if n_starts < 1:
        raise ValueError("need at least one start")
    gen = np.random.default_rng(seed)
    starts = gen.uniform(0.0, 2.0 * math.pi, size=(n_starts, 6))

    def objective(v: np.ndarray) -> float:
        return -_analytic_lhs(spec, v[:3], v[3:])

    best_val = -math.inf
    best_x = None
    for x0 in starts:
        res = _sciopt.minimize(
            objective, x0, method="Nelder-Mead",
            options={"fatol": tol * 1e-2, "xatol": 1e-8,
                     "maxiter": 4000, "maxfev": 6000},
        )
        if -res.fun > best_val + 1e-9:
            best_val = -res.fun
            best_x = res.x
    theta = tuple(math.degrees(v) % 360.0 for v in best_x[:3])
    beta = tuple(math.degrees(v) % 360.0 for v in best_x[3:])
    return MeasurementAngles(theta=theta, beta=beta), float(best_val)
