"""Experiment harness: configs, runners, sweeps, and record emission.

An experiment fixes two friends, six angles, one inequality, a noise
model, and a sampling budget.  For every setting pair the inequality
needs, the scenario circuit is built and its expectations estimated in
one of three modes:

* ``exact``       -- noiseless diagonal expectations (the analytic oracle);
* ``analytic_scaled`` -- closed-form values scaled per pair by the
  whole-register depolarizing product over that pair's gate counts;
* ``sampled``     -- shot sampling with readout flips, using Pauli
  trajectories when depolarizing noise is on.

All randomness derives from ``(master_seed, structured stream ids)``, so a
record is reproducible byte-for-byte at any parallelism level.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import branch as branch_mod
from . import infer, lf, qsim, validate
from .ewfs import (Dicke, FriendKind, Ghz, MeasurementAngles, RandomUnitary,
                   Setting, build_ewfs_circuit, friend_kind_name,
                   friend_preparation_gates)

MODES = ("exact", "analytic_scaled", "sampled")

# stream-id namespaces
_NS_SAMPLING = 1
_NS_DECODER = 2
_NS_FRIEND = 3
_NS_SWEEP = 4


class ConfigError(ValueError):
    """Raised when an experiment configuration is inconsistent."""


@dataclass(frozen=True)
class EwfsConfig:
    """Full description of one violation experiment."""

    friend_charlie: FriendKind
    friend_debbie: FriendKind = Ghz(1)
    angles: MeasurementAngles = field(default_factory=MeasurementAngles.chsh_optimal)
    inequality: str = "semi_brukner"
    mode: str = "sampled"
    noise: qsim.NoiseModel = field(default_factory=qsim.NoiseModel)
    shots: int = 10000
    trials: int = 10
    master_seed: int = 0
    decoder_peek: str | None = None
    shots_per_trajectory: int = 1
    random_single_per_shot: bool = False
    validation_scope: str = "friend_prep"
    total_qubit_cap: int = 24

    @property
    def total_qubits(self) -> int:
        return 2 + self.friend_charlie.n + self.friend_debbie.n

    def peek_strategy(self) -> str:
        if self.decoder_peek is not None:
            return self.decoder_peek
        return infer.default_peek_strategy(self.friend_charlie)


def validate_config(config: EwfsConfig) -> None:
    if config.inequality not in lf.INEQUALITIES:
        raise ConfigError(f"unknown inequality {config.inequality!r}")
    if config.mode not in MODES:
        raise ConfigError(f"unknown mode {config.mode!r} (expected one of {MODES})")
    if config.shots < 1 or config.trials < 1 or config.shots_per_trajectory < 1:
        raise ConfigError("shots, trials and shots_per_trajectory must be >= 1")
    if config.total_qubits > config.total_qubit_cap:
        raise ConfigError(
            f"{config.total_qubits} qubits exceeds the cap of "
            f"{config.total_qubit_cap} (statevector memory); raise total_qubit_cap "
            "explicitly if you mean it"
        )
    if config.inequality == "semi_brukner" and config.friend_debbie.n != 1:
        raise ConfigError(
            "semi_brukner has no B_1 term, so Debbie is a single qubit; "
            f"got a {config.friend_debbie.n}-qubit Debbie"
        )
    if config.validation_scope not in ("friend_prep", "whole_circuit"):
        raise ConfigError(f"unknown validation_scope {config.validation_scope!r}")
    strategy = config.peek_strategy()
    if strategy not in infer.DECODER_NAMES:
        raise ConfigError(f"unknown decoder {strategy!r}")
    if config.mode == "exact":
        if not config.noise.noiseless:
            raise ConfigError("exact mode is the noiseless analytic oracle; "
                              "use analytic_scaled or sampled for noise")
        if strategy == "random_single":
            raise ConfigError("exact mode needs a deterministic decoder")
    if config.mode == "analytic_scaled":
        if config.noise.p_readout != 0.0:
            raise ConfigError("analytic_scaled covers depolarizing noise only")
        if config.noise.depolarizing_scope != "global":
            raise ConfigError("the closed-form scaling law holds for global "
                              "depolarizing scope only")
    # fail early on decoder/register mismatches (e.g. even-register majority vote)
    _needs_bob_peek = any(
        j == 1 for _, j in lf.INEQUALITIES[config.inequality].required_pairs()
    )
    infer.make_decoder(strategy, config.friend_charlie.n)
    if _needs_bob_peek:
        infer.make_decoder(strategy, config.friend_debbie.n)


@dataclass(frozen=True)
class PairStats:
    """Per-setting-pair expectation statistics across trials."""

    ab_mean: float
    ab_std: float
    a_mean: float
    b_mean: float


@dataclass(frozen=True)
class ResultRecord:
    """Everything one experiment produced, reproducible given its config."""

    config: EwfsConfig
    pair_stats: dict
    lhs_mean: float
    lhs_std: float
    violated: bool
    branch: branch_mod.BranchFactorReport
    validation: validate.ValidationReport
    prep_counts: validate.GateCounts
    wall_time_s: float


@dataclass(frozen=True)
class FailedCell:
    """A sweep cell that raised; sweeps record it and keep going."""

    config: EwfsConfig
    category: str
    message: str


def _trial_friend(kind: FriendKind, side: int, trial: int) -> FriendKind:
    """Per-trial friend: random-unitary friends redraw their unitary each trial.

    Violation statistics for random-unitary friends average over the Haar
    ensemble, so each trial derives a fresh unitary seed from the friend's
    family seed; other kinds are deterministic and pass through.
    """
    if isinstance(kind, RandomUnitary):
        seed = qsim.RngStream(kind.seed, (_NS_FRIEND, side, trial)).derive_seed()
        return RandomUnitary(kind.n, seed)
    return kind


def _peek_decoder(strategy: str, register_size: int, position: int) -> infer.Decoder:
    if strategy == "random_single":
        return infer.SignSingle(position, register_size)
    return infer.make_decoder(strategy, register_size)


def _marginal_sources(pairs: Sequence[tuple[int, int]]):
    """For each setting, the first executed pair that estimates its marginal."""
    a_src: dict[int, tuple[int, int]] = {}
    b_src: dict[int, tuple[int, int]] = {}
    for (i, j) in pairs:
        a_src.setdefault(i, (i, j))
        b_src.setdefault(j, (i, j))
    return a_src, b_src


#: Prefix caching is skipped past this many complex amplitudes (memory cap).
_PREFIX_CACHE_ENTRIES = 1 << 24


class _NoisyPairSampler:
    """Trajectory shot sampler for one pair circuit under depolarizing noise.

    Equivalent in distribution to drawing a fresh
    :func:`ewfs_lab.qsim.run_noisy_trajectory` per batch, but fast for the
    default one-realisation-per-shot setting: noiseless prefix states are
    cached after every gate, so a trajectory whose first Pauli insertion
    lands at gate k only evolves the remaining suffix, and insertion-free
    trajectories (the common case at percent-level noise) skip evolution
    entirely.
    """

    def __init__(self, circuit: qsim.Circuit, measured, noise: qsim.NoiseModel):
        self.circuit = circuit
        self.noise = noise
        self.measured = np.asarray(measured, dtype=np.int64)
        self.gate_p = np.array(
            [noise.p1 if g.weight == 1 else noise.p2 for g in circuit.gates])
        self.all_qubits = tuple(range(circuit.num_qubits))
        n_entries = (len(circuit.gates) + 1) * (1 << circuit.num_qubits)
        self._cache_prefixes = n_entries <= _PREFIX_CACHE_ENTRIES
        amps = np.zeros(2 ** circuit.num_qubits, dtype=complex)
        amps[0] = 1.0
        prefixes = [amps.copy()]
        for gate in circuit.gates:
            amps = qsim._apply_gate_raw(amps, circuit.num_qubits, gate)
            if self._cache_prefixes:
                prefixes.append(amps.copy())
        self._prefixes = prefixes if self._cache_prefixes else None
        self._cdf_clean = self._cdf(amps)

    @staticmethod
    def _cdf(amps: np.ndarray) -> np.ndarray:
        cdf = np.cumsum(np.abs(amps) ** 2)
        return cdf / cdf[-1]

    def _prefix(self, k: int) -> np.ndarray:
        """Amplitudes after the first k gates, noiselessly."""
        if self._cache_prefixes:
            return self._prefixes[k].copy()
        amps = np.zeros(2 ** self.circuit.num_qubits, dtype=complex)
        amps[0] = 1.0
        for gate in self.circuit.gates[:k]:
            amps = qsim._apply_gate_raw(amps, self.circuit.num_qubits, gate)
        return amps

    def _insert(self, amps: np.ndarray, gate: qsim.Gate,
                rng: qsim.RngStream) -> np.ndarray:
        where = (self.all_qubits if self.noise.depolarizing_scope == "global"
                 else gate.qubits)
        return qsim._insert_pauli(amps, self.circuit.num_qubits, where, rng)

    def draw(self, rng: qsim.RngStream, shots: int,
             shots_per_trajectory: int) -> np.ndarray:
        gates = self.circuit.gates
        n = self.circuit.num_qubits
        bits = np.empty((shots, self.measured.size), dtype=np.uint8)
        done = 0
        while done < shots:
            batch = min(shots_per_trajectory, shots - done)
            triggers = rng.gen.random(len(gates)) < self.gate_p
            hits = np.nonzero(triggers)[0]
            if hits.size == 0:
                cdf = self._cdf_clean
            else:
                k0 = int(hits[0])
                amps = self._prefix(k0 + 1)
                amps = self._insert(amps, gates[k0], rng)
                hit_set = set(int(h) for h in hits[1:])
                for k in range(k0 + 1, len(gates)):
                    amps = qsim._apply_gate_raw(amps, n, gates[k])
                    if k in hit_set:
                        amps = self._insert(amps, gates[k], rng)
                cdf = self._cdf(amps)
            draws = rng.gen.random(batch)
            idx = np.searchsorted(cdf, draws, side="right")
            rows = ((idx[:, None] >> self.measured[None, :]) & 1).astype(np.uint8)
            if self.noise.p_readout > 0.0:
                flips = rng.gen.random(rows.shape) < self.noise.p_readout
                rows ^= flips.astype(np.uint8)
            bits[done:done + batch] = rows
            done += batch
        return bits


def _run_sampled(config: EwfsConfig, spec: lf.InequalitySpec):
    pairs = spec.required_pairs()
    trials = config.trials
    strategy = config.peek_strategy()
    per_shot_random = strategy == "random_single" and config.random_single_per_shot

    trial_a = np.zeros((trials, 3))
    trial_b = np.zeros((trials, 3))
    trial_ab = np.zeros((trials, 3, 3))
    available = np.zeros((3, 3), dtype=bool)
    for (i, j) in pairs:
        available[i - 1, j - 1] = True
    a_src, b_src = _marginal_sources(pairs)

    deterministic_friends = not (isinstance(config.friend_charlie, RandomUnitary)
                                 or isinstance(config.friend_debbie, RandomUnitary))
    built_cache: dict = {}

    for t in range(trials):
        kc = _trial_friend(config.friend_charlie, 0, t)
        kd = _trial_friend(config.friend_debbie, 1, t)

        pos_rng = qsim.RngStream(config.master_seed, (_NS_DECODER, t))
        pos_a = int(pos_rng.gen.integers(0, kc.n))
        pos_b = int(pos_rng.gen.integers(0, kd.n))

        for p_idx, (i, j) in enumerate(pairs):
            key = (i, j)
            if deterministic_friends and key in built_cache:
                ew, state, sampler = built_cache[key]
            else:
                ew = build_ewfs_circuit(kc, kd, config.angles, Setting(i), Setting(j))
                measured = ew.alice_measured_qubits + ew.bob_measured_qubits
                if config.noise.depolarizing_free:
                    state, sampler = qsim.run_circuit(ew.circuit), None
                else:
                    state = None
                    sampler = _NoisyPairSampler(ew.circuit, measured, config.noise)
                if deterministic_friends:
                    built_cache[key] = (ew, state, sampler)

            rng = qsim.RngStream(config.master_seed, (_NS_SAMPLING, p_idx, t))
            measured = ew.alice_measured_qubits + ew.bob_measured_qubits
            n_a = len(ew.alice_measured_qubits)
            if state is not None:
                bits = qsim.sample_shots(state, measured, config.noise.p_readout,
                                         rng, config.shots)
            else:
                bits = sampler.draw(rng, config.shots, config.shots_per_trajectory)

            bits_a, bits_b = bits[:, :n_a], bits[:, n_a:]
            if i == Setting.PEEK:
                dec_a = (infer.RandomSingle(kc.n) if per_shot_random
                         else _peek_decoder(strategy, kc.n, pos_a))
            else:
                dec_a = infer.SignSingle(0, 1)
            if j == Setting.PEEK:
                dec_b = (infer.RandomSingle(kd.n) if per_shot_random
                         else _peek_decoder(strategy, kd.n, pos_b))
            else:
                dec_b = infer.SignSingle(0, 1)
            a_vals = infer.decode_batch(dec_a, bits_a, rng)
            b_vals = infer.decode_batch(dec_b, bits_b, rng)

            trial_ab[t, i - 1, j - 1] = float(np.mean(a_vals * b_vals))
            if a_src.get(i) == key:
                trial_a[t, i - 1] = float(np.mean(a_vals))
            if b_src.get(j) == key:
                trial_b[t, j - 1] = float(np.mean(b_vals))

    return lf.ExpectationTable.from_trials(trial_a, trial_b, trial_ab, available)


def _run_exact(config: EwfsConfig, spec: lf.InequalitySpec) -> lf.ExpectationTable:
    pairs = spec.required_pairs()
    strategy = config.peek_strategy()
    a = np.zeros(3)
    b = np.zeros(3)
    ab = np.zeros((3, 3))
    available = np.zeros((3, 3), dtype=bool)
    a_src, b_src = _marginal_sources(pairs)
    for (i, j) in pairs:
        ew = build_ewfs_circuit(config.friend_charlie, config.friend_debbie,
                                config.angles, Setting(i), Setting(j))
        state = qsim.run_circuit(ew.circuit)
        dec_a = (infer.make_decoder(strategy, config.friend_charlie.n)
                 if i == Setting.PEEK else infer.SignSingle(0, 1))
        dec_b = (infer.make_decoder(strategy, config.friend_debbie.n)
                 if j == Setting.PEEK else infer.SignSingle(0, 1))
        ab[i - 1, j - 1] = qsim.exact_pair_expectation(
            state, dec_a, ew.alice_measured_qubits, dec_b, ew.bob_measured_qubits)
        available[i - 1, j - 1] = True
        if a_src.get(i) == (i, j):
            a[i - 1] = qsim.exact_single_expectation(state, dec_a,
                                                     ew.alice_measured_qubits)
        if b_src.get(j) == (i, j):
            b[j - 1] = qsim.exact_single_expectation(state, dec_b,
                                                     ew.bob_measured_qubits)
    return lf.ExpectationTable(a=a, b=b, ab=ab, available=available)


def _run_analytic_scaled(config: EwfsConfig, spec: lf.InequalitySpec) -> lf.ExpectationTable:
    pairs = spec.required_pairs()
    ideal = lf.analytic_expectations(config.angles)
    ab = np.zeros((3, 3))
    available = np.zeros((3, 3), dtype=bool)
    for (i, j) in pairs:
        ew = build_ewfs_circuit(config.friend_charlie, config.friend_debbie,
                                config.angles, Setting(i), Setting(j))
        counts = validate.count_gates(ew.circuit)
        factor = validate.depolarizing_fidelity(counts, config.noise.p1,
                                                config.noise.p2)
        ab[i - 1, j - 1] = ideal.ab[i - 1, j - 1] * factor
        available[i - 1, j - 1] = True
    return lf.ExpectationTable(a=np.zeros(3), b=np.zeros(3), ab=ab,
                               available=available)


_CHSH_MAX = 2.0 * math.sqrt(2.0) - 2.0
_maxima_cache: dict[str, float] = {
    "brukner": _CHSH_MAX, "semi_brukner": _CHSH_MAX, "bell_non_lf": _CHSH_MAX,
}


def theoretical_maximum(name: str) -> float:
    """Best attainable LHS for an inequality (optimizer-derived, cached)."""
    if name not in _maxima_cache:
        _, value = lf.optimize_angles(lf.INEQUALITIES[name])
        _maxima_cache[name] = value
    return _maxima_cache[name]


def _validation_counts(config: EwfsConfig, spec: lf.InequalitySpec) -> validate.GateCounts:
    if config.validation_scope == "friend_prep":
        return validate.count_gates(
            friend_preparation_gates(config.friend_charlie, config.friend_debbie))
    worst = validate.GateCounts(0, 0)
    for (i, j) in spec.required_pairs():
        ew = build_ewfs_circuit(config.friend_charlie, config.friend_debbie,
                                config.angles, Setting(i), Setting(j))
        counts = validate.count_gates(ew.circuit)
        if (counts.singles + counts.doubles) > (worst.singles + worst.doubles):
            worst = counts
    return worst


def run_experiment(config: EwfsConfig) -> ResultRecord:
    """Execute one configured experiment and assemble its full record."""
    validate_config(config)
    spec = lf.INEQUALITIES[config.inequality]
    start = time.perf_counter()

    if config.mode == "sampled":
        table = _run_sampled(config, spec)
    elif config.mode == "exact":
        table = _run_exact(config, spec)
    else:
        table = _run_analytic_scaled(config, spec)

    lhs_mean, lhs_std = lf.lhs_statistics(spec, table)
    pair_stats = {}
    for (i, j) in spec.required_pairs():
        if table.trial_ab is not None:
            col = table.trial_ab[:, i - 1, j - 1]
            ab_std = float(col.std(ddof=1)) if col.size > 1 else 0.0
        else:
            ab_std = 0.0
        pair_stats[f"x={i},y={j}"] = PairStats(
            ab_mean=float(table.ab[i - 1, j - 1]), ab_std=ab_std,
            a_mean=float(table.a[i - 1]), b_mean=float(table.b[j - 1]))

    report = branch_mod.branch_factor(config.friend_charlie)
    counts = _validation_counts(config, spec)
    threshold = spec.violation_threshold()
    excursion = 2.0 * spec.abs_coeff_sum()
    x_tilde_max = theoretical_maximum(config.inequality) + threshold
    validation = validate.certify(
        lhs_mean + threshold, lhs_std, counts, config.noise,
        excursion=excursion, threshold=threshold, x_tilde_max=x_tilde_max)

    return ResultRecord(
        config=config,
        pair_stats=pair_stats,
        lhs_mean=lhs_mean,
        lhs_std=lhs_std,
        violated=bool(lhs_mean > 0.0),
        branch=report,
        validation=validation,
        prep_counts=counts,
        wall_time_s=time.perf_counter() - start,
    )


def make_friend(kind_name: str, n: int, seed: int = 0, k: int | None = None) -> FriendKind:
    """Friend factory used by sweeps and the command line."""
    if kind_name == "ghz":
        return Ghz(n)
    if kind_name == "random_unitary":
        return RandomUnitary(n, seed)
    if kind_name == "dicke":
        kk = k if k is not None else max(1, n // 2)
        return Dicke(n, kk)
    raise ConfigError(f"unknown friend kind {kind_name!r}")


def sweep_cells(base: EwfsConfig, sizes: Sequence[int],
                noise_levels: Sequence[float], kinds: Sequence[str] = ("ghz",),
                strategies: Sequence[str] = ("majority_vote",),
                shots_override: Mapping[int, int] | None = None) -> list[EwfsConfig]:
    """Cartesian grid of configs with per-cell derived seeds.

    Cell order is (kind, strategy, noise, size), and each cell's master
    seed derives from the base seed and the cell index, so regeneration is
    order- and parallelism-independent.
    """
    shots_override = dict(shots_override or {})
    cells = []
    index = 0
    for kind_name in kinds:
        for strategy in strategies:
            for p in noise_levels:
                for n in sizes:
                    seed = qsim.RngStream(
                        base.master_seed, (_NS_SWEEP, index)).derive_seed()
                    cells.append(replace(
                        base,
                        friend_charlie=make_friend(kind_name, n),
                        noise=replace(base.noise, p1=p, p2=p),
                        decoder_peek=strategy,
                        shots=shots_override.get(n, base.shots),
                        master_seed=seed,
                    ))
                    index += 1
    return cells


def run_sweep(cells: Sequence[EwfsConfig], workers: int = 1):
    """Run every cell, recording failures without aborting the sweep."""

    def one(config: EwfsConfig):
        try:
            return run_experiment(config)
        except Exception as exc:  # per-cell isolation is the contract
            category = "config" if isinstance(exc, (ConfigError, ValueError)) else "runtime"
            return FailedCell(config=config, category=category, message=str(exc))

    if workers <= 1:
        return [one(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, cells))


def max_violating_size(records, kind_name: str = "ghz", p: float | None = None) -> int:
    """Largest friend size with a positive mean LHS among matching records (0 if none)."""
    best = 0
    for rec in records:
        if isinstance(rec, FailedCell) or not rec.violated:
            continue
        cfg = rec.config
        if friend_kind_name(cfg.friend_charlie) != kind_name:
            continue
        if p is not None and not math.isclose(cfg.noise.p1, p):
            continue
        best = max(best, cfg.friend_charlie.n)
    return best


# ---------------------------------------------------------------------------
# serialization

CSV_COLUMNS = ("mode", "friend_kind", "friend_size", "branch_factor", "bf_flag",
               "p1", "p2", "p_readout", "depol_scope", "decoder", "shots",
               "trials", "seed", "inequality", "lhs_mean", "lhs_std",
               "violated", "certified", "q_estimate")


def _f(value: float) -> str:
    return "%.9g" % value


def _round9(value: float) -> float:
    return float(_f(value))


def csv_row(record: ResultRecord) -> dict:
    cfg = record.config
    return {
        "mode": cfg.mode,
        "friend_kind": friend_kind_name(cfg.friend_charlie),
        "friend_size": cfg.friend_charlie.n,
        "branch_factor": _f(record.branch.branch_factor.value),
        "bf_flag": record.branch.branch_factor.flag,
        "p1": _f(cfg.noise.p1),
        "p2": _f(cfg.noise.p2),
        "p_readout": _f(cfg.noise.p_readout),
        "depol_scope": cfg.noise.depolarizing_scope,
        "decoder": cfg.peek_strategy(),
        "shots": cfg.shots,
        "trials": cfg.trials,
        "seed": cfg.master_seed,
        "inequality": cfg.inequality,
        "lhs_mean": _f(record.lhs_mean),
        "lhs_std": _f(record.lhs_std),
        "violated": "true" if record.violated else "false",
        "certified": "true" if record.validation.certified else "false",
        "q_estimate": _f(record.validation.q),
    }


def _config_dict(cfg: EwfsConfig) -> dict:
    kind = lambda k: {"kind": friend_kind_name(k), "n": k.n,
                      **({"seed": k.seed} if isinstance(k, RandomUnitary) else {}),
                      **({"k": k.k} if isinstance(k, Dicke) else {})}
    return {
        "friend_charlie": kind(cfg.friend_charlie),
        "friend_debbie": kind(cfg.friend_debbie),
        "angles": {"theta": list(cfg.angles.theta), "beta": list(cfg.angles.beta)},
        "inequality": cfg.inequality,
        "mode": cfg.mode,
        "noise": {"p1": cfg.noise.p1, "p2": cfg.noise.p2,
                  "p_readout": cfg.noise.p_readout,
                  "depolarizing_scope": cfg.noise.depolarizing_scope},
        "shots": cfg.shots,
        "trials": cfg.trials,
        "master_seed": cfg.master_seed,
        "decoder_peek": cfg.peek_strategy(),
        "shots_per_trajectory": cfg.shots_per_trajectory,
        "random_single_per_shot": cfg.random_single_per_shot,
        "validation_scope": cfg.validation_scope,
    }


def record_dict(record: ResultRecord, include_timing: bool = False) -> dict:
    """Full JSON mirror of a record (timing off by default for byte stability)."""
    out = {
        "config": _config_dict(record.config),
        "pair_stats": {
            key: {"ab_mean": _round9(ps.ab_mean), "ab_std": _round9(ps.ab_std),
                  "a_mean": _round9(ps.a_mean), "b_mean": _round9(ps.b_mean)}
            for key, ps in record.pair_stats.items()
        },
        "lhs_mean": _round9(record.lhs_mean),
        "lhs_std": _round9(record.lhs_std),
        "violated": record.violated,
        "branch_factor": {
            "c_interference": {"value": _round9(record.branch.c_interference.value),
                               "flag": record.branch.c_interference.flag},
            "c_distinguishability": {
                "value": _round9(record.branch.c_distinguishability.value),
                "flag": record.branch.c_distinguishability.flag},
            "branch_factor": {"value": _round9(record.branch.branch_factor.value),
                              "flag": record.branch.branch_factor.flag},
            "delta": record.branch.delta,
        },
        "validation": {
            "q": _round9(record.validation.q),
            "x_tilde": _round9(record.validation.x_tilde),
            "x_valid_lower": _round9(record.validation.x_valid_lower),
            "q_min": _round9(record.validation.q_min),
            "certified": record.validation.certified,
        },
        "prep_counts": {"singles": record.prep_counts.singles,
                        "doubles": record.prep_counts.doubles,
                        "exact": record.prep_counts.exact},
    }
    if include_timing:
        out["wall_time_s"] = record.wall_time_s
    return out


def render_csv(records) -> str:
    """CSV text for successful records (failed sweep cells appear in JSON only)."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        if isinstance(rec, ResultRecord):
            writer.writerow(csv_row(rec))
    return buf.getvalue()


def render_json(records, include_timing: bool = False) -> str:
    payload = []
    for rec in records:
        if isinstance(rec, ResultRecord):
            payload.append(record_dict(rec, include_timing))
        else:
            payload.append({"error": {"category": rec.category,
                                      "message": rec.message,
                                      "config": _config_dict(rec.config)}})
    return json.dumps({"records": payload}, indent=2, sort_keys=True) + "\n"


def emit(records, fmt: str, path: str, include_timing: bool = False) -> None:
    """Write records to ``path`` as csv or json."""
    if fmt == "csv":
        text = render_csv(records)
    elif fmt == "json":
        text = render_json(records, include_timing)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
