"""Command-line front end.

Subcommands map one-to-one onto the lab's outputs: ``run`` (one
experiment), ``sweep`` (grids over size/noise/kind/strategy), ``angles``
(violation-maximising angle search), ``oracle`` (closed-form expectation
table), ``branch-factor``, ``resources`` (gate counts per friend size),
and ``validate`` (worst-case certification calculators).

Config files are flat ``key = value`` text; any command-line flag
overrides the file.  Angles are degrees everywhere.  The environment
variable ``EWFS_LAB_OUTDIR`` prefixes relative output paths.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Sequence

from . import branch as branch_mod
from . import experiment, infer, lf, validate
from .ewfs import MeasurementAngles, friend_kind_name
from .qsim import NoiseModel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _fail(category: str, message: str) -> "CliError":
    return CliError(category, message)


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` pairs; '#' starts a comment; keys mirror flags."""
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise _fail("config", f"{path}:{lineno}: expected key = value")
                key, value = line.split("=", 1)
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise _fail("io", f"cannot read config file: {exc}")
    return values


_CONFIG_KEYS = ("friend", "size", "k", "friend_seed", "debbie_size", "inequality",
                "mode", "p1", "p2", "p_readout", "depol_scope", "shots", "trials",
                "seed", "decoder", "shots_per_trajectory", "angles_theta",
                "angles_beta", "angles_preset", "validation_scope")


def _parse_angle_triple(text: str, name: str) -> tuple[float, float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise _fail("config", f"{name} needs exactly three angles, got {text!r}")
    return tuple(float(p) for p in parts)


def _resolve_angles(opts: dict) -> MeasurementAngles:
    preset = opts.get("angles_preset")
    if opts.get("angles_theta") or opts.get("angles_beta"):
        if not (opts.get("angles_theta") and opts.get("angles_beta")):
            raise _fail("config", "angles_theta and angles_beta go together")
        return MeasurementAngles(
            theta=_parse_angle_triple(opts["angles_theta"], "angles_theta"),
            beta=_parse_angle_triple(opts["angles_beta"], "angles_beta"))
    if preset in (None, "", "optimal"):
        return MeasurementAngles.chsh_optimal()
    if preset == "legacy":
        return MeasurementAngles.legacy()
    raise _fail("config", f"unknown angles preset {preset!r}")


def _build_config(opts: dict) -> experiment.EwfsConfig:
    def geti(key, default):
        return int(opts[key]) if opts.get(key) not in (None, "") else default

    def getf(key, default):
        return float(opts[key]) if opts.get(key) not in (None, "") else default

    kind = opts.get("friend") or "ghz"
    size = geti("size", 3)
    charlie = experiment.make_friend(kind, size, seed=geti("friend_seed", 0),
                                     k=geti("k", 0) or None)
    debbie = experiment.make_friend("ghz", geti("debbie_size", 1))
    noise = NoiseModel(p1=getf("p1", 0.0), p2=getf("p2", 0.0),
                       p_readout=getf("p_readout", 0.0),
                       depolarizing_scope=opts.get("depol_scope") or "global")
    return experiment.EwfsConfig(
        friend_charlie=charlie,
        friend_debbie=debbie,
        angles=_resolve_angles(opts),
        inequality=opts.get("inequality") or "semi_brukner",
        mode=opts.get("mode") or "sampled",
        noise=noise,
        shots=geti("shots", 10000),
        trials=geti("trials", 10),
        master_seed=geti("seed", 0),
        decoder_peek=opts.get("decoder") or None,
        shots_per_trajectory=geti("shots_per_trajectory", 1),
        validation_scope=opts.get("validation_scope") or "friend_prep",
    )


def _collect_opts(args: argparse.Namespace) -> dict:
    opts: dict = {}
    if getattr(args, "config", None):
        file_values = parse_config_file(args.config)
        unknown = set(file_values) - set(_CONFIG_KEYS)
        if unknown:
            raise _fail("config", f"unknown config keys: {sorted(unknown)}")
        opts.update(file_values)
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    return opts


def _out_path(path: str) -> str:
    outdir = os.environ.get("EWFS_LAB_OUTDIR")
    if outdir and not os.path.isabs(path):
        return os.path.join(outdir, path)
    return path


def _write(records, args) -> None:
    path = _out_path(args.out)
    try:
        experiment.emit(records, args.format, path,
                        include_timing=getattr(args, "include_timing", False))
    except OSError as exc:
        raise _fail("io", f"cannot write {path}: {exc}")
    print(f"wrote {args.format} to {path}")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--friend", choices=("ghz", "random_unitary", "dicke"))
    p.add_argument("--size", type=int, help="Charlie register size")
    p.add_argument("--k", type=int, help="Dicke Hamming weight (default n//2)")
    p.add_argument("--friend-seed", dest="friend_seed", type=int)
    p.add_argument("--debbie-size", dest="debbie_size", type=int)
    p.add_argument("--inequality", choices=tuple(lf.INEQUALITIES))
    p.add_argument("--mode", choices=experiment.MODES)
    p.add_argument("--p1", type=float, help="depolarizing prob after 1q gates")
    p.add_argument("--p2", type=float, help="depolarizing prob after 2q gates")
    p.add_argument("--p-readout", dest="p_readout", type=float)
    p.add_argument("--depol-scope", dest="depol_scope", choices=("global", "local"))
    p.add_argument("--shots", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--decoder", choices=infer.DECODER_NAMES)
    p.add_argument("--shots-per-trajectory", dest="shots_per_trajectory", type=int)
    p.add_argument("--angles-theta", dest="angles_theta",
                   help="three Alice angles in degrees, e.g. '0,45,90'")
    p.add_argument("--angles-beta", dest="angles_beta")
    p.add_argument("--angles-preset", dest="angles_preset",
                   choices=("optimal", "legacy"))
    p.add_argument("--validation-scope", dest="validation_scope",
                   choices=("friend_prep", "whole_circuit"))
    p.add_argument("--out", default="results.csv")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--include-timing", action="store_true",
                   help="include wall time in JSON (breaks byte reproducibility)")


def _cmd_run(args) -> int:
    config = _build_config(_collect_opts(args))
    record = experiment.run_experiment(config)
    _write([record], args)
    sigma = 3.0 * record.lhs_std
    print(f"{config.inequality} LHS = {record.lhs_mean:.6f} +- {sigma:.6f} (3 std)"
          f"  violated={record.violated}  certified={record.validation.certified}")
    return EXIT_OK


def _parse_int_list(text: str) -> list[int]:
    if ":" in text:
        parts = [int(x) for x in text.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        return list(range(start, stop + 1, step))
    return [int(x) for x in text.split(",") if x]


def _cmd_sweep(args) -> int:
    base = _build_config(_collect_opts(args))
    sizes = _parse_int_list(args.sizes)
    noise_levels = [float(x) for x in args.noise.split(",") if x]
    kinds = args.kinds.split(",")
    strategies = args.strategies.split(",")
    override = {}
    for item in (args.shots_for or []):
        size_text, shots_text = item.split("=", 1)
        override[int(size_text)] = int(shots_text)
    cells = experiment.sweep_cells(base, sizes, noise_levels, kinds, strategies,
                                   shots_override=override)
    records = experiment.run_sweep(cells, workers=args.workers)
    failed = [r for r in records if isinstance(r, experiment.FailedCell)]
    _write(records, args)
    print(f"{len(records) - len(failed)} cells ok, {len(failed)} failed")
    for cell in failed:
        kind = friend_kind_name(cell.config.friend_charlie)
        print(f"  failed {kind} n={cell.config.friend_charlie.n}: "
              f"[{cell.category}] {cell.message}", file=sys.stderr)
    return EXIT_OK


def _cmd_angles(args) -> int:
    names = [args.inequality] if args.inequality else list(lf.INEQUALITIES)
    for name in names:
        angles, value = lf.optimize_angles(lf.INEQUALITIES[name],
                                           n_starts=args.starts, seed=args.seed)
        theta = ", ".join(f"{v:.3f}" for v in angles.theta)
        beta = ", ".join(f"{v:.3f}" for v in angles.beta)
        print(f"{name}: max LHS = {value:.6f}  theta = [{theta}]  beta = [{beta}]")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    angles = _resolve_angles(_collect_opts(args))
    table = lf.analytic_expectations(angles)
    print(f"theta = {angles.theta}  beta = {angles.beta}")
    print("correlators <A_i B_j> = -cos(beta_j - theta_i):")
    for i in range(3):
        row = "  ".join(f"{table.ab[i, j]:+.6f}" for j in range(3))
        print(f"  i={i + 1}:  {row}")
    for name, spec in lf.INEQUALITIES.items():
        value = lf.evaluate(spec, table)
        print(f"{name}: LHS = {value:+.6f} ({'violated' if value > 0 else 'satisfied'})")
    return EXIT_OK


def _cmd_branch_factor(args) -> int:
    if args.friend == "two_random_circuits":
        report = branch_mod.two_random_circuit_bounds(args.size, args.d0, args.d1)
    else:
        kind = experiment.make_friend(args.friend, args.size,
                                      seed=args.friend_seed, k=args.k)
        report = branch_mod.branch_factor(kind)
    print(f"C_I = {report.c_interference.value:g} ({report.c_interference.flag})")
    print(f"C_D = {report.c_distinguishability.value:g} "
          f"({report.c_distinguishability.flag})")
    print(f"branch factor = {report.branch_factor.value:g} "
          f"({report.branch_factor.flag})")
    return EXIT_OK


def _cmd_resources(args) -> int:
    sizes = _parse_int_list(args.sizes)
    print("friend_kind,friend_size,branch_factor,bf_flag,prep_singles,"
          "prep_doubles,counts_exact,fidelity")
    for n in sizes:
        kind = experiment.make_friend(args.friend, n)
        debbie = experiment.make_friend("ghz", 1)
        from .ewfs import friend_preparation_gates
        counts = validate.count_gates(friend_preparation_gates(kind, debbie))
        report = branch_mod.branch_factor(kind)
        fid = validate.depolarizing_fidelity(counts, args.p1, args.p2)
        print(f"{args.friend},{n},{report.branch_factor.value:g},"
              f"{report.branch_factor.flag},{counts.singles},{counts.doubles},"
              f"{str(counts.exact).lower()},{fid:.9g}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    if args.x_tilde is not None and args.q is not None:
        value = validate.worst_case_valid_x(args.x_tilde, args.q)
        print(f"worst-case valid X >= {value:.6f} "
              f"({'certifies' if value >= 2.0 else 'does not certify'} a violation)")
    elif args.x_tilde_max is not None:
        q_min = validate.min_valid_probability(args.x_tilde_max)
        print(f"minimum preparation validity q = {q_min:.6f}")
    elif args.solve_p2:
        counts = validate.GateCounts(args.singles, args.doubles)
        target = args.target if args.target is not None else 2.0 / (2.0 * math.sqrt(2.0))
        p2 = validate.max_two_qubit_error(counts, target, args.ratio)
        print(f"max two-qubit error p2 = {p2:.6f} (p1 = {args.ratio:g} * p2, "
              f"fidelity target {target:.6f})")
    elif args.singles is not None or args.doubles is not None:
        counts = validate.GateCounts(args.singles or 0, args.doubles or 0)
        fid = validate.depolarizing_fidelity(counts, args.p1, args.p2)
        print(f"depolarizing fidelity = {fid:.9g}")
    else:
        raise _fail("config", "nothing to compute; see ewfs-lab validate --help")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ewfs-lab",
        description="Wigner's-friend scenario laboratory: local-friendliness "
                    "violations with friends of configurable branch factor.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    _add_experiment_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid over sizes/noise/kinds/strategies")
    _add_experiment_flags(p_sweep)
    p_sweep.add_argument("--sizes", required=True,
                         help="comma list or start:stop[:step], e.g. 1:17:2")
    p_sweep.add_argument("--noise", default="0",
                         help="comma list of depolarizing levels (p1 = p2 = p)")
    p_sweep.add_argument("--kinds", default="ghz")
    p_sweep.add_argument("--strategies", default="majority_vote")
    p_sweep.add_argument("--shots-for", action="append", metavar="SIZE=SHOTS",
                         help="per-size shot override, repeatable")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_angles = sub.add_parser("angles", help="maximise inequality LHS over angles")
    p_angles.add_argument("--inequality", choices=tuple(lf.INEQUALITIES))
    p_angles.add_argument("--starts", type=int, default=64)
    p_angles.add_argument("--seed", type=int, default=0)
    p_angles.set_defaults(func=_cmd_angles)

    p_oracle = sub.add_parser("oracle", help="closed-form expectation table")
    p_oracle.add_argument("--angles-theta", dest="angles_theta")
    p_oracle.add_argument("--angles-beta", dest="angles_beta")
    p_oracle.add_argument("--angles-preset", dest="angles_preset",
                          choices=("optimal", "legacy"))
    p_oracle.set_defaults(func=_cmd_oracle)

    p_bf = sub.add_parser("branch-factor", help="branch-factor report")
    p_bf.add_argument("--friend", default="ghz",
                      choices=("ghz", "random_unitary", "dicke",
                               "two_random_circuits"))
    p_bf.add_argument("--size", type=int, required=True)
    p_bf.add_argument("--k", type=int)
    p_bf.add_argument("--friend-seed", dest="friend_seed", type=int, default=0)
    p_bf.add_argument("--d0", type=int, default=1, help="depth of first circuit")
    p_bf.add_argument("--d1", type=int, default=1, help="depth of second circuit")
    p_bf.set_defaults(func=_cmd_branch_factor)

    p_res = sub.add_parser("resources", help="gate counts vs friend size")
    p_res.add_argument("--friend", default="ghz",
                       choices=("ghz", "random_unitary", "dicke"))
    p_res.add_argument("--sizes", required=True)
    p_res.add_argument("--p1", type=float, default=0.0)
    p_res.add_argument("--p2", type=float, default=0.0)
    p_res.set_defaults(func=_cmd_resources)

    p_val = sub.add_parser("validate", help="worst-case certification calculators")
    p_val.add_argument("--x-tilde", dest="x_tilde", type=float)
    p_val.add_argument("--q", type=float)
    p_val.add_argument("--x-tilde-max", dest="x_tilde_max", type=float)
    p_val.add_argument("--singles", type=int)
    p_val.add_argument("--doubles", type=int)
    p_val.add_argument("--p1", type=float, default=0.0)
    p_val.add_argument("--p2", type=float, default=0.0)
    p_val.add_argument("--solve-p2", dest="solve_p2", action="store_true",
                       help="largest p2 keeping fidelity above --target")
    p_val.add_argument("--target", type=float)
    p_val.add_argument("--ratio", type=float, default=0.1,
                       help="p1 as a fraction of p2 for --solve-p2")
    p_val.set_defaults(func=_cmd_validate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"ERROR category={exc.category} message={exc}", file=sys.stderr)
        return EXIT_IO if exc.category == "io" else EXIT_CONFIG
    except (experiment.ConfigError, infer.DecoderError, ValueError) as exc:
        print(f"ERROR category=config message={exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ERROR category=io message={exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
