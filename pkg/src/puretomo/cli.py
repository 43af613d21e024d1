"""Command-line entry point: ``puretomo <subcommand> ...``.

Exit codes: 0 on success, 1 on usage errors or invalid input, 2 when the
reconstruction hit a degenerate phase link (the estimate is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .experiments import DivergenceConfig, ExperimentConfig, run_divergence, run_trials
from .likelihood import MIXED_GAUSS_ITERS, OBJECTIVES, REG_COUNT, minimize
from .measurements import MeasurementSetup
from .phasecut import DEFAULT_NU, build_problem, solve
from .recursive import reconstruct_recursive
from .sampling import ShotRecord, simulate_shots
from .states import StateVector, random_state

log = logging.getLogger("puretomo")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DEGRADED = 2
DEFAULT_PHASECUT_UPDATES = 5000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _header(command: str, config: dict) -> dict:
    return {"version": __version__, "command": command, "config": config}


def _write_json(path, obj) -> None:
    path = Path(path)
    try:
        path.write_text(json.dumps(obj, indent=2) + "\n")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _load_setup(source: str, n_qb: int) -> MeasurementSetup:
    if source in ("small", "tall"):
        return MeasurementSetup.from_kind(source, n_qb)
    obj = _read_json(source)
    setup = MeasurementSetup.from_json(obj) if "kind" in obj else MeasurementSetup.custom(obj["types"])
    if setup.n_qb != n_qb:
        raise UsageError(f"setup in {source} is for {setup.n_qb} qubits, state has {n_qb}")
    return setup


def cmd_gen_state(args) -> int:
    if args.qubits < 1:
        raise UsageError("--qubits must be >= 1")
    config = {"qubits": args.qubits, "seed": args.seed}
    log.info("gen-state %s", json.dumps(config))
    obj = random_state(args.qubits, args.seed).to_json()
    obj["header"] = _header("gen-state", config)
    _write_json(args.out, obj)
    return EXIT_OK


def cmd_measure(args) -> int:
    v = StateVector.from_json(_read_json(args.state))
    setup = _load_setup(args.setup, v.n_qb)
    config = {"state": str(args.state), "setup": setup.to_json(), "shots": args.shots,
              "seed": args.seed}
    log.info("measure %s", json.dumps(config))
    rec = simulate_shots(setup, v, args.shots, args.seed)
    obj = rec.to_json()
    obj["header"] = _header("measure", config)
    _write_json(args.out, obj)
    return EXIT_OK


def _phasecut_stage(rec: ShotRecord, args, diag: dict):
    problem = build_problem(rec.setup.matrix(), rec.sample_probabilities(),
                            weights=args.phasecut_weights)
    if args.phasecut_sweeps is not None:
        res = solve(problem, max_iters=args.phasecut_sweeps, seed=args.seed, nu=args.phasecut_nu)
    else:
        res = solve(problem, max_iters=args.phasecut_updates, seed=args.seed,
                    nu=args.phasecut_nu, max_updates=args.phasecut_updates)
    diag["phasecut"] = {
        "sweeps": res.iterations,
        "coordinate_updates": res.updates,
        "objective_trace": res.objective_trace,
    }
    return res.v_hat, False


def _recursive_stage(rec: ShotRecord, diag: dict):
    res = reconstruct_recursive(rec.sample_probabilities(), rec.setup.n_qb)
    diag["recursive"] = {"failures": res.failures}
    return res.state, res.failed


def cmd_reconstruct(args) -> int:
    rec = ShotRecord.from_json(_read_json(args.shots))
    method = args.method or ("recursive" if rec.setup.kind.value == "tall" else "phasecut")
    if method == "recursive" and rec.setup.kind.value != "tall":
        raise UsageError("the recursive method needs shots from the tall setup")
    config = {
        "shots": str(args.shots), "method": method, "ml": args.ml, "seed": args.seed,
        "phasecut_sweeps": args.phasecut_sweeps, "phasecut_updates": args.phasecut_updates,
        "phasecut_nu": args.phasecut_nu, "phasecut_weights": args.phasecut_weights,
        "ml_max_iters": args.ml_max_iters,
        "ml_mixed_gauss_iters": args.ml_mixed_gauss_iters, "reg_count": args.reg_count,
    }
    log.info("reconstruct %s", json.dumps(config))
    diag = {"header": _header("reconstruct", config)}
    if method == "phasecut":
        v_hat, failed = _phasecut_stage(rec, args, diag)
    else:
        v_hat, failed = _recursive_stage(rec, diag)
    if args.ml != "none":
        res = minimize(args.ml, v_hat, rec, max_iter=args.ml_max_iters,
                       mixed_gauss_iters=args.ml_mixed_gauss_iters, reg_count=args.reg_count)
        v_hat = res.state
        diag["ml"] = {
            "objective": res.objective,
            "iterations": res.iterations,
            "converged": res.converged,
            "stages": [vars(s) for s in res.stages],
        }
    diag["failure_flag"] = failed

    obj = v_hat.to_json()
    obj["header"] = diag["header"]
    _write_json(args.out, obj)
    diag_path = args.diagnostics or Path(args.out).with_suffix(".diag.json")
    _write_json(diag_path, diag)
    if failed:
        log.warning("degenerate phase link; estimate written with zero relative phase there")
        return EXIT_DEGRADED
    return EXIT_OK


# experiment flag -> ExperimentConfig field
_EXPERIMENT_FLAGS = {
    "qubits": "n_qb",
    "setup": "setup_kind",
    "total_shots": "total_shots",
    "trials": "trials",
    "method": "initializer",
    "ml": "objectives",
    "init_modes": "init_modes",
    "seed": "master_seed",
    "phasecut_updates": "phasecut_updates",
    "phasecut_nu": "phasecut_nu",
    "ml_max_iters": "ml_max_iter",
    "ml_mixed_gauss_iters": "mixed_gauss_iters",
    "reg_count": "reg_count",
    "timing": "timing",
}

_DIVERGENCE_FLAGS = {
    "qubits": "n_qb",
    "setup": "setup_kind",
    "total_shots": "total_shots",
    "inits": "n_inits",
    "ml": "objectives",
    "alpha": "alpha",
    "seed": "master_seed",
    "ml_max_iters": "ml_max_iter",
    "ml_mixed_gauss_iters": "mixed_gauss_iters",
    "reg_count": "reg_count",
}


def _resolve(cls, args, flag_map: dict):
    """Dataclass defaults, overridden by the config file, overridden by flags."""
    values = {}
    if args.config:
        values.update(_read_json(args.config))
    for flag, key in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None:
            values[key] = val
    if "objectives" in values:
        values["objectives"] = [o for o in values["objectives"] if o != "none"]
    if "n_qb" not in values:
        raise UsageError("the number of qubits must be given by --qubits or the config file")
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc


def cmd_experiment(args) -> int:
    cfg = _resolve(ExperimentConfig, args, _EXPERIMENT_FLAGS)
    result = run_trials(cfg, workers=args.threads)
    paths = result.write(args.out_dir, plot_script=args.plot_script)
    for stage, med in result.aggregates()["median_mu"].items():
        print(f"{stage}: median mu = {med:.4f}")
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_divergence(args) -> int:
    cfg = _resolve(DivergenceConfig, args, _DIVERGENCE_FLAGS)
    result = run_divergence(cfg, workers=args.threads)
    _write_json(args.out, result.to_json())
    return EXIT_OK


def _add_solver_flags(p, batch: bool = False) -> None:
    """Likelihood flags; in batch mode unset flags stay ``None`` so a config file can fill them."""

    def default(value):
        return None if batch else value

    if batch:
        p.add_argument("--ml", nargs="+", choices=list(OBJECTIVES) + ["none"],
                       help="likelihoods to fine-tune with (default: mixed)")
    else:
        p.add_argument("--ml", choices=list(OBJECTIVES) + ["none"], default="mixed",
                       help="likelihood to fine-tune with")
    p.add_argument("--ml-max-iters", type=int, default=default(10_000),
                   help="BFGS iteration cap per stage")
    p.add_argument("--ml-mixed-gauss-iters", type=int, default=default(MIXED_GAUSS_ITERS),
                   help="gauss iterations before switching to exact in the mixed schedule")
    p.add_argument("--reg-count", type=float, default=default(REG_COUNT),
                   help="pseudo-count regularizing the gauss likelihood covariance")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="puretomo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-state", help="draw a random pure state")
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_state)

    p = sub.add_parser("measure", help="simulate shots on a state")
    p.add_argument("--state", required=True)
    p.add_argument("--setup", default="tall", help="small, tall, or a JSON file listing types")
    p.add_argument("--shots", type=int, required=True, help="total shots over all types")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("reconstruct", help="estimate the state from a shot record")
    p.add_argument("--shots", required=True)
    p.add_argument("--method", choices=["phasecut", "recursive"],
                   help="initial estimate (default: recursive for tall, phasecut otherwise)")
    p.add_argument("--phasecut-sweeps", type=int,
                   help="run this many full sweeps instead of an update budget")
    p.add_argument("--phasecut-updates", type=int, default=DEFAULT_PHASECUT_UPDATES,
                   help="single-column update budget")
    p.add_argument("--phasecut-nu", type=float, default=DEFAULT_NU)
    p.add_argument("--phasecut-weights", choices=["sqrt", "linear"], default="sqrt",
                   help="diagonal weights of M: sqrt(p_hat) or p_hat")
    p.add_argument("--seed", type=int, default=0, help="power-iteration start vector seed")
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--diagnostics", help="diagnostics path (default: <out>.diag.json)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("experiment", help="batch of random trials")
    p.add_argument("--config", help="JSON file of experiment settings; flags take precedence")
    p.add_argument("--qubits", type=int)
    p.add_argument("--setup", choices=["small", "tall"])
    p.add_argument("--total-shots", "--shots", dest="total_shots", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--method", choices=["phasecut", "recursive"])
    p.add_argument("--init-modes", nargs="+", choices=["estimate", "truth", "random"])
    p.add_argument("--phasecut-updates", type=int)
    p.add_argument("--phasecut-nu", type=float)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--timing", action="store_true", default=None,
                   help="record wall times (results are then not byte-reproducible)")
    _add_solver_flags(p, batch=True)
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--plot-script", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("divergence", help="divergence rate against initialization error")
    p.add_argument("--config")
    p.add_argument("--qubits", type=int)
    p.add_argument("--setup", choices=["small", "tall"])
    p.add_argument("--total-shots", "--shots", dest="total_shots", type=int)
    p.add_argument("--inits", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    _add_solver_flags(p, batch=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_divergence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError) as exc:
        print(f"puretomo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
