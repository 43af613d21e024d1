"""Batch trials, error CDFs and divergence-rate curves."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .likelihood import MIXED_GAUSS_ITERS, OBJECTIVES, REG_COUNT, minimize
from .measurements import MeasurementSetup, SetupKind
from .phasecut import DEFAULT_NU, phasecut
from .recursive import reconstruct_recursive
from .sampling import simulate_shots
from .states import error_mu, random_state, state_at_error

log = logging.getLogger(__name__)

INIT_MODES = ("estimate", "truth", "random")
INITIALIZERS = ("phasecut", "recursive")
CSV_COLUMNS = ("trial", "seed", "stage", "mu", "seconds", "converged", "failure_flag")
DEFAULT_ALPHA = 0.1
OUTLIER_MU = 0.75


def trial_seed(master_seed: int, trial: int) -> int:
    """Independent 32-bit seed for one trial, derived from the master seed."""
    return int(np.random.SeedSequence([int(master_seed), int(trial)]).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    n_qb: int
    setup_kind: str = "tall"
    total_shots: int = 5000
    trials: int = 200
    initializer: str | None = None
    objectives: list = field(default_factory=lambda: ["mixed"])
    init_modes: list = field(default_factory=lambda: ["estimate"])
    master_seed: int = 0
    phasecut_updates: int = 5000
    phasecut_nu: float = DEFAULT_NU
    ml_max_iter: int = 10_000
    mixed_gauss_iters: int = MIXED_GAUSS_ITERS
    reg_count: float = REG_COUNT
    timing: bool = False

    def __post_init__(self):
        self.setup_kind = SetupKind(self.setup_kind).value
        if self.setup_kind == SetupKind.CUSTOM.value:
            raise ValueError("experiments run on the small or tall design")
        if self.initializer is None:
            self.initializer = "recursive" if self.setup_kind == "tall" else "phasecut"
        if self.initializer not in INITIALIZERS:
            raise ValueError(f"initializer must be one of {INITIALIZERS}")
        if self.initializer == "recursive" and self.setup_kind != "tall":
            raise ValueError("the recursive initializer needs the tall design")
        self.objectives = list(self.objectives)
        self.init_modes = list(self.init_modes)
        for o in self.objectives:
            if o not in OBJECTIVES:
                raise ValueError(f"unknown likelihood {o!r}")
        for m in self.init_modes:
            if m not in INIT_MODES:
                raise ValueError(f"unknown init mode {m!r}")
        if self.n_qb < 1 or self.trials < 0 or self.phasecut_updates < 1:
            raise ValueError("n_qb >= 1, trials >= 0 and phasecut_updates >= 1 are required")
        self.setup()  # validates total_shots against n_types lazily below
        if self.total_shots < self.setup().n_types:
            raise ValueError("total_shots must cover every measurement type")

    def setup(self) -> MeasurementSetup:
        return MeasurementSetup.from_kind(self.setup_kind, self.n_qb)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class TrialRecord:
    trial: int
    seed: int
    stage: str
    mu: float
    seconds: float | None
    converged: bool
    failure_flag: bool


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list

    def stages(self) -> list:
        seen = []
        for r in self.records:
            if r.stage not in seen:
                seen.append(r.stage)
        return seen

    def errors(self, stage: str) -> np.ndarray:
        return np.array([r.mu for r in self.records if r.stage == stage], dtype=float)

    def median_mu(self, stage: str) -> float:
        mus = self.errors(stage)
        return float(np.median(mus)) if mus.size else float("nan")

    def aggregates(self) -> dict:
        stages = {}
        for stage in self.stages():
            recs = [r for r in self.records if r.stage == stage]
            mus = np.array([r.mu for r in recs])
            xs, fs = empirical_cdf(mus)
            entry = {
                "n": len(recs),
                "median_mu": float(np.median(mus)),
                "mean_mu": float(np.mean(mus)),
                "max_mu": float(np.max(mus)),
                "n_above_0.75": int(np.sum(mus > OUTLIER_MU)),
                "n_failure_flag": int(sum(r.failure_flag for r in recs)),
                "n_not_converged": int(sum(not r.converged for r in recs)),
                "cdf": {"mu": xs.tolist(), "F": fs.tolist()},
            }
            if self.config.timing:
                entry["median_seconds"] = float(np.median([r.seconds for r in recs]))
            stages[stage] = entry
        return {
            "header": run_header(self.config),
            "median_mu": {s: v["median_mu"] for s, v in stages.items()},
            "stages": stages,
        }

    def to_csv(self) -> str:
        return records_to_csv(self.records)

    def write(self, out_dir, plot_script: bool = False) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / "results.csv", "aggregates": out / "aggregates.json"}
        paths["csv"].write_text(self.to_csv())
        paths["aggregates"].write_text(json.dumps(self.aggregates(), indent=2) + "\n")
        if plot_script:
            paths["plot"] = out / "plot_results.py"
            paths["plot"].write_text(PLOT_SCRIPT)
        return paths


def run_header(config) -> dict:
    return {"version": __version__, "master_seed": config.master_seed, "config": asdict(config)}


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([
            r.trial,
            r.seed,
            r.stage,
            repr(float(r.mu)),
            "" if r.seconds is None else f"{r.seconds:.6f}",
            int(r.converged),
            int(r.failure_flag),
        ])
    return buf.getvalue()


def initial_estimate(cfg: ExperimentConfig, setup: MeasurementSetup, rec, seed):
    """Initialization stage estimate: returns ``(state, failure_flag)``."""
    p_hat = rec.sample_probabilities()
    if cfg.initializer == "recursive":
        res = reconstruct_recursive(p_hat, setup.n_qb)
        return res.state, res.failed
    res = phasecut(setup.matrix(), p_hat, max_iters=cfg.phasecut_updates, seed=seed,
                   nu=cfg.phasecut_nu, max_updates=cfg.phasecut_updates)
    return res.v_hat, False


def run_trial(cfg: ExperimentConfig, trial: int) -> list:
    seed = trial_seed(cfg.master_seed, trial)
    rng = np.random.default_rng(seed)
    setup = cfg.setup()
    v = random_state(cfg.n_qb, rng)
    rec = simulate_shots(setup, v, cfg.total_shots, rng)
    random_init = random_state(cfg.n_qb, rng)
    pc_seed = int(rng.integers(2**32))

    clock = time.perf_counter
    records = []

    def add(stage, state, seconds, converged, failed):
        records.append(TrialRecord(trial, seed, stage, error_mu(v, state).mu,
                                   seconds if cfg.timing else None, converged, failed))

    t0 = clock()
    v_init, failed = initial_estimate(cfg, setup, rec, pc_seed)
    add(f"init:{cfg.initializer}", v_init, clock() - t0, True, failed)

    starts = {"estimate": v_init, "truth": v, "random": random_init}
    for objective in cfg.objectives:
        for mode in cfg.init_modes:
            t0 = clock()
            res = minimize(objective, starts[mode], rec, max_iter=cfg.ml_max_iter,
                           mixed_gauss_iters=cfg.mixed_gauss_iters, reg_count=cfg.reg_count)
            add(f"ml:{objective}:{mode}", res.state, clock() - t0, res.converged,
                failed and mode == "estimate")
    return records


def run_trials(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run ``cfg.trials`` independent trials; results are ordered by trial index."""
    log.info("experiment %s", json.dumps(run_header(cfg), sort_keys=True))
    indices = range(cfg.trials)
    if workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_trial, [cfg] * cfg.trials, indices))
    else:
        chunks = [run_trial(cfg, i) for i in indices]
    records = [r for chunk in chunks for r in chunk]
    return ExperimentResult(cfg, records)


def empirical_cdf(errors):
    """Right-continuous empirical CDF: sorted values and ``F(x_i) = i / n``."""
    x = np.sort(np.asarray(errors, dtype=float).reshape(-1))
    if x.size and (not np.all(np.isfinite(x)) or x[0] < 0):
        raise ValueError("errors must be finite and non-negative")
    n = x.size
    if n == 0:
        return x, np.zeros(0)
    # ties share the value at their last occurrence
    last = np.searchsorted(x, x, side="right")
    return x, last / n


def divergence_rate(mu_grid, mu_i, b_i, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Gaussian-kernel weighted fraction of runs that reached a different minimum.

    ``b_i`` is ``+1`` when run ``i`` ended at a different minimum than the
    error-free start, ``-1`` otherwise. ``(1 + sum w b / sum w) / 2`` is
    evaluated as the weighted share of ``+1`` entries, which is the same
    number without the cancellation at 0 and 1.
    """
    mu_i = np.asarray(mu_i, dtype=float).reshape(-1)
    b_i = np.asarray(b_i, dtype=float).reshape(-1)
    if mu_i.size == 0 or mu_i.size != b_i.size:
        raise ValueError("mu_i and b_i must be non-empty and of equal length")
    if not np.all(np.abs(b_i) == 1.0):
        raise ValueError("b_i entries must be -1 or +1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    grid = np.asarray(mu_grid, dtype=float).reshape(-1)
    z2 = ((grid[:, None] - mu_i[None, :]) / alpha) ** 2
    # shift exponents so the nearest sample has weight 1; the ratio is unchanged
    w = np.exp(-(z2 - z2.min(axis=1, keepdims=True)))
    return (w * (b_i > 0)).sum(axis=1) / w.sum(axis=1)


def same_minimum(v_a, v_b, v_truth_error: float) -> bool:
    """True when ``v_a`` and ``v_b`` are closer than 1% of ``v_a``'s error to the truth."""
    if not v_truth_error > 0:
        raise ValueError("v_truth_error must be positive")
    return error_mu(v_a, v_b).mu < 0.01 * v_truth_error


@dataclass
class DivergenceConfig:
    n_qb: int
    setup_kind: str = "small"
    total_shots: int = 5000
    n_inits: int = 200
    objectives: list = field(default_factory=lambda: list(OBJECTIVES))
    mu_max: float = float(np.sqrt(2.0))
    alpha: float = DEFAULT_ALPHA
    master_seed: int = 0
    ml_max_iter: int = 10_000
    mixed_gauss_iters: int = MIXED_GAUSS_ITERS
    reg_count: float = REG_COUNT

    def __post_init__(self):
        self.setup_kind = SetupKind(self.setup_kind).value
        self.objectives = list(self.objectives)
        for o in self.objectives:
            if o not in OBJECTIVES:
                raise ValueError(f"unknown likelihood {o!r}")
        if self.n_inits < 1:
            raise ValueError("n_inits must be >= 1")

    def mu_targets(self) -> np.ndarray:
        return np.linspace(0.0, self.mu_max, self.n_inits)


@dataclass
class DivergenceResult:
    config: DivergenceConfig
    mu_i: np.ndarray
    b: dict

    def rate(self, objective: str, mu_grid) -> np.ndarray:
        return divergence_rate(mu_grid, self.mu_i, self.b[objective], self.config.alpha)

    def to_json(self, mu_grid=None) -> dict:
        grid = np.linspace(0.0, self.config.mu_max, 101) if mu_grid is None else np.asarray(mu_grid)
        return {
            "header": run_header(self.config),
            "mu_i": self.mu_i.tolist(),
            "b": {k: np.asarray(v).astype(int).tolist() for k, v in self.b.items()},
            "mu_grid": grid.tolist(),
            "delta": {k: self.rate(k, grid).tolist() for k in self.b},
        }


def _divergence_case(cfg: DivergenceConfig, i: int, mu_target: float) -> dict:
    rng = np.random.default_rng(trial_seed(cfg.master_seed, i))
    setup = MeasurementSetup.from_kind(cfg.setup_kind, cfg.n_qb)
    v = random_state(cfg.n_qb, rng)
    rec = simulate_shots(setup, v, cfg.total_shots, rng)
    init = state_at_error(v, mu_target, rng)
    out = {}
    for objective in cfg.objectives:
        kw = dict(max_iter=cfg.ml_max_iter, mixed_gauss_iters=cfg.mixed_gauss_iters,
                  reg_count=cfg.reg_count)
        ref = minimize(objective, v, rec, **kw).state
        test = minimize(objective, init, rec, **kw).state
        ref_err = error_mu(v, ref).mu
        out[objective] = -1 if ref_err > 0 and same_minimum(ref, test, ref_err) else 1
    return out


def run_divergence(cfg: DivergenceConfig, workers: int = 1) -> DivergenceResult:
    """Per case: a fresh state, its shots, and a start at a prescribed error from the truth.

    Each likelihood is minimized from the true state and from the perturbed
    start; ``b = -1`` when both runs end at the same minimum.
    """
    log.info("divergence %s", json.dumps(run_header(cfg), sort_keys=True))
    mus = cfg.mu_targets()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cases = list(pool.map(_divergence_case, [cfg] * mus.size, range(mus.size), mus))
    else:
        cases = [_divergence_case(cfg, i, m) for i, m in enumerate(mus)]
    b = {o: np.array([c[o] for c in cases], dtype=int) for o in cfg.objectives}
    return DivergenceResult(cfg, mus, b)


PLOT_SCRIPT = '''"""Plot empirical CDFs of the errors stored in results.csv next to this file."""
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).resolve().parent
errors = defaultdict(list)
with open(here / "results.csv", newline="") as fh:
    for row in csv.DictReader(fh):
        errors[row["stage"]].append(float(row["mu"]))

fig, ax = plt.subplots(figsize=(6, 4))
for stage, mus in sorted(errors.items()):
    x = np.sort(mus)
    ax.step(x, np.arange(1, x.size + 1) / x.size, where="post", label=stage)
ax.set_xscale("log")
ax.set_xlabel("error mu")
ax.set_ylabel("empirical cdf")
ax.legend()
fig.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else here / "cdf.png"
fig.savefig(out, dpi=150)
print(f"wrote {out}")
'''
