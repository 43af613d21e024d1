import json

import numpy as np
import pytest

from puretomo.experiments import (
    CSV_COLUMNS,
    DivergenceConfig,
    ExperimentConfig,
    divergence_rate,
    empirical_cdf,
    run_divergence,
    run_trials,
    same_minimum,
)
from puretomo.states import random_state, state_at_error


class TestEmpiricalCdf:
    def test_single(self):
        x, f = empirical_cdf([0.5])
        assert x.tolist() == [0.5] and f.tolist() == [1.0]

    def test_two(self):
        x, f = empirical_cdf([0.3, 0.1])
        assert x.tolist() == [0.1, 0.3] and f.tolist() == [0.5, 1.0]

    def test_ties_share_the_upper_value(self):
        _, f = empirical_cdf([0.2, 0.2, 0.4])
        assert f.tolist() == [2 / 3, 2 / 3, 1.0]

    def test_empty(self):
        x, f = empirical_cdf([])
        assert x.size == 0 and f.size == 0

    def test_uniform_ks_distance(self, rng):
        x, f = empirical_cdf(rng.uniform(size=1000))
        sup = max(np.max(np.abs(f - x)), np.max(np.abs(f - 1 / 1000 - x)))
        assert sup < 0.06

    def test_monotone_from_zero_to_one(self, rng):
        _, f = empirical_cdf(rng.exponential(size=57))
        assert np.all(np.diff(f) >= 0) and f[0] > 0 and f[-1] == 1.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            empirical_cdf([0.1, -0.2])


class TestDivergenceRate:
    grid = np.linspace(0, np.sqrt(2), 50)

    def test_all_same(self):
        mu = np.linspace(0, np.sqrt(2), 30)
        np.testing.assert_array_equal(divergence_rate(self.grid, mu, -np.ones(30)), 0.0)
        np.testing.assert_array_equal(divergence_rate(self.grid, mu, np.ones(30)), 1.0)

    def test_step_far_from_boundary(self):
        mu = np.linspace(0, np.sqrt(2), 200)
        b = np.where(mu < 0.7, -1, 1)
        assert divergence_rate([0.0], mu, b, alpha=0.1)[0] < 0.01

    def test_against_direct_formula(self, rng):
        mu = rng.uniform(0, 1.4, 40)
        b = rng.choice([-1, 1], 40)
        g = np.array([0.3, 1.1])
        w = np.exp(-(((g[:, None] - mu[None, :]) / 0.1) ** 2))
        expected = 0.5 * (1 + (w @ b) / w.sum(axis=1))
        np.testing.assert_allclose(divergence_rate(g, mu, b), expected, atol=1e-12)

    def test_far_grid_point_is_finite(self):
        # direct kernel weights underflow here; the shifted form stays defined
        assert divergence_rate([10.0], [0.0, 0.1], [-1, 1], alpha=0.01)[0] == pytest.approx(1.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            divergence_rate([0.0], [], [])
        with pytest.raises(ValueError):
            divergence_rate([0.0], [0.1], [1], alpha=0.0)


class TestSameMinimum:
    def test_identical(self, rng):
        v = random_state(3, rng)
        assert same_minimum(v, v, 0.1)

    def test_far_apart(self, rng):
        v = random_state(3, rng)
        assert not same_minimum(v, state_at_error(v, 0.5, rng), 0.1)

    def test_boundary_is_strict(self):
        a = np.array([1.0, 0.0], dtype=complex)
        b = np.array([np.cos(0.1), np.sin(0.1)], dtype=complex)
        from puretomo.states import error_mu

        mu = error_mu(a, b).mu
        assert not same_minimum(a, b, mu / 0.01)
        assert same_minimum(a, b, np.nextafter(mu / 0.01, np.inf) * 1.0000001)

    def test_requires_positive_error(self, rng):
        with pytest.raises(ValueError):
            same_minimum(random_state(1, rng), random_state(1, rng), 0.0)


class TestConfig:
    def test_recursive_needs_tall(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n_qb=2, setup_kind="small", initializer="recursive")

    def test_default_initializer(self):
        assert ExperimentConfig(n_qb=2, setup_kind="tall").initializer == "recursive"
        assert ExperimentConfig(n_qb=2, setup_kind="small").initializer == "phasecut"

    def test_unknown_values(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n_qb=2, objectives=["huber"])
        with pytest.raises(ValueError):
            ExperimentConfig(n_qb=2, init_modes=["oracle"])
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"n_qb": 2, "bogus": 1})

    def test_not_enough_shots(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n_qb=3, setup_kind="tall", total_shots=5)


class TestRunTrials:
    def test_high_shot_two_qubits(self):
        cfg = ExperimentConfig(n_qb=2, setup_kind="tall", total_shots=10**6, trials=10,
                               master_seed=1)
        res = run_trials(cfg)
        assert np.all(res.errors("ml:mixed:estimate") < 0.02)

    def test_zero_trials(self, tmp_path):
        res = run_trials(ExperimentConfig(n_qb=2, trials=0))
        assert res.records == []
        x, f = empirical_cdf(res.errors("ml:mixed:estimate"))
        assert x.size == 0
        paths = res.write(tmp_path)
        assert paths["csv"].read_text() == ",".join(CSV_COLUMNS) + "\n"

    def test_record_layout(self):
        cfg = ExperimentConfig(n_qb=2, setup_kind="small", total_shots=2000, trials=2,
                               objectives=["exact", "gauss"], init_modes=["estimate", "random"],
                               phasecut_updates=200)
        res = run_trials(cfg)
        assert len(res.records) == 2 * 5
        assert res.stages() == ["init:phasecut", "ml:exact:estimate", "ml:exact:random",
                                "ml:gauss:estimate", "ml:gauss:random"]
        assert all(r.seconds is None for r in res.records)

    def test_deterministic_bytes(self, tmp_path):
        cfg = ExperimentConfig(n_qb=2, setup_kind="small", total_shots=4000, trials=3,
                               init_modes=["estimate", "truth"], phasecut_updates=300,
                               master_seed=7)
        a = run_trials(cfg).write(tmp_path / "a", plot_script=True)
        b = run_trials(cfg).write(tmp_path / "b")
        assert a["csv"].read_bytes() == b["csv"].read_bytes()
        assert a["aggregates"].read_bytes() == b["aggregates"].read_bytes()
        assert "matplotlib" in a["plot"].read_text()

    def test_parallel_matches_serial(self):
        cfg = ExperimentConfig(n_qb=2, setup_kind="tall", total_shots=5000, trials=4,
                               master_seed=3)
        assert run_trials(cfg).to_csv() == run_trials(cfg, workers=2).to_csv()

    def test_aggregates_schema(self):
        cfg = ExperimentConfig(n_qb=2, setup_kind="tall", total_shots=5000, trials=4,
                               timing=True)
        agg = run_trials(cfg).aggregates()
        assert set(agg) == {"header", "median_mu", "stages"}
        stage = agg["stages"]["ml:mixed:estimate"]
        assert stage["n"] == 4 and "median_seconds" in stage
        assert np.all(np.diff(stage["cdf"]["F"]) >= 0) and stage["cdf"]["F"][-1] == 1.0
        assert agg["header"]["master_seed"] == 0
        json.dumps(agg)

    def test_reference_dominance(self):
        cfg = ExperimentConfig(n_qb=3, setup_kind="tall", total_shots=5000, trials=40,
                               init_modes=["estimate", "truth"], master_seed=11)
        res = run_trials(cfg)
        ml = res.errors("ml:mixed:estimate")
        ref = res.errors("ml:mixed:truth")
        assert np.mean(ref <= ml + 0.01) >= 0.95


class TestDivergence:
    def test_small_run(self):
        cfg = DivergenceConfig(n_qb=2, setup_kind="tall", total_shots=5000, n_inits=12)
        res = run_divergence(cfg)
        assert res.mu_i[0] == 0.0 and res.mu_i[-1] == pytest.approx(np.sqrt(2))
        for o in cfg.objectives:
            assert res.b[o][0] == -1  # an error-free start reaches its own minimum
            assert set(np.unique(res.b[o])) <= {-1, 1}
        out = res.to_json()
        assert set(out["delta"]) == set(cfg.objectives)
        assert all(0 <= x <= 1 for x in out["delta"]["gauss"])
