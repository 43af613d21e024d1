import numpy as np
import pytest

from puretomo.measurements import MeasurementSetup, probabilities
from puretomo.sampling import ShotRecord, sample_probabilities, shots_per_type, simulate_shots
from puretomo.states import random_state


class TestShotsPerType:
    def test_small_5000(self):
        assert shots_per_type(MeasurementSetup.small(7), 5000) == 1250

    def test_tall_5000_floor(self):
        assert shots_per_type(MeasurementSetup.tall(7), 5000) == 333

    def test_too_few(self):
        with pytest.raises(ValueError):
            shots_per_type(MeasurementSetup.tall(3), 6)


class TestSimulate:
    def test_deterministic_outcome(self):
        rec = simulate_shots(MeasurementSetup.custom(["Z"]), [1, 0], 4, seed=0)
        np.testing.assert_array_equal(rec.counts, [[4, 0]])

    def test_same_seed_same_counts(self):
        setup = MeasurementSetup.tall(3)
        v = random_state(3, 1)
        a = simulate_shots(setup, v, 7000, seed=9)
        b = simulate_shots(setup, v, 7000, seed=9)
        np.testing.assert_array_equal(a.counts, b.counts)

    def test_large_n_close(self, rng):
        setup = MeasurementSetup.small(2)
        v = random_state(2, rng)
        rec = simulate_shots(setup, v, 4 * 10**5, rng)
        assert np.max(np.abs(rec.sample_probabilities() - probabilities(setup, v))) < 0.01

    def test_mean_and_covariance(self, rng):
        setup = MeasurementSetup.custom(["XY"])
        v = random_state(2, rng)
        p = probabilities(setup, v)
        N, R = 50, 10_000
        draws = np.array([simulate_shots(setup, v, N, rng).sample_probabilities()
                          for _ in range(R)])
        se = np.sqrt(p * (1 - p) / N / R)
        assert np.all(np.abs(draws.mean(axis=0) - p) < 3 * se + 1e-15)

        scaled = np.sqrt(N) * (draws - p)
        cov = scaled.T @ scaled / R
        target = np.diag(p) - np.outer(p, p)
        # standard error of a sample second moment, from fourth moments
        prod = scaled[:, :, None] * scaled[:, None, :]
        se_cov = prod.std(axis=0) / np.sqrt(R)
        assert np.all(np.abs(cov - target) < 5 * se_cov + 1e-12)


class TestShotRecord:
    def test_sample_probabilities(self):
        setup = MeasurementSetup.custom(["Z"])
        np.testing.assert_array_equal(
            sample_probabilities(ShotRecord(setup, 4, np.array([[4, 0]]))), [1, 0])
        setup2 = MeasurementSetup.custom(["ZZ"])
        np.testing.assert_array_equal(
            ShotRecord(setup2, 4, np.array([[1, 1, 1, 1]])).sample_probabilities(), [0.25] * 4)

    def test_block_sums_exact(self, rng):
        setup = MeasurementSetup.tall(3)
        rec = simulate_shots(setup, random_state(3, rng), 7 * 333, rng)
        blocks = rec.sample_probabilities().reshape(setup.n_types, -1)
        np.testing.assert_array_equal(blocks.sum(axis=1), 1.0)

    def test_rejects_bad_sums(self):
        with pytest.raises(ValueError):
            ShotRecord(MeasurementSetup.custom(["Z"]), 4, np.array([[3, 0]]))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ShotRecord(MeasurementSetup.custom(["Z"]), 4, np.array([[5, -1]]))

    def test_expected_record(self, rng):
        setup = MeasurementSetup.small(2)
        v = random_state(2, rng)
        rec = ShotRecord.expected(setup, v, 1000)
        assert not rec.is_integral
        np.testing.assert_allclose(rec.sample_probabilities(), probabilities(setup, v), atol=1e-14)

    def test_json_round_trip(self, tmp_path, rng):
        setup = MeasurementSetup.tall(2)
        rec = simulate_shots(setup, random_state(2, rng), 5000, rng)
        path = tmp_path / "shots.json"
        rec.save(path)
        back = ShotRecord.load(path)
        assert back.setup == setup and back.shots_per_type == 1000
        np.testing.assert_array_equal(back.counts, rec.counts)
