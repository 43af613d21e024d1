import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from puretomo.states import StateVector, error_mu, random_state, state_at_error

SQRT2 = np.sqrt(2.0)


class TestStateVector:
    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            StateVector.from_unnormalized(np.ones(3))

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            StateVector(np.array([1.0, 1.0], dtype=complex))

    def test_amplitudes_read_only(self):
        v = random_state(2, 0)
        with pytest.raises(ValueError):
            v.amplitudes[0] = 0.0

    def test_json_round_trip(self, tmp_path):
        v = random_state(3, 4)
        path = tmp_path / "v.json"
        v.save(path)
        w = StateVector.load(path)
        np.testing.assert_array_equal(v.amplitudes, w.amplitudes)
        assert json.loads(path.read_text())["n_qb"] == 3

    def test_json_rejects_wrong_length(self):
        obj = random_state(2, 0).to_json()
        obj["n_qb"] = 3
        with pytest.raises(ValueError):
            StateVector.from_json(obj)


class TestRandomState:
    def test_unit_norm_one_qubit(self):
        v = random_state(1, 11).amplitudes
        assert abs(np.sum(np.abs(v) ** 2) - 1.0) < 1e-12

    def test_deterministic(self):
        np.testing.assert_array_equal(random_state(3, 5).amplitudes, random_state(3, 5).amplitudes)

    def test_component_means_uniform(self):
        rng = np.random.default_rng(0)
        mods = np.array([np.abs(random_state(2, rng).amplitudes) ** 2 for _ in range(100_000)])
        np.testing.assert_allclose(mods.mean(axis=0), 0.25, atol=0.01)


class TestErrorMu:
    def test_global_phase_zero(self, rng):
        v = random_state(3, rng)
        for phi in np.linspace(0, 2 * np.pi, 16, endpoint=False):
            assert error_mu(v, np.exp(1j * phi) * v.amplitudes).mu < 1e-7

    def test_orthogonal_is_sqrt2(self):
        e = np.eye(2, dtype=complex)
        err = error_mu(e[0], e[1])
        assert err.mu == pytest.approx(SQRT2, abs=1e-15)
        assert err.fidelity == 0.0

    def test_fidelity_two_ways(self, rng):
        for _ in range(50):
            v, w = random_state(4, rng), random_state(4, rng)
            err = error_mu(v, w)
            assert abs(abs(np.vdot(v.amplitudes, w.amplitudes)) - (1 - err.mu**2 / 2)) < 1e-12

    def test_symmetric_and_phase_invariant(self, rng):
        for _ in range(50):
            v, w = random_state(3, rng), random_state(3, rng)
            mu = error_mu(v, w).mu
            assert abs(mu - error_mu(w, v).mu) < 1e-12
            for phi in np.linspace(0, 2 * np.pi, 16, endpoint=False):
                assert abs(error_mu(v, np.exp(1j * phi) * w.amplitudes).mu - mu) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            error_mu(random_state(1, 0), random_state(2, 0))


class TestStateAtError:
    def test_endpoints(self, rng):
        v = random_state(3, rng)
        assert error_mu(v, state_at_error(v, 0.0, rng)).mu < 1e-7
        w = state_at_error(v, SQRT2, rng)
        assert abs(np.vdot(v.amplitudes, w.amplitudes)) < 1e-12

    def test_point_75(self, rng):
        v = random_state(4, rng)
        assert error_mu(v, state_at_error(v, 0.75, rng)).mu == pytest.approx(0.75, abs=1e-9)

    def test_round_trip_grid(self, rng):
        v = random_state(3, rng)
        for target in np.linspace(0.01, SQRT2, 100):
            assert abs(error_mu(v, state_at_error(v, target, rng)).mu - target) < 1e-9

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            state_at_error(random_state(1, 0), 1.5)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_mu_bounds_property(n, seed):
    rng = np.random.default_rng(seed)
    v, w = random_state(n, rng), random_state(n, rng)
    err = error_mu(v, w)
    assert 0.0 <= err.mu <= SQRT2 + 1e-12
    assert abs(err.fidelity - (1 - err.mu**2 / 2)) < 1e-12
    assert error_mu(v, v).mu < 1e-7
