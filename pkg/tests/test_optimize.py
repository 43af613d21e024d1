import numpy as np
import pytest

from puretomo.optimize import bfgs, strong_wolfe


def rosenbrock(x):
    f = 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
    g = np.array([-400 * x[0] * (x[1] - x[0] ** 2) - 2 * (1 - x[0]), 200 * (x[1] - x[0] ** 2)])
    return f, g


def quadratic(Q, b):
    def fun(x):
        return 0.5 * x @ Q @ x - b @ x, Q @ x - b

    return fun


def test_rosenbrock():
    res = bfgs(rosenbrock, np.array([-1.2, 1.0]))
    assert res.converged
    np.testing.assert_allclose(res.x, [1, 1], atol=1e-6)


def test_quadratic_matches_linear_solve(rng):
    B = rng.standard_normal((8, 8))
    Q = B @ B.T + 8 * np.eye(8)
    b = rng.standard_normal(8)
    res = bfgs(quadratic(Q, b), np.zeros(8))
    np.testing.assert_allclose(res.x, np.linalg.solve(Q, b), atol=1e-8)


def test_trace_non_increasing(rng):
    res = bfgs(rosenbrock, np.array([-1.2, 1.0]), keep_trace=True)
    assert np.all(np.diff(res.trace) <= 0)


def test_strong_wolfe_conditions():
    x = np.array([-1.2, 1.0])
    f0, g0 = rosenbrock(x)
    p = -g0
    alpha, f, g, _ = strong_wolfe(rosenbrock, x, f0, g0, p, alpha1=1e-3)
    assert alpha is not None
    assert f <= f0 + 1e-4 * alpha * g0 @ p
    assert abs(g @ p) <= 0.9 * abs(g0 @ p)


def test_zero_gradient_start():
    res = bfgs(quadratic(np.eye(3), np.zeros(3)), np.zeros(3))
    assert res.reason == "zero gradient" and res.iterations == 0


def test_iteration_limit():
    res = bfgs(rosenbrock, np.array([-1.2, 1.0]), max_iter=3)
    assert not res.converged and res.iterations == 3


def test_nonfinite_start():
    with pytest.raises(ValueError):
        bfgs(lambda x: (np.inf, x), np.zeros(2))
