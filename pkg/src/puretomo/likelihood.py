"""Maximum-likelihood fine tuning of a pure-state estimate.

The state is parameterized as ``v = [sqrt(1 - |x|^2 - |y|^2), x + i y]`` with
``x, y`` in the open unit ball, and the ball is mapped onto the whole space by
``x' = tan(pi r / 2) / r * x`` (same for ``y``), ``r = sqrt(|x|^2 + |y|^2)``.
Each likelihood is minimized over the unconstrained ``(x', y')``.

Two negative log-likelihoods are provided:

* ``exact``: multinomial, ``-sum_k n_k log p_k(v)``;
* ``gauss``: central-limit approximation with a regularized covariance,
  ``N sum_k (p_hat_k - p_k(v))^2 / p_tilde_k``.

``mixed`` runs a fixed number of BFGS iterations on ``gauss`` and then
continues on ``exact`` until convergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .optimize import bfgs
from .sampling import ShotRecord, sample_probabilities
from .states import StateVector

TWO_OVER_PI = 2.0 / np.pi
PROB_FLOOR = 1e-300
REG_COUNT = 5
MIXED_GAUSS_ITERS = 100
OBJECTIVES = ("exact", "gauss", "mixed")


@dataclass(frozen=True)
class LikelihoodParams:
    """Unconstrained coordinates ``(x', y')``, each of length ``d - 1``."""

    x_prime: np.ndarray
    y_prime: np.ndarray

    @classmethod
    def from_vector(cls, z) -> "LikelihoodParams":
        z = np.asarray(z, dtype=float)
        half = z.size // 2
        return cls(z[:half].copy(), z[half:].copy())

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.x_prime, self.y_prime])

    @property
    def d(self) -> int:
        return self.x_prime.size + 1


@dataclass(frozen=True)
class PermutationContext:
    """Basis permutation applied to the state and to the columns of ``A``.

    ``v_perm = v[perm]``; rows of ``A`` (and the counts) keep their order
    because ``A[:, perm] @ v[perm] == A @ v``.
    """

    perm: np.ndarray

    @classmethod
    def identity(cls, d: int) -> "PermutationContext":
        return cls(np.arange(d))

    @classmethod
    def swap_max(cls, v) -> "PermutationContext":
        """Swap component 0 with the largest-modulus component (lowest index on ties)."""
        amps = np.asarray(v, dtype=complex).reshape(-1)
        perm = np.arange(amps.size)
        k = int(np.argmax(np.abs(amps)))
        perm[[0, k]] = perm[[k, 0]]
        return cls(perm)

    @property
    def inverse(self) -> np.ndarray:
        return np.argsort(self.perm)

    def apply(self, v) -> np.ndarray:
        return np.asarray(v, dtype=complex).reshape(-1)[self.perm]

    def undo(self, v_perm) -> np.ndarray:
        return np.asarray(v_perm, dtype=complex).reshape(-1)[self.inverse]

    def permute_columns(self, A) -> np.ndarray:
        return np.ascontiguousarray(np.asarray(A)[:, self.perm])


@dataclass(frozen=True)
class RegularizedProbs:
    """Sample probabilities with ``reg_count`` pseudo-observations added per outcome."""

    p_tilde: np.ndarray
    shots_per_type: int
    d: int
    reg_count: float = REG_COUNT

    @classmethod
    def from_sample(cls, p_hat, shots_per_type, d, reg_count=REG_COUNT) -> "RegularizedProbs":
        p_hat = np.asarray(p_hat, dtype=float)
        n = float(shots_per_type)
        p_tilde = (p_hat + reg_count / n) / (1.0 + reg_count * d / n)
        return cls(p_tilde, int(shots_per_type), int(d), reg_count)

    @classmethod
    def from_record(cls, rec: ShotRecord, reg_count=REG_COUNT) -> "RegularizedProbs":
        return cls.from_sample(sample_probabilities(rec), rec.shots_per_type, rec.setup.d, reg_count)

    def blocks(self) -> np.ndarray:
        return self.p_tilde.reshape(-1, self.d)


# ---------------------------------------------------------------------------
# Parameterization


def _radial(rp: float):
    """Return ``(s, r, v0)`` for ``r' = rp``: ``x = s x'``, ``r = s r'``, ``v0 = sqrt(1 - r^2)``."""
    if rp == 0.0:
        return TWO_OVER_PI, 0.0, 1.0
    r = TWO_OVER_PI * np.arctan(rp)
    one_minus_r = TWO_OVER_PI * np.arctan(1.0 / rp)
    v0 = np.sqrt(one_minus_r * (1.0 + r))
    return r / rp, r, v0


def _ds_over_r(rp: float) -> float:
    """``s'(r') / r'`` with a series near zero, where the closed form cancels."""
    if rp < 1e-3:
        r2 = rp * rp
        return TWO_OVER_PI * (-2.0 / 3.0 + 0.8 * r2 - (6.0 / 7.0) * r2 * r2)
    r2 = rp * rp
    return TWO_OVER_PI * (1.0 / (r2 * (1.0 + r2)) - np.arctan(rp) / (r2 * rp))


def params_to_state(params) -> StateVector:
    """Map unconstrained ``(x', y')`` to a unit-norm state (first component real, >= 0)."""
    return StateVector.from_unnormalized(_params_to_amplitudes(_vector(params)))


def _vector(params) -> np.ndarray:
    if isinstance(params, LikelihoodParams):
        return params.vector
    return np.asarray(params, dtype=float).reshape(-1)


def _params_to_amplitudes(z: np.ndarray) -> np.ndarray:
    half = z.size // 2
    s, _, v0 = _radial(float(np.linalg.norm(z)))
    v = np.empty(half + 1, dtype=complex)
    v[0] = v0
    v[1:] = s * (z[:half] + 1j * z[half:])
    return v


def state_to_params(v) -> LikelihoodParams:
    """Inverse of :func:`params_to_state`, after rotating ``v[0]`` onto the positive real axis."""
    amps = np.asarray(v, dtype=complex).reshape(-1)
    amps = amps / np.linalg.norm(amps)
    if abs(amps[0]) > 0.0:
        amps = amps * (abs(amps[0]) / amps[0])
    x = amps[1:].real
    y = amps[1:].imag
    r = float(np.sqrt(x @ x + y @ y))
    if r >= 1.0:
        raise ValueError("first component must be non-zero to be representable")
    factor = np.pi / 2.0 if r == 0.0 else np.tan(np.pi * r / 2.0) / r
    return LikelihoodParams(factor * x, factor * y)


def _pullback(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. ``z = (x', y')`` given ``w = A^H (dL/dp * A v)``."""
    half = z.size // 2
    rp = float(np.linalg.norm(z))
    s, _, v0 = _radial(rp)
    W = 2.0 * np.concatenate([w[1:].real, w[1:].imag])
    grad = s * W
    grad += (_ds_over_r(rp) * float(z @ W)) * z
    dv0_over_r = -(s / v0) * TWO_OVER_PI / (1.0 + rp * rp)
    grad += (2.0 * w[0].real * dv0_over_r) * z
    return grad


# ---------------------------------------------------------------------------
# Likelihoods


class LikelihoodProblem:
    """Counts, regularized probabilities and the (permuted) measurement matrix.

    ``exact(z)`` and ``gauss(z)`` return ``(value, gradient)`` for the
    unconstrained parameter vector ``z``, laid out as in the permuted basis
    of ``ctx``.
    """

    def __init__(self, rec: ShotRecord, A=None, ctx: PermutationContext | None = None,
                 reg_count=REG_COUNT):
        A = rec.setup.matrix() if A is None else np.asarray(A, dtype=complex)
        if A.shape != (rec.setup.n_prob, rec.setup.d):
            raise ValueError(f"A has shape {A.shape}, counts imply {(rec.setup.n_prob, rec.setup.d)}")
        self.ctx = ctx or PermutationContext.identity(rec.setup.d)
        self.A = self.ctx.permute_columns(A)
        self.AH = np.ascontiguousarray(self.A.conj().T)
        self.counts = rec.flat_counts().astype(float)
        self.N = float(rec.shots_per_type)
        self.p_hat = sample_probabilities(rec)
        self.reg = RegularizedProbs.from_sample(self.p_hat, rec.shots_per_type, rec.setup.d, reg_count)
        self._inv_p_tilde = 1.0 / self.reg.p_tilde
        self._observed = self.counts > 0

    def amplitudes(self, z) -> np.ndarray:
        return _params_to_amplitudes(np.asarray(z, dtype=float))

    def model_probabilities(self, z) -> np.ndarray:
        return np.abs(self.A @ self.amplitudes(z)) ** 2

    def exact(self, z):
        z = np.asarray(z, dtype=float)
        c = self.A @ _params_to_amplitudes(z)
        p = c.real**2 + c.imag**2
        above = p > PROB_FLOOR
        p_floored = np.where(above, p, PROB_FLOOR)
        obs = self._observed
        value = -float(self.counts[obs] @ np.log(p_floored[obs]))
        dL_dp = np.where(above, -self.counts / p_floored, 0.0)
        return value, _pullback(z, self.AH @ (dL_dp * c))

    def gauss(self, z):
        z = np.asarray(z, dtype=float)
        c = self.A @ _params_to_amplitudes(z)
        p = c.real**2 + c.imag**2
        eps = self.p_hat - p
        weighted = eps * self._inv_p_tilde
        value = self.N * float(eps @ weighted)
        dL_dp = -2.0 * self.N * weighted
        return value, _pullback(z, self.AH @ (dL_dp * c))

    def objective(self, name: str):
        if name == "exact":
            return self.exact
        if name == "gauss":
            return self.gauss
        raise ValueError(f"unknown likelihood {name!r}")


def nll_exact(params, counts: ShotRecord, A=None, ctx: PermutationContext | None = None):
    """Multinomial negative log-likelihood and its gradient w.r.t. ``(x', y')``."""
    return LikelihoodProblem(counts, A, ctx).exact(_vector(params))


def nll_gauss(params, counts: ShotRecord, A=None, ctx: PermutationContext | None = None,
              reg_count=REG_COUNT):
    """Gaussian-approximate negative log-likelihood and its gradient w.r.t. ``(x', y')``."""
    return LikelihoodProblem(counts, A, ctx, reg_count).gauss(_vector(params))


# ---------------------------------------------------------------------------
# Covariance algebra


def covariance_block(p) -> np.ndarray:
    """Multinomial covariance of one type, last outcome dropped: ``diag(p') - p' p'^T``."""
    p = np.asarray(p, dtype=float)[:-1]
    return np.diag(p) - np.outer(p, p)


def covariance_inverse_block(p) -> np.ndarray:
    """Closed-form inverse of :func:`covariance_block`: ``ones / p_d + diag(1 / p')``."""
    p = np.asarray(p, dtype=float)
    if (p <= 0.0).any():
        raise ValueError("probabilities must be strictly positive")
    m = p.size - 1
    return np.full((m, m), 1.0 / p[-1]) + np.diag(1.0 / p[:-1])


def covariance_inverse(reg: RegularizedProbs) -> np.ndarray:
    """Block-diagonal regularized inverse covariance over all measurement types."""
    return block_diag(*(covariance_inverse_block(b) for b in reg.blocks()))


def gauss_quadratic_form(p_hat, p_model, reg: RegularizedProbs) -> float:
    """``N e'^T S^-1 e'`` with every type's last error component removed."""
    eps = (np.asarray(p_hat, dtype=float) - np.asarray(p_model, dtype=float)).reshape(-1, reg.d)
    reduced = eps[:, :-1].reshape(-1)
    return reg.shots_per_type * float(reduced @ covariance_inverse(reg) @ reduced)


# ---------------------------------------------------------------------------
# Minimization


@dataclass
class StageInfo:
    objective: str
    iterations: int
    evaluations: int
    converged: bool
    reason: str
    value: float


@dataclass
class MLResult:
    state: StateVector
    objective: str
    stages: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return sum(s.iterations for s in self.stages)

    @property
    def converged(self) -> bool:
        return bool(self.stages) and self.stages[-1].converged


def minimize(objective: str, init, counts: ShotRecord, A=None, *, max_iter=10_000,
             step_tol=1e-12, mixed_gauss_iters=MIXED_GAUSS_ITERS, reg_count=REG_COUNT,
             ctx: PermutationContext | None = None) -> MLResult:
    """Fine-tune ``init`` by minimizing the chosen negative log-likelihood.

    Args:
        objective: ``"exact"``, ``"gauss"`` or ``"mixed"``.
        init: starting state (any global phase).
        counts: observed shot record.
        A: measurement matrix; defaults to the record's setup.
        max_iter: BFGS iteration cap per stage.
        step_tol: BFGS stops once an accepted step is shorter than this.
        mixed_gauss_iters: iterations spent on ``gauss`` before ``exact``
            when ``objective == "mixed"``.
        ctx: permutation to use; by default the largest component of
            ``init`` is moved to the front.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    init = np.asarray(init, dtype=complex).reshape(-1)
    if not np.all(np.isfinite(init)):
        raise ValueError("initial state contains non-finite values")
    if ctx is None:
        ctx = PermutationContext.swap_max(init)
    problem = LikelihoodProblem(counts, A, ctx, reg_count)
    z = state_to_params(ctx.apply(init)).vector

    if objective == "mixed":
        schedule = [("gauss", mixed_gauss_iters), ("exact", max_iter)]
    else:
        schedule = [(objective, max_iter)]

    stages = []
    for name, iters in schedule:
        res = bfgs(problem.objective(name), z, max_iter=iters, step_tol=step_tol)
        z = res.x
        stages.append(StageInfo(name, res.iterations, res.evaluations, res.converged,
                                res.reason, res.fun))
    state = StateVector.from_unnormalized(ctx.undo(problem.amplitudes(z)))
    return MLResult(state=state, objective=objective, stages=stages)
