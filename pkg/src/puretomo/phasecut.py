"""PhaseCut: phase retrieval through a unit-diagonal semidefinite relaxation.

For magnitudes ``b = sqrt(p_hat)`` the phases ``u`` of ``A v`` minimize
``u^H M u`` with ``M = diag(b) (I - A A^+) diag(b)``. Dropping the rank-one
constraint on ``U = u u^H`` leaves ``min tr(U M)`` over PSD ``U`` with unit
diagonal, solved here by block-coordinate descent with a log-barrier
weight ``nu``. A column update that would raise ``tr(U M)`` is skipped, so
the objective never increases from one sweep to the next. The phases are
read off the leading eigenvector of ``U`` and the state is ``A^+ (u * b)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .states import StateVector

DEFAULT_NU = 1e-6
POWER_TOL = 1e-10
POWER_MAX_ITERS = 10_000
MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class PhaseCutProblem:
    A: np.ndarray
    A_pinv: np.ndarray
    b: np.ndarray
    M: np.ndarray


@dataclass
class PhaseCutResult:
    v_hat: StateVector
    u_hat: np.ndarray
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    updates: int = 0
    U: np.ndarray | None = None


def build_problem(A, p_hat, weights: str = "sqrt") -> PhaseCutProblem:
    """Assemble ``M`` from the measurement matrix and sample probabilities.

    ``weights="sqrt"`` puts ``sqrt(p_hat)`` on the diagonal factors (the
    magnitudes of ``A v``); ``weights="linear"`` uses ``p_hat`` itself.
    """
    A = np.asarray(A, dtype=complex)
    p_hat = np.asarray(p_hat, dtype=float).reshape(-1)
    if p_hat.size != A.shape[0]:
        raise ValueError(f"p_hat has {p_hat.size} entries, A has {A.shape[0]} rows")
    if (p_hat < 0).any():
        raise ValueError("sample probabilities must be non-negative")
    if weights not in ("sqrt", "linear"):
        raise ValueError("weights must be 'sqrt' or 'linear'")
    A_pinv = np.linalg.pinv(A)
    b = np.sqrt(p_hat)
    w = b if weights == "sqrt" else p_hat
    P = np.eye(A.shape[0]) - A @ A_pinv
    M = w[:, None] * P * w[None, :]
    M = 0.5 * (M + M.conj().T)
    return PhaseCutProblem(A=A, A_pinv=A_pinv, b=b, M=M)


def leading_eigenvector(U, seed=None, tol=POWER_TOL, max_iters=POWER_MAX_ITERS):
    """Power iteration on a PSD matrix; stops on a small relative Rayleigh-quotient change."""
    rng = np.random.default_rng(seed)
    n = U.shape[0]
    q = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    q /= np.linalg.norm(q)
    rayleigh = np.vdot(q, U @ q).real
    for _ in range(max_iters):
        y = U @ q
        ny = np.linalg.norm(y)
        if ny == 0.0:
            break
        q = y / ny
        new = np.vdot(q, U @ q).real
        if abs(new - rayleigh) <= tol * abs(new):
            rayleigh = new
            break
        rayleigh = new
    return q, rayleigh


def _trace_product(U, M) -> float:
    return float(np.sum(U * M.T).real)


def unit_phases(q) -> np.ndarray:
    mag = np.abs(q)
    out = np.ones_like(q, dtype=complex)
    nz = mag > 0
    out[nz] = q[nz] / mag[nz]
    return out


def solve(problem: PhaseCutProblem, max_iters: int = 5000, seed=None, nu: float = DEFAULT_NU,
          max_updates: int | None = None, keep_matrix: bool = False) -> PhaseCutResult:
    """Block-coordinate descent on the relaxed problem, starting from ``U = I``.

    Args:
        problem: output of :func:`build_problem`.
        max_iters: number of full cyclic sweeps over the indices.
        seed: seeds the power-iteration start vector.
        nu: barrier weight in ``(0, 1)``.
        max_updates: if given, stop after this many single-column updates
            even in the middle of a sweep.
        keep_matrix: keep the final ``U`` on the result.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not 0.0 < nu < 1.0:
        raise ValueError("nu must lie in (0, 1)")
    M = problem.M
    n = M.shape[0]
    U = np.eye(n, dtype=complex)
    shrink = np.sqrt(1.0 - nu)
    trace = [_trace_product(U, M)]
    budget = max_iters * n if max_updates is None else min(max_updates, max_iters * n)
    updates = 0
    sweeps = 0
    while updates < budget:
        for i in range(n):
            if updates >= budget:
                break
            col = M[:, i]
            x = U @ col - U[:, i] * col[i]
            x[i] = 0.0
            gamma = np.vdot(x, col).real
            if gamma > 0.0:
                u = x * (-shrink / np.sqrt(gamma))
            else:
                u = np.zeros(n, dtype=complex)
            updates += 1
            # off-diagonal contribution of column i to tr(U M), before and after
            before = np.vdot(col, U[:, i]).real - col[i].real
            if np.vdot(col, u).real > before:
                continue
            u[i] = 1.0
            U[:, i] = u
            U[i, :] = u.conj()
        sweeps += 1
        trace.append(_trace_product(U, M))
        if trace[-1] - trace[-2] > MONOTONE_TOL * max(1.0, abs(trace[-2])):
            raise RuntimeError(
                f"tr(UM) increased during sweep {sweeps}: {trace[-2]!r} -> {trace[-1]!r}"
            )

    q, _ = leading_eigenvector(U, seed=seed)
    u_hat = unit_phases(q)
    v = problem.A_pinv @ (u_hat * problem.b)
    if not np.linalg.norm(v) > 0.0:
        # all-zero data carries no information; return the first basis state
        v = np.zeros(problem.A.shape[1], dtype=complex)
        v[0] = 1.0
    return PhaseCutResult(
        v_hat=StateVector.from_unnormalized(v),
        u_hat=u_hat,
        objective_trace=trace,
        iterations=sweeps,
        updates=updates,
        U=U if keep_matrix else None,
    )


def phasecut(A, p_hat, max_iters: int = 5000, seed=None, nu: float = DEFAULT_NU,
             max_updates: int | None = None, weights: str = "sqrt") -> PhaseCutResult:
    return solve(build_problem(A, p_hat, weights), max_iters=max_iters, seed=seed, nu=nu,
                 max_updates=max_updates)
