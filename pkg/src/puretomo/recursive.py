"""Closed-form recursive reconstruction from the tall measurement design.

With ``v = [w1; w2]``, the first ``2n - 1`` blocks of ``|A_t(n) v|^2`` hold
``|A_t(n-1) w1|^2`` and ``|A_t(n-1) w2|^2`` interleaved, so both halves are
recovered up to a phase by recursion. Their relative phase is then read from
the last two blocks (types ``X...X`` and ``YX...X``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measurements import eigenvector_matrix
from .optimize import bfgs
from .states import StateVector

TAU_MODULUS = 1e-12
TAU_DC = 1e-12
REFINE_STEP_TOL = 1e-12
REFINE_MAX_ITERS = 200


@dataclass
class PhaseLink:
    """Relative phase between the two halves, with the data used to find it."""

    delta: float
    theta_d: float
    m: np.ndarray
    d_c: np.ndarray
    residual_init: float
    residual: float
    failed: bool


@dataclass
class RecursiveResult:
    state: StateVector
    failures: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return bool(self.failures)


def tall_length(n: int) -> int:
    return (2 * n + 1) * 2**n


def reconstruct_1q(p6, tau=TAU_MODULUS) -> np.ndarray:
    """One-qubit estimate from the six ``Z, X, Y`` probabilities.

    The scale is kept (the result has squared norm ``p6[0] + p6[1]``); wrap
    in :meth:`StateVector.from_unnormalized` for a unit-norm state.
    """
    p6 = np.asarray(p6, dtype=float)
    if p6.size != 6:
        raise ValueError("expected six probabilities")
    a = np.sqrt(max(p6[0], 0.0))
    b = np.sqrt(max(p6[1], 0.0))
    ab = a * b
    theta = 0.0
    if ab > tau:
        cos_t = (p6[2] - p6[3]) / (2.0 * ab)
        sin_t = (p6[4] - p6[5]) / (2.0 * ab)
        theta = float(np.arctan2(sin_t, cos_t))
    return np.array([a, b * np.exp(1j * theta)])


def split_blocks(p, n: int):
    """Split a tall ``n``-qubit probability vector into both halves' data.

    Returns ``(p_w1, p_w2, L_hat)``: the ``(n-1)``-qubit tall vectors of the
    upper and lower halves, and the last two blocks of ``p``.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    if n < 2:
        raise ValueError("splitting needs at least two qubits")
    if p.size != tall_length(n):
        raise ValueError(f"expected {tall_length(n)} probabilities for {n} qubits, got {p.size}")
    d = 2**n
    blocks = p.reshape(2 * n + 1, d)
    head = blocks[: 2 * n - 1]
    p_w1 = head[:, : d // 2].reshape(-1).copy()
    p_w2 = head[:, d // 2 :].reshape(-1).copy()
    L_hat = blocks[2 * n - 1 :].reshape(-1).copy()
    return p_w1, p_w2, L_hat


def phase_link_model(m, d_c, delta) -> np.ndarray:
    """Model of the last two blocks for relative phase ``delta``."""
    dd = np.real(d_c * np.exp(1j * delta))
    dq = np.imag(d_c * np.exp(1j * delta))
    return np.concatenate([m + dd, m - dd, m + dq, m - dq])


def recover_phase_link(w1_hat, w2_hat, L_hat, tau=TAU_DC, step_tol=REFINE_STEP_TOL,
                       max_iters=REFINE_MAX_ITERS) -> PhaseLink:
    """Relative phase ``theta2 - theta1`` of ``w2_hat`` w.r.t. ``w1_hat``.

    A two-probability closed form gives the starting angle, which is then
    refined by least squares over all ``2d`` probabilities of ``L_hat``.
    """
    w1_hat = np.asarray(w1_hat, dtype=complex)
    w2_hat = np.asarray(w2_hat, dtype=complex)
    L_hat = np.asarray(L_hat, dtype=float)
    h = w1_hat.size
    if w2_hat.size != h or L_hat.size != 4 * h:
        raise ValueError("inconsistent sizes for the phase link")
    E = eigenvector_matrix("X" * (h.bit_length() - 1)).conj().T if h > 1 else np.eye(1)
    a = E @ w1_hat
    b = E @ w2_hat
    m = 0.5 * (np.abs(a) ** 2 + np.abs(b) ** 2)
    d_c = np.conj(a) * b

    def residual(delta):
        return float(np.linalg.norm(phase_link_model(m, d_c, delta) - L_hat))

    k = int(np.argmax(np.abs(d_c)))
    dk = d_c[k]
    if abs(dk) <= tau * max(1.0, float(np.max(m, initial=0.0))):
        r = residual(0.0)
        return PhaseLink(0.0, 0.0, m, d_c, r, r, True)

    # [[Re dk, -Im dk], [Im dk, Re dk]] @ [cos, sin] = [L_k - m_k, L_{k+d} - m_k]
    rhs = np.array([L_hat[k] - m[k], L_hat[k + 2 * h] - m[k]])
    mat = np.array([[dk.real, -dk.imag], [dk.imag, dk.real]])
    cos_t, sin_t = np.linalg.solve(mat, rhs)
    theta_d = float(np.arctan2(sin_t, cos_t))

    def objective(x):
        delta = x[0]
        rot = d_c * np.exp(1j * delta)
        r = phase_link_model(m, d_c, delta) - L_hat
        # d/d delta of Re(rot) is -Im(rot), of Im(rot) is Re(rot)
        dmodel = np.concatenate([-rot.imag, rot.imag, rot.real, -rot.real])
        return float(r @ r), np.array([2.0 * float(r @ dmodel)])

    res = bfgs(objective, np.array([theta_d]), max_iter=max_iters, step_tol=step_tol)
    delta = float(np.angle(np.exp(1j * res.x[0])))
    return PhaseLink(delta, theta_d, m, d_c, residual(theta_d), residual(delta), False)


def _mass(p_tall: np.ndarray, n: int) -> float:
    blocks = p_tall.reshape(2 * n + 1, 2**n)
    return float(max(blocks.sum(axis=1).mean(), 0.0))


def _reconstruct(p: np.ndarray, n: int, failures: list, path: str) -> np.ndarray:
    if n == 1:
        return reconstruct_1q(p)
    p_w1, p_w2, L_hat = split_blocks(p, n)
    halves = []
    for p_w, tag in ((p_w1, "0"), (p_w2, "1")):
        w = _reconstruct(p_w, n - 1, failures, path + tag)
        nw = np.linalg.norm(w)
        mass = _mass(p_w, n - 1)
        halves.append(w * (np.sqrt(mass) / nw) if nw > 0.0 else w)
    link = recover_phase_link(halves[0], halves[1], L_hat)
    if link.failed:
        failures.append(path or "root")
    return np.concatenate([halves[0], np.exp(1j * link.delta) * halves[1]])


def reconstruct_recursive(p_hat, n_qb: int) -> RecursiveResult:
    """Estimate the state from tall-design probabilities.

    ``failures`` lists the recursion nodes (as bit-path strings, ``"root"``
    for the top) where the phase link was degenerate; the estimate is still
    returned, with a zero relative phase at those nodes.
    """
    p_hat = np.asarray(p_hat, dtype=float).reshape(-1)
    if p_hat.size != tall_length(n_qb):
        raise ValueError(f"expected {tall_length(n_qb)} probabilities for {n_qb} qubits")
    failures: list = []
    v = _reconstruct(p_hat, n_qb, failures, "")
    if not np.linalg.norm(v) > 0.0:
        v = np.zeros(2**n_qb, dtype=complex)
        v[0] = 1.0
    return RecursiveResult(StateVector.from_unnormalized(v), failures)
