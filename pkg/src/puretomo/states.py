"""Pure-state vectors, random states and the phase-invariant error metric."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

NORM_TOL = 1e-12
FILE_NORM_TOL = 1e-9


@dataclass(frozen=True)
class StateVector:
    """Unit-norm amplitude vector of an ``n_qb``-qubit pure state.

    The global phase is left as given; comparisons go through
    :func:`error_mu`, which ignores it.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        d = amps.size
        if d < 2 or d & (d - 1):
            raise ValueError(f"dimension {d} is not a power of two >= 2")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not unit norm (norm = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError("cannot normalize a zero or non-finite vector")
        return cls(amps / norm)

    @property
    def d(self) -> int:
        return self.amplitudes.size

    @property
    def n_qb(self) -> int:
        return self.d.bit_length() - 1

    def __len__(self):
        return self.d

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.amplitudes
        return self.amplitudes.astype(dtype)

    def to_json(self) -> dict:
        return {
            "n_qb": self.n_qb,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StateVector":
        amps = np.array([complex(re, im) for re, im in obj["amplitudes"]])
        n_qb = int(obj["n_qb"])
        if amps.size != 2**n_qb:
            raise ValueError(f"expected {2**n_qb} amplitudes for n_qb={n_qb}, got {amps.size}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > FILE_NORM_TOL:
            raise ValueError(f"stored state is not normalized (norm = {norm!r})")
        # leave already-normalized data untouched so save/load is exact
        return cls(amps if abs(norm - 1.0) <= NORM_TOL else amps / norm)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "StateVector":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class StateError:
    """Distance after optimal global-phase alignment, with the matching fidelity."""

    mu: float
    fidelity: float


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_state(n_qb: int, seed=None) -> StateVector:
    """Draw a Haar-random pure state on ``n_qb`` qubits.

    Args:
        n_qb: number of qubits, at least 1.
        seed: anything accepted by :func:`numpy.random.default_rng`, or a
            ``Generator`` (which is then advanced).
    """
    if n_qb < 1:
        raise ValueError("n_qb must be >= 1")
    rng = _rng(seed)
    d = 2**n_qb
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return StateVector.from_unnormalized(z)


def _as_array(v) -> np.ndarray:
    if isinstance(v, StateVector):
        return v.amplitudes
    return np.asarray(v, dtype=complex).reshape(-1)


def error_mu(v, v_hat) -> StateError:
    """L2 error between ``v`` and ``v_hat`` once ``v_hat``'s global phase is aligned.

    ``mu = ||v - v_hat * exp(-i xi)||`` with ``exp(i xi) = v^H v_hat / |v^H v_hat|``,
    which reduces to ``sqrt(2 - 2 |v^H v_hat|)`` for unit vectors.
    """
    a = _as_array(v)
    b = _as_array(v_hat)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
    overlap = np.vdot(a, b)
    mag = abs(overlap)
    phase = overlap / mag if mag > 0.0 else 1.0
    mu = float(np.linalg.norm(a - b * np.conj(phase)))
    return StateError(mu=mu, fidelity=float(mag))


def state_at_error(v, mu_target: float, seed=None) -> StateVector:
    """Return a random state whose error to ``v`` is exactly ``mu_target``."""
    if not 0.0 <= mu_target <= np.sqrt(2.0) + 1e-15:
        raise ValueError("mu_target must lie in [0, sqrt(2)]")
    a = _as_array(v)
    rng = _rng(seed)
    while True:
        w = rng.standard_normal(a.size) + 1j * rng.standard_normal(a.size)
        w = w - a * np.vdot(a, w)
        nw = np.linalg.norm(w)
        if nw > 1e-8:
            break
    w /= nw
    angle = np.arccos(np.clip(1.0 - mu_target**2 / 2.0, -1.0, 1.0))
    return StateVector.from_unnormalized(np.cos(angle) * a + np.sin(angle) * w)
