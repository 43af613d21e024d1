"""Shot-noise simulation: multinomial outcome counts per measurement type."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .measurements import MeasurementSetup, probabilities


@dataclass(frozen=True)
class ShotRecord:
    """Outcome counts of every measurement type, ``shots_per_type`` shots each.

    ``counts`` has shape ``(n_types, d)``. Simulated records hold integers;
    :meth:`expected` builds the noiseless record ``N p`` with real counts.
    """

    setup: MeasurementSetup
    shots_per_type: int
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts)
        if counts.dtype.kind in "iub":
            counts = counts.astype(np.int64)
            sums_ok = (counts.sum(axis=1) == self.shots_per_type).all()
        else:
            counts = counts.astype(float)
            sums_ok = np.allclose(counts.sum(axis=1), self.shots_per_type, rtol=1e-9, atol=0)
        expected = (self.setup.n_types, self.setup.d)
        if counts.shape != expected:
            raise ValueError(f"counts have shape {counts.shape}, expected {expected}")
        if self.shots_per_type < 1:
            raise ValueError("shots_per_type must be positive")
        if (counts < 0).any():
            raise ValueError("negative counts")
        if not sums_ok:
            raise ValueError("every type must sum to shots_per_type")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def expected(cls, setup: MeasurementSetup, v, shots_per_type: int = 1) -> "ShotRecord":
        """Noiseless record whose counts are exactly ``shots_per_type * p(v)``."""
        p = probabilities(setup, v).reshape(setup.n_types, setup.d)
        p = p / p.sum(axis=1, keepdims=True)
        return cls(setup=setup, shots_per_type=int(shots_per_type), counts=shots_per_type * p)

    @property
    def is_integral(self) -> bool:
        return self.counts.dtype.kind == "i"

    @property
    def total_shots(self) -> int:
        return self.shots_per_type * self.setup.n_types

    def flat_counts(self) -> np.ndarray:
        return self.counts.reshape(-1)

    def sample_probabilities(self) -> np.ndarray:
        return sample_probabilities(self)

    def to_json(self) -> dict:
        return {
            "setup": self.setup.to_json(),
            "shots_per_type": int(self.shots_per_type),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ShotRecord":
        return cls(
            setup=MeasurementSetup.from_json(obj["setup"]),
            shots_per_type=int(obj["shots_per_type"]),
            counts=np.asarray(obj["counts"], dtype=np.int64),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path) -> "ShotRecord":
        return cls.from_json(json.loads(Path(path).read_text()))


def shots_per_type(setup: MeasurementSetup, total_shots: int) -> int:
    """Even split of ``total_shots`` over the setup's types; the remainder is dropped."""
    if total_shots < setup.n_types:
        raise ValueError(
            f"{total_shots} shots cannot cover {setup.n_types} measurement types"
        )
    return total_shots // setup.n_types


def simulate_shots(setup: MeasurementSetup, v, total_shots: int, seed=None) -> ShotRecord:
    """Measure ``v`` ``floor(total_shots / n_types)`` times with each type of ``setup``."""
    n = shots_per_type(setup, total_shots)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = probabilities(setup, v).reshape(setup.n_types, setup.d)
    p = p / p.sum(axis=1, keepdims=True)
    counts = np.stack([rng.multinomial(n, block) for block in p])
    return ShotRecord(setup=setup, shots_per_type=n, counts=counts)


def sample_probabilities(rec: ShotRecord) -> np.ndarray:
    """Observed frequencies ``counts / N``, concatenated in setup order."""
    return rec.flat_counts() / rec.shots_per_type
