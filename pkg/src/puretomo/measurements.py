"""Parallel unentangled measurements: eigenvector matrices and stacked designs.

Outcome indices follow the Kronecker convention: the first axis in a
measurement string is the most significant bit of the outcome index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache, reduce
from pathlib import Path

import numpy as np

SQRT_HALF = 1.0 / np.sqrt(2.0)

_SINGLE = {
    "X": np.array([[1, 1], [1, -1]], dtype=complex) * SQRT_HALF,
    "Y": np.array([[1, 1], [1j, -1j]], dtype=complex) * SQRT_HALF,
    "Z": np.eye(2, dtype=complex),
}


class Axis(str, Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


class SetupKind(str, Enum):
    SMALL = "small"
    TALL = "tall"
    CUSTOM = "custom"


def single_qubit_eigs(axis) -> np.ndarray:
    """Eigenvector matrix of the one-qubit measurement along ``axis``."""
    return _SINGLE[Axis(axis).value].copy()


def _check_axes(axes: str) -> str:
    axes = str(axes).upper()
    if not axes or set(axes) - set("XYZ"):
        raise ValueError(f"invalid measurement type {axes!r}")
    return axes


@lru_cache(maxsize=256)
def _eigenvector_matrix(axes: str) -> np.ndarray:
    mat = reduce(np.kron, (_SINGLE[a] for a in axes))
    mat.setflags(write=False)
    return mat


def eigenvector_matrix(axes: str) -> np.ndarray:
    """Tensor product of single-qubit eigenvector matrices, qubit 1 outermost.

    >>> eigenvector_matrix("ZX").shape
    (4, 4)
    """
    return _eigenvector_matrix(_check_axes(axes)).copy()


def small_types(n_qb: int) -> list[str]:
    """The four-type design: all Z, all Y, all X, then X/Y alternating from qubit 1."""
    alternating = "".join("X" if q % 2 == 0 else "Y" for q in range(n_qb))
    return ["Z" * n_qb, "Y" * n_qb, "X" * n_qb, alternating]


def tall_types(n_qb: int) -> list[str]:
    """The ``2 n_qb + 1`` type design supporting recursive reconstruction."""
    types = ["Z" * n_qb]
    for i in range(1, n_qb + 1):
        for s in "XY":
            types.append("Z" * (n_qb - i) + s + "X" * (i - 1))
    return types


@dataclass(frozen=True)
class MeasurementSetup:
    """Ordered list of parallel unentangled measurement types."""

    kind: SetupKind
    n_qb: int
    types: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", SetupKind(self.kind))
        types = tuple(_check_axes(t) for t in self.types)
        if self.n_qb < 1:
            raise ValueError("n_qb must be >= 1")
        if not types:
            raise ValueError("a setup needs at least one measurement type")
        for t in types:
            if len(t) != self.n_qb:
                raise ValueError(f"type {t!r} does not have {self.n_qb} axes")
        object.__setattr__(self, "types", types)

    @classmethod
    def small(cls, n_qb: int) -> "MeasurementSetup":
        return cls(SetupKind.SMALL, n_qb, tuple(small_types(n_qb)))

    @classmethod
    def tall(cls, n_qb: int) -> "MeasurementSetup":
        return cls(SetupKind.TALL, n_qb, tuple(tall_types(n_qb)))

    @classmethod
    def custom(cls, types) -> "MeasurementSetup":
        types = [_check_axes(t) for t in types]
        if not types:
            raise ValueError("a setup needs at least one measurement type")
        return cls(SetupKind.CUSTOM, len(types[0]), tuple(types))

    @classmethod
    def from_kind(cls, kind, n_qb: int) -> "MeasurementSetup":
        kind = SetupKind(kind)
        if kind is SetupKind.SMALL:
            return cls.small(n_qb)
        if kind is SetupKind.TALL:
            return cls.tall(n_qb)
        raise ValueError("custom setups need an explicit type list")

    @property
    def d(self) -> int:
        return 2**self.n_qb

    @property
    def n_types(self) -> int:
        return len(self.types)

    @property
    def n_prob(self) -> int:
        return self.n_types * self.d

    def matrix(self) -> np.ndarray:
        return stacked_matrix(self)

    def to_json(self) -> dict:
        obj = {"kind": self.kind.value, "n_qb": self.n_qb}
        if self.kind is SetupKind.CUSTOM:
            obj["types"] = list(self.types)
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "MeasurementSetup":
        kind = SetupKind(obj["kind"])
        n_qb = int(obj["n_qb"])
        if kind is SetupKind.CUSTOM:
            setup = cls.custom(obj["types"])
            if setup.n_qb != n_qb:
                raise ValueError("custom types disagree with n_qb")
            return setup
        setup = cls.from_kind(kind, n_qb)
        if "types" in obj and tuple(obj["types"]) != setup.types:
            raise ValueError(f"types listed for a {kind.value} setup do not match it")
        return setup

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "MeasurementSetup":
        return cls.from_json(json.loads(Path(path).read_text()))


@lru_cache(maxsize=64)
def _stacked(types: tuple[str, ...]) -> np.ndarray:
    mat = np.vstack([_eigenvector_matrix(t).conj().T for t in types])
    mat.setflags(write=False)
    return mat


def stacked_matrix(setup: MeasurementSetup) -> np.ndarray:
    """Vertical stack of the conjugate-transposed eigenvector matrices, one ``d``-row block per type.

    The returned array is cached and read-only.
    """
    return _stacked(setup.types)


def probabilities(setup: MeasurementSetup, v) -> np.ndarray:
    """Outcome probabilities ``|A v|^2`` for every type of ``setup``, concatenated."""
    amps = np.asarray(v, dtype=complex).reshape(-1)
    if amps.size != setup.d:
        raise ValueError(f"state has dimension {amps.size}, setup expects {setup.d}")
    return np.abs(stacked_matrix(setup) @ amps) ** 2
