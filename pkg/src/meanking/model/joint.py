"""Guessing functions and joint distributions over them.

A guessing function ``x`` assigns an outcome ``x[b] in range(d)`` to every
basis ``b in range(k)``. It is encoded as the integer
``sum(x[b] * d**b)``, so basis 0 is the least significant digit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np

DEFAULT_CAP = 10**6
WEIGHT_FLOOR = 1e-12
TOTAL_TOL = 1e-9


class CapExceeded(ValueError):
    """Raised when d**k exceeds the configured number of variables."""


def check_cap(d: int, k: int, cap: int = DEFAULT_CAP) -> int:
    n = d**k
    if n > cap:
        raise CapExceeded(f"d**k = {n} exceeds the variable cap {cap}")
    return n


def encode(x, d: int) -> int:
    x = np.asarray(x)
    if np.any((x < 0) | (x >= d)):
        raise ValueError(f"outcomes must lie in range({d})")
    return int(np.dot(x, d ** np.arange(len(x))))


def decode(index: int, d: int, k: int) -> np.ndarray:
    if not 0 <= index < d**k:
        raise ValueError(f"index {index} out of range for d={d}, k={k}")
    return (index // d ** np.arange(k)) % d


@lru_cache(maxsize=16)
def _all_functions(d: int, k: int) -> np.ndarray:
    idx = np.arange(d**k)
    table = (idx[:, None] // d ** np.arange(k)[None, :]) % d
    table.setflags(write=False)
    return table


def all_functions(d: int, k: int) -> np.ndarray:
    """Row ``n`` holds the decoded guessing function with index ``n``; shape ``(d**k, k)``."""
    return _all_functions(int(d), int(k))


@dataclass(frozen=True)
class JointDistribution:
    """Sparse nonnegative weights on guessing functions."""

    d: int
    k: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=float)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.d**self.k):
            raise ValueError("guessing function index out of range")
        if val.size and val.min() < -WEIGHT_FLOOR:
            raise ValueError(f"negative weight {val.min():.3e}")
        if val.sum() > 1.0 + TOTAL_TOL:
            raise ValueError(f"total weight {val.sum()!r} exceeds 1")
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], np.clip(val[order], 0.0, None)
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, weights, d: int, k: int, floor: float = 0.0) -> JointDistribution:
        w = np.asarray(weights, dtype=float)
        if w.shape != (d**k,):
            raise ValueError(f"dense weights must have length {d**k}")
        keep = np.flatnonzero(w > floor)
        return cls(d, k, keep, w[keep])

    @classmethod
    def uniform(cls, d: int, k: int) -> JointDistribution:
        n = check_cap(d, k)
        return cls(d, k, np.arange(n), np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, x, d: int) -> JointDistribution:
        return cls(d, len(x), [encode(x, d)], [1.0])

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def dense(self) -> np.ndarray:
        w = np.zeros(self.d**self.k)
        w[self.indices] = self.values
        return w

    def functions(self) -> np.ndarray:
        """Decoded guessing functions of the stored indices, shape ``(n, k)``."""
        return (self.indices[:, None] // self.d ** np.arange(self.k)[None, :]) % self.d

    def to_dict(self) -> dict[str, Any]:
        keep = self.values >= WEIGHT_FLOOR
        return {
            "d": self.d,
            "k": self.k,
            "weights": [[int(i), float(v)] for i, v in zip(self.indices[keep], self.values[keep])],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> JointDistribution:
        pairs = np.asarray(data["weights"], dtype=float).reshape(-1, 2)
        return cls(int(data["d"]), int(data["k"]), pairs[:, 0].astype(np.int64), pairs[:, 1])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def marginal(jd: JointDistribution, b: int, c: int) -> np.ndarray:
    """Pair marginal of bases ``b`` and ``c`` as a ``d x d`` matrix."""
    d, k = jd.d, jd.k
    if not (0 <= b < k and 0 <= c < k):
        raise IndexError(f"basis index out of range for k={k}: ({b}, {c})")
    x = jd.functions()
    out = np.zeros((d, d))
    np.add.at(out, (x[:, b], x[:, c]), jd.values)
    return out


def all_marginals(jd: JointDistribution) -> np.ndarray:
    """All pair marginals as a ``(k, k, d, d)`` array."""
    k = jd.k
    return np.stack([np.stack([marginal(jd, b, c) for c in range(k)]) for b in range(k)])


def marginal_residual(jd: JointDistribution, p: np.ndarray) -> float:
    """Max-norm distance between the off-diagonal pair marginals of ``jd`` and ``p``."""
    k = jd.k
    worst = 0.0
    for b in range(k):
        for c in range(b + 1, k):
            worst = max(worst, float(np.max(np.abs(marginal(jd, b, c) - p[b, c]))))
    return worst
