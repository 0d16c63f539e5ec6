"""Classical model existence as a linear program in the joint weights."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..bases import TransitionTensor
from .joint import DEFAULT_CAP, JointDistribution, all_functions, check_cap
from .simplex import simplex_max

FEASIBLE_TOL = 1e-7
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class ModelLPResult:
    status: str
    jd: JointDistribution
    value: float
    pivots: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def pair_constraints(d: int, k: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Incidence matrix: one row per ``(b < c, i, j)``, one column per guessing function."""
    x = all_functions(d, k)
    pairs = list(combinations(range(k), 2))
    rows = np.zeros((len(pairs) * d * d, d**k))
    cols = np.arange(d**k)
    for n, (b, c) in enumerate(pairs):
        rows[n * d * d + x[:, b] * d + x[:, c], cols] = 1.0
    return rows, pairs


def solve_model_lp(t: TransitionTensor, cap: int = DEFAULT_CAP) -> ModelLPResult:
    """Maximize ``sum p(x)`` with every pair marginal bounded by ``p_bc(i, j)``.

    The optimum is 1 exactly when a classical model exists; below 1 it
    measures how far the tensor is from having one.
    """
    d, k = t.d, t.k
    check_cap(d, k, cap)
    if k == 1:
        jd = JointDistribution(d, 1, np.arange(d), np.full(d, 1.0 / d))
        return ModelLPResult(FEASIBLE, jd, 1.0)
    a, pairs = pair_constraints(d, k)
    rhs = np.concatenate([t.p[b, c].reshape(-1) for b, c in pairs])
    res = simplex_max(np.ones(d**k), a, np.clip(rhs, 0.0, None))
    status = FEASIBLE if res.value >= 1.0 - FEASIBLE_TOL else INFEASIBLE
    return ModelLPResult(status, JointDistribution.from_dense(res.x, d, k), res.value, res.pivots)
