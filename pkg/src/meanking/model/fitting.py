"""Approximate classical models by iterative proportional fitting over pairs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..bases import TransitionTensor
from .joint import DEFAULT_CAP, JointDistribution, all_functions, check_cap

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitResult:
    jd: JointDistribution
    residual: float
    sweeps: int
    history: tuple[float, ...]
    damped: int = 0

    def converged(self, tol: float) -> bool:
        return self.residual <= tol


def _pair_cells(d: int, k: int):
    x = all_functions(d, k)
    return [((b, c), x[:, b] * d + x[:, c]) for b, c in combinations(range(k), 2)]


def _residual(p: np.ndarray, cells, targets, d: int) -> float:
    worst = 0.0
    for (b, c), cell in cells:
        m = np.bincount(cell, weights=p, minlength=d * d)
        worst = max(worst, float(np.max(np.abs(m - targets[b, c]))))
    return worst


def iterative_fit(
    t: TransitionTensor,
    max_sweeps: int = 1000,
    tol: float = 1e-8,
    cap: int = DEFAULT_CAP,
) -> FitResult:
    """Rescale a joint distribution pair by pair until its marginals match ``t``.

    Starts from the uniform distribution. One sweep visits every pair
    ``b < c`` once and multiplies ``p(x)`` by ``p_bc(x_b, x_c) / m_bc(x_b, x_c)``
    (cells with ``m = 0`` are left alone). If a sweep increases the max-norm
    residual, the new iterate is averaged with the previous one.
    """
    d, k = t.d, t.k
    n = check_cap(d, k, cap)
    targets = t.p.reshape(k, k, d * d)
    cells = _pair_cells(d, k)
    p = np.full(n, 1.0 / n)
    resid = _residual(p, cells, targets, d)
    history = [resid]
    damped = 0
    sweeps = 0
    while resid > tol and sweeps < max_sweeps:
        prev = p.copy()
        for (b, c), cell in cells:
            m = np.bincount(cell, weights=p, minlength=d * d)
            ratio = np.divide(targets[b, c], m, out=np.ones(d * d), where=m > 0)
            p *= ratio[cell]
        sweeps += 1
        new = _residual(p, cells, targets, d)
        if new > resid:
            damped += 1
            log.info("sweep %d raised the residual (%.3e > %.3e); damping", sweeps, new, resid)
            p = 0.5 * (p + prev)
            new = _residual(p, cells, targets, d)
        resid = new
        history.append(resid)
    return FitResult(JointDistribution.from_dense(p, d, k), resid, sweeps, tuple(history), damped)
