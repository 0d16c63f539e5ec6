"""Dense tableau simplex for ``max c^T x  s.t.  A x <= b, x >= 0`` with ``b >= 0``.

The slack basis is feasible, so no phase one is needed. Pricing is Dantzig's
rule; after a run of degenerate pivots the solver switches to Bland's rule
until the objective moves again. The tableau is rebuilt from the original
data every ``refactor_every`` pivots and before the final answer is read off.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
OPT_TOL = 1e-11


class LPError(RuntimeError):
    pass


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    value: float
    basis: np.ndarray
    pivots: int
    bland_pivots: int


class _Tableau:
    def __init__(self, a: np.ndarray, b: np.ndarray, c: np.ndarray):
        m, n = a.shape
        self.m, self.n = m, n
        self.full = np.hstack([a, np.eye(m)])
        self.b = b
        self.cost = np.concatenate([c, np.zeros(m)])
        self.basis = np.arange(n, n + m)
        self.rebuild()

    def rebuild(self) -> None:
        """Recompute ``B^-1 [A I b]`` and reduced costs from the original data."""
        bmat = self.full[:, self.basis]
        self.body = np.linalg.solve(bmat, np.hstack([self.full, self.b[:, None]]))
        self.rhs = self.body[:, -1].copy()
        self.body = self.body[:, :-1]
        np.maximum(self.rhs, 0.0, out=self.rhs)
        duals = np.linalg.solve(bmat.T, self.cost[self.basis])
        self.reduced = self.cost - duals @ self.full
        self.reduced[self.basis] = 0.0

    def pivot(self, row: int, col: int) -> None:
        piv = self.body[row, col]
        self.body[row] /= piv
        self.rhs[row] /= piv
        colvec = self.body[:, col].copy()
        colvec[row] = 0.0
        self.body -= np.outer(colvec, self.body[row])
        self.rhs -= colvec * self.rhs[row]
        np.maximum(self.rhs, 0.0, out=self.rhs)
        self.reduced -= self.reduced[col] * self.body[row]
        self.reduced[col] = 0.0
        self.basis[row] = col

    def entering(self, bland: bool) -> int | None:
        cand = np.flatnonzero(self.reduced > OPT_TOL)
        if cand.size == 0:
            return None
        if bland:
            return int(cand[0])
        return int(cand[np.argmax(self.reduced[cand])])

    def leaving(self, col: int, bland: bool) -> tuple[int, float]:
        colvec = self.body[:, col]
        rows = np.flatnonzero(colvec > PIVOT_TOL)
        if rows.size == 0:
            raise LPError("unbounded pivot column")
        ratios = self.rhs[rows] / colvec[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, best)]
        if bland:
            row = ties[np.argmin(self.basis[ties])]
        else:
            row = ties[np.argmax(colvec[ties])]
        return int(row), float(best)


def simplex_max(
    c,
    a,
    b,
    max_pivots: int = 100_000,
    refactor_every: int = 50,
    stall_limit: int = 30,
) -> LPResult:
    """Maximize ``c @ x`` subject to ``a @ x <= b`` and ``x >= 0`` (requires ``b >= 0``)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(b < 0):
        raise ValueError("right-hand side must be nonnegative")
    tab = _Tableau(a, b, c)
    pivots = bland_pivots = 0
    stall = 0
    bland = False
    while True:
        col = tab.entering(bland)
        if col is None:
            tab.rebuild()
            if tab.entering(bland) is None:
                break
            continue
        row, step = tab.leaving(col, bland)
        tab.pivot(row, col)
        pivots += 1
        bland_pivots += bland
        if step <= 1e-14:
            stall += 1
            if stall >= stall_limit and not bland:
                log.debug("switching to Bland's rule after %d degenerate pivots", stall)
                bland = True
        else:
            stall = 0
            bland = False
        if pivots % refactor_every == 0:
            tab.rebuild()
        if pivots >= max_pivots:
            raise LPError(f"pivot limit {max_pivots} reached")
    x = np.zeros(tab.n + tab.m)
    x[tab.basis] = tab.rhs
    x = x[: tab.n]
    return LPResult(
        x=x,
        value=float(c @ x),
        basis=tab.basis.copy(),
        pivots=pivots,
        bland_pivots=bland_pivots,
    )
