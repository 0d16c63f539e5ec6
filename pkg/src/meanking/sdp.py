"""Unambiguous retrodiction value by a log-barrier path-following method.

The program is::

    maximize    sum_x p(x)
    subject to  p(x) >= 0,   sum_x p(x) |eta_x><eta_x| <= 1/d

over the safe vectors ``eta_x``. Everything runs in the real coordinates of
hermitian matrices, where each ``|eta_x><eta_x|`` becomes ``v_x v_x^T``.
The dual is ``min tr(Y)/d`` over ``Y >= 0`` with ``v_x^T Y v_x >= 1``; the
reported gap is the distance between the primal value and a dual-feasible
point built from the barrier multiplier, so it is a certified bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .bases import BasisSet, SpanClassification, rank_of_span, transition_tensor
from .model.joint import DEFAULT_CAP, JointDistribution
from .model.lp import solve_model_lp
from .strategy import hatted, safe_vector_table

GAP_TOL = 1e-6
STEP_FRACTION = 0.95
MAX_ITER = 300


class BarrierFailure(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class SdpResult:
    value: float
    weights: JointDistribution
    gap: float
    iterations: int
    min_slack: float = 0.0

    def to_dict(self) -> dict:
        out = self.weights.to_dict()
        out.update(value=self.value, gap=self.gap, iterations=self.iterations)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _spd_solver(a: np.ndarray):
    """Factor a symmetric positive definite matrix after Jacobi scaling."""
    s = 1.0 / np.sqrt(np.diagonal(a))
    scaled = a * s[:, None] * s[None, :]
    try:
        factor = cho_factor(scaled)
        return lambda rhs: s * cho_solve(factor, s * rhs)
    except np.linalg.LinAlgError:
        pinv = np.linalg.pinv(scaled, rcond=1e-14, hermitian=True)
        return lambda rhs: s * (pinv @ (s * rhs))


def _max_psd_step(low: np.ndarray, delta: np.ndarray) -> float:
    """Largest ``a`` with ``L L^T + a * delta`` positive semidefinite."""
    inv = solve_triangular(low, np.eye(low.shape[0]), lower=True)
    lowest = np.linalg.eigvalsh(inv @ delta @ inv.T)[0]
    return np.inf if lowest >= 0 else -1.0 / lowest


def _max_pos_step(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    return float(np.min(-x[neg] / dx[neg])) if np.any(neg) else np.inf


def _certified_gap(v, y, p, d) -> float:
    """``tr(Y)/d - sum(p)`` after scaling ``Y`` to be dual feasible."""
    lhs = np.einsum("ij,jk,ik->i", v, y, v)
    scale = min(1.0, float(lhs.min()))
    if scale <= 0:
        return np.inf
    return float(np.trace(y)) / d / scale - float(p.sum())


def solve_barrier(
    v: np.ndarray,
    d: int,
    gap_tol: float = GAP_TOL,
    sigma: float | None = None,
    max_iter: int = MAX_ITER,
) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Maximize ``sum(p)`` subject to ``V^T diag(p) V <= I/d``, ``p >= 0``.

    Primal-dual path following on the log-barrier central path
    ``Z Y = mu I``, ``p * s = mu`` with the slack ``Z = I/d - V^T diag(p) V``
    and dual variables ``Y >= 0``, ``s = diag(V Y V^T) - 1 >= 0``. Each
    iteration takes one Newton step (HKM direction) towards the point with
    barrier parameter ``sigma * mu``; with ``sigma=None`` the reduction is
    chosen per step from an affine predictor. Both iterates stay feasible, so
    ``tr(Y)/d - sum(p)`` is a certified optimality gap.

    Returns ``(p, Y, gap, iterations)``.
    """
    v = np.asarray(v, dtype=float)
    n, m = v.shape
    c = np.eye(m) / d
    top = np.linalg.eigvalsh(v.T @ v)[-1]
    p = np.full(n, 1.0 / (2.0 * d * top))
    y = np.eye(m) * (2.0 / np.min(np.einsum("ij,ij->i", v, v)))
    s = np.einsum("ij,jk,ik->i", v, y, v) - 1.0
    gap = np.inf
    for it in range(1, max_iter + 1):
        z = c - (v.T * p) @ v
        low_z = np.linalg.cholesky(z)
        w = solve_triangular(low_z, v.T, lower=True).T  # w_x . w_y = v_x^T Z^-1 v_y
        zinv_diag = np.einsum("ij,ij->i", w, w)
        mu = (float(np.sum(z * y)) + float(p @ s)) / (m + n)
        vy = v @ y
        schur = (w @ w.T) * (vy @ v.T)
        schur[np.diag_indices_from(schur)] += s / p
        solve = _spd_solver(schur)
        zinv = solve_triangular(low_z, solve_triangular(low_z, np.eye(m), lower=True), lower=True, trans="T")
        low_y = np.linalg.cholesky(y)

        def direction(target, affine=None):
            rhs = 1.0 - target * (zinv_diag - 1.0 / p)
            ycorr = 0.0
            if affine is not None:
                # second-order (Mehrotra) terms of Z Y = mu I and p s = mu
                dp_a, dz_a, dy_a, ds_a = affine
                ycorr = zinv @ dz_a @ dy_a
                rhs = rhs + np.einsum("ij,jk,ik->i", v, ycorr, v) - dp_a * ds_a / p
            dp = solve(rhs)
            dz = -(v.T * dp) @ v
            dy = target * zinv - ycorr - y - zinv @ dz @ y
            dy = (dy + dy.T) / 2.0
            # s is linear in Y; take its change from the dY actually used so that
            # rounding in dY cannot push the recomputed s negative
            ds = np.einsum("ij,jk,ik->i", v, dy, v)
            a_primal = min(_max_pos_step(p, dp), _max_psd_step(low_z, dz))
            a_dual = min(_max_pos_step(s, ds), _max_psd_step(low_y, dy))
            return dp, dz, dy, ds, a_primal, a_dual

        affine = None
        if sigma is None:
            # predictor: how far mu could drop along the pure affine direction
            dp, dz, dy, ds, a_primal, a_dual = direction(0.0)
            ap, ad = min(1.0, a_primal), min(1.0, a_dual)
            mu_aff = (np.sum((z + ap * dz) * (y + ad * dy)) + (p + ap * dp) @ (s + ad * ds)) / (m + n)
            centering = float(np.clip((mu_aff / mu) ** 3, 0.0, 1.0))
            affine = (dp, dz, dy, ds)
        else:
            centering = sigma
        dp, dz, dy, ds, a_primal, a_dual = direction(centering * mu, affine)
        p = p + min(1.0, STEP_FRACTION * a_primal) * dp
        y = y + min(1.0, STEP_FRACTION * a_dual) * dy
        s = np.einsum("ij,jk,ik->i", v, y, v) - 1.0
        if np.any(s <= 0):
            s = np.maximum(s, 1e-300)
        gap = _certified_gap(v, y, p, d)
        if gap < gap_tol / 10:
            return p, y, gap, it
    raise BarrierFailure(f"no convergence in {max_iter} iterations (gap {gap:.2e})", (p, y, gap, max_iter))


def unambiguous_value(
    bs: BasisSet,
    cls: SpanClassification | None = None,
    cap: int = DEFAULT_CAP,
    gap_tol: float = GAP_TOL,
    restrict_to_span: bool = False,
) -> SdpResult:
    """Best total success probability when Alice may pass but must never be wrong."""
    cls = cls or rank_of_span(bs)
    d, k = bs.d, bs.k
    table = safe_vector_table(hatted(bs), cls, cap=cap)
    ok = np.flatnonzero(table.exists)
    v = table.coords[ok]
    if ok.size == 0:
        return SdpResult(0.0, JointDistribution(d, k, ok, np.zeros(0)), 0.0, 0, 1.0 / d)
    if restrict_to_span:
        _, _, vt = np.linalg.svd(hatted(bs).coords.reshape(k * d, -1))
        v = v @ vt[: cls.rank].T
    p, _, gap, steps = solve_barrier(v, d, gap_tol)
    slack = np.eye(v.shape[1]) / d - (v.T * p) @ v
    return SdpResult(
        value=float(p.sum()),
        weights=JointDistribution(d, k, ok, p),
        gap=float(gap),
        iterations=steps,
        min_slack=float(np.linalg.eigvalsh(slack)[0]),
    )


def check_sdp_lp_consistency(bs: BasisSet, tol: float = 1e-5) -> bool:
    """A classical model exists iff Alice can retrodict unambiguously with certainty."""
    lp = solve_model_lp(transition_tensor(bs))
    sdp = unambiguous_value(bs)
    return lp.feasible == (sdp.value >= 1.0 - tol)
