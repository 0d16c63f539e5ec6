"""Push a basis set towards mutual unbiasedness by descent on the unitary group.

The objective ``F = sum_{a<b} sum_{ij} p_ab(i, j)**2`` is at least
``k(k-1)/2 / d**2`` with equality exactly for mutually unbiased bases. Each
basis is held as a unitary ``U_b`` (columns are basis vectors) and updated
along geodesics ``U_b <- expm(-eta X_b) U_b`` with ``X_b`` the
anti-hermitian projection of the Euclidean gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bases import BasisSet

ARMIJO = 1e-4


@dataclass(frozen=True)
class DebiasResult:
    basis_set: BasisSet
    objective: float
    grad_norm: float
    steps: int
    converged: bool
    history: tuple[float, ...]

    @property
    def lower_bound(self) -> float:
        return unbiased_bound(self.basis_set.d, self.basis_set.k)


def unbiased_bound(d: int, k: int) -> float:
    return k * (k - 1) / 2 / d**2


def _unitaries(bs: BasisSet) -> np.ndarray:
    return np.transpose(bs.vectors, (0, 2, 1)).copy()


def objective(u: np.ndarray) -> float:
    k, d, _ = u.shape
    amp = np.einsum("aji,bjl->abil", u.conj(), u)
    sq = np.abs(amp) ** 4
    return float(np.sum(np.triu(sq.sum(axis=(2, 3)), 1))) / d**2


def euclidean_gradient(u: np.ndarray) -> np.ndarray:
    """``2 dF/d conj(U_a)`` for every basis ``a``."""
    k, d, _ = u.shape
    amp = np.einsum("aji,bjl->abil", u.conj(), u)  # amp[a, b] = U_a^* U_b
    weight = 2.0 / d**2 * np.abs(amp) ** 2 * amp
    weight[np.arange(k), np.arange(k)] = 0.0
    return 2.0 * np.einsum("bjl,abil->aji", u, weight.conj())


def riemannian_direction(u: np.ndarray) -> np.ndarray:
    g = euclidean_gradient(u)
    a = g @ np.conj(np.transpose(u, (0, 2, 1)))
    return a - np.conj(np.transpose(a, (0, 2, 1)))


def _geodesic(x: np.ndarray):
    """Return ``eta -> expm(-eta X)`` for a stack of anti-hermitian ``X``."""
    vals, vecs = np.linalg.eigh(1j * x)  # X = -i H with H hermitian

    def at(eta: float) -> np.ndarray:
        phase = np.exp(1j * eta * vals)
        return np.einsum("aij,aj,akj->aik", vecs, phase, vecs.conj())

    return at


def _polar(u: np.ndarray) -> np.ndarray:
    w, _, vh = np.linalg.svd(u)
    return w @ vh


def debias(bs: BasisSet, max_steps: int = 5000, tol: float = 1e-10) -> DebiasResult:
    """Geodesic descent with backtracking line search.

    Stops when the relative decrease of an accepted step or the gradient norm
    falls below ``tol``; ``converged`` is False if ``max_steps`` ran out first.
    """
    u = _unitaries(bs)
    f = objective(u)
    history = [f]
    eta = 1.0
    steps = 0
    converged = False
    gnorm = np.inf
    while steps < max_steps:
        x = riemannian_direction(u)
        gnorm = float(np.sqrt(np.sum(np.abs(x) ** 2)))
        if gnorm < tol:
            converged = True
            break
        slope = 0.5 * gnorm**2
        step = _geodesic(x)
        eta = min(2.0 * eta, 1e6)
        while True:
            trial = step(eta) @ u
            f_trial = objective(trial)
            if f_trial <= f - ARMIJO * eta * slope:
                break
            eta *= 0.5
            if eta < 1e-16:
                break
        if not f_trial < f:
            converged = True
            break
        steps += 1
        u = trial
        if steps % 50 == 0:
            u = _polar(u)
            f_trial = objective(u)
        rel = (f - f_trial) / f
        f = f_trial
        history.append(f)
        if rel < tol:
            converged = True
            break
    out = BasisSet(np.transpose(u, (0, 2, 1)))
    return DebiasResult(out, f, gnorm, steps, converged, tuple(history))
