"""Safe vectors and Alice's strategy on the doubled space ``C^d (x) C^d``.

Vectors of the doubled space are stored flat with index ``alpha * d + beta``,
so the vector of a ``d x d`` matrix ``M`` is ``M.reshape(-1)``. Under this
identification the hatted vector of ``phi`` is the projector ``|phi><phi|``,
``Omega`` is the identity matrix, and the inner product is the
Hilbert-Schmidt one. Hermitian matrices are also given real coordinates
(diagonal, then ``sqrt(2)`` times real and imaginary parts above the diagonal)
in which the Hilbert-Schmidt product becomes the Euclidean dot product.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .bases import BasisSet, SpanClassification, rank_of_span, transition_tensor
from .model.joint import (
    JointDistribution,
    all_functions,
    check_cap,
    decode,
    encode,
    marginal_residual,
)

SAFE_TOL = 1e-8
COMPLETENESS_TOL = 1e-9
PSD_TOL = 1e-10


class DegenerateBasisSet(ValueError):
    """The projectors do not span a space of the dimension safe vectors need."""


class StrategyError(ValueError):
    pass


def _triu(d: int):
    return np.triu_indices(d, 1)


def herm_to_real(h: np.ndarray) -> np.ndarray:
    """Real coordinates of hermitian matrices, shape ``(..., d, d) -> (..., d*d)``."""
    h = np.asarray(h)
    d = h.shape[-1]
    r, c = _triu(d)
    diag = np.real(np.diagonal(h, axis1=-2, axis2=-1))
    upper = h[..., r, c]
    s = np.sqrt(2.0)
    return np.concatenate([diag, s * upper.real, s * upper.imag], axis=-1)


def real_to_herm(v: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`herm_to_real`."""
    v = np.asarray(v, dtype=float)
    r, c = _triu(d)
    m = len(r)
    out = np.zeros(v.shape[:-1] + (d, d), dtype=complex)
    idx = np.arange(d)
    out[..., idx, idx] = v[..., :d]
    upper = (v[..., d : d + m] + 1j * v[..., d + m :]) / np.sqrt(2.0)
    out[..., r, c] = upper
    out[..., c, r] = upper.conj()
    return out


def real_to_vec(v: np.ndarray, d: int) -> np.ndarray:
    """Real coordinates to flat vectors of the doubled space."""
    h = real_to_herm(v, d)
    return h.reshape(h.shape[:-2] + (d * d,))


@dataclass(frozen=True)
class HattedVectors:
    d: int
    k: int
    vectors: np.ndarray  # (k, d, d*d) complex
    omega: np.ndarray  # (d*d,) complex
    coords: np.ndarray  # (k, d, d*d) real coordinates of the same vectors

    @property
    def omega_coords(self) -> np.ndarray:
        return herm_to_real(np.eye(self.d))


def hatted(bs: BasisSet) -> HattedVectors:
    d, k = bs.d, bs.k
    proj = np.einsum("bia,bic->biac", bs.vectors, bs.vectors.conj())
    return HattedVectors(
        d=d,
        k=k,
        vectors=proj.reshape(k, d, d * d),
        omega=np.eye(d, dtype=complex).reshape(-1),
        coords=herm_to_real(proj),
    )


@dataclass(frozen=True)
class SafeVector:
    x: int
    eta: np.ndarray  # flat complex vector of the doubled space
    residual: float

    def matrix(self) -> np.ndarray:
        d = int(round(np.sqrt(self.eta.size)))
        return self.eta.reshape(d, d)


def _span_basis(hv: HattedVectors, rank: int) -> np.ndarray:
    a = hv.coords.reshape(hv.k * hv.d, -1)
    _, _, vt = np.linalg.svd(a)
    return vt[:rank].T


def _require_support(cls: SpanClassification) -> None:
    if not cls.supports_safe_vectors:
        raise DegenerateBasisSet(
            f"span rank {cls.rank} is degenerate for d={cls.d}, k={cls.k}; no safe-vector system"
        )


def solve_safe_vector(hv: HattedVectors, cls: SpanClassification, x) -> SafeVector | None:
    """Unique safe vector for the guessing function ``x`` (index or outcome sequence).

    Uses the first ``d - 1`` conditions of every basis plus ``<Omega|eta> = 1``
    and solves them by least squares inside the real span of the hatted
    vectors. Returns ``None`` if the full set of conditions is not met.
    """
    _require_support(cls)
    d, k = hv.d, hv.k
    xs = decode(x, d, k) if np.isscalar(x) else np.asarray(x)
    index = encode(xs, d)
    q = _span_basis(hv, cls.rank)
    rows = [hv.coords[b, i] for b in range(k) for i in range(d - 1)]
    rhs = [float(xs[b] == i) for b in range(k) for i in range(d - 1)]
    rows.append(hv.omega_coords)
    rhs.append(1.0)
    y, *_ = np.linalg.lstsq(np.array(rows) @ q, np.array(rhs), rcond=None)
    eta = q @ y
    target = (np.arange(d)[None, :] == xs[:, None]).astype(float)
    residual = float(np.max(np.abs(hv.coords @ eta - target)))
    if residual >= SAFE_TOL:
        if cls.non_degenerate:
            raise StrategyError(f"safe-vector system singular on a non-degenerate set (x={index})")
        return None
    return SafeVector(index, real_to_vec(eta, d), residual)


@dataclass(frozen=True)
class SafeVectorTable:
    """Safe vectors of every guessing function in real coordinates."""

    d: int
    k: int
    coords: np.ndarray  # (d**k, d*d)
    residuals: np.ndarray  # (d**k,)

    @property
    def exists(self) -> np.ndarray:
        return self.residuals < SAFE_TOL

    def vectors(self, indices) -> np.ndarray:
        return real_to_vec(self.coords[indices], self.d)


def safe_vector_table(hv: HattedVectors, cls: SpanClassification, cap: int | None = None) -> SafeVectorTable:
    """All safe vectors at once.

    The minimum-norm solution is linear in the right-hand side, which for
    ``x`` is the indicator of the pairs ``(b, x[b])``; so ``eta_x`` is a sum
    of ``k`` columns of the pseudo-inverse.
    """
    _require_support(cls)
    d, k = hv.d, hv.k
    if cap is None:
        check_cap(d, k)
    else:
        check_cap(d, k, cap)
    a = hv.coords.reshape(k * d, -1)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    r = cls.rank
    pinv = (vt[:r].T / s[:r]) @ u[:, :r].T  # (d*d, k*d)
    resid_cols = a @ pinv - np.eye(k * d)
    cols = all_functions(d, k) + d * np.arange(k)[None, :]
    coords = pinv.T[cols].sum(axis=1)
    residuals = np.abs(resid_cols.T[cols].sum(axis=1)).max(axis=1)
    return SafeVectorTable(d, k, coords, residuals)


def mub_safe_vector(hv: HattedVectors, x) -> np.ndarray:
    """Closed form ``sum_b hat(phi)_b^{x(b)} - (k-1)/d Omega``, valid for unbiased bases."""
    xs = decode(x, hv.d, hv.k) if np.isscalar(x) else np.asarray(x)
    return hv.vectors[np.arange(hv.k), xs].sum(axis=0) - (hv.k - 1) / hv.d * hv.omega


@dataclass(frozen=True)
class Strategy:
    """Initial operator ``S`` and the POVM ``{F_x}``.

    Each effect is ``weights[n] * |vectors[n]><vectors[n]|`` for
    ``x = support[n]`` plus an optional full matrix from ``extra``.
    """

    S: np.ndarray
    d: int
    k: int
    support: np.ndarray
    weights: np.ndarray
    vectors: np.ndarray
    extra: dict[int, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_effects(cls, S, effects: dict[int, np.ndarray], d: int, k: int) -> Strategy:
        return cls(
            S=np.asarray(S, dtype=complex),
            d=d,
            k=k,
            support=np.zeros(0, dtype=np.int64),
            weights=np.zeros(0),
            vectors=np.zeros((0, d * d), dtype=complex),
            extra={int(x): np.asarray(f, dtype=complex) for x, f in effects.items()},
        )

    @property
    def outcomes(self) -> np.ndarray:
        return np.union1d(self.support, np.fromiter(self.extra, dtype=np.int64, count=len(self.extra)))

    def effect(self, x: int) -> np.ndarray:
        m = self.d * self.d
        out = np.zeros((m, m), dtype=complex)
        hit = np.flatnonzero(self.support == x)
        for n in hit:
            v = self.vectors[n]
            out += self.weights[n] * np.outer(v, v.conj())
        if x in self.extra:
            out += self.extra[x]
        return out

    def povm(self) -> dict[int, np.ndarray]:
        return {int(x): self.effect(int(x)) for x in self.outcomes}

    def effect_sum(self) -> np.ndarray:
        total = (self.vectors.T * self.weights) @ self.vectors.conj()
        for f in self.extra.values():
            total = total + f
        return total

    def completeness_error(self) -> float:
        m = self.d * self.d
        return float(np.max(np.abs(self.effect_sum() - np.eye(m))))

    def min_eigenvalue(self) -> float:
        lows = [0.0 if self.d * self.d > 1 else float(self.weights.min(initial=0.0))]
        rank_one = set(self.support.tolist())
        for x, f in self.extra.items():
            full = self.effect(x) if x in rank_one else f
            lows.append(float(np.linalg.eigvalsh(full).min()))
        if self.weights.size:
            lows.append(float(self.weights.min()))
        return min(lows)

    def lift(self) -> np.ndarray:
        """The operator ``1 (x) S`` on the doubled space."""
        return np.kron(np.eye(self.d), self.S)

    def initial_state(self) -> np.ndarray:
        psi = self.lift() @ np.eye(self.d, dtype=complex).reshape(-1)
        return psi / np.linalg.norm(psi)

    def expectations(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``<psi|F_x|psi>`` for each row ``psi`` of ``states``, over :attr:`outcomes`."""
        outcomes = self.outcomes
        pos = {int(x): n for n, x in enumerate(outcomes)}
        vals = np.zeros((states.shape[0], len(outcomes)))
        if self.support.size:
            amp = np.abs(states.conj() @ self.vectors.T) ** 2 * self.weights
            np.add.at(vals.T, [pos[int(x)] for x in self.support], amp.T)
        for x, f in self.extra.items():
            vals[:, pos[x]] += np.real(np.einsum("sa,ab,sb->s", states.conj(), f, states))
        return outcomes, vals

    def check(self) -> None:
        err = self.completeness_error()
        if not err < COMPLETENESS_TOL:
            raise StrategyError(f"POVM does not sum to the identity: deviation {err:.3e}")
        low = self.min_eigenvalue()
        if not low >= -PSD_TOL:
            raise StrategyError(f"POVM element not positive: smallest eigenvalue {low:.3e}")
        tr = float(np.real(np.trace(self.S.conj().T @ self.S)))
        if abs(tr - 1.0) > 1e-12:
            raise StrategyError(f"tr(S*S) = {tr!r}, expected 1")

    # serialization

    def to_dict(self) -> dict[str, Any]:
        self.check()
        m = self.d * self.d
        rows, cols = np.tril_indices(m)
        povm = []
        for x, f in self.povm().items():
            packed = f[rows, cols]
            povm.append([x, np.stack([packed.real, packed.imag], axis=-1).tolist()])
        return {
            "d": self.d,
            "k": self.k,
            "S": np.stack([self.S.real, self.S.imag], axis=-1).tolist(),
            "povm": povm,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Strategy:
        d, k = int(data["d"]), int(data["k"])
        s = np.asarray(data["S"], dtype=float)
        m = d * d
        rows, cols = np.tril_indices(m)
        effects = {}
        for x, packed in data["povm"]:
            arr = np.asarray(packed, dtype=float)
            vals = arr[:, 0] + 1j * arr[:, 1]
            f = np.zeros((m, m), dtype=complex)
            f[rows, cols] = vals
            f[cols, rows] = vals.conj()
            effects[int(x)] = f
        st = cls.from_effects(s[..., 0] + 1j * s[..., 1], effects, d, k)
        st.check()
        return st

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def build_strategy(bs: BasisSet, jd: JointDistribution, cls: SpanClassification | None = None) -> Strategy:
    """Alice's strategy from a classical model: maximally entangled start, rank-one effects.

    The part of the identity not covered by the rank-one effects (the
    projector onto the complement of the span) is added to the effect of the
    lowest supported index.
    """
    d, k = bs.d, bs.k
    cls = cls or rank_of_span(bs)
    if not cls.non_degenerate:
        raise DegenerateBasisSet(f"build_strategy needs a non-degenerate basis set (rank {cls.rank})")
    if (jd.d, jd.k) != (d, k):
        raise ValueError("joint distribution shape does not match the basis set")
    if abs(jd.total - 1.0) > 1e-7:
        raise ValueError(f"joint distribution total {jd.total!r} is not 1")
    resid = marginal_residual(jd, transition_tensor(bs).p)
    if resid > 1e-7:
        raise ValueError(f"joint distribution marginals off by {resid:.3e}")
    hv = hatted(bs)
    keep = jd.values > 0
    support, p = jd.indices[keep], jd.values[keep]
    xs = all_functions(d, k)[support]
    table = _safe_rows(hv, cls, xs)
    vectors = real_to_vec(table, d)
    weights = d * p
    m = d * d
    rest = np.eye(m) - (vectors.T * weights) @ vectors.conj()
    rest = (rest + rest.conj().T) / 2
    st = Strategy(
        S=np.eye(d, dtype=complex) / np.sqrt(d),
        d=d,
        k=k,
        support=support,
        weights=weights,
        vectors=vectors,
        extra={int(support[0]): rest},
    )
    st.check()
    return st


def _safe_rows(hv: HattedVectors, cls: SpanClassification, xs: np.ndarray) -> np.ndarray:
    """Safe vectors (real coordinates) for the guessing functions in the rows of ``xs``."""
    d, k = hv.d, hv.k
    a = hv.coords.reshape(k * d, -1)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    r = cls.rank
    pinv = (vt[:r].T / s[:r]) @ u[:, :r].T
    cols = xs + d * np.arange(k)[None, :]
    coords = pinv.T[cols].sum(axis=1)
    target = np.zeros((len(xs), k * d))
    np.put_along_axis(target, cols, 1.0, axis=1)
    resid = np.abs(coords @ a.T - target).max(axis=1, initial=0.0)
    if resid.size and resid.max() >= SAFE_TOL:
        raise StrategyError(f"safe vector missing for a supported outcome (residual {resid.max():.3e})")
    return coords


@dataclass(frozen=True)
class VerificationReport:
    max_offdiag: float
    lam: np.ndarray  # (k, d, n_outcomes)
    outcomes: np.ndarray
    sum_check: float
    min_eig: float

    @property
    def ok(self) -> bool:
        return self.max_offdiag < SAFE_TOL


def _conditional_states(bs: BasisSet, st: Strategy) -> np.ndarray:
    """Unnormalized ``(1 (x) S) hat(phi)_b^i`` as rows, shape ``(k*d, d*d)``."""
    hv = hatted(bs)
    return hv.vectors.reshape(bs.k * bs.d, -1) @ st.lift().T


def verify_strategy(bs: BasisSet, st: Strategy) -> VerificationReport:
    """Check the zero pattern demanded by always-correct answers."""
    d, k = bs.d, bs.k
    if (st.d, st.k) != (d, k):
        raise ValueError("strategy shape does not match the basis set")
    outcomes, vals = st.expectations(_conditional_states(bs, st))
    lam = vals.reshape(k, d, -1)
    xs = all_functions(d, k)[outcomes]  # (n, k)
    right = np.arange(d)[None, :, None] == xs.T[:, None, :]
    offdiag = float(np.max(np.where(right, 0.0, lam), initial=0.0))
    per_basis = lam.sum(axis=(1, 2))
    return VerificationReport(
        max_offdiag=offdiag,
        lam=lam,
        outcomes=outcomes,
        sum_check=float(np.max(np.abs(per_basis - 1.0))),
        min_eig=st.min_eigenvalue(),
    )


def extract_classical_model(bs: BasisSet, st: Strategy, cls: SpanClassification | None = None) -> JointDistribution:
    """Read the joint distribution off a correct strategy on a complete basis set."""
    cls = cls or rank_of_span(bs)
    if not cls.complete:
        raise DegenerateBasisSet("extract_classical_model needs a tomographically complete set")
    rep = verify_strategy(bs, st)
    if rep.max_offdiag >= SAFE_TOL:
        raise StrategyError(f"strategy is not always correct (offdiag {rep.max_offdiag:.3e})")
    omega = np.eye(bs.d, dtype=complex).reshape(1, -1)
    outcomes, vals = st.expectations(omega @ st.lift().T)
    p = np.clip(vals[0], 0.0, None)
    return JointDistribution(bs.d, bs.k, outcomes, p / p.sum())


def reduced_state(st: Strategy) -> np.ndarray:
    return st.S.conj().T @ st.S
