"""Collections of orthonormal bases: construction, sampling and classification.

A :class:`BasisSet` holds ``k`` orthonormal bases of ``C^d`` as an array of
shape ``(k, d, d)`` where ``vectors[b, i]`` is the ``i``-th vector of basis
``b``. Indices are 0-based in code and in every serialized format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

ORTHO_TOL = 1e-12
READ_TOL = 1e-8
RANK_TOL = 1e-9

DEGENERATE = "degenerate"
NON_DEGENERATE = "non-degenerate"
COMPLETE = "tomographically-complete"


class InvalidBasisSet(ValueError):
    """Raised when input data violates a BasisSet invariant."""


@dataclass(frozen=True)
class BasisSet:
    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.vectors, dtype=complex)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise InvalidBasisSet(f"vectors must have shape (k, d, d), got {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 2:
            raise InvalidBasisSet("need k >= 1 and d >= 2")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def orthonormality_error(self) -> float:
        """Largest deviation of ``<phi_b^i|phi_b^j>`` from ``delta_ij`` over all bases."""
        gram = np.einsum("bia,bja->bij", self.vectors.conj(), self.vectors)
        return float(np.max(np.abs(gram - np.eye(self.d))))

    def validate(self, tol: float = ORTHO_TOL) -> BasisSet:
        err = self.orthonormality_error()
        if not err <= tol:
            raise InvalidBasisSet(f"orthonormality violated: max deviation {err:.3e} > {tol:.1e}")
        return self

    def overlaps(self) -> np.ndarray:
        """Squared overlaps ``|<phi_b^i|phi_c^j>|^2`` as a ``(k, k, d, d)`` array."""
        amp = np.einsum("bia,cja->bcij", self.vectors.conj(), self.vectors)
        return np.abs(amp) ** 2

    def rotated(self, unitary: np.ndarray) -> BasisSet:
        """Apply one global unitary to every vector."""
        return BasisSet(np.einsum("ab,kib->kia", unitary, self.vectors))

    def with_bases(self, indices) -> BasisSet:
        return BasisSet(self.vectors[list(indices)])

    # serialization

    def to_dict(self) -> dict[str, Any]:
        v = self.vectors
        return {
            "d": self.d,
            "k": self.k,
            "bases": np.stack([v.real, v.imag], axis=-1).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], tol: float = READ_TOL) -> BasisSet:
        try:
            d, k = int(data["d"]), int(data["k"])
            arr = np.asarray(data["bases"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidBasisSet(f"malformed BasisSet JSON: {exc}") from exc
        if arr.shape != (k, d, d, 2):
            raise InvalidBasisSet(
                f"bases array has shape {arr.shape}, expected {(k, d, d, 2)} for d={d}, k={k}"
            )
        return cls(arr[..., 0] + 1j * arr[..., 1]).validate(tol)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str, tol: float = READ_TOL) -> BasisSet:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidBasisSet(f"malformed BasisSet JSON: {exc}") from exc
        return cls.from_dict(data, tol)


@dataclass(frozen=True)
class TransitionTensor:
    """Pair distributions ``p[b, c, i, j] = |<phi_b^i|phi_c^j>|^2 / d``."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def k(self) -> int:
        return self.p.shape[0]

    @property
    def d(self) -> int:
        return self.p.shape[2]


@dataclass(frozen=True)
class SpanClassification:
    rank: int
    label: str
    d: int
    k: int

    @property
    def non_degenerate(self) -> bool:
        return self.rank == self.k * (self.d - 1) + 1

    @property
    def supports_safe_vectors(self) -> bool:
        return self.label != DEGENERATE

    @property
    def complete(self) -> bool:
        return self.label == COMPLETE


def _check_dims(d: int, k: int) -> None:
    if int(d) != d or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d}")
    if int(k) != k or k < 1:
        raise ValueError(f"number of bases must be an integer >= 1, got {k}")


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a complex Ginibre matrix.

    The phases of the diagonal of ``R`` are absorbed into ``Q``; without this
    step the distribution depends on the QR implementation and is not Haar.
    """
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def haar_random_basis_set(d: int, k: int, seed) -> BasisSet:
    """``k`` independent Haar-random bases; basis ``b`` is the column system of its unitary."""
    _check_dims(d, k)
    rng = np.random.default_rng(seed)
    return BasisSet(np.stack([haar_unitary(d, rng).T for _ in range(k)]))


def pauli_bases() -> BasisSet:
    """Eigenbases of sigma_z, sigma_x, sigma_y (in that order)."""
    s = 1 / np.sqrt(2)
    z = [[1, 0], [0, 1]]
    x = [[s, s], [s, -s]]
    y = [[s, 1j * s], [s, -1j * s]]
    return BasisSet(np.array([z, x, y], dtype=complex))


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % f for f in range(2, int(n**0.5) + 1))


def mub_basis_set(d: int, k: int) -> BasisSet:
    """First ``k`` of the ``d + 1`` standard mutually unbiased bases for prime ``d``.

    Basis 0 is the computational basis; basis ``a + 1`` has vectors with
    components ``omega**(a*m**2 + i*m) / sqrt(d)``. For ``d = 2`` the Pauli
    eigenbases are returned instead.
    """
    if not is_prime(d):
        raise ValueError(f"mub_basis_set requires a prime dimension, got {d}")
    if not 1 <= k <= d + 1:
        raise ValueError(f"k must lie in [1, {d + 1}] for d={d}, got {k}")
    if d == 2:
        return pauli_bases().with_bases(range(k))
    m = np.arange(d)
    vectors = [np.eye(d, dtype=complex)]
    for a in range(d):
        expo = (a * m[None, :] ** 2 + m[:, None] * m[None, :]) % d
        vectors.append(np.exp(2j * np.pi * expo / d) / np.sqrt(d))
    return BasisSet(np.stack(vectors[:k]))


def transition_tensor(bs: BasisSet) -> TransitionTensor:
    return TransitionTensor(bs.overlaps() / bs.d)


def gram_matrix(bs: BasisSet) -> np.ndarray:
    """The ``kd x kd`` Hilbert-Schmidt Gram matrix of the basis projectors."""
    k, d = bs.k, bs.d
    return bs.overlaps().transpose(0, 2, 1, 3).reshape(k * d, k * d)


def classify_rank(rank: int, d: int, k: int) -> str:
    if rank == d * d:
        return COMPLETE
    if rank == k * (d - 1) + 1:
        return NON_DEGENERATE
    return DEGENERATE


def rank_of_span(bs: BasisSet, tol: float = RANK_TOL) -> SpanClassification:
    """Dimension of the real span of the projectors onto all basis vectors."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    sv = np.linalg.svd(gram_matrix(bs), compute_uv=False)
    rank = int(np.sum(sv > tol * sv[0]))
    return SpanClassification(rank, classify_rank(rank, bs.d, bs.k), bs.d, bs.k)


def unbiasedness_check(bs: BasisSet) -> float:
    """Max deviation of the transition tensor from the mutually unbiased pattern."""
    d, k = bs.d, bs.k
    p = transition_tensor(bs).p
    target = np.full((k, k, d, d), 1.0 / d**2)
    target[np.arange(k), np.arange(k)] = np.eye(d) / d
    return float(np.max(np.abs(p - target)))


def bloch_basis(n) -> np.ndarray:
    """Qubit basis whose first vector has Bloch vector ``n`` (unit length)."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    theta = np.arccos(np.clip(n[2], -1.0, 1.0))
    phi = np.arctan2(n[1], n[0])
    up = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    down = np.array([-np.exp(-1j * phi) * np.sin(theta / 2), np.cos(theta / 2)])
    return np.stack([up, down])


def bloch_basis_set(normals) -> BasisSet:
    """Qubit BasisSet from a list of Bloch vectors, one per basis."""
    return BasisSet(np.stack([bloch_basis(n) for n in normals]))
