"""Three dichotomic variables with uniform marginals (the qubit case).

With outcomes mapped to +-1, a pair value ``q = p(1, 1)`` fixes the
correlator ``C = 4q - 1``. A joint distribution exists iff
``1 + s1*C_ab + s2*C_bc + s3*C_ca >= 0`` for the four sign patterns with
``s1*s2*s3 = +1``; the triple correlator is then free to absorb the rest.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import linprog

from ..bases import BasisSet, TransitionTensor, transition_tensor

SIGNS = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]])


@dataclass(frozen=True)
class BellTriple:
    q_ab: float
    q_bc: float
    q_ca: float

    def __post_init__(self):
        for q in self.values:
            if not -1e-12 <= q <= 0.5 + 1e-12:
                raise ValueError(f"pair value {q!r} outside [0, 1/2]")

    @property
    def values(self) -> np.ndarray:
        return np.array([self.q_ab, self.q_bc, self.q_ca])

    def correlators(self) -> np.ndarray:
        return 4.0 * self.values - 1.0


def bell_margins(tr: BellTriple) -> np.ndarray:
    """Slack of the four inequalities; all nonnegative iff a classical model exists."""
    return 1.0 + SIGNS @ tr.correlators()


def bell_membership(tr: BellTriple) -> bool:
    return bool(np.all(bell_margins(tr) >= 0.0))


def boundary_distance(tr: BellTriple) -> float:
    """Smallest absolute inequality slack, in correlator units."""
    return float(np.min(np.abs(bell_margins(tr))))


def bell_triple_of(bs: BasisSet) -> BellTriple:
    if (bs.d, bs.k) != (2, 3):
        raise ValueError(f"need d=2, k=3, got d={bs.d}, k={bs.k}")
    p = transition_tensor(bs).p
    return BellTriple(float(p[0, 1, 0, 0]), float(p[1, 2, 0, 0]), float(p[2, 0, 0, 0]))


def triple_from_bloch(na, nb, nc) -> BellTriple:
    """``q = (1 + n.m) / 4`` for each pair of Bloch vectors."""
    na, nb, nc = (np.asarray(n, float) / np.linalg.norm(n) for n in (na, nb, nc))
    return BellTriple((1 + na @ nb) / 4, (1 + nb @ nc) / 4, (1 + nc @ na) / 4)


def triple_tensor(tr: BellTriple) -> TransitionTensor:
    """Pair tables with uniform marginals, as a ``k=3, d=2`` tensor.

    Not every triple comes from qubit bases, but the model question is the same.
    """
    p = np.zeros((3, 3, 2, 2))
    for b in range(3):
        p[b, b] = np.eye(2) / 2
    for n, (b, c) in enumerate([(0, 1), (1, 2), (2, 0)]):
        q = tr.values[n]
        p[b, c] = [[q, 0.5 - q], [0.5 - q, q]]
        p[c, b] = p[b, c].T
    return TransitionTensor(p)


def atom_lp_feasible(tr: BellTriple) -> bool:
    """Brute force: is there a distribution on the 8 atoms of {0,1}^3 with these pair tables?"""
    atoms = list(product(range(2), repeat=3))
    q = tr.values
    rows, rhs = [], []
    for n, (u, w) in enumerate([(0, 1), (1, 2), (2, 0)]):
        table = np.array([[q[n], 0.5 - q[n]], [0.5 - q[n], q[n]]])
        for i, j in product(range(2), repeat=2):
            rows.append([float(a[u] == i and a[w] == j) for a in atoms])
            rhs.append(table[i, j])
    res = linprog(np.zeros(8), A_eq=np.array(rows), b_eq=np.array(rhs), bounds=[(0, None)] * 8, method="highs")
    return res.status == 0
