import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from scipy.optimize import linprog

from meanking.bases import (
    BasisSet,
    bloch_basis_set,
    haar_random_basis_set,
    mub_basis_set,
    pauli_bases,
    transition_tensor,
)
from meanking.model.bell import (
    BellTriple,
    atom_lp_feasible,
    bell_membership,
    bell_triple_of,
    triple_from_bloch,
    triple_tensor,
)
from meanking.model.debias import debias, euclidean_gradient, objective, unbiased_bound
from meanking.model.fitting import iterative_fit
from meanking.model.joint import (
    CapExceeded,
    JointDistribution,
    all_functions,
    check_cap,
    decode,
    encode,
    marginal,
    marginal_residual,
)
from meanking.model.lp import pair_constraints, solve_model_lp
from meanking.model.simplex import simplex_max


# joint distributions


@given(hst.integers(2, 5), hst.integers(1, 4), hst.data())
def test_encode_decode(d, k, data):
    x = data.draw(hst.lists(hst.integers(0, d - 1), min_size=k, max_size=k))
    n = encode(x, d)
    assert list(decode(n, d, k)) == x
    assert list(all_functions(d, k)[n]) == x


def test_cap():
    assert check_cap(3, 4) == 81
    with pytest.raises(CapExceeded):
        check_cap(6, 7, cap=10**5)


def test_uniform_marginal():
    jd = JointDistribution.uniform(3, 4)
    assert np.allclose(marginal(jd, 0, 2), 1 / 9)
    assert np.allclose(marginal(jd, 1, 1), np.eye(3) / 3)


def test_point_mass_marginal():
    jd = JointDistribution.point_mass([2, 0, 1], 3)
    m = marginal(jd, 0, 2)
    assert m[2, 1] == 1.0 and m.sum() == 1.0


def test_marginal_index_error():
    with pytest.raises(IndexError):
        marginal(JointDistribution.uniform(2, 3), 0, 3)


def test_joint_rejects_negative():
    with pytest.raises(ValueError):
        JointDistribution(2, 2, [0, 1], [0.5, -0.1])


def test_joint_json_round_trip():
    jd = JointDistribution(2, 3, [5, 1], [0.25, 0.75])
    back = JointDistribution.from_dict(json.loads(jd.to_json()))
    assert np.array_equal(back.indices, [1, 5]) and np.allclose(back.values, [0.75, 0.25])


# simplex against an independent solver


@settings(max_examples=40, deadline=None)
@given(hst.integers(1, 6), hst.integers(1, 8), hst.integers(0, 2**31))
def test_simplex_matches_highs(m, n, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, (m, n)) * (rng.random((m, n)) < 0.8)
    a[:, a.sum(axis=0) == 0] = 1.0  # keep the problem bounded
    b = rng.uniform(0, 1, m)
    c = rng.uniform(-0.2, 1, n)
    mine = simplex_max(c, a, b)
    ref = linprog(-c, A_ub=a, b_ub=b, bounds=[(0, None)] * n, method="highs")
    assert abs(mine.value + ref.fun) < 1e-8
    assert np.all(a @ mine.x <= b + 1e-9) and np.all(mine.x >= -1e-12)


def test_simplex_degenerate_cycling_example():
    # Beale's example cycles under naive Dantzig pricing
    c = np.array([0.75, -150, 0.02, -6])
    a = np.array([[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]])
    b = np.array([0.0, 0.0, 1.0])
    res = simplex_max(c, a, b)
    assert abs(res.value - 0.05) < 1e-10


# classical model LP


def test_lp_mub_feasible_value_one():
    t = transition_tensor(mub_basis_set(3, 4))
    res = solve_model_lp(t)
    assert res.feasible and abs(res.value - 1) < 1e-9
    assert marginal_residual(res.jd, t.p) < 1e-9
    assert marginal_residual(JointDistribution.uniform(3, 4), t.p) < 1e-12


def test_lp_pauli_feasible():
    assert solve_model_lp(transition_tensor(pauli_bases())).feasible


def test_lp_infeasible_triple():
    tr = BellTriple(0.07, 0.07, 0.07)
    res = solve_model_lp(triple_tensor(tr))
    assert not res.feasible and res.value < 1
    assert not atom_lp_feasible(tr)


def test_lp_infeasible_planar_120():
    normals = [(np.cos(a), np.sin(a), 0) for a in (0, 2 * np.pi / 3, 4 * np.pi / 3)]
    res = solve_model_lp(transition_tensor(bloch_basis_set(normals)))
    assert not res.feasible


def test_lp_matches_highs_on_haar():
    for s in range(30):
        t = transition_tensor(haar_random_basis_set(2, 3, s))
        a, pairs = pair_constraints(2, 3)
        rhs = np.concatenate([t.p[b, c].reshape(-1) for b, c in pairs])
        ref = linprog(-np.ones(8), A_ub=a, b_ub=rhs, bounds=[(0, None)] * 8, method="highs")
        assert abs(solve_model_lp(t).value + ref.fun) < 1e-9


def test_lp_single_basis():
    t = transition_tensor(haar_random_basis_set(4, 1, 0))
    assert solve_model_lp(t).feasible


# Bell tetrahedron


def test_bell_corners():
    assert bell_membership(BellTriple(0.5, 0.5, 0.5))
    assert bell_membership(BellTriple(0.25, 0.25, 0.25))
    assert not bell_membership(BellTriple(0.07, 0.07, 0.07))
    # 1 + 3 * (4 * 0.07 - 1) < 0
    assert 1 + 3 * (4 * 0.07 - 1) < 0


def test_bell_triple_of_bases():
    assert np.allclose(bell_triple_of(pauli_bases()).values, 0.25)
    one = pauli_bases().vectors[0]
    assert np.allclose(bell_triple_of(BasisSet(np.stack([one] * 3))).values, 0.5)


def test_planar_120_triple():
    normals = [(np.cos(a), np.sin(a), 0) for a in (0, 2 * np.pi / 3, 4 * np.pi / 3)]
    tr = bell_triple_of(bloch_basis_set(normals))
    assert np.allclose(tr.values, 1 / 8, atol=1e-12)
    assert np.allclose(triple_from_bloch(*normals).values, 1 / 8)


def test_anti_aligned_corner():
    tr = bell_triple_of(bloch_basis_set([(0, 0, 1), (0, 0, 1), (0, 0, -1)]))
    assert np.allclose(sorted(tr.values), [0, 0, 0.5], atol=1e-12)
    assert bell_membership(tr) and atom_lp_feasible(tr)


@settings(max_examples=300, deadline=None)
@given(hst.tuples(*[hst.floats(0, 0.5)] * 3))
def test_bell_matches_atom_lp(q):
    tr = BellTriple(*q)
    margins = 1 + np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) @ tr.correlators()
    if np.min(np.abs(margins)) < 1e-7:
        return
    assert bell_membership(tr) == atom_lp_feasible(tr)


def test_bell_matches_model_lp_on_haar():
    for s in range(100):
        bs = haar_random_basis_set(2, 3, s)
        assert bell_membership(bell_triple_of(bs)) == solve_model_lp(transition_tensor(bs)).feasible


# iterative fitting


def test_fit_mub_fixed_point():
    res = iterative_fit(transition_tensor(mub_basis_set(3, 4)))
    assert res.residual < 1e-8 and res.sweeps <= 1


def test_fit_pauli_product():
    res = iterative_fit(transition_tensor(pauli_bases()))
    assert res.residual < 1e-8
    assert np.allclose(res.jd.dense(), 1 / 8)


def test_fit_feasible_haar():
    for s in range(200):
        t = transition_tensor(haar_random_basis_set(2, 3, s))
        if solve_model_lp(t).feasible:
            break
    res = iterative_fit(t, max_sweeps=5000, tol=1e-8)
    assert res.residual < 1e-6


def test_fit_infeasible_stays_away():
    res = iterative_fit(triple_tensor(BellTriple(0.07, 0.07, 0.07)), max_sweeps=200)
    assert res.residual > 1e-3


# debias


def test_gradient_finite_difference():
    rng = np.random.default_rng(3)
    u = np.transpose(haar_random_basis_set(3, 3, 1).vectors, (0, 2, 1))
    g = euclidean_gradient(u)
    e = rng.standard_normal(u.shape) + 1j * rng.standard_normal(u.shape)
    h = 1e-6
    fd = (objective(u + h * e) - objective(u - h * e)) / (2 * h)
    assert abs(fd - np.real(np.sum(g.conj() * e))) < 1e-6


def test_debias_mub_fixed():
    bs = mub_basis_set(3, 4)
    res = debias(bs)
    assert res.steps == 0
    assert abs(res.objective - unbiased_bound(3, 4)) < 1e-12
    assert abs(unbiased_bound(3, 4) - 6 / 9) < 1e-15


@pytest.mark.parametrize("d", [2, 3])
def test_debias_monotone_and_reaches_bound(d):
    res = debias(haar_random_basis_set(d, d + 1, 4), max_steps=5000, tol=1e-12)
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 0)
    assert res.objective - res.lower_bound < 1e-6
    assert res.basis_set.orthonormality_error() < 1e-10
