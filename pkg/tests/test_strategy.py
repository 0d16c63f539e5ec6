import dataclasses
import json

import numpy as np
import pytest

from meanking.bases import (
    haar_random_basis_set,
    mub_basis_set,
    pauli_bases,
    rank_of_span,
    transition_tensor,
)
from meanking.model.joint import JointDistribution, all_functions, all_marginals
from meanking.model.lp import solve_model_lp
from meanking.strategy import (
    DegenerateBasisSet,
    Strategy,
    StrategyError,
    build_strategy,
    extract_classical_model,
    hatted,
    herm_to_real,
    mub_safe_vector,
    real_to_herm,
    reduced_state,
    safe_vector_table,
    solve_safe_vector,
    verify_strategy,
)


def feasible_haar(d, seeds):
    for s in seeds:
        bs = haar_random_basis_set(d, d + 1, s)
        lp = solve_model_lp(transition_tensor(bs))
        if lp.feasible:
            return bs, lp.jd
    raise AssertionError("no feasible instance among the seeds")


def test_real_coordinates_round_trip():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    h = a + a.conj().T
    v = herm_to_real(h)
    assert np.allclose(real_to_herm(v, 4), h)
    # the coordinates are an isometry for the trace inner product
    g = herm_to_real(np.eye(4))
    assert np.isclose(v @ g, np.trace(h).real)


def test_hatted_identities():
    hv = hatted(pauli_bases())
    assert np.allclose(hv.vectors.sum(axis=1), hv.omega[None, :])
    assert np.isclose(abs(np.vdot(hv.vectors[0, 0], hv.vectors[1, 0])), 0.5)
    assert np.allclose(hv.vectors.conj() @ hv.omega, 1.0)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_mub_safe_vectors_closed_form(d):
    bs = mub_basis_set(d, d + 1)
    hv, cls = hatted(bs), rank_of_span(bs)
    table = safe_vector_table(hv, cls)
    assert table.exists.all()
    xs = range(d ** (d + 1)) if d < 5 else np.random.default_rng(0).integers(0, d ** (d + 1), 200)
    for x in xs:
        assert np.max(np.abs(table.vectors([x])[0] - mub_safe_vector(hv, int(x)))) < 1e-12


def test_pauli_safe_vector_hermitian():
    hv, cls = hatted(pauli_bases()), rank_of_span(pauli_bases())
    sv = solve_safe_vector(hv, cls, [1, 1, 1])
    m = sv.matrix()
    assert np.allclose(m, m.conj().T)
    assert np.isclose(np.vdot(hv.omega, sv.eta), 1.0)


def test_two_safe_vector_routes_agree():
    bs = haar_random_basis_set(3, 4, 9)
    hv, cls = hatted(bs), rank_of_span(bs)
    table = safe_vector_table(hv, cls)
    assert table.exists.all()
    for x in range(81):
        sv = solve_safe_vector(hv, cls, x)
        assert sv is not None and sv.residual < 1e-8
        assert np.max(np.abs(sv.eta - table.vectors([x])[0])) < 1e-9


def test_safe_vector_refuses_degenerate():
    bs = pauli_bases().with_bases([0, 1, 0])
    with pytest.raises(DegenerateBasisSet):
        safe_vector_table(hatted(bs), rank_of_span(bs))


def test_pauli_strategy():
    bs = pauli_bases()
    st = build_strategy(bs, JointDistribution.uniform(2, 3))
    assert len(st.outcomes) == 8
    assert st.completeness_error() < 1e-10
    rep = verify_strategy(bs, st)
    assert rep.max_offdiag < 1e-10
    assert rep.sum_check < 1e-9


def test_mub3_strategy_psd():
    st = build_strategy(mub_basis_set(3, 4), JointDistribution.uniform(3, 4))
    assert len(st.outcomes) == 81
    for f in st.povm().values():
        assert np.linalg.eigvalsh(f).min() > -1e-10


def test_complete_set_leaves_no_residual():
    bs, jd = feasible_haar(2, range(50))
    st = build_strategy(bs, jd)
    assert np.linalg.norm(st.extra[int(st.support[0])], 2) < 1e-9


def test_non_complete_residual_allocation_invisible():
    bs = mub_basis_set(5, 3)
    cls = rank_of_span(bs)
    assert cls.non_degenerate and not cls.complete
    jd = solve_model_lp(transition_tensor(bs)).jd
    st = build_strategy(bs, jd, cls)
    rep = verify_strategy(bs, st)
    assert rep.max_offdiag < 1e-10
    rest = st.extra[int(st.support[0])]
    assert np.linalg.norm(rest, 2) > 0.5  # the span misses part of the space
    # the leftover operator is never seen by any post-measurement state
    states = hatted(bs).vectors.reshape(15, -1) @ st.lift().T
    assert np.max(np.abs(np.einsum("sa,ab,sb->s", states.conj(), rest, states))) < 1e-12


def test_fault_injection_detected():
    bs = pauli_bases()
    st = build_strategy(bs, JointDistribution.uniform(2, 3))
    hv = hatted(bs)
    x = next(n for n, f in enumerate(all_functions(2, 3)) if f[0] != 0)
    phi = hv.vectors[0, 0]
    extra = dict(st.extra)
    extra[x] = extra.get(x, 0) + 1e-3 * np.outer(phi, phi.conj())
    bad = dataclasses.replace(st, extra=extra)
    rep = verify_strategy(bs, bad)
    assert not rep.ok
    assert abs(rep.max_offdiag - 1e-3 / 2) < 1e-9


def test_build_rejects_bad_marginals():
    with pytest.raises(ValueError, match="marginals"):
        build_strategy(pauli_bases(), JointDistribution.point_mass([0, 0, 0], 2))


def test_strategy_json_round_trip():
    bs = mub_basis_set(3, 4)
    st = build_strategy(bs, JointDistribution.uniform(3, 4))
    back = Strategy.from_dict(json.loads(st.to_json()))
    assert np.allclose(back.effect_sum(), np.eye(9), atol=1e-12)
    assert verify_strategy(bs, back).max_offdiag < 1e-10


def test_strategy_from_dict_rejects_incomplete():
    data = json.loads(build_strategy(pauli_bases(), JointDistribution.uniform(2, 3)).to_json())
    data["povm"] = data["povm"][1:]
    with pytest.raises(StrategyError, match="identity"):
        Strategy.from_dict(data)


def test_pauli_extraction():
    bs = pauli_bases()
    jd = extract_classical_model(bs, build_strategy(bs, JointDistribution.uniform(2, 3)))
    m = all_marginals(jd)
    assert np.allclose(m[0, 1], 0.25) and np.allclose(m[1, 2], 0.25)


@pytest.mark.parametrize("d", [2, 3])
def test_round_trip(d):
    bs, jd = feasible_haar(d, range(2000))
    st = build_strategy(bs, jd)
    back = extract_classical_model(bs, st)
    assert np.max(np.abs(all_marginals(back) - transition_tensor(bs).p)) < 1e-8
    assert np.max(np.abs(reduced_state(st) - np.eye(d) / d)) < 1e-12


def test_reduced_state_product():
    st = Strategy.from_effects(np.diag([1.0, 0.0]), {0: np.eye(4)}, 2, 1)
    assert np.allclose(reduced_state(st), np.diag([1.0, 0.0]))


def test_extraction_requires_complete():
    bs = mub_basis_set(5, 3)
    st = build_strategy(bs, solve_model_lp(transition_tensor(bs)).jd)
    with pytest.raises(DegenerateBasisSet):
        extract_classical_model(bs, st)
