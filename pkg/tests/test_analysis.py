import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbplab.analysis import (Measurement, MeasurementScheme, binary_entropy, build_scheme, build_schemes,
                             check_klauck, check_nayak, entropy_accumulation, is_k_stable, min_obdd_size,
                             random_density, random_klauck_instance, random_nayak_instance,
                             scheme_dimension_bound, verify_scheme, von_neumann_entropy)
from qbplab.families import (ind_zero_error_qobdd, linear_obdd, min_reversible_obdd, oracle, parity_obdd,
                             reversible_tree)


def test_entropy_basics():
    assert von_neumann_entropy(np.eye(4) / 4) == pytest.approx(2)
    assert von_neumann_entropy(np.diag([1.0, 0])) == 0
    assert binary_entropy(0.5) == 1 and binary_entropy(0) == 0
    with pytest.raises(ValueError):
        von_neumann_entropy(np.eye(2))
    with pytest.raises(ValueError):
        von_neumann_entropy(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        binary_entropy(1.5)


def test_entropy_is_basis_independent():
    rng = np.random.default_rng(0)
    rho = random_density(5, rng)
    Q, _ = np.linalg.qr(rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5)))
    assert von_neumann_entropy(Q @ rho @ Q.conj().T) == pytest.approx(von_neumann_entropy(rho), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_nayak_random(seed):
    assert check_nayak(*random_nayak_instance(np.random.default_rng(seed))).holds


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_klauck_random(seed):
    assert check_klauck(*random_klauck_instance(np.random.default_rng(seed))).holds


def test_nayak_orthogonal_pure_states_tight():
    s0, s1 = np.diag([1.0, 0]), np.diag([0, 1.0])
    res = check_nayak(s0, s1, (s0, s1), 1.0)
    assert res.holds and res.slack == pytest.approx(0, abs=1e-12)


def test_premise_failures():
    s = np.eye(2) / 2
    P0, P1 = np.diag([1.0, 0]), np.diag([0, 1.0])
    assert check_nayak(s, s, (P0, P1), 0.9).status == "premise-failed"
    assert check_klauck(s, s, (P0, P1, np.zeros((2, 2))), 0.5, 0.0).status == "premise-failed"


def test_entropy_accumulation_disj6():
    orc = oracle("DISJ", 6)
    res = entropy_accumulation(reversible_tree(orc), orc, 1.0)
    assert [r.k for r in res.rows] == [1, 2, 3]
    assert all(r.entropy >= r.k - 1e-6 for r in res.rows)
    assert res.ok and res.size_ok


def test_entropy_accumulation_checks_success():
    orc = oracle("DISJ", 4)
    with pytest.raises(ValueError):
        entropy_accumulation(linear_obdd("DISJ", 4), oracle("IP", 4), 1.0)
    res = entropy_accumulation(min_reversible_obdd(orc), orc, 1.0)
    assert res.ok


def _toy_scheme(eps):
    e = np.eye(2)
    P0, P1 = np.diag([1.0, 0]), np.diag([0, 1.0])
    meas = [Measurement.from_projectors(P0, P1, np.zeros((2, 2)))]
    return MeasurementScheme(np.array([["0"], ["1"]]), meas, e, eps)


def test_verify_scheme_toy():
    s = _toy_scheme(0.0)
    assert verify_scheme(s).ok
    assert scheme_dimension_bound(s) == (2.0, 2, True)


def test_verify_scheme_detects_each_rule():
    s = _toy_scheme(0.0)
    s.A = np.array([["0"], ["0"]])
    assert any(v.rule == "scheme-i" for v in verify_scheme(s).violations)
    s = _toy_scheme(0.0)
    s.A = np.array([["*", "0"], ["1", "1"]])
    s.measurements = s.measurements * 2
    assert any(v.rule == "scheme-ii" for v in verify_scheme(s).violations)
    s = _toy_scheme(0.0)
    s.states = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert any(v.rule == "scheme-iii" for v in verify_scheme(s).violations)


def test_frame_measurement_matches_projectors():
    rng = np.random.default_rng(1)
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    masks = [np.array([True, False, False, False]), np.array([False, True, True, False]),
             np.array([False, False, False, True])]
    fr = Measurement(W=Q, masks=masks)
    ops = Measurement(ops=tuple(np.diag(m.astype(float)) @ Q for m in masks))
    psi = rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    assert np.allclose(fr.probabilities(psi), ops.probabilities(psi))
    V = np.linalg.qr(rng.normal(size=(4, 4)))[0]
    assert np.allclose(fr.conjugated(V).probabilities(psi), ops.conjugated(V).probabilities(psi))


def test_schemes_parity_and_ind():
    P = parity_obdd(4)
    for lv in build_schemes(P, P, 0.0):
        assert verify_scheme(lv.scheme).ok and lv.size_bound_ok
        assert scheme_dimension_bound(lv.scheme)[2]
    G = min_reversible_obdd(oracle("IND", 4))
    lv = build_scheme(G, ind_zero_error_qobdd(4, 0.5), 3, 0.5)
    assert lv.level == 3 and verify_scheme(lv.scheme).ok
    with pytest.raises(ValueError):
        build_scheme(P, P, 99)


def test_min_obdd_sizes():
    assert min_obdd_size(oracle("DISJ", 4)) == 6
    assert min_obdd_size(oracle("IP", 4)) == 8
    assert min_obdd_size(oracle("PERM", 2)) == 9
    assert min_obdd_size(oracle("XOR", 5)) == 2 * 5 - 1 + 2
    # a bad order blows DISJ up
    assert min_obdd_size(oracle("DISJ", 4), [0, 2, 1, 3]) > 6


def test_k_stability():
    assert is_k_stable(oracle("DET_Z2", 3), 2)
    assert not is_k_stable(oracle("XOR", 3), 2)
    assert is_k_stable(oracle("XOR", 3), 1)
    with pytest.raises(ValueError):
        is_k_stable(oracle("XOR", 3), 4)
