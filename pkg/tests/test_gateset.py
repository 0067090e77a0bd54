import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from qbplab.gateset import (V, GateWord, approx_search, elementary, encode_word, enumeration, operator_norm,
                            phase_aligned_error, product_error_bound, r_function_eval, universal_code_decode)


def test_basis_unitary_and_inverse_pairs():
    for i in range(1, 4):
        assert np.allclose(V[i] @ V[i + 3], np.eye(2), atol=1e-12)
    for d in range(2, 6):
        for i, j in enumeration(d):
            W = elementary(i, j, d)
            assert np.abs(W.conj().T @ W - np.eye(d)).max() <= 1e-12


def test_elementary_placement():
    W = elementary(2, 2, 4)
    assert np.allclose(W[1:3, 1:3], V[2])
    assert W[0, 0] == 1 and W[3, 3] == 1
    with pytest.raises(ValueError):
        elementary(7, 1, 3)
    with pytest.raises(ValueError):
        elementary(1, 3, 3)


def test_enumeration_order():
    assert enumeration(3)[:3] == [(1, 1), (1, 2), (2, 1)]
    assert len(enumeration(5)) == 24


def test_operator_norm():
    rng = np.random.default_rng(0)
    for _ in range(20):
        A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert operator_norm(A) == pytest.approx(np.linalg.norm(A, 2), rel=1e-8)
    assert operator_norm(np.zeros((3, 3))) == 0
    # equal top singular values
    assert operator_norm(np.eye(3)) == pytest.approx(1)


def test_phase_alignment():
    U = unitary_group.rvs(3, random_state=1)
    assert phase_aligned_error(U, np.exp(0.7j) * U) == pytest.approx(0, abs=1e-12)
    assert phase_aligned_error(U, np.exp(0.7j) * U, phase=False) > 0.5


def test_search_exact_words():
    d = 3
    for w in itertools.product(enumeration(d), repeat=2):
        res = approx_search(GateWord(w, d).matrix, 1e-12, 2)
        assert res.found and len(res.word) <= 2 and res.error <= 1e-12


def test_search_identity_and_not_found():
    assert approx_search(np.eye(2), 0.1, 3).depth == 0
    res = approx_search(unitary_group.rvs(2, random_state=3), 1e-9, 2)
    assert not res.found and res.complete


def test_search_rejects_non_unitary():
    with pytest.raises(ValueError):
        approx_search(np.ones((2, 2)), 0.1, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_product_error_bound(seed):
    rng = np.random.default_rng(seed)
    d, k = int(rng.integers(2, 5)), int(rng.integers(1, 5))
    Us = [unitary_group.rvs(d, random_state=rng) for _ in range(k)]
    Vs = [U @ unitary_group.rvs(d, random_state=rng) if rng.random() < 0.3 else U for U in Us]
    lhs = operator_norm(np.linalg.multi_dot(Us + [np.eye(d)]) - np.linalg.multi_dot(Vs + [np.eye(d)]))
    rhs = product_error_bound([operator_norm(U - W) for U, W in zip(Us, Vs)])
    # operator_norm is accurate to a relative 1e-10
    assert lhs <= rhs * (1 + 2e-10) + 1e-12


def test_product_error_bound_rejects_negative():
    with pytest.raises(ValueError):
        product_error_bound([0.1, -0.1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_code_round_trip(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    gates = enumeration(d)
    word = GateWord(tuple(gates[i] for i in rng.integers(0, len(gates), int(rng.integers(0, 5)))), d)
    ell = len(word) + int(rng.integers(0, 3))
    bits = encode_word(word, ell)
    assert bits.size == ell * 6 * (d - 1)
    assert np.allclose(universal_code_decode(bits, d), word.matrix, atol=1e-12)


def test_decode_string_and_errors():
    # one row of m + 1 = 6 bits: two ones then the apply bit selects gate index 2
    W = universal_code_decode("110001", 2)
    assert np.allclose(W, elementary(*enumeration(2)[2], 2))
    with pytest.raises(ValueError):
        universal_code_decode("11000", 2)
    with pytest.raises(ValueError):
        universal_code_decode("1100", 2, m=3)


def test_r_function_eval():
    ident = encode_word(GateWord((), 2), 1)
    assert r_function_eval(ident, ident, ident, 0.3, 2) == 0
    with pytest.raises(ValueError):
        r_function_eval(ident, ident, ident, 0.8, 2)
    with pytest.raises(ValueError):
        r_function_eval(ident, ident, ident, 0.3, 3)
