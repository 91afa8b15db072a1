import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heisgeom.group import (
    A, A_INV, B, B_INV, C, E, CoordinateOverflow, GroupElement, Word, commutator, inv, inv_arrays,
    mul, mul_arrays, normal_form_word, power, word_eval,
)

small = st.integers(-10**6, 10**6)
elements = st.builds(GroupElement, small, small, small)
words = st.text(alphabet="aAbB", max_size=40)


def as_matrix(g):
    return np.array([[1, g.x, g.z], [0, 1, g.y], [0, 0, 1]], dtype=object)


@given(elements, elements)
def test_product_matches_unitriangular_matrices(g, h):
    prod = as_matrix(g).dot(as_matrix(h))
    gh = g * h
    assert (prod == as_matrix(gh)).all()


@given(elements, elements, elements)
def test_associative(g, h, k):
    assert (g * h) * k == g * (h * k)


@given(elements)
def test_inverse_and_identity(g):
    assert g * inv(g) == E == inv(g) * g
    assert g * E == g == E * g


@given(elements, st.integers(-50, 50))
def test_power_matches_repeated_product(g, n):
    acc = E
    step = g if n >= 0 else inv(g)
    for _ in range(abs(n)):
        acc = acc * step
    assert power(g, n) == acc


def test_commutator_of_generators_is_central_c():
    assert commutator(A, B) == C
    assert word_eval("abAB") == C


@given(elements)
def test_c_is_central(g):
    assert C * g == g * C


@given(words, words)
def test_word_eval_is_a_homomorphism(u, v):
    assert word_eval(u + v) == word_eval(u) * word_eval(v)
    assert word_eval(Word.parse(u).inverse()) == inv(word_eval(u))


@given(st.builds(GroupElement, st.integers(-30, 30), st.integers(-30, 30), st.integers(-300, 300)))
def test_normal_form_word_evaluates_back(g):
    assert word_eval(normal_form_word(g)) == g


def test_generator_letters():
    assert [word_eval(s) for s in "aAbB"] == [A, A_INV, B, B_INV]


def test_square_commutator_formula():
    # [a^n, b^n] = c^(n^2)
    for n in range(1, 8):
        assert commutator(power(A, n), power(B, n)) == power(C, n * n)


def test_parse_and_str_roundtrip():
    g = GroupElement.parse(" -3, 4,17")
    assert g == GroupElement(-3, 4, 17)
    assert GroupElement.parse(str(g)) == g
    with pytest.raises(ValueError):
        GroupElement.parse("1,2")
    with pytest.raises(ValueError):
        GroupElement.parse("1,2,x")


def test_rejects_non_integers_and_overflow():
    with pytest.raises(TypeError):
        GroupElement(1.5, 0, 0)
    with pytest.raises(TypeError):
        GroupElement(True, 0, 0)
    with pytest.raises(CoordinateOverflow):
        GroupElement(2**30 + 1, 0, 0)
    with pytest.raises(CoordinateOverflow):
        power(GroupElement(1, 1, 0), 2**31)
    assert GroupElement(np.int64(3), 0, 0).x == 3


def test_word_rejects_unknown_letters():
    with pytest.raises(ValueError):
        Word.parse("abc")


@given(st.lists(st.tuples(small, small, small), min_size=1, max_size=20),
       st.lists(st.tuples(small, small, small), min_size=1, max_size=20))
def test_array_ops_agree_with_scalar(xs, ys):
    n = min(len(xs), len(ys))
    a = np.array(xs[:n], dtype=np.int64).T
    b = np.array(ys[:n], dtype=np.int64).T
    px, py, pz = mul_arrays(*a, *b)
    ix, iy, iz = inv_arrays(*a)
    for k in range(n):
        g, h = GroupElement(*map(int, a[:, k])), GroupElement(*map(int, b[:, k]))
        assert mul(g, h) == GroupElement(int(px[k]), int(py[k]), int(pz[k]))
        assert inv(g) == GroupElement(int(ix[k]), int(iy[k]), int(iz[k]))
