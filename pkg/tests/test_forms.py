import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hofa.acceptance import bruteforce_cs_complexity
from hofa.forms import (
    FormsError,
    LinearFormSystem,
    ap_system,
    cs_complexity,
    depolarisation_check,
    eval_forms,
    leibman_dim,
    pairwise_independent,
    parallelepiped_system,
    parse_forms,
    power_flag,
    top_power_independence,
)


def system(rows):
    return LinearFormSystem(tuple(map(tuple, rows)), tuple(f"x{j}" for j in range(len(rows[0]))))


def float_power_rank(psi, i, grid=4):
    """Rank of {Psi(n)^j : j <= i, n in a box} by SVD; an independent route to dim Psi^[i]."""
    vecs = []
    for n in itertools.product(range(-grid, grid + 1), repeat=psi.D):
        base = np.array(eval_forms(psi, n), dtype=float)
        for j in range(1, i + 1):
            vecs.append(base ** j)
    return int(np.linalg.matrix_rank(np.array(vecs)))


def test_eval_examples():
    assert eval_forms(ap_system(4), (5, 2)) == (5, 7, 9, 11)
    assert eval_forms(ap_system(4), (0, 0)) == (0, 0, 0, 0)
    assert eval_forms(parallelepiped_system(2), (1, 1, 1)) == (1, 2, 2, 3)


def test_parse_forms():
    psi = parse_forms("n; n+d; n+2d")
    assert psi.coeffs == ((1, 0), (1, 1), (1, 2))
    assert parse_forms("x - 3y; 2y").coeffs == ((1, -3), (0, 2))
    with pytest.raises(FormsError):
        parse_forms("n + 1")
    with pytest.raises(FormsError):
        parse_forms("n;;d")


def test_pairwise_independent():
    assert pairwise_independent(ap_system(3))
    assert not pairwise_independent(system([(1, 0), (2, 0)]))
    assert pairwise_independent(system([(1, 1), (1, -1)]))


@pytest.mark.parametrize("k", [3, 4, 5])
def test_ap_complexity(k):
    assert cs_complexity(ap_system(k)) == k - 2


def test_complexity_small_cases():
    assert cs_complexity(system([(1, 0)])) == 0
    assert cs_complexity(parallelepiped_system(2)) == 1
    with pytest.raises(FormsError):
        cs_complexity(system([(1, 0), (2, 0)]))


pair_free = st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3)),
                     min_size=2, max_size=5).filter(
    lambda rows: all(any(r) for r in rows) and pairwise_independent(system(rows)))


@settings(max_examples=40, deadline=None)
@given(pair_free)
def test_complexity_matches_bruteforce(rows):
    assert cs_complexity(system(rows)) == bruteforce_cs_complexity(rows)


def test_four_ap_flag():
    flag = power_flag(ap_system(4), 3)
    assert flag.dims == (2, 3, 4)
    assert flag.contains((1, 1, 1, 1), 1) and flag.contains((0, 1, 2, 3), 1)
    assert not flag.contains((0, 0, 1, 3), 1)
    assert [tuple(v) for v in flag.annihilator(2)] in ([(1, -3, 3, -1)], [(-1, 3, -3, 1)])


@settings(max_examples=30, deadline=None)
@given(pair_free, st.integers(1, 3))
def test_flag_dims_match_float_rank(rows, s):
    psi = system(rows)
    flag = power_flag(psi, s)
    assert list(flag.dims) == [float_power_rank(psi, i) for i in range(1, s + 1)]


@settings(max_examples=30, deadline=None)
@given(pair_free, st.integers(1, 3))
def test_flag_structure(rows, s):
    flag = power_flag(system(rows), s)
    assert list(flag.dims) == sorted(flag.dims)
    assert list(flag.degrees) == sorted(flag.degrees)
    for j, (v, p) in enumerate(zip(flag.basis, flag.pivots)):
        assert all(isinstance(x, int) for x in v)
        assert v[p] > 0
        for later in flag.basis[j + 1:]:
            assert later[p] == 0
    # unique coordinates: basis vectors are recovered as unit coordinates
    for j, v in enumerate(flag.basis):
        coords = flag.coordinates(v)
        assert coords == [Fraction(int(i == j)) for i in range(len(flag.basis))]


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 5), st.integers(1, 2), st.integers(1, 2),
       st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=4, max_size=4))
def test_filtration_property(k, i, j, points):
    psi = ap_system(k)
    flag = power_flag(psi, i + j)
    u = [a + 2 * b for a, b in zip(eval_forms(psi, points[0]), eval_forms(psi, points[1]))]
    v = [a - b for a, b in zip(eval_forms(psi, points[2]), eval_forms(psi, points[3]))]
    if i >= 2:
        u = [a * a for a in u]
    if j >= 2:
        v = [a * b for a, b in zip(v, eval_forms(psi, points[0]))]
    assert flag.contains(u, i) and flag.contains(v, j)
    assert flag.contains([a * b for a, b in zip(u, v)], i + j)


def test_depolarisation():
    psi = ap_system(4)
    assert depolarisation_check(psi, 2, [((1, 0), (0, 1))])
    assert depolarisation_check(psi, 1, [((3, -2),), ((0, 5),)])
    flag = power_flag(psi, 2)
    assert not flag.contains((1, -3, 3, -1), 2)
    sq = [x * x for x in eval_forms(psi, (1, 0))]
    assert flag.contains(sq, 2)


def test_top_power_independence():
    assert top_power_independence(ap_system(3), 1)
    assert not top_power_independence(ap_system(4), 1)
    assert top_power_independence(system([(2, -1)]), 4)
    # squares of n1, n1+n2, n1+2n2 in the basis (n1^2, n1 n2, n2^2)
    det = np.linalg.det(np.array([[1, 0, 0], [1, 2, 1], [1, 4, 4]], dtype=float))
    assert round(det) == 4


def test_leibman_dim():
    assert leibman_dim(power_flag(ap_system(4), 2), (3, 1)) == 7
    assert leibman_dim(power_flag(ap_system(3), 1), (1,)) == 2
    assert leibman_dim((0, 0), (3, 1)) == 0
    with pytest.raises(FormsError):
        leibman_dim((2, 3), (3,))
