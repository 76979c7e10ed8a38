import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hofa.nilgroup import (
    NilgroupError,
    PolySequence,
    builtin_group,
    character_polynomial,
    cinf_norm,
    circle,
    classify_sequence,
    constant_sequence,
    derivative_filtration_ok,
    discrete_derivative,
    factor_coefficient,
    group_from_json,
    group_inv,
    group_mul,
    group_pow,
    heisenberg,
    heisenberg_from_matrix,
    heisenberg_to_matrix,
    horizontal_characters,
    interpolate,
    irrationality_score,
    iterated_derivative,
    normality_probe,
    poly_inverse,
    poly_product,
    random_poly_sequence,
    reduce_mod_lattice,
    scaled_sequence,
    sequence_from_json,
    taylor_eval,
    torus,
)

H = heisenberg()


def matmul3(x, y):
    """Upper unitriangular product in matrix entries (a, b, c)."""
    a, b, c = x
    a2, b2, c2 = y
    return (a + a2, b + b2, c + c2 + a * b2)


def matpow3(x, n):
    out = (0, 0, 0)
    for _ in range(n):
        out = matmul3(out, x)
    return out


frac = st.fractions(min_value=-4, max_value=4, max_denominator=12)
h_elements = st.tuples(frac, frac, frac).map(H.element)


def test_group_law_matches_matrices():
    x = heisenberg_from_matrix(1, 0, 0)
    y = heisenberg_from_matrix(0, 1, 0)
    assert heisenberg_to_matrix(x * y) == (1, 1, 1)
    assert heisenberg_to_matrix(y * x) == (1, 1, 0)


@settings(max_examples=200, deadline=None)
@given(st.tuples(frac, frac, frac), st.tuples(frac, frac, frac))
def test_group_law_against_matrix_oracle(p, q):
    g, h = heisenberg_from_matrix(*p), heisenberg_from_matrix(*q)
    assert heisenberg_to_matrix(group_mul(g, h)) == matmul3(p, q)


@settings(max_examples=200, deadline=None)
@given(h_elements, h_elements, h_elements)
def test_group_axioms(g, h, k):
    assert (g * h) * k == g * (h * k)
    assert (g * group_inv(g)).is_identity()
    assert g * H.identity() == g


def test_torus_adds():
    T = torus(3)
    g, h = T.element((Fraction(1, 3), 2, -1)), T.element((Fraction(1, 6), 1, 4))
    assert (g * h).coords == (Fraction(1, 2), 3, 3)


@pytest.mark.parametrize("n", range(2, 7))
def test_power_formula(n):
    alpha, beta = Fraction(2, 7), Fraction(-3, 5)
    g = heisenberg_from_matrix(alpha, beta, 0)
    expect = (n * alpha, n * beta, math.comb(n, 2) * alpha * beta)
    assert heisenberg_to_matrix(group_pow(g, n)) == expect
    assert matpow3((alpha, beta, 0), n) == expect


@settings(max_examples=100, deadline=None)
@given(h_elements, frac, frac)
def test_one_parameter_subgroup(g, x, y):
    assert (g ** 0).is_identity()
    assert g ** 1 == g
    assert (g ** x) ** y == g ** (x * y)


def test_reduce_examples():
    rep, gamma = reduce_mod_lattice(H.element((Fraction(1, 2), Fraction(1, 2), Fraction(5, 4))))
    assert rep.coords == (Fraction(1, 2), Fraction(1, 2), Fraction(1, 4))
    assert gamma.in_lattice()
    rep, _ = reduce_mod_lattice(H.element((Fraction(3, 2), 0, 0)))
    assert rep.coords == (Fraction(1, 2), 0, 0)
    g = H.element((Fraction(1, 3), Fraction(2, 5), Fraction(1, 7)))
    rep, gamma = reduce_mod_lattice(g)
    assert rep == g and gamma.is_identity()


@settings(max_examples=200, deadline=None)
@given(h_elements, st.tuples(*[st.integers(-5, 5)] * 3))
def test_reduction_is_coset_invariant(g, ints):
    gamma = H.element(ints)
    rep, witness = reduce_mod_lattice(g)
    assert all(0 <= c < 1 for c in rep.coords)
    assert rep == g * witness
    assert reduce_mod_lattice(g * gamma)[0] == rep


def test_taylor_examples():
    T = circle()
    alpha = Fraction(3, 11)
    seq = PolySequence.from_coords(T, [(0,), (alpha,)])
    assert taylor_eval(seq, 3).coords == (3 * alpha,)
    g1 = heisenberg_from_matrix(1, 1, 0)
    seq = PolySequence(H, (H.identity(), g1, H.element((0, 0, 1))))
    assert heisenberg_to_matrix(taylor_eval(seq, 2)) == (2, 2, 2)
    assert heisenberg_to_matrix(taylor_eval(seq, 2)) == matmul3(matpow3((1, 1, 0), 2), (0, 0, 1))
    assert taylor_eval(seq, 0) == seq.taylor[0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_taylor_uniqueness(seed):
    seq = random_poly_sequence(H, np.random.default_rng(seed))
    assert interpolate(H, seq) == seq


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.lists(st.integers(-4, 4), min_size=1, max_size=3))
def test_products_are_polynomial(seed, hs):
    rng = np.random.default_rng(seed)
    a, b = random_poly_sequence(H, rng), random_poly_sequence(H, rng)
    prod = poly_product(a, b)
    for n in range(-3, 4):
        assert prod(n) == a(n) * b(n)
    assert derivative_filtration_ok(prod, hs)
    assert derivative_filtration_ok(scaled_sequence(a, 3, -2), hs)


def test_product_identities():
    rng = np.random.default_rng(3)
    a = random_poly_sequence(H, rng)
    assert poly_product(a, constant_sequence(H.identity())) == a
    trivial = poly_product(a, poly_inverse(a))
    assert trivial == constant_sequence(H.identity())


def test_derivatives():
    assert discrete_derivative(constant_sequence(H.element((1, 2, 3))), 4) == \
        constant_sequence(H.identity())
    T = circle()
    alpha = Fraction(2, 9)
    lin = PolySequence.from_coords(T, [(0,), (alpha,)])
    assert discrete_derivative(lin, 5) == constant_sequence(T.element((5 * alpha,)))
    quad = random_poly_sequence(H, np.random.default_rng(8))
    assert iterated_derivative(quad, (1, -2, 3)) == constant_sequence(H.identity())


def test_classify():
    T = circle()
    third = PolySequence.from_coords(T, [(0,), (Fraction(1, 3),)])
    out = classify_sequence(third, 3, 50)
    assert out["rational"] and out["period"] == 3
    const = constant_sequence(T.element((Fraction(1, 4),)))
    assert classify_sequence(const, 1, 10)["smooth"]
    assert classify_sequence(const, 4, 10)["rational"]
    assert not classify_sequence(const, 3, 10)["rational"]
    half = PolySequence.from_coords(H, [(0, 0, 0), (Fraction(1, 2), 0, 0)])
    assert classify_sequence(half, 2, 10)["period"] == 2


def test_horizontal_characters():
    ms = sorted(c.m for c in horizontal_characters(circle(), 1, 2))
    assert ms == [(-2,), (-1,), (1,), (2,)]
    assert horizontal_characters(H, 2, 5) == []
    ms = sorted(c.m for c in horizontal_characters(H, 1, 1))
    assert ms == [(-1, 0), (0, -1), (0, 1), (1, 0)]


def best_approximation_gap(alpha, A):
    """min_{1 <= m <= A} ||m alpha|| via continued-fraction convergents."""
    x, cf = Fraction(alpha), []
    for _ in range(40):
        a = math.floor(x)
        cf.append(a)
        if x == a:
            break
        x = 1 / (x - a)
    h0, h1, k0, k1 = 1, cf[0], 0, 1
    best = math.inf
    for a in cf[1:]:
        h0, h1, k0, k1 = h1, a * h1 + h0, k1, a * k1 + k0
        if k1 > A:
            break
        best = min(best, abs(k1 * float(alpha) - h1))
    return best


def test_irrationality_score():
    T = circle()
    half = PolySequence.from_coords(T, [(0,), (Fraction(1, 2),)])
    assert irrationality_score(half, 100, 10) == 1
    zero = PolySequence.from_coords(T, [(0,), (0,)])
    assert irrationality_score(zero, 100, 10) == 0
    alpha = (math.sqrt(5) - 1) / 2
    golden = PolySequence.from_coords(T, [(0,), (alpha,)])
    N = 10 ** 4
    expect = max(A for A in range(1, 21) if all(N * best_approximation_gap(alpha, a) >= a
                                                 for a in range(1, A + 1)))
    assert irrationality_score(golden, N, 20) == expect == 20
    with pytest.raises(NilgroupError):
        irrationality_score(golden, 5, 10)


def test_factor_coefficient():
    T = circle()
    delta = Fraction(1, 10 ** 6)
    chi = horizontal_characters(T, 1, 3)
    three = next(c for c in chi if c.m == (3,))
    out = factor_coefficient(T, 1, T.element((Fraction(1, 3) + delta,)), three, N=100)
    assert out.t == (delta,) and out.u == (0,) and out.v == (Fraction(1, 3),)
    assert out.beta * out.gprime * out.gamma == T.element((Fraction(1, 3) + delta,))
    assert out.beta_scale == pytest.approx(1e-4)

    rat = factor_coefficient(T, 1, T.element((Fraction(2, 7),)),
                             next(c for c in horizontal_characters(T, 1, 7) if c.m == (7,)))
    assert rat.t == (0,) and rat.u == (0,) and rat.v == (Fraction(2, 7),)

    T2 = torus(2)
    x = Fraction(3, 13)
    g = T2.element((Fraction(1, 5) + delta, x))
    first = next(c for c in horizontal_characters(T2, 1, 1) if c.m == (1, 0))
    out = factor_coefficient(T2, 1, g, first, qmax=5)
    assert out.t == (delta, 0) and out.v == (Fraction(1, 5), 0) and out.u == (0, x)


def test_scaled_sequence():
    T = circle()
    alpha = Fraction(5, 17)
    lin = PolySequence.from_coords(T, [(0,), (alpha,)])
    assert scaled_sequence(lin, 1, 0) == lin
    assert scaled_sequence(lin, 2, 1) == PolySequence.from_coords(T, [(alpha,), (2 * alpha,)])
    with pytest.raises(NilgroupError):
        scaled_sequence(lin, 0, 0)
    irr = PolySequence.from_coords(H, [(0, 0, 0), (math.sqrt(2) - 1, math.sqrt(3) - 1, 0)])
    assert irrationality_score(scaled_sequence(irr, 3, 1), 1000, 10) > 0


def test_cinf_norm():
    N = 50
    assert cinf_norm({1: Fraction(1, N)}, N) == pytest.approx(1)
    assert cinf_norm({0: Fraction(1, 3), 1: 4, 2: -7}, N) == 0
    assert cinf_norm({2: Fraction(3, N ** 2)}, N) == pytest.approx(3)
    seq = PolySequence.from_coords(circle(), [(0,), (Fraction(1, 2),)])
    assert cinf_norm(character_polynomial(seq, (2,), (0,)), N) == 0


def test_eccentric_ball_normality():
    # containment is only claimed for small r; failures must vanish as r shrinks
    fails = [normality_probe(H, r=r, delta=0.2, A=2.0, probes=5000, seed=1)["failures"]
             for r in (0.1, 0.05, 0.01)]
    assert fails == sorted(fails, reverse=True)
    assert fails[1] == fails[2] == 0


def test_group_files():
    assert builtin_group("torus(2)").dim == 2
    g = group_from_json(H.to_json())
    assert g == H
    seq = sequence_from_json({"group": "heisenberg", "taylor": [[0, 0, 0], ["1/2", 0, 0]]})
    assert seq.taylor[1].coords[0] == Fraction(1, 2)
    with pytest.raises(NilgroupError):
        builtin_group("sl2")
    with pytest.raises(NilgroupError):
        group_from_json({"dim": 2, "filtrationDims": [2, 1, 2]})
