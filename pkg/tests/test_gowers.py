import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_bounded
from hofa.exprlang import eval_expr
from hofa.funcspace import DomainError, DomainSpec, SampledFunction
from hofa.gowers import GowersError, gowers_norm, mult_derivative, u2_fft


def brute_power(values, k):
    """Literal 2^k-fold average over (x, h_1..h_k), no recursion."""
    N = len(values)
    total = 0j
    for x in range(N):
        for hs in itertools.product(range(N), repeat=k):
            term = 1 + 0j
            for omega in itertools.product((0, 1), repeat=k):
                z = values[(x + sum(w * h for w, h in zip(omega, hs))) % N]
                term *= np.conj(z) if sum(omega) % 2 else z
            total += term
    return (total / N ** (k + 1)).real


def test_mult_derivative_examples():
    N = 12
    one = SampledFunction.on_cyclic(np.ones(N))
    assert np.allclose(mult_derivative(one, 5).values, 1)
    theta = 0.37
    f = SampledFunction.on_cyclic(np.exp(2j * np.pi * theta * np.arange(N)))
    g = eval_expr("e(1/4*n)", DomainSpec.cyclic(N))
    assert np.allclose(mult_derivative(g, 3).values, np.exp(2j * np.pi * 3 / 4))
    assert np.allclose(mult_derivative(f, 0).values, np.abs(f.values) ** 2)


def test_mult_derivative_rejects_interval():
    with pytest.raises(DomainError):
        mult_derivative(SampledFunction.on_interval([1, 1]), 1)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_matches_bruteforce(rng, k):
    for _ in range(3):
        f = random_bounded(rng, 7)
        assert abs(gowers_norm(f, k).power - brute_power(f.values, k)) < 1e-12


def test_constant_on_interval():
    for c in (0.0, 0.25, 1.0):
        f = SampledFunction.on_interval(np.full(9, c))
        for k in (1, 2, 3):
            assert gowers_norm(f, k).norm == pytest.approx(c, abs=1e-12)


def test_linear_phase_cyclic():
    f = eval_expr("e(1/17*n)", DomainSpec.cyclic(17))
    assert gowers_norm(f, 2).norm == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("N", [101, 257])
def test_gauss_sum(N):
    f = SampledFunction.on_cyclic(np.exp(2j * np.pi * (np.arange(N) ** 2 % N) / N))
    assert abs(gowers_norm(f, 2).norm - N ** -0.25) < 1e-9
    assert abs(u2_fft(f).norm - N ** -0.25) < 1e-9


def test_fft_examples(rng):
    assert u2_fft(SampledFunction.on_cyclic(np.ones(16))).norm == pytest.approx(1)
    f = eval_expr("e(1/16*n)", DomainSpec.cyclic(16))
    assert u2_fft(f).norm == pytest.approx(1)
    for _ in range(20):
        g = random_bounded(rng, 128)
        assert abs(u2_fft(g).power - gowers_norm(g, 2, method="direct").power) < 1e-9


def test_ntilde_independence(rng):
    for k in (1, 2, 3):
        f = random_bounded(rng, 12, "interval")
        a = gowers_norm(f, k).norm
        b = gowers_norm(f, k, ntilde=2 ** k * 12 + 7).norm
        assert abs(a - b) < 1e-9


def test_invalid_k():
    f = SampledFunction.on_cyclic([1, 0])
    with pytest.raises(GowersError):
        gowers_norm(f, 0)
    with pytest.raises(GowersError):
        gowers_norm(f, 6)


def test_deterministic_is_bit_stable(rng):
    f = random_bounded(rng, 40)
    a = gowers_norm(f, 3, deterministic=True).power
    b = gowers_norm(f, 3, deterministic=True).power
    assert a == b


def test_threads_agree(rng):
    f = random_bounded(rng, 40)
    assert gowers_norm(f, 3, threads=3).power == pytest.approx(gowers_norm(f, 3).power, abs=1e-12)


values = st.lists(st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False),
                  min_size=2, max_size=24)


@settings(max_examples=60, deadline=None)
@given(values)
def test_monotone_in_k(vals):
    f = SampledFunction.on_cyclic(vals)
    norms = [gowers_norm(f, k).norm for k in (2, 3)]
    assert norms[0] <= norms[1] + 1e-9


@settings(max_examples=60, deadline=None)
@given(values, st.floats(0, 1), st.sampled_from([2, 3]))
def test_phase_invariance(vals, theta, k):
    f = SampledFunction.on_cyclic(vals)
    N = len(vals)
    # e(theta n) with theta a multiple of 1/N is a character of Z_N
    char = np.exp(2j * np.pi * round(theta * N) * np.arange(N) / N)
    g = f.replace(f.values * char)
    assert abs(gowers_norm(f, k).norm - gowers_norm(g, k).norm) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 30), st.lists(st.integers(-20, 20), min_size=1, max_size=3))
def test_degree_s_phase_has_unit_norm(N, coeffs):
    n = np.arange(N)
    P = sum(c * n ** (j + 1) for j, c in enumerate(coeffs)) % N
    f = SampledFunction.on_cyclic(np.exp(2j * np.pi * P / N))
    s = len(coeffs)
    assert gowers_norm(f, s + 1).norm == pytest.approx(1, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(values, st.integers(1, 3))
def test_power_nonnegative(vals, k):
    r = gowers_norm(SampledFunction.on_cyclic(vals), k)
    assert r.power >= 0 or r.clamped
    assert r.norm == pytest.approx(max(r.power, 0) ** (1 / 2 ** k))
