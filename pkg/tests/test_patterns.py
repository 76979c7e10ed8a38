import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_bounded
from hofa.acceptance import regularize_input
from hofa.decompose import regularize
from hofa.forms import ap_system, parse_forms
from hofa.funcspace import SampledFunction
from hofa.nilgroup import PolySequence, heisenberg
from hofa.orbits import LipschitzFunction, e
from hofa.patterns import (
    PatternError,
    ap_profile,
    bhk_verify_synthetic,
    bhk_weight,
    build_construction,
    cutoff,
    cutoff_integral,
    gvn_check,
    gw_statement_check,
    lambda_k,
    multilinear_average,
    nil_weight,
    pattern_report,
    twisted_gvn_check,
)

GOLDEN = (math.sqrt(5) - 1) / 2


def brute_average(fs, psi, domain):
    """Literal sum over the index box, one point at a time."""
    N = fs[0].N
    if domain == "cyclic":
        box = [range(N)] * psi.D
    else:
        box = [range(1, N + 1)] + [range(-N, N + 1)] * (psi.D - 1)
    total, count = 0j, 0
    for n in itertools.product(*box):
        term = 1 + 0j
        for row, f in zip(psi.coeffs, fs):
            m = sum(a * b for a, b in zip(row, n))
            if domain == "cyclic":
                term *= f.values[m % N]
            else:
                term *= f.values[m - 1] if 1 <= m <= N else 0
        total += term
        count += 1
    return total / count


def cyc(values):
    return SampledFunction.on_cyclic(values)


@pytest.mark.parametrize("domain", ["cyclic", "interval"])
@pytest.mark.parametrize("forms", ["n; n+d; n+2d", "x; x+y; x+z; x+y+z", "n; n+d; n+3d; n-2d"])
def test_matches_bruteforce(rng, domain, forms):
    psi = parse_forms(forms)
    N = 7 if psi.D == 3 else 11
    fs = [random_bounded(rng, N, domain) for _ in range(psi.t)]
    assert multilinear_average(fs, psi, domain) == pytest.approx(brute_average(fs, psi, domain),
                                                                  abs=1e-12)


def test_average_examples():
    N = 12
    ones = [cyc(np.ones(N))] * 3
    assert lambda_k(ones) == pytest.approx(1)
    n = np.arange(N)
    phases = [cyc(e(n / N)), cyc(e(-2 * n / N)), cyc(e(n / N))]
    assert lambda_k(phases) == pytest.approx(1)


@pytest.mark.parametrize("N", [8, 16, 30])
def test_evens_quarter(N):
    evens = cyc((np.arange(N) % 2 == 0).astype(float))
    value = lambda_k([evens] * 3)
    assert value == pytest.approx(brute_average([evens] * 3, ap_system(3), "cyclic"))
    assert value == pytest.approx(0.25)


def test_arity_mismatch():
    with pytest.raises(PatternError):
        multilinear_average([cyc([1, 1])] * 2, ap_system(3))


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 12), st.integers(0, 10 ** 6), st.sampled_from(["cyclic", "interval"]))
def test_average_bounded_by_sup(N, seed, domain):
    rng = np.random.default_rng(seed)
    fs = [random_bounded(rng, N, domain) for _ in range(3)]
    bound = np.prod([np.max(np.abs(f.values)) for f in fs])
    assert abs(multilinear_average(fs, ap_system(3), domain)) <= bound + 1e-12
    rep = pattern_report(fs, ap_system(3), domain)
    assert abs(rep.value) <= rep.metadata["supProduct"] + 1e-12


def test_profile_examples(tmp_path):
    N = 40
    full = ap_profile(SampledFunction.on_interval(np.ones(N)), 3)
    for d in range(0, N // 2):
        assert full[d] == pytest.approx((N - 2 * d) / N)
    rng = np.random.default_rng(2)
    A = SampledFunction.on_interval(rng.integers(0, 2, N).astype(float))
    prof = ap_profile(A, 3)
    assert prof[0] == pytest.approx(A.values.real.mean())

    path = tmp_path / "profile.csv"
    prof.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "d,count,normalized" and len(lines) == 2 * N + 2
    assert lines[N + 1].startswith("0,")


def test_profile_of_evens():
    N = 100
    evens = SampledFunction.on_interval((np.arange(1, N + 1) % 2 == 0).astype(float))
    prof = ap_profile(evens, 3)
    for d in range(-N // 2 + 1, N // 2):
        in_range = sum(1 for n in range(1, N + 1) if 1 <= n + 2 * d <= N and 1 <= n + d <= N)
        if d % 2:
            assert prof[d] == 0
        else:
            assert prof[d] * N / in_range == pytest.approx(0.5, abs=0.02)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(1, 5), st.integers(0, 10 ** 6))
def test_profile_average_is_lambda(N, k, seed):
    A = SampledFunction.on_interval(np.random.default_rng(seed).integers(0, 2, N).astype(float))
    assert ap_profile(A, k).average() == pytest.approx(lambda_k([A] * k, "interval").real,
                                                       abs=1e-9)


def test_profile_rejects_non_indicator():
    with pytest.raises(PatternError):
        ap_profile(SampledFunction.on_interval([0.5, 1]), 3)


def test_gvn_examples(rng):
    N = 64
    ones = [cyc(np.ones(N))] * 3
    out = gvn_check(ones, ap_system(3))
    assert out["lhs"] == pytest.approx(1) and out["rhs"] == pytest.approx(1) and out["pass"]
    signs = [cyc(rng.choice([-1.0, 1.0], N)) for _ in range(3)]
    assert gvn_check(signs, ap_system(3))["pass"]
    inter = gvn_check([SampledFunction.on_interval(f.values) for f in signs], ap_system(3),
                      "interval")
    assert inter["pass"] is None and not inter["asserted"]


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([3, 4]), st.sampled_from([32, 64]), st.integers(0, 10 ** 6))
def test_gvn_constant_one(k, N, seed):
    rng = np.random.default_rng(seed)
    fs = [random_bounded(rng, N) for _ in range(k)]
    assert gvn_check(fs, ap_system(k))["pass"]


def test_gvn_on_uniform_part():
    res = regularize(regularize_input(N=256), 1, 0.1, "exp", m0=2)
    unf = cyc(res.f_unf.values)
    out = gvn_check([unf] * 3, ap_system(3))
    assert out["pass"] and out["lhs"] <= out["rhs"] + 1e-6


def test_twisted_reduces_to_plain(rng):
    N = 24
    fs = [random_bounded(rng, N, "interval") for _ in range(3)]
    out = twisted_gvn_check(fs, (0, 1, 2))
    assert out["lhs"] == pytest.approx(abs(lambda_k(fs, "interval")), abs=1e-12)


def test_twisted_character_weight(rng):
    for N in (32, 64, 128):
        fs = [random_bounded(rng, N, "interval") for _ in range(3)]
        out = twisted_gvn_check(fs, (0, 1, 2), theta=float(rng.random()))
        assert out["ratio"] <= 2
        assert out["modulation"]["lambdaMatch"] and out["modulation"]["normsMatch"]


def test_twisted_tightness():
    N, theta = 50, 0.137
    n = np.arange(1, N + 1)
    fs = [SampledFunction.on_interval(e(theta * n)), SampledFunction.on_interval(e(-2 * theta * n)),
          SampledFunction.on_interval(e(theta * n))]
    ones = [SampledFunction.on_interval(np.ones(N))] * 3
    out = twisted_gvn_check(fs, (0, 1, 2))
    assert out["lhs"] == pytest.approx(twisted_gvn_check(ones, (0, 1, 2))["lhs"], abs=1e-12)
    assert out["rhs"] == pytest.approx(1, abs=1e-9)


def test_twisted_nil_weight(rng):
    H = heisenberg()
    seq = PolySequence.from_coords(H, [(0, 0, 0), (math.sqrt(2) - 1, math.sqrt(3) - 1, 0)])
    F = LipschitzFunction(lambda x: np.cos(2 * np.pi * x[..., 0]) + 0j)
    N = 40
    w = nil_weight(F, seq, N)
    fs = [random_bounded(rng, N, "interval") for _ in range(4)]
    out = twisted_gvn_check(fs, (0, 1, 2, 3), weight=w)
    assert out["lhs"] >= 0 and out["rhs"] > 0
    with pytest.raises(PatternError):
        twisted_gvn_check(fs, (0, 1, 1, 3), weight=w)


def test_cutoff_integral_against_quadrature():
    for m in (1, 2):
        for ep in (0.05, 0.2):
            grid = (np.arange(2000) + 0.5) / 2000
            if m == 1:
                num = np.mean(cutoff(np.minimum(grid, 1 - grid), ep))
            else:
                dist = np.minimum(grid, 1 - grid)
                num = np.mean(cutoff(np.maximum.outer(dist, dist), ep))
            assert num == pytest.approx(cutoff_integral(m, ep), rel=1e-4)


def test_bhk_weight_examples():
    flat = bhk_weight("k3_bohr", 1000, 0.1, theta=[0.0])
    inside = flat.values[np.abs(np.arange(-1000, 1001)) <= flat.window]
    assert np.allclose(inside, inside[0]) and inside[0] > 0
    gold = bhk_weight("k3_bohr", 5000, 0.05, theta=[GOLDEN])
    assert 0.9 <= gold.mean <= 1.1
    assert np.all(gold.values >= 0)
    H = heisenberg()
    seq = PolySequence.from_coords(H, [(0, 0, 0), (math.sqrt(2) - 1, math.sqrt(3) - 1, 0)])
    nil = bhk_weight("k4_nil", 20000, 0.2, seq=seq)
    assert nil.support_density == pytest.approx((2 * 0.2) ** 2, abs=0.03)
    with pytest.raises(PatternError):
        bhk_weight("k3_bohr", 10, 0.01, theta=[GOLDEN])


def test_bhk_all_ones():
    rep = bhk_verify_synthetic(3, "all", 0.05, 500)
    # count(d)/N = 1 - 2|d|/N clears 1 - eps only for |d| <= eps*N/2
    good = 2 * math.floor(0.025 * 500) + 1
    assert rep["density"] == 1 and rep["pass"]
    assert rep["goodDifferenceFraction"] == pytest.approx(good / 1001)


def test_bhk_bohr_k3():
    rep = bhk_verify_synthetic(3, "bohr:alpha=0.618,delta=0.15", 0.05, 5000)
    assert rep["density"] == pytest.approx(0.3, abs=0.01)
    assert rep["weightedCount"] >= 0.3 ** 3 - 0.05
    assert rep["goodDifferenceFraction"] >= 0.01


def test_bhk_noisy_construction():
    con = build_construction("bohr:alpha=0.618,delta=0.15,noise=0.02", 2000, seed=3)
    clean = build_construction("bohr:alpha=0.618,delta=0.15", 2000)
    flips = np.sum(con.indicator.values != clean.indicator.values)
    assert 0 < flips < 100


def test_bhk_rejects_large_k():
    with pytest.raises(PatternError, match="Ruzsa"):
        bhk_verify_synthetic(5, "all", 0.1, 100)


def test_gw_statement():
    rep = gw_statement_check(ap_system(3), 1, N=48)
    base = rep["rows"][0]
    assert base["lambda"] == pytest.approx(1) and base["norm"] == pytest.approx(1)
    assert rep["spearman"] > 0.9
    skipped = gw_statement_check(ap_system(4), 1)
    assert skipped["skipped"] and "dependent" in skipped["reason"]
