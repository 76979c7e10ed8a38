"""The eleven acceptance criteria as runnable checks.

Each check returns a `Criterion` with pass/fail and the measured numbers.
`run_all` is shared by `hofa selftest` and tests/test_acceptance.py.
Where a criterion calls for an oracle, the oracle here is a separate
computation that does not reuse the code path under test.
"""

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import decompose, forms, gowers, nilgroup, orbits, patterns
from .funcspace import SampledFunction


@dataclass
class Criterion:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d}: {self.title} ({self.seconds:.2f}s)"

    def to_json(self):
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "details": self.details, "seconds": round(self.seconds, 3)}


def _random_bounded(rng, N, kind=None):
    kind = kind or rng.choice(["phase", "disc", "quadratic", "indicator", "signs"])
    n = np.arange(N)
    if kind == "phase":
        return np.exp(2j * np.pi * rng.random(N))
    if kind == "disc":
        return np.sqrt(rng.random(N)) * np.exp(2j * np.pi * rng.random(N))
    if kind == "quadratic":
        a, b = rng.integers(0, N, size=2)
        return np.exp(2j * np.pi * ((a * n * n + b * n) % N) / N)
    if kind == "indicator":
        return (rng.random(N) < rng.uniform(0.2, 0.8)).astype(float)
    return rng.choice([-1.0, 1.0], size=N)


# 1 -------------------------------------------------------------------------------------------

def criterion_1(seed=1):
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        f = SampledFunction.on_cyclic(_random_bounded(rng, 128, "disc"))
        fast = gowers.u2_fft(f).norm
        direct = gowers.gowers_norm(f, 2, method="direct").norm
        worst = max(worst, abs(fast - direct))
    secs = time.perf_counter() - t0
    return Criterion(1, "U2 FFT identity on Cyclic(128)", worst <= 1e-9 and secs < 2.0,
                     {"maxAbsDiff": worst, "runtime": secs})


# 2 -------------------------------------------------------------------------------------------

def criterion_2():
    out = {}
    ok = True
    for N in (101, 257):
        n = np.arange(N)
        f = SampledFunction.on_cyclic(np.exp(2j * np.pi * (n * n % N) / N))
        target = N ** -0.25
        for method in ("direct", "fft"):
            val = gowers.gowers_norm(f, 2, method=method).norm
            err = abs(val - target)
            out[f"N={N},{method}"] = err
            ok &= err <= 1e-9
    return Criterion(2, "Gauss-sum U2 value N^(-1/4)", bool(ok), {"absErrors": out})


# 3 -------------------------------------------------------------------------------------------

def criterion_3(seed=3, N=20):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in (1, 2, 3):
        for _ in range(20):
            f = SampledFunction.on_interval(_random_bounded(rng, N, "disc"))
            a = gowers.gowers_norm(f, k, ntilde=2 ** k * N).norm
            b = gowers.gowers_norm(f, k, ntilde=2 ** k * N + 7).norm
            worst = max(worst, abs(a - b))
    exact = True
    for c in (0.3, 1.0, 0.7j, -0.25):
        f = SampledFunction.on_interval(np.full(N, c))
        for k in (1, 2, 3):
            exact &= gowers.gowers_norm(f, k).norm == abs(c)
    return Criterion(3, "Interval norm independent of the cyclic embedding",
                     bool(worst <= 1e-9 and exact), {"maxAbsDiff": worst, "constantExact": exact})


# 4 -------------------------------------------------------------------------------------------

def bruteforce_cs_complexity(coeffs, max_s=8):
    """Smallest s such that each form avoids the span of every class of some (s+1)-colouring."""
    rows = [np.array(r, dtype=float) for r in coeffs]
    t = len(rows)

    def outside(i, cls):
        if not cls:
            return True
        A = np.array([rows[j] for j in cls])
        return np.linalg.matrix_rank(np.vstack([A, rows[i]])) > np.linalg.matrix_rank(A)

    for s in range(max_s + 1):
        good = True
        for i in range(t):
            others = [j for j in range(t) if j != i]
            found = False
            for colours in itertools.product(range(s + 1), repeat=len(others)):
                classes = [[j for j, c in zip(others, colours) if c == col] for col in range(s + 1)]
                if all(outside(i, cls) for cls in classes):
                    found = True
                    break
            if not found:
                good = False
                break
        if good:
            return s
    return None


def criterion_4():
    ap = {k: forms.cs_complexity(forms.ap_system(k)) for k in (3, 4, 5)}
    par = forms.parallelepiped_system(2)
    par_value = forms.cs_complexity(par)
    oracle = bruteforce_cs_complexity(par.coeffs)
    ok = all(ap[k] == k - 2 for k in ap) and par_value == 1 == oracle
    return Criterion(4, "Cauchy-Schwarz complexity of APs and the 2-parallelepiped", ok,
                     {"ap": ap, "parallelepiped": par_value, "bruteForce": oracle})


# 5 -------------------------------------------------------------------------------------------

EXPECTED_4AP_BASIS = ((1, 1, 1, 1), (0, 1, 2, 3), (0, 0, 1, 3), (0, 0, 0, 1))


def leibman_dim_oracle(group, psi):
    """Rank of {v (x) X_j : v in Psi^[level j]} built from raw power vectors."""
    t = psi.t
    vecs = []
    for j in range(group.dim):
        level = group.levels[j]
        for n in itertools.product(range(-2, 3), repeat=psi.D):
            vals = forms.eval_forms(psi, n)
            for p in range(1, level + 1):
                v = np.zeros(t * group.dim)
                for i, x in enumerate(vals):
                    v[i * group.dim + j] = float(x) ** p
                vecs.append(v)
    return int(np.linalg.matrix_rank(np.array(vecs)))


def criterion_5(seed=5):
    psi = forms.ap_system(4)
    full = forms.power_flag(psi, 3)
    flag = forms.power_flag(psi, 2)
    H = nilgroup.heisenberg()
    dims_ok = tuple(full.dims) == (2, 3, 4)
    basis_ok = tuple(tuple(int(x) for x in v) for v in full.basis) == EXPECTED_4AP_BASIS
    ann = flag.annihilator(2)
    ann_ok = [tuple(int(x) for x in a) for a in ann] in ([(1, -3, 3, -1)], [(-1, 3, -3, 1)])
    rng = np.random.default_rng(seed)
    lg = orbits.leibman_group(H, psi)
    members = 0
    constraint = 0
    for _ in range(100):
        seq = nilgroup.random_poly_sequence(H, rng)
        n = tuple(int(x) for x in rng.integers(-20, 21, size=2))
        pt = orbits.leibman_orbit_point(seq, psi, n)
        members += lg.contains(pt)
        z = [zz[0] for zz in orbits.ap_vertical_defects(H, pt)]
        constraint += (z[0] - 3 * z[1] + 3 * z[2] - z[3]) == 0
    dim = forms.leibman_dim(flag, H.filtration_dims[1:])
    oracle = leibman_dim_oracle(H, psi)
    ok = dims_ok and basis_ok and ann_ok and members == 100 and constraint == 100 \
        and dim == 7 == oracle == lg.dim
    return Criterion(5, "Power flag, Hall-Petresco constraint and Leibman dimension", ok,
                     {"dims": list(full.dims), "basisMatches": basis_ok, "annihilator": ann_ok,
                      "membership": members, "constraint": constraint, "leibmanDim": dim,
                      "oracleDim": oracle})


# 6 -------------------------------------------------------------------------------------------

def criterion_6(seed=6):
    rng = np.random.default_rng(seed)
    H = nilgroup.heisenberg()
    passed = 0
    for _ in range(50):
        a = nilgroup.random_poly_sequence(H, rng)
        b = nilgroup.random_poly_sequence(H, rng)
        prod = nilgroup.poly_product(a, b)
        ok = True
        for depth in range(0, 4):
            hs = [int(h) for h in rng.integers(-5, 6, size=depth)]
            ok &= nilgroup.derivative_filtration_ok(prod, hs)
        # the product must agree pointwise with the group law
        for n in rng.integers(-10, 11, size=3):
            ok &= prod(int(n)) == a(int(n)) * b(int(n))
        passed += ok
    return Criterion(6, "Products of polynomial sequences stay polynomial", passed == 50,
                     {"passed": passed, "of": 50})


# 7 -------------------------------------------------------------------------------------------

def _frac(x):
    return Fraction(x).limit_denominator(10 ** 12)


def criterion_7(N=2000, samples=10 ** 6, seed=7):
    H = nilgroup.heisenberg()
    psi = forms.ap_system(3)
    irr = nilgroup.PolySequence.from_coords(
        H, [(0, 0, 0), (_frac(math.sqrt(2) - 1), _frac(math.sqrt(3) - 1), 0)])
    rows = orbits.counting_report(irr, psi, N, samples, seed)
    residual = max(r.residual for r in rows)
    rat = nilgroup.PolySequence.from_coords(H, [(0, 0, 0), (Fraction(1, 2), Fraction(1, 3), 0)])
    control = max(r.residual for r in orbits.counting_report(rat, psi, N, samples, seed))
    witness = orbits.equidist_witness(rat, N, 0.05)
    ok = residual <= 0.05 and control >= 0.2 and witness is not None and witness.cinf <= 1
    return Criterion(7, "Counting lemma desk check on the Heisenberg group", ok,
                     {"residual": residual, "controlResidual": control,
                      "witness": witness.to_json() if witness else None})


# 8 -------------------------------------------------------------------------------------------

def criterion_8(seed=8, tuples=200):
    rng = np.random.default_rng(seed)
    worst = -math.inf
    fails = 0
    combos = [(k, N) for k in (3, 4) for N in (32, 64)]
    for j in range(tuples):
        k, N = combos[j % len(combos)]
        fs = [SampledFunction.on_cyclic(_random_bounded(rng, N)) for _ in range(k)]
        r = patterns.gvn_check(fs, forms.ap_system(k), "cyclic")
        worst = max(worst, r["lhs"] - r["rhs"])
        fails += not r["pass"]
    return Criterion(8, "Generalized von Neumann with constant 1 on cyclic APs", fails == 0,
                     {"tuples": tuples, "failures": fails, "maxExcess": worst})


# 9 -------------------------------------------------------------------------------------------

def regularize_input(N=1000, seed=9, alpha=None):
    rng = np.random.default_rng(seed)
    alpha = alpha if alpha is not None else (math.sqrt(5) - 1) / 2
    n = np.arange(1, N + 1)
    vals = np.clip(0.5 + 0.5 * np.cos(2 * np.pi * alpha * n) + 0.05 * rng.uniform(-1, 1, N), 0, 1)
    return SampledFunction.on_interval(vals)


def criterion_9(N=1000, eps=0.1, seed=9):
    f = regularize_input(N, seed)
    res = decompose.regularize(f, 1, eps, "exp")
    grow = decompose.growth_function("exp")
    recombined = res.f_nil.values + res.f_sml.values + res.f_unf.values
    additive = float(np.max(np.abs(recombined - f.values)))
    ok = (additive <= 1e-12 and res.measured["l2Sml"] <= eps
          and res.measured["ukUnf"] <= 1 / grow(res.M)
          and res.certificates["nilInUnitInterval"]
          and res.certificates["nilPlusSmlInUnitInterval"]
          and res.rounds <= math.ceil(4 / eps ** 2))
    return Criterion(9, "Three-part regularization at s = 1", bool(ok),
                     {"additivity": additive, "M": res.M, "rounds": res.rounds,
                      "measured": res.measured, "certificates": res.certificates})


# 10 ------------------------------------------------------------------------------------------

def criterion_10():
    r3 = patterns.bhk_verify_synthetic(3, "bohr:alpha=0.618,delta=0.15", 0.05, 5000)
    ok3 = r3["weightedCount"] >= 0.3 ** 3 - 0.05 and r3["goodDifferenceFraction"] >= 0.01
    r4 = patterns.bhk_verify_synthetic(4, "heisenberg:level=0.5", 0.1, 3000)
    ok4 = r4["weightedCount"] >= r4["density"] ** 4 - 0.1 and r4["positivity"]["holds"] \
        and r4["positivity"]["maxRouteGap"] <= 1e-9
    return Criterion(10, "BHK weighted counts on synthetic sets", bool(ok3 and ok4),
                     {"k3": {key: r3[key] for key in ("density", "weightedCount",
                                                      "goodDifferenceFraction")},
                      "k4": {key: r4[key] for key in ("density", "weightedCount", "positivity")}})


# 11 ------------------------------------------------------------------------------------------

def criterion_11(seed=11):
    H = nilgroup.heisenberg()
    probe = nilgroup.normality_probe(H, r=0.01, delta=0.2, A=2.0, probes=10 ** 4, seed=seed)
    return Criterion(11, "Eccentric balls are approximately normal", probe["failures"] == 0,
                     probe)


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


def run(number):
    t0 = time.perf_counter()
    try:
        result = CRITERIA[number]()
    except Exception as exc:  # a crash is a failure, reported with its message
        result = Criterion(number, "raised", False, {"error": f"{type(exc).__name__}: {exc}"})
    result.seconds = time.perf_counter() - t0
    return result


def run_all(selected=None, echo=None):
    out = []
    for number in selected or sorted(CRITERIA):
        result = run(number)
        if echo:
            echo(result.line())
        out.append(result)
    return out
