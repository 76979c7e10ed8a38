"""Pattern averages over linear form systems and the BHK pipeline on synthetic sets."""

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .forms import ap_system, cs_complexity, top_power_independence
from .funcspace import SampledFunction
from .gowers import gowers_norm
from .nilgroup import PolySequence, heisenberg
from .orbits import LipschitzFunction, hp4_direct_side, hp4_fourier_side, orbit_table

GVN_TOL = 1e-6


class PatternError(ValueError):
    pass


# multilinear averages -------------------------------------------------------------------

def _check_inputs(fs, psi):
    if len(fs) != psi.t:
        raise PatternError(f"{psi.t} forms need {psi.t} functions, got {len(fs)}")
    N = fs[0].N
    kind = fs[0].domain.kind
    if any(f.N != N or f.domain.kind != kind for f in fs):
        raise PatternError("all functions must share one domain")
    if psi.D > 3:
        raise PatternError("at most three variables are supported")
    return N


def default_ranges(psi, N):
    """[1, N] for the first variable and [-N, N] for the rest."""
    return [(1, N)] + [(-N, N)] * (psi.D - 1)


def multilinear_average(fs, psi, domain="cyclic", ranges=None):
    """E_n prod_i f_i(psi_i(n)) by exact enumeration.

    cyclic: n ranges over Z_N^D and arguments wrap mod N.
    interval: n ranges over the box `ranges` (default [1,N] x [-N,N]^(D-1))
    and each f_i is zero outside [N].
    """
    N = _check_inputs(fs, psi)
    coeffs = np.array(psi.coeffs, dtype=np.int64)
    if domain == "cyclic":
        ranges = [(0, N - 1)] * psi.D
        padded = [f.values for f in fs]
    elif domain == "interval":
        ranges = ranges or default_ranges(psi, N)
        # index m maps to slot m; slot 0 and anything outside [1, N] is zero
        padded = [np.concatenate([[0], f.values]) for f in fs]
    else:
        raise PatternError(f"unknown domain {domain!r}")
    inner = np.arange(ranges[0][0], ranges[0][1] + 1)
    outer = [range(lo, hi + 1) for lo, hi in ranges[1:]]
    total = 0j
    count = 0
    for rest in itertools.product(*outer):
        prod = np.ones(inner.size, dtype=np.complex128)
        for row, vals in zip(coeffs, padded):
            arg = row[0] * inner + int(np.dot(row[1:], rest)) if len(rest) else row[0] * inner
            if domain == "cyclic":
                prod *= vals[arg % N]
            else:
                ok = (arg >= 1) & (arg <= N)
                prod *= np.where(ok, vals[np.where(ok, arg, 0)], 0)
        total += prod.sum()
        count += inner.size
    return total / count


def lambda_k(fs, domain="cyclic"):
    """Lambda_k: E f_1(n) f_2(n+d) ... f_k(n+(k-1)d) (interval: n in [N], d in [-N, N])."""
    return multilinear_average(fs, ap_system(len(fs)), domain)


@dataclass
class PatternReport:
    system: object
    value: complex
    per_difference: dict = None
    bounds: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_json(self):
        out = {"system": self.system.to_json(), "value": [self.value.real, self.value.imag],
               "bounds": self.bounds, "metadata": self.metadata}
        if self.per_difference is not None:
            out["perDifference"] = {str(d): v for d, v in self.per_difference.items()}
        return out


def pattern_report(fs, psi, domain="cyclic"):
    value = multilinear_average(fs, psi, domain)
    s = cs_complexity(psi)
    norms = [gowers_norm(f, s + 1, method="fft").norm for f in fs]
    return PatternReport(psi, value, None, {"minGowers": min(norms), "k": s + 1},
                         {"domain": domain, "N": fs[0].N,
                          "supProduct": float(np.prod([np.max(np.abs(f.values)) for f in fs]))})


# AP profiles ------------------------------------------------------------------------------

@dataclass
class APProfile:
    """Exact counts #{n in [N]: n + i d in A for i < k} for d in [-N, N]."""
    N: int
    k: int
    counts: np.ndarray

    @property
    def differences(self):
        return np.arange(-self.N, self.N + 1)

    def __getitem__(self, d):
        return self.counts[d + self.N] / self.N

    def as_dict(self):
        return {int(d): c / self.N for d, c in zip(self.differences, self.counts)}

    def average(self):
        """E_{d in [-N, N]} profile(d), which equals Lambda_k(1_A, ..., 1_A)."""
        return float(self.counts.sum()) / (self.N * (2 * self.N + 1))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d", "count", "normalized"])
            for d, c in zip(self.differences, self.counts):
                w.writerow([int(d), int(c), repr(c / self.N)])


def _indicator(A):
    v = A.values
    if np.any(v.imag != 0) or not np.all((v.real == 0) | (v.real == 1)):
        raise PatternError("ap_profile needs a 0/1 indicator")
    if A.domain.is_cyclic:
        raise PatternError("ap_profile works on interval domains")
    return v.real.astype(bool)


def ap_profile(A, k):
    if not 1 <= k <= 5:
        raise PatternError("k must lie in 1..5")
    a = _indicator(A)
    N = a.size
    # pad so that n + i d stays addressable for every n in [N], |d| <= N
    pad = (k - 1) * N
    big = np.zeros(N + 2 * pad, dtype=bool)
    big[pad:pad + N] = a
    counts = np.zeros(2 * N + 1, dtype=np.int64)
    for j, d in enumerate(range(-N, N + 1)):
        hit = a.copy()
        for i in range(1, k):
            hit &= big[pad + i * d: pad + i * d + N]
        counts[j] = int(hit.sum())
    return APProfile(N, k, counts)


# von Neumann checks ------------------------------------------------------------------------

def _is_ap(psi):
    return psi.D == 2 and psi.coeffs == ap_system(psi.t).coeffs


def gvn_check(fs, psi, domain="cyclic"):
    """|Lambda_Psi| against min_i ||f_i||_{U^{s+1}}, s the Cauchy-Schwarz complexity.

    The constant-1 inequality is asserted only for k-APs on Z_N; elsewhere the
    ratio is recorded.
    """
    for f in fs:
        f.check_one_bounded()
    lhs = float(abs(multilinear_average(fs, psi, domain)))
    s = cs_complexity(psi)
    rhs = float(min(gowers_norm(f, s + 1, method="fft").norm for f in fs))
    asserted = domain == "cyclic" and _is_ap(psi)
    out = {"lhs": lhs, "rhs": rhs, "s": s, "ratio": lhs / rhs if rhs > 0 else math.inf,
           "asserted": asserted}
    out["pass"] = bool(lhs <= rhs + GVN_TOL) if asserted else None
    return out


def nil_weight(F, seq, N):
    """d -> F(g(d) Gamma) for d in [-N, N]."""
    return F(orbit_table(seq, -N, N))


def _weighted_average(fs, c, weight):
    N = fs[0].N
    padded = [np.concatenate([[0], f.values]) for f in fs]
    n = np.arange(1, N + 1)
    total = 0j
    for j, d in enumerate(range(-N, N + 1)):
        if weight[j] == 0:
            continue
        prod = np.full(N, weight[j], dtype=np.complex128)
        for ci, vals in zip(c, padded):
            arg = n + ci * d
            ok = (arg >= 1) & (arg <= N)
            prod *= np.where(ok, vals[np.where(ok, arg, 0)], 0)
        total += prod.sum()
    return total / (N * (2 * N + 1))


def twisted_gvn_check(fs, c, weight=None, theta=None):
    """|E_{n in [N], d in [-N, N]} w(d) prod_i f_i(n + c_i d)| against min ||f_i||_{U^{k-1}[N]}.

    weight is an array over d in [-N, N] (e.g. from `nil_weight`); with
    theta the weight is the character e(theta d) and the modulation identity
    behind the k = 3 argument is checked as well.
    """
    k = len(fs)
    if k not in (3, 4):
        raise PatternError("twisted check supports k in {3, 4}")
    if len(c) != k or len(set(c)) != k:
        raise PatternError("need k distinct integers c_i")
    N = fs[0].N
    d = np.arange(-N, N + 1)
    if theta is not None:
        weight = np.exp(2j * np.pi * theta * d)
    weight = np.ones(2 * N + 1) if weight is None else np.asarray(weight, dtype=np.complex128)
    if weight.shape != (2 * N + 1,):
        raise PatternError("weight must have one value per d in [-N, N]")
    lhs = float(abs(_weighted_average(fs, c, weight)))
    norms = [gowers_norm(f, k - 1, method="fft").norm for f in fs]
    rhs = float(min(norms))
    out = {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else math.inf}
    if theta is not None and k == 3:
        # e(theta d) = e(t (n + c_1 d)) e(-t (n + c_0 d)) with t = theta / (c_1 - c_0)
        t = theta / (c[1] - c[0])
        n = np.arange(1, N + 1)
        mod = list(fs)
        mod[0] = fs[0].replace(fs[0].values * np.exp(-2j * np.pi * t * n), 1.0)
        mod[1] = fs[1].replace(fs[1].values * np.exp(2j * np.pi * t * n), 1.0)
        plain = abs(_weighted_average(mod, c, np.ones(2 * N + 1)))
        mod_norms = [gowers_norm(f, 2, method="fft").norm for f in mod]
        out["modulation"] = {
            "lambdaMatch": bool(abs(plain - lhs) <= 1e-9),
            "normsMatch": bool(all(abs(a - b) <= 1e-9 for a, b in zip(norms, mod_norms))),
        }
    return out


# BHK weights ------------------------------------------------------------------------------

def torus_distance(x):
    """sup-norm distance to 0 on (R/Z)^m."""
    x = np.asarray(x, dtype=np.float64)
    return np.max(np.abs(x - np.round(x)), axis=-1)


def cutoff(dist, eps_prime):
    """1 up to eps'/2, linear down to 0 at eps'."""
    return np.clip(2.0 - 2.0 * dist / eps_prime, 0.0, 1.0)


def cutoff_integral(m, eps_prime):
    """Haar integral over (R/Z)^m of cutoff(sup-norm distance), eps' <= 1/2."""
    return 2 ** (m + 1) * eps_prime ** m * (1 - 2.0 ** -(m + 1)) / (m + 1)


@dataclass
class BHKWeight:
    kind: str
    N: int
    values: np.ndarray  # over d in [-N, N]
    normalizer: float
    mean: float
    sup: float
    support_density: float
    window: int

    def to_json(self):
        return {"kind": self.kind, "N": self.N, "normalizer": self.normalizer,
                "mean": self.mean, "sup": self.sup, "supportDensity": self.support_density,
                "window": self.window}


def bhk_weight(kind, N, eps_prime, theta=None, seq=None, q=1):
    """mu(d) = q 1_{q|d} c 1_{|d| <= eps' N} phi(theta d) with c = 1/(window share * int phi).

    kind k3_bohr takes the frequency vector theta; k4_nil takes a polynomial
    sequence and uses the horizontal part of its linear Taylor coefficient.
    The normalizer comes from the Haar integral of phi, so the measured mean
    E_{d in [-N, N]} mu(d) is an honest equidistribution check.
    """
    if not 0 < eps_prime <= 0.5:
        raise PatternError("eps' must lie in (0, 1/2]")
    if kind == "k3_bohr":
        if theta is None:
            raise PatternError("k3_bohr needs theta")
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    elif kind == "k4_nil":
        if seq is None:
            raise PatternError("k4_nil needs a polynomial sequence")
        g1 = seq.taylor[1] if len(seq.taylor) > 1 else seq.group.identity()
        theta = np.array([float(g1.coords[j]) for j in seq.group.block(1)])
    else:
        raise PatternError(f"unknown weight kind {kind!r}")
    d = np.arange(-N, N + 1)
    W = int(math.floor(eps_prime * N))
    in_window = np.abs(d) <= W
    phi = cutoff(torus_distance(np.outer(d, theta)), eps_prime)
    raw = np.where(in_window & (d % q == 0), phi, 0.0)
    if np.count_nonzero(raw) <= 1:
        raise PatternError("Bohr set is trivial at this eps'; N is too small")
    share = (2 * W + 1) / (2 * N + 1)
    c = 1.0 / (share * cutoff_integral(theta.size, eps_prime))
    mu = q * c * raw
    support = np.count_nonzero(raw) / max(1, np.count_nonzero(in_window & (d % q == 0)))
    return BHKWeight(kind, N, mu, c, float(mu.mean()), float(mu.max()), support, W)


# synthetic constructions --------------------------------------------------------------------

def parse_construction(text):
    """'bohr:alpha=0.618,delta=0.15' -> ('bohr', {'alpha': 0.618, 'delta': 0.15})."""
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise PatternError(f"malformed construction parameter {item!r}")
        params[key.strip()] = float(val)
    return kind.strip(), params


def heisenberg_level_function(a1, b1, c2):
    """The smooth F on the Heisenberg nilmanifold and the sequence g(n) = g1^n g2^C(n,2)."""
    from fractions import Fraction
    H = heisenberg()

    def frac(x):
        return Fraction(x).limit_denominator(10 ** 12)

    seq = PolySequence.from_coords(H, [(0, 0, 0), (frac(a1), frac(b1), 0), (0, 0, frac(c2))])

    def F(x):
        a, b, c = x[..., 0], x[..., 1], x[..., 2]
        return 0.5 + 0.25 * np.cos(2 * np.pi * b) + 0.25 * np.sin(np.pi * a) ** 2 * np.cos(2 * np.pi * c)
    return H, seq, LipschitzFunction(F, 2 * np.pi, 1, "heisenberg-level")


@dataclass
class Construction:
    kind: str
    indicator: SampledFunction
    theta: np.ndarray = None
    seq: object = None
    level_set: object = None  # LipschitzFunction-like indicator on G/Gamma
    params: dict = field(default_factory=dict)


def build_construction(spec, N, seed=0):
    kind, p = parse_construction(spec) if isinstance(spec, str) else spec
    rng = np.random.default_rng(seed)
    n = np.arange(1, N + 1)
    noise = p.get("noise", 0.0)
    if kind == "all":
        a = np.ones(N, dtype=bool)
        theta = np.zeros(1)
        return Construction(kind, SampledFunction.on_interval(a.astype(float)), theta, params=p)
    if kind == "bohr":
        alpha, delta = p.get("alpha", (math.sqrt(5) - 1) / 2), p.get("delta", 0.15)
        a = torus_distance((alpha * n)[:, None]) <= delta
        theta = np.array([alpha])
        seq = level = None
    elif kind == "heisenberg":
        a1 = p.get("a1", math.sqrt(2) - 1)
        b1 = p.get("b1", math.sqrt(3) - 1)
        c2 = p.get("c2", (math.sqrt(5) - 1) / 2)
        t = p.get("level", 0.5)
        H, seq, F = heisenberg_level_function(a1, b1, c2)
        a = F(orbit_table(seq, 1, N)).real >= t
        theta = np.array([a1, b1])
        level = LipschitzFunction(lambda x: (F(x).real >= t).astype(float), math.inf, 1,
                                  "level-set")
    else:
        raise PatternError(f"unsupported construction {kind!r} (bohr, heisenberg, all)")
    if noise:
        a = a ^ (rng.random(N) < noise)
    return Construction(kind, SampledFunction.on_interval(a.astype(float)), theta, seq, level, p)


def bhk_verify_synthetic(k, construction, eps, N, eps_prime=None, seed=0, grid=6,
                         resolution=32):
    """Weighted k-AP count against alpha^k - eps on a synthetic set, plus good differences."""
    if k >= 5:
        raise PatternError("k >= 5 is not supported: the weighted statement fails there "
                           "(Ruzsa's counterexample)")
    if k not in (3, 4):
        raise PatternError("k must be 3 or 4")
    con = construction if isinstance(construction, Construction) else \
        build_construction(construction, N, seed)
    A = con.indicator
    alpha = float(A.values.real.mean())
    eps_prime = eps_prime or eps
    if k == 3 or con.seq is None:
        weight = bhk_weight("k3_bohr", N, eps_prime, theta=con.theta)
    else:
        weight = bhk_weight("k4_nil", N, eps_prime, seq=con.seq)
    profile = ap_profile(A, k)
    weighted = float(np.sum(profile.counts * weight.values)) / (N * (2 * N + 1))
    bound = alpha ** k - eps
    good = profile.counts >= bound * N
    report = {
        "k": k, "N": N, "construction": con.kind, "density": alpha, "eps": eps,
        "epsPrime": eps_prime, "weightedCount": weighted, "threshold": bound,
        "pass": bool(weighted >= bound), "goodDifferenceFraction": float(good.mean()),
        "strictGoodDifferenceFraction": float((profile.counts >= alpha ** k * N).mean()),
        "weight": weight.to_json(),
    }
    if k == 4 and con.level_set is not None:
        report["positivity"] = positivity_on_grid(con.level_set, heisenberg(), grid, resolution)
    return report


def positivity_on_grid(F, group, grid=6, resolution=32):
    """At g0 = (a, b, 0) on a grid: direct HP4 fiber integral, its Fourier form and |F^(g0,0)|^4."""
    axis = (np.arange(grid) + 0.5) / grid
    pts = np.array([[a, b, 0.0] for a in axis for b in axis])
    direct = hp4_direct_side(F, group, pts, resolution).real
    fourier, zero = hp4_fourier_side(F, group, pts, None, resolution)
    return {
        "points": len(pts),
        "minMargin": float(np.min(direct - zero)),
        "maxRouteGap": float(np.max(np.abs(direct - fourier))),
        "holds": bool(np.all(direct >= zero - 1e-12)),
    }


# statement-level check ------------------------------------------------------------------------

def quadratic_family(N, steps=9, beta=math.sqrt(2)):
    """f_t = (1 - t) + t e(beta n^2), t from 0 to 1: U^2 norm decreases along the family."""
    n = np.arange(1, N + 1)
    phase = np.exp(2j * np.pi * ((beta * n * n) % 1.0))
    return [(float(t), SampledFunction.on_interval((1 - t) + t * phase, 1.0))
            for t in np.linspace(0.0, 1.0, steps)]


def gw_statement_check(psi, s, N=128, family=None):
    """Tabulate |Lambda_Psi(f,...,f)| (normalized by f = 1) against ||f||_{U^{s+1}[N]}."""
    from scipy.stats import spearmanr

    if not top_power_independence(psi, s):
        return {"skipped": True, "reason": f"top powers of degree {s + 1} are dependent"}
    family = family or quadratic_family(N)
    box = [(1, N)] * psi.D
    one = SampledFunction.on_interval(np.ones(N))
    base = float(abs(multilinear_average([one] * psi.t, psi, "interval", box)))
    rows = []
    for label, f in family:
        lam = float(abs(multilinear_average([f] * psi.t, psi, "interval", box)) / base)
        norm = gowers_norm(f, s + 1, method="fft").norm
        rows.append({"label": label, "lambda": lam, "norm": norm})
    lams = [r["lambda"] for r in rows]
    norms = [r["norm"] for r in rows]
    rho = float(spearmanr(norms, lams).statistic) if len(rows) > 2 else math.nan
    return {"skipped": False, "rows": rows, "spearman": rho,
            "maxRatio": max(lam / u for lam, u in zip(lams, norms) if u > 0)}
