"""Energy-increment regularization on [N].

A factor is a partition of the domain into cells.  Refinements are driven by
a correlation oracle: given a function with large U^{s+1} norm it returns a
structured function psi correlating with it, and the factor is refined by
level sets of psi.  At s = 1 the oracle is exact Fourier analysis.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .funcspace import SampledFunction
from .gowers import gowers_norm


class DecomposeError(ValueError):
    pass


class OracleBreach(DecomposeError):
    """The oracle failed a contract its precondition guaranteed."""


class BudgetOverflow(DecomposeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


def uniformity(f, s):
    """||f||_{U^{s+1}} on the domain of f (FFT base case)."""
    return gowers_norm(f, s + 1, method="fft").norm


# factors -------------------------------------------------------------------------------

def _relabel(keys):
    _, labels = np.unique(keys, return_inverse=True)
    return labels.astype(np.int64)


@dataclass
class Factor:
    """Partition of the domain into labelled cells plus the structured data defining it."""
    labels: np.ndarray
    generators: list = field(default_factory=list)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size == 0 or not np.issubdtype(labels.dtype, np.integer):
            raise DecomposeError("factor labels must be a nonempty integer vector")
        if labels.min() < 0:
            raise DecomposeError("cell labels must be nonnegative")
        used = np.unique(labels)
        if used.size != labels.max() + 1:
            # empty cells are not allowed; compress the labels
            labels = _relabel(labels)
        self.labels = labels.astype(np.int64)

    @classmethod
    def trivial(cls, N):
        return cls(np.zeros(N, dtype=np.int64))

    @classmethod
    def singletons(cls, N):
        return cls(np.arange(N, dtype=np.int64))

    @property
    def N(self):
        return self.labels.size

    @property
    def complexity(self):
        return int(self.labels.max()) + 1

    def cells(self):
        return [np.flatnonzero(self.labels == c) for c in range(self.complexity)]

    def refine(self, labels, generator=None):
        other = np.asarray(labels, dtype=np.int64)
        if other.shape != self.labels.shape:
            raise DecomposeError("refining partition has the wrong length")
        keys = self.labels * (int(other.max()) + 1) + other
        gens = self.generators + ([generator] if generator is not None else [])
        return Factor(_relabel(keys), gens)

    def refines(self, other):
        """True if every cell of self lies inside a cell of other."""
        pairs = np.unique(np.stack([self.labels, other.labels]), axis=1)
        return np.unique(pairs[0]).size == pairs.shape[1]

    def to_json(self):
        return {"complexity": self.complexity,
                "generators": [{k: v for k, v in g.items() if k != "values"}
                               for g in self.generators]}


def _values(f):
    return f.values if isinstance(f, SampledFunction) else np.asarray(f, dtype=np.complex128)


def conditional_expectation(f, B):
    """E(f|B): cell means broadcast back to the domain."""
    v = _values(f)
    if v.shape != B.labels.shape:
        raise DecomposeError("function and factor live on different domains")
    counts = np.bincount(B.labels)
    means = (np.bincount(B.labels, v.real) + 1j * np.bincount(B.labels, v.imag)) / counts
    out = means[B.labels]
    if isinstance(f, SampledFunction):
        return SampledFunction(f.domain, out, f.bound)
    return out


def energy(f, B):
    """||E(f|B)||^2_{L^2}."""
    return float(np.mean(np.abs(_values(conditional_expectation(f, B))) ** 2))


# oracles ---------------------------------------------------------------------------------

@dataclass
class Structured:
    """Oracle output: values on the domain, correlation with the input and a tag."""
    values: np.ndarray
    correlation: complex
    claimed: float
    tag: dict

    def check(self):
        if abs(self.correlation) + 1e-12 < self.claimed:
            raise OracleBreach(f"oracle claimed |<f,psi>| >= {self.claimed:.3g}, "
                               f"got {abs(self.correlation):.3g}")
        if np.max(np.abs(self.values)) > 1 + 1e-12:
            raise OracleBreach("oracle output is not 1-bounded")
        return self


def _inner(v, w):
    return complex(np.mean(v * np.conj(w)))


def interval_u2_constant(N):
    """kappa(N) with max_xi |<f, e(xi n / M)>| >= kappa(N) ||f||_{U^2[N]}^2 on [N].

    Follows from sum |f^|^4 <= max |f^|^2 sum |f^|^2 and the count
    (2N^3 + N)/3 of additive quadruples in [N].
    """
    return math.sqrt((2 * N * N + 1) / (3 * N * N))


class FourierOracle:
    """Degree-1 oracle: the largest Fourier coefficient on Z_M, M = 4N for intervals."""
    degree = 1

    def __call__(self, f, delta):
        return fourier_oracle_s1(f, delta)


def fourier_oracle_s1(f, delta):
    """psi(n) = e(xi n / M) at the maximal |f^(xi)|, or None if ||f||_{U^2} < delta."""
    v = _values(f)
    N = v.size
    cyclic = isinstance(f, SampledFunction) and f.domain.is_cyclic
    if not np.any(v):
        return None
    sf = f if isinstance(f, SampledFunction) else SampledFunction.on_interval(v)
    if uniformity(sf, 1) < delta:
        return None
    M = N if cyclic else 4 * N
    n = np.arange(N) if cyclic else np.arange(1, N + 1)
    padded = np.zeros(M, dtype=np.complex128)
    padded[n % M] = v
    coeffs = np.fft.fft(padded) / N  # <f, e(xi n / M)>_{L^2[N]}
    xi = int(np.argmax(np.abs(coeffs)))
    psi = np.exp(2j * np.pi * xi * n / M)
    corr = _inner(v, psi)
    claim = delta ** 2 if cyclic else interval_u2_constant(N) * delta ** 2
    return Structured(psi, corr, claim, {"kind": "fourier", "xi": xi, "modulus": M}).check()


class QuadraticOracle:
    """Toy degree-2 oracle: exhaustive search over e((a n^2 + b n) / Q).

    Cost O(Q^2 N); restricted to Q <= 64 and N <= 512.  The claimed bound
    delta^4 is heuristic: no constructive inverse theorem backs it.
    """
    degree = 2

    def __init__(self, Q=64):
        if not 1 <= Q <= 64:
            raise DecomposeError("Q must lie in [1, 64]")
        self.Q = Q

    def __call__(self, f, delta):
        v = _values(f)
        N = v.size
        if N > 512:
            raise DecomposeError("quadratic oracle limited to N <= 512")
        if not np.any(v):
            return None
        n = np.arange(1, N + 1)
        Q = self.Q
        best = (0.0, 0, 0, 0j)
        for a in range(Q):
            base = v * np.exp(-2j * np.pi * a * (n * n % Q) / Q)
            padded = np.zeros(Q, dtype=np.complex128)
            np.add.at(padded, n % Q, base)
            coeffs = np.fft.fft(padded) / N  # b-th entry: mean of v e(-(a n^2 + b n)/Q)
            b = int(np.argmax(np.abs(coeffs)))
            if abs(coeffs[b]) > best[0]:
                best = (abs(coeffs[b]), a, b, coeffs[b])
        _, a, b, corr = best
        if abs(corr) < delta ** 4:
            return None
        psi = np.exp(2j * np.pi * ((a * n * n + b * n) % Q) / Q)
        return Structured(psi, _inner(v, psi), delta ** 4,
                          {"kind": "quadratic", "a": a, "b": b, "Q": Q}).check()


def default_oracle(s):
    if s == 1:
        return FourierOracle()
    if s == 2:
        return QuadraticOracle()
    raise DecomposeError(f"no correlation oracle shipped for s={s}")


# increments ----------------------------------------------------------------------------

MAX_LEVELS = 1 << 40


def level_labels(phi, levels, offset):
    return np.floor(np.clip(phi, 0.0, 1.0) * levels + offset).astype(np.int64)


@dataclass
class StepInfo:
    gain: float
    target: float
    certified: float
    levels: int
    offset: float
    tries: int
    correlation: float
    tag: dict

    def to_json(self):
        return {"gain": self.gain, "target": self.target, "certified": self.certified,
                "levels": self.levels, "offset": self.offset, "tries": self.tries,
                "correlation": self.correlation, "oracle": self.tag}


def energy_increment_step(f, B, s, delta, oracle=None, rng=None, retries=5):
    """Refine B by level sets of the oracle's answer on f - E(f|B).

    The gain must reach (|c|/4)^2 for c the oracle correlation; up to
    `retries` random level offsets are tried.  The best try is kept either
    way and the Cauchy-Schwarz lower bound on its gain is recorded.
    """
    oracle = oracle or default_oracle(s)
    rng = rng or np.random.default_rng(0)
    v = _values(f)
    resid = v - _values(conditional_expectation(v, B))
    domain_f = f if isinstance(f, SampledFunction) else SampledFunction.on_interval(v)
    psi = oracle(SampledFunction(domain_f.domain, resid, 2.0), delta)
    if psi is None:
        raise OracleBreach("oracle returned none although the uniformity precondition holds")
    c = psi.correlation
    rho = np.real(c * psi.values) / abs(c)
    phi = (1.0 + rho) / 2.0
    levels = int(min(math.ceil(1.0 / delta), MAX_LEVELS))
    target = (abs(c) / 4.0) ** 2
    e0 = energy(v, B)
    best = None
    for attempt in range(1, retries + 1):
        offset = float(rng.random())
        cand = B.refine(level_labels(phi, levels, offset))
        gain = energy(v, cand) - e0
        if best is None or gain > best[1]:
            best = (cand, gain, offset, attempt)
        if gain >= target:
            break
    cand, gain, offset, tries = best
    if gain <= 0:
        raise OracleBreach("level sets of the oracle output give no energy increment")
    phi_b = _values(conditional_expectation(phi, cand))
    centred = phi_b - _values(conditional_expectation(phi_b, B))
    denom = float(np.mean(np.abs(centred) ** 2))
    certified = float(abs(np.mean(resid * phi_b)) ** 2 / denom) if denom > 0 else 0.0
    gen = dict(psi.tag, levels=levels, offset=offset, values=psi.values)
    new = Factor(cand.labels, B.generators + [gen])
    return new, StepInfo(gain, target, certified, levels, offset, tries, abs(c),
                         dict(psi.tag))


def weak_regularize(f, s, eps, oracle=None, B0=None, seed=0, max_steps=1000):
    """Refine B0 until ||f - E(f|B)||_{U^{s+1}} <= eps; returns (factor, step infos)."""
    v = _values(f)
    sf = f if isinstance(f, SampledFunction) else SampledFunction.on_interval(v)
    B = B0 or Factor.trivial(v.size)
    rng = np.random.default_rng(seed)
    steps = []
    while True:
        resid = v - _values(conditional_expectation(v, B))
        if not np.any(np.abs(resid) > 1e-15):
            return B, steps
        if uniformity(SampledFunction(sf.domain, resid, 2.0), s) <= eps:
            return B, steps
        if len(steps) >= max_steps:
            raise BudgetOverflow(f"weak_regularize exceeded {max_steps} increment steps", B)
        B, info = energy_increment_step(sf, B, s, eps, oracle, rng)
        steps.append(info)


# growth functions --------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthFunction:
    name: str
    fn: object

    def __call__(self, M):
        out = self.fn(M)
        return max(out, M)


def _exp2(M):
    return math.inf if M > 1023 else 2.0 ** M


def _tower(M, cap=1e300):
    out = 1.0
    for _ in range(int(math.ceil(M))):
        out = _exp2(out)
        if out > cap:
            return math.inf
    return out


GROWTH = {
    "linear": GrowthFunction("linear", lambda M: 2.0 * M),
    "exp": GrowthFunction("exp", _exp2),
    "tower": GrowthFunction("tower", _tower),
}


def growth_function(name):
    try:
        return GROWTH[name]
    except KeyError:
        raise DecomposeError(f"unknown growth preset {name!r}; choose from {sorted(GROWTH)}")


# full decomposition --------------------------------------------------------------------------

@dataclass
class DecompositionResult:
    f_nil: SampledFunction
    f_sml: SampledFunction
    f_unf: SampledFunction
    M: float
    rounds: int
    energies: list
    factor: Factor
    next_factor: Factor
    measured: dict
    budgets: dict
    certificates: dict
    nil_kind: str
    complexity_tag: int
    oracle_log: list

    @property
    def ok(self):
        return all(self.certificates.values())

    def to_json(self):
        return {"M": self.M, "rounds": self.rounds, "energies": self.energies,
                "cells": self.factor.complexity, "nextCells": self.next_factor.complexity,
                "measured": self.measured, "budgets": self.budgets,
                "certificates": self.certificates, "nilKind": self.nil_kind,
                "complexityTag": self.complexity_tag, "oracle": self.oracle_log}


def _trig_projection(target, factor):
    """Least-squares fit of target in span{1, Re psi_k, Im psi_k}, clipped to [0, 1]."""
    cols = [np.ones(target.size)]
    for g in factor.generators:
        cols += [g["values"].real, g["values"].imag]
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, target.real, rcond=None)
    return np.clip(A @ coef, 0.0, 1.0)


def regularize(f, s, eps, growth="exp", oracle=None, cap=10 ** 4, m0=1, seed=0):
    """f = f_nil + f_sml + f_unf with M_{i+1} = Grow(M_i) and pigeonholed energies."""
    if not isinstance(f, SampledFunction):
        f = SampledFunction.on_interval(f)
    v = f.values
    if np.any(np.abs(v.imag) > 0) or v.real.min() < 0 or v.real.max() > 1:
        raise DecomposeError("regularize expects values in [0, 1]")
    grow = growth_function(growth) if isinstance(growth, str) else growth
    oracle = oracle or default_oracle(s)
    max_rounds = math.ceil(4.0 / eps ** 2)
    Ms = [float(m0)]
    B_prev, steps = weak_regularize(f, s, 1.0 / m0, oracle, None, seed)
    log = [st.tag for st in steps]
    energies = [energy(v, B_prev)]
    for i in range(max_rounds):
        M_next = grow(Ms[-1])
        if M_next > cap:
            raise BudgetOverflow(f"M = {M_next:.3g} exceeds the cap {cap}",
                                 {"energies": energies, "M": Ms, "factor": B_prev})
        Ms.append(M_next)
        B_next, steps = weak_regularize(f, s, 1.0 / M_next, oracle, B_prev, seed + i + 1)
        log += [st.tag for st in steps]
        energies.append(energy(v, B_next))
        if energies[-1] - energies[-2] <= eps ** 2 / 4:
            return _assemble(f, s, eps, Ms[-2], M_next, i + 1, energies, B_prev, B_next, log)
        B_prev = B_next
    raise BudgetOverflow(f"no pigeonhole index within {max_rounds} rounds",
                         {"energies": energies, "M": Ms})


def _assemble(f, s, eps, M, M_next, rounds, energies, B, B_next, log):
    v = f.values.real
    cond = _values(conditional_expectation(v, B)).real
    cond_next = _values(conditional_expectation(v, B_next)).real
    nil = _trig_projection(cond, B)
    kind = "trigonometric"
    if np.sqrt(np.mean((cond_next - nil) ** 2)) > eps:
        nil, kind = np.clip(cond, 0.0, 1.0), "cellwise"
    sml = cond_next - nil
    unf = v - nil - sml
    dom = f.domain
    f_nil = SampledFunction(dom, nil, 1.0)
    f_sml = SampledFunction(dom, sml, 1.0)
    f_unf = SampledFunction(dom, unf, 1.0)
    l2 = float(np.sqrt(np.mean(sml ** 2)))
    uk = uniformity(f_unf, s) if np.any(unf) else 0.0
    budget_unf = 1.0 / M_next
    tol = 1e-12
    certs = {
        "additive": bool(np.max(np.abs(nil + sml + unf - v)) <= 1e-12),
        "nilInUnitInterval": bool(nil.min() >= -tol and nil.max() <= 1 + tol),
        "nilPlusSmlInUnitInterval": bool((nil + sml).min() >= -tol and (nil + sml).max() <= 1 + tol),
        "smlBudget": l2 <= eps,
        "unfBudget": uk <= budget_unf,
    }
    levels = sum(g["levels"] for g in B.generators)
    return DecompositionResult(
        f_nil, f_sml, f_unf, M, rounds, energies, B, B_next,
        {"l2Sml": l2, "ukUnf": uk}, {"eps": eps, "unf": budget_unf}, certs, kind,
        max(1, levels), log)
