"""Gowers uniformity norms on Z/NZ and on intervals [N].

The direct path evaluates the recursion

    ||f||_{U^k}^{2^k} = E_h ||Delta_h f||_{U^{k-1}}^{2^{k-1}},   ||f||_{U^1}^2 = |E f|^2,

which costs O(N^k).  For k = 2 the FFT identity sum_xi |f^(xi)|^4 is also
available (`u2_fft`, or `method="fft"` which uses it at the bottom of the
recursion).

Interval norms are quotients ||f~||_{U^k(Z_M)} / ||1_[N]||_{U^k(Z_M)} where
f~ is the zero extension to Z/M with M >= 2^k N (default M = 2^k N).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .funcspace import DomainError, DomainSpec, SampledFunction, embed_to_cyclic

CLAMP_TOL = 1e-9
MAX_DIRECT_K = 4
_ROW_CHUNK = 256


class GowersError(ValueError):
    pass


@dataclass(frozen=True)
class GowersResult:
    norm: float
    power: float
    k: int
    domain: DomainSpec
    clamped: bool = False
    ntilde: int = None

    def to_json(self):
        out = {"norm": self.norm, "power": self.power, "k": self.k, "clamped": self.clamped,
               "domain": self.domain.to_json()}
        if self.ntilde is not None:
            out["ntilde"] = self.ntilde
        return out


def mult_derivative(f, h):
    """x -> f(x+h) conj(f(x)) on a cyclic domain."""
    if not f.domain.is_cyclic:
        raise DomainError("multiplicative derivatives are taken on cyclic domains")
    v = f.values
    return SampledFunction(f.domain, np.roll(v, -h) * np.conj(v), f.bound ** 2)


def _u2_power_fft(v):
    fhat = np.fft.fft(v) / len(v)
    return float(np.sum(np.abs(fhat) ** 4))


def _u2_power_direct(v):
    # E_h |E_x v(x+h) conj v(x)|^2, rows of the h-indexed matrix in chunks
    N = len(v)
    cv = np.conj(v)
    idx = np.arange(N)
    total = 0.0
    for start in range(0, N, _ROW_CHUNK):
        hs = np.arange(start, min(N, start + _ROW_CHUNK))
        shifted = v[(idx[None, :] + hs[:, None]) % N]
        row_means = (shifted * cv[None, :]).mean(axis=1)
        total += float(np.sum(np.abs(row_means) ** 2))
    return total / N


def _power(v, k, method, deterministic, threads=1):
    if k == 1:
        return float(abs(np.mean(v)) ** 2)
    if k == 2:
        return _u2_power_fft(v) if method == "fft" else _u2_power_direct(v)
    N = len(v)
    cv = np.conj(v)

    def term(h):
        return _power(np.roll(v, -h) * cv, k - 1, method, deterministic)

    if threads > 1 and not deterministic:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            terms = list(pool.map(term, range(N)))
    else:
        terms = [term(h) for h in range(N)]
    if deterministic:
        return math.fsum(terms) / N
    return float(np.sum(terms)) / N


def _clamp(power):
    if power < 0:
        if power < -CLAMP_TOL:
            raise GowersError(f"negative Gowers power {power:.3e}: numerical bug")
        return 0.0, True
    return power, False


def _check_k(k, allow_large_k):
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise GowersError(f"k must be an integer >= 1, got {k!r}")
    if k > MAX_DIRECT_K and not allow_large_k:
        raise GowersError(f"k={k} > {MAX_DIRECT_K} costs O(N^k); pass allow_large_k=True")


def cyclic_power(v, k, method="direct", deterministic=False, threads=1):
    """Raw 2^k-th power of the U^k(Z_N) norm of a complex array."""
    return _power(np.asarray(v, dtype=np.complex128), k, method, deterministic, threads)


def gowers_norm(f, k, ntilde=None, deterministic=False, method="direct",
                allow_large_k=False, threads=1):
    """U^k norm of f (cyclic: raw average; interval: normalized quotient)."""
    _check_k(k, allow_large_k)
    if method not in ("direct", "fft"):
        raise GowersError(f"unknown method {method!r}")
    if f.N == 0:
        raise GowersError("empty domain")
    e = 2 ** k
    if f.domain.is_cyclic:
        power, clamped = _clamp(cyclic_power(f.values, k, method, deterministic, threads))
        return GowersResult(power ** (1.0 / e), power, k, f.domain, clamped)

    if ntilde is None:
        ntilde = e * f.N
    v = f.values
    if np.all(v == v[0]):
        # homogeneity: ||c 1_[N]|| / ||1_[N]|| = |c|, returned without rounding
        c = float(abs(v[0]))
        return GowersResult(c, c ** e, k, f.domain, False, ntilde)
    num = embed_to_cyclic(f, k, ntilde).values
    den = np.zeros(ntilde, dtype=np.complex128)
    den[1:f.N + 1] = 1.0
    p_num, clamped = _clamp(cyclic_power(num, k, method, deterministic, threads))
    p_den = cyclic_power(den, k, method, deterministic, threads)
    power = p_num / p_den
    return GowersResult(power ** (1.0 / e), power, k, f.domain, clamped, ntilde)


def u2_fft(f):
    """U^2 on Z_N via ||f||^4 = sum_xi |f^(xi)|^4, f^(xi) = E_x f(x) e(-x xi/N)."""
    if not f.domain.is_cyclic:
        raise DomainError("u2_fft expects a cyclic domain")
    power, clamped = _clamp(_u2_power_fft(f.values))
    return GowersResult(power ** 0.25, power, 2, f.domain, clamped)


def interval_norm(f, k, **kw):
    """Shorthand returning just the float norm; uses the FFT base case."""
    kw.setdefault("method", "fft")
    return gowers_norm(f, k, **kw).norm
