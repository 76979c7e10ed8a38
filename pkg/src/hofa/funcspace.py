"""Sampled complex functions on an interval [N] or a cyclic group Z/NZ.

Interval domains are 1-based ({1, ..., N}); cyclic domains are 0-based.
Values are stored as read-only complex128 arrays.
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

BOUND_SLACK = 1e-12


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    N: int

    def __post_init__(self):
        if self.kind not in ("interval", "cyclic"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def interval(cls, N):
        return cls("interval", N)

    @classmethod
    def cyclic(cls, N):
        return cls("cyclic", N)

    @property
    def is_cyclic(self):
        return self.kind == "cyclic"

    def indices(self):
        """Integer labels of the domain points, in storage order."""
        if self.is_cyclic:
            return np.arange(self.N, dtype=np.int64)
        return np.arange(1, self.N + 1, dtype=np.int64)

    def to_json(self):
        return {"kind": self.kind, "N": self.N}


class SampledFunction:
    """A function on a DomainSpec with a declared sup-norm bound."""

    __slots__ = ("domain", "values", "bound")

    def __init__(self, domain, values, bound=1.0):
        arr = np.array(values, dtype=np.complex128).reshape(-1)
        if arr.shape[0] != domain.N:
            raise DomainError(f"expected {domain.N} values, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("values must be finite")
        bound = float(bound)
        if bound < 0:
            raise DomainError("bound must be nonnegative")
        peak = float(np.max(np.abs(arr))) if arr.size else 0.0
        if peak > bound + BOUND_SLACK:
            raise DomainError(f"sup |f| = {peak:.6g} exceeds declared bound {bound}")
        arr.setflags(write=False)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "bound", bound)

    def __setattr__(self, name, value):
        raise AttributeError("SampledFunction is immutable")

    @classmethod
    def on_interval(cls, values, bound=None):
        values = np.asarray(values, dtype=np.complex128)
        return cls(DomainSpec.interval(len(values)), values, _auto_bound(values, bound))

    @classmethod
    def on_cyclic(cls, values, bound=None):
        values = np.asarray(values, dtype=np.complex128)
        return cls(DomainSpec.cyclic(len(values)), values, _auto_bound(values, bound))

    @property
    def N(self):
        return self.domain.N

    def __len__(self):
        return self.domain.N

    def __repr__(self):
        return f"SampledFunction({self.domain.kind}, N={self.N}, bound={self.bound})"

    def replace(self, values, bound=None):
        """Same domain, new values (bound recomputed unless given)."""
        values = np.asarray(values, dtype=np.complex128)
        return SampledFunction(self.domain, values, _auto_bound(values, bound))

    def at(self, n):
        """Value at the integer label n (1-based on intervals, wrapping on cyclic)."""
        if self.domain.is_cyclic:
            return self.values[n % self.N]
        if not 1 <= n <= self.N:
            raise IndexError(n)
        return self.values[n - 1]

    def is_real(self, tol=1e-12):
        return bool(np.all(np.abs(self.values.imag) <= tol))

    def check_one_bounded(self):
        if self.bound > 1 + BOUND_SLACK:
            raise DomainError(f"operation needs a 1-bounded function, bound is {self.bound}")


def _auto_bound(values, bound):
    if bound is not None:
        return bound
    peak = float(np.max(np.abs(values))) if len(values) else 0.0
    return 1.0 if peak <= 1.0 + BOUND_SLACK else peak


def embed_to_cyclic(f, k=1, ntilde=None):
    """Zero-extend f on [N] to Z/ntilde, with f~(x) = f(x) for x = 1..N."""
    if f.domain.is_cyclic:
        raise DomainError("embed_to_cyclic expects an interval function")
    N = f.N
    need = (2 ** k) * N
    if ntilde is None:
        ntilde = need
    if ntilde < need:
        raise DomainError(f"ntilde={ntilde} is below 2^k*N = {need}")
    out = np.zeros(ntilde, dtype=np.complex128)
    out[1:N + 1] = f.values
    return SampledFunction(DomainSpec.cyclic(ntilde), out, f.bound)


def _same_domain(f, g):
    if f.domain != g.domain:
        raise DomainError(f"domain mismatch: {f.domain} vs {g.domain}")


def l2_norm(f):
    return math.sqrt(float(np.mean(np.abs(f.values) ** 2)))


def inner_product(f, g):
    """E_n f(n) conj(g(n))."""
    _same_domain(f, g)
    return complex(np.mean(f.values * np.conj(g.values)))


# file I/O -----------------------------------------------------------------

class FunctionFileError(ValueError):
    """Malformed function file (content problem, not an OS error)."""


def function_to_json(f):
    return {
        "domain": f.domain.to_json(),
        "bound": f.bound,
        "values": [[float(z.real), float(z.imag)] for z in f.values],
    }


def function_from_json(obj):
    try:
        dom = obj["domain"]
        domain = DomainSpec(dom["kind"], int(dom["N"]))
        raw = obj["values"]
        vals = np.array([complex(float(v[0]), float(v[1])) if isinstance(v, (list, tuple))
                         else complex(float(v), 0.0) for v in raw])
    except (KeyError, TypeError, IndexError) as exc:
        raise FunctionFileError(f"malformed function JSON: {exc}") from exc
    bound = obj.get("bound")
    return SampledFunction(domain, vals, _auto_bound(vals, bound))


def save_function(f, path):
    path = str(path)
    if path.endswith(".csv"):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "re", "im"])
            for n, z in zip(f.domain.indices(), f.values):
                w.writerow([int(n), repr(float(z.real)), repr(float(z.imag))])
    else:
        with open(path, "w") as fh:
            json.dump(function_to_json(f), fh)


def load_function(path, kind=None):
    """Read a JSON or CSV function file.

    CSV files carry no domain header, so the kind is taken from `kind` or
    inferred from the first index (0 means cyclic, 1 means interval).
    """
    path = str(path)
    if path.endswith(".csv"):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if rows and rows[0] and rows[0][0].strip().lower() == "index":
            rows = rows[1:]
        try:
            idx = [int(r[0]) for r in rows]
            vals = np.array([complex(float(r[1]), float(r[2]) if len(r) > 2 else 0.0) for r in rows])
        except (ValueError, IndexError) as exc:
            raise FunctionFileError(f"malformed CSV row: {exc}") from exc
        if not idx:
            raise FunctionFileError("empty CSV")
        if kind is None:
            kind = "cyclic" if idx[0] == 0 else "interval"
        domain = DomainSpec(kind, len(idx))
        if idx != list(domain.indices()):
            raise FunctionFileError("CSV indices must be consecutive from the domain origin")
        return SampledFunction(domain, vals, _auto_bound(vals, None))
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FunctionFileError(f"invalid JSON: {exc}") from exc
    f = function_from_json(obj)
    if kind is not None and kind != f.domain.kind:
        f = SampledFunction(DomainSpec(kind, f.N), f.values, f.bound)
    return f


from .exprlang import (  # noqa: E402  (re-export; exprlang imports the types above)
    ExprError,
    eval_expr,
    parse_expr,
    print_expr,
)

__all__ = [
    "DomainSpec", "SampledFunction", "DomainError", "FunctionFileError",
    "embed_to_cyclic", "l2_norm", "inner_product",
    "load_function", "save_function", "function_to_json", "function_from_json",
    "parse_expr", "eval_expr", "print_expr", "ExprError",
]
