"""Integer linear forms systems and their power flags.

All linear algebra here is exact (integers and fractions.Fraction).
"""

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MAX_FORMS_FOR_COMPLEXITY = 12


class FormsError(ValueError):
    pass


# exact linear algebra helpers ---------------------------------------------------

def rational_rank(rows):
    """Rank over Q of a list of integer/Fraction vectors."""
    m = [[Fraction(x) for x in r] for r in rows]
    if not m:
        return 0
    rank, ncols = 0, len(m[0])
    for col in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        p = m[rank][col]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                c = m[r][col] / p
                m[r] = [a - c * b for a, b in zip(m[r], m[rank])]
        rank += 1
        if rank == len(m):
            break
    return rank


def in_span(vec, rows):
    if not rows:
        return all(x == 0 for x in vec)
    return rational_rank(list(rows) + [vec]) == rational_rank(rows)


def primitive(vec):
    """Divide an integer vector by the gcd of its entries."""
    g = 0
    for x in vec:
        g = math.gcd(g, int(x))
    return tuple(int(x) // g for x in vec) if g > 1 else tuple(int(x) for x in vec)


# linear forms systems -------------------------------------------------------------

@dataclass(frozen=True)
class LinearFormSystem:
    coeffs: tuple
    variables: tuple = None
    names: tuple = None

    def __post_init__(self):
        rows = tuple(tuple(int(c) for c in row) for row in self.coeffs)
        if not rows or not rows[0]:
            raise FormsError("need at least one form and one variable")
        D = len(rows[0])
        if any(len(r) != D for r in rows):
            raise FormsError("all forms need the same number of variables")
        if all(c == 0 for r in rows for c in r):
            raise FormsError("at least one form must be nonzero")
        object.__setattr__(self, "coeffs", rows)
        if self.variables is None:
            object.__setattr__(self, "variables", tuple(f"n{j + 1}" for j in range(D)))
        elif len(self.variables) != D:
            raise FormsError("variables length must equal D")
        else:
            object.__setattr__(self, "variables", tuple(self.variables))
        if self.names is not None:
            if len(self.names) != len(rows):
                raise FormsError("names length must equal t")
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def t(self):
        return len(self.coeffs)

    @property
    def D(self):
        return len(self.coeffs[0])

    def matrix(self):
        return np.array(self.coeffs, dtype=np.int64)

    def to_json(self):
        return {"D": self.D, "t": self.t, "coeffs": [list(r) for r in self.coeffs],
                "variables": list(self.variables),
                "names": list(self.names) if self.names else None}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(tuple(r) for r in obj["coeffs"]), obj.get("variables"), obj.get("names"))

    def describe(self):
        return "; ".join(_format_form(r, self.variables) for r in self.coeffs)


def _format_form(row, variables):
    parts = []
    for c, v in zip(row, variables):
        if c == 0:
            continue
        mag = "" if abs(c) == 1 else str(abs(c))
        sign = "-" if c < 0 else "+"
        parts.append((sign, f"{mag}{v}"))
    if not parts:
        return "0"
    text = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        text += f"{sign}{body}"
    return text


def ap_system(k):
    """psi_i(n, d) = n + i d for i = 0..k-1."""
    if k < 1:
        raise FormsError("k must be >= 1")
    return LinearFormSystem(tuple((1, i) for i in range(k)), ("n", "d"),
                            tuple(f"n+{i}d" for i in range(k)))


def parallelepiped_system(k):
    """psi_w(n0, n1..nk) = n0 + w.(n1..nk) for w in {0,1}^k (lexicographic)."""
    rows = tuple((1,) + w for w in itertools.product((0, 1), repeat=k))
    return LinearFormSystem(rows, tuple(f"n{j}" for j in range(k + 1)))


_TERM = re.compile(r"\s*([+-]?)\s*(\d*)\s*\*?\s*([A-Za-z_][A-Za-z_0-9]*)?\s*")


def parse_forms(text):
    """Parse the mini-language "n; n+d; n+2d" (variables in order of appearance)."""
    chunks = [c.strip() for c in text.split(";")]
    if not any(chunks):
        raise FormsError("no forms given")
    variables = []
    parsed = []
    for chunk in chunks:
        if not chunk:
            raise FormsError(f"empty form in {text!r}")
        pos, terms = 0, {}
        while pos < len(chunk):
            m = _TERM.match(chunk, pos)
            if not m or m.end() == pos or (not m.group(2) and not m.group(3)):
                raise FormsError(f"cannot parse form {chunk!r} at position {pos}")
            if pos > 0 and not m.group(1):
                raise FormsError(f"missing operator in {chunk!r} at position {pos}")
            sign = -1 if m.group(1) == "-" else 1
            mag = int(m.group(2)) if m.group(2) else 1
            var = m.group(3)
            if var is None:
                raise FormsError(f"constant terms are not allowed (homogeneous forms): {chunk!r}")
            if var not in variables:
                variables.append(var)
            terms[var] = terms.get(var, 0) + sign * mag
            pos = m.end()
        parsed.append(terms)
    rows = tuple(tuple(t.get(v, 0) for v in variables) for t in parsed)
    return LinearFormSystem(rows, tuple(variables), tuple(chunks))


def eval_forms(psi, n):
    if len(n) != psi.D:
        raise FormsError(f"expected a vector of length {psi.D}")
    return tuple(sum(int(c) * int(x) for c, x in zip(row, n)) for row in psi.coeffs)


def pairwise_independent(psi):
    rows = psi.coeffs
    if psi.t == 1:
        return any(rows[0])
    return all(rational_rank([rows[i], rows[j]]) == 2
               for i in range(psi.t) for j in range(i + 1, psi.t))


# Cauchy-Schwarz complexity ------------------------------------------------------------

def _min_classes(target, others):
    """Fewest classes covering `others` with target outside the span of each class."""
    if not others:
        return 0
    memo = {}

    def ok(members):
        key = frozenset(members)
        if key not in memo:
            memo[key] = not in_span(target, [others[m] for m in members])
        return memo[key]

    def place(idx, classes, limit):
        if idx == len(others):
            return True
        for c in classes:
            c.append(idx)
            if ok(c) and place(idx + 1, classes, limit):
                return True
            c.pop()
        if len(classes) < limit:
            classes.append([idx])
            if place(idx + 1, classes, limit):
                return True
            classes.pop()
        return False

    for limit in range(1, len(others) + 1):
        if place(0, [], limit):
            return limit
    raise FormsError("no admissible cover (forms not pairwise independent?)")


def cs_complexity(psi):
    """Smallest s with an (s+1)-class cover for every form (exact span tests)."""
    if psi.t > MAX_FORMS_FOR_COMPLEXITY:
        raise FormsError(f"t={psi.t} exceeds the supported maximum {MAX_FORMS_FOR_COMPLEXITY}")
    if not pairwise_independent(psi):
        raise FormsError("Cauchy-Schwarz complexity needs pairwise independent forms")
    worst = 0
    for i in range(psi.t):
        others = [psi.coeffs[j] for j in range(psi.t) if j != i]
        worst = max(worst, _min_classes(psi.coeffs[i], others))
    return max(0, worst - 1)


# power flag -----------------------------------------------------------------------

@dataclass(frozen=True)
class PowerFlag:
    s: int
    t: int
    dims: tuple
    basis: tuple
    degrees: tuple
    pivots: tuple

    def coordinates(self, vec):
        """Coefficients of vec in the flag basis, or None if vec is outside Psi^[s]."""
        w = [Fraction(x) for x in vec]
        coords = []
        for v, p in zip(self.basis, self.pivots):
            c = w[p] / v[p]
            coords.append(c)
            if c:
                w = [a - c * b for a, b in zip(w, v)]
        if any(w):
            return None
        return coords

    def contains(self, vec, level=None):
        level = self.s if level is None else level
        if level < 1:
            return not any(vec)
        coords = self.coordinates(vec)
        if coords is None:
            return False
        m = self.dims[min(level, self.s) - 1]
        return all(c == 0 for c in coords[m:])

    def level_basis(self, level):
        return self.basis[:self.dims[level - 1]] if level >= 1 else ()

    def annihilator(self, level):
        """Primitive integer basis of the orthogonal complement of Psi^[level]."""
        rows = [list(map(Fraction, v)) for v in self.level_basis(level)]
        return _null_space(rows, self.t)

    def to_json(self):
        return {"s": self.s, "t": self.t, "dims": list(self.dims),
                "basis": [list(v) for v in self.basis], "degrees": list(self.degrees),
                "pivots": list(self.pivots)}


def _null_space(rows, ncols):
    m = [r[:] for r in rows]
    pivcols, rank = [], 0
    for col in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        p = m[rank][col]
        m[rank] = [x / p for x in m[rank]]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                c = m[r][col]
                m[r] = [a - c * b for a, b in zip(m[r], m[rank])]
        pivcols.append(col)
        rank += 1
    out = []
    for free in (c for c in range(ncols) if c not in pivcols):
        vec = [Fraction(0)] * ncols
        vec[free] = Fraction(1)
        for r, pc in enumerate(pivcols):
            vec[pc] = -m[r][free]
        den = 1
        for x in vec:
            den = den * x.denominator // math.gcd(den, x.denominator)
        ints = primitive([x * den for x in vec])
        first = next(x for x in ints if x != 0)
        out.append(tuple(-x for x in ints) if first < 0 else ints)
    return out


def _reduce_against(w, basis, pivots):
    w = list(w)
    for v, p in zip(basis, pivots):
        if w[p]:
            a, b = v[p], w[p]
            w = [a * x - b * y for x, y in zip(w, v)]
    return w


def _powers(vec, j):
    return tuple(x ** j for x in vec)


def power_flag(psi, s, saturation_trials=20, seed=0):
    """The flag Psi^[1] <= ... <= Psi^[s] with an integral row-echelon basis.

    Each new spanning vector is reduced against the current basis so that it
    vanishes at every earlier pivot; the pivot of a new row is its first
    nonzero coordinate and rows are primitive with positive pivot.
    """
    if s < 1:
        raise FormsError("s must be >= 1")
    D, t = psi.D, psi.t
    units = [tuple(1 if a == b else 0 for b in range(D)) for a in range(D)]
    basis, pivots, degrees, dims = [], [], [], []

    def absorb(vec, level):
        if len(basis) == t:
            return
        w = _reduce_against(vec, basis, pivots)
        if any(w):
            w = list(primitive(w))
            p = next(i for i, x in enumerate(w) if x != 0)
            if w[p] < 0:
                w = [-x for x in w]
            basis.append(tuple(w))
            pivots.append(p)
            degrees.append(level)

    rng = np.random.default_rng(seed)
    for level in range(1, s + 1):
        for j in range(1, level + 1):
            for u in units:
                absorb(_powers(eval_forms(psi, u), j), level)
        for n in itertools.product(range(level + 1), repeat=D):
            for j in range(1, level + 1):
                absorb(_powers(eval_forms(psi, n), j), level)
        for _ in range(saturation_trials):
            n = tuple(int(x) for x in rng.integers(-50, 51, size=D))
            j = int(rng.integers(1, level + 1))
            w = _reduce_against(_powers(eval_forms(psi, n), j), basis, pivots)
            if any(w):
                raise FormsError(f"spanning grid not saturated at level {level}")
        dims.append(len(basis))
    return PowerFlag(s, t, tuple(dims), tuple(basis), tuple(degrees), tuple(pivots))


def depolarisation_check(psi, i, samples, flag=None):
    """True iff every pointwise product Psi(n_1)...Psi(n_j), j <= i, lies in Psi^[i]."""
    flag = flag or power_flag(psi, i)
    for sample in samples:
        if not 1 <= len(sample) <= i:
            raise FormsError("each sample must have between 1 and i vectors")
        prod = [1] * psi.t
        for n in sample:
            prod = [a * b for a, b in zip(prod, eval_forms(psi, n))]
        if not flag.contains(prod, i):
            return False
    return True


def _monomials(D, d):
    return [e for e in itertools.product(range(d + 1), repeat=D) if sum(e) == d]


def power_coefficients(row, d):
    """Coefficients of (sum a_k x_k)^d in the monomial basis of degree d."""
    out = []
    for e in _monomials(len(row), d):
        multinom = math.factorial(d)
        for k in e:
            multinom //= math.factorial(k)
        coef = multinom
        for a, k in zip(row, e):
            coef *= a ** k
        out.append(coef)
    return out


def top_power_independence(psi, s):
    if s < 0:
        raise FormsError("s must be >= 0")
    vecs = [power_coefficients(r, s + 1) for r in psi.coeffs]
    return rational_rank(vecs) == psi.t


def leibman_dim(flag, group_dims):
    """sum_i d_i (m_i - m_{i-1}) with m_0 = 0."""
    dims = list(flag.dims) if isinstance(flag, PowerFlag) else list(flag)
    if len(group_dims) != len(dims):
        raise FormsError(f"need {len(dims)} group dims, got {len(group_dims)}")
    total, prev = 0, 0
    for d, m in zip(group_dims, dims):
        total += int(d) * (m - prev)
        prev = m
    return total
