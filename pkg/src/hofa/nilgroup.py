"""Filtered nilpotent groups of nilpotency class <= 2 in Mal'cev coordinates.

Points are stored in coordinates of the second kind,
g = exp(t_1 X_1) ... exp(t_d X_d), so that the lattice Gamma is exactly the
set of integer coordinate vectors.  The basis is adapted to the filtration:
G_(i) is spanned by the last dim(G_(i)) basis vectors.

Because all brackets are central, the Baker-Campbell-Hausdorff series stops
after the bracket term:

    log(gh) = log g + log h + [log g, log h] / 2,

and the conversion between first-kind (log) and second-kind coordinates is

    log(g)_k = t_k + (1/2) sum_{i<j} c_ij^k t_i t_j.

Every operation works on numpy arrays of shape (..., dim).  Object arrays of
Fractions give exact arithmetic; float arrays are used for orbit statistics.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class NilgroupError(ValueError):
    pass


def _to_number(x):
    if isinstance(x, (Fraction, int, np.integer)):
        return Fraction(int(x)) if not isinstance(x, Fraction) else x
    if isinstance(x, str):
        return Fraction(x)
    return float(x)


def as_coords(values):
    """Array from a coordinate list: exact (object/Fraction) unless a float is present."""
    vals = [_to_number(v) for v in values]
    if any(isinstance(v, float) for v in vals):
        return np.array([float(v) for v in vals], dtype=np.float64)
    return np.array(vals, dtype=object)


def _is_exact(arr):
    return isinstance(arr, np.ndarray) and arr.dtype == object


_vfloor = np.vectorize(math.floor, otypes=[object])


def _floor(arr):
    return _vfloor(arr) if _is_exact(arr) else np.floor(arr)


def frac_part(x):
    """Fractional part for scalars of either kind."""
    return x - math.floor(x)


def dist_to_int(x):
    f = frac_part(x)
    return min(f, 1 - f)


# groups ----------------------------------------------------------------------

class FilteredGroup:
    """A simply connected nilpotent Lie group (class <= 2) with a filtration.

    filtration_dims = (dim G_(0), dim G_(1), ..., dim G_(s)) with
    G_(0) = G_(1) = G; constants are (i, j, k, c) meaning c_ij^k in
    [X_i, X_j] = sum_k c_ij^k X_k (0-based indices).
    """

    def __init__(self, dim, filtration_dims, structure_constants=(), labels=None, name=None):
        dim = int(dim)
        dims = tuple(int(d) for d in filtration_dims)
        if dim < 1:
            raise NilgroupError("dim must be positive")
        if len(dims) < 2 or dims[0] != dim or dims[1] != dim:
            raise NilgroupError("filtration must start with G_(0) = G_(1) = G")
        if any(b > a for a, b in zip(dims, dims[1:])) or dims[-1] < 0:
            raise NilgroupError("filtration dims must be nonincreasing")
        self.dim = dim
        self.filtration_dims = dims
        self.s = len(dims) - 1
        self.labels = tuple(labels) if labels else tuple(f"X{j + 1}" for j in range(dim))
        if len(self.labels) != dim:
            raise NilgroupError("labels must match dim")
        self.name = name or "custom"
        self.levels = tuple(max(i for i in range(1, self.s + 1) if j >= dim - dims[i])
                            for j in range(dim))

        acc = {}
        for entry in structure_constants:
            i, j, k, c = entry
            i, j, k, c = int(i), int(j), int(k), Fraction(c)
            if not (0 <= i < dim and 0 <= j < dim and 0 <= k < dim):
                raise NilgroupError(f"structure constant index out of range: {entry}")
            if i == j:
                if c != 0:
                    raise NilgroupError("[X_i, X_i] must vanish (antisymmetry)")
                continue
            if i > j:
                i, j, c = j, i, -c
            acc[(i, j, k)] = acc.get((i, j, k), Fraction(0)) + c
        consts = tuple(sorted((i, j, k, c) for (i, j, k), c in acc.items() if c != 0))
        sources = {i for i, _, _, _ in consts} | {j for _, j, _, _ in consts}
        for i, j, k, c in consts:
            if k in sources:
                raise NilgroupError("bracket images must be central (nilpotency class <= 2)")
            need = self.levels[i] + self.levels[j]
            if need > self.s:
                raise NilgroupError(f"[X{i + 1}, X{j + 1}] must vanish: it lies in G_({need}) = id")
            if self.levels[k] < need:
                raise NilgroupError(f"[X{i + 1}, X{j + 1}] leaves G_({need}) (filtration violated)")
        self.constants = consts
        self._fconsts = tuple((i, j, k, float(c)) for i, j, k, c in consts)

    # structure
    @property
    def step(self):
        return self.s

    @property
    def is_abelian(self):
        return not self.constants

    def __repr__(self):
        return f"FilteredGroup({self.name}, dim={self.dim}, dims={self.filtration_dims})"

    def __eq__(self, other):
        return (isinstance(other, FilteredGroup) and self.dim == other.dim
                and self.filtration_dims == other.filtration_dims
                and self.constants == other.constants)

    def __hash__(self):
        return hash((self.dim, self.filtration_dims, self.constants))

    def subgroup_start(self, i):
        """First coordinate index of the G_(i) block (dim if G_(i) is trivial)."""
        if i <= 1:
            return 0
        if i > self.s:
            return self.dim
        return self.dim - self.filtration_dims[i]

    def block(self, i):
        """Coordinate indices of G_(i) modulo G_(i+1)."""
        return tuple(j for j in range(self.dim) if self.levels[j] == i)

    def vertical_block(self):
        return self.block(self.s)

    def to_json(self):
        return {"dim": self.dim, "step": self.s, "filtrationDims": list(self.filtration_dims),
                "structureConstants": [[i, j, k, str(c)] for i, j, k, c in self.constants],
                "labels": list(self.labels)}

    # array-level group law
    def _consts_for(self, arr):
        return self.constants if _is_exact(arr) else self._fconsts

    def bracket(self, a, b):
        exact = _is_exact(a) or _is_exact(b)
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=object if exact else np.float64)
        for i, j, k, c in self._consts_for(out):
            out[..., k] = out[..., k] + c * (a[..., i] * b[..., j] - a[..., j] * b[..., i])
        return out

    def to_log(self, t):
        t = np.asarray(t)
        out = t.copy()
        for i, j, k, c in self._consts_for(t):
            out[..., k] = out[..., k] + (c / 2) * t[..., i] * t[..., j]
        return out

    def from_log(self, ell):
        ell = np.asarray(ell)
        out = ell.copy()
        for i, j, k, c in self._consts_for(ell):
            out[..., k] = out[..., k] - (c / 2) * ell[..., i] * ell[..., j]
        return out

    def mul(self, a, b):
        a, b = _promote(a, b)
        la, lb = self.to_log(a), self.to_log(b)
        return self.from_log(la + lb + self._half(self.bracket(la, lb)))

    def _half(self, arr):
        return arr * Fraction(1, 2) if _is_exact(arr) else arr * 0.5

    def inv(self, a):
        return self.from_log(-self.to_log(np.asarray(a)))

    def pow(self, a, x):
        """exp(x log a); x may be a scalar or an array broadcasting over leading axes."""
        a = np.asarray(a)
        if isinstance(x, np.ndarray):
            a, x = a.astype(np.float64), x.astype(np.float64)[..., None]
        elif _is_exact(a) and isinstance(x, (int, np.integer, Fraction)):
            x = Fraction(x) if not isinstance(x, Fraction) else x
        else:
            a, x = a.astype(np.float64), float(x)
        return self.from_log(x * self.to_log(a))

    def reduce(self, a):
        """Representative a*gamma with every coordinate in [0, 1), plus gamma."""
        a = np.asarray(a)
        rep = a.copy()
        passes = 1 if _is_exact(a) else 2
        for _ in range(passes):
            for j in range(self.dim):
                n = _floor(rep[..., j])
                step = np.zeros_like(rep)
                step[..., j] = -n
                rep = self.mul(rep, step)
        if not _is_exact(rep):
            rep = np.clip(rep, 0.0, np.nextafter(1.0, 0.0))
        gamma = self.mul(self.inv(a), rep)
        if _is_exact(gamma):
            gamma = gamma.astype(object)
        else:
            gamma = np.round(gamma)
        return rep, gamma

    def identity_array(self, exact=True):
        return np.array([Fraction(0)] * self.dim, dtype=object) if exact else np.zeros(self.dim)

    def distance(self, a, b):
        """max |log(a^-1 b)| coordinate."""
        d = self.to_log(self.mul(self.inv(np.asarray(a)), np.asarray(b)))
        return np.max(np.abs(d), axis=-1)

    def quotient_distance(self, a, b):
        """Distance between aGamma and bGamma over the 3^dim nearest translates."""
        ra, _ = self.reduce(np.asarray(a))
        rb, _ = self.reduce(np.asarray(b))
        best = None
        for shift in itertools.product((-1, 0, 1), repeat=self.dim):
            g = np.array(shift, dtype=rb.dtype if _is_exact(rb) else float)
            d = self.distance(ra, self.mul(rb, g))
            best = d if best is None else np.minimum(best, d)
        return best

    # element-level convenience
    def element(self, coords):
        return GroupElement(self, tuple(as_coords(coords)))

    def identity(self):
        return GroupElement(self, tuple(Fraction(0) for _ in range(self.dim)))

    def in_subgroup(self, coords, i):
        start = self.subgroup_start(i)
        return all(c == 0 for c in list(coords)[:start])


def _promote(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if _is_exact(a) != _is_exact(b):
        a = a.astype(np.float64)
        b = b.astype(np.float64)
    return a, b


def circle(degree=1):
    return FilteredGroup(1, (1,) * (degree + 1), (), ("x",), "circle")


def torus(m, degree=1):
    return FilteredGroup(m, (m,) * (degree + 1), (), tuple(f"x{j + 1}" for j in range(m)),
                         f"torus({m})")


def heisenberg():
    """Upper unitriangular 3x3 matrices, basis X1 = E12, X2 = E23, X3 = E13.

    Lower central series filtration (3, 3, 1).  Second-kind coordinates
    (t1, t2, t3) correspond to the matrix entries (a, b, c) = (t1, t2, t3 + t1 t2).
    """
    return FilteredGroup(3, (3, 3, 1), ((0, 1, 2, 1),), ("a", "b", "c"), "heisenberg")


def heisenberg_from_matrix(a, b, c):
    """Second-kind coordinates of the matrix [[1, a, c], [0, 1, b], [0, 0, 1]]."""
    a, b, c = _to_number(a), _to_number(b), _to_number(c)
    return heisenberg().element((a, b, c - a * b))


def heisenberg_to_matrix(g):
    t1, t2, t3 = g.coords
    return (t1, t2, t3 + t1 * t2)


def group_from_json(obj):
    try:
        g = FilteredGroup(obj["dim"], obj["filtrationDims"], obj.get("structureConstants", ()),
                          obj.get("labels"), obj.get("name"))
    except (KeyError, TypeError) as exc:
        raise NilgroupError(f"malformed group definition: {exc}") from exc
    if "step" in obj and int(obj["step"]) != g.s:
        raise NilgroupError("step must equal len(filtrationDims) - 1")
    return g


def builtin_group(spec):
    spec = spec.strip().lower()
    if spec == "circle":
        return circle()
    if spec == "heisenberg":
        return heisenberg()
    if spec.startswith("torus(") and spec.endswith(")"):
        return torus(int(spec[6:-1]))
    raise NilgroupError(f"unknown built-in group {spec!r}")


# elements ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GroupElement:
    group: FilteredGroup
    coords: tuple

    def __post_init__(self):
        if len(self.coords) != self.group.dim:
            raise NilgroupError("coordinate count does not match the group dimension")

    def array(self):
        return as_coords(self.coords)

    def _wrap(self, arr):
        return GroupElement(self.group, tuple(arr.tolist()))

    def _check(self, other):
        if self.group != other.group:
            raise NilgroupError("elements belong to different groups")

    def __mul__(self, other):
        self._check(other)
        return self._wrap(self.group.mul(self.array(), other.array()))

    def inverse(self):
        return self._wrap(self.group.inv(self.array()))

    def __pow__(self, x):
        return self._wrap(self.group.pow(self.array(), x))

    def __eq__(self, other):
        return isinstance(other, GroupElement) and self.group == other.group and \
            tuple(self.coords) == tuple(other.coords)

    def __hash__(self):
        return hash((self.group, tuple(self.coords)))

    def __repr__(self):
        return f"GroupElement({', '.join(str(c) for c in self.coords)})"

    def is_identity(self):
        return all(c == 0 for c in self.coords)

    def in_lattice(self):
        return all(float(c).is_integer() if isinstance(c, float) else Fraction(c).denominator == 1
                   for c in self.coords)

    def reduce(self):
        rep, gamma = self.group.reduce(self.array())
        return self._wrap(rep), self._wrap(gamma)

    def log(self):
        return tuple(self.group.to_log(self.array()).tolist())

    def in_subgroup(self, i):
        return self.group.in_subgroup(self.coords, i)


def group_mul(g, h):
    return g * h


def group_inv(g):
    return g.inverse()


def group_pow(g, x):
    return g ** x


def reduce_mod_lattice(g):
    return g.reduce()


def distance(g, h):
    return g.group.distance(g.array(), h.array())


# polynomial sequences ---------------------------------------------------------------

def binom(n, i):
    """Generalised binomial coefficient n(n-1)...(n-i+1)/i! for any integer n."""
    out = 1
    for j in range(i):
        out = out * (n - j)
    return out // math.factorial(i)


def binom_array(n, i):
    n = np.asarray(n, dtype=np.float64)
    out = np.ones_like(n)
    for j in range(i):
        out = out * (n - j)
    return out / math.factorial(i)


@dataclass(frozen=True, eq=False)
class PolySequence:
    """g(n) = g_0 g_1^C(n,1) ... g_s^C(n,s) with g_i in G_(i)."""
    group: FilteredGroup
    taylor: tuple

    def __post_init__(self):
        if not self.taylor:
            raise NilgroupError("need at least one Taylor coefficient")
        for i, g in enumerate(self.taylor):
            if g.group != self.group:
                raise NilgroupError("Taylor coefficient from a different group")
            if not g.in_subgroup(i):
                raise NilgroupError(f"Taylor coefficient {i} is not in G_({i})")

    @classmethod
    def from_coords(cls, group, coeffs):
        return cls(group, tuple(group.element(c) for c in coeffs))

    @property
    def degree(self):
        return len(self.taylor) - 1

    def __call__(self, n):
        return taylor_eval(self, n)

    def __eq__(self, other):
        return (isinstance(other, PolySequence) and self.group == other.group
                and _pad(self.taylor, self.group) == _pad(other.taylor, self.group))

    def __hash__(self):
        return hash(_pad(self.taylor, self.group))

    def to_json(self):
        return {"group": self.group.to_json(),
                "taylor": [[str(c) for c in g.coords] for g in self.taylor]}


def _pad(taylor, group):
    out = list(taylor)
    while len(out) > 1 and out[-1].is_identity():
        out.pop()
    return tuple(tuple(g.coords) for g in out)


def sequence_from_json(obj, group=None):
    if group is None:
        grp = obj.get("group")
        if grp is None:
            raise NilgroupError("sequence file needs a group (inline or supplied)")
        group = builtin_group(grp) if isinstance(grp, str) else group_from_json(grp)
    try:
        taylor = obj["taylor"]
    except KeyError as exc:
        raise NilgroupError("sequence file needs a 'taylor' list") from exc
    return PolySequence.from_coords(group, taylor)


def taylor_eval(seq, n):
    g = seq.taylor[0]
    for i, gi in enumerate(seq.taylor[1:], start=1):
        c = binom(int(n), i)
        if c:
            g = g * (gi ** c)
    return g


def taylor_eval_array(seq, n):
    """Float evaluation at an integer array n; returns shape n.shape + (dim,)."""
    grp = seq.group
    n = np.asarray(n)
    out = np.broadcast_to(seq.taylor[0].array().astype(np.float64), n.shape + (grp.dim,)).copy()
    for i, gi in enumerate(seq.taylor[1:], start=1):
        if gi.is_identity():
            continue
        out = grp.mul(out, grp.pow(gi.array().astype(np.float64), binom_array(n, i)))
    return out


def multi_binom(n, idx):
    out = 1
    for a, b in zip(n, idx):
        out *= binom(int(a), int(b))
    return out


def taylor_eval_multi(group, coeffs, n):
    """Multi-parameter Taylor product over Z^D, ordered by total degree then index.

    coeffs maps multi-indices to GroupElements with g_i in G_(|i|).
    """
    g = group.identity()
    for idx in sorted(coeffs, key=lambda m: (sum(m), tuple(m))):
        gi = coeffs[idx]
        if not gi.in_subgroup(sum(idx)):
            raise NilgroupError(f"coefficient {idx} is not in G_({sum(idx)})")
        c = multi_binom(n, idx)
        if c:
            g = g * (gi ** c)
    return g


def interpolate(group, func, degree=None, checks=(1, 2, -1, -2)):
    """Taylor coefficients of the polynomial sequence n -> func(n).

    Solves g_j = (g_0 g_1^C(j,1) ... g_{j-1}^C(j,j-1))^-1 func(j) for j = 0..degree
    and then verifies the result at extra points beyond the grid.
    """
    degree = group.s if degree is None else degree
    coeffs = []
    for j in range(degree + 1):
        prefix = group.identity()
        for i, gi in enumerate(coeffs):
            c = binom(j, i)
            if c:
                prefix = prefix * (gi ** c)
        gj = prefix.inverse() * func(j)
        if not gj.in_subgroup(j):
            raise NilgroupError(f"interpolation inconsistency: coefficient {j} not in G_({j})")
        coeffs.append(gj)
    seq = PolySequence(group, tuple(coeffs))
    exact = all(not isinstance(c, float) for g in coeffs for c in g.coords)
    for off in checks:
        n = degree + off if off > 0 else off
        got, want = taylor_eval(seq, n), func(n)
        if exact and got != want:
            raise NilgroupError(f"interpolation inconsistency at n={n} (degree above {degree}?)")
        if not exact and float(group.distance(got.array(), want.array())) > 1e-8:
            raise NilgroupError(f"interpolation inconsistency at n={n}")
    return seq


def poly_product(a, b):
    if a.group != b.group:
        raise NilgroupError("sequences on different groups")
    return interpolate(a.group, lambda n: a(n) * b(n))


def poly_inverse(a):
    return interpolate(a.group, lambda n: a(n).inverse())


def constant_sequence(g):
    return PolySequence(g.group, (g,))


def discrete_derivative(seq, h):
    """n -> g(n+h) g(n)^-1."""
    return interpolate(seq.group, lambda n: seq(n + h) * seq(n).inverse())


def scaled_sequence(seq, q, r):
    """n -> g(qn + r)."""
    if q < 1:
        raise NilgroupError("q must be >= 1")
    return interpolate(seq.group, lambda n: seq(q * n + r))


def iterated_derivative(seq, hs):
    for h in hs:
        seq = discrete_derivative(seq, h)
    return seq


def derivative_filtration_ok(seq, hs):
    """After i = len(hs) derivatives every Taylor coefficient j lies in G_(i+j)."""
    d = iterated_derivative(seq, hs)
    i = len(hs)
    return all(g.in_subgroup(i + j) for j, g in enumerate(d.taylor))


# classification --------------------------------------------------------------------

def is_rational_element(g, A):
    """Some 1 <= q <= A has g^q in Gamma."""
    for q in range(1, int(A) + 1):
        if (g ** q).in_lattice():
            return True
    return False


def orbit_period(seq, max_period=10000):
    """Least p with g(n+p)Gamma = g(n)Gamma for all n (checked at n = 0..s), or None."""
    s = seq.group.s
    base = [seq(n) for n in range(s + 1)]
    for p in range(1, max_period + 1):
        if all((base[n].inverse() * seq(n + p)).in_lattice() for n in range(s + 1)):
            return p
    return None


def classify_sequence(seq, A, N):
    grp = seq.group
    smooth = True
    cur = seq(1)
    for n in range(1, N + 1):
        nxt = seq(n + 1)
        if float(distance(grp.identity(), cur)) > A or \
                (n < N and float(distance(cur, nxt)) > A / N):
            smooth = False
            break
        cur = nxt
    rational = all(is_rational_element(g, A) for g in seq.taylor)
    period = orbit_period(seq) if rational else None
    return {"smooth": smooth, "rational": rational, "period": period}


# horizontal characters -------------------------------------------------------------

@dataclass(frozen=True)
class HorizontalCharacter:
    level: int
    m: tuple
    block: tuple

    @property
    def complexity(self):
        return sum(abs(x) for x in self.m)

    def __call__(self, g):
        coords = g.coords if isinstance(g, GroupElement) else g
        return sum(mj * coords[j] for mj, j in zip(self.m, self.block))


def _integer_vectors(d, max_l1):
    for total in range(1, max_l1 + 1):
        for mags in itertools.product(range(total + 1), repeat=d):
            if sum(mags) != total:
                continue
            nz = [k for k, x in enumerate(mags) if x]
            for signs in itertools.product((1, -1), repeat=len(nz)):
                v = list(mags)
                for k, sg in zip(nz, signs):
                    v[k] *= sg
                yield tuple(v)


def commutator_images(group, i):
    """Projections onto the level-i block of brackets [X_a, X_b] with a, b in some [G_(j), G_(i-j)]."""
    block = group.block(i)
    pos = {j: k for k, j in enumerate(block)}
    pairs = {}
    for a, b, k, c in group.constants:
        if group.levels[a] + group.levels[b] >= i and k in pos:
            vec = pairs.setdefault((a, b), [Fraction(0)] * len(block))
            vec[pos[k]] += c
    return [v for v in pairs.values() if any(v)]


def horizontal_characters(group, level, max_complexity):
    if not 1 <= level <= group.s:
        raise NilgroupError(f"level must be in [1, {group.s}]")
    block = group.block(level)
    if not block:
        return []
    images = commutator_images(group, level)
    out = []
    for m in _integer_vectors(len(block), int(max_complexity)):
        if all(sum(a * b for a, b in zip(m, w)) == 0 for w in images):
            out.append(HorizontalCharacter(level, m, block))
    return out


def irrationality_score(seq, N, max_a):
    """Largest A <= max_a with ||xi(g_i)|| >= A / N^i for all characters of complexity <= A."""
    if max_a < 1:
        raise NilgroupError("max_a must be >= 1")
    if max_a > N:
        raise NilgroupError("irrationality needs A <= N")
    grp = seq.group
    worst = {}  # complexity -> min over characters of N^i ||xi(g_i)||
    for i in range(1, grp.s + 1):
        gi = seq.taylor[i] if i < len(seq.taylor) else grp.identity()
        for chi in horizontal_characters(grp, i, max_a):
            val = float(dist_to_int(chi(gi))) * float(N) ** i
            c = chi.complexity
            worst[c] = min(worst.get(c, math.inf), val)
    best, running = 0, math.inf
    for A in range(1, max_a + 1):
        running = min(running, worst.get(A, math.inf))
        if running < A:
            break
        best = A
    return best


@dataclass(frozen=True)
class CoefficientFactor:
    beta: GroupElement
    gprime: GroupElement
    gamma: GroupElement
    t: tuple
    u: tuple
    v: tuple
    r: Fraction
    eps: object
    beta_scale: float = None


def factor_coefficient(group, level, g, character, N=None, qmax=1):
    """Split g_i = beta g' gamma along the character m (psi(g) = t + u + v).

    m.psi(g) = r + eps with r the nearest rational of denominator <= qmax;
    v = r m/|m|^2 is rational, t = eps m/|m|^2 is the small part, and u =
    psi(g) - t - v satisfies m.u = 0.
    """
    m = tuple(int(x) for x in character.m)
    if not any(m):
        raise NilgroupError("cannot factor along the trivial character")
    block = group.block(level)
    if tuple(character.block) != block:
        raise NilgroupError("character does not live on this level")
    x = [g.coords[j] for j in block]
    s = sum(a * b for a, b in zip(m, x))
    exact = not isinstance(s, float)
    s_q = Fraction(s)
    r = s_q.limit_denominator(int(qmax))
    r = Fraction(round(r * r.denominator), r.denominator)
    eps = (s_q - r) if exact else float(s) - float(r)
    norm2 = sum(a * a for a in m)
    v = tuple(r * a / norm2 for a in m)
    t = tuple(eps * a / norm2 for a in m)
    u = tuple(xj - tj - vj for xj, tj, vj in zip(x, t, v))

    def embed(vals):
        coords = [Fraction(0)] * group.dim
        for j, val in zip(block, vals):
            coords[j] = val
        return group.element(coords)

    beta, gamma = embed(t), embed(v)
    gprime = beta.inverse() * g * gamma.inverse()
    scale = float(N) ** level * max(abs(float(x)) for x in t) if N else None
    return CoefficientFactor(beta, gprime, gamma, t, u, v, r, eps, scale)


# C^infinity norm ----------------------------------------------------------------------

def stirling2(k, j):
    if k == j:
        return 1
    if j == 0 or j > k:
        return 0
    return j * stirling2(k - 1, j) + stirling2(k - 1, j - 1)


def monomial_to_binomial(coeffs):
    """Convert {k: a_k} (sum a_k n^k) to {j: b_j} (sum b_j C(n, j))."""
    out = {}
    for k, a in coeffs.items():
        for j in range(k + 1):
            s = stirling2(k, j)
            if s:
                out[j] = out.get(j, 0) + a * s * math.factorial(j)
    return {j: b for j, b in out.items() if b != 0}


def cinf_norm(poly, N):
    """sup over nonconstant i of N^|i| ||coef_i||_{R/Z}; keys are ints or multi-indices."""
    if N < 1:
        raise NilgroupError("N must be >= 1")
    best = 0.0
    for idx, c in poly.items():
        deg = idx if isinstance(idx, (int, np.integer)) else sum(idx)
        if deg < 1:
            continue
        best = max(best, float(N) ** deg * float(dist_to_int(c)))
    return best


def character_polynomial(seq, eta_m, coords_idx):
    """Binomial-basis coefficients of n -> eta(g(n)) for an additive character on coords_idx."""
    out = {}
    for i, g in enumerate(seq.taylor):
        out[i] = sum(m * g.coords[j] for m, j in zip(eta_m, coords_idx))
    return out


def abelianization_coords(group):
    """Coordinates not hit by any bracket: additive under the group law."""
    targets = {k for _, _, k, _ in group.constants}
    return tuple(j for j in range(group.dim) if j not in targets)


# eccentric balls (approximate normality) ----------------------------------------------

def eccentric_radii(group, r):
    """|log coordinate j| <= r^(s+1-level(j))."""
    return np.array([r ** (group.s + 1 - lv) for lv in group.levels], dtype=np.float64)


def in_eccentric_ball(group, g, r, tol=1e-12):
    ell = group.to_log(np.asarray(g, dtype=np.float64))
    rad = eccentric_radii(group, r)
    return np.all(np.abs(ell) <= rad * (1 + tol), axis=-1)


def sample_eccentric_ball(group, r, size, rng):
    rad = eccentric_radii(group, r)
    ell = rng.uniform(-1.0, 1.0, size=(size, group.dim)) * rad
    return group.from_log(ell)


def normality_probe(group, r, delta=0.2, A=2.0, probes=10000, seed=0):
    """Sample B_{(1-delta)r} <= g B_r g^-1 <= B_{(1+delta)r} with d(g, id) <= A."""
    rng = np.random.default_rng(seed)
    g = group.from_log(rng.uniform(-A, A, size=(probes, group.dim)))
    g_inv = group.inv(g)
    h = sample_eccentric_ball(group, r, probes, rng)
    upper = group.mul(group.mul(g, h), g_inv)
    upper_fail = int(np.sum(~in_eccentric_ball(group, upper, (1 + delta) * r)))
    h2 = sample_eccentric_ball(group, (1 - delta) * r, probes, rng)
    lower = group.mul(group.mul(g_inv, h2), g)
    lower_fail = int(np.sum(~in_eccentric_ball(group, lower, r)))
    return {"r": r, "delta": delta, "A": A, "probes": probes,
            "upper_failures": upper_fail, "lower_failures": lower_fail,
            "failures": upper_fail + lower_fail}


# random generators used by tests and demos -------------------------------------------

def random_rational_element(group, rng, denom=12, span=3, min_level=1):
    start = group.subgroup_start(min_level)
    coords = [Fraction(0)] * group.dim
    for j in range(start, group.dim):
        coords[j] = Fraction(int(rng.integers(-span * denom, span * denom + 1)), denom)
    return group.element(coords)


def random_poly_sequence(group, rng, denom=12, span=3):
    return PolySequence(group, tuple(random_rational_element(group, rng, denom, span, i)
                                     for i in range(group.s + 1)))
