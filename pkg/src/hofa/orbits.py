"""Orbit statistics on nilmanifolds G/Gamma.

Haar measure on G/Gamma is sampled by drawing second-kind coordinates
uniformly from [0,1)^dim: the coordinate map has unit Jacobian (the group law
is unipotent-triangular in these coordinates) and [0,1)^dim is a fundamental
domain for right multiplication by Gamma.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .forms import eval_forms, leibman_dim, power_flag
from .nilgroup import (
    abelianization_coords,
    character_polynomial,
    cinf_norm,
    taylor_eval_array,
)

MAX_D = 3
_CHUNK = 1 << 18


class OrbitError(ValueError):
    pass


def e(x):
    return np.exp(2j * np.pi * x)


@dataclass
class LipschitzFunction:
    """F on (G/Gamma)^arity, evaluated on reduced coordinates.

    The evaluator receives an array of shape (..., dim) when arity == 1 and
    (..., arity, dim) otherwise, and returns complex values of shape (...).
    """
    evaluator: object
    lipschitz: float = 1.0
    arity: int = 1
    name: str = "F"

    def __call__(self, x):
        return np.asarray(self.evaluator(np.asarray(x, dtype=np.float64)), dtype=np.complex128)


def constant_function(value=1.0, arity=1):
    return LipschitzFunction(lambda x: np.full(x.shape[:-1] if arity == 1 else x.shape[:-2],
                                               complex(value)), 0.0, arity, f"const({value})")


def lipschitz_spot_check(F, group, pairs=500, scale=1e-3, seed=0):
    """Largest |F(x) - F(y)| / d(x, y) over nearby pairs, with y re-reduced.

    Pairs straddling the edge of the fundamental domain test the
    periodization contract: a function that is not well defined on G/Gamma
    shows up as a huge ratio.
    """
    rng = np.random.default_rng(seed)
    shape = (pairs, group.dim) if F.arity == 1 else (pairs, F.arity, group.dim)
    x = rng.random(shape)
    # bias half the samples towards the boundary of [0,1)^dim
    x[: pairs // 2] = np.where(rng.random(x[: pairs // 2].shape) < 0.5,
                               rng.random(x[: pairs // 2].shape) * scale,
                               1 - rng.random(x[: pairs // 2].shape) * scale)
    step = group.from_log(rng.uniform(-scale, scale, size=shape))
    y, _ = group.reduce(group.mul(x, step))
    x, _ = group.reduce(x)
    d = group.quotient_distance(x, y)
    if F.arity > 1:
        d = np.max(d, axis=-1)
    diff = np.abs(F(x) - F(y))
    ratio = diff / np.maximum(d, 1e-300)
    return float(np.max(ratio))


# lattice cosets and convex bodies ---------------------------------------------------

def _int_det(m):
    n = len(m)
    if n == 1:
        return m[0][0]
    total = 0
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        total += (-1) ** j * m[0][j] * _int_det(minor)
    return total


def _adjugate(m):
    n = len(m)
    if n == 1:
        return [[1]]
    adj = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(m) if k != i]
            adj[j][i] = (-1) ** (i + j) * _int_det(minor)
    return adj


@dataclass(frozen=True)
class LatticeCoset:
    """n0 + Lambda with Lambda spanned by the integer rows of `basis`."""
    offset: tuple
    basis: tuple

    def __post_init__(self):
        b = tuple(tuple(int(x) for x in r) for r in self.basis)
        D = len(self.offset)
        if len(b) != D or any(len(r) != D for r in b):
            raise OrbitError("lattice basis must be D x D")
        if _int_det([list(r) for r in b]) == 0:
            raise OrbitError("lattice basis is singular")
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "offset", tuple(int(x) for x in self.offset))

    @classmethod
    def full(cls, D):
        return cls((0,) * D, tuple(tuple(int(i == j) for j in range(D)) for i in range(D)))

    @property
    def index(self):
        return abs(_int_det([list(r) for r in self.basis]))

    def contains(self, points):
        """Mask of points p with p - n0 in the row span (over Z) of the basis."""
        pts = np.asarray(points, dtype=np.int64) - np.array(self.offset, dtype=np.int64)
        det = _int_det([list(r) for r in self.basis])
        adj = np.array(_adjugate([list(r) for r in self.basis]), dtype=np.int64)
        # p = c B  =>  c = p adj(B) / det
        return np.all((pts @ adj) % det == 0, axis=-1)


@dataclass(frozen=True)
class ConvexBody:
    """Box lo <= x <= hi cut by half-planes a.x <= b (D <= 3)."""
    lo: tuple
    hi: tuple
    halfplanes: tuple = ()

    @classmethod
    def box(cls, lo, hi):
        return cls(tuple(lo), tuple(hi))

    @property
    def D(self):
        return len(self.lo)

    def volume(self):
        if not self.halfplanes:
            return float(np.prod([h - l for l, h in zip(self.lo, self.hi)]))
        from scipy.spatial import ConvexHull, HalfspaceIntersection
        from scipy.optimize import linprog

        D = self.D
        rows, rhs = [], []
        for j in range(D):
            unit = [0.0] * D
            unit[j] = 1.0
            rows.append(unit)
            rhs.append(self.hi[j])
            rows.append([-u for u in unit])
            rhs.append(-self.lo[j])
        for a, b in self.halfplanes:
            rows.append([float(x) for x in a])
            rhs.append(float(b))
        A, bvec = np.array(rows), np.array(rhs)
        if D == 1:
            lo = max([-bb / -aa[0] for aa, bb in zip(A, bvec) if aa[0] < 0], default=-np.inf)
            hi = min([bb / aa[0] for aa, bb in zip(A, bvec) if aa[0] > 0], default=np.inf)
            return max(0.0, hi - lo)
        # Chebyshev centre gives an interior point for the intersection
        norms = np.linalg.norm(A, axis=1)
        res = linprog(np.r_[np.zeros(D), -1.0], A_ub=np.c_[A, norms], b_ub=bvec,
                      bounds=[(None, None)] * D + [(0, None)])
        if not res.success or res.x[-1] <= 1e-12:
            return 0.0
        hs = HalfspaceIntersection(np.c_[A, -bvec], res.x[:D])
        return float(ConvexHull(hs.intersections).volume)

    def lattice_points(self):
        axes = [np.arange(math.ceil(l), math.floor(h) + 1) for l, h in zip(self.lo, self.hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.D)
        mask = np.ones(len(grid), dtype=bool)
        for a, b in self.halfplanes:
            mask &= grid @ np.asarray(a, dtype=np.float64) <= b + 1e-12
        return grid[mask].astype(np.int64)


def default_body(D, N):
    return ConvexBody.box((1,) * D, (N,) * D)


# orbit averages -----------------------------------------------------------------------

def orbit_table(seq, lo, hi):
    """Reduced orbit points g(m)Gamma for integers lo <= m <= hi (float)."""
    m = np.arange(lo, hi + 1)
    pts = taylor_eval_array(seq, m)
    rep, _ = seq.group.reduce(pts)
    return rep


def _orbit_points(seq, psi, N, coset, body):
    D = psi.D if psi is not None else 1
    if D > MAX_D:
        raise OrbitError(f"D={D} exceeds the supported maximum {MAX_D}")
    body = body or default_body(D, N)
    if body.D != D:
        raise OrbitError("body dimension does not match the forms")
    pts = body.lattice_points()
    if coset is not None:
        pts = pts[coset.contains(pts)]
    if len(pts) == 0:
        raise OrbitError("empty intersection of coset and body")
    args = pts @ np.array(psi.coeffs, dtype=np.int64).T if psi is not None else pts
    return pts, args, body


def orbit_sums(family, seq, N, psi=None, coset=None, body=None):
    """Sums of each F in the family over the orbit points, plus the point count."""
    pts, args, _ = _orbit_points(seq, psi, N, coset, body)
    lo, hi = int(args.min()), int(args.max())
    table = orbit_table(seq, lo, hi)
    totals = [0j] * len(family)
    for start in range(0, len(args), _CHUNK):
        a = args[start:start + _CHUNK] - lo
        x_single = table[a[:, 0]]
        x_multi = table[a] if psi is not None else None
        for k, F in enumerate(family):
            x = x_single if psi is None or F.arity == 1 else x_multi
            totals[k] += complex(np.sum(F(x)))
    return totals, len(args)


def orbit_sum(F, seq, N, psi=None, coset=None, body=None):
    """(sum of F over orbit points, number of points)."""
    totals, count = orbit_sums([F], seq, N, psi, coset, body)
    return totals[0], count


def orbit_average(F, seq, N, psi=None, coset=None, body=None):
    """Average of F(g^Psi(n) Gamma^t) over n in (n0 + Lambda) cut by the body.

    Without psi, F is averaged along n -> g(n) over the body (default [1, N]).
    """
    total, count = orbit_sum(F, seq, N, psi, coset, body)
    return total / count


# Haar sampling ---------------------------------------------------------------------------

def _mc_stats(values_iter, width=1):
    """(mean, stderr) per row, merging chunk moments (Chan et al.) to avoid cancellation."""
    n, mean, m2 = 0, np.zeros(width, complex), np.zeros(width)
    for v in values_iter:
        v = np.atleast_2d(v)
        k = v.shape[1]
        cmean = v.mean(axis=1)
        cm2 = (np.abs(v - cmean[:, None]) ** 2).sum(axis=1)
        delta = cmean - mean
        tot = n + k
        mean = mean + delta * (k / tot)
        m2 = m2 + cm2 + np.abs(delta) ** 2 * (n * k / tot)
        n = tot
    err = np.sqrt(m2 / n / n) if n > 1 else np.zeros(width)
    return [(complex(m), float(e)) for m, e in zip(mean, err)]


def haar_integral_mc(F, group, samples, seed=0):
    """Monte Carlo mean of F at uniform second-kind coordinates; returns (estimate, stderr)."""
    if samples < 1:
        raise OrbitError("samples must be >= 1")
    rng = np.random.default_rng(seed)

    def gen():
        left = samples
        while left:
            n = min(left, _CHUNK)
            shape = (n, group.dim) if F.arity == 1 else (n, F.arity, group.dim)
            yield F(rng.random(shape))
            left -= n
    return _mc_stats(gen())[0]


# Leibman groups -------------------------------------------------------------------------------

class LeibmanGroup:
    """G^Psi = { prod_j g_j^{v_j} : g_j in G_(deg v_j) } inside G^t."""

    def __init__(self, group, psi):
        self.group = group
        self.psi = psi
        self.flag = power_flag(psi, group.s)
        self.t = psi.t
        self.generators = tuple(zip(self.flag.basis, self.flag.degrees))
        self.slots = tuple((group.subgroup_start(deg), group.dim - group.subgroup_start(deg))
                           for _, deg in self.generators)
        self.dim = sum(size for _, size in self.slots)
        expect = leibman_dim(self.flag, group.filtration_dims[1:])
        if self.dim != expect:
            raise OrbitError(f"parameter count {self.dim} != leibman_dim {expect}")

    def element(self, params):
        """Tuple of t GroupElements for parameters g_1..g_m (exact)."""
        if len(params) != len(self.generators):
            raise OrbitError("one parameter per flag basis vector")
        out = [self.group.identity() for _ in range(self.t)]
        for g, (v, deg) in zip(params, self.generators):
            if not g.in_subgroup(deg):
                raise OrbitError(f"parameter for a degree-{deg} generator must lie in G_({deg})")
            out = [x * (g ** int(c)) if c else x for x, c in zip(out, v)]
        return tuple(out)

    def decompose(self, points):
        """Parameters g_j with prod_j g_j^{v_j} = points, or None if not in G^Psi."""
        if len(points) != self.t:
            raise OrbitError(f"expected a {self.t}-tuple")
        x = list(points)
        params = []
        for (v, deg), p in zip(self.generators, self.flag.pivots):
            g = x[p] ** Fraction(1, v[p])
            if not g.in_subgroup(deg):
                return None
            params.append(g)
            x = [(g ** int(c)).inverse() * xl if c else xl for xl, c in zip(x, v)]
        if not all(xl.is_identity() for xl in x):
            return None
        return params

    def contains(self, points):
        return self.decompose(points) is not None

    def sample_array(self, rng, samples):
        """Float array (samples, t, dim) of prod_j g_j^{v_j}, g_j uniform in their slot."""
        grp = self.group
        out = np.zeros((samples, self.t, grp.dim))
        for (v, _), (start, size) in zip(self.generators, self.slots):
            g = np.zeros((samples, grp.dim))
            g[:, start:] = rng.random((samples, size))
            for l, c in enumerate(v):
                if c:
                    out[:, l] = grp.mul(out[:, l], grp.pow(g, np.full(samples, float(c))))
        return out


def leibman_group(group, psi):
    return LeibmanGroup(group, psi)


def leibman_orbit_point(seq, psi, n):
    return tuple(seq(m) for m in eval_forms(psi, n))


def leibman_haar_sample(lg, base, samples, seed=0):
    """Reduced samples of base^Delta G^Psi Gamma^Psi, shape (samples, t, dim)."""
    rng = np.random.default_rng(seed)
    pts = lg.sample_array(rng, samples)
    b = np.broadcast_to(base.array().astype(np.float64), pts.shape)
    rep, _ = lg.group.reduce(lg.group.mul(b, pts))
    return rep


def leibman_haar_means(family, lg, base, samples, seed=0):
    """[(estimate, stderr)] per F of the Haar integral over base^Delta G^Psi Gamma^Psi."""
    if samples < 1:
        raise OrbitError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    grp = lg.group
    bvec = base.array().astype(np.float64)

    def gen():
        left = samples
        while left:
            n = min(left, _CHUNK)
            pts = lg.sample_array(rng, n)
            rep, _ = grp.reduce(grp.mul(np.broadcast_to(bvec, pts.shape), pts))
            yield np.stack([F(rep if F.arity > 1 else rep[:, 0]) for F in family])
            left -= n
    return _mc_stats(gen(), len(family))


def leibman_haar_mc(F, lg, base, samples, seed=0):
    return leibman_haar_means([F], lg, base, samples, seed)[0]


def ap_vertical_defects(group, points):
    """Vertical corrections z_j in x_j = x_0 (x_0^-1 x_1)^j z_j for an AP-shaped tuple.

    Returns the coordinates of z_j on the top block; for a Hall-Petresco point
    they are annihilated by the annihilator of the degree-2 power flag.
    """
    x0 = points[0]
    step = x0.inverse() * points[1]
    out = []
    for j, xj in enumerate(points):
        z = (x0 * step ** j).inverse() * xj
        if not z.in_subgroup(group.s):
            raise OrbitError("tuple is not AP-shaped modulo the top filtration block")
        out.append(tuple(z.coords[k] for k in group.vertical_block()))
    return out


# counting lemma -------------------------------------------------------------------------------

@dataclass
class CountingResult:
    name: str
    empirical: complex
    haar: complex
    stderr: float
    residual: float
    count: int
    volume: float
    index: int

    def to_json(self):
        return {"function": self.name, "empirical": [self.empirical.real, self.empirical.imag],
                "haar": [self.haar.real, self.haar.imag], "stderr": self.stderr,
                "residual": self.residual, "count": self.count, "volume": self.volume,
                "index": self.index}


def counting_report(seq, psi, N, samples=10 ** 6, seed=0, family=None, coset=None, body=None):
    """Compare sum_n F(g^Psi(n)) / (vol(P)/[Z^D:Lambda]) with the Leibman Haar integral.

    One orbit enumeration and one Haar sample stream are shared by the family.
    """
    if psi.D > MAX_D:
        raise OrbitError(f"D={psi.D} exceeds the supported maximum {MAX_D}")
    family = family or standard_test_family(seq.group, psi.t)
    body = body or default_body(psi.D, N)
    totals, count = orbit_sums(family, seq, N, psi, coset, body)
    index = coset.index if coset is not None else 1
    vol = body.volume()
    haar = leibman_haar_means(family, leibman_group(seq.group, psi), seq(0), samples, seed)
    rows = []
    for F, total, (h, err) in zip(family, totals, haar):
        emp = total / (vol / index)
        rows.append(CountingResult(F.name, emp, h, err, abs(emp - h), count, vol, index))
    return rows


def counting_residual(F, seq, psi, N, coset=None, body=None, samples=10 ** 6, seed=0):
    return counting_report(seq, psi, N, samples, seed, [F], coset, body)[0]


def standard_test_family(group, t=1):
    """Fixed Lipschitz test functions on (G/Gamma)^t.

    Low-frequency horizontal characters, a cosine product and, for
    nonabelian groups, a vertical character damped by sin^2 of the horizontal
    coordinates so that it is continuous on G/Gamma.  For t == 1 every member
    except the constant has Haar integral 0.
    """
    horiz = abelianization_coords(group)
    vert = [k for k in range(group.dim) if k not in horiz]
    fam = []

    def comp(x, i, j):
        return x[..., j] if t == 1 else x[..., i, j]

    for h in horiz:
        for freq in (1, 2, 3):
            fam.append(LipschitzFunction(lambda x, h=h, f=freq: e(f * comp(x, 0, h)),
                                         2 * np.pi * freq, t, f"e({freq}*x0[{h}])"))
    if t > 1:
        h = horiz[0]
        fam.append(LipschitzFunction(lambda x, h=h: e(comp(x, 0, h) - comp(x, 1, h)),
                                     4 * np.pi, t, f"e(x0[{h}]-x1[{h}])"))
        if t >= 3:
            fam.append(LipschitzFunction(
                lambda x, h=h: e(comp(x, 0, h) - 2 * comp(x, 1, h) + comp(x, 2, h)),
                8 * np.pi, t, f"e(x0-2x1+x2)[{h}]"))
    h = horiz[-1]
    fam.append(LipschitzFunction(
        lambda x, h=h: np.prod([np.cos(2 * np.pi * comp(x, i, h)) for i in range(t)], axis=0),
        2 * np.pi * t, t, f"prod cos(x[{h}])"))
    if vert:
        v = vert[0]
        weights = [1] if t == 1 else ([1, -2, 1] + [0] * (t - 3) if t >= 3 else [1, -1])

        def vertical(x, v=v, weights=weights):
            damp = np.ones(x.shape[:-1] if t == 1 else x.shape[:-2])
            phase = np.zeros_like(damp)
            for i in range(t):
                for hh in horiz:
                    damp = damp * np.sin(np.pi * comp(x, i, hh)) ** 2
                phase = phase + weights[i] * comp(x, i, v)
            return damp * e(phase)
        fam.append(LipschitzFunction(vertical, 10.0 * t, t, f"vertical[{v}]"))
    return fam


# equidistribution witnesses ---------------------------------------------------------------------

@dataclass
class Witness:
    m: tuple
    coords: tuple
    cinf: float
    discrepancy: float

    def to_json(self):
        return {"m": list(self.m), "coords": list(self.coords), "cinfNorm": self.cinf,
                "discrepancy": self.discrepancy}


def orbit_discrepancy(seq, N, family=None):
    """max over the test family of |E_{n in [N]} F(g(n)Gamma)| (all have integral 0)."""
    family = family or standard_test_family(seq.group, 1)
    table = orbit_table(seq, 1, N)
    return max(abs(complex(np.mean(F(table)))) for F in family)


def equidist_witness(seq, N, delta, max_complexity=10, family=None):
    """A horizontal character eta minimizing ||eta o g||_{C^inf[N]}, or None if equidistributed."""
    disc = orbit_discrepancy(seq, N, family)
    if disc <= delta:
        return None
    coords = abelianization_coords(seq.group)
    best = None
    for total in range(1, max_complexity + 1):
        for mags in itertools.product(range(total + 1), repeat=len(coords)):
            if sum(mags) != total:
                continue
            nz = [k for k, x in enumerate(mags) if x]
            for signs in itertools.product((1, -1), repeat=len(nz)):
                m = list(mags)
                for k, sg in zip(nz, signs):
                    m[k] *= sg
                poly = character_polynomial(seq, m, coords)
                val = cinf_norm(poly, N)
                if best is None or val < best.cinf - 1e-15:
                    best = Witness(tuple(m), coords, val, disc)
    return best


# vertical Fourier transform -------------------------------------------------------------------

class VerticalTransform:
    """x -> F^(x, xi) = int_{T} e(-xi.z) F(z x) dz over the vertical torus T."""

    def __init__(self, F, group, xi, resolution=64):
        if group.s != 2:
            raise OrbitError("vertical Fourier transform needs a degree-2 filtration")
        self.block = group.vertical_block()
        sources = {i for i, _, _, _ in group.constants} | {j for _, j, _, _ in group.constants}
        if not self.block or any(k in sources for k in self.block):
            raise OrbitError("vertical block must be a nonempty central torus")
        if resolution < 1 or resolution & (resolution - 1):
            raise OrbitError("resolution must be a power of two")
        self.F, self.group, self.resolution = F, group, resolution
        self.xi = (xi,) if np.isscalar(xi) else tuple(xi)
        if len(self.xi) != len(self.block):
            raise OrbitError("xi must have one entry per vertical coordinate")

    def _at(self, x, R):
        x = np.asarray(x, dtype=np.float64)
        k = len(self.block)
        grid = np.stack(np.meshgrid(*[np.arange(R) / R] * k, indexing="ij"), -1).reshape(-1, k)
        acc = np.zeros(x.shape[:-1], dtype=np.complex128)
        for z in grid:
            y = x.copy()
            for c, j in zip(z, self.block):
                y[..., j] = (y[..., j] + c) % 1.0
            acc += e(-np.dot(self.xi, z)) * self.F(y)
        return acc / len(grid)

    def __call__(self, x):
        return self._at(x, self.resolution)

    def error_estimate(self, x):
        """Richardson-style check against double resolution."""
        return np.abs(self._at(x, self.resolution) - self._at(x, 2 * self.resolution))


def vertical_fourier(F, group, xi, resolution=64):
    return VerticalTransform(F, group, xi, resolution)


def hp4_fourier_side(F, group, x, max_xi=None, resolution=64):
    """sum_xi |F^(x, xi)|^2 |F^(x, 3 xi)|^2 and the xi = 0 term |F^(x, 0)|^4.

    By default xi runs over a full residue system mod `resolution`, which
    makes the sum agree exactly with `hp4_direct_side` at that resolution.
    """
    R = resolution
    xis = range(-(R // 2), R - R // 2) if max_xi is None else range(-max_xi, max_xi + 1)
    total = 0.0
    zero = None
    for xi in xis:
        a = vertical_fourier(F, group, xi, R)(x)
        b = vertical_fourier(F, group, 3 * xi, R)(x)
        total = total + np.abs(a) ** 2 * np.abs(b) ** 2
        if xi == 0:
            zero = np.abs(a) ** 4
    return total, zero


def hp4_direct_side(F, group, x, resolution=32):
    """int F(z0 x) F(z1 x) F(z2 x) F(z3 x) over z0 - 3 z1 + 3 z2 - z3 = 0 (1-dim vertical)."""
    block = group.vertical_block()
    if len(block) != 1:
        raise OrbitError("direct side implemented for a one-dimensional vertical torus")
    v = block[0]
    x = np.asarray(x, dtype=np.float64)
    R = resolution
    z = np.arange(R) / R
    vals = []
    for zz in z:
        y = x.copy()
        y[..., v] = (y[..., v] + zz) % 1.0
        vals.append(F(y))
    vals = np.array(vals)  # (R, ...)
    acc = np.zeros(x.shape[:-1], dtype=np.complex128)
    # z3 = z0 - 3 z1 + 3 z2 on the same grid (exact mod 1)
    idx = np.arange(R)
    for i1, i2 in itertools.product(range(R), repeat=2):
        i3 = (idx - 3 * i1 + 3 * i2) % R
        acc += np.sum(vals[idx] * vals[i3], axis=0) * vals[i1] * vals[i2]
    return acc / R ** 3
