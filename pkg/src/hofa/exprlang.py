"""A small expression language for synthesizing test functions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := rational
            | 'e' '(' poly ')'
            | 'indicator' '(' cond ')'
            | 'random' '(' ident ',' integer ')'
            | 'clamp01' '(' expr ')'
            | 're' '(' expr ')'
            | '(' expr ')'
    poly   := ['-'] mono (('+' | '-') mono)*
    mono   := rational ['*' 'n' ['^' integer]] | 'n' ['^' integer]
    cond   := 'n' 'mod' integer '==' integer
            | 'bohr' '(' rational ';' rational ')'
            | 'n' 'in' '[' integer ',' integer ']'
    rational := ['-'] number ['/' number]

Numbers may be decimals (``0.618``); they are converted to exact fractions.
``re(...)`` (real part) is an addition to the documented grammar so that
cosine-type test functions can be written directly.

Random distributions: ``pm1`` (uniform signs), ``uniform`` ([0, 1)) and
``unit`` (uniform on the unit circle).  Draws are taken in domain order from
``numpy.random.default_rng(seed)``.

Syntax errors carry a 1-based byte offset; end of input sits at len+1.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .funcspace import SampledFunction

RANDOM_DISTS = ("pm1", "uniform", "unit")


class ExprError(ValueError):
    def __init__(self, message, offset=None):
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


# AST ------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Phase:
    """e(P(n)); coeffs is a sorted tuple of (degree, coefficient), zeros dropped."""
    coeffs: tuple

    @property
    def poly(self):
        return dict(self.coeffs)


@dataclass(frozen=True)
class Congruence:
    modulus: int
    residue: int


@dataclass(frozen=True)
class Bohr:
    theta: Fraction
    radius: Fraction


@dataclass(frozen=True)
class Window:
    lo: int
    hi: int


@dataclass(frozen=True)
class Indicator:
    cond: object


@dataclass(frozen=True)
class Random:
    dist: str
    seed: int


@dataclass(frozen=True)
class Clamp01:
    arg: object


@dataclass(frozen=True)
class RealPart:
    arg: object


@dataclass(frozen=True)
class Sum:
    """Signed terms ((sign, node), ...); the first sign is always +1."""
    terms: tuple


@dataclass(frozen=True)
class Product:
    factors: tuple


def make_phase(poly):
    items = tuple(sorted((int(d), Fraction(c)) for d, c in dict(poly).items() if c != 0))
    for d, _ in items:
        if d < 0:
            raise ExprError("negative degree in phase polynomial")
    return Phase(items)


# tokenizer -------------------------------------------------------------------

_SYMBOLS = ("==", "(", ")", "+", "-", "*", "/", "^", ";", ",", "[", "]")


def _tokenize(text):
    toks = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            if j < len(text) and text[j] == ".":
                j += 1
                while j < len(text) and text[j].isdigit():
                    j += 1
            toks.append(("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("id", text[i:j], i))
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(("sym", sym, i))
                i += len(sym)
                break
        else:
            raise ExprError(f"unexpected character {ch!r}", _offset(text, i))
    toks.append(("eof", "", len(text)))
    return toks


def _offset(text, pos):
    return len(text[:pos].encode("utf-8")) + 1


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    # helpers
    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprError(message, _offset(self.text, tok[2]))

    def take(self, kind, value=None):
        tok = self.peek()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            got = "end of input" if tok[0] == "eof" else repr(tok[1])
            self.fail(f"expected {want!r}, found {got}")
        self.i += 1
        return tok

    def at(self, kind, value=None):
        tok = self.peek()
        return tok[0] == kind and (value is None or tok[1] == value)

    # grammar
    def parse(self):
        node = self.expr()
        if not self.at("eof"):
            self.fail(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        terms = [(1, self.term())]
        while self.at("sym", "+") or self.at("sym", "-"):
            sign = 1 if self.take("sym")[1] == "+" else -1
            terms.append((sign, self.term()))
        return terms[0][1] if len(terms) == 1 else Sum(tuple(terms))

    def term(self):
        factors = [self.factor()]
        while self.at("sym", "*"):
            self.take("sym", "*")
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def factor(self):
        tok = self.peek()
        if tok[0] == "num" or (tok[0] == "sym" and tok[1] == "-"):
            return Const(self.rational())
        if tok[0] == "sym" and tok[1] == "(":
            self.take("sym", "(")
            node = self.expr()
            self.take("sym", ")")
            return node
        if tok[0] == "id":
            name = tok[1]
            if name == "e":
                self.take("id")
                self.take("sym", "(")
                poly = self.poly()
                self.take("sym", ")")
                return make_phase(poly)
            if name == "indicator":
                self.take("id")
                self.take("sym", "(")
                cond = self.cond()
                self.take("sym", ")")
                return Indicator(cond)
            if name == "random":
                self.take("id")
                self.take("sym", "(")
                dist_tok = self.take("id")
                if dist_tok[1] not in RANDOM_DISTS:
                    self.fail(f"unknown distribution {dist_tok[1]!r}", dist_tok)
                self.take("sym", ",")
                seed = self.integer()
                if seed < 0:
                    self.fail("seed must be nonnegative")
                self.take("sym", ")")
                return Random(dist_tok[1], seed)
            if name in ("clamp01", "re"):
                self.take("id")
                self.take("sym", "(")
                inner = self.expr()
                self.take("sym", ")")
                return Clamp01(inner) if name == "clamp01" else RealPart(inner)
            self.fail(f"unknown identifier {name!r}")
        if tok[0] == "eof":
            self.fail("unexpected end of input")
        self.fail(f"unexpected {tok[1]!r}")

    def number(self):
        tok = self.take("num")
        return Fraction(tok[1])

    def rational(self):
        neg = False
        if self.at("sym", "-"):
            self.take("sym", "-")
            neg = True
        value = self.number()
        if self.at("sym", "/") and self.peek(1)[0] == "num":
            self.take("sym", "/")
            den_tok = self.peek()
            den = self.number()
            if den == 0:
                self.fail("division by zero", den_tok)
            value = value / den
        return -value if neg else value

    def integer(self):
        neg = False
        if self.at("sym", "-"):
            self.take("sym", "-")
            neg = True
        tok = self.take("num")
        if not tok[1].isdigit():
            self.fail("expected an integer", tok)
        return -int(tok[1]) if neg else int(tok[1])

    def poly(self):
        coeffs = {}
        sign = 1
        if self.at("sym", "-"):
            self.take("sym", "-")
            sign = -1
        while True:
            deg, c = self.mono()
            coeffs[deg] = coeffs.get(deg, Fraction(0)) + sign * c
            if self.at("sym", "+"):
                self.take("sym", "+")
                sign = 1
            elif self.at("sym", "-"):
                self.take("sym", "-")
                sign = -1
            else:
                return coeffs

    def mono(self):
        if self.at("id", "n"):
            return self.power(), Fraction(1)
        c = self.number()
        if self.at("sym", "/"):
            self.take("sym", "/")
            den_tok = self.peek()
            den = self.number()
            if den == 0:
                self.fail("division by zero", den_tok)
            c = c / den
        if self.at("sym", "*"):
            self.take("sym", "*")
            if not self.at("id", "n"):
                self.fail("expected 'n'")
            return self.power(), c
        return 0, c

    def power(self):
        self.take("id", "n")
        if self.at("sym", "^"):
            self.take("sym", "^")
            return self.integer()
        return 1

    def cond(self):
        if self.at("id", "bohr"):
            self.take("id")
            self.take("sym", "(")
            theta = self.rational()
            self.take("sym", ";")
            rtok = self.peek()
            radius = self.rational()
            if radius < 0:
                self.fail("Bohr radius must be nonnegative", rtok)
            self.take("sym", ")")
            return Bohr(theta, radius)
        self.take("id", "n")
        if self.at("id", "mod"):
            self.take("id")
            mtok = self.peek()
            modulus = self.integer()
            if modulus < 1:
                self.fail("modulus must be positive", mtok)
            self.take("sym", "==")
            residue = self.integer()
            return Congruence(modulus, residue % modulus)
        if self.at("id", "in"):
            self.take("id")
            self.take("sym", "[")
            lo = self.integer()
            self.take("sym", ",")
            hi = self.integer()
            self.take("sym", "]")
            return Window(lo, hi)
        self.fail("expected 'mod' or 'in' after 'n'")


def parse_expr(text):
    return _Parser(text).parse()


# printer ----------------------------------------------------------------------

def _frac(q):
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _mono(deg, c):
    if deg == 0:
        return _frac(c)
    var = "n" if deg == 1 else f"n^{deg}"
    return var if c == 1 else f"{_frac(c)}*{var}"


def _poly(coeffs):
    if not coeffs:
        return "0"
    out = []
    for k, (deg, c) in enumerate(coeffs):
        if k == 0:
            out.append(("-" if c < 0 else "") + _mono(deg, abs(c)))
        else:
            out.append((" - " if c < 0 else " + ") + _mono(deg, abs(c)))
    return "".join(out)


def _cond(cond):
    if isinstance(cond, Congruence):
        return f"n mod {cond.modulus} == {cond.residue}"
    if isinstance(cond, Bohr):
        return f"bohr({_frac(cond.theta)}; {_frac(cond.radius)})"
    return f"n in [{cond.lo}, {cond.hi}]"


def print_expr(node):
    """Canonical text; parse_expr(print_expr(a)) == a."""
    if isinstance(node, Const):
        return _frac(node.value)
    if isinstance(node, Phase):
        return f"e({_poly(node.coeffs)})"
    if isinstance(node, Indicator):
        return f"indicator({_cond(node.cond)})"
    if isinstance(node, Random):
        return f"random({node.dist}, {node.seed})"
    if isinstance(node, Clamp01):
        return f"clamp01({print_expr(node.arg)})"
    if isinstance(node, RealPart):
        return f"re({print_expr(node.arg)})"
    if isinstance(node, Sum):
        parts = []
        for k, (sign, sub) in enumerate(node.terms):
            txt = print_expr(sub)
            if isinstance(sub, Sum):
                txt = f"({txt})"
            if k == 0:
                parts.append(txt)
            else:
                parts.append((" + " if sign > 0 else " - ") + txt)
        return "".join(parts)
    if isinstance(node, Product):
        parts = []
        for sub in node.factors:
            txt = print_expr(sub)
            if isinstance(sub, (Sum, Product)):
                txt = f"({txt})"
            parts.append(txt)
        return "*".join(parts)
    raise TypeError(f"not an expression node: {node!r}")


# evaluation -------------------------------------------------------------------

def phase_values(coeffs, n):
    """e(P(n)) for integer array n, reducing P(n) mod 1 exactly."""
    n = np.asarray(n, dtype=np.int64)
    if not coeffs:
        return np.ones(n.shape, dtype=np.complex128)
    Q = 1
    for _, c in coeffs:
        Q = Q * c.denominator // math.gcd(Q, c.denominator)
    nums = [(d, (c.numerator * (Q // c.denominator)) % Q) for d, c in coeffs]
    if Q < 2 ** 31:
        base = n % Q
        acc = np.zeros(n.shape, dtype=np.int64)
        for d, a in nums:
            term = np.full(n.shape, a, dtype=np.int64)
            for _ in range(d):
                term = (term * base) % Q
            acc = (acc + term) % Q
    else:
        flat = [sum(a * pow(int(x), d, Q) for d, a in nums) % Q for x in n.reshape(-1)]
        acc = np.array(flat, dtype=object).reshape(n.shape)
    out = np.exp(2j * np.pi * (acc.astype(np.float64) / Q))
    # quarter turns are returned exactly (1, i, -1, -i)
    quarter = (acc * 4) % Q == 0
    if np.any(quarter):
        table = np.array([1, 1j, -1, -1j], dtype=np.complex128)
        out[quarter] = table[((acc[quarter] * 4) // Q).astype(np.int64) % 4]
    return out


def _bohr_mask(cond, n):
    p, q = cond.theta.numerator, cond.theta.denominator
    r = (p * (n % q)) % q  # theta*n mod 1 = r/q
    dist_num = np.minimum(r, q - r)
    rad = cond.radius
    return dist_num * rad.denominator <= rad.numerator * q


def _eval(node, n):
    if isinstance(node, Const):
        return np.full(n.shape, complex(float(node.value)), dtype=np.complex128)
    if isinstance(node, Phase):
        return phase_values(node.coeffs, n)
    if isinstance(node, Indicator):
        c = node.cond
        if isinstance(c, Congruence):
            mask = (n % c.modulus) == c.residue
        elif isinstance(c, Bohr):
            mask = _bohr_mask(c, n)
        else:
            mask = (n >= c.lo) & (n <= c.hi)
        return mask.astype(np.complex128)
    if isinstance(node, Random):
        rng = np.random.default_rng(node.seed)
        if node.dist == "pm1":
            vals = rng.choice(np.array([-1.0, 1.0]), size=n.shape)
        elif node.dist == "uniform":
            vals = rng.random(n.shape)
        else:
            vals = np.exp(2j * np.pi * rng.random(n.shape))
        return np.asarray(vals, dtype=np.complex128)
    if isinstance(node, Clamp01):
        return np.clip(_eval(node.arg, n).real, 0.0, 1.0).astype(np.complex128)
    if isinstance(node, RealPart):
        return _eval(node.arg, n).real.astype(np.complex128)
    if isinstance(node, Sum):
        out = np.zeros(n.shape, dtype=np.complex128)
        for sign, sub in node.terms:
            out = out + sign * _eval(sub, n)
        return out
    if isinstance(node, Product):
        out = np.ones(n.shape, dtype=np.complex128)
        for sub in node.factors:
            out = out * _eval(sub, n)
        return out
    raise TypeError(f"not an expression node: {node!r}")


def eval_expr(expr, domain):
    if isinstance(expr, str):
        expr = parse_expr(expr)
    vals = _eval(expr, domain.indices())
    if not np.all(np.isfinite(vals)):
        raise ExprError("expression produced a non-finite value")
    peak = float(np.max(np.abs(vals)))
    return SampledFunction(domain, vals, 1.0 if peak <= 1.0 + 1e-12 else peak)
