"""Normal forms of terms: quotients of finite exponential sums over log-E-sums.

An :class:`ExpSum` is a finite sum ``sum_P S_P * exp(P)`` in which every
coefficient ``S_P`` is a :class:`~transexp.series.LogESum` and every exponent
``P`` is again an :class:`ExpSum` (the empty one for plain terms).  A
:class:`NormalForm` is a quotient ``num / den`` of two of these.

Variables are the points ``x + q`` with ``q`` in ``[0, 1)``; an argument
``x + q + n`` with integer ``n <= 0`` is the generator at shift ``-n``, and
``n >= 1`` is unfolded with ``E(y + 1) = exp E(y)`` and
``E^(d)(y + 1) = exp(E(y)) B_d(E'(y), ..., E^(d)(y))``.

Exponents are kept canonical by moving ``exp(c E(y - m))`` (``m >= 1``) and
``exp(c log E'(y - m))`` into the coefficient as ``E(y - m + 1)^c`` and
``E'(y - m)^c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

from ..algebra import VarContext
from ..monomials import LX_INDEX, SLOW_INDICES, X_INDEX, GMonomial, LogMonomial
from ..rewrite import bell
from ..series import LogESum
from . import ast


class UnsupportedFragment(Exception):
    """The term lies outside the fragment this engine decides."""


class DivisionByZeroTerm(ZeroDivisionError):
    """A denominator normalizes to a term that is identically zero."""


_ONE_G = GMonomial.one()
_ONE_L = LogMonomial.one()


class ExpSum:
    """``sum_P S_P exp(P)``: a map from exponent sums to log-E-sum coefficients."""

    __slots__ = ("classes", "_hash")

    def __init__(self, classes: Mapping["ExpSum", LogESum] = ()):
        items = dict(classes)
        self.classes: dict[ExpSum, LogESum] = {p: s for p, s in items.items() if not s.is_zero()}
        self._hash = None

    # -- constructors --------------------------------------------------
    @staticmethod
    def zero() -> "ExpSum":
        return _ZERO

    @staticmethod
    def plain(s: LogESum) -> "ExpSum":
        return ExpSum({_ZERO: s})

    @staticmethod
    def const(c) -> "ExpSum":
        return ExpSum.plain(LogESum.constant(Fraction(c)))

    @staticmethod
    def one() -> "ExpSum":
        return ExpSum.const(1)

    @staticmethod
    def exp_of(p: "ExpSum") -> "ExpSum":
        """``exp(p)`` with ``E(y - m)`` and ``log E'(y - m)`` terms absorbed."""
        absorbed = _ONE_G
        rest: dict[ExpSum, LogESum] = {}
        for key, s in p.classes.items():
            if not key.is_zero():
                rest[key] = s
                continue
            keep = {}
            for (g, ell), c in s.terms.items():
                gi, li = g.items(), ell.items()
                if not li and len(gi) == 1 and gi[0][1] == 1 and gi[0][0][0] == 0 and gi[0][0][1] >= 1:
                    _d, m, v = gi[0][0]
                    absorbed = absorbed * GMonomial.gen(0, m - 1, v, c)
                elif not gi and len(li) == 1 and li[0][1] == 1:
                    (m, v), _b = li[0]
                    absorbed = absorbed * GMonomial.gen(1, m, v, c)
                elif g.is_one() and ell.is_one():
                    raise UnsupportedFragment(f"exp({c}) is not rational")
                else:
                    keep[(g, ell)] = c
            if keep:
                rest[key] = LogESum(keep)
        return ExpSum({ExpSum(rest): LogESum.monomial(absorbed)})

    # -- structure -----------------------------------------------------
    def is_zero(self) -> bool:
        return not self.classes

    def plain_part(self) -> LogESum | None:
        """The coefficient when there is no exponential factor at all."""
        if not self.classes:
            return LogESum.zero()
        if len(self.classes) == 1 and _ZERO in self.classes:
            return self.classes[_ZERO]
        return None

    def constant_value(self) -> Fraction | None:
        s = self.plain_part()
        if s is None:
            return None
        if s.is_zero():
            return Fraction(0)
        if len(s.terms) == 1:
            ((g, ell), c), = s.terms.items()
            if g.is_one() and ell.is_one():
                return c
        return None

    def monomial(self):
        """``(c, g, ell, P)`` when the sum is a single term ``c g ell exp(P)``."""
        if len(self.classes) != 1:
            return None
        (p, s), = self.classes.items()
        if len(s.terms) != 1:
            return None
        ((g, ell), c), = s.terms.items()
        return c, g, ell, p

    def depth(self) -> int:
        """Nesting depth of ``exp``."""
        return max((1 + p.depth() for p in self.classes if not p.is_zero()), default=0)

    def variables(self) -> set:
        out = set()
        for p, s in self.classes.items():
            out |= s.variables() | p.variables()
        return out

    def has_slow(self) -> bool:
        return any(s.has_slow() or p.has_slow() for p, s in self.classes.items())

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other: "ExpSum") -> "ExpSum":
        out = dict(self.classes)
        for p, s in other.classes.items():
            out[p] = out[p] + s if p in out else s
        return ExpSum(out)

    def __neg__(self) -> "ExpSum":
        return ExpSum({p: -s for p, s in self.classes.items()})

    def __sub__(self, other: "ExpSum") -> "ExpSum":
        return self + (-other)

    def scale(self, c) -> "ExpSum":
        c = Fraction(c)
        return ExpSum({p: s * c for p, s in self.classes.items()})

    def __mul__(self, other: "ExpSum") -> "ExpSum":
        out: dict[ExpSum, LogESum] = {}
        for p1, s1 in self.classes.items():
            for p2, s2 in other.classes.items():
                p = p1 + p2
                prod = s1 * s2
                out[p] = out[p] + prod if p in out else prod
        return ExpSum(out)

    def __pow__(self, n: int) -> "ExpSum":
        if n < 0:
            raise ValueError("ExpSum powers must be natural")
        result, base = ExpSum.one(), self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ExpSum) and self.classes == other.classes

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self.classes.items()))
        return self._hash

    # -- display -------------------------------------------------------
    def render(self, context: VarContext | None = None) -> str:
        if not self.classes:
            return "0"
        ctx = context or offsets_context(self.variables())
        pieces = []
        for p, s in sorted(self.classes.items(), key=lambda kv: (kv[0].depth(), kv[0].render(ctx))):
            if p.is_zero():
                pieces.append(s.render(ctx))
                continue
            coeff = s.render(ctx)
            factor = f"exp({p.render(ctx)})"
            if coeff == "1":
                pieces.append(factor)
            elif coeff == "-1":
                pieces.append(f"-{factor}")
            elif len(s.terms) == 1:
                pieces.append(f"{coeff}*{factor}")
            else:
                pieces.append(f"({coeff})*{factor}")
        return " + ".join(pieces).replace("+ -", "- ")

    def __repr__(self) -> str:
        return f"ExpSum({self.render()})"


_ZERO = ExpSum.__new__(ExpSum)
_ZERO.classes = {}
_ZERO._hash = None


def offsets_context(variables: set) -> VarContext:
    """Display context for the points ``x + q`` behind the variable ids ``-q``."""
    return VarContext.from_offsets([-Fraction(v) for v in variables] or [0])


@dataclass(frozen=True)
class NormalForm:
    """``num / den`` with ``den`` certified nonzero."""

    num: ExpSum
    den: ExpSum

    @staticmethod
    def of(num: ExpSum, den: ExpSum | None = None) -> "NormalForm":
        return _fold(num, den if den is not None else ExpSum.one())

    @staticmethod
    def const(c) -> "NormalForm":
        return NormalForm(ExpSum.const(c), ExpSum.one())

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def has_denominator(self) -> bool:
        return self.den.constant_value() != 1

    def level(self) -> int:
        return max(self.num.depth(), self.den.depth())

    def variables(self) -> set:
        return self.num.variables() | self.den.variables()

    def context(self) -> VarContext:
        return offsets_context(self.variables())

    def render(self) -> str:
        ctx = self.context()
        if not self.has_denominator():
            return self.num.render(ctx)
        return f"({self.num.render(ctx)}) / ({self.den.render(ctx)})"

    def __str__(self) -> str:
        return self.render()


def _monomial_inverse(c: Fraction, g: GMonomial, ell: LogMonomial, p: ExpSum) -> ExpSum:
    return ExpSum({-p: LogESum.monomial(g.inverse(), 1 / c, ell.inverse())})


def _fold(num: ExpSum, den: ExpSum) -> NormalForm:
    """Divide through when the denominator is a single term."""
    if den.is_zero():
        raise DivisionByZeroTerm("denominator is the zero sum")
    mono = den.monomial()
    if mono is not None:
        return NormalForm(num * _monomial_inverse(*mono), ExpSum.one())
    return NormalForm(num, den)


# ---------------------------------------------------------------------------
# Operations on normal forms
# ---------------------------------------------------------------------------


def nf_add(a: NormalForm, b: NormalForm) -> NormalForm:
    if a.den == b.den:
        return NormalForm.of(a.num + b.num, a.den)
    return NormalForm.of(a.num * b.den + b.num * a.den, a.den * b.den)


def nf_neg(a: NormalForm) -> NormalForm:
    return NormalForm(-a.num, a.den)


def nf_sub(a: NormalForm, b: NormalForm) -> NormalForm:
    return nf_add(a, nf_neg(b))


def nf_mul(a: NormalForm, b: NormalForm) -> NormalForm:
    return NormalForm.of(a.num * b.num, a.den * b.den)


def nf_div(a: NormalForm, b: NormalForm) -> NormalForm:
    if b.num.is_zero():
        raise DivisionByZeroTerm("division by a term that normalizes to 0")
    if b.num.monomial() is None:
        from .compare import sign_of_sum

        if sign_of_sum(b.num) == 0:
            raise DivisionByZeroTerm("division by a term that vanishes identically")
    return NormalForm.of(a.num * b.den, a.den * b.num)


def _rational_root(c: Fraction, r: Fraction) -> Fraction | None:
    """``c ** r`` when it is rational."""
    if c < 0:
        return None
    if c == 0:
        return Fraction(0) if r > 0 else None
    out = []
    for part in (c.numerator, c.denominator):
        root = round(part ** (1 / r.denominator)) if part > 1 else part
        hit = None
        for cand in (root - 1, root, root + 1):
            if cand >= 0 and cand ** r.denominator == part:
                hit = cand
        if hit is None:
            return None
        out.append(hit)
    return Fraction(out[0], out[1]) ** r.numerator


def nf_pow(a: NormalForm, r: Fraction) -> NormalForm:
    r = Fraction(r)
    if r.denominator == 1:
        n = int(r)
        if n >= 0:
            return NormalForm.of(a.num ** n, a.den ** n)
        return nf_div(NormalForm.const(1), nf_pow(a, Fraction(-n)))
    mono = a.num.monomial() if not a.has_denominator() else None
    if mono is None:
        raise UnsupportedFragment("a non-integer power of a sum is outside the fragment")
    c, g, ell, p = mono
    root = _rational_root(c, r)
    if root is None:
        raise UnsupportedFragment(f"{c}^({r}) is not rational")
    return NormalForm.of(ExpSum({p.scale(r): LogESum.monomial(g ** r, root, ell ** r)}))


def nf_exp(a: NormalForm) -> NormalForm:
    if a.has_denominator():
        raise UnsupportedFragment("exp of a quotient with a non-monomial denominator")
    return NormalForm.of(ExpSum.exp_of(a.num))


def nf_log(a: NormalForm) -> NormalForm:
    mono = a.num.monomial() if not a.has_denominator() else None
    if mono is None:
        raise UnsupportedFragment("log of a sum is outside the fragment")
    c, g, ell, p = mono
    if c != 1:
        raise UnsupportedFragment(f"log of the constant factor {c} is not rational")
    if not ell.is_one():
        raise UnsupportedFragment("log of a power of log E' is outside the fragment")
    total = LogESum.zero()
    for (d, m, v), e in g.items():
        if d == 0:
            total = total + LogESum.monomial(GMonomial.gen(0, m + 1, v), e)
        elif d == 1:
            total = total + LogESum.log_ep(m, v) * e
        else:
            name = "x" if d == X_INDEX else "L(x)" if d == LX_INDEX else f"E^({d})"
            raise UnsupportedFragment(f"log of {name} is outside the fragment")
    return NormalForm.of(p + ExpSum.plain(total))


def _as_shifted_x(a: NormalForm) -> Fraction | None:
    """``q`` when ``a`` is exactly ``x + q``."""
    s = a.num.plain_part() if not a.has_denominator() else None
    if s is None:
        return None
    q = Fraction(0)
    seen_x = False
    for (g, ell), c in s.terms.items():
        if not ell.is_one():
            return None
        if g.is_one():
            q = c
        elif g == GMonomial.x() and c == 1:
            seen_x = True
        else:
            return None
    return q if seen_x else None


def _as_shifted_lx(a: NormalForm) -> Fraction | None:
    """``n`` when ``a`` is exactly ``L(x) + n``."""
    s = a.num.plain_part() if not a.has_denominator() else None
    if s is None:
        return None
    n = Fraction(0)
    seen = False
    for (g, ell), c in s.terms.items():
        if not ell.is_one():
            return None
        if g.is_one():
            n = c
        elif g == GMonomial.lx() and c == 1:
            seen = True
        else:
            return None
    return n if seen else None


def _bell_polynomial(d: int) -> list[tuple[tuple[int, ...], Fraction]]:
    """``B_d`` as exponent vectors over ``(E', ..., E^(d))``."""
    out = []
    for (g, _ell), c in bell(d, 0, 0).terms.items():
        vec = [0] * d
        for (j, _m, _v), e in g.items():
            vec[j - 1] = int(e)
        out.append((tuple(vec), c))
    return out


@lru_cache(maxsize=None)
def shifted_generator(d: int, q: Fraction) -> NormalForm:
    """``E^(d)(x + q)`` in normal form."""
    n = math.floor(q)
    frac = q - n
    var = -frac
    if n <= 0:
        return NormalForm.of(ExpSum.plain(LogESum.monomial(GMonomial.gen(d, -n, var))))
    lower = shifted_generator(0, q - 1)
    outer = nf_exp(lower)
    if d == 0:
        return outer
    derivs = [shifted_generator(j, q - 1) for j in range(1, d + 1)]
    total = NormalForm.const(0)
    for vec, c in _bell_polynomial(d):
        term = NormalForm.const(c)
        for base, e in zip(derivs, vec):
            if e:
                term = nf_mul(term, nf_pow(base, Fraction(e)))
        total = nf_add(total, term)
    return nf_mul(outer, total)


def nf_E(d: int, a: NormalForm) -> NormalForm:
    q = _as_shifted_x(a)
    if q is not None:
        return shifted_generator(d, q)
    n = _as_shifted_lx(a)
    if n is not None and d == 0:
        if n.denominator != 1 or n < 0:
            raise UnsupportedFragment("E(L(x) + n) needs a natural n")
        out = NormalForm.of(ExpSum.plain(LogESum.monomial(GMonomial.x())))
        for _ in range(int(n)):
            out = nf_exp(out)
        return out
    raise UnsupportedFragment("the argument of E^(d) does not reduce to x + q")


def nf_L(a: NormalForm) -> NormalForm:
    if a.has_denominator():
        raise UnsupportedFragment("L of a quotient is outside the fragment")
    mono = a.num.monomial()
    if mono is not None:
        c, g, ell, p = mono
        if c == 1 and ell.is_one() and p.is_zero():
            if g == GMonomial.x():
                return NormalForm.of(ExpSum.plain(LogESum.monomial(GMonomial.lx())))
            gi = g.items()
            if len(gi) == 1 and gi[0][1] == 1 and gi[0][0][0] == 0:
                _d, m, v = gi[0][0]
                value = LogESum.monomial(GMonomial.x()) + LogESum.constant(-Fraction(v) - m)
                return NormalForm.of(ExpSum.plain(value))
        if c == 1 and g.is_one() and ell.is_one() and not p.is_zero():
            inner = nf_L(NormalForm.of(p))
            return nf_add(inner, NormalForm.const(1))
    raise UnsupportedFragment("the argument of L does not simplify")


def normalize(t: ast.Term) -> NormalForm:
    """Normal form of a parsed term; raises :class:`UnsupportedFragment`."""
    if isinstance(t, ast.Var):
        return NormalForm.of(ExpSum.plain(LogESum.monomial(GMonomial.x())))
    if isinstance(t, ast.Const):
        return NormalForm.const(t.value)
    if isinstance(t, ast.Neg):
        return nf_neg(normalize(t.arg))
    if isinstance(t, ast.BinOp):
        a, b = normalize(t.left), normalize(t.right)
        return {"+": nf_add, "-": nf_sub, "*": nf_mul, "/": nf_div}[t.op](a, b)
    if isinstance(t, ast.Pow):
        return nf_pow(normalize(t.base), t.exponent)
    if isinstance(t, ast.Exp):
        return nf_exp(normalize(t.arg))
    if isinstance(t, ast.Log):
        return nf_log(normalize(t.arg))
    if isinstance(t, ast.LApp):
        return nf_L(normalize(t.arg))
    if isinstance(t, ast.EApp):
        return nf_E(t.order, normalize(t.arg))
    raise TypeError(f"not a term: {t!r}")


__all__ = [
    "UnsupportedFragment", "DivisionByZeroTerm", "ExpSum", "NormalForm", "normalize",
    "offsets_context", "shifted_generator",
]
