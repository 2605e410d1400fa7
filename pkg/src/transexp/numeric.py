"""A concrete ``C^D`` solution of ``E(x+1) = exp E(x)`` for sampled sign checks.

On ``[0, 1]`` the solution is a Hermite polynomial ``p`` of degree ``2D+1``
with ``p(0) = 1``, ``p'(0) = 1``, ``p^(j)(0) = 0`` for ``2 <= j <= D`` and
``p^(j)(1) = (exp o p)^(j)(0)``, so the extension by the difference equation
is ``C^D`` at the integers.  Since only ``p'(0)`` is nonzero among the free
derivatives, every matching value is ``e * B_j(1, 0, ..., 0) = e``.

Values such as ``E(5)`` overflow any float, so arithmetic happens on
:class:`LeveledNumber`: either a plain high-precision real, or
``sign * exp(inner)`` with ``inner`` again a leveled number.  A sum whose
smaller operand barely registers at working precision sets ``absorbed``.  The
flag survives every later operation, and a cancellation that would expose
the lost digits raises :class:`NumericError` instead of returning a wrong sign.

The oracle is a smoke test.  It evaluates the parsed term directly and never
looks at the algebraic normal form.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import mpmath
from mpmath import mp, mpf

from .termlang import ast

#: significant decimal digits of every plain mantissa
DIGITS = 60
#: a plain value is exponentiated directly only below this size
EXP_CAP = mpf(10) ** 5
#: default sample points; they keep tower levels at most 3
DEFAULT_SAMPLES = (Fraction(3), Fraction(7, 2), Fraction(4))
#: relative differences below this make a sample inconclusive
RELATIVE_TOLERANCE = mpf("1e-10")
MAX_DEGREE = 8
#: a plain addend smaller than this fraction of the other one marks the sum as absorbed
ABSORB_RATIO = mpf(10) ** (20 - DIGITS)
#: natural log of the largest cancellation factor trusted after an absorption
CANCELLATION_LIMIT = (DIGITS - 20) * mpmath.log(10)

mp.dps = DIGITS


class NumericError(ArithmeticError):
    """Precision exhaustion, an unsupported argument or a domain error."""


class MonotonicityError(NumericError):
    """The Hermite seed is not strictly increasing on ``[0, 1]``."""


# ---------------------------------------------------------------------------
# Leveled numbers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeveledNumber:
    """``value`` when ``inner`` is ``None``, else ``sign * exp(inner)``."""

    sign: int
    value: mpf = mpf(0)
    inner: "LeveledNumber | None" = None
    absorbed: bool = False

    # -- construction --------------------------------------------------
    @staticmethod
    def plain(v) -> "LeveledNumber":
        v = mpf(v)
        return LeveledNumber(0 if v == 0 else (1 if v > 0 else -1), v)

    @staticmethod
    def from_log(sign: int, log_abs: "LeveledNumber") -> "LeveledNumber":
        """``sign * exp(log_abs)``, collapsed to a plain value when it fits."""
        if sign == 0:
            return ZERO
        if log_abs.inner is None and abs(log_abs.value) <= EXP_CAP:
            return LeveledNumber.plain(sign * mpmath.exp(log_abs.value))
        if log_abs.inner is None and log_abs.value < 0:
            # exp of a large negative plain number still fits in an mpf exponent
            return LeveledNumber.plain(sign * mpmath.exp(log_abs.value))
        return LeveledNumber(sign, mpf(0), log_abs)

    @property
    def level(self) -> int:
        return 0 if self.inner is None else 1 + max(self.inner.level, 0)

    def log_abs(self) -> "LeveledNumber":
        if self.sign == 0:
            raise NumericError("log of zero")
        if self.inner is not None:
            return self.inner._inherit(self)
        return LeveledNumber.plain(mpmath.log(abs(self.value)))._inherit(self)

    def is_plain(self) -> bool:
        return self.inner is None

    def to_mpf(self) -> mpf:
        if self.inner is None:
            return self.value
        raise NumericError("value exceeds the plain range")

    def _inherit(self, *operands: "LeveledNumber") -> "LeveledNumber":
        if self.absorbed or self.sign == 0 or not any(o.absorbed for o in operands):
            return self
        return LeveledNumber(self.sign, self.value, self.inner, True)

    # -- arithmetic ----------------------------------------------------
    def __neg__(self) -> "LeveledNumber":
        if self.inner is None:
            return LeveledNumber(-self.sign, -self.value, None, self.absorbed)
        return LeveledNumber(-self.sign, mpf(0), self.inner, self.absorbed)

    def __mul__(self, other: "LeveledNumber") -> "LeveledNumber":
        if self.sign == 0 or other.sign == 0:
            return ZERO
        if self.inner is None and other.inner is None:
            out = LeveledNumber.plain(self.value * other.value)
        else:
            out = LeveledNumber.from_log(self.sign * other.sign, self.log_abs() + other.log_abs())
        return out._inherit(self, other)

    def reciprocal(self) -> "LeveledNumber":
        if self.sign == 0:
            raise NumericError("division by zero")
        if self.inner is None:
            return LeveledNumber.plain(1 / self.value)._inherit(self)
        return LeveledNumber.from_log(self.sign, -self.inner)._inherit(self)

    def __truediv__(self, other: "LeveledNumber") -> "LeveledNumber":
        return self * other.reciprocal()

    def __add__(self, other: "LeveledNumber") -> "LeveledNumber":
        if other.sign == 0:
            return self
        if self.sign == 0:
            return other
        big, small = (self, other) if abs_compare(self, other) >= 0 else (other, self)
        if self.inner is None and other.inner is None:
            out = LeveledNumber.plain(self.value + other.value)
            if abs(small.value) < abs(big.value) * ABSORB_RATIO:
                return LeveledNumber(out.sign, out.value, None, True)
            if big.sign != small.sign and (big.absorbed or small.absorbed):
                if out.sign == 0 or mpmath.log(abs(big.value) / abs(out.value)) > CANCELLATION_LIMIT:
                    raise NumericError("cancellation exposes absorbed digits")
            return out._inherit(self, other)
        gap = small.log_abs() - big.log_abs()
        if gap.inner is not None or gap.value < -EXP_CAP:
            return LeveledNumber(big.sign, big.value, big.inner, True)
        ratio = mpmath.exp(gap.value)
        factor = mpmath.log1p(ratio if big.sign == small.sign else -ratio)
        if big.sign != small.sign and (big.absorbed or small.absorbed or gap.absorbed):
            if factor == -mpmath.inf or -factor > CANCELLATION_LIMIT:
                raise NumericError("cancellation exposes absorbed digits")
        if factor == -mpmath.inf:
            return ZERO
        return LeveledNumber.from_log(big.sign, big.log_abs() + LeveledNumber.plain(factor))._inherit(self, other, gap)

    def __sub__(self, other: "LeveledNumber") -> "LeveledNumber":
        return self + (-other)

    def power(self, r: Fraction) -> "LeveledNumber":
        r = Fraction(r)
        if self.sign == 0:
            if r > 0:
                return ZERO
            raise NumericError("zero to a non-positive power")
        if self.sign < 0 and r.denominator != 1:
            raise NumericError("non-integer power of a negative number")
        sign = 1 if self.sign > 0 or r.numerator % 2 == 0 else -1
        if self.inner is None and abs(mpmath.log(abs(self.value)) * r) <= EXP_CAP:
            out = LeveledNumber.plain(sign * abs(self.value) ** (mpf(r.numerator) / r.denominator))
        else:
            out = LeveledNumber.from_log(sign, self.log_abs() * LeveledNumber.plain(mpf(r.numerator) / r.denominator))
        return out._inherit(self)

    def exp(self) -> "LeveledNumber":
        return LeveledNumber.from_log(1, self)._inherit(self)

    def log(self) -> "LeveledNumber":
        if self.sign <= 0:
            raise NumericError("log of a non-positive number")
        return self.log_abs()

    def __repr__(self) -> str:
        if self.inner is None:
            return f"LeveledNumber({mpmath.nstr(self.value, 15)})"
        return f"LeveledNumber({'-' if self.sign < 0 else ''}exp({self.inner!r}))"


ZERO = LeveledNumber(0, mpf(0))


def abs_compare(a: LeveledNumber, b: LeveledNumber) -> int:
    """Compare ``|a|`` with ``|b|``."""
    if a.sign == 0 or b.sign == 0:
        return (a.sign != 0) - (b.sign != 0)
    if a.inner is None and b.inner is None:
        x, y = abs(a.value), abs(b.value)
        return (x > y) - (x < y)
    return compare(a.log_abs(), b.log_abs())


def compare(a: LeveledNumber, b: LeveledNumber) -> int:
    if a.sign != b.sign:
        return (a.sign > b.sign) - (a.sign < b.sign)
    if a.sign == 0:
        return 0
    c = abs_compare(a, b)
    return c if a.sign > 0 else -c


# ---------------------------------------------------------------------------
# The seed solution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeedSolution:
    degree: int
    coefficients: tuple  # p(t) = sum c_k t^k
    at_zero: tuple       # p^(j)(0), j = 0..D
    at_one: tuple        # p^(j)(1), j = 0..D

    def p(self, t, j: int = 0) -> mpf:
        """``p^(j)(t)``."""
        total = mpf(0)
        for k in range(len(self.coefficients) - 1, j - 1, -1):
            total = total * t + self.coefficients[k] * mpmath.ff(k, j)
        return total

    def right_derivatives_at_one(self) -> list[mpf]:
        """Derivatives of ``exp(p(t - 1))`` at ``t = 1`` from the right."""
        e = mpmath.e
        xs = [self.p(0, j) for j in range(1, self.degree + 1)]
        return [e * _bell_values(xs, j) for j in range(self.degree + 1)]


def _bell_values(xs: list, n: int):
    """Complete Bell polynomial ``B_n(xs[0], ..., xs[n-1])`` by the standard recurrence."""
    b = [mpf(1)]
    for m in range(n):
        b.append(sum(math.comb(m, k) * xs[k] * b[m - k] for k in range(m + 1)))
    return b[n]


def build_seed(D: int = 4) -> SeedSolution:
    """The Hermite seed of degree ``2D + 1``; raises :class:`MonotonicityError`."""
    if not 1 <= D <= MAX_DEGREE:
        raise ValueError(f"seed degree must be between 1 and {MAX_DEGREE}, got {D}")
    return _build_seed(D)


@lru_cache(maxsize=None)
def _build_seed(D: int) -> SeedSolution:
    with mpmath.workdps(DIGITS + 20):
        at_zero = [mpf(1), mpf(1)] + [mpf(0)] * (D - 1)
        at_one = [mpmath.e * _bell_values([mpf(1)] + [mpf(0)] * (D - 1), j) for j in range(D + 1)]
        coeffs = [at_zero[j] / mpmath.factorial(j) for j in range(D + 1)]
        unknown = list(range(D + 1, 2 * D + 2))
        matrix = mpmath.matrix(D + 1, D + 1)
        rhs = mpmath.matrix(D + 1, 1)
        for j in range(D + 1):
            known = sum(coeffs[k] * mpmath.ff(k, j) for k in range(D + 1))
            rhs[j] = at_one[j] - known
            for col, k in enumerate(unknown):
                matrix[j, col] = mpmath.ff(k, j)
        solution = mpmath.lu_solve(matrix, rhs)
        coeffs += [solution[i] for i in range(D + 1)]
    seed = SeedSolution(D, tuple(coeffs), tuple(at_zero), tuple(seed_p(coeffs, 1, j) for j in range(D + 1)))
    _check_increasing(seed)
    return seed


def seed_p(coeffs, t, j):
    total = mpf(0)
    for k in range(len(coeffs) - 1, j - 1, -1):
        total = total * t + coeffs[k] * mpmath.ff(k, j)
    return total


def _check_increasing(seed: SeedSolution, samples: int = 2000) -> None:
    for i in range(samples + 1):
        t = mpf(i) / samples
        if seed.p(t, 1) <= 0:
            raise MonotonicityError(f"p'({mpmath.nstr(t, 6)}) <= 0 for degree {seed.degree}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


class _Evaluator:
    def __init__(self, seed: SeedSolution):
        self.seed = seed
        self.cache: dict[tuple[int, mpf], LeveledNumber] = {}

    def E(self, d: int, y: mpf) -> LeveledNumber:
        if d > self.seed.degree:
            raise NumericError(f"derivative order {d} exceeds the seed degree {self.seed.degree}")
        key = (d, y)
        if key in self.cache:
            return self.cache[key]
        if y < 0:
            if d != 0:
                raise NumericError("derivatives of E are evaluated only at non-negative arguments")
            out = self.E(0, y + 1).log()
        elif y < 1:
            out = LeveledNumber.plain(self.seed.p(y, d))
        else:
            base = self.E(0, y - 1).exp()
            if d == 0:
                out = base
            else:
                xs = [self.E(j, y - 1) for j in range(1, d + 1)]
                out = base * _bell_leveled(xs, d)
        self.cache[key] = out
        return out

    def L(self, v: LeveledNumber) -> mpf:
        if v.inner is not None:
            if v.sign < 0:
                raise NumericError("L of a huge negative number")
            return 1 + self.L(v.inner)
        y = v.value
        shift = 0
        while y > mpmath.e:
            y = mpmath.log(y)
            shift += 1
        while y < 1:
            y = mpmath.exp(y)
            shift -= 1
        lo, hi = mpf(0), mpf(1)
        for _ in range(4 * mp.prec):
            mid = (lo + hi) / 2
            if self.seed.p(mid) < y:
                lo = mid
            else:
                hi = mid
        return shift + (lo + hi) / 2

    def eval(self, t: ast.Term, x: mpf) -> LeveledNumber:
        if isinstance(t, ast.Var):
            return LeveledNumber.plain(x)
        if isinstance(t, ast.Const):
            return LeveledNumber.plain(mpf(t.value.numerator) / t.value.denominator)
        if isinstance(t, ast.Neg):
            return -self.eval(t.arg, x)
        if isinstance(t, ast.BinOp):
            a, b = self.eval(t.left, x), self.eval(t.right, x)
            if t.op == "+":
                return a + b
            if t.op == "-":
                return a - b
            if t.op == "*":
                return a * b
            return a / b
        if isinstance(t, ast.Pow):
            return self.eval(t.base, x).power(t.exponent)
        if isinstance(t, ast.Exp):
            return self.eval(t.arg, x).exp()
        if isinstance(t, ast.Log):
            return self.eval(t.arg, x).log()
        if isinstance(t, ast.LApp):
            return LeveledNumber.plain(self.L(self.eval(t.arg, x)))
        if isinstance(t, ast.EApp):
            arg = self.eval(t.arg, x)
            if not arg.is_plain() or abs(arg.value) > 50:
                raise NumericError("argument of E is too large to push down to the seed interval")
            return self.E(t.order, arg.value)
        raise TypeError(f"not a term: {t!r}")


def _bell_leveled(xs: list[LeveledNumber], n: int) -> LeveledNumber:
    b = [LeveledNumber.plain(1)]
    for m in range(n):
        total = ZERO
        for k in range(m + 1):
            total = total + LeveledNumber.plain(math.comb(m, k)) * xs[k] * b[m - k]
        b.append(total)
    return b[n]


def evaluate(t: ast.Term, x, seed: SeedSolution | None = None) -> LeveledNumber:
    """Value of ``t`` at ``x`` for the seed solution (``x >= 2`` is the intended range)."""
    seed = seed or build_seed(4)
    x = mpf(Fraction(x).numerator) / Fraction(x).denominator
    with mpmath.workdps(DIGITS):
        return _Evaluator(seed).eval(t, x)


def E_value(y, d: int = 0, seed: SeedSolution | None = None) -> LeveledNumber:
    """``E^(d)(y)`` for the seed solution."""
    seed = seed or build_seed(4)
    with mpmath.workdps(DIGITS):
        return _Evaluator(seed).E(d, mpf(y))


class NumericSign(Enum):
    LESS = "LessAtAllSamples"
    GREATER = "GreaterAtAllSamples"
    MIXED = "Mixed"
    INCONCLUSIVE = "Inconclusive"

    def agrees_with(self, relation: str) -> bool | None:
        """``None`` when the samples do not resolve the comparison."""
        if self in (NumericSign.MIXED, NumericSign.INCONCLUSIVE):
            return None
        return relation == ("<" if self is NumericSign.LESS else ">")


def numeric_sign(t1: ast.Term, t2: ast.Term, samples=DEFAULT_SAMPLES, seed: SeedSolution | None = None) -> NumericSign:
    """Pointwise comparison of ``t1`` and ``t2`` at each sample."""
    seed = seed or build_seed(4)
    signs = []
    with mpmath.workdps(DIGITS):
        for s in samples:
            ev = _Evaluator(seed)
            x = mpf(Fraction(s).numerator) / Fraction(s).denominator
            try:
                a, b = ev.eval(t1, x), ev.eval(t2, x)
                diff = a - b
            except NumericError:
                return NumericSign.INCONCLUSIVE
            scale = a if abs_compare(a, b) >= 0 else b
            if diff.sign == 0 or scale.sign == 0:
                return NumericSign.INCONCLUSIVE
            threshold = LeveledNumber.plain(RELATIVE_TOLERANCE) * scale
            if abs_compare(diff, threshold) < 0:
                return NumericSign.INCONCLUSIVE
            signs.append(diff.sign)
    if all(s < 0 for s in signs):
        return NumericSign.LESS
    if all(s > 0 for s in signs):
        return NumericSign.GREATER
    return NumericSign.MIXED


def difference_residual(seed: SeedSolution, count: int = 100, rng: random.Random | None = None) -> mpf:
    """Largest relative ``|E(x+1) - exp E(x)|`` over random ``x`` in ``[0, 3]``."""
    rng = rng or random.Random(0)
    worst = mpf(0)
    with mpmath.workdps(DIGITS):
        for _ in range(count):
            x = mpf(rng.random()) * 3
            ev = _Evaluator(seed)
            lhs = ev.E(0, x + 1)
            rhs = ev.E(0, x).exp()
            diff = lhs - rhs
            if diff.sign != 0:
                rel = (diff / lhs).to_mpf() if (diff / lhs).is_plain() else mpf("inf")
                worst = max(worst, abs(rel))
    return worst


def matching_error(seed: SeedSolution) -> mpf:
    """Largest relative gap between left and right derivatives at ``x = 1``."""
    left = [seed.p(1, j) for j in range(seed.degree + 1)]
    right = seed.right_derivatives_at_one()
    return max(abs(a - b) / abs(b) for a, b in zip(left, right))


__all__ = [
    "LeveledNumber", "SeedSolution", "NumericSign", "NumericError", "MonotonicityError",
    "build_seed", "evaluate", "E_value", "numeric_sign", "difference_residual", "matching_error",
    "DEFAULT_SAMPLES", "compare", "abs_compare",
]
