"""Finite log-E-sums and lazily expanded H-series.

:class:`LogESum` is an element of the group ring over ``G * Lambda``: a finite map
from ``(GMonomial, LogMonomial)`` pairs to nonzero rationals.

:class:`Series` is a lazily expanded sum over :class:`HMonomial` whose terms are
produced in strictly decreasing order.  Series are built from a small closed set
of expansion nodes -- finite sums, scalings, products, binomial tails
``sum_k binom(a, k) u^k`` and decreasing merges of (possibly infinitely many)
series -- so every expansion is exact.  Each node memoizes the terms it has
produced; a node is shared freely and is safe to read from several threads.
"""

from __future__ import annotations

import heapq
import itertools
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping

from .algebra import DEFAULT_CONTEXT, VarContext, as_rational, binom
from .monomials import (
    SLOW_INDICES,
    GMonomial,
    H_SORT_KEY,
    HMonomial,
    LogMonomial,
)

Term = tuple[HMonomial, Fraction]
Pair = tuple[GMonomial, LogMonomial]


# ---------------------------------------------------------------------------
# Finite group-ring elements
# ---------------------------------------------------------------------------


class LogESum:
    """Finite sum ``sum c * g * ell`` with exact rational coefficients."""

    __slots__ = ("terms", "context", "_hash")

    def __init__(self, terms: Mapping[Pair, Fraction] | Iterable[tuple[Pair, Fraction]] = (), context: VarContext | None = None):
        merged: dict[Pair, Fraction] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for key, c in items:
            c = as_rational(c)
            if c:
                merged[key] = merged.get(key, Fraction(0)) + c
        self.terms: dict[Pair, Fraction] = {k: c for k, c in merged.items() if c != 0}
        self.context = context
        self._hash = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls) -> "LogESum":
        return cls()

    @classmethod
    def constant(cls, c) -> "LogESum":
        return cls({(GMonomial.one(), LogMonomial.one()): as_rational(c)})

    @classmethod
    def monomial(cls, g: GMonomial | None = None, c=1, ell: LogMonomial | None = None) -> "LogESum":
        return cls({(g or GMonomial.one(), ell or LogMonomial.one()): as_rational(c)})

    @classmethod
    def E(cls, d: int = 0, shift: int = 0, var=0, exp=1) -> "LogESum":
        """The single generator ``E^(d)(var - shift)^exp``."""
        return cls.monomial(GMonomial.gen(d, shift, var, exp))

    @classmethod
    def log_ep(cls, shift: int = 0, var=0, exp=1) -> "LogESum":
        """The single generator ``log E'(var - shift)^exp``."""
        return cls.monomial(None, 1, LogMonomial.gen(shift, var, exp))

    # -- ring structure ---------------------------------------------------
    def _coerce(self, other) -> "LogESum":
        if isinstance(other, LogESum):
            return other
        if isinstance(other, (int, Fraction)):
            return LogESum.constant(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, Fraction(0)) + c
        return LogESum(out, self.context or other.context)

    __radd__ = __add__

    def __neg__(self) -> "LogESum":
        return LogESum({k: -c for k, c in self.terms.items()}, self.context)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return LogESum({k: c * other for k, c in self.terms.items()}, self.context)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Pair, Fraction] = {}
        for (g1, l1), c1 in self.terms.items():
            for (g2, l2), c2 in other.terms.items():
                key = (g1 * g2, l1 * l2)
                out[key] = out.get(key, Fraction(0)) + c1 * c2
        return LogESum(out, self.context or other.context)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "LogESum":
        if len(self.terms) == 1:
            ((g, ell), c), = self.terms.items()
            n = as_rational(n)
            if n.denominator != 1 and c != 1:
                raise ValueError("rational powers need a unit coefficient")
            coef = c ** int(n) if n.denominator == 1 else Fraction(1)
            return LogESum({(g ** n, ell ** n): coef}, self.context)
        if not isinstance(n, int) or n < 0:
            raise ValueError("only natural powers of sums are defined")
        result = LogESum.constant(1)
        for _ in range(n):
            result = result * self
        return result

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / as_rational(other))
        if isinstance(other, LogESum) and len(other.terms) == 1:
            ((g, ell), c), = other.terms.items()
            return self * LogESum({(g.inverse(), ell.inverse()): 1 / c})
        raise ValueError("division is only defined by a single monomial")

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = LogESum.constant(other)
        return isinstance(other, LogESum) and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    # -- inspection -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def shifts(self) -> set[int]:
        out: set[int] = set()
        for g, ell in self.terms:
            out |= g.shifts() | ell.shifts()
        return out

    def variables(self) -> set:
        out: set = set()
        for g, ell in self.terms:
            out |= g.variables() | ell.variables()
        return out

    def has_logs(self) -> bool:
        return any(not ell.is_one() for _g, ell in self.terms)

    def has_slow(self) -> bool:
        return any(g.has_slow() for g, _ell in self.terms)

    def integer_exponents(self) -> bool:
        return all(
            e.denominator == 1
            for g, ell in self.terms
            for _k, e in g.items() + ell.items()
        )

    def by_log_part(self) -> dict[LogMonomial, dict[GMonomial, Fraction]]:
        groups: dict[LogMonomial, dict[GMonomial, Fraction]] = {}
        for (g, ell), c in self.terms.items():
            groups.setdefault(ell, {})[g] = c
        return groups

    def render(self, context: VarContext | None = None) -> str:
        if not self.terms:
            return "0"
        ctx = context or self.context
        pieces = []
        for (g, ell), c in sorted(self.terms.items(), key=lambda kv: (repr(kv[0][0].items()), repr(kv[0][1].items()))):
            factors = [f for f in (g.render(ctx), ell.render(ctx)) if f != "1"]
            body = "*".join(factors)
            if not body:
                pieces.append(str(c))
            elif c == 1:
                pieces.append(body)
            elif c == -1:
                pieces.append(f"-{body}")
            else:
                pieces.append(f"{c}*{body}")
        text = " + ".join(pieces)
        return text.replace("+ -", "- ")

    def __repr__(self) -> str:
        return f"LogESum({self.render()})"


# ---------------------------------------------------------------------------
# Lazy series
# ---------------------------------------------------------------------------


class BudgetExceeded(RuntimeError):
    """A lazy expansion produced more terms than the active work budget allows."""


_budget = threading.local()


def _charge() -> None:
    limit = getattr(_budget, "limit", None)
    if limit is None:
        return
    _budget.used += 1
    if _budget.used > limit:
        raise BudgetExceeded(f"expansion exceeded {limit} generated terms")


class work_budget:
    """Context manager bounding the number of terms generated in this thread.

    Nodes interrupted by :class:`BudgetExceeded` keep their computed prefix and
    resume correctly on the next request.
    """

    def __init__(self, limit: int | None):
        self.limit = limit

    def __enter__(self) -> "work_budget":
        self._saved = (getattr(_budget, "limit", None), getattr(_budget, "used", 0))
        if self.limit is not None:
            _budget.limit = self.limit
            _budget.used = 0
        return self

    def __exit__(self, *exc) -> None:
        _budget.limit, _budget.used = self._saved


class _Desc:
    """Heap wrapper ordering monomials from largest to smallest."""

    __slots__ = ("m",)

    def __init__(self, m: HMonomial):
        self.m = m

    def __lt__(self, other: "_Desc") -> bool:
        return self.m.cmp(other.m) > 0


class Series:
    """A lazily expanded H-series; terms come out strictly decreasing."""

    #: set by the debug wrapper in tests to verify emission order on every node
    check_order = False

    def __init__(self) -> None:
        self._terms: list[Term] = []
        self._source: Iterator[Term] | None = None
        self._done = False
        self._lock = threading.RLock()

    # subclasses implement _generate
    def _generate(self) -> Iterator[Term]:
        raise NotImplementedError

    def term(self, i: int) -> Term | None:
        if i < len(self._terms):
            return self._terms[i]
        with self._lock:
            if self._source is None and not self._done:
                # (re)start; after an interrupted expansion, replay past the stored prefix
                self._source = self._generate()
                for _ in range(len(self._terms)):
                    next(self._source)
            while len(self._terms) <= i and not self._done:
                try:
                    m, c = next(self._source)
                except StopIteration:
                    self._done = True
                    self._source = None
                    break
                except BaseException:
                    self._source = None
                    raise
                if Series.check_order and self._terms and not (self._terms[-1][0].cmp(m) > 0):
                    raise AssertionError(
                        f"emission order violated: {self._terms[-1][0].render()} then {m.render()}"
                    )
                self._terms.append((m, c))
                _charge()
            return self._terms[i] if i < len(self._terms) else None

    def __iter__(self) -> Iterator[Term]:
        i = 0
        while True:
            t = self.term(i)
            if t is None:
                return
            yield t
            i += 1

    def head(self) -> HMonomial | None:
        t = self.term(0)
        return None if t is None else t[0]

    def is_exhausted_after(self, n: int) -> bool:
        return self.term(n) is None

    # operator sugar
    def __add__(self, other: "Series") -> "Series":
        return add(self, other)

    def __neg__(self) -> "Series":
        return scale(self, -1)

    def __sub__(self, other: "Series") -> "Series":
        return add(self, scale(other, -1))

    def __mul__(self, other) -> "Series":
        if isinstance(other, (int, Fraction)):
            return scale(self, other)
        if isinstance(other, HMonomial):
            return times_monomial(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    # derivation support (see deriv.d_hseries); ``level`` is the shift of E_d, d >= 1
    def derivative(self, level: int) -> "Series":
        raise NotImplementedError(f"{type(self).__name__} has no structural derivative")

    @staticmethod
    def finite(terms: Mapping[HMonomial, Fraction] | Iterable[Term]) -> "FiniteSeries":
        return FiniteSeries(terms)

    @staticmethod
    def zero() -> "FiniteSeries":
        return FiniteSeries({})

    @staticmethod
    def one() -> "FiniteSeries":
        return FiniteSeries({HMonomial.one(): Fraction(1)})


class FiniteSeries(Series):
    def __init__(self, terms: Mapping[HMonomial, Fraction] | Iterable[Term]):
        super().__init__()
        merged: dict[HMonomial, Fraction] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for m, c in items:
            merged[m] = merged.get(m, Fraction(0)) + as_rational(c)
        self.data = {m: c for m, c in merged.items() if c != 0}
        self._terms = sorted(self.data.items(), key=lambda mc: H_SORT_KEY(mc[0]), reverse=True)
        self._done = True

    def _generate(self) -> Iterator[Term]:
        return iter(())

    def derivative(self, level: int) -> "Series":
        out: dict[HMonomial, Fraction] = {}
        for m, c in self.data.items():
            for dm, dc in derive_monomial(m, level).items():
                out[dm] = out.get(dm, Fraction(0)) + c * dc
        return FiniteSeries(out)


class ScaledSeries(Series):
    def __init__(self, base: Series, factor: Fraction = Fraction(1), monomial: HMonomial | None = None):
        super().__init__()
        self.base, self.factor, self.monomial = base, as_rational(factor), monomial

    def _generate(self) -> Iterator[Term]:
        if self.factor == 0:
            return
        for m, c in self.base:
            yield (m if self.monomial is None else m * self.monomial), c * self.factor

    def derivative(self, level: int) -> Series:
        inner = scale(self.base.derivative(level), self.factor)
        if self.monomial is None:
            return inner
        return add(
            times_monomial(inner, self.monomial),
            mul(scale(self.base, self.factor), FiniteSeries(derive_monomial(self.monomial, level))),
        )


class AddSeries(Series):
    def __init__(self, parts: list[Series]):
        super().__init__()
        self.parts = parts

    def _generate(self) -> Iterator[Term]:
        heap: list = []
        pos = [0] * len(self.parts)
        for idx, part in enumerate(self.parts):
            t = part.term(0)
            if t is not None:
                heapq.heappush(heap, (_Desc(t[0]), idx))
        while heap:
            top, idx = heapq.heappop(heap)
            m = top.m
            total = Fraction(0)
            group = [idx]
            while heap and heap[0][0].m == m:
                group.append(heapq.heappop(heap)[1])
            for g in group:
                total += self.parts[g].term(pos[g])[1]
                pos[g] += 1
                nxt = self.parts[g].term(pos[g])
                if nxt is not None:
                    heapq.heappush(heap, (_Desc(nxt[0]), g))
            if total != 0:
                yield m, total

    def derivative(self, level: int) -> Series:
        return AddSeries([p.derivative(level) for p in self.parts])


class MulSeries(Series):
    """Cauchy product of two decreasing series via a best-first frontier."""

    def __init__(self, a: Series, b: Series):
        super().__init__()
        self.a, self.b = a, b

    def _generate(self) -> Iterator[Term]:
        a, b = self.a, self.b
        ta, tb = a.term(0), b.term(0)
        if ta is None or tb is None:
            return
        heap = [(_Desc(ta[0] * tb[0]), 0, 0)]
        seen = {(0, 0)}
        while heap:
            top, i, j = heapq.heappop(heap)
            m = top.m
            group = [(i, j)]
            while heap and heap[0][0].m == m:
                _, i2, j2 = heapq.heappop(heap)
                group.append((i2, j2))
            total = Fraction(0)
            for i, j in group:
                total += a.term(i)[1] * b.term(j)[1]
                for ni, nj in ((i + 1, j), (i, j + 1)):
                    if (ni, nj) in seen:
                        continue
                    na, nb = a.term(ni), b.term(nj)
                    if na is None or nb is None:
                        continue
                    seen.add((ni, nj))
                    heapq.heappush(heap, (_Desc(na[0] * nb[0]), ni, nj))
            if total != 0:
                yield m, total

    def derivative(self, level: int) -> Series:
        return add(mul(self.a.derivative(level), self.b), mul(self.a, self.b.derivative(level)))


class MergeSeries(Series):
    """Sum of a (possibly infinite) sequence of series with non-increasing heads.

    ``parts`` yields ``(head, series)`` pairs; ``head`` must equal the leading
    monomial of ``series`` (or ``None`` for an empty series).  A part is only
    expanded once the running output has reached its head.
    """

    def __init__(self, parts: Callable[[], Iterator[tuple[HMonomial | None, Series]]], derivative: Callable[[int], Series] | None = None):
        super().__init__()
        self._parts = parts
        self._derivative = derivative

    def _generate(self) -> Iterator[Term]:
        source = self._parts()
        heap: list = []
        active: list[Series] = []
        pos: list[int] = []
        counter = itertools.count()
        pending = None
        last_head = None

        def pull():
            nonlocal last_head
            for head, series in source:
                if head is None:
                    continue
                if last_head is not None and head.cmp(last_head) > 0:
                    raise AssertionError(
                        f"merge heads must not increase: {last_head.render()} then {head.render()}"
                    )
                last_head = head
                return head, series
            return None

        pending = pull()
        while True:
            while pending is not None and (not heap or pending[0].cmp(heap[0][0].m) >= 0):
                head, series = pending
                idx = len(active)
                active.append(series)
                pos.append(0)
                heapq.heappush(heap, (_Desc(head), next(counter), idx))
                pending = pull()
            if not heap:
                return
            top, _, idx = heapq.heappop(heap)
            m = top.m
            group = [idx]
            while heap and heap[0][0].m == m:
                group.append(heapq.heappop(heap)[2])
            total = Fraction(0)
            for g in group:
                total += active[g].term(pos[g])[1]
                pos[g] += 1
                nxt = active[g].term(pos[g])
                if nxt is not None:
                    heapq.heappush(heap, (_Desc(nxt[0]), next(counter), g))
            if total != 0:
                yield m, total

    def derivative(self, level: int) -> Series:
        if self._derivative is None:
            return super().derivative(level)
        return self._derivative(level)


class BinomialTail(Series):
    """``sum_k binom(a, k) u^k`` for a series ``u`` whose leading monomial is below 1."""

    def __init__(self, a, u: Series):
        super().__init__()
        self.a = as_rational(a)
        self.u = u
        head = u.head()
        if head is not None and not (head.cmp(HMonomial.one()) < 0):
            raise ValueError(f"binomial tail needs an infinitesimal argument, got leading {head.render()}")
        self._powers: list[Series] = [Series.one()]
        self._merge = MergeSeries(self._parts)

    def power(self, k: int) -> Series:
        while len(self._powers) <= k:
            self._powers.append(mul(self._powers[-1], self.u))
        return self._powers[k]

    def _parts(self) -> Iterator[tuple[HMonomial | None, Series]]:
        lead = self.u.term(0)
        if lead is None:
            yield HMonomial.one(), Series.one()
            return
        lead_m = lead[0]
        for k in itertools.count():
            coef = binom(self.a, k)
            if coef == 0:
                if self.a.denominator == 1 and self.a >= 0 and k > self.a:
                    return
                continue
            yield lead_m ** k, scale(self.power(k), coef)

    def _generate(self) -> Iterator[Term]:
        return iter(self._merge)

    def derivative(self, level: int) -> Series:
        if self.a == 0:
            return Series.zero()
        return scale(mul(BinomialTail(self.a - 1, self.u), self.u.derivative(level)), self.a)


class MappedSeries(Series):
    """Apply an order-preserving monomial map (e.g. re-indexing variables/shifts)."""

    def __init__(self, base: Series, fn: Callable[[HMonomial], HMonomial], level_shift: int = 0):
        super().__init__()
        self.base, self.fn, self.level_shift = base, fn, level_shift

    def _generate(self) -> Iterator[Term]:
        for m, c in self.base:
            yield self.fn(m), c

    def derivative(self, level: int) -> Series:
        return MappedSeries(self.base.derivative(level - self.level_shift), self.fn, self.level_shift)


# -- combinators -------------------------------------------------------------


def add(s1: Series, s2: Series) -> Series:
    """Coefficientwise sum; cancellations are dropped as they are met."""
    return AddSeries([s1, s2])


def add_all(parts: Iterable[Series]) -> Series:
    parts = list(parts)
    if not parts:
        return Series.zero()
    if len(parts) == 1:
        return parts[0]
    return AddSeries(parts)


def mul(s1: Series, s2: Series) -> Series:
    """Product of two series."""
    if isinstance(s1, FiniteSeries) and len(s1.data) == 1:
        (m, c), = s1.data.items()
        return ScaledSeries(s2, c, m)
    if isinstance(s2, FiniteSeries) and len(s2.data) == 1:
        (m, c), = s2.data.items()
        return ScaledSeries(s1, c, m)
    return MulSeries(s1, s2)


def mul_all(parts: Iterable[Series]) -> Series:
    result: Series | None = None
    for p in parts:
        result = p if result is None else mul(result, p)
    return result if result is not None else Series.one()


def scale(s: Series, c) -> Series:
    c = as_rational(c)
    if c == 1:
        return s
    return ScaledSeries(s, c)


def times_monomial(s: Series, m: HMonomial, c=1) -> Series:
    return ScaledSeries(s, as_rational(c), m)


def leading_term(s: Series) -> tuple[Fraction, HMonomial] | None:
    """The first emitted ``(coefficient, monomial)`` or ``None`` for an exhausted empty series."""
    t = s.term(0)
    if t is None:
        return None
    return t[1], t[0]


def truncate(s: Series, n: int) -> dict[HMonomial, Fraction]:
    """The first ``n`` terms as a finite map (fewer when the series is shorter)."""
    if n < 0:
        raise ValueError("truncation order must be >= 0")
    out: dict[HMonomial, Fraction] = {}
    for i in range(n):
        t = s.term(i)
        if t is None:
            break
        out[t[0]] = t[1]
    return out


def render_terms(terms: Mapping[HMonomial, Fraction] | Iterable[Term], context: VarContext | None = None) -> str:
    items = list(terms.items()) if isinstance(terms, Mapping) else list(terms)
    items.sort(key=lambda mc: H_SORT_KEY(mc[0]), reverse=True)
    if not items:
        return "0"
    out = []
    for m, c in items:
        body = m.render(context)
        if body == "1":
            out.append(f"{c}")
        elif c == 1:
            out.append(body)
        elif c == -1:
            out.append(f"-{body}")
        else:
            out.append(f"{c}*{body}")
    return " + ".join(out).replace("+ -", "- ")


# ---------------------------------------------------------------------------
# Derivation on H monomials
# ---------------------------------------------------------------------------


def derive_monomial(m: HMonomial, level: int) -> dict[HMonomial, Fraction]:
    """``d/dx`` of an H monomial whose ``E_d`` (``d >= 1``) factors sit at ``level``.

    Uses ``E_d' = E_d E_{d+1}``; for ``E_0(v - s)`` above the level, the factor
    ``E_1(v - s)`` is rewritten as ``E_0(v-s-1) ... E_0(v-level) E_1(v-level)``.
    """
    out: dict[HMonomial, Fraction] = {}
    for (d, shift, v), e in m.items():
        if d in SLOW_INDICES:
            if d == SLOW_INDICES[0]:
                factor = HMonomial.gen(d, 0, v, -1)
            else:
                raise ValueError("the derivative of L(x) leaves the supported fragment")
        elif d == 0:
            if shift > level:
                raise ValueError(f"E_0 at shift {shift} lies below level {level}")
            parts = {(1, level, v): Fraction(1)}
            for s in range(shift + 1, level + 1):
                parts[(0, s, v)] = Fraction(1)
            factor = HMonomial(parts)
        else:
            if shift != level:
                raise ValueError(f"E_{d} at shift {shift} does not sit at level {level}")
            factor = HMonomial.gen(d + 1, level, v)
        term = m * factor
        out[term] = out.get(term, Fraction(0)) + e
    return {k: c for k, c in out.items() if c != 0}


# ---------------------------------------------------------------------------
# Summability contract
# ---------------------------------------------------------------------------


@dataclass
class CosetConstraint:
    """Finitely many terms per ``(E_0, E_1)`` profile.

    In a decreasing stream the terms of one profile are contiguous, so the
    witness records how many terms each profile contributed within the first
    ``limit`` terms and checks that no profile re-appears after being left.
    """

    selector: Callable[[HMonomial], tuple] = field(default=HMonomial.profile)
    budget: int = 200

    def witness(self, s: Series, limit: int | None = None) -> list[tuple[tuple, int]]:
        limit = self.budget if limit is None else limit
        runs: list[tuple[tuple, int]] = []
        closed: set = set()
        for i in range(limit):
            t = s.term(i)
            if t is None:
                break
            key = self.selector(t[0])
            if runs and runs[-1][0] == key:
                runs[-1] = (key, runs[-1][1] + 1)
                continue
            if key in closed:
                raise AssertionError(f"profile {key} re-appeared after being closed")
            if runs:
                closed.add(runs[-1][0])
            runs.append((key, 1))
        return runs


__all__ = [
    "BudgetExceeded",
    "work_budget",
    "LogESum",
    "Series",
    "FiniteSeries",
    "ScaledSeries",
    "AddSeries",
    "MulSeries",
    "MergeSeries",
    "BinomialTail",
    "MappedSeries",
    "CosetConstraint",
    "add",
    "add_all",
    "mul",
    "mul_all",
    "scale",
    "times_monomial",
    "leading_term",
    "truncate",
    "render_terms",
    "derive_monomial",
    "DEFAULT_CONTEXT",
]
