"""Eventual sign and order of normal forms, with replayable certificates.

The sign of ``sum_P S_P exp(P)`` is the sign of its dominant class.  Two
classes ``S_1 exp(P_1)`` and ``S_2 exp(P_2)`` are ranked by the sign of

    A = (P_1 - P_2) + log|S_1| - log|S_2|.

``log|S|`` is ``log|c| + log h + o(1)`` where ``c h`` is the leading term of
``rho0(S)``, and ``log h`` is a log-E-sum up to ``o(1)``:

    log E_0(y) = E(y - 1)
    log E_d(y) = log E'(y - d + 1) - E(y - d) + o(1)      (d >= 1)

plus ``log x`` and ``log L(x)`` terms for the slow atoms.  The bounded part
is never computed, so a ranking is accepted only when the computable part of
``A`` tends to infinity; everything else is :class:`UnsupportedFragment`.
``A`` has strictly smaller exponential depth than the classes it ranks, so
the recursion terminates.

Every decision is recorded in an :class:`Analysis` tree.  :func:`replay`
re-runs the recorded ``sign_witness`` calls and recomputes each node from its
children without searching again.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from ..monomials import LX_INDEX, X_INDEX, HMonomial, TieError
from ..rewrite import ZERO, SearchExhausted, sign_witness
from ..series import BudgetExceeded, LogESum, work_budget
from . import ast
from .normal import ExpSum, NormalForm, UnsupportedFragment, normalize, offsets_context

#: series terms a single comparison may expand before giving up
WORK_LIMIT = 200_000

LARGE, BOUNDED, SMALL, NONE = "large", "bounded", "small", "zero"


class Relation(Enum):
    LESS = "<"
    EQUAL = "="
    GREATER = ">"

    @classmethod
    def of(cls, sign: int) -> "Relation":
        return {-1: cls.LESS, 0: cls.EQUAL, 1: cls.GREATER}[sign]


@dataclass
class Witness:
    """One recorded ``sign_witness`` call."""

    sum: LogESum
    coefficient: Fraction | None
    monomial: HMonomial | None

    @property
    def sign(self) -> int:
        if self.coefficient is None:
            return 0
        return 1 if self.coefficient > 0 else -1

    @classmethod
    def run(cls, s: LogESum) -> "Witness":
        try:
            w = sign_witness(s)
        except (SearchExhausted, BudgetExceeded, TieError, ValueError) as exc:
            raise UnsupportedFragment(f"no sign witness for {s.render()}: {exc}") from exc
        if not w:
            return cls(s, None, None)
        return cls(s, w.coefficient, w.monomial)


@dataclass
class Analysis:
    """Sign and size of an exponential sum, with the reasons.

    ``kind`` is ``"zero"`` (structurally zero), ``"class"`` (one class after
    ranking) or ``"logs"`` (a log-E-sum plus ``a log x + b log L(x)``).
    ``fast`` is true when the sum is large and beats every power of
    ``log x``; ``None`` when that is unknown.
    """

    kind: str
    value: ExpSum
    sign: int
    magnitude: str
    fast: bool | None = None
    exponent: ExpSum | None = None
    witness: Witness | None = None
    ranks: list = field(default_factory=list)
    merged: list = field(default_factory=list)
    growth: "Analysis | None" = None
    inner: "Analysis | None" = None
    log_x: Fraction = Fraction(0)
    log_lx: Fraction = Fraction(0)


@dataclass
class Rank:
    """Class ``winner`` beats class ``loser``: ``proof`` is ``A`` for the pair, large with the matching sign."""

    winner: ExpSum
    loser: ExpSum
    proof: Analysis


@dataclass
class Merge:
    """Exponents ``a`` and ``b`` are equal as functions (``proof`` is zero)."""

    a: ExpSum
    b: ExpSum
    proof: Analysis


def log_of_leading(w: Witness) -> tuple[LogESum, Fraction, Fraction]:
    """``log h`` for the leading monomial ``h``, up to ``o(1)``.

    Returns the log-E-sum part and the coefficients of ``log x`` and
    ``log L(x)``.
    """
    total = LogESum.zero()
    a = b = Fraction(0)
    for (d, m, v), e in w.monomial.items():
        if d == X_INDEX:
            a += e
        elif d == LX_INDEX:
            b += e
        elif d == 0:
            total = total + LogESum.E(0, m + 1, v) * e
        else:
            total = total + (LogESum.log_ep(m + d - 1, v) - LogESum.E(0, m + d, v)) * e
    return total, a, b


def _magnitude_of(h: HMonomial) -> tuple[str, bool | None]:
    c = h.cmp(HMonomial.one())
    if c == 0:
        return BOUNDED, None
    if c < 0:
        return SMALL, None
    (key, _e) = h.items()[0]
    return LARGE, key[0] != LX_INDEX


def analyze(value: ExpSum) -> Analysis:
    """Sign and size of ``value``."""
    if value.is_zero():
        return Analysis("zero", value, 0, NONE)
    classes = [[p, s, Witness.run(s)] for p, s in value.classes.items()]
    merged: list[Merge] = []
    ranks: list[Rank] = []
    live = [c for c in classes if c[2].sign != 0]
    best = 0
    i = 1
    while i < len(live):
        p1, s1, w1 = live[best]
        p2, s2, w2 = live[i]
        diff = analyze(p1 - p2)
        if diff.sign == 0:
            merged.append(Merge(p1, p2, diff))
            s = s1 + s2
            live[best] = [p1, s, Witness.run(s)]
            del live[i]
            if live[best][2].sign == 0:
                del live[best]
                best, i = 0, 1
            continue
        l1, a1, b1 = log_of_leading(w1)
        l2, a2, b2 = log_of_leading(w2)
        proof = analyze_with_logs((p1 - p2) + ExpSum.plain(l1 - l2), a1 - a2, b1 - b2)
        if proof.magnitude != LARGE:
            raise UnsupportedFragment(
                f"classes exp({p1.render()}) and exp({p2.render()}) differ by a bounded factor"
            )
        if proof.sign > 0:
            ranks.append(Rank(p1, p2, proof))
        else:
            ranks.append(Rank(p2, p1, proof))
            best = i
        i += 1
    if not live:
        return Analysis("class", value, 0, NONE, merged=merged)
    p, s, w = live[best]
    node = Analysis("class", value, w.sign, LARGE, exponent=p, witness=w, ranks=ranks, merged=merged)
    _set_size(node)
    return node


def _set_size(node: Analysis) -> None:
    """Magnitude of the dominant class ``witness * exp(exponent)``."""
    p, w = node.exponent, node.witness
    if p.is_zero():
        node.magnitude, node.fast = _magnitude_of(w.monomial)
        return
    lg, a, b = log_of_leading(w)
    growth = analyze_with_logs(p + ExpSum.plain(lg), a, b)
    node.growth = growth
    if growth.magnitude != LARGE:
        node.magnitude, node.fast = BOUNDED, None
    elif growth.sign > 0:
        node.magnitude, node.fast = LARGE, None
    else:
        node.magnitude, node.fast = SMALL, None


def analyze_with_logs(value: ExpSum, a: Fraction, b: Fraction) -> Analysis:
    """Sign and size of ``value + a log x + b log L(x)``."""
    inner = analyze(value)
    if a == 0 and b == 0:
        return inner
    node = Analysis("logs", value, inner.sign, inner.magnitude, inner.fast, inner=inner, log_x=a, log_lx=b)
    _combine_logs(node)
    return node


def _combine_logs(node: Analysis) -> None:
    inner, a, b = node.inner, node.log_x, node.log_lx
    if inner.magnitude == LARGE:
        if inner.fast:
            node.sign, node.magnitude, node.fast = inner.sign, LARGE, True
            return
        if inner.fast is None:
            raise UnsupportedFragment("cannot rank an exponential class against log(x)")
        # inner grows like a power of L(x): log x beats it, log L(x) does not
        if a != 0:
            node.sign, node.magnitude, node.fast = (1 if a > 0 else -1), LARGE, False
        else:
            node.sign, node.magnitude, node.fast = inner.sign, LARGE, False
        return
    top = a if a != 0 else b
    node.sign, node.magnitude, node.fast = (1 if top > 0 else -1), LARGE, False


def sign_of_sum(value: ExpSum) -> int:
    with work_budget(WORK_LIMIT):
        try:
            return analyze(value).sign
        except BudgetExceeded as exc:
            raise UnsupportedFragment(str(exc)) from exc


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


class ReplayMismatch(AssertionError):
    """A recorded decision did not reproduce."""


def _replay_witness(w: Witness) -> Witness:
    fresh = Witness.run(w.sum)
    if (fresh.coefficient, fresh.monomial) != (w.coefficient, w.monomial):
        raise ReplayMismatch(f"sign_witness({w.sum.render()}) changed on replay")
    return fresh


def replay(node: Analysis) -> int:
    """Re-run every recorded witness under ``node`` and return the recomputed sign."""
    if node.kind == "zero":
        if not node.value.is_zero():
            raise ReplayMismatch("recorded zero is not structurally zero")
        return 0
    if node.kind == "logs":
        copy = Analysis("logs", node.value, 0, NONE, inner=node.inner, log_x=node.log_x, log_lx=node.log_lx)
        replay(node.inner)
        _combine_logs(copy)
        if copy.sign != node.sign:
            raise ReplayMismatch("log-term combination changed on replay")
        return copy.sign
    for m in node.merged:
        if replay(m.proof) != 0:
            raise ReplayMismatch("merged exponents are not equal on replay")
    for r in node.ranks:
        if replay(r.proof) != r.proof.sign or r.proof.magnitude != LARGE:
            raise ReplayMismatch("class ranking changed on replay")
    if node.witness is None:
        if node.sign != 0:
            raise ReplayMismatch("a nonzero sign needs a witness")
        return 0
    w = _replay_witness(node.witness)
    # the dominant class must beat every other live class, directly or by a chain
    winners = {r.winner for r in node.ranks}
    losers = {r.loser for r in node.ranks}
    if node.ranks and (node.exponent in losers and node.exponent not in winners):
        raise ReplayMismatch("recorded dominant class lost a ranking")
    if node.growth is not None and replay(node.growth) != node.growth.sign:
        raise ReplayMismatch("size of the dominant class changed on replay")
    if int(w.sign) != node.sign:
        raise ReplayMismatch(f"recorded sign {node.sign} but the witness gives {int(w.sign)}")
    return node.sign


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


@dataclass
class Certificate:
    """The analyses behind a verdict: the difference numerator and the two denominators."""

    difference: Analysis
    denominators: tuple[Analysis | None, Analysis | None]
    structural_zero: bool = False

    def relation_sign(self) -> int:
        s = self.difference.sign
        for d in self.denominators:
            if d is not None:
                s *= d.sign
        return s

    def replay(self) -> Relation:
        if self.structural_zero:
            if not self.difference.value.is_zero():
                raise ReplayMismatch("difference is not structurally zero")
            return Relation.EQUAL
        s = replay(self.difference)
        for d in self.denominators:
            if d is not None:
                s *= replay(d)
        return Relation.of(s)

    def witnesses(self) -> list[Witness]:
        out: list[Witness] = []

        def walk(node: Analysis | None) -> None:
            if node is None:
                return
            for m in node.merged:
                walk(m.proof)
            for r in node.ranks:
                walk(r.proof)
            walk(node.growth)
            walk(node.inner)
            if node.witness is not None:
                out.append(node.witness)

        walk(self.difference)
        for d in self.denominators:
            walk(d)
        return out


@dataclass
class CompareVerdict:
    relation: Relation
    certificate: Certificate
    normal_forms: tuple[NormalForm, NormalForm]

    def __str__(self) -> str:
        return self.relation.value


def _den_analysis(nf: NormalForm) -> Analysis | None:
    if not nf.has_denominator():
        return None
    node = analyze(nf.den)
    if node.sign == 0:
        raise UnsupportedFragment("denominator vanishes")
    return node


def compare_nf(n1: NormalForm, n2: NormalForm) -> CompareVerdict:
    diff = n1.num * n2.den - n2.num * n1.den
    with work_budget(WORK_LIMIT):
        try:
            if diff.is_zero():
                cert = Certificate(Analysis("zero", diff, 0, NONE), (None, None), structural_zero=True)
                return CompareVerdict(Relation.EQUAL, cert, (n1, n2))
            cert = Certificate(analyze(diff), (_den_analysis(n1), _den_analysis(n2)))
        except BudgetExceeded as exc:
            raise UnsupportedFragment(f"work budget exhausted: {exc}") from exc
    return CompareVerdict(Relation.of(cert.relation_sign()), cert, (n1, n2))


def compare(t1: ast.Term, t2: ast.Term) -> CompareVerdict:
    """Eventual order of two terms at ``+infinity``."""
    return compare_nf(normalize(t1), normalize(t2))


def term_sign(t: ast.Term) -> int:
    nf = normalize(t)
    with work_budget(WORK_LIMIT):
        try:
            s = analyze(nf.num).sign
            d = _den_analysis(nf)
        except BudgetExceeded as exc:
            raise UnsupportedFragment(f"work budget exhausted: {exc}") from exc
    return s * (d.sign if d is not None else 1)


@dataclass
class Leading:
    coefficient: Fraction
    monomial: HMonomial
    exponent: ExpSum
    level: int
    context: object = None

    def render(self) -> str:
        if self.coefficient == 0:
            return "0"
        sign = "+" if self.coefficient > 0 else "-"
        text = f"{sign}{abs(self.coefficient)}"
        if not self.monomial.is_one() or self.exponent.is_zero():
            text += f" · {self.monomial.render(self.context, sep=' ')}"
        if not self.exponent.is_zero():
            text += f" · exp({self.exponent.render(self.context)})"
        return text


def leading(t: ast.Term) -> Leading:
    """Leading coefficient and monomial of ``rho0`` of the normalized term."""
    nf = normalize(t)
    ctx = nf.context()
    if nf.is_zero():
        return Leading(Fraction(0), HMonomial.one(), ExpSum.zero(), 0, ctx)
    with work_budget(WORK_LIMIT):
        try:
            top = analyze(nf.num)
            bottom = analyze(nf.den)
        except BudgetExceeded as exc:
            raise UnsupportedFragment(f"work budget exhausted: {exc}") from exc
    if top.witness is None:
        return Leading(Fraction(0), HMonomial.one(), ExpSum.zero(), 0, ctx)
    coef = top.witness.coefficient / bottom.witness.coefficient
    mono = top.witness.monomial / bottom.witness.monomial
    exponent = top.exponent - bottom.exponent
    variables = set(ctx.variables) | mono.variables()
    ctx = offsets_context({v for v in variables})
    return Leading(coef, mono, exponent, exponent.depth() + (0 if exponent.is_zero() else 1), ctx)


__all__ = [
    "Relation", "Witness", "Analysis", "Certificate", "CompareVerdict", "Leading",
    "analyze", "compare", "compare_nf", "leading", "replay", "sign_of_sum", "term_sign",
    "UnsupportedFragment", "WORK_LIMIT",
]
