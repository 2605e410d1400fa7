"""Exact rational arithmetic helpers, generalized binomials and variable contexts.

Coefficients and exponents throughout the package are :class:`fractions.Fraction`
values.  Variables are identified by sortable numeric ids whose ascending order
is the *decreasing* order of the variables themselves, so the largest variable
always sorts first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

Rational = Fraction
RationalLike = Union[int, Fraction, str]


def as_rational(value: RationalLike) -> Fraction:
    """Coerce ``value`` to a :class:`Fraction`, rejecting floats."""
    if isinstance(value, float):
        raise TypeError("floating-point values are not exact; pass a Fraction or a string")
    return Fraction(value)


def binom(a: RationalLike, k: int) -> Fraction:
    """Generalized binomial coefficient ``a (a-1) ... (a-k+1) / k!``."""
    if k < 0:
        raise ValueError(f"binom requires k >= 0, got {k}")
    a = as_rational(a)
    result = Fraction(1)
    for i in range(k):
        result = result * (a - i) / (i + 1)
    return result


def binom_derivative_coeffs(n: int) -> list[Fraction]:
    """Coefficients ``c_j`` with ``d/dX binom(X, n) = sum_j c_j binom(X, j)``.

    The list has length ``n`` and ``c_j = (-1)**(n-j-1) / (n-j)``.
    """
    if n < 1:
        raise ValueError("binom_derivative_coeffs needs n >= 1; the derivative of binom(X, 0) is 0")
    return [Fraction((-1) ** (n - j - 1), n - j) for j in range(n)]


VarId = Union[int, Fraction]


@dataclass(frozen=True)
class VarContext:
    """An ordered, finite set of variables together with their closeness data.

    ``variables`` is sorted so that ``variables[0]`` is the largest variable.
    ``closeness`` maps a pair ``(x, y)`` with ``x > y`` to ``r(x, y)`` in
    ``(0, 1)``, meaning ``y = x - r(x, y)``.  An occurrence of a variable with
    integer shift ``m`` stands for ``x - m``.

    Two flavours exist: *named* contexts (``x``, ``y``, ... with explicit
    closeness) and *offset* contexts, where every variable is ``x + q`` for a
    rational ``q`` in ``[0, 1)``; the id of ``x + q`` is ``-q``.
    """

    variables: tuple[VarId, ...]
    names: tuple[str, ...]
    closeness: tuple[tuple[tuple[VarId, VarId], Fraction], ...] = ()
    offsets: tuple[Fraction, ...] | None = None
    _index: Mapping[VarId, int] = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.variables) != len(self.names):
            raise ValueError("one name per variable is required")
        if list(self.variables) != sorted(set(self.variables)):
            raise ValueError("variable ids must be strictly increasing (largest variable first)")
        for (x, y), r in self.closeness:
            if not (x < y):
                raise ValueError(f"closeness pair {x!r}, {y!r} must list the larger variable first")
            if not (0 < r < 1):
                raise ValueError(f"closeness r({x!r}, {y!r}) = {r} must lie in (0, 1)")
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.variables)})

    @classmethod
    def named(cls, names: Iterable[str], closeness: Mapping[tuple[str, str], RationalLike] | None = None) -> "VarContext":
        """Build a context from names listed from largest to smallest."""
        names = tuple(names)
        ids = tuple(range(len(names)))
        by_name = {n: i for i, n in enumerate(names)}
        pairs = []
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                key = (names[i], names[j])
                if closeness is not None and key in closeness:
                    r = as_rational(closeness[key])
                else:
                    # A neutral default keeps the invariant; callers that care pass r explicitly.
                    r = Fraction(1, 2)
                pairs.append(((by_name[names[i]], by_name[names[j]]), r))
        return cls(ids, names, tuple(pairs))

    @classmethod
    def from_offsets(cls, offsets: Iterable[RationalLike]) -> "VarContext":
        """Variables ``x + q`` for the given rational offsets ``q`` in ``[0, 1)``."""
        qs = sorted({as_rational(q) for q in offsets}, reverse=True)
        for q in qs:
            if not (0 <= q < 1):
                raise ValueError(f"offset {q} must lie in [0, 1)")
        ids = tuple(-q for q in qs)
        names = tuple(format_argument("x", q) for q in qs)
        pairs = []
        for i in range(len(qs)):
            for j in range(i + 1, len(qs)):
                pairs.append(((ids[i], ids[j]), qs[i] - qs[j]))
        return cls(ids, names, tuple(pairs), offsets=tuple(qs))

    def __contains__(self, var: VarId) -> bool:
        return var in self._index

    def __iter__(self) -> Iterator[VarId]:
        return iter(self.variables)

    def __len__(self) -> int:
        return len(self.variables)

    def r(self, x: VarId, y: VarId) -> Fraction:
        for pair, value in self.closeness:
            if pair == (x, y):
                return value
        raise KeyError((x, y))

    def name(self, var: VarId) -> str:
        return self.names[self._index[var]]

    def argument(self, var: VarId, shift: int) -> str:
        """Render the argument ``var - shift``, e.g. ``x-1`` or ``x+1/2``."""
        if self.offsets is not None:
            return format_argument("x", -Fraction(var) - shift)
        return format_argument(self.name(var), -shift)


def format_argument(base: str, offset: Fraction | int) -> str:
    offset = Fraction(offset)
    if offset == 0:
        return base
    sign = "+" if offset > 0 else "-"
    return f"{base}{sign}{abs(offset)}"


DEFAULT_CONTEXT = VarContext.named(["x"])


def context_for(variables: Iterable[VarId]) -> VarContext:
    """A best-effort display context for a set of variable ids."""
    ids = sorted(set(variables))
    if all(isinstance(v, Fraction) and v <= 0 for v in ids):
        return VarContext.from_offsets([-v for v in ids])
    if all(isinstance(v, int) for v in ids):
        count = max(ids) + 1 if ids else 1
        base = ["x", "y", "z", "w"]
        names = base[:count] if count <= len(base) else [f"x{i + 1}" for i in range(count)]
        return VarContext.named(names)
    raise ValueError(f"cannot mix named and offset variables: {ids}")
