"""Syntax trees for unary terms in ``x`` built from ``E``, ``L``, ``exp`` and ``log``."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class Term:
    """Base class of all syntax-tree nodes."""

    def show(self) -> str:
        """Constructor-style rendering, e.g. ``Pow(E2app(x), 3/2)``."""
        raise NotImplementedError

    def text(self) -> str:
        """Rendering in the input grammar; ``parse(t.text()) == t``."""
        raise NotImplementedError

    def __str__(self) -> str:
        return self.text()


@dataclass(frozen=True)
class Var(Term):
    def show(self) -> str:
        return "x"

    def text(self) -> str:
        return "x"


@dataclass(frozen=True)
class Const(Term):
    value: Fraction

    def show(self) -> str:
        return str(self.value)

    def text(self) -> str:
        if self.value < 0 or self.value.denominator != 1:
            return f"({self.value})"
        return str(self.value)


@dataclass(frozen=True)
class Neg(Term):
    arg: Term

    def show(self) -> str:
        return f"Neg({self.arg.show()})"

    def text(self) -> str:
        return f"(-({self.arg.text()}))"


@dataclass(frozen=True)
class BinOp(Term):
    op: str
    left: Term
    right: Term

    _NAMES = {"+": "Add", "-": "Sub", "*": "Mul", "/": "Div"}

    def show(self) -> str:
        return f"{self._NAMES[self.op]}({self.left.show()}, {self.right.show()})"

    def text(self) -> str:
        right = self.right.text()
        if self.op == "/" and isinstance(self.right, Const) and not right.startswith("("):
            right = f"({right})"  # keep "a/(3)" from reading as a rational literal
        return f"({self.left.text()}{self.op}{right})"


@dataclass(frozen=True)
class Pow(Term):
    base: Term
    exponent: Fraction

    def show(self) -> str:
        return f"Pow({self.base.show()}, {self.exponent})"

    def text(self) -> str:
        return f"{_wrap(self.base)}^({self.exponent})"


@dataclass(frozen=True)
class Exp(Term):
    arg: Term

    def show(self) -> str:
        return f"Exp({self.arg.show()})"

    def text(self) -> str:
        return f"exp({self.arg.text()})"


@dataclass(frozen=True)
class Log(Term):
    arg: Term

    def show(self) -> str:
        return f"Log({self.arg.show()})"

    def text(self) -> str:
        return f"log({self.arg.text()})"


@dataclass(frozen=True)
class LApp(Term):
    """The compositional inverse ``L`` of ``E``."""

    arg: Term

    def show(self) -> str:
        return f"Lapp({self.arg.show()})"

    def text(self) -> str:
        return f"L({self.arg.text()})"


@dataclass(frozen=True)
class EApp(Term):
    """``E^(order)`` applied to ``arg``."""

    order: int
    arg: Term

    def show(self) -> str:
        return f"E{self.order}app({self.arg.show()})"

    def text(self) -> str:
        name = "E" + "'" * self.order if self.order <= 3 else f"E^({self.order})"
        return f"{name}({self.arg.text()})"


def _wrap(t: Term) -> str:
    """Text of ``t`` safe to use as the base of a power."""
    if isinstance(t, Pow):
        return f"({t.text()})"
    # every other node renders as an atom or inside its own parentheses
    return t.text()


def add(a: Term, b: Term) -> Term:
    return BinOp("+", a, b)


def sub(a: Term, b: Term) -> Term:
    return BinOp("-", a, b)


def mul(a: Term, b: Term) -> Term:
    return BinOp("*", a, b)


def div(a: Term, b: Term) -> Term:
    return BinOp("/", a, b)


X = Var()


def E(order: int, arg: Term = X) -> EApp:
    return EApp(order, arg)


def const(value) -> Const:
    return Const(Fraction(value))


__all__ = [
    "Term", "Var", "Const", "Neg", "BinOp", "Pow", "Exp", "Log", "LApp", "EApp",
    "add", "sub", "mul", "div", "X", "E", "const",
]
