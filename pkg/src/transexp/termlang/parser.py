"""Recursive-descent parser for the term grammar.

::

    term  := sum
    sum   := prod (("+" | "-") prod)*
    prod  := pow (("*" | "/") pow)*
    pow   := atom ("^" "(" rational ")" | "^" integer)?
    atom  := "x" | rational | "(" term ")" | fn "(" term ")" | "-" atom
    fn    := "exp" | "log" | "L" | "E" "'"* | "E^(" natural ")"

Whitespace is ignored.  A rational literal is read greedily, so ``x/2/3``
means ``x / (2/3)``.  A leading minus on an atom is accepted as a
convenience: ``-2/3`` is a negative literal and ``-E(x)`` is ``Neg``.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .ast import BinOp, Const, EApp, Exp, LApp, Log, Neg, Pow, Term, Var


class ParseError(ValueError):
    def __init__(self, message: str, offset: int, text: str):
        self.offset = offset
        self.text = text
        super().__init__(f"syntax error at offset {offset}: {message}")


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")
_FUNCTIONS = {"exp", "log", "L", "E"}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if m.group(1) is not None:
                self.tokens.append(("num", m.group(1), m.start(1)))
            elif m.group(2) is not None:
                self.tokens.append(("name", m.group(2), m.start(2)))
            else:
                self.tokens.append(("sym", m.group(3), m.start(3)))
            pos = m.end()
        self.i = 0

    # -- token helpers -------------------------------------------------
    def _peek(self, k: int = 0):
        j = self.i + k
        return self.tokens[j] if j < len(self.tokens) else ("end", "", len(self.text))

    def _is(self, value: str, k: int = 0) -> bool:
        kind, text, _ = self._peek(k)
        return kind in ("sym", "name") and text == value

    def _expect(self, value: str) -> None:
        kind, text, pos = self._peek()
        if not self._is(value):
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)
        self.i += 1

    def _fail(self, what: str):
        kind, text, pos = self._peek()
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"expected {what}, found {found}", pos, self.text)

    # -- grammar -------------------------------------------------------
    def parse(self) -> Term:
        t = self.sum()
        if self._peek()[0] != "end":
            self._fail("an operator or end of input")
        return t

    def sum(self) -> Term:
        t = self.prod()
        while self._is("+") or self._is("-"):
            op = self._peek()[1]
            self.i += 1
            t = BinOp(op, t, self.prod())
        return t

    def prod(self) -> Term:
        t = self.power()
        while self._is("*") or self._is("/"):
            op = self._peek()[1]
            self.i += 1
            t = BinOp(op, t, self.power())
        return t

    def power(self) -> Term:
        base = self.atom()
        if not self._is("^"):
            return base
        self.i += 1
        if self._is("("):
            self.i += 1
            exponent = self.rational(signed=True)
            self._expect(")")
        else:
            exponent = Fraction(self.integer(signed=True))
        return Pow(base, exponent)

    def integer(self, signed: bool = False) -> int:
        sign = 1
        if signed and self._is("-"):
            sign = -1
            self.i += 1
        kind, text, _ = self._peek()
        if kind != "num":
            self._fail("an integer")
        self.i += 1
        return sign * int(text)

    def rational(self, signed: bool = False) -> Fraction:
        num = self.integer(signed)
        if self._is("/") and self._peek(1)[0] == "num":
            self.i += 1
            kind, text, pos = self._peek()
            den = self.integer()
            if den == 0:
                raise ParseError("zero denominator", pos, self.text)
            return Fraction(num, den)
        return Fraction(num)

    def atom(self) -> Term:
        kind, text, pos = self._peek()
        if kind == "num":
            return Const(self.rational())
        if self._is("("):
            self.i += 1
            t = self.sum()
            self._expect(")")
            return t
        if self._is("-"):
            self.i += 1
            if self._peek()[0] == "num":
                return Const(-self.rational())
            return Neg(self.power())
        if kind == "name":
            if text == "x":
                self.i += 1
                return Var()
            if text not in _FUNCTIONS:
                raise ParseError(f"unknown identifier {text!r}", pos, self.text)
            self.i += 1
            order = 0
            if text == "E":
                if self._is("^"):
                    self.i += 1
                    self._expect("(")
                    order = self.integer()
                    self._expect(")")
                while self._is("'"):
                    order += 1
                    self.i += 1
            self._expect("(")
            arg = self.sum()
            self._expect(")")
            if text == "exp":
                return Exp(arg)
            if text == "log":
                return Log(arg)
            if text == "L":
                return LApp(arg)
            return EApp(order, arg)
        self._fail("a term")


def parse(text: str) -> Term:
    """Parse ``text`` into a :class:`Term`; raises :class:`ParseError`."""
    return _Parser(text).parse()


__all__ = ["ParseError", "parse"]
