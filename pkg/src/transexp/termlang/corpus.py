"""Reading comparison corpora: lines ``term1 <op> term2`` with ``op`` in ``<``, ``=``, ``>``.

``#`` starts a comment, blank lines are skipped, and a trailing ``!oracle``
exempts the line from the numeric smoke check.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

_LINE = re.compile(r"^(?P<left>[^<>=]+)(?P<op>[<>=])(?P<right>[^<>=]+)$")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusLine:
    lineno: int
    left: str
    op: str
    right: str
    oracle_exempt: bool = False

    def text(self) -> str:
        suffix = "  !oracle" if self.oracle_exempt else ""
        return f"{self.left} {self.op} {self.right}{suffix}"


def parse_corpus(text: str) -> list[CorpusLine]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        exempt = False
        if line.endswith("!oracle"):
            exempt = True
            line = line[: -len("!oracle")].strip()
        m = _LINE.match(line)
        if m is None:
            raise CorpusError(f"line {lineno}: expected 'term1 <op> term2', got {raw.strip()!r}")
        out.append(CorpusLine(lineno, m["left"].strip(), m["op"], m["right"].strip(), exempt))
    return out


def read_corpus(path: str | Path) -> list[CorpusLine]:
    return parse_corpus(Path(path).read_text(encoding="utf-8"))


__all__ = ["CorpusError", "CorpusLine", "parse_corpus", "read_corpus"]
