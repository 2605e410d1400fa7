"""The ``tx`` command line tool.

    tx cmp T1 T2            prints <, = or >   (exit 2 and "unsupported" otherwise)
    tx sign T               prints +, - or 0
    tx leading T            leading term of the normal form
    tx expand T --order N   first N terms of the expansion of each exponential class
    tx check --corpus FILE [--oracle]

``--json`` (before or after the subcommand) prints
``{verdict, certificate, normal_forms}`` instead of plain text.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from ..monomials import H_SORT_KEY
from ..rewrite import rho0
from ..series import BinomialTail, BudgetExceeded, LogESum, Series, scale, times_monomial, truncate, work_budget
from .compare import (
    WORK_LIMIT,
    Analysis,
    Certificate,
    Relation,
    compare,
    leading,
    term_sign,
)
from .corpus import read_corpus
from .normal import DivisionByZeroTerm, NormalForm, UnsupportedFragment, normalize
from .parser import ParseError, parse

EXIT_OK, EXIT_FAIL, EXIT_UNSUPPORTED = 0, 1, 2


# ---------------------------------------------------------------------------
# JSON encodings
# ---------------------------------------------------------------------------


def _witness_json(w, ctx) -> dict:
    if w is None:
        return None
    return {
        "sum": w.sum.render(ctx),
        "coefficient": None if w.coefficient is None else str(w.coefficient),
        "monomial": None if w.monomial is None else w.monomial.render(ctx, sep=" "),
    }


def analysis_json(node: Analysis | None, ctx=None) -> dict | None:
    if node is None:
        return None
    out = {
        "kind": node.kind,
        "value": node.value.render(ctx),
        "sign": node.sign,
        "magnitude": node.magnitude,
    }
    if node.kind == "logs":
        out["log_x"] = str(node.log_x)
        out["log_Lx"] = str(node.log_lx)
        out["inner"] = analysis_json(node.inner, ctx)
        return out
    if node.exponent is not None:
        out["exponent"] = node.exponent.render(ctx)
    out["witness"] = _witness_json(node.witness, ctx)
    if node.merged:
        out["merged"] = [{"a": m.a.render(ctx), "b": m.b.render(ctx), "proof": analysis_json(m.proof, ctx)} for m in node.merged]
    if node.ranks:
        out["ranks"] = [
            {"winner": r.winner.render(ctx), "loser": r.loser.render(ctx), "proof": analysis_json(r.proof, ctx)}
            for r in node.ranks
        ]
    if node.growth is not None:
        out["growth"] = analysis_json(node.growth, ctx)
    return out


def certificate_json(cert: Certificate, ctx=None) -> dict:
    return {
        "structural_zero": cert.structural_zero,
        "difference": analysis_json(cert.difference, ctx),
        "denominators": [analysis_json(d, ctx) for d in cert.denominators],
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _emit(args, verdict, certificate=None, normal_forms=()) -> None:
    if args.json:
        payload = {"verdict": verdict, "certificate": certificate, "normal_forms": [str(n) for n in normal_forms]}
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        print(verdict)


def cmd_cmp(args) -> int:
    v = compare(parse(args.t1), parse(args.t2))
    ctx = _joint_context(v.normal_forms)
    _emit(args, v.relation.value, certificate_json(v.certificate, ctx), v.normal_forms)
    return EXIT_OK


def _joint_context(nfs):
    from .normal import offsets_context

    variables = set()
    for n in nfs:
        variables |= n.variables()
    return offsets_context(variables)


def cmd_sign(args) -> int:
    t = parse(args.term)
    s = term_sign(t)
    _emit(args, {1: "+", 0: "0", -1: "-"}[s], None, (normalize(t),))
    return EXIT_OK


def cmd_leading(args) -> int:
    t = parse(args.term)
    lead = leading(t)
    cert = {"tower_level": lead.level}
    _emit(args, lead.render(), cert, (normalize(t),))
    return EXIT_OK


def _inverse_series(s: LogESum) -> Series:
    """``1 / rho0(s)`` as ``(1/c h) * (1 + u)^-1``."""
    image = rho0(s)
    head = image.term(0)
    if head is None:
        raise DivisionByZeroTerm("denominator expands to 0")
    h, c = head
    rest = image - Series.finite({h: c})
    u = times_monomial(scale(rest, 1 / c), h.inverse())
    return times_monomial(scale(BinomialTail(Fraction(-1), u), 1 / c), h.inverse())


def expansion(nf: NormalForm, order: int) -> list[tuple[str, list[tuple[Fraction, object]]]]:
    """``[(exponent, [(coefficient, monomial), ...]), ...]`` for each exponential class."""
    den_classes = list(nf.den.classes.items())
    if len(den_classes) != 1:
        raise UnsupportedFragment("expand needs a denominator with a single exponential class")
    den_p, den_s = den_classes[0]
    inverse = None if nf.den.constant_value() == 1 else _inverse_series(den_s)
    ctx = nf.context()
    out = []
    with work_budget(WORK_LIMIT):
        try:
            for p, s in sorted(nf.num.classes.items(), key=lambda kv: -kv[0].depth()):
                series = rho0(s) if inverse is None else rho0(s) * inverse
                terms = truncate(series, order)
                ordered = sorted(terms.items(), key=lambda kv: H_SORT_KEY(kv[0]), reverse=True)
                out.append(((p - den_p).render(ctx), [(c, m.render(ctx, sep=" ")) for m, c in ordered]))
        except BudgetExceeded as exc:
            raise UnsupportedFragment(f"work budget exhausted: {exc}") from exc
    return out


def cmd_expand(args) -> int:
    t = parse(args.term)
    nf = normalize(t)
    blocks = expansion(nf, args.order)
    if args.json:
        payload = [{"exponent": e, "terms": [[str(c), m] for c, m in terms]} for e, terms in blocks]
        _emit(args, payload, None, (nf,))
        return EXIT_OK
    for exponent, terms in blocks:
        if exponent != "0":
            print(f"exp({exponent}) *")
        for c, m in terms:
            print(f"  {'+' if c > 0 else '-'}{abs(c)} · {m}")
    return EXIT_OK


def check_corpus(path: str, oracle: bool = False) -> list[dict]:
    """Decide every corpus line; with ``oracle`` also sample it numerically."""
    seed = None
    if oracle:
        from ..numeric import DEFAULT_SAMPLES, build_seed, numeric_sign

        seed = build_seed(4)
    rows = []
    for line in read_corpus(path):
        row = {"line": line.lineno, "text": line.text(), "expected": line.op}
        try:
            v = compare(parse(line.left), parse(line.right))
            row["algebraic"] = v.relation.value
            row["replayed"] = v.certificate.replay() == v.relation
        except UnsupportedFragment as exc:
            row["algebraic"] = "unsupported"
            row["reason"] = str(exc)
        row["correct"] = row["algebraic"] == line.op
        if oracle:
            if line.oracle_exempt:
                row["numeric"] = "exempt"
                row["agree"] = None
            else:
                ns = numeric_sign(parse(line.left), parse(line.right), DEFAULT_SAMPLES, seed)
                row["numeric"] = ns.value
                row["agree"] = None if row["algebraic"] == "unsupported" else ns.agrees_with(row["algebraic"])
        rows.append(row)
    return rows


def cmd_check(args) -> int:
    rows = check_corpus(args.corpus, args.oracle)
    ok = all(r["correct"] and r.get("replayed", True) for r in rows)
    if args.oracle:
        ok = ok and all(r["agree"] is not False for r in rows)
    if args.json:
        print(json.dumps({"verdict": "pass" if ok else "fail", "lines": rows}, indent=2))
        return EXIT_OK if ok else EXIT_FAIL
    for r in rows:
        status = "ok  " if r["correct"] else "FAIL"
        extra = ""
        if args.oracle:
            extra = f"   numeric: {r['numeric']}"
            if r["agree"] is False:
                extra += "  DISAGREES"
        print(f"{status} {r['line']:>4}: {r['text']}   got {r['algebraic']}{extra}")
    decided = sum(r["correct"] for r in rows)
    print(f"{decided}/{len(rows)} lines decided as expected")
    if args.oracle:
        checked = [r for r in rows if r["numeric"] != "exempt"]
        inconclusive = sum(r["numeric"] == "Inconclusive" for r in checked)
        print(f"numeric oracle: {len(checked)} checked, {inconclusive} inconclusive "
              f"({inconclusive / max(len(rows), 1):.0%} of corpus)")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tx", description="Decide eventual order of terms built from E, L, exp and log.")
    parser.add_argument("--json", action="store_true", help="emit JSON")
    json_flag = argparse.ArgumentParser(add_help=False)
    json_flag.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="emit JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cmp", parents=[json_flag], help="compare two terms")
    p.add_argument("t1")
    p.add_argument("t2")
    p.set_defaults(func=cmd_cmp)

    p = sub.add_parser("sign", parents=[json_flag], help="eventual sign of a term")
    p.add_argument("term")
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("leading", parents=[json_flag], help="leading term of a term")
    p.add_argument("term")
    p.set_defaults(func=cmd_leading)

    p = sub.add_parser("expand", parents=[json_flag], help="series expansion of a term")
    p.add_argument("term")
    p.add_argument("--order", type=int, default=10, help="number of terms per class")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("check", parents=[json_flag], help="decide every line of a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--oracle", action="store_true", help="also run the numeric smoke check")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedFragment as exc:
        if args.json:
            print(json.dumps({"verdict": "unsupported", "certificate": None, "normal_forms": [], "reason": str(exc)}))
        else:
            print("unsupported")
            print(f"  {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ParseError, DivisionByZeroTerm) as exc:
        print(f"tx: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
