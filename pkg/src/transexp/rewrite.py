"""Rewriting into the logarithmic-derivative basis and the sign decision.

The maps implemented here, all exact:

* ``bell(d)`` -- complete Bell polynomials in ``E', ..., E^(d)``.
* ``sigma0`` -- G-sums to H-series, ``E^(d)(x)^a -> E0^a E1^(da) (1 + zeta_d)^a``.
* ``epsilon(d)`` -- the correction series in ``E_d(x) = E_{d-1}(x-1)(1 + eps_d)``.
* ``nu`` -- one level down: ``E1(x)^a -> E0(x-1)^a E1(x-1)^a`` and
  ``E_d(x)^n -> E_{d-1}(x-1)^n (1 + eps_d)^n``.
* ``rho0`` -- ``nu o sigma`` on G, and the binomial tail on ``log E'``.
* ``init_profile`` / ``sign_witness`` -- the leading term of ``rho0(s)``
  found by a finite search over exponent profiles, without expanding any
  infinite series.
* ``phi_generator`` -- the images of single generators one shift down, with
  exponential factors kept symbolic.

Every infinite object exists twice: as a lazy :class:`~transexp.series.Series`
(used by the general path and as the oracle) and as a finite graded slice
(used by the profile search).  The two are built independently.
"""

from __future__ import annotations

import heapq
import threading
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

from .algebra import as_rational, binom
from .monomials import (
    SLOW_INDICES,
    ExponentMap,
    GMonomial,
    H_SORT_KEY,
    HMonomial,
    LogMonomial,
)
from .series import (
    BinomialTail,
    FiniteSeries,
    LogESum,
    MergeSeries,
    Series,
    add_all,
    derive_monomial,
    leading_term,
    mul,
    mul_all,
    scale,
    times_monomial,
    truncate,
)

Poly = dict  # HMonomial -> Fraction
Graded = dict  # drop (int) -> Poly

_cache_lock = threading.RLock()

#: truncation order used by oracle comparisons; the algebraic path never reads it
ORACLE_ORDER = 30
#: upper bound on profile candidates tried before the search gives up
SEARCH_LIMIT = 400


class Sign(IntEnum):
    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1


class SearchExhausted(RuntimeError):
    """The profile search passed :data:`SEARCH_LIMIT` candidates."""


# ---------------------------------------------------------------------------
# Polynomial helpers over H monomials
# ---------------------------------------------------------------------------


def _padd(target: Poly, source: Mapping, factor: Fraction = Fraction(1)) -> Poly:
    for m, c in source.items():
        v = target.get(m, Fraction(0)) + c * factor
        if v:
            target[m] = v
        else:
            target.pop(m, None)
    return target


def _pmul(a: Mapping, b: Mapping) -> Poly:
    out: Poly = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = m1 * m2
            v = out.get(m, Fraction(0)) + c1 * c2
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


def _pmono(a: Mapping, mono: HMonomial, factor: Fraction = Fraction(1)) -> Poly:
    return {m * mono: c * factor for m, c in a.items() if c * factor}


def _pderive(a: Mapping, level: int) -> Poly:
    out: Poly = {}
    for m, c in a.items():
        _padd(out, derive_monomial(m, level), c)
    return out


def _gmul(a: Graded, b: Graded, top: int) -> Graded:
    out: Graded = {}
    for ka, pa in a.items():
        for kb, pb in b.items():
            k = ka + kb
            if k > top:
                continue
            _padd(out.setdefault(k, {}), _pmul(pa, pb))
    return {k: p for k, p in out.items() if p}


def _gone() -> Graded:
    return {0: {HMonomial.one(): Fraction(1)}}


def _relocate(mono: HMonomial, shift: int, var) -> HMonomial:
    """Move a template monomial (variable 0, shift s) to ``var`` at ``shift + s``."""
    return HMonomial(ExponentMap._trusted(tuple(
        sorted(((d, s + shift, var), e) for (d, s, _v), e in mono.items())
    )))


def _relocate_poly(poly: Mapping, shift: int, var) -> Poly:
    return {_relocate(m, shift, var): c for m, c in poly.items()}


# ---------------------------------------------------------------------------
# Bell polynomials and sigma0 on single generators
# ---------------------------------------------------------------------------

_bell_cache: dict[int, dict[tuple, int]] = {}


def _bell_partitions(d: int) -> dict[tuple, int]:
    """``B_d`` as a map from derivative-order multisets to integer coefficients."""
    with _cache_lock:
        if d in _bell_cache:
            return _bell_cache[d]
        table: list[dict[tuple, int]] = [{(): 1}]
        for n in range(d):
            nxt: dict[tuple, int] = {}
            for k in range(n + 1):
                c = binom(n, k).numerator
                for key, coef in table[n - k].items():
                    new = tuple(sorted(key + (k + 1,)))
                    nxt[new] = nxt.get(new, 0) + c * coef
            table.append(nxt)
        for i, t in enumerate(table):
            _bell_cache.setdefault(i, t)
        return _bell_cache[d]


def bell(d: int, shift: int = 0, var=0) -> LogESum:
    """Complete Bell polynomial ``B_d(E'(v-m), ..., E^(d)(v-m))``."""
    if d < 1:
        raise ValueError("bell needs d >= 1")
    terms = {}
    for orders, coef in _bell_partitions(d).items():
        g = GMonomial.one()
        for k in orders:
            g = g * GMonomial.gen(k, shift, var)
        terms[(g, LogMonomial.one())] = Fraction(coef)
    return LogESum(terms)


_sigma_poly_cache: dict[int, Poly] = {}


def sigma0_polynomial(d: int) -> Poly:
    """``sigma0(E^(d)(x))`` as a finite H polynomial (variable 0, shift 0)."""
    with _cache_lock:
        if d not in _sigma_poly_cache:
            poly: Poly = {HMonomial.gen(0, 0, 0): Fraction(1)}
            for _ in range(d):
                poly = _pderive(poly, 0)
            _sigma_poly_cache[d] = poly
        return _sigma_poly_cache[d]


def zeta(d: int) -> Poly:
    """``sigma0(E^(d)) / (E0 E1^d) - 1``; a finite sum of monomials below 1."""
    lead = HMonomial({(0, 0, 0): 1, (1, 0, 0): d}) if d else HMonomial.gen(0, 0, 0)
    rel = _pmono(sigma0_polynomial(d), lead.inverse())
    rel.pop(HMonomial.one(), None)
    return rel


def _sigma_head(d: int, a: Fraction, shift: int, var) -> HMonomial:
    if d == 0:
        return HMonomial.gen(0, shift, var, a)
    return HMonomial({(0, shift, var): a, (1, shift, var): d * a})


_sigma_gen_cache: dict[tuple, Series] = {}


def sigma0_generator(key: tuple, a) -> Series:
    """``sigma`` of one G generator ``E^(d)(v - m)^a`` (or a slow atom) at its own shift."""
    a = as_rational(a)
    d, shift, var = key
    cache_key = (key, a)
    with _cache_lock:
        hit = _sigma_gen_cache.get(cache_key)
        if hit is not None:
            return hit
        if d in SLOW_INDICES:
            out: Series = FiniteSeries({HMonomial({key: a}): Fraction(1)})
        elif d <= 1:
            out = FiniteSeries({_sigma_head(d, a, shift, var): Fraction(1)})
        else:
            tail = BinomialTail(a, FiniteSeries(_relocate_poly(zeta(d), shift, var)))
            out = times_monomial(tail, _sigma_head(d, a, shift, var))
        _sigma_gen_cache[cache_key] = out
        return out


def sigma0(s: LogESum) -> Series:
    """Homomorphic image of a G-sum in the H-series ring, each generator at its own shift."""
    if s.has_logs():
        raise ValueError("sigma0 is defined on sums without log E' factors")
    pieces = []
    for (g, _ell), c in s.terms.items():
        pieces.append(scale(mul_all(sigma0_generator(k, e) for k, e in g.items()), c))
    return add_all(pieces)


# ---------------------------------------------------------------------------
# eps_d, lazily and graded
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpsilonSeries:
    """``eps_d`` on the template variable at shift 1."""

    d: int
    body: Series

    def truncate(self, n: int) -> Poly:
        return truncate(self.body, n)

    def leading_term(self):
        return leading_term(self.body)

    def at(self, var, shift: int) -> Series:
        return _epsilon_at(self.d, var, shift)


_eps_cache: dict[int, EpsilonSeries] = {}


def epsilon(d: int) -> EpsilonSeries:
    """Memoized ``eps_d`` (variable 0, shift 1) as a lazy series."""
    if d < 2:
        raise ValueError("epsilon needs d >= 2")
    with _cache_lock:
        if d in _eps_cache:
            return _eps_cache[d]
        if d == 2:
            body: Series = FiniteSeries({HMonomial({(1, 1, 0): -1, (2, 1, 0): 1}): Fraction(1)})
        else:
            prev = epsilon(d - 1).body
            body = mul(
                times_monomial(prev.derivative(1), HMonomial.gen(d - 1, 1, 0, -1)),
                BinomialTail(-1, prev),
            )
        _eps_cache[d] = EpsilonSeries(d, body)
        return _eps_cache[d]


_eps_at_cache: dict[tuple, Series] = {}


def _epsilon_at(d: int, var, shift: int) -> Series:
    from .series import MappedSeries

    key = (d, var, shift)
    with _cache_lock:
        if key not in _eps_at_cache:
            base = epsilon(d).body
            if var == 0 and shift == 1:
                _eps_at_cache[key] = base
            else:
                offset = shift - 1
                _eps_at_cache[key] = MappedSeries(base, lambda m: _relocate(m, offset, var))
        return _eps_at_cache[key]


_eps_graded_cache: dict[int, tuple[int, Graded]] = {}


def _drop(mono: HMonomial) -> int:
    e = -mono.exponent((1, 1, 0))
    if e.denominator != 1 or e < 1:
        raise AssertionError(f"eps term {mono.render()} does not lower the E1 exponent")
    return int(e)


def epsilon_graded(d: int, top: int) -> Graded:
    """``eps_d`` split by how far each term lowers the ``E1`` exponent, drops ``<= top``.

    Built from the same recursion as :func:`epsilon` but on finite polynomials,
    so each slice is exact and finite.
    """
    if d < 2:
        raise ValueError("epsilon needs d >= 2")
    with _cache_lock:
        hit = _eps_graded_cache.get(d)
        if hit is not None and hit[0] >= top:
            return {k: p for k, p in hit[1].items() if k <= top}
        if d == 2:
            out: Graded = {1: {HMonomial({(1, 1, 0): -1, (2, 1, 0): 1}): Fraction(1)}}
        else:
            prev = epsilon_graded(d - 1, top)
            inv = HMonomial.gen(d - 1, 1, 0, -1)
            # derivation keeps the drop; dividing by E_{d-1} keeps it too
            lifted: Graded = {k: _pmono(_pderive(p, 1), inv) for k, p in prev.items()}
            lifted = {k: p for k, p in lifted.items() if p}
            geometric = _gone()
            power = _gone()
            neg = {k: {m: -c for m, c in p.items()} for k, p in prev.items()}
            for _ in range(top):
                power = _gmul(power, neg, top)
                if not power:
                    break
                for k, p in power.items():
                    _padd(geometric.setdefault(k, {}), p)
            out = _gmul(lifted, geometric, top)
        for k, p in out.items():
            for m in p:
                if _drop(m) != k:
                    raise AssertionError("graded eps slice holds a term of a different drop")
        _eps_graded_cache[d] = (top, out)
        return out


_eps_power_cache: dict[tuple, tuple[int, Graded]] = {}


def _epsilon_power_graded(d: int, n: int, top: int) -> Graded:
    """``(1 + eps_d)^n`` for natural ``n``, by drop, on the template variable."""
    if n < 0:
        raise ValueError("graded eps powers are taken for natural exponents only")
    key = (d, n)
    with _cache_lock:
        hit = _eps_power_cache.get(key)
        if hit is not None and hit[0] >= top:
            return hit[1]
        base = _gone()
        for k, p in epsilon_graded(d, top).items():
            base[k] = dict(p)
        out = _gone()
        for _ in range(n):
            out = _gmul(out, base, top)
        _eps_power_cache[key] = (top, out)
        return out


_zeta_power_cache: dict[tuple, tuple[int, Graded]] = {}


def _zeta_power_graded(d: int, a: Fraction, top: int) -> Graded:
    """``(1 + zeta_d)^a`` for rational ``a``, split by ``E1`` drop (template, shift 0)."""
    key = (d, a)
    with _cache_lock:
        hit = _zeta_power_cache.get(key)
        if hit is not None and hit[0] >= top:
            return hit[1]
        z: Graded = {}
        for m, c in zeta(d).items():
            k = -m.exponent((1, 0, 0))
            if k.denominator != 1 or k < 1:
                raise AssertionError(f"zeta term {m.render()} does not lower the E1 exponent")
            z.setdefault(int(k), {})[m] = c
        out = _gone()
        power = _gone()
        for k in range(1, top + 1):
            power = _gmul(power, z, top)
            if not power:
                break
            coef = binom(a, k)
            if coef:
                for drop, p in power.items():
                    _padd(out.setdefault(drop, {}), p, coef)
        _zeta_power_cache[key] = (top, out)
        return out


# ---------------------------------------------------------------------------
# nu, rho
# ---------------------------------------------------------------------------


def _nu_head(mono: HMonomial, level: int) -> tuple[HMonomial, list[tuple[int, object, int]]]:
    """Leading image of a monomial under ``nu_level`` and the eps factors it carries."""
    out: dict[tuple, Fraction] = {}
    tails: list[tuple[int, object, int]] = []
    for (d, s, v), e in mono.items():
        if d in SLOW_INDICES or d == 0:
            out[(d, s, v)] = out.get((d, s, v), Fraction(0)) + e
            continue
        if s != level:
            raise ValueError(f"E{d} at shift {s} cannot be moved by nu at level {level}")
        if d == 1:
            for k in ((0, level + 1, v), (1, level + 1, v)):
                out[k] = out.get(k, Fraction(0)) + e
            continue
        if e.denominator != 1:
            raise ValueError(f"nu needs integer exponents on E{d}, got {e}")
        k = (d - 1, level + 1, v)
        out[k] = out.get(k, Fraction(0)) + e
        tails.append((d, v, int(e)))
    return HMonomial(out), tails


_quotient_cache: dict[int, Poly] = {}


def nu_numerator(d: int) -> Poly:
    """Finite ``M_d`` (variable 0, shift 1) with ``nu(E_d) = M_d / (M_1 ... M_{d-1})``.

    ``M_1 = E0 E1`` and ``nu(E_{d+1}) = D(nu(E_d)) / nu(E_d)``, so the
    logarithmic derivative of the quotient gives the next numerator.
    """
    if d < 1:
        raise ValueError("nu_numerator needs d >= 1")
    with _cache_lock:
        if d in _quotient_cache:
            return _quotient_cache[d]
        if d == 1:
            out: Poly = {HMonomial({(0, 1, 0): 1, (1, 1, 0): 1}): Fraction(1)}
        else:
            prev = [nu_numerator(k) for k in range(1, d - 1)]
            top = nu_numerator(d - 1)
            below: Poly = {HMonomial.one(): Fraction(1)}
            for p in prev:
                below = _pmul(below, p)
            out = _pmul(_pderive(top, 1), below)
            for k, p in enumerate(prev):
                rest: Poly = {HMonomial.one(): Fraction(1)}
                for j, q in enumerate(prev):
                    if j != k:
                        rest = _pmul(rest, q)
                _padd(out, _pmul(top, _pmul(_pderive(p, 1), rest)), Fraction(-1))
        _quotient_cache[d] = out
        return out


_numerator_power_cache: dict[tuple, tuple[HMonomial, Series]] = {}


def _numerator_power(d: int, var, shift: int, c: int) -> tuple[HMonomial, Series]:
    """``M_d^c`` at ``(var, shift)`` split as leading monomial times ``(1 + u)^c``."""
    key = (d, var, shift, c)
    with _cache_lock:
        if key not in _numerator_power_cache:
            poly = _relocate_poly(nu_numerator(d), shift - 1, var)
            lead = max(poly, key=H_SORT_KEY)
            rel = _pmono(poly, lead.inverse(), 1 / poly[lead])
            rel.pop(HMonomial.one(), None)
            tail = BinomialTail(c, FiniteSeries(rel)) if rel else Series.one()
            _numerator_power_cache[key] = (lead ** c, scale(tail, poly[lead] ** c))
        return _numerator_power_cache[key]


def nu_monomial(mono: HMonomial, level: int) -> Series:
    """``nu_level`` of one monomial as a product of powers of the finite ``M_d``.

    With ``n_d`` the exponent of ``E_d`` the image is ``prod M_d^(c_d)`` where
    ``c_d = n_d - sum_{j > d} n_j``; exact cancellations between consecutive
    ``E_d`` therefore happen in the exponents, never in an infinite tail.
    """
    _nu_head(mono, level)  # validates shifts and exponents
    fixed: dict[tuple, Fraction] = {}
    per_var: dict = {}
    for (d, s, v), e in mono.items():
        if d in SLOW_INDICES or d == 0:
            fixed[(d, s, v)] = e
        else:
            per_var.setdefault(v, {})[d] = e
    head = HMonomial(fixed)
    factors: list[Series] = []
    for v, exps in per_var.items():
        top = max(exps)
        above = Fraction(0)
        for d in range(top, 0, -1):
            c = exps.get(d, Fraction(0)) - above
            above += exps.get(d, Fraction(0))
            if c == 0:
                continue
            if d == 1:
                head = head * HMonomial({(0, level + 1, v): c, (1, level + 1, v): c})
                continue
            lead, tail = _numerator_power(d, v, level + 1, int(c))
            head = head * lead
            factors.append(tail)
    if not factors:
        return FiniteSeries({head: Fraction(1)})
    return times_monomial(mul_all(factors), head)


def nu(s: Series, level: int = 0) -> Series:
    """``nu_level``: rewrite ``E_d`` (``d >= 1``) at ``level`` one shift down."""

    def parts() -> Iterator[tuple[HMonomial, Series]]:
        for mono, c in s:
            head, _ = _nu_head(mono, level)
            yield head, scale(nu_monomial(mono, level), c)

    return MergeSeries(parts)


def nu0(s: Series) -> Series:
    return nu(s, 0)


_rho_gen_cache: dict[tuple, Series] = {}


def _log_image(shift: int, var, b: Fraction) -> Series:
    """``E0(v-m-1)^b * sum_k binom(b, k) (E1/E0)^k`` at shift ``m + 1``."""
    ratio = FiniteSeries({HMonomial({(0, shift + 1, var): -1, (1, shift + 1, var): 1}): Fraction(1)})
    return times_monomial(BinomialTail(b, ratio), HMonomial.gen(0, shift + 1, var, b))


def rho_generator(kind: str, key: tuple, exp, level: int) -> Series:
    """``rho`` of a single generator, lifted to ``level`` (above the generator's shift)."""
    exp = as_rational(exp)
    cache_key = (kind, key, exp, level)
    with _cache_lock:
        hit = _rho_gen_cache.get(cache_key)
        if hit is not None:
            return hit
    if kind == "G" and key[0] in SLOW_INDICES:
        out: Series = FiniteSeries({HMonomial({key: exp}): Fraction(1)})
    else:
        if kind == "G":
            d, shift, var = key
            out = nu(sigma0_generator(key, exp), shift) if d >= 1 else sigma0_generator(key, exp)
        else:
            shift, var = key
            out = _log_image(shift, var, exp)
        if level < shift + 1:
            raise ValueError(f"level {level} lies above the generator shift {shift}")
        if not (kind == "G" and key[0] == 0):
            for k in range(shift + 1, level):
                out = nu(out, k)
    with _cache_lock:
        _rho_gen_cache.setdefault(cache_key, out)
        return _rho_gen_cache[cache_key]


def rho_level(s: LogESum) -> int:
    """Common level used for ``rho``: one below the deepest shift present."""
    shifts = s.shifts()
    return (max(shifts) if shifts else 0) + 1


def _rho_monomial(g: GMonomial, ell: LogMonomial, level: int) -> Series:
    factors = [rho_generator("G", k, e, level) for k, e in g.items()]
    factors += [rho_generator("L", k, e, level) for k, e in ell.items()]
    return mul_all(factors)


def _split(g: GMonomial, ell: LogMonomial, var) -> tuple[tuple, tuple]:
    """Separate the factors in ``var`` (plus slow atoms) from the others."""
    gx = [(k, e) for k, e in g.items() if k[2] == var or k[0] in SLOW_INDICES]
    gr = [(k, e) for k, e in g.items() if not (k[2] == var or k[0] in SLOW_INDICES)]
    lx = [(k, e) for k, e in ell.items() if k[1] == var]
    lr = [(k, e) for k, e in ell.items() if k[1] != var]
    return (GMonomial(gx), LogMonomial(lx)), (GMonomial(gr), LogMonomial(lr))


def _rank_factor(matrix: list[list[Fraction]]) -> tuple[list[int], list[list[Fraction]]]:
    """Pivot columns and reduced rows of ``matrix`` (so ``M = M[:, pivots] @ rows``)."""
    rows = [list(r) for r in matrix]
    pivots: list[int] = []
    r = 0
    ncols = len(rows[0]) if rows else 0
    for col in range(ncols):
        pivot = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        inv = 1 / rows[r][col]
        rows[r] = [x * inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
    return pivots, rows[:r]


def _rho_factored(terms: list[tuple[GMonomial, LogMonomial, Fraction]], variables: list, level: int) -> Series:
    """``rho`` of a sum, factored across the first variable and the rest.

    Writing the sum as ``sum_k X_k * Y_k`` with independent ``X_k`` (first
    variable) and independent ``Y_k`` (other variables) lets cancellation
    happen inside one variable, where the expansion resolves it after finitely
    many terms, rather than across a product with an infinite factor.
    """
    if len(variables) <= 1 or len(terms) <= 1:
        return add_all(scale(_rho_monomial(g, ell, level), c) for g, ell, c in terms)
    var = variables[0]
    row_keys: dict[tuple, int] = {}
    col_keys: dict[tuple, int] = {}
    cells: dict[tuple[int, int], Fraction] = {}
    for g, ell, c in terms:
        x, y = _split(g, ell, var)
        i = row_keys.setdefault(x, len(row_keys))
        j = col_keys.setdefault(y, len(col_keys))
        cells[(i, j)] = cells.get((i, j), Fraction(0)) + c
    matrix = [[cells.get((i, j), Fraction(0)) for j in range(len(col_keys))] for i in range(len(row_keys))]
    pivots, reduced = _rank_factor(matrix)
    xs = list(row_keys)
    ys = list(col_keys)
    pieces = []
    for k, col in enumerate(pivots):
        x_terms = [(xs[i][0], xs[i][1], matrix[i][col]) for i in range(len(xs)) if matrix[i][col] != 0]
        y_terms = [(ys[j][0], ys[j][1], reduced[k][j]) for j in range(len(ys)) if reduced[k][j] != 0]
        pieces.append(mul(_rho_factored(x_terms, [var], level), _rho_factored(y_terms, variables[1:], level)))
    return add_all(pieces)


def rho_to_level(s: LogESum, level: int) -> Series:
    """``rho`` of ``s`` with every generator rewritten down to ``level``."""
    terms = [(g, ell, c) for (g, ell), c in s.terms.items()]
    return _rho_factored(terms, sorted(s.variables()), level)


def rho0(s: LogESum) -> Series:
    """``rho`` of a log-E-sum; mixed shifts are rewritten to a common level."""
    return rho_to_level(s, rho_level(s))


def leading_term_of_series(s: Series):
    return leading_term(s)


def _lead_lift(mono: HMonomial, start: int, level: int) -> HMonomial:
    for k in range(start, level):
        mono, _ = _nu_head(mono, k)
    return mono


def leading_monomial_of_product(g: GMonomial, ell: LogMonomial | None = None, level: int | None = None) -> HMonomial:
    """``Lm(rho(g * ell))`` read off generator by generator, without expansion."""
    ell = ell or LogMonomial.one()
    if level is None:
        shifts = g.shifts() | ell.shifts()
        level = (max(shifts) if shifts else 0) + 1
    out = HMonomial.one()
    for (d, shift, var), a in g.items():
        if d in SLOW_INDICES or d == 0:
            out = out * HMonomial({(d, shift, var): a})
            continue
        head = _lead_lift(_sigma_head(d, a, shift, var), shift, level)
        out = out * head
    for (shift, var), b in ell.items():
        out = out * _lead_lift(HMonomial.gen(0, shift + 1, var, b), shift + 1, level)
    return out


# ---------------------------------------------------------------------------
# Profile search: Init(s) and the sign witness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroIndicator:
    """Returned by :func:`sign_witness` for the zero sum."""

    def __bool__(self) -> bool:
        return False


ZERO = ZeroIndicator()


@dataclass(frozen=True)
class SignWitnessResult:
    coefficient: Fraction
    monomial: HMonomial
    route: str = "profile"
    depth: int = 0

    @property
    def sign(self) -> Sign:
        return Sign.POSITIVE if self.coefficient > 0 else Sign.NEGATIVE


@dataclass
class InitProfile:
    """Data defining ``Init(s)``: the leading log groups, their profile sums and log leads."""

    shift: int
    indices: list[LogMonomial]
    subsums: dict[LogMonomial, Poly]
    log_leads: dict[LogMonomial, HMonomial]
    profile: tuple
    depth: int = 0

    def series(self) -> Series:
        """``sum nu(t_i) * Lm(rho(ell_i))`` as a lazy series."""
        parts = []
        for ell in self.indices:
            parts.append(times_monomial(nu(FiniteSeries(self.subsums[ell]), self.shift), self.log_leads[ell]))
        return add_all(parts)


def _candidates(heads: Iterable[Fraction]) -> Iterator[Fraction]:
    """Values ``h - k`` (``k`` natural) over all heads, decreasing, without repeats."""
    heap = [-h for h in set(heads)]
    heapq.heapify(heap)
    seen: set = set()
    while heap:
        v = -heapq.heappop(heap)
        if v in seen:
            continue
        seen.add(v)
        heapq.heappush(heap, -(v - 1))
        yield v


@dataclass
class _Entry:
    poly: Poly  # fixed part over the variables already settled (coefficient folded in)
    parts: tuple  # remaining per-variable parts, aligned with the variable list


def _descend(entries: list[_Entry], variables: list, head, slice_, counter: list[int]) -> Poly:
    """Settle the ``E1`` exponent of each variable in turn, largest nonzero first.

    ``head(v, part)`` gives the top ``E1`` exponent a part can reach; ``slice_(v,
    part, k)`` the finite polynomial of its terms exactly ``k`` below that.
    Entries whose remaining parts agree are summed before testing for zero:
    images of distinct remaining parts are linearly independent, so a group is
    zero exactly when its settled polynomial is.
    """
    for idx, v in enumerate(variables):
        heads = [head(v, e.parts[0]) for e in entries]
        chosen = None
        for cand in _candidates(heads):
            counter[0] += 1
            if counter[0] > SEARCH_LIMIT:
                raise SearchExhausted(f"no nonzero profile within {SEARCH_LIMIT} candidates")
            groups: dict[tuple, Poly] = {}
            for e, h in zip(entries, heads):
                k = h - cand
                if k < 0 or k.denominator != 1:
                    continue
                piece = slice_(v, e.parts[0], int(k))
                if not piece:
                    continue
                acc = groups.setdefault(e.parts[1:], {})
                _padd(acc, _pmul(e.poly, piece))
            live = [_Entry(p, rest) for rest, p in groups.items() if p]
            if live:
                chosen = live
                break
        if chosen is None:
            raise AssertionError("profile search ran out of candidates on a nonzero input")
        entries = chosen
    total: Poly = {}
    for e in entries:
        _padd(total, e.poly)
    return total


def _var_split(g: GMonomial) -> dict:
    per: dict = {}
    for (d, _s, v), a in g.items():
        per.setdefault(v, {})[d] = per.setdefault(v, {}).get(d, Fraction(0)) + a
    return per


def _sigma_profile(gsum: Mapping[GMonomial, Fraction], shift: int, variables: list, counter: list[int]):
    """Leading ``(E0, E1)`` profile sum of ``sigma(gsum)``; returns ``(alpha, beta, t)``."""

    def alpha(g):
        per = _var_split(g)
        return tuple(sum(per.get(v, {}).values(), Fraction(0)) for v in variables)

    top = max(alpha(g) for g in gsum)
    chosen = {g: c for g, c in gsum.items() if alpha(g) == top}

    def part(g, v):
        return tuple(sorted(_var_split(g).get(v, {}).items()))

    def head(v, p):
        return sum((d * a for d, a in p), Fraction(0))

    def slice_(v, p, k):
        poly: Graded = _gone()
        mono = HMonomial.one()
        for d, a in p:
            mono = mono * _sigma_head(d, a, shift, v)
            if d >= 2:
                factor = _zeta_power_graded(d, a, k)
                poly = _gmul(poly, factor, k)
        piece = poly.get(k, {})
        return {_relocate(m, shift, v) * mono: c for m, c in piece.items()}

    entries = [_Entry({HMonomial.one(): c}, tuple(part(g, v) for v in variables)) for g, c in chosen.items()]
    t = _descend(entries, variables, head, slice_, counter)
    beta = []
    some = next(iter(t))
    for v in variables:
        beta.append(some.exponent((1, shift, v)))
    return top, tuple(beta), t


def _single_shift(s: LogESum) -> int:
    if s.has_slow():
        raise ValueError("the profile search handles E-sums without x or L(x) atoms")
    shifts = s.shifts()
    if len(shifts) > 1:
        raise ValueError("the profile search needs all generators at one shift")
    return next(iter(shifts)) if shifts else 0


def init_profile(s: LogESum) -> InitProfile:
    """The index set, profile subsums and log leads whose ``nu``-image starts ``rho0(s)``."""
    if s.is_zero():
        raise ValueError("Init is undefined for the zero sum")
    shift = _single_shift(s)
    variables = sorted(s.variables())
    counter = [0]
    best = None
    rows = []
    for ell, gsum in s.by_log_part().items():
        alpha, beta, t = _sigma_profile(gsum, shift, variables, counter)
        bvec = tuple(ell.exponent((shift, v)) for v in variables)
        key = alpha + tuple(b + c for b, c in zip(beta, bvec))
        rows.append((key, ell, t))
        if best is None or key > best:
            best = key
    indices = [ell for key, ell, _t in rows if key == best]
    subsums = {ell: t for key, ell, t in rows if key == best}
    leads = {
        ell: HMonomial({(0, shift + 1, v): b for (_m, v), b in ell.items()}) for ell in indices
    }
    return InitProfile(shift, indices, subsums, leads, best, counter[0])


def _init_lead(profile: InitProfile, counter: list[int]) -> tuple[Fraction, HMonomial]:
    shift = profile.shift
    variables = sorted({v for t in profile.subsums.values() for m in t for v in m.variables()}
                       | {v for ell in profile.indices for v in ell.variables()})

    def part(mono: HMonomial, ell: LogMonomial, v):
        return (mono.restrict(v), ell.exponent((shift, v)))

    def head(v, p):
        mono, _b = p
        return mono.exponent((1, shift, v)) + mono.exponent((2, shift, v))

    def slice_(v, p, k):
        mono, b = p
        lead, tails = _nu_head(mono, shift)
        lead = lead * HMonomial.gen(0, shift + 1, v, b)
        poly = _gone()
        for d, _v, n in tails:
            poly = _gmul(poly, _epsilon_power_graded(d, n, k), k)
        piece = poly.get(k, {})
        return {_relocate(m, shift, v) * lead: c for m, c in piece.items()}

    entries = []
    for ell in profile.indices:
        for mono, c in profile.subsums[ell].items():
            entries.append(_Entry({HMonomial.one(): c}, tuple(part(mono, ell, v) for v in variables)))
    total = _descend(entries, variables, head, slice_, counter)
    top = max(total, key=H_SORT_KEY)
    return total[top], top


def sign_witness(s: LogESum):
    """Leading ``(coefficient, monomial)`` of ``rho0(s)``, or :data:`ZERO`.

    Single-shift sums go through the finite profile search.  Sums that mix
    shifts or carry ``x``/``L(x)`` atoms are rewritten to a common level and
    read from the lazy expansion.  A sum such as ``E'(x) - E(x) E'(x-1)`` is
    nonzero as a formal sum but vanishes as a function; its common-level image
    cancels to nothing and the result is :data:`ZERO`.
    """
    if s.is_zero():
        return ZERO
    if s.has_slow() or len(s.shifts()) > 1:
        lead = leading_term(rho0(s))
        if lead is None:
            return ZERO
        return SignWitnessResult(lead[0], lead[1], route="stream", depth=0)
    profile = init_profile(s)
    counter = [profile.depth]
    coef, mono = _init_lead(profile, counter)
    return SignWitnessResult(coef, mono, route="profile", depth=counter[0])


def sign(s: LogESum) -> Sign:
    w = sign_witness(s)
    if not w:
        return Sign.ZERO
    return w.sign


def oracle_leading_term(s: LogESum, order: int = ORACLE_ORDER):
    """Leading term read from an order-``order`` truncation of ``rho0(s)``."""
    terms = truncate(rho0(s), order)
    if not terms:
        return None
    top = max(terms, key=H_SORT_KEY)
    return terms[top], top


# ---------------------------------------------------------------------------
# Generator images one shift down
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhiImage:
    """``exp(exp_arg) * prefactor * (1 + tail)^power`` over shift ``m + 1``.

    ``exp_arg`` is a log-E-sum kept symbolic (the ``e(...)`` factor); the
    remaining product is an honest element of the log-E group ring with a
    binomial tail.
    """

    exp_arg: LogESum
    prefactor: LogESum
    power: Fraction = Fraction(0)
    tail: LogESum = field(default_factory=LogESum.zero)

    def truncate(self, n: int) -> LogESum:
        """The first ``n`` binomial terms of the non-exponential factor."""
        total = LogESum.zero()
        u_power = LogESum.constant(1)
        for k in range(n):
            c = binom(self.power, k)
            if k and self.tail.is_zero():
                break
            if c:
                total = total + u_power * c
            u_power = u_power * self.tail
        return self.prefactor * total

    def __mul__(self, other: "PhiImage") -> "PhiImage":
        if not self.tail.is_zero() and not other.tail.is_zero():
            raise ValueError("products of two tailed images are expanded through sigma instead")
        base, tailed = (self, other) if self.tail.is_zero() else (other, self)
        return PhiImage(self.exp_arg + other.exp_arg, base.prefactor * tailed.prefactor, tailed.power, tailed.tail)

    def sigma(self) -> Series:
        """``sigma`` at the lower shift; ``e(c E(v-m-1))`` becomes ``E0(v-m)^c``."""
        mono = HMonomial.one()
        for (g, ell), c in self.exp_arg.terms.items():
            items = g.items()
            if not ell.is_one() or len(items) != 1 or items[0][0][0] != 0 or items[0][1] != 1:
                raise ValueError("only multiples of E(v - m - 1) can be exponentiated here")
            (_d, shift, v), _ = items[0]
            mono = mono * HMonomial.gen(0, shift - 1, v, c)
        body = sigma0(self.prefactor)
        if not self.tail.is_zero():
            body = mul(body, BinomialTail(self.power, sigma0(self.tail)))
        return times_monomial(body, mono)


def phi_generator(kind: str, key: tuple, exp=1) -> PhiImage:
    """Image of ``E^(d)(v-m)^a`` (``kind="G"``) or ``log E'(v-m)^b`` (``kind="L"``)."""
    exp = as_rational(exp)
    if kind == "L":
        shift, var = key
        e_low = LogESum.E(0, shift + 1, var)
        ratio = LogESum.log_ep(shift + 1, var) * LogESum.E(0, shift + 1, var, -1)
        return PhiImage(LogESum.zero(), LogESum.E(0, shift + 1, var, exp), exp, ratio) if exp != 1 else PhiImage(
            LogESum.zero(), e_low + LogESum.log_ep(shift + 1, var)
        )
    d, shift, var = key
    if d in SLOW_INDICES:
        raise ValueError("x and L(x) have no image one shift down")
    exp_arg = LogESum.E(0, shift + 1, var) * exp
    if d == 0:
        return PhiImage(exp_arg, LogESum.constant(1))
    prefactor = LogESum.E(1, shift + 1, var, d * exp)
    if d == 1:
        return PhiImage(exp_arg, prefactor)
    delta = (bell(d, shift + 1, var) - LogESum.E(1, shift + 1, var, d)) * LogESum.E(1, shift + 1, var, -d)
    return PhiImage(exp_arg, prefactor, exp, delta)


def delta(d: int, shift: int = 1, var=0) -> LogESum:
    """``(B_d - E'^d) / E'^d`` at the given shift."""
    return (bell(d, shift, var) - LogESum.E(1, shift, var, d)) * LogESum.E(1, shift, var, -d)


def phi_sigma(s: LogESum, order: int | None = None) -> Series:
    """``sigma`` one shift down of the generator-wise image of ``s`` (G part only)."""
    pieces = []
    for (g, ell), c in s.terms.items():
        if not ell.is_one():
            raise ValueError("phi_sigma covers G-sums")
        factors = [phi_generator("G", k, e).sigma() for k, e in g.items()]
        pieces.append(scale(mul_all(factors), c))
    return add_all(pieces)


__all__ = [
    "Sign",
    "SearchExhausted",
    "bell",
    "sigma0_polynomial",
    "zeta",
    "sigma0_generator",
    "sigma0",
    "EpsilonSeries",
    "epsilon",
    "epsilon_graded",
    "nu",
    "nu0",
    "nu_monomial",
    "rho_generator",
    "rho_level",
    "rho_to_level",
    "rho0",
    "leading_term_of_series",
    "leading_monomial_of_product",
    "ZeroIndicator",
    "ZERO",
    "SignWitnessResult",
    "InitProfile",
    "init_profile",
    "sign_witness",
    "sign",
    "oracle_leading_term",
    "PhiImage",
    "phi_generator",
    "delta",
    "phi_sigma",
    "ORACLE_ORDER",
    "SEARCH_LIMIT",
]
