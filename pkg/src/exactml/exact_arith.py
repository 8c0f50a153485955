"""Exact integer/rational helpers shared by every other module.

Python ``int`` is the big integer and ``fractions.Fraction`` the big rational
(always in lowest terms, positive denominator).  What lives here is the
combinatorial layer on top: a growable factorial cache, binomials,
multinomials, rising factorials and decimal/log rendering.
"""

from __future__ import annotations

import decimal
import math
import threading
from fractions import Fraction
from typing import Iterable, Sequence, Union

Rational = Union[int, Fraction]


class FactorialCache:
    """table[n] == n! for every cached n; grows on demand.

    Reads are lock-free (list indexing of an already-filled slot); growth is
    serialized so concurrent callers never observe a half-built table.
    """

    def __init__(self, initial: int = 256):
        self._table = [1]
        self._lock = threading.Lock()
        self.ensure(initial)

    def __len__(self) -> int:
        return len(self._table)

    def ensure(self, n: int) -> None:
        if n < len(self._table):
            return
        with self._lock:
            table = self._table
            if n < len(table):
                return
            # build into a local list and swap so readers never see a partial extension
            ext = list(table)
            acc = ext[-1]
            for i in range(len(ext), n + 1):
                acc *= i
                ext.append(acc)
            self._table = ext

    def __getitem__(self, n: int) -> int:
        if n < 0:
            raise ValueError(f"factorial of negative number {n}")
        table = self._table
        if n >= len(table):
            # amortized doubling keeps repeated growth cheap
            self.ensure(max(n, 2 * len(table)))
            table = self._table
        return table[n]

    def table(self, n: int) -> list[int]:
        """Return the list ``[0!, 1!, ..., n!]`` (a shared reference, do not mutate)."""
        self.ensure(n)
        return self._table


FACTORIALS = FactorialCache()


def factorial(n: int) -> int:
    if n < 0:
        raise ValueError(f"factorial of negative number {n}")
    return FACTORIALS[n]


def binomial(n: int, k: int) -> int:
    """n choose k; zero when k > n or k < 0."""
    if n < 0:
        raise ValueError(f"binomial with negative n={n}")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def binomial_row(n: int) -> list[int]:
    """[C(n,0), ..., C(n,n)] built by the multiplicative recurrence."""
    row = [1] * (n + 1)
    for k in range(1, n + 1):
        row[k] = row[k - 1] * (n - k + 1) // k
    return row


def multinomial(total: int, parts: Sequence[int]) -> int:
    if any(p < 0 for p in parts):
        raise ValueError(f"negative part in {list(parts)}")
    if sum(parts) != total:
        raise ValueError(
            f"inconsistent data vector: parts sum to {sum(parts)}, expected {total}"
        )
    out = 1
    left = total
    for p in parts:
        out *= math.comb(left, p)
        left -= p
    return out


def as_fraction(q: Rational | str | float) -> Fraction:
    if isinstance(q, Fraction):
        return q
    if isinstance(q, float):
        # floats are accepted only when they are exact binary fractions of the intent
        return Fraction(q).limit_denominator(10**12)
    return Fraction(q)


def rising_numerator(q: Fraction, m: int) -> int:
    """Integer P with rising(q, m) == P / q.denominator**m."""
    p, d = q.numerator, q.denominator
    if d == 1 and p >= 1:
        # (p)_m = (p+m-1)! / (p-1)!
        return FACTORIALS[p + m - 1] // FACTORIALS[p - 1]
    out = 1
    for i in range(m):
        out *= p + i * d
    return out


def rising(q: Rational, m: int) -> Fraction:
    """Rising factorial q(q+1)...(q+m-1) == Gamma(q+m)/Gamma(q)."""
    q = as_fraction(q)
    if q <= 0:
        raise ValueError(f"rising factorial needs a positive base, got {q}")
    if m < 0:
        raise ValueError(f"rising factorial length must be >= 0, got {m}")
    return Fraction(rising_numerator(q, m), q.denominator**m)


def rising_table(q: Rational, upto: int) -> list[int]:
    """Numerators [P(0), ..., P(upto)] with rising(q, m) == P(m) / den(q)**m."""
    q = as_fraction(q)
    if q <= 0:
        raise ValueError(f"rising factorial needs a positive base, got {q}")
    p, d = q.numerator, q.denominator
    if d == 1 and p == 1:
        return FACTORIALS.table(upto)[: upto + 1]
    out = [1] * (upto + 1)
    for i in range(1, upto + 1):
        out[i] = out[i - 1] * (p + (i - 1) * d)
    return out


# --------------------------------------------------------------------------
# decimal rendering
# --------------------------------------------------------------------------

_GUARD = 30


def _context(prec: int) -> decimal.Context:
    return decimal.Context(prec=prec, rounding=decimal.ROUND_HALF_EVEN,
                           Emax=decimal.MAX_EMAX, Emin=decimal.MIN_EMIN)


def _round_sig(x: decimal.Decimal, digits: int) -> decimal.Decimal:
    if x == 0:
        return decimal.Decimal(0)
    exp = x.adjusted() - digits + 1
    return x.quantize(decimal.Decimal(1).scaleb(exp), rounding=decimal.ROUND_HALF_EVEN,
                      context=_context(digits + 5))


def _format_plain(x: decimal.Decimal) -> str:
    s = format(x, "f")
    return "0" if s in ("0", "-0") else s


def to_decimal(r: Rational, digits: int) -> decimal.Decimal:
    """r rounded to `digits` significant digits (half-even)."""
    r = as_fraction(r)
    if digits < 1:
        raise ValueError("digits must be >= 1")
    if r == 0:
        return decimal.Decimal(0)
    # enough working precision that the quotient is correct before the final rounding
    ctx = _context(digits + _GUARD)
    x = ctx.divide(decimal.Decimal(r.numerator), decimal.Decimal(r.denominator))
    return _round_sig(x, digits)


def format_scientific(r: Rational, digits: int) -> str:
    """Render as 'd.ddd...e-XX' with `digits` significant digits."""
    x = to_decimal(r, digits)
    if x == 0:
        return "0"
    sign, ds, _ = x.as_tuple()
    # a carry like 9.99 -> 10.0 leaves one extra trailing zero
    ds = "".join(map(str, ds))[:digits].ljust(digits, "0")
    mant = ds[0] + ("." + ds[1:] if digits > 1 else "")
    return f"{'-' if sign else ''}{mant}e{x.adjusted():+d}"


def log10_decimal(r: Rational, prec: int) -> decimal.Decimal:
    """log10(r) computed with `prec` significant digits of working precision."""
    r = as_fraction(r)
    if r <= 0:
        raise ValueError(f"log10 of nonpositive value {r}")
    ctx = _context(prec)
    num = decimal.Decimal(r.numerator).log10(ctx)
    den = decimal.Decimal(r.denominator).log10(ctx)
    return ctx.subtract(num, den)


def log10_of(r: Rational, digits: int) -> str:
    """Base-10 logarithm of r to `digits` significant digits, round-half-even."""
    if digits < 1:
        raise ValueError("digits must be >= 1")
    r = as_fraction(r)
    if r <= 0:
        raise ValueError(f"log10 of nonpositive value {r}")
    if r == 1:
        return "0"
    x = log10_decimal(r, digits + _GUARD + len(str(r.numerator)) // 1000)
    return _format_plain(_round_sig(x, digits))


def ln_decimal(r: Rational, prec: int) -> decimal.Decimal:
    r = as_fraction(r)
    if r <= 0:
        raise ValueError(f"log of nonpositive value {r}")
    ctx = _context(prec)
    return ctx.subtract(decimal.Decimal(r.numerator).ln(ctx),
                        decimal.Decimal(r.denominator).ln(ctx))


def parse_rational(text: str) -> Fraction:
    """Inverse of ``format_rational``; also accepts plain integers and decimals."""
    return Fraction(text.strip())


def format_rational(r: Rational) -> str:
    r = as_fraction(r)
    return f"{r.numerator}/{r.denominator}"


def lcm_all(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, v)
    return out
