"""Brute-force reference implementations for testing.

Each routine here deliberately avoids the machinery it checks: the integral
is summed over every x in D(U) = [0,U_1] x ... x [0,U_n], coefficients are
counted over 0/1 vectors, and zonotope points are found by scanning a box
and solving a small linear program in exact rationals.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .lattice import in_lattice
from .model import ExponentMatrix, ModelSpec


class OracleBudgetError(RuntimeError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class OracleBudget:
    max_N: int = 20
    max_n: int = 64
    max_table_size: int = 10**6

    def check_terms(self, count: int, what: str) -> None:
        if count > self.max_table_size:
            raise OracleBudgetError(f"{what}: {count} cases exceed the oracle budget of {self.max_table_size}")


DEFAULT_BUDGET = OracleBudget()


def _matrix(model) -> ExponentMatrix:
    if isinstance(model, ModelSpec):
        return model.matrix()
    return model


def _dirichlet_moment(exps: Sequence[int], params: Sequence[Fraction]) -> Fraction:
    """E[p^exps] for p ~ Dirichlet(params), via Gamma(q + e)/Gamma(q) products."""
    num = Fraction(1)
    for e, q in zip(exps, params):
        for i in range(e):
            num *= q + i
    tot = sum(params, Fraction(0))
    den = Fraction(1)
    for i in range(sum(exps)):
        den *= tot + i
    return num / den


def _uniform_moment(exps: Sequence[int]) -> Fraction:
    # t! prod e_i! / (|e| + t)!  with t = len(exps) - 1
    t = len(exps) - 1
    return Fraction(math.factorial(t) * math.prod(math.factorial(e) for e in exps),
                    math.factorial(sum(exps) + t))


def brute_force_integral(model, U: Sequence[int], prior=None,
                         budget: OracleBudget = DEFAULT_BUDGET) -> Fraction:
    """Raw mixture integral by expanding every factor (sigma0 theta^a + sigma1 rho^a)^U_v.

    ``prior`` is a PriorSpec or None (uniform).  The result excludes the
    multinomial normalizing constant, matching ``IntegralResult.exact``.
    """
    A = _matrix(model)
    U = [int(u) for u in U]
    if len(U) != A.n:
        raise ValueError(f"data has {len(U)} entries, matrix has {A.n} columns")
    if A.n > budget.max_n:
        raise OracleBudgetError(f"n = {A.n} exceeds oracle budget {budget.max_n}")
    budget.check_terms(math.prod(u + 1 for u in U), "brute_force_integral")
    uniform = prior is None or prior.is_uniform
    if not uniform:
        alpha, beta, gamma = prior.resolved(A)
    slices = A.group_slices
    total = Fraction(0)
    for x in itertools.product(*(range(u + 1) for u in U)):
        coeff = math.prod(math.comb(u, xv) for u, xv in zip(U, x))
        b = [0] * A.d
        c = [0] * A.d
        for col, xv, u in zip(A.columns, x, U):
            for j, e in enumerate(col):
                b[j] += e * xv
                c[j] += e * (u - xv)
        m0 = sum(x)
        m1 = sum(U) - m0
        if uniform:
            w = _uniform_moment([m0, m1])
            for lo, hi in slices:
                w *= _uniform_moment(b[lo:hi]) * _uniform_moment(c[lo:hi])
        else:
            w = _dirichlet_moment([m0, m1], alpha)
            for (lo, hi), bg, gg in zip(slices, beta, gamma):
                w *= _dirichlet_moment(b[lo:hi], bg) * _dirichlet_moment(c[lo:hi], gg)
        total += coeff * w
    return total


def brute_force_phi(A: ExponentMatrix, U: Sequence[int], b: Sequence[int],
                    budget: OracleBudget = DEFAULT_BUDGET) -> int:
    """#{z in {0,1}^N : A^U z = b}, A^U repeating column v exactly U_v times."""
    cols = [tuple(col) for col, u in zip(A.columns, U) for _ in range(u)]
    N = len(cols)
    if N > budget.max_N:
        raise OracleBudgetError(f"N = {N} exceeds oracle budget {budget.max_N}")
    target = tuple(b)
    count = 0
    for z in itertools.product((0, 1), repeat=N):
        acc = [0] * A.d
        for zi, col in zip(z, cols):
            if zi:
                for j, e in enumerate(col):
                    acc[j] += e
        if tuple(acc) == target:
            count += 1
    return count


# --------------------------------------------------------------------------
# exact feasibility of {A x = b, 0 <= x <= U}
# --------------------------------------------------------------------------

def lp_feasible(rows: Sequence[Sequence[int]], rhs: Sequence[int], upper: Sequence[int]) -> bool:
    """Phase-I simplex with Bland's rule over Fractions.

    Variables are x (n), slacks s with x + s = upper (n), and one artificial
    per equality row of ``rows``.  Feasible iff the artificial sum reaches 0.
    """
    d = len(rows)
    n = len(upper)
    nv = 2 * n + d
    T: list[list[Fraction]] = []
    basis: list[int] = []
    for i, (row, r) in enumerate(zip(rows, rhs)):
        sign = -1 if r < 0 else 1
        line = [Fraction(sign * a) for a in row] + [Fraction(0)] * n + [Fraction(0)] * d + [Fraction(sign * r)]
        line[2 * n + i] = Fraction(1)
        T.append(line)
        basis.append(2 * n + i)
    for v in range(n):
        line = [Fraction(0)] * (nv + 1)
        line[v] = Fraction(1)
        line[n + v] = Fraction(1)
        line[-1] = Fraction(upper[v])
        T.append(line)
        basis.append(n + v)
    # objective row: minimize sum of artificials, written in nonbasic terms
    z = [Fraction(0)] * (nv + 1)
    for i in range(d):
        for j in range(nv + 1):
            z[j] -= T[i][j]
    for i in range(d):
        z[2 * n + i] = Fraction(0)
    while True:
        enter = next((j for j in range(nv) if z[j] < 0), None)
        if enter is None:
            break
        best = None
        for i, line in enumerate(T):
            if line[enter] > 0:
                ratio = line[-1] / line[enter]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:  # unbounded direction; cannot happen for a bounded phase-I problem
            break
        p = best[1]
        piv = T[p][enter]
        T[p] = [x / piv for x in T[p]]
        for i, line in enumerate(T):
            if i != p and line[enter]:
                f = line[enter]
                T[i] = [a - f * c for a, c in zip(line, T[p])]
        if z[enter]:
            f = z[enter]
            z = [a - f * c for a, c in zip(z, T[p])]
        basis[p] = enter
    return z[-1] == 0


def in_zonotope(A: ExponentMatrix, U: Sequence[int], b: Sequence[int]) -> bool:
    return lp_feasible(A.rows(), list(b), list(U))


def brute_force_lattice_points(A: ExponentMatrix, U: Sequence[int],
                               budget: OracleBudget = DEFAULT_BUDGET,
                               max_box: Optional[int] = None) -> int:
    """Count b in the zonotope sum_v [0, U_v] a_v lying in the lattice spanned by the columns."""
    U = [int(u) for u in U]
    top = [sum(col[j] * u for col, u in zip(A.columns, U)) for j in range(A.d)]
    size = math.prod(t + 1 for t in top)
    limit = budget.max_table_size if max_box is None else max_box
    if size > limit:
        raise OracleBudgetError(f"box of {size} points exceeds oracle budget {limit}")
    a = A.a
    count = 0
    for b in itertools.product(*(range(t + 1) for t in top)):
        # cheap necessary conditions first: group sums must agree with a common level
        if sum(b) % a:
            continue
        m = sum(b) // a
        if any(sum(b[lo:hi]) != si * m for (lo, hi), si in zip(A.group_slices, A.s)):
            continue
        if in_lattice(A, b) and in_zonotope(A, U, b):
            count += 1
    return count
