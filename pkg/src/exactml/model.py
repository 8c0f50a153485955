"""Segre-Veronese independence models: the matrices A and Ã and the closed-form
independence marginal likelihood."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from .exact_arith import FACTORIALS, as_fraction, multinomial, rising

DEFAULT_MAX_COLUMNS = 10**7


class ModelError(ValueError):
    """Invalid model description or data vector."""


@dataclass(frozen=True)
class ModelSpec:
    """k groups; group i has s[i] identically distributed variables with t[i]+1 states."""

    s: tuple[int, ...]
    t: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(int(x) for x in self.s))
        object.__setattr__(self, "t", tuple(int(x) for x in self.t))
        if not self.s or len(self.s) != len(self.t):
            raise ModelError(f"s and t must be nonempty and of equal length, got {self.s}, {self.t}")
        if any(x < 1 for x in self.s) or any(x < 1 for x in self.t):
            raise ModelError(f"all s_i and t_i must be >= 1, got s={self.s}, t={self.t}")

    @property
    def k(self) -> int:
        return len(self.s)

    @property
    def d(self) -> int:
        return sum(self.t) + self.k

    @property
    def n(self) -> int:
        return math.prod((ti + 1) ** si for si, ti in zip(self.s, self.t))

    @property
    def n_reduced(self) -> int:
        return math.prod(math.comb(si + ti, si) for si, ti in zip(self.s, self.t))

    @property
    def a(self) -> int:
        return sum(self.s)

    @property
    def rank(self) -> int:
        return self.d - self.k + 1

    @property
    def dimension(self) -> int:
        """Dimension 2d-2k+1 of the mixture parameter space."""
        return 2 * self.d - 2 * self.k + 1

    def matrix(self, max_columns: int = DEFAULT_MAX_COLUMNS) -> "ExponentMatrix":
        return build_matrix(self, max_columns=max_columns)

    def reduced(self) -> "ReducedModel":
        return reduced_model(self)


@dataclass(frozen=True)
class ExponentMatrix:
    """Columns a_v of A together with the row grouping into simplices.

    ``t[i]+1`` consecutive rows belong to group i; within group i every column
    sums to ``s[i]``.  ``labels`` holds the state vector of each column when
    known.
    """

    columns: tuple[tuple[int, ...], ...]
    t: tuple[int, ...]
    s: tuple[int, ...]
    labels: Optional[tuple[tuple[tuple[int, ...], ...], ...]] = field(default=None, compare=False)

    def __post_init__(self):
        cols = tuple(tuple(int(x) for x in c) for c in self.columns)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "t", tuple(int(x) for x in self.t))
        object.__setattr__(self, "s", tuple(int(x) for x in self.s))
        d = sum(self.t) + len(self.t)
        for c in cols:
            if len(c) != d:
                raise ModelError(f"column {c} has length {len(c)}, expected d={d}")
            if any(x < 0 for x in c):
                raise ModelError(f"column {c} has negative entries")
            for (lo, hi), si in zip(self.group_slices, self.s):
                if sum(c[lo:hi]) != si:
                    raise ModelError(f"column {c}: group block {c[lo:hi]} does not sum to s_i={si}")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], group_sizes: Optional[Sequence[int]] = None
                  ) -> "ExponentMatrix":
        """Build from a row-major integer matrix.

        ``group_sizes`` gives the number of rows of each simplex factor (t_i+1);
        by default all rows form one group.  The group degrees s_i are read off
        the column sums and must be constant within each group.
        """
        rows = [list(map(int, r)) for r in rows]
        if not rows or not rows[0]:
            raise ModelError("empty matrix")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ModelError("ragged matrix")
        d = len(rows)
        sizes = list(group_sizes) if group_sizes else [d]
        if sum(sizes) != d or any(g < 2 for g in sizes):
            raise ModelError(f"group sizes {sizes} must be >= 2 each and sum to {d} rows")
        cols = [tuple(r[v] for r in rows) for v in range(width)]
        s = []
        lo = 0
        for g in sizes:
            sums = {sum(c[lo:lo + g]) for c in cols}
            if len(sums) != 1 or 0 in sums:
                raise ModelError(
                    f"rows {lo}..{lo + g - 1}: column sums {sorted(sums)} are not a single positive degree"
                )
            s.append(sums.pop())
            lo += g
        return cls(tuple(cols), tuple(g - 1 for g in sizes), tuple(s))

    @property
    def n(self) -> int:
        return len(self.columns)

    @property
    def d(self) -> int:
        return sum(self.t) + len(self.t)

    @property
    def k(self) -> int:
        return len(self.t)

    @property
    def a(self) -> int:
        return sum(self.s)

    @property
    def group_slices(self) -> list[tuple[int, int]]:
        out = []
        lo = 0
        for ti in self.t:
            out.append((lo, lo + ti + 1))
            lo += ti + 1
        return out

    def rows(self) -> list[list[int]]:
        return [[c[i] for c in self.columns] for i in range(self.d)]

    def row_labels(self) -> list[str]:
        return [f"theta{i + 1}_{j}" for i, ti in enumerate(self.t) for j in range(ti + 1)]

    def submatrix(self, idx: Sequence[int]) -> "ExponentMatrix":
        labels = tuple(self.labels[v] for v in idx) if self.labels is not None else None
        return ExponentMatrix(tuple(self.columns[v] for v in idx), self.t, self.s, labels)

    def __str__(self) -> str:
        rows = self.rows()
        w = max(len(str(x)) for r in rows for x in r)
        return "\n".join(" ".join(str(x).rjust(w) for x in r) for r in rows)


@dataclass(frozen=True)
class ReducedModel:
    matrix: ExponentMatrix
    multiplicities: tuple[int, ...]

    def __post_init__(self):
        if len(self.multiplicities) != self.matrix.n:
            raise ModelError("one multiplicity per distinct column is required")
        if any(m < 1 for m in self.multiplicities):
            raise ModelError("multiplicities must be positive")


def _group_column(state: Sequence[int], ti: int) -> list[int]:
    counts = [0] * (ti + 1)
    for x in state:
        counts[x] += 1
    return counts


def iter_states(spec: ModelSpec) -> Iterator[tuple[tuple[int, ...], ...]]:
    """State space in lexicographic order: groups in index order, positions left to right."""
    per_group = [itertools.product(range(ti + 1), repeat=si) for si, ti in zip(spec.s, spec.t)]
    return itertools.product(*[list(g) for g in per_group])


def _column_of(state: Sequence[Sequence[int]], t: Sequence[int]) -> tuple[int, ...]:
    col: list[int] = []
    for v, ti in zip(state, t):
        col.extend(_group_column(v, ti))
    return tuple(col)


def build_matrix(spec: ModelSpec, max_columns: int = DEFAULT_MAX_COLUMNS) -> ExponentMatrix:
    n = spec.n
    if n > max_columns:
        raise ModelError(
            f"state space has n={n} columns (limit {max_columns}); "
            f"use the reduced matrix with {spec.n_reduced} columns instead"
        )
    states = tuple(iter_states(spec))
    cols = tuple(_column_of(v, spec.t) for v in states)
    return ExponentMatrix(cols, spec.t, spec.s, states)


def reduce_matrix(A: ExponentMatrix) -> ReducedModel:
    """Drop repeated columns, keeping first occurrences in order, with multiplicities."""
    counts = Counter(A.columns)
    seen: dict[tuple[int, ...], int] = {}
    labels = []
    for v, c in enumerate(A.columns):
        if c not in seen:
            seen[c] = v
            if A.labels is not None:
                labels.append(A.labels[v])
    cols = tuple(seen)
    mult = tuple(counts[c] for c in cols)
    return ReducedModel(ExponentMatrix(cols, A.t, A.s, tuple(labels) if A.labels is not None else None), mult)


def reduced_model(spec: ModelSpec) -> ReducedModel:
    """Ã with multiplicities, enumerated directly over weakly increasing states.

    Equivalent to ``reduce_matrix(build_matrix(spec))`` without touching the full
    state space.
    """
    per_group = [list(itertools.combinations_with_replacement(range(ti + 1), si))
                 for si, ti in zip(spec.s, spec.t)]
    states = tuple(itertools.product(*per_group))
    cols = tuple(_column_of(v, spec.t) for v in states)
    mult = []
    for v in states:
        m = 1
        for g, si in zip(v, spec.s):
            m *= multinomial(si, list(Counter(g).values()))
        mult.append(m)
    return ReducedModel(ExponentMatrix(cols, spec.t, spec.s, states), tuple(mult))


def collapse_data(A: ExponentMatrix, U: Sequence[int], reduced: ReducedModel) -> tuple[int, ...]:
    """Aggregate a full data vector onto the distinct columns of ``reduced``."""
    check_data(A, U)
    pos = {c: i for i, c in enumerate(reduced.matrix.columns)}
    out = [0] * reduced.matrix.n
    for c, u in zip(A.columns, U):
        out[pos[c]] += u
    return tuple(out)


def check_data(A: ExponentMatrix, U: Sequence[int]) -> tuple[int, ...]:
    U = tuple(int(u) for u in U)
    if len(U) != A.n:
        raise ModelError(f"data vector has length {len(U)}, matrix has {A.n} columns")
    if any(u < 0 for u in U):
        raise ModelError("data vector entries must be nonnegative")
    return U


def sufficient_statistic(A: ExponentMatrix, U: Sequence[int]) -> tuple[int, ...]:
    """b = A·U."""
    U = check_data(A, U)
    b = [0] * A.d
    for c, u in zip(A.columns, U):
        if u:
            for i, x in enumerate(c):
                b[i] += x * u
    return tuple(b)


def normalizing_constant(U: Sequence[int], multiplicities: Optional[Sequence[int]] = None) -> int:
    """N!/prod U_v!, times prod alpha_v^U_v when U is a reduced data vector."""
    U = [int(u) for u in U]
    out = multinomial(sum(U), U)
    if multiplicities is not None:
        if len(multiplicities) != len(U):
            raise ModelError("multiplicities and data vector differ in length")
        for m, u in zip(multiplicities, U):
            out *= m**u
    return out


def _dirichlet_groups(A: ExponentMatrix, beta) -> list[list[Fraction]]:
    if beta is None:
        return [[Fraction(1)] * (ti + 1) for ti in A.t]
    groups = [[as_fraction(x) for x in g] for g in beta]
    if [len(g) for g in groups] != [ti + 1 for ti in A.t]:
        raise ModelError(f"Dirichlet parameters {beta} do not match group shape t={A.t}")
    if any(x <= 0 for g in groups for x in g):
        raise ModelError("Dirichlet parameters must be positive")
    return groups


def monomial_integral(A: ExponentMatrix, b: Sequence[int], beta=None) -> Fraction:
    """Integral of theta^b over P against the (Dirichlet or uniform) probability measure."""
    out = Fraction(1)
    for (lo, hi), g in zip(A.group_slices, _dirichlet_groups(A, beta)):
        block = b[lo:hi]
        if all(x == 1 for x in g):
            ti = hi - lo - 1
            num = FACTORIALS[ti]
            for x in block:
                num *= FACTORIALS[x]
            out *= Fraction(num, FACTORIALS[sum(block) + ti])
        else:
            for x, q in zip(block, g):
                out *= rising(q, x)
            out /= rising(sum(g), sum(block))
    return out


def independence_marginal(A: ExponentMatrix, U: Sequence[int], multiplicities: Optional[Sequence[int]] = None,
                          beta=None, include_constant: bool = True) -> Fraction:
    """Marginal likelihood of U under the independence model.

    ``multiplicities`` marks U as a reduced data vector (paired with Ã).
    ``beta`` optionally replaces the uniform prior on P by a product of
    Dirichlet distributions, one parameter list per group.
    """
    U = check_data(A, U)
    b = sufficient_statistic(A, U)
    val = monomial_integral(A, b, beta)
    if include_constant:
        val *= normalizing_constant(U, multiplicities)
    return val
