"""Zonotope lattice combinatorics.

Hermite normal forms with explicit unimodular transforms, the index of an
independent column subset inside the lattice L = ZA, Stanley's lattice-point
count for Z_A(U) and the two-sided bound on the number of monomials of the
mixture likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

from .model import ExponentMatrix, check_data

Matrix = list[list[int]]


@dataclass(frozen=True)
class HermiteForms:
    H: Matrix
    V: Matrix
    pivots: tuple[tuple[int, int], ...]  # (row, col) of each pivot

    @property
    def rank(self) -> int:
        return len(self.pivots)


@dataclass(frozen=True)
class IndependentSubset:
    columns: tuple[int, ...]
    index: int


@dataclass(frozen=True)
class ZonotopeReport:
    lattice_count: int
    lower_bound: int
    upper_bound: int
    unimodular: bool
    independent_subsets: int


def _as_matrix(M) -> Matrix:
    if isinstance(M, ExponentMatrix):
        return M.rows()
    return [list(map(int, r)) for r in M]


def identity(n: int) -> Matrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def transpose(M: Matrix) -> Matrix:
    return [list(r) for r in zip(*M)] if M else []


def matmul(X: Matrix, Y: Matrix) -> Matrix:
    Yt = transpose(Y)
    return [[sum(a * b for a, b in zip(row, col)) for col in Yt] for row in X]


def det(M: Matrix) -> int:
    """Bareiss fraction-free determinant."""
    M = [list(r) for r in M]
    n = len(M)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def rank(M) -> int:
    return len(_EchelonBasis.of(transpose(_as_matrix(M))).rows)


def row_hnf(M) -> HermiteForms:
    """H = V·M with H in row Hermite normal form and V unimodular.

    Pivots are chosen by minimal absolute value in the pivot column to limit
    coefficient growth.  Entries above a pivot are reduced into [0, pivot).
    """
    H = _as_matrix(M)
    m = len(H)
    n = len(H[0]) if m else 0
    V = identity(m)
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        while True:
            nz = [r for r in range(row, m) if H[r][col] != 0]
            if not nz:
                break
            p = min(nz, key=lambda r: abs(H[r][col]))
            if p != row:
                H[row], H[p] = H[p], H[row]
                V[row], V[p] = V[p], V[row]
            piv = H[row][col]
            done = True
            for r in range(row + 1, m):
                x = H[r][col]
                if x:
                    q = x // piv
                    Hr, Hp = H[r], H[row]
                    for j in range(col, n):
                        Hr[j] -= q * Hp[j]
                    Vr, Vp = V[r], V[row]
                    for j in range(m):
                        Vr[j] -= q * Vp[j]
                    if Hr[col]:
                        done = False
            if done:
                break
        if not any(H[r][col] for r in range(row, m)):
            continue
        if H[row][col] < 0:
            H[row] = [-x for x in H[row]]
            V[row] = [-x for x in V[row]]
        piv = H[row][col]
        for r in range(row):
            q = H[r][col] // piv
            if q:
                H[r] = [a - q * b for a, b in zip(H[r], H[row])]
                V[r] = [a - q * b for a, b in zip(V[r], V[row])]
        pivots.append((row, col))
        row += 1
    return HermiteForms(H, V, tuple(pivots))


def col_hnf(M) -> HermiteForms:
    """H' = M·V' with H' upper triangular and V' unimodular.

    Rows are eliminated from the bottom up, so that for a matrix of full row
    rank the first j columns of H' span ZM ∩ (Z^j ⊕ 0).  The pivot of row i sits
    in column i (H'_ij = 0 for i > j, columns beyond the row count vanish), and
    entries to the right of a pivot are reduced into [0, pivot).  When a row has
    no pivot the corresponding column is zero.
    """
    A = _as_matrix(M)
    m = len(A)
    n = len(A[0]) if m else 0
    # work on columns as lists
    C = [[A[i][j] for i in range(m)] for j in range(n)]
    W = [[int(i == j) for i in range(n)] for j in range(n)]  # W[j] = column j of V'
    free = list(range(n))
    pivot_of_row: dict[int, int] = {}
    for i in range(m - 1, -1, -1):
        while True:
            nz = [j for j in free if C[j][i] != 0]
            if len(nz) <= 1:
                break
            p = min(nz, key=lambda j: abs(C[j][i]))
            piv = C[p][i]
            for j in nz:
                if j != p:
                    q = C[j][i] // piv
                    C[j] = [a - q * b for a, b in zip(C[j], C[p])]
                    W[j] = [a - q * b for a, b in zip(W[j], W[p])]
        nz = [j for j in free if C[j][i] != 0]
        if nz:
            p = nz[0]
            if C[p][i] < 0:
                C[p] = [-x for x in C[p]]
                W[p] = [-x for x in W[p]]
            pivot_of_row[i] = p
            free.remove(p)
    # reduce right-of-pivot entries, bottom row first so later steps only touch rows above
    rows_sorted = sorted(pivot_of_row)
    for i in reversed(rows_sorted):
        p = pivot_of_row[i]
        piv = C[p][i]
        for i2 in rows_sorted:
            if i2 <= i:
                continue
            j = pivot_of_row[i2]
            q = C[j][i] // piv
            if q:
                C[j] = [a - q * b for a, b in zip(C[j], C[p])]
                W[j] = [a - q * b for a, b in zip(W[j], W[p])]
    # arrange: pivot of row i at position i when room allows, leftover (zero) columns fill the gaps
    order: list[int] = []
    zeros = list(free)
    if n >= m:
        for i in range(m):
            if i in pivot_of_row:
                order.append(pivot_of_row[i])
            else:
                order.append(zeros.pop(0))
        order.extend(zeros)
    else:
        order = [pivot_of_row[i] for i in rows_sorted] + zeros
    H = [[C[j][i] for j in order] for i in range(m)]
    V = [[W[j][i] for j in order] for i in range(n)]
    piv_pos = tuple((i, order.index(pivot_of_row[i])) for i in rows_sorted)
    return HermiteForms(H, V, piv_pos)


class _EchelonBasis:
    """Fraction-free row echelon basis used for incremental rank tracking."""

    __slots__ = ("rows",)

    def __init__(self, rows=None):
        self.rows: list[tuple[int, list[int]]] = rows or []

    @classmethod
    def of(cls, vectors) -> "_EchelonBasis":
        basis = cls()
        for v in vectors:
            basis = basis.extend(v) or basis
        return basis

    def reduce(self, v: Sequence[int]) -> list[int]:
        v = list(v)
        for p, b in self.rows:
            x = v[p]
            if x:
                bp = b[p]
                g = math.gcd(x, bp)
                f1, f2 = bp // g, x // g
                v = [f1 * a - f2 * c for a, c in zip(v, b)]
        return v

    def extend(self, v: Sequence[int]):
        """New basis including v, or None when v is dependent."""
        r = self.reduce(v)
        for p, x in enumerate(r):
            if x:
                g = 0
                for y in r:
                    g = math.gcd(g, y)
                r = [y // g for y in r]
                return _EchelonBasis(self.rows + [(p, r)])
        return None


def is_independent(A: ExponentMatrix, S: Sequence[int]) -> bool:
    basis = _EchelonBasis()
    for v in S:
        basis = basis.extend(A.columns[v])
        if basis is None:
            return False
    return True


def index_of_subset(A, S: Sequence[int]) -> int:
    """index(S) = [RS ∩ L : ZS] for an independent set S of column indices.

    Columns of S are moved to the front, H = V·A is the row HNF, and H' the
    upper-triangular column HNF of the nonzero rows of H.  Then
    index(S) = H_11···H_kk / H'_11···H'_kk.
    """
    cols = A.columns if isinstance(A, ExponentMatrix) else [tuple(c) for c in transpose(_as_matrix(A))]
    S = list(S)
    k = len(S)
    if k == 0:
        return 1
    if len(set(S)) != k:
        raise ValueError(f"repeated column in {S}")
    rest = [v for v in range(len(cols)) if v not in set(S)]
    order = S + rest
    d = len(cols[0])
    M = [[cols[v][i] for v in order] for i in range(d)]
    hf = row_hnf(M)
    H = hf.H
    if hf.pivots[:k] != tuple((i, i) for i in range(k)):
        raise ValueError(f"columns {S} are linearly dependent")
    r = hf.rank
    Hp = col_hnf(H[:r]).H
    num = math.prod(H[i][i] for i in range(k))
    den = math.prod(Hp[i][i] for i in range(k))
    q, rem = divmod(num, den)
    if rem or q < 1:
        raise ArithmeticError(f"non-integral index {num}/{den} for {S}")
    return q


def enumerate_independent_subsets(A: ExponentMatrix, support: Sequence[int] | None = None,
                                  with_index: bool = True) -> Iterator[IndependentSubset]:
    """Stream every linearly independent column subset exactly once (empty set included).

    Depth-first over increasing column indices, pruning as soon as the rank
    stops growing.  ``support`` restricts the candidate columns.
    """
    cand = list(range(A.n)) if support is None else sorted(support)
    cols = A.columns
    stack: list[tuple[int, tuple[int, ...], _EchelonBasis]] = [(0, (), _EchelonBasis())]
    while stack:
        start, chosen, basis = stack.pop()
        idx = index_of_subset(A, chosen) if with_index else 1
        yield IndependentSubset(chosen, idx)
        # push in reverse so the traversal is lexicographic
        for pos in range(len(cand) - 1, start - 1, -1):
            nb = basis.extend(cols[cand[pos]])
            if nb is not None:
                stack.append((pos + 1, chosen + (cand[pos],), nb))


def _subset_sums(A: ExponentMatrix, U: Sequence[int]) -> tuple[int, int, bool, int]:
    U = check_data(A, U)
    support = [v for v in range(A.n) if U[v] > 0]
    lower = upper = 0
    unimodular = True
    count = 0
    for sub in enumerate_independent_subsets(A, support):
        w = math.prod(U[v] for v in sub.columns)
        lower += w
        upper += sub.index * w
        unimodular &= sub.index == 1
        count += 1
    return lower, upper, unimodular, count


def zonotope_lattice_count(A: ExponentMatrix, U: Sequence[int]) -> int:
    """#(Z_A(U) ∩ L) = sum over independent S of index(S)·prod_{v in S} U_v."""
    return _subset_sums(A, U)[1]


def monomial_bounds(A: ExponentMatrix, U: Sequence[int]) -> ZonotopeReport:
    """Lower/upper bounds on the number of monomials of the mixture likelihood.

    Subsets touching a column with U_v = 0 contribute nothing, so only the
    support of U is enumerated; ``unimodular`` and ``independent_subsets``
    therefore describe the submatrix of columns with positive counts.
    """
    lower, upper, unimodular, count = _subset_sums(A, U)
    return ZonotopeReport(upper, lower, upper, unimodular, count)


def is_unimodular(A: ExponentMatrix) -> bool:
    return all(s.index == 1 for s in enumerate_independent_subsets(A))


def count_independent_subsets(A: ExponentMatrix) -> int:
    return sum(1 for _ in enumerate_independent_subsets(A, with_index=False))


def lattice_basis(A) -> Matrix:
    """Columns of the returned d×r matrix form a basis of L = ZA (lower column echelon)."""
    hf = row_hnf(transpose(_as_matrix(A)))
    return transpose(hf.H[: hf.rank])


def in_lattice(A, b: Sequence[int]) -> bool:
    """Decide b ∈ ZA by forward substitution in the Hermite basis."""
    hf = row_hnf(transpose(_as_matrix(A)))
    y = list(b)
    for (r, p) in hf.pivots:
        row = hf.H[r]
        q, rem = divmod(y[p], row[p])
        if rem:
            return False
        if q:
            y = [a - q * c for a, c in zip(y, row)]
    return not any(y)
