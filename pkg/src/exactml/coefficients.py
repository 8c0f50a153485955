"""Coefficient tables phi_A(b, U) of prod_v (theta^{a_v} + 1)^{U_v}.

A lattice point b is stored under a compressed key: the level m = |b|/a
followed by every coordinate of b except the last one of each group (that
one is recovered as s_i·m minus the rest of its group).  The key has
d - k + 1 = rank(A) coordinates and is packed into a single Python int in a
fixed radix large enough that sums of keys never carry, so shifting a table
by x·a_v is one integer addition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, TextIO

from .exact_arith import binomial, binomial_row
from .model import ExponentMatrix, check_data, sufficient_statistic

FORMAT_VERSION = 1


class TableBudgetError(MemoryError):
    """A coefficient table outgrew its configured entry budget."""

    def __init__(self, message: str, estimate: Optional[int] = None):
        super().__init__(message)
        self.estimate = estimate


class KeyCodec:
    """Packs (m, truncated b) into one integer for a fixed matrix and data size."""

    def __init__(self, A: ExponentMatrix, U: Sequence[int]):
        U = check_data(A, U)
        self.A = A
        self.total = sufficient_statistic(A, U)
        self.U = U
        self.N = sum(U)
        self.kept_rows = [j for lo, hi in A.group_slices for j in range(lo, hi - 1)]
        self.dim = 1 + len(self.kept_rows)
        self.radix = max([self.N] + [self.total[j] for j in self.kept_rows]) + 1
        self.weights = [self.radix**i for i in range(self.dim)]
        self.increments = tuple(self.pack_b(c, 1) for c in A.columns)
        self.full_key = self.pack_b(self.total, self.N)

    def pack(self, key: Sequence[int]) -> int:
        return sum(x * w for x, w in zip(key, self.weights))

    def pack_b(self, b: Sequence[int], m: int) -> int:
        return self.pack([m] + [b[j] for j in self.kept_rows])

    def unpack(self, key: int) -> tuple[int, ...]:
        out = []
        R = self.radix
        for _ in range(self.dim):
            key, r = divmod(key, R)
            out.append(r)
        return tuple(out)

    def level(self, key: int) -> int:
        return key % self.radix

    def decode(self, key: int) -> tuple[int, tuple[int, ...]]:
        """(m, b) for a packed key."""
        coords = self.unpack(key)
        m = coords[0]
        b: list[int] = []
        pos = 1
        for ti, si in zip(self.A.t, self.A.s):
            part = coords[pos:pos + ti]
            pos += ti
            b.extend(part)
            b.append(si * m - sum(part))
        return m, tuple(b)

    def encode(self, b: Sequence[int]) -> int:
        """Packed key of a lattice point b (its level is |b|/a)."""
        m, rem = divmod(sum(b), self.A.a)
        if rem:
            raise ValueError(f"|b|={sum(b)} is not divisible by a={self.A.a}")
        return self.pack_b(b, m)

    def mirror(self, key: int) -> int:
        return self.full_key - key


@dataclass
class CoeffTable:
    """Sparse map from packed keys to phi_A(b, U) > 0.

    With ``half`` set only keys k with k <= mirror(k) are stored; the other
    half follows from phi(b) = phi(AU - b).
    """

    codec: KeyCodec
    entries: dict[int, int]
    columns: tuple[int, ...]  # column indices of codec.A covered by this table
    U: tuple[int, ...]  # data restricted to ``columns``
    half: bool = False

    @property
    def N(self) -> int:
        return sum(self.U)

    @property
    def block_total_key(self) -> int:
        inc = self.codec.increments
        return sum(inc[v] * u for v, u in zip(self.columns, self.U))

    def __len__(self) -> int:
        """Number of nonzero coefficients (both halves counted in half mode)."""
        if not self.half:
            return len(self.entries)
        K = self.block_total_key
        return sum(1 if 2 * k == K else 2 for k in self.entries)

    def items(self) -> Iterator[tuple[int, int]]:
        """All (packed key, phi) pairs, expanding the mirrored half if needed."""
        if not self.half:
            yield from self.entries.items()
            return
        K = self.block_total_key
        for k, v in self.entries.items():
            yield k, v
            if 2 * k != K:
                yield K - k, v

    def b_items(self) -> Iterator[tuple[tuple[int, ...], int]]:
        decode = self.codec.decode
        for k, v in self.items():
            yield decode(k)[1], v

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return dict(self.b_items())

    def get(self, b: Sequence[int]) -> int:
        try:
            k = self.codec.encode(b)
        except ValueError:
            return 0
        if self.half:
            K = self.block_total_key
            if 2 * k > K:
                k = K - k
        return self.entries.get(k, 0)

    def full(self) -> "CoeffTable":
        if not self.half:
            return self
        return CoeffTable(self.codec, dict(self.items()), self.columns, self.U, False)


@dataclass(frozen=True)
class BlockPartition:
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(tuple(b) for b in self.blocks if len(b)))

    @classmethod
    def contiguous(cls, sizes: Sequence[int]) -> "BlockPartition":
        out, lo = [], 0
        for s in sizes:
            out.append(tuple(range(lo, lo + s)))
            lo += s
        return cls(tuple(out))

    @classmethod
    def balanced(cls, n: int, m: int) -> "BlockPartition":
        m = max(1, min(m, n))
        base, extra = divmod(n, m)
        return cls.contiguous([base + (i < extra) for i in range(m)])

    def validate(self, n: int) -> None:
        flat = [v for b in self.blocks for v in b]
        if sorted(flat) != list(range(n)):
            raise ValueError(f"partition {self.blocks} does not cover columns 0..{n - 1} exactly once")

    def __len__(self) -> int:
        return len(self.blocks)


def phi_naive(A: ExponentMatrix, U: Sequence[int], b: Sequence[int]) -> int:
    """phi_A(b,U) = sum over Ax=b, 0<=x<=U of prod C(U_v, x_v).

    Each x_v is confined to [l_v, u_v] with u_v = min(U_v, b_i // a_iv) and
    l_v = U_v - min(U_v, c_i // a_iv) over rows i with a_iv > 0, c = AU - b.
    """
    U = check_data(A, U)
    b = tuple(b)
    total = sufficient_statistic(A, U)
    if len(b) != A.d:
        raise ValueError(f"b has length {len(b)}, expected {A.d}")
    c = tuple(t - x for t, x in zip(total, b))
    if any(x < 0 for x in b) or any(x < 0 for x in c):
        return 0
    n, d = A.n, A.d
    cols = A.columns
    lo, hi = [], []
    for v in range(n):
        uv = lv = U[v]
        for i in range(d):
            if cols[v][i]:
                uv = min(uv, b[i] // cols[v][i])
                lv = min(lv, c[i] // cols[v][i])
        lo.append(U[v] - lv)
        hi.append(uv)
        if lo[-1] > hi[-1]:
            return 0
    return _phi_search(U, cols, lo, hi, b)


def _phi_search(U, cols, lo, hi, b) -> int:
    n, d = len(cols), len(b)
    reach = [[0] * d for _ in range(n + 1)]
    for v in range(n - 1, -1, -1):
        reach[v] = [r + hi[v] * a for r, a in zip(reach[v + 1], cols[v])]

    def rec(v: int, resid: tuple[int, ...]) -> int:
        if v == n:
            return 0 if any(resid) else 1
        if any(r > m for r, m in zip(resid, reach[v])):
            return 0
        acc = 0
        col = cols[v]
        for x in range(lo[v], hi[v] + 1):
            r2 = tuple(r - x * a for r, a in zip(resid, col))
            if min(r2) < 0:
                break
            sub = rec(v + 1, r2)
            if sub:
                acc += binomial(U[v], x) * sub
        return acc

    return rec(0, tuple(b))


def phi_naive_table(A: ExponentMatrix, U: Sequence[int], codec: Optional[KeyCodec] = None) -> CoeffTable:
    """Full table by evaluating phi_naive at every lattice point of the bounding box."""
    U = check_data(A, U)
    codec = codec or KeyCodec(A, U)
    total = sufficient_statistic(A, U)
    entries: dict[int, int] = {}
    ranges = [range(t + 1) for t in total]
    for b in itertools.product(*ranges):
        if sum(b) % A.a:
            continue
        phi = phi_naive(A, U, b)
        if phi:
            entries[codec.encode(b)] = phi
    return CoeffTable(codec, entries, tuple(range(A.n)), U)


def phi_recurrence(A: ExponentMatrix, U: Sequence[int], codec: Optional[KeyCodec] = None,
                   columns: Optional[Sequence[int]] = None, half: bool = False,
                   max_entries: Optional[int] = None) -> CoeffTable:
    """Expand prod_v (theta^{a_v}+1)^{U_v} one column at a time.

    Starting from the constant 1, each column with U_v > 0 convolves the table
    with its binomial profile {x·a_v : C(U_v, x)}.  The loop runs entries-outer,
    x-inner.  ``columns`` restricts to a block of columns (keys stay in the
    codec of the whole matrix).  ``half`` keeps only one of each mirror pair
    b, AU-b when writing the final column.
    """
    if codec is None:
        codec = KeyCodec(A, U)
        U = check_data(A, U)
    else:
        U = tuple(U)
        if len(U) != A.n:
            raise ValueError(f"data vector has length {len(U)}, matrix has {A.n} columns")
    cols = tuple(range(A.n)) if columns is None else tuple(columns)
    Ublock = tuple(U[v] for v in cols)
    active = [v for v in cols if U[v] > 0]
    K = sum(codec.increments[v] * U[v] for v in cols)
    table: dict[int, int] = {0: 1}
    for step, v in enumerate(active):
        u = U[v]
        inc = codec.increments[v]
        profile = list(zip([x * inc for x in range(u + 1)], binomial_row(u)))
        last = half and step == len(active) - 1
        new: dict[int, int] = {}
        get = new.get
        for key, val in table.items():
            for off, c in profile:
                k = key + off
                if last and 2 * k > K:
                    break
                new[k] = get(k, 0) + c * val
        table = new
        if max_entries is not None and len(table) > max_entries:
            raise TableBudgetError(
                f"coefficient table reached {len(table)} entries (budget {max_entries}) "
                f"after {step + 1} of {len(active)} columns", len(table))
    if half and not active:
        half = False
    return CoeffTable(codec, table, cols, Ublock, half)


def block_tables(A: ExponentMatrix, U: Sequence[int], partition: BlockPartition,
                 codec: Optional[KeyCodec] = None, max_entries: Optional[int] = None) -> list[CoeffTable]:
    U = check_data(A, U)
    partition.validate(A.n)
    codec = codec or KeyCodec(A, U)
    return [phi_recurrence(A, U, codec, columns=blk, max_entries=max_entries) for blk in partition.blocks]


def convolve(t1: CoeffTable, t2: CoeffTable) -> CoeffTable:
    """Product of the two generating polynomials (blocks must share a codec)."""
    if t1.codec is not t2.codec:
        raise ValueError("tables use different key codecs")
    if set(t1.columns) & set(t2.columns):
        raise ValueError("tables share columns")
    out: dict[int, int] = {}
    get = out.get
    right = list(t2.items())
    for k1, v1 in t1.items():
        for k2, v2 in right:
            k = k1 + k2
            out[k] = get(k, 0) + v1 * v2
    return CoeffTable(t1.codec, out, t1.columns + t2.columns, t1.U + t2.U)


def table_total(table: CoeffTable) -> int:
    """Sum of all coefficients (the expansion at theta = 1), which is 2^N."""
    return sum(v for _, v in table.items())


def symmetric_pairs_ok(table: CoeffTable) -> bool:
    full = dict(table.items())
    K = table.block_total_key
    return all(full.get(K - k) == v for k, v in full.items())


# --------------------------------------------------------------------------
# text dump
# --------------------------------------------------------------------------

def dump_table(table: CoeffTable, fh: TextIO) -> None:
    """Write a versioned text dump: header lines, then 'key coords... coefficient' per entry."""
    A = table.codec.A
    fh.write(f"# exactml-coeff-table v{FORMAT_VERSION}\n")
    fh.write(f"# t={','.join(map(str, A.t))} s={','.join(map(str, A.s))}\n")
    fh.write("# columns=" + " ".join(":".join(map(str, c)) for c in A.columns) + "\n")
    fh.write(f"# U={','.join(map(str, table.codec.U))}\n")
    fh.write(f"# block={','.join(map(str, table.columns))} half={int(table.half)}\n")
    for k in sorted(table.entries):
        fh.write(" ".join(map(str, table.codec.unpack(k))) + f" {table.entries[k]}\n")


def load_table(fh: TextIO) -> CoeffTable:
    header: dict[str, str] = {}
    lines = iter(fh)
    first = next(lines).strip()
    if not first.startswith("# exactml-coeff-table v"):
        raise ValueError("not a coefficient table dump")
    version = int(first.rsplit("v", 1)[1])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported dump version {version}")
    body = []
    for line in lines:
        if line.startswith("#"):
            for part in line[1:].split():
                key, _, val = part.partition("=")
                if key == "columns":
                    header[key] = line.split("=", 1)[1].strip()
                    break
                header[key] = val
        elif line.strip():
            body.append(line)
    t = tuple(int(x) for x in header["t"].split(","))
    s = tuple(int(x) for x in header["s"].split(","))
    cols = tuple(tuple(int(x) for x in c.split(":")) for c in header["columns"].split())
    A = ExponentMatrix(cols, t, s)
    U = tuple(int(x) for x in header["U"].split(","))
    codec = KeyCodec(A, U)
    block = tuple(int(x) for x in header["block"].split(",")) if header.get("block") else ()
    entries = {}
    for line in body:
        parts = [int(x) for x in line.split()]
        entries[codec.pack(parts[:-1])] = parts[-1]
    return CoeffTable(codec, entries, block, tuple(U[v] for v in block), bool(int(header.get("half", "0"))))
