"""Exact marginal likelihood integrals for the independence model and its
two-component mixture, with uniform or rational Dirichlet priors.

The mixture integral is a sum over lattice points b of the zonotope,

    I = sum_b phi(b) · w(b, AU - b),

where w is a product of simplex moments.  Every factor of w depends either on
the level m = |b|/a alone or on a single coordinate of b, so after scaling by
per-level common denominators the inner sum is over integers only:

    I = sum_m level(m) · S[m],   S[m] = sum_{|b|=am} phi(b) · prod_j H_j(b_j).

``level(m)`` is a rational and ``H_j`` are integer tables built once.  This
keeps the hot loop free of rational arithmetic.
"""

from __future__ import annotations

import decimal
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from . import exact_arith as ea
from .coefficients import BlockPartition, CoeffTable, KeyCodec, TableBudgetError, block_tables
from .lattice import ZonotopeReport, monomial_bounds
from .model import (ExponentMatrix, ModelError, check_data, independence_marginal, monomial_integral,
                    normalizing_constant, sufficient_statistic)


class BudgetError(MemoryError):
    """Estimated table size exceeds the configured memory budget."""

    def __init__(self, message: str, estimate: Optional[int] = None):
        super().__init__(message)
        self.estimate = estimate


# --------------------------------------------------------------------------
# priors
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PriorSpec:
    """Uniform prior, or Dirichlet parameters (alpha, beta, gamma).

    ``alpha`` has two entries (mixture weights); ``beta`` and ``gamma`` hold
    one list per group with t_i + 1 entries each (first and second mixture
    component).  Missing parts default to all ones, i.e. uniform.
    """

    alpha: Optional[tuple[Fraction, Fraction]] = None
    beta: Optional[tuple[tuple[Fraction, ...], ...]] = None
    gamma: Optional[tuple[tuple[Fraction, ...], ...]] = None

    def __post_init__(self):
        if self.alpha is not None:
            a = tuple(ea.as_fraction(x) for x in self.alpha)
            if len(a) != 2:
                raise ModelError(f"alpha needs two entries, got {self.alpha}")
            object.__setattr__(self, "alpha", a)
        for name in ("beta", "gamma"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, tuple(tuple(ea.as_fraction(x) for x in g) for g in val))
        for x in self.parameters():
            if x <= 0:
                raise ModelError(f"Dirichlet parameters must be positive, got {x}")

    @classmethod
    def uniform(cls) -> "PriorSpec":
        return cls()

    @property
    def variant(self) -> str:
        return "uniform" if self.is_uniform else "dirichlet"

    @property
    def is_uniform(self) -> bool:
        return all(x == 1 for x in self.parameters())

    def parameters(self):
        if self.alpha is not None:
            yield from self.alpha
        for part in (self.beta, self.gamma):
            if part is not None:
                for g in part:
                    yield from g

    def resolved(self, A: ExponentMatrix) -> tuple[tuple[Fraction, Fraction], list[list[Fraction]], list[list[Fraction]]]:
        alpha = self.alpha or (Fraction(1), Fraction(1))
        ones = [[Fraction(1)] * (ti + 1) for ti in A.t]
        beta = [list(g) for g in self.beta] if self.beta is not None else ones
        gamma = [list(g) for g in self.gamma] if self.gamma is not None else [list(g) for g in ones]
        shape = [ti + 1 for ti in A.t]
        if [len(g) for g in beta] != shape or [len(g) for g in gamma] != shape:
            raise ModelError(f"Dirichlet beta/gamma must have group lengths {shape}")
        return alpha, beta, gamma


UNIFORM = PriorSpec()


@dataclass(frozen=True)
class MapPoint:
    """A parameter point (sigma, theta, rho); theta and rho are per-group lists."""

    sigma: tuple
    theta: tuple
    rho: tuple


@dataclass
class IntegralResult:
    exact: Fraction  # raw integral, without the normalizing constant
    normalizing_constant: int
    term_count: Optional[int] = None
    bounds: Optional[ZonotopeReport] = None
    method: str = "fast"
    partition: Optional[BlockPartition] = None

    @property
    def marginal(self) -> Fraction:
        """Raw integral times the normalizing constant (the statistical marginal likelihood)."""
        return self.exact * self.normalizing_constant

    def value(self, include_constant: bool = True) -> Fraction:
        return self.marginal if include_constant else self.exact

    def decimal(self, digits: int = 25, include_constant: bool = True) -> str:
        return ea.format_scientific(self.value(include_constant), digits)

    def log10(self, digits: int = 10, include_constant: bool = True) -> str:
        return ea.log10_of(self.value(include_constant), digits)


# --------------------------------------------------------------------------
# term weights
# --------------------------------------------------------------------------

def _moment(block: Sequence[int], params: Sequence[Fraction]) -> Fraction:
    """E[theta^block] under Dirichlet(params) on a simplex."""
    out = Fraction(1)
    for x, q in zip(block, params):
        out *= ea.rising(q, x)
    return out / ea.rising(sum(params), sum(block))


def term_weight(b: Sequence[int], c: Sequence[int], A: ExponentMatrix,
                prior: PriorSpec = UNIFORM) -> Fraction:
    """Integral over Delta_1 x P x P of sigma0^{|b|/a} sigma1^{|c|/a} theta^b rho^c
    against the prior (a probability measure)."""
    mb, rb = divmod(sum(b), A.a)
    mc, rc = divmod(sum(c), A.a)
    if rb or rc:
        raise ValueError(f"|b|={sum(b)} or |c|={sum(c)} not divisible by a={A.a}: not a lattice point")
    alpha, beta, gamma = prior.resolved(A)
    w = ea.rising(alpha[0], mb) * ea.rising(alpha[1], mc) / ea.rising(alpha[0] + alpha[1], mb + mc)
    for (lo, hi), bg, gg in zip(A.group_slices, beta, gamma):
        w *= _moment(b[lo:hi], bg) * _moment(c[lo:hi], gg)
    return w


class WeightTables:
    """Integer per-coordinate tables H_j and rational per-level factors.

    For a Dirichlet parameter q = p/r, rising(q, x) = P(x) / r^x with P integer.
    Inside group i the denominators r^x are brought to the common base
    Q_i = lcm(r) via (Q_i/r)^x; since the coordinates of a group sum to s_i·m,
    the leftover Q_i^{s_i m} depends on the level only and moves into level(m).
    """

    def __init__(self, A: ExponentMatrix, U: Sequence[int], prior: PriorSpec = UNIFORM):
        U = check_data(A, U)
        self.A = A
        self.N = N = sum(U)
        self.total = total = sufficient_statistic(A, U)
        alpha, beta, gamma = prior.resolved(A)
        self.H: list[list[int]] = []
        lvl_num = [1] * (N + 1)
        lvl_den = [1] * (N + 1)
        for (lo, hi), si, bg, gg in zip(A.group_slices, A.s, beta, gamma):
            Qb = ea.lcm_all(q.denominator for q in bg)
            Qg = ea.lcm_all(q.denominator for q in gg)
            for j in range(lo, hi):
                T = total[j]
                qb, qg = bg[j - lo], gg[j - lo]
                Pb = ea.rising_table(qb, T)
                Pg = ea.rising_table(qg, T)
                fb, fg = Qb // qb.denominator, Qg // qg.denominator
                if fb == 1 and fg == 1:
                    self.H.append([Pb[x] * Pg[T - x] for x in range(T + 1)])
                else:
                    self.H.append([Pb[x] * fb**x * Pg[T - x] * fg ** (T - x) for x in range(T + 1)])
            Sb, Sg = sum(bg), sum(gg)
            Rb = ea.rising_table(Sb, si * N)
            Rg = ea.rising_table(Sg, si * N)
            for m in range(N + 1):
                # rising(S, n) = R[n] / den(S)^n
                mb, mc = si * m, si * (N - m)
                lvl_num[m] *= Sb.denominator**mb * Sg.denominator**mc
                lvl_den[m] *= Rb[mb] * Rg[mc] * Qb**mb * Qg**mc
        a0, a1 = alpha
        A0 = ea.rising_table(a0, N)
        A1 = ea.rising_table(a1, N)
        top = ea.rising(a0 + a1, N)
        self.level: list[Fraction] = []
        for m in range(N + 1):
            num = A0[m] * A1[N - m] * lvl_num[m]
            den = a0.denominator**m * a1.denominator ** (N - m) * lvl_den[m]
            self.level.append(Fraction(num, den) / top)

    def weight(self, b: Sequence[int], m: int) -> Fraction:
        out = 1
        for h, x in zip(self.H, b):
            out *= h[x]
        return self.level[m] * out

    def combine(self, sums: dict[int, int]) -> Fraction:
        total = Fraction(0)
        for m in sorted(sums):
            if sums[m]:
                total += self.level[m] * sums[m]
        return total


# --------------------------------------------------------------------------
# summation over table entries
# --------------------------------------------------------------------------

def _level_sums(items, codec: KeyCodec, H: list[list[int]]) -> dict[int, int]:
    """sum_{key} phi · prod_j H_j(b_j), grouped by level, for packed (key, phi) pairs."""
    A = codec.A
    R = codec.radix
    groups = [(ti, si) for ti, si in zip(A.t, A.s)]
    sums: dict[int, int] = {}
    for key, phi in items:
        m = key % R
        key //= R
        acc = phi
        hpos = 0
        for ti, si in groups:
            rest = si * m
            for _ in range(ti):
                key, x = divmod(key, R)
                rest -= x
                acc *= H[hpos][x]
                hpos += 1
            acc *= H[hpos][rest]
            hpos += 1
        sums[m] = sums.get(m, 0) + acc
    return sums


def _merge(into: dict[int, int], part: dict[int, int]) -> None:
    for m, v in part.items():
        into[m] = into.get(m, 0) + v


_WORK: dict = {}


def _worker_chunk(bounds: tuple[int, int]) -> dict[int, int]:
    outer = _WORK["outer"][bounds[0]:bounds[1]]
    return _nested_sums(outer, _WORK["inner"], _WORK["codec"], _WORK["H"])


def _nested_sums(outer, inner_tables, codec, H) -> dict[int, int]:
    if not inner_tables:
        return _level_sums(outer, codec, H)
    inner = [list(t.items()) for t in inner_tables]

    def combos():
        for k1, v1 in outer:
            for rest in itertools.product(*inner):
                k, v = k1, v1
                for k2, v2 in rest:
                    k += k2
                    v *= v2
                yield k, v

    return _level_sums(combos(), codec, H)


def _parallel_sums(tables: list[CoeffTable], codec: KeyCodec, H, threads: int) -> dict[int, int]:
    outer = list(tables[0].items())
    inner = tables[1:]
    if threads <= 1 or len(outer) < 2 * threads:
        return _nested_sums(outer, inner, codec, H)
    # fixed chunking and in-order merge keep the result independent of scheduling
    step = -(-len(outer) // threads)
    chunks = [(i, min(i + step, len(outer))) for i in range(0, len(outer), step)]
    _WORK.update(outer=outer, inner=inner, codec=codec, H=H)
    try:
        import multiprocessing as mp

        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
            parts = list(pool.map(_worker_chunk, chunks))
    finally:
        _WORK.clear()
    sums: dict[int, int] = {}
    for p in parts:
        _merge(sums, p)
    return sums


def estimate_entry_bytes(N: int) -> int:
    """Rough resident size of one table entry (dict slot, packed key, coefficient up to 2^N)."""
    return 100 + N // 8


def default_partition(A: ExponentMatrix, U: Sequence[int], budget_entries: Optional[int]) -> BlockPartition:
    """Fewest contiguous balanced blocks whose estimated table sizes fit the budget.

    Fewer blocks give the smaller time exponent sum_j rank(A^[j]); the
    estimate for each block is the upper monomial bound of that block.
    """
    U = check_data(A, U)
    if budget_entries is None:
        return BlockPartition.balanced(A.n, 1)
    for m in range(1, A.n + 1):
        part = BlockPartition.balanced(A.n, m)
        sizes = [monomial_bounds(A.submatrix(blk), [U[v] for v in blk]).upper_bound for blk in part.blocks]
        if max(sizes) <= budget_entries:
            return part
    raise BudgetError(f"even single-column blocks exceed the budget of {budget_entries} entries")


def mixture_marginal(A: ExponentMatrix, U: Sequence[int], prior: PriorSpec = UNIFORM, *,
                     partition: Optional[BlockPartition] = None,
                     multiplicities: Optional[Sequence[int]] = None,
                     method: str = "fast", threads: int = 1,
                     memory_budget: Optional[int] = None,
                     with_bounds: bool = False) -> IntegralResult:
    """Marginal likelihood of U under the two-component mixture of the model A.

    ``method="fast"`` expands per-block coefficient tables by the column
    recurrence and sums over all combinations of their entries.
    ``method="streaming"`` folds the weights in while expanding, dropping each
    coordinate of b as soon as no remaining column touches it; it needs far
    less memory and gives no term count.  ``method="naive"`` evaluates every
    coefficient by the explicit sum over x (small inputs only).

    ``memory_budget`` is in bytes.  The returned ``exact`` is the raw integral;
    ``marginal`` multiplies in the normalizing constant (alpha-weighted when
    ``multiplicities`` marks U as reduced).
    """
    U = check_data(A, U)
    const = normalizing_constant(U, multiplicities)
    bounds = monomial_bounds(A, U) if with_bounds else None
    weights = WeightTables(A, U, prior)
    codec = KeyCodec(A, U)
    budget_entries = None if memory_budget is None else max(1, memory_budget // estimate_entry_bytes(sum(U)))
    if method == "streaming":
        exact = streaming_integral(A, U, weights)
        return IntegralResult(exact, const, None, bounds, method)
    if method == "naive":
        from .coefficients import phi_naive_table

        table = phi_naive_table(A, U, codec)
        sums = _level_sums(table.items(), codec, weights.H)
        return IntegralResult(weights.combine(sums), const, len(table), bounds, method,
                              BlockPartition.balanced(A.n, 1))
    if method != "fast":
        raise ValueError(f"unknown method {method!r}")
    if partition is None:
        partition = default_partition(A, U, budget_entries)
    partition.validate(A.n)
    try:
        tables = block_tables(A, U, partition, codec, max_entries=budget_entries)
    except TableBudgetError as exc:
        raise BudgetError(f"{exc}; use a finer partition (more blocks)", exc.estimate) from exc
    sums = _parallel_sums(tables, codec, weights.H, threads)
    term_count = len(tables[0]) if len(tables) == 1 else None
    return IntegralResult(weights.combine(sums), const, term_count, bounds, method, partition)


# --------------------------------------------------------------------------
# streaming contraction
# --------------------------------------------------------------------------

def streaming_order(A: ExponentMatrix, U: Sequence[int]) -> list[int]:
    """Column order that closes coordinates early.

    Repeatedly pick the open row touched by the fewest unprocessed columns and
    take all of those columns next.
    """
    todo = [v for v in range(A.n) if U[v] > 0]
    order: list[int] = []
    while todo:
        best = None
        for j in range(A.d):
            touching = [v for v in todo if A.columns[v][j]]
            if touching and (best is None or len(touching) < len(best)):
                best = touching
        order.extend(best)
        todo = [v for v in todo if v not in set(best)]
    return order


def streaming_integral(A: ExponentMatrix, U: Sequence[int], weights: WeightTables,
                       order: Optional[Sequence[int]] = None) -> Fraction:
    """Sum phi(b)·w(b) without materializing the coefficient table.

    State keys pack (m, b_0, ..., b_{d-1}) with closed coordinates zeroed; a
    coordinate closes after the last column touching it, at which point its
    factor H_j(b_j) is multiplied into the value.
    """
    U = check_data(A, U)
    d = A.d
    H = weights.H
    N = sum(U)
    R = max([N] + list(weights.total)) + 1
    W = [R ** (j + 1) for j in range(d)]
    order = list(order) if order is not None else streaming_order(A, U)
    last_touch: dict[int, int] = {}
    for step, v in enumerate(order):
        for j in range(d):
            if A.columns[v][j]:
                last_touch[j] = step
    closing: list[list[int]] = [[] for _ in order]
    value0 = 1
    for j in range(d):
        if j in last_touch:
            closing[last_touch[j]].append(j)
        else:
            value0 *= H[j][0]
    state: dict[int, int] = {0: value0}
    for step, v in enumerate(order):
        col = A.columns[v]
        inc = 1 + sum(x * W[j] for j, x in enumerate(col))
        prof = list(zip([x * inc for x in range(U[v] + 1)], ea.binomial_row(U[v])))
        new: dict[int, int] = {}
        get = new.get
        for key, val in state.items():
            for off, c in prof:
                k = key + off
                new[k] = get(k, 0) + c * val
        if closing[step]:
            # fold H_j(b_j) in once per distinct state rather than per insertion
            close = [(W[j], H[j]) for j in closing[step]]
            folded: dict[int, int] = {}
            fget = folded.get
            for k, val in new.items():
                for w, h in close:
                    x = (k // w) % R
                    k -= x * w
                    val *= h[x]
                folded[k] = fget(k, 0) + val
            new = folded
        state = new
    return weights.combine(state)


# --------------------------------------------------------------------------
# Bayes factor, likelihood at a point, BIC, asymptotics
# --------------------------------------------------------------------------

def independence_value(A: ExponentMatrix, U: Sequence[int], prior: PriorSpec = UNIFORM,
                       multiplicities: Optional[Sequence[int]] = None) -> Fraction:
    """Independence-model marginal under the theta-part (beta) of the prior."""
    return independence_marginal(A, U, multiplicities, beta=prior.beta, include_constant=True)


def bayes_factor(A: ExponentMatrix, U: Sequence[int], prior: PriorSpec = UNIFORM,
                 mixture: Optional[IntegralResult] = None, **kwargs) -> Fraction:
    """Marginal likelihood under the independence model over that under the mixture.

    The normalizing constants cancel, so reduced and unreduced data give the
    same factor.
    """
    U = check_data(A, U)
    if mixture is None:
        mixture = mixture_marginal(A, U, prior, **kwargs)
    if mixture.exact <= 0:
        raise ArithmeticError("mixture marginal is not positive")
    indep_raw = monomial_integral(A, sufficient_statistic(A, U), prior.beta)
    return indep_raw / mixture.exact


def _dec(x, ctx: decimal.Context) -> decimal.Decimal:
    if isinstance(x, Fraction):
        return ctx.divide(decimal.Decimal(x.numerator), decimal.Decimal(x.denominator))
    if isinstance(x, float):
        return decimal.Decimal(repr(x))
    return decimal.Decimal(x)


def _normalize_point(A: ExponentMatrix, point: MapPoint, ctx: decimal.Context, tol: decimal.Decimal):
    sigma = [_dec(x, ctx) for x in point.sigma]
    if len(sigma) == 1:
        sigma = [sigma[0], 1 - sigma[0]]

    def groups(part):
        part = list(part)
        if len(part) == A.k and all(isinstance(g, (list, tuple)) for g in part):
            gs = [[_dec(x, ctx) for x in g] for g in part]
        else:
            gs = [[_dec(x, ctx) for x in part]] if A.k == 1 else None
            if gs is None:
                raise ModelError("theta/rho must be given per group")
        out = []
        for g, ti in zip(gs, A.t):
            if len(g) == ti:
                g = g + [1 - sum(g)]
            if len(g) != ti + 1:
                raise ModelError(f"group needs {ti + 1} coordinates, got {len(g)}")
            out.append(g)
        return out

    theta, rho = groups(point.theta), groups(point.rho)
    for block in [sigma] + theta + rho:
        if any(x < -tol for x in block) or abs(sum(block) - 1) > tol:
            raise ModelError(f"point coordinates {block} leave the simplex")
    return sigma, theta, rho


def likelihood_at(A: ExponentMatrix, U: Sequence[int], point: MapPoint, digits: int = 30,
                  multiplicities: Optional[Sequence[int]] = None) -> decimal.Decimal:
    """L_U(sigma, theta, rho) = const · prod_v (sigma0 theta^{a_v} + sigma1 rho^{a_v})^{U_v}.

    theta/rho may omit the last coordinate of each group; coordinates must lie
    in their simplices to within 1e-12.
    """
    U = check_data(A, U)
    ctx = ea._context(digits + 20)
    with decimal.localcontext(ctx):
        sigma, theta, rho = _normalize_point(A, point, ctx, decimal.Decimal("1e-12"))
        th = [x for g in theta for x in g]
        rh = [x for g in rho for x in g]
        log_total = decimal.Decimal(normalizing_constant(U, multiplicities)).ln()
        for col, u in zip(A.columns, U):
            if not u:
                continue
            p1 = decimal.Decimal(1)
            p2 = decimal.Decimal(1)
            for e, x, y in zip(col, th, rh):
                if e:
                    p1 *= x**e
                    p2 *= y**e
            p = sigma[0] * p1 + sigma[1] * p2
            if p <= 0:
                return decimal.Decimal(0)
            log_total += u * p.ln()
        out = log_total.exp()
    return ea._round_sig(out, digits)


def loglik_at(A: ExponentMatrix, U: Sequence[int], point: MapPoint, digits: int = 10,
              multiplicities: Optional[Sequence[int]] = None) -> str:
    """log10 of the likelihood at a point, to `digits` significant digits."""
    val = likelihood_at(A, U, point, digits + 20, multiplicities)
    if val <= 0:
        raise ValueError("likelihood vanishes at this point")
    ctx = ea._context(digits + 20)
    return ea._format_plain(ea._round_sig(val.log10(ctx), digits))


def bic_score(A: ExponentMatrix, N: int, likelihood, digits: int = 10) -> str:
    """log10(L) - (2d - 2k + 1)/2 · log10(N) (base-10 logarithms), to `digits` decimals."""
    ctx = ea._context(digits + 30)
    L = _dec(ea.as_fraction(likelihood) if isinstance(likelihood, (int, Fraction)) else likelihood, ctx)
    if L <= 0:
        raise ValueError(f"likelihood must be positive, got {likelihood}")
    if N < 1:
        raise ValueError("sample size must be positive")
    dim = 2 * A.d - 2 * A.k + 1
    val = ctx.subtract(L.log10(ctx), ctx.multiply(ctx.divide(decimal.Decimal(dim), 2),
                                                   decimal.Decimal(N).log10(ctx)))
    q = val.quantize(decimal.Decimal(1).scaleb(-digits), rounding=decimal.ROUND_HALF_EVEN, context=ctx)
    return ea._format_plain(q)


def asymptotic_F(A: ExponentMatrix, U: Sequence[int], q: Sequence, digits: int = 20,
                 multiplicities: Optional[Sequence[int]] = None, base: int = 10,
                 **kwargs) -> decimal.Decimal:
    """F_N(U) = N sum_i q_i log(q_i/alpha_i) - log I_N(U), I_N the raw integral.

    With reduced data the alpha_i are the column multiplicities, which makes F
    the same quantity as on the full state space (where all alpha_i = 1).
    Logarithms are base 10 by default; pass ``base=0`` for natural logs.
    """
    U = check_data(A, U)
    N = sum(U)
    mult = multiplicities or [1] * A.n
    prec = digits + 20
    ctx = ea._context(prec)
    log = (lambda r: ea.ln_decimal(r, prec)) if base == 0 else (
        lambda r: ctx.divide(ea.ln_decimal(r, prec), ea.ln_decimal(base, prec)))
    entropy = decimal.Decimal(0)
    for qi, al in zip(q, mult):
        qi = ea.as_fraction(qi)
        if qi > 0:
            entropy = ctx.add(entropy, ctx.multiply(_dec(qi, ctx), log(qi / al)))
    integral = mixture_marginal(A, U, **kwargs).exact
    val = ctx.subtract(ctx.multiply(decimal.Decimal(N), entropy), log(integral))
    return ea._round_sig(val, digits)
