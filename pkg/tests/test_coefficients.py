from __future__ import annotations

import io
import itertools
import math
import random

import pytest
from hypothesis import given, strategies as st

from exactml.coefficients import (BlockPartition, CoeffTable, KeyCodec, TableBudgetError, block_tables, convolve,
                                  dump_table, load_table, phi_naive, phi_naive_table, phi_recurrence,
                                  symmetric_pairs_ok, table_total)
from exactml.lattice import monomial_bounds
from exactml.model import ExponentMatrix, ModelSpec, build_matrix, reduce_matrix, sufficient_statistic
from exactml.oracle import brute_force_phi

COIN = reduce_matrix(build_matrix(ModelSpec((4,), (1,)))).matrix
COIN_U = (51, 18, 73, 25, 75)


def _poly_product(A, U):
    """Direct expansion of prod_v (theta^{a_v} + 1)^{U_v} as a dict of exponent tuples."""
    poly = {(0,) * A.d: 1}
    for col, u in zip(A.columns, U):
        for _ in range(u):
            new: dict = {}
            for e, c in poly.items():
                for shift in ((0,) * A.d, col):
                    k = tuple(x + y for x, y in zip(e, shift))
                    new[k] = new.get(k, 0) + c
            poly = new
    return poly


def random_instance(rnd: random.Random, max_N: int, max_n: int = 5):
    k = rnd.randint(1, 2)
    s = tuple(rnd.randint(1, 2) for _ in range(k))
    t = tuple(rnd.randint(1, 2) for _ in range(k))
    spec = ModelSpec(s, t)
    red = reduce_matrix(build_matrix(spec))
    cols = rnd.sample(range(red.matrix.n), min(max_n, red.matrix.n))
    A = red.matrix.submatrix(sorted(cols))
    U = [0] * A.n
    for _ in range(rnd.randint(0, max_N)):
        U[rnd.randrange(A.n)] += 1
    return A, tuple(U)


instances = st.builds(lambda seed: random_instance(random.Random(seed), 8), st.integers(0, 10**6))


def test_phi_naive_boundary_values():
    U = (2, 1, 0, 3, 1)
    assert phi_naive(COIN, U, (0, 0)) == 1
    assert phi_naive(COIN, U, sufficient_statistic(COIN, U)) == 1
    assert phi_naive(COIN, U, (1, 0)) == 0
    assert phi_naive(COIN, U, (-1, 1)) == 0


def test_phi_naive_two_factor_product():
    U = (1, 1, 0, 0, 0)
    poly = _poly_product(COIN, U)
    assert poly == {(7, 1): 1, (4, 0): 1, (3, 1): 1, (0, 0): 1}
    for b in [(7, 1), (4, 0), (3, 1), (0, 0)]:
        assert phi_naive(COIN, U, b) == 1


def test_recurrence_single_column():
    A = ExponentMatrix.from_rows([[2], [1]])
    table = phi_recurrence(A, (5,))
    assert table.as_dict() == {(2 * x, x): math.comb(5, x) for x in range(6)}


def test_recurrence_coin_term_count():
    table = phi_recurrence(COIN, COIN_U)
    assert len(table) == 48646
    assert table_total(table) == 2**242


@given(instances)
def test_recurrence_equals_naive(inst):
    A, U = inst
    rec = phi_recurrence(A, U).as_dict()
    naive = phi_naive_table(A, U).as_dict()
    assert rec == naive
    assert rec == _poly_product(A, U)


@given(instances)
def test_symmetry_and_total(inst):
    A, U = inst
    table = phi_recurrence(A, U)
    assert symmetric_pairs_ok(table)
    assert table_total(table) == 2 ** sum(U)
    total = sufficient_statistic(A, U)
    for b, v in table.b_items():
        assert table.get(tuple(t - x for t, x in zip(total, b))) == v


@given(st.builds(lambda seed: random_instance(random.Random(seed), 12), st.integers(0, 10**6)))
def test_count_identity_against_binary_vectors(inst):
    A, U = inst
    table = phi_recurrence(A, U)
    bs = list(table.as_dict().items())
    rnd = random.Random(len(bs))
    for b, v in rnd.sample(bs, min(4, len(bs))):
        assert brute_force_phi(A, U, b) == v == phi_naive(A, U, b)


def test_count_identity_full_table_small():
    U = (1, 2, 0, 1, 1)
    total = sufficient_statistic(COIN, U)
    table = phi_recurrence(COIN, U)
    for b in itertools.product(*(range(t + 1) for t in total)):
        assert brute_force_phi(COIN, U, b) == table.get(b)


@given(instances)
def test_entry_count_within_monomial_bounds(inst):
    A, U = inst
    rep = monomial_bounds(A, U)
    assert rep.lower_bound <= len(phi_recurrence(A, U)) <= rep.upper_bound


def test_table_total_trivial_cases():
    assert table_total(phi_recurrence(COIN, (0,) * 5)) == 1
    assert table_total(phi_recurrence(COIN, (2,) * 5)) == 1024


def test_block_tables_single_block_is_full_table():
    codec = KeyCodec(COIN, COIN_U)
    [t] = block_tables(COIN, COIN_U, BlockPartition.balanced(5, 1), codec)
    assert t.entries == phi_recurrence(COIN, COIN_U, codec).entries


def test_block_tables_one_column_each():
    U = (3, 0, 2, 1, 4)
    tables = block_tables(COIN, U, BlockPartition.balanced(5, 5))
    for v, t in enumerate(tables):
        expected = {tuple(x * e for e in COIN.columns[v]): math.comb(U[v], x) for x in range(U[v] + 1)}
        assert t.as_dict() == expected


def test_block_convolution_reproduces_full_table():
    U = (5, 3, 7, 2, 6)
    codec = KeyCodec(COIN, U)
    t1, t2 = block_tables(COIN, U, BlockPartition.contiguous([3, 2]), codec)
    assert convolve(t1, t2).entries == phi_recurrence(COIN, U, codec).entries


def test_convolution_associative():
    U = (2, 3, 1, 2, 2)
    codec = KeyCodec(COIN, U)
    a, b, c = block_tables(COIN, U, BlockPartition.contiguous([2, 2, 1]), codec)
    assert convolve(convolve(a, b), c).entries == convolve(a, convolve(b, c)).entries


def test_convolve_rejects_overlap():
    codec = KeyCodec(COIN, (1,) * 5)
    t = phi_recurrence(COIN, (1,) * 5, codec, columns=[0, 1])
    with pytest.raises(ValueError):
        convolve(t, t)


@given(instances)
def test_half_mode_expands_to_full_table(inst):
    A, U = inst
    codec = KeyCodec(A, U)
    full = phi_recurrence(A, U, codec)
    half = phi_recurrence(A, U, codec, half=True)
    assert len(half) == len(full)
    assert half.full().entries == full.entries
    for b, v in full.b_items():
        assert half.get(b) == v


@given(instances)
def test_codec_round_trip(inst):
    A, U = inst
    codec = KeyCodec(A, U)
    for b, _ in phi_recurrence(A, U, codec).b_items():
        key = codec.encode(b)
        m, b2 = codec.decode(key)
        assert b2 == b and m * A.a == sum(b)
        assert codec.decode(codec.mirror(key))[1] == tuple(t - x for t, x in zip(codec.total, b))


def test_key_dimension_is_rank():
    A = build_matrix(ModelSpec((1, 1), (3, 3)))
    assert KeyCodec(A, (1,) * A.n).dim == A.d - A.k + 1


def test_budget_error_reports_size():
    with pytest.raises(TableBudgetError) as exc:
        phi_recurrence(COIN, COIN_U, max_entries=100)
    assert exc.value.estimate > 100


def test_partition_validation():
    with pytest.raises(ValueError):
        BlockPartition.contiguous([2, 2]).validate(5)
    assert BlockPartition.balanced(5, 2).blocks == ((0, 1, 2), (3, 4))


@pytest.mark.parametrize("half", [False, True])
def test_dump_and_load_round_trip(half):
    U = (3, 1, 4, 1, 5)
    table = phi_recurrence(COIN, U, half=half)
    buf = io.StringIO()
    dump_table(table, buf)
    assert buf.getvalue().startswith("# exactml-coeff-table v1\n")
    buf.seek(0)
    back = load_table(buf)
    assert isinstance(back, CoeffTable)
    assert back.half == half
    assert back.as_dict() == table.as_dict()


def test_load_rejects_foreign_text():
    with pytest.raises(ValueError):
        load_table(io.StringIO("hello\n"))
