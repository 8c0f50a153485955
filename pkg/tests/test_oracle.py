from __future__ import annotations

import itertools
from fractions import Fraction

import pytest

from exactml.integrator import mixture_marginal
from exactml.lattice import monomial_bounds, zonotope_lattice_count
from exactml.model import ExponentMatrix, ModelSpec, sufficient_statistic
from exactml.oracle import (OracleBudget, OracleBudgetError, brute_force_integral, brute_force_lattice_points,
                            brute_force_phi, in_zonotope, lp_feasible)

COIN = ModelSpec((4,), (1,)).reduced().matrix


def test_integral_of_empty_data():
    assert brute_force_integral(COIN, (0,) * 5) == 1


def test_integral_small_coin():
    assert brute_force_integral(COIN, (2,) * 5) == Fraction(66364720654753, 59057383987217015339940000)


def test_integral_four_term_enumeration():
    spec = ModelSpec((1,), (1,))
    val = brute_force_integral(spec, (1, 1))
    # four terms, x in {0,1}^2; the enumeration itself is the reference
    assert val == mixture_marginal(spec.matrix(), (1, 1)).exact == Fraction(7, 36)


def test_integral_budget():
    with pytest.raises(OracleBudgetError):
        brute_force_integral(COIN, (50,) * 5, budget=OracleBudget(max_table_size=1000))
    with pytest.raises(ValueError):
        brute_force_integral(COIN, (1, 1))


def test_phi_boundary_values():
    U = (1, 2, 0, 1, 1)
    assert brute_force_phi(COIN, U, (0, 0)) == 1
    assert brute_force_phi(COIN, U, sufficient_statistic(COIN, U)) == 1


def test_phi_budget():
    with pytest.raises(OracleBudgetError):
        brute_force_phi(COIN, (5,) * 5, (0, 0))


def test_lattice_points_single_column():
    A = ExponentMatrix.from_rows([[1], [1]])
    assert brute_force_lattice_points(A, (2,)) == 3


def test_lattice_points_coin_basic_zonotope():
    assert brute_force_lattice_points(COIN, (1,) * 5) == zonotope_lattice_count(COIN, (1,) * 5)


def test_lattice_points_unimodular_two_by_two():
    A = ModelSpec((1, 1), (1, 1)).matrix()
    for U in [(1, 2, 0, 1), (2, 1, 1, 2), (1, 1, 1, 1)]:
        rep = monomial_bounds(A, U)
        assert brute_force_lattice_points(A, U) == rep.lower_bound == rep.upper_bound


def test_lattice_points_budget():
    with pytest.raises(OracleBudgetError):
        brute_force_lattice_points(COIN, (30,) * 5, max_box=1000)


def test_lp_feasibility_basics():
    # x1 + x2 = 3 with 0 <= x <= (1, 1) is infeasible; = 2 is feasible
    assert not lp_feasible([[1, 1]], [3], [1, 1])
    assert lp_feasible([[1, 1]], [2], [1, 1])
    # fractional solutions count: 2 x1 = 1
    assert lp_feasible([[2]], [1], [1])
    # dependent rows
    assert lp_feasible([[1, 1], [2, 2]], [1, 2], [1, 1])
    assert not lp_feasible([[1, 1], [2, 2]], [1, 3], [1, 1])


def test_zonotope_membership_matches_vertex_hull_on_a_segment():
    A = ExponentMatrix.from_rows([[2, 0], [0, 2]])
    U = (1, 1)
    inside = {b for b in itertools.product(range(3), repeat=2) if in_zonotope(A, U, b)}
    assert inside == set(itertools.product(range(3), repeat=2))
