"""Tests for the exact expected-coloring counts on random lifts."""

import math
from fractions import Fraction

import numpy as np
import pytest

from treefiid.counting_oracle import (
    ConsistentCollection,
    brute_force_expected_colorings,
    diagonal_collection,
    expected_colorings,
    log_rate,
    matching_count,
    matching_probability,
    product_collection,
    rate,
)
from treefiid.exceptions import OracleError
from treefiid.graph_core import complete_graph, two_vertex_multigraph
from treefiid.lift_sim import Coloring, local_stats, random_lift

HALF = Fraction(1, 2)
LN2 = math.log(2)


def random_collection(g, n, m, seed):
    """Statistics of a uniformly random m-coloring of a random n-fold lift of g."""
    lift = random_lift(g, n, seed)
    rng = np.random.default_rng(seed)
    values = rng.integers(0, m, size=lift.vertex_count)
    return local_stats(lift, Coloring(lift, tuple(range(m)), values)).to_collection()


class TestMatchingCount:
    """Test cases for bijections with prescribed pair counts."""

    def test_two_by_two(self):
        assert matching_count([2, 2], [2, 2], [[1, 1], [1, 1]]) == 16
        assert matching_count([2, 2], [2, 2], [[2, 0], [0, 2]]) == 4

    def test_all_tables_sum_to_all_bijections(self):
        tables = [[[2, 0], [0, 2]], [[1, 1], [1, 1]], [[0, 2], [2, 0]]]
        assert sum(matching_count([2, 2], [2, 2], k) for k in tables) == math.factorial(4)

    def test_probability(self):
        assert matching_probability([1, 1], [1, 1], [[1, 0], [0, 1]]) == HALF
        assert matching_probability([3], [3], [[3]]) == 1

    @pytest.mark.parametrize(
        "cu, cv, k, fragment",
        [
            ([2, 1], [2, 2], [[1, 1], [1, 1]], "different sizes"),
            ([2, 2], [2, 2], [[2, 1], [0, 1]], "Row 0 of the pair counts sums to 3"),
            ([2, 2], [2, 2], [[2, 0], [0, 1]], "Row 1"),
            ([2, 2], [3, 1], [[1, 1], [1, 1]], "Column 0 of the pair counts sums to 2"),
            ([2, 2], [2, 2], [[3, -1], [-1, 3]], "Negative pair count"),
            ([2, 2], [2, 2], [[1, 1]], "2 x 2 table"),
        ],
    )
    def test_inconsistent_counts(self, cu, cv, k, fragment):
        with pytest.raises(OracleError) as exc_info:
            matching_count(cu, cv, k)
        assert fragment in str(exc_info.value)


class TestCollections:
    """Test cases for consistent collections."""

    def test_product_and_diagonal_are_consistent(self, k4):
        product_collection(k4, ("a", "b"), (HALF, HALF)).validate(k4)
        diagonal_collection(k4, ("a", "b"), (Fraction(1, 3), Fraction(2, 3))).validate(k4)

    def test_missing_vertex(self, k4, uniform_k4):
        mu = ConsistentCollection(
            uniform_k4.states,
            {v: law for v, law in uniform_k4.vertex.items() if v != 2},
            uniform_k4.edge,
        )
        with pytest.raises(OracleError) as exc_info:
            mu.validate(k4)
        assert "No distribution for vertex 2" in str(exc_info.value)

    def test_marginal_mismatch(self, two_vertex):
        third = Fraction(1, 3)
        tilted = ((third, third), (Fraction(1, 6), Fraction(1, 6)))
        mu = ConsistentCollection(
            ("0", "1"),
            {0: (HALF, HALF), 1: (HALF, HALF)},
            {0: tilted, 1: tilted, 2: tilted},
        )
        with pytest.raises(OracleError) as exc_info:
            mu.validate(two_vertex)
        assert "Edge 0 u-marginal differs from vertex 0" in str(exc_info.value)

    def test_v_marginal_mismatch(self, two_vertex):
        skew = ((HALF, 0), (0, HALF))
        mu = ConsistentCollection(
            ("0", "1"),
            {0: (HALF, HALF), 1: (Fraction(1, 4), Fraction(3, 4))},
            {0: skew, 1: skew, 2: skew},
        )
        with pytest.raises(OracleError) as exc_info:
            mu.validate(two_vertex)
        assert "v-marginal" in str(exc_info.value)

    def test_law_must_sum_to_one(self, two_vertex):
        mu = product_collection(two_vertex, ("0", "1"), (HALF, Fraction(1, 3)))
        with pytest.raises(OracleError) as exc_info:
            mu.validate(two_vertex)
        assert "sums to 5/6" in str(exc_info.value)


class TestExpectedColorings:
    """Test cases for the first-moment count."""

    def test_diagonal_k4_two_fold(self, k4):
        mu = diagonal_collection(k4, ("0", "1"), (HALF, HALF))
        # 2^4 fiber colorings, each edge matched color to color with probability 1/2
        assert expected_colorings(k4, mu, 2) == Fraction(16, 64)
        assert brute_force_expected_colorings(k4, mu, 2) == Fraction(1, 4)

    def test_non_integral_masses_give_zero(self, k4, uniform_k4):
        assert expected_colorings(k4, uniform_k4, 2) == 0
        assert brute_force_expected_colorings(k4, uniform_k4, 2) == 0
        assert log_rate(k4, uniform_k4, 2) == -math.inf

    def test_one_fold_lift(self, k4):
        mu = diagonal_collection(k4, ("0", "1"), (Fraction(1), Fraction(0)))
        assert expected_colorings(k4, mu, 1) == 1

    @pytest.mark.parametrize(
        "make_graph, n, m",
        [
            (lambda: complete_graph(4), 2, 2),
            (lambda: complete_graph(3), 3, 2),
            (lambda: two_vertex_multigraph(3), 3, 2),
            (lambda: two_vertex_multigraph(3), 3, 3),
        ],
    )
    @pytest.mark.parametrize("seed", range(5))
    def test_agrees_with_brute_force(self, make_graph, n, m, seed):
        g = make_graph()
        mu = random_collection(g, n, m, seed)
        exact = expected_colorings(g, mu, n)
        assert exact == brute_force_expected_colorings(g, mu, n)
        # the lift that produced mu is one of the (n!)^|E| equally likely lifts
        assert exact >= Fraction(1, math.factorial(n) ** len(g.edges))

    def test_brute_force_guard(self, k4):
        mu = diagonal_collection(k4, ("0", "1"), (Fraction(1, 3), Fraction(2, 3)))
        with pytest.raises(OracleError) as exc_info:
            brute_force_expected_colorings(k4, mu, 3)
        assert "above the guard" in str(exc_info.value)

    @pytest.mark.parametrize("n", [0, -2])
    def test_order_must_be_positive(self, k4, uniform_k4, n):
        with pytest.raises(OracleError):
            expected_colorings(k4, uniform_k4, n)
        with pytest.raises(OracleError):
            brute_force_expected_colorings(k4, uniform_k4, n)


class TestRate:
    """Test cases for the exponential growth rate."""

    def test_uniform_product_rate(self, k4, uniform_k4):
        # 6 edges of entropy 2 ln 2 against 4 vertices of weight 2
        assert rate(k4, uniform_k4) == pytest.approx(4 * LN2)

    def test_diagonal_rate_is_negative(self, k4):
        mu = diagonal_collection(k4, ("0", "1"), (HALF, HALF))
        assert rate(k4, mu) == pytest.approx(-2 * LN2)

    def test_log_rate_converges_from_below(self, k4, uniform_k4):
        deficits = [rate(k4, uniform_k4) - log_rate(k4, uniform_k4, n) for n in (24, 60, 120)]
        assert deficits[0] > deficits[1] > deficits[2] > 0
        assert 0.56 < deficits[0] < 0.62
        assert 0.17 < deficits[2] < 0.2
