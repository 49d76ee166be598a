"""Tests for the derivation recipe and the built-in constructions."""

from fractions import Fraction

import pytest

from treefiid.derive import (
    BUILTINS,
    blow_up,
    builtin,
    closed_form,
    derive_inequality,
    flower_bound,
    flower_closed_form,
    lift_base,
    mutual_information_bound,
    reference_inequality,
)
from treefiid.exceptions import DerivationError, GraphError
from treefiid.graph_core import (
    BaseGraph,
    Edge,
    WalkAssignment,
    two_vertex_multigraph,
)
from treefiid.type_calculus import (
    EntropyInequality,
    ball,
    edge_type,
    path_type,
    star_type,
    vertex_type,
)


def _bound(inequality: EntropyInequality) -> Fraction:
    """-c_neg / c_pos for a two-term inequality with a vertex or edge on the right."""
    (positive,) = [c for _, c in inequality.terms if c > 0]
    (negative,) = [c for _, c in inequality.terms if c < 0]
    return -negative / positive


class TestDeriveInequality:
    """Test cases for the recipe on explicit graphs and walks."""

    def test_empty_walks_give_edge_vertex(self, k4):
        ineq = derive_inequality(k4, WalkAssignment.empty(k4))
        assert ineq.coefficients == {edge_type(3): 3, vertex_type(3): -4}

    def test_result_carries_name(self, two_vertex):
        ineq = derive_inequality(two_vertex, WalkAssignment.empty(two_vertex), "ev")
        assert ineq.name == "ev"

    def test_irregular_graph_rejected(self, path3):
        with pytest.raises(DerivationError) as exc_info:
            derive_inequality(path3, WalkAssignment.empty(path3))
        assert "not regular" in str(exc_info.value)

    def test_degree_two_rejected(self):
        g = two_vertex_multigraph(2)
        with pytest.raises(DerivationError) as exc_info:
            derive_inequality(g, WalkAssignment.empty(g))
        assert "need d >= 3" in str(exc_info.value)

    def test_invalid_walk_rejected(self, two_vertex):
        walks = WalkAssignment.from_steps(two_vertex, {})
        broken = WalkAssignment({**walks.walks, 0: (walks[1][0],)})
        with pytest.raises(GraphError):
            derive_inequality(two_vertex, broken)


class TestBuiltins:
    """Test cases for the named constructions against their closed forms."""

    @pytest.mark.parametrize("d", [3, 4, 5, 6])
    def test_edge_vertex(self, d):
        ineq = builtin("edge_vertex", d).inequality
        assert _bound(ineq) == Fraction(2 * (d - 1), d)

    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_path_edge(self, d):
        ineq = builtin("path_edge", d).inequality
        assert ineq.coefficient(path_type(d, 3)) > 0
        assert _bound(ineq) == Fraction(2 * d - 3, d - 1)

    def test_path_edge_rendering(self):
        assert builtin("path_edge", 3).inequality.render() == "H(P3) >= 3/2 H(edge)"

    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_complete_graph(self, d):
        ineq = builtin("complete_graph", d).inequality
        assert _bound(ineq) == 2 - Fraction(2, d * (d - 1))

    def test_complete_graph_at_three(self):
        assert _bound(builtin("complete_graph", 3).inequality) == Fraction(5, 3)

    @pytest.mark.parametrize("d", [3, 4])
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_sphere(self, d, k):
        assert _bound(builtin("sphere", d, k=k).inequality) == (d - 1) ** k

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_mutual_info(self, k):
        ineq = builtin("mutual_info", 3, k=k).inequality
        if k == 1:
            assert ineq == closed_form("edge_vertex", 3)
        else:
            assert _bound(ineq) == 2 - mutual_information_bound(3, k)

    @pytest.mark.parametrize(
        "k, bound",
        [(1, Fraction(2, 3)), (2, Fraction(1, 2)), (3, Fraction(1, 3)), (4, Fraction(1, 4))],
    )
    def test_mutual_information_bound(self, k, bound):
        assert mutual_information_bound(3, k) == bound

    @pytest.mark.parametrize("d", [3, 4, 5, 6])
    def test_flower_steps(self, d):
        for i in range(1, d):
            construction = builtin("flower", d, i=i)
            assert construction.inequality == closed_form("flower", d, i=i)

    @pytest.mark.parametrize("d", [3, 4, 5, 6])
    def test_flower_bound_by_induction(self, d):
        for i in range(2, d + 1):
            assert flower_bound(d, i) == flower_closed_form(d, i)

    def test_flower_bound_full_star_of_neighbors(self):
        assert _bound(flower_bound(3, 3)) == 2

    def test_star_vertex(self):
        ineq = builtin("star_vertex", 3).inequality
        assert ineq.coefficients == {star_type(3): 1, vertex_type(3): -2}

    @pytest.mark.parametrize("k", [1, 2])
    def test_blowup_construction_matches_blow_up(self, k):
        derived = builtin("blowup_edge_vertex", 3, k=k).inequality
        assert derived == blow_up(builtin("edge_vertex", 3).inequality, k).normalized()

    def test_construction_graph_and_walks(self):
        construction = builtin("sphere", 3, k=2)
        assert construction.graph.regular_degree() == 3
        construction.walks.validate(construction.graph)

    def test_every_builtin_is_listed(self):
        assert set(BUILTINS) == {
            "edge_vertex",
            "complete_graph",
            "path_edge",
            "flower",
            "sphere",
            "mutual_info",
            "star_vertex",
            "blowup_edge_vertex",
        }


class TestBuiltinErrors:
    """Test cases for bad names and parameters."""

    def test_unknown_name(self):
        with pytest.raises(DerivationError) as exc_info:
            builtin("hexagon", 3)
        assert "Unknown construction 'hexagon'" in str(exc_info.value)

    def test_degree_too_small(self):
        with pytest.raises(DerivationError):
            builtin("edge_vertex", 2)

    @pytest.mark.parametrize(
        "name, params, fragment",
        [
            ("flower", {}, "missing ['i']"),
            ("flower", {"i": 3}, "1 <= i < d=3"),
            ("sphere", {"k": 0}, "k >= 1"),
            ("edge_vertex", {"k": 1}, "unknown ['k']"),
            ("blowup_edge_vertex", {"k": -1}, "k >= 0"),
        ],
    )
    def test_bad_parameters(self, name, params, fragment):
        with pytest.raises(DerivationError) as exc_info:
            builtin(name, 3, **params)
        assert fragment in str(exc_info.value)

    def test_mismatch_with_closed_form_is_reported(self, mocker):
        mocker.patch(
            "treefiid.derive.closed_form",
            return_value=EntropyInequality.from_terms(3, {vertex_type(3): 1}),
        )
        with pytest.raises(DerivationError) as exc_info:
            builtin("edge_vertex", 3)
        assert "but expected" in str(exc_info.value)

    def test_flower_bound_range(self):
        with pytest.raises(DerivationError):
            flower_bound(3, 1)


class TestReferenceInequality:
    """Test cases for inequalities looked up by name."""

    def test_star_edge(self):
        ineq = reference_inequality("star_edge", 3)
        assert ineq.coefficients == {star_type(3): 2, edge_type(3): -3}

    def test_star_edge_takes_no_parameters(self):
        with pytest.raises(DerivationError):
            reference_inequality("star_edge", 3, k=1)

    def test_builtin_names_are_derived(self):
        assert reference_inequality("path_edge", 4) == closed_form("path_edge", 4)


class TestBlowUp:
    """Test cases for the blow-up transform."""

    def test_keeps_coefficients(self):
        ineq = builtin("edge_vertex", 3).inequality
        blown = blow_up(ineq, 1)
        assert blown.coefficients == {ball(edge_type(3), 1): 3, star_type(3): -4}
        assert blown.name == "blow_up(edge_vertex,1)"

    def test_radius_zero_is_identity(self):
        ineq = builtin("edge_vertex", 3).inequality
        assert blow_up(ineq, 0) is ineq

    def test_negative_radius(self):
        with pytest.raises(DerivationError):
            blow_up(builtin("edge_vertex", 3).inequality, -1)


class TestLiftBase:
    """Test cases for connected lifts used as new base graphs."""

    def test_lift_is_regular_and_connected(self, k4):
        lifted = lift_base(k4, 3, seed=11)
        assert len(lifted.vertices) == 12
        assert lifted.regular_degree() == 3

    def test_lift_is_deterministic(self, k4):
        assert lift_base(k4, 5, seed=3) == lift_base(k4, 5, seed=3)

    def test_recipe_runs_on_a_lift(self, k4):
        lifted = lift_base(k4, 2, seed=1)
        ineq = derive_inequality(lifted, WalkAssignment.empty(lifted))
        assert ineq == closed_form("edge_vertex", 3)

    def test_gives_up_after_retry_budget(self, mocker, k4):
        split = BaseGraph((0, 1, 2, 3), (Edge(0, 0, 1), Edge(1, 2, 3)))
        fake = mocker.Mock()
        fake.to_base_graph.return_value = split
        mock_random_lift = mocker.patch("treefiid.derive.random_lift", return_value=fake)
        with pytest.raises(DerivationError) as exc_info:
            lift_base(k4, 2, seed=0)
        assert "No connected 2-fold lift" in str(exc_info.value)
        assert mock_random_lift.call_count == 100

    def test_order_must_be_positive(self, k4):
        with pytest.raises(DerivationError):
            lift_base(k4, 0, seed=0)
