"""Tests for base graphs, walks and reduced words."""

import networkx as nx
import pytest

from treefiid.exceptions import GraphError
from treefiid.graph_core import (
    BaseGraph,
    Edge,
    Walk,
    WalkAssignment,
    complete_graph,
    enumerate_nb_walks,
    reduce_walk,
    reduce_word,
    trace_walk,
    two_vertex_multigraph,
    validate_graph,
    validate_walk,
    walk_distance,
)


class TestValidateGraph:
    """Test cases for graph validation."""

    def test_builders_are_regular(self, k4, two_vertex):
        assert k4.regular_degree() == 3
        assert len(k4.edges) == 6
        assert two_vertex.regular_degree() == 3
        assert len(two_vertex.vertices) == 2

    def test_irregular_graph_has_no_regular_degree(self, path3):
        assert path3.regular_degree() is None
        assert path3.degree(1) == 2

    @pytest.mark.parametrize(
        "edges, vertices, fragment",
        [
            ([(0, 0, 0)], None, "loop"),
            ([(0, 0, 1), (0, 1, 0)], None, "Duplicate edge id 0"),
            ([(0, 0, 1)], [0], "unknown vertex 1"),
            ([(0, 0, 1), (2, 0, 1)], None, "Edge ids are not dense"),
            ([(0, 0, 2)], None, "Vertex ids are not dense"),
            ([(0, 0, 1)], [0, 1, 2], "Vertex 2 has degree 0"),
            ([(0, 0, 1), (1, 2, 3)], None, "disconnected"),
        ],
    )
    def test_invalid_graphs_name_the_problem(self, edges, vertices, fragment):
        with pytest.raises(GraphError) as exc_info:
            BaseGraph.from_edges(edges, vertices)
        assert fragment in str(exc_info.value)

    def test_empty_graph_is_rejected(self):
        with pytest.raises(GraphError):
            validate_graph(BaseGraph((), ()))

    def test_edge_other_endpoint(self):
        e = Edge(0, 3, 5)
        assert e.other(3) == 5
        assert e.other(5) == 3
        with pytest.raises(GraphError):
            e.other(4)

    def test_unknown_edge_id(self, k4):
        with pytest.raises(GraphError) as exc_info:
            k4.edge(17)
        assert "Unknown edge id 17" in str(exc_info.value)

    def test_to_networkx_keeps_parallel_edges(self, two_vertex):
        graph = two_vertex.to_networkx()
        assert isinstance(graph, nx.MultiGraph)
        assert graph.number_of_edges(0, 1) == 3


class TestWalks:
    """Test cases for walks and walk assignments."""

    def test_trace_walk_follows_edges(self, k4):
        # edges of K_4: 0:(0,1) 1:(0,2) 2:(0,3) 3:(1,2) 4:(1,3) 5:(2,3)
        assert trace_walk(k4, 0, (0, 3, 5)) == 3

    def test_trace_walk_rejects_non_incident_step(self, k4):
        with pytest.raises(GraphError) as exc_info:
            trace_walk(k4, 0, (0, 5))
        assert "Step 1 (edge 5)" in str(exc_info.value)

    def test_backtracking_walk_is_rejected(self, two_vertex):
        with pytest.raises(GraphError) as exc_info:
            validate_walk(two_vertex, Walk(0, (1, 1)))
        assert "backtracks" in str(exc_info.value)

    def test_from_steps_fills_empty_walks(self, two_vertex):
        walks = WalkAssignment.from_steps(two_vertex, {0: [(), (0,), (1,)]})
        assert walks[1] == (Walk(1),)
        assert len(walks[0]) == 3

    def test_assignment_rejects_foreign_start(self, two_vertex):
        walks = WalkAssignment({0: (Walk(1),), 1: (Walk(1),)})
        with pytest.raises(GraphError) as exc_info:
            walks.validate(two_vertex)
        assert "starts at 1" in str(exc_info.value)

    def test_assignment_needs_every_vertex(self, two_vertex):
        with pytest.raises(GraphError) as exc_info:
            WalkAssignment({0: (Walk(0),)}).validate(two_vertex)
        assert "Vertex 1 has no walks" in str(exc_info.value)

    def test_empty_assignment(self, k4):
        walks = WalkAssignment.empty(k4)
        assert all(walks[v] == (Walk(v),) for v in k4.vertices)

    @pytest.mark.parametrize("max_len, expected", [(0, 1), (1, 4), (2, 10), (3, 22)])
    def test_nb_walk_count(self, two_vertex, max_len, expected):
        # 1 + 3 + 3*2 + 3*2*2 walks, the sizes of balls in T_3
        assert len(enumerate_nb_walks(two_vertex, 0, max_len)) == expected

    def test_nb_walks_are_ordered(self, k4):
        walks = enumerate_nb_walks(k4, 0, 2)
        assert walks[0] == Walk(0)
        lengths = [len(w) for w in walks]
        assert lengths == sorted(lengths)
        assert [w.steps for w in walks[1:4]] == [(0,), (1,), (2,)]

    def test_nb_walk_arguments(self, k4):
        with pytest.raises(GraphError):
            enumerate_nb_walks(k4, 9, 1)
        with pytest.raises(GraphError):
            enumerate_nb_walks(k4, 0, -1)


class TestReducedWords:
    """Test cases for cancellation of back-and-forth steps."""

    @pytest.mark.parametrize(
        "steps, reduced",
        [
            ((), ()),
            ((0, 1, 2), (0, 1, 2)),
            ((0, 1, 1, 0), ()),
            ((0, 1, 1, 2), (0, 2)),
            ((3, 0, 0, 3, 4), (4,)),
        ],
    )
    def test_reduce_word(self, steps, reduced):
        assert reduce_word(steps) == reduced

    def test_reduce_walk_checks_traversability(self, k4):
        assert reduce_walk(k4, (0, 3, 3), start=0) == (0,)
        with pytest.raises(GraphError) as exc_info:
            reduce_walk(k4, (0, 5))
        assert "not traversable" in str(exc_info.value)

    def test_reduce_walk_guesses_start(self, k4):
        assert reduce_walk(k4, (0, 3)) == (0, 3)

    def test_walk_distance_from_common_start(self, two_vertex):
        assert walk_distance(two_vertex, Walk(0, (0,)), Walk(0, (1,))) == 2
        assert walk_distance(two_vertex, Walk(0, (0,)), Walk(0, (0,))) == 0

    def test_walk_distance_across_bridge(self, two_vertex):
        assert walk_distance(two_vertex, Walk(0), Walk(1), bridge=0) == 1
        assert walk_distance(two_vertex, Walk(0, (0,)), Walk(1), bridge=0) == 0
        assert walk_distance(two_vertex, Walk(0, (1,)), Walk(1), bridge=0) == 2

    def test_walk_distance_needs_bridge_for_different_starts(self, two_vertex):
        with pytest.raises(GraphError) as exc_info:
            walk_distance(two_vertex, Walk(0), Walk(1))
        assert "no bridge" in str(exc_info.value)

    def test_walk_distance_bridge_must_join_starts(self):
        g = complete_graph(4)
        with pytest.raises(GraphError):
            walk_distance(g, Walk(0), Walk(1), bridge=5)


def test_two_vertex_multigraph_edges():
    g = two_vertex_multigraph(4)
    assert [(e.u, e.v) for e in g.edges] == [(0, 1)] * 4
