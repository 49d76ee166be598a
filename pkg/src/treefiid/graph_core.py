"""Finite base graphs, non-backtracking walks and reduced paths in the universal cover.

A base graph is a finite connected multigraph without loops. Its universal
cover is a tree; a point of the cover is named by a reduced edge-id word read
from a fixed root, and two words name the same point iff they reduce to the
same word. Every distance in the cover is therefore a word length after
cancelling adjacent equal edge ids.
"""

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx

from treefiid.exceptions import GraphError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Edge:
    """An undirected edge with a declared orientation (u, v)."""

    id: int
    u: int
    v: int

    def other(self, x: int) -> int:
        """Return the endpoint opposite to x."""
        if x == self.u:
            return self.v
        if x == self.v:
            return self.u
        raise GraphError(f"Vertex {x} is not an endpoint of edge {self.id}")


@dataclass(frozen=True)
class BaseGraph:
    """Finite multigraph given by vertex ids and (edge id, u, v) triples.

    Construction does not validate; call validate_graph (the parsers and
    builders in this package always do).
    """

    vertices: tuple[int, ...]
    edges: tuple[Edge, ...]

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[int, int, int]],
        vertices: Iterable[int] | None = None,
    ) -> "BaseGraph":
        """Build and validate a graph from (edge id, u, v) triples.

        Args:
            edges: Edge triples
            vertices: Vertex ids; defaults to every endpoint mentioned

        Returns:
            A validated BaseGraph

        Raises:
            GraphError: If any BaseGraph invariant fails
        """
        edge_list = tuple(Edge(eid, u, v) for eid, u, v in edges)
        if vertices is None:
            vertex_set = {x for e in edge_list for x in (e.u, e.v)}
        else:
            vertex_set = set(vertices)
        g = cls(tuple(sorted(vertex_set)), tuple(sorted(edge_list, key=lambda e: e.id)))
        validate_graph(g)
        return g

    @cached_property
    def _edge_by_id(self) -> dict[int, Edge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def incidence(self) -> dict[int, tuple[Edge, ...]]:
        """Edges incident to each vertex, ordered by edge id."""
        table: dict[int, list[Edge]] = {v: [] for v in self.vertices}
        for e in self.edges:
            table.setdefault(e.u, []).append(e)
            if e.v != e.u:
                table.setdefault(e.v, []).append(e)
        return {v: tuple(sorted(es, key=lambda e: e.id)) for v, es in table.items()}

    def edge(self, eid: int) -> Edge:
        try:
            return self._edge_by_id[eid]
        except KeyError:
            raise GraphError(f"Unknown edge id {eid}") from None

    def degree(self, v: int) -> int:
        return len(self.incidence.get(v, ()))

    def regular_degree(self) -> int | None:
        """Return d if every vertex has degree d, else None."""
        degrees = {self.degree(v) for v in self.vertices}
        return degrees.pop() if len(degrees) == 1 else None

    def to_networkx(self) -> nx.MultiGraph:
        graph = nx.MultiGraph()
        graph.add_nodes_from(self.vertices)
        for e in self.edges:
            graph.add_edge(e.u, e.v, key=e.id)
        return graph


@dataclass(frozen=True)
class Walk:
    """A walk from `start` along the edge ids in `steps`."""

    start: int
    steps: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class WalkAssignment:
    """The walks W_{v,1..k_v} attached to each vertex, in significant order."""

    walks: Mapping[int, tuple[Walk, ...]] = field(default_factory=dict)

    @classmethod
    def empty(cls, g: BaseGraph) -> "WalkAssignment":
        """Assign the single empty walk to every vertex."""
        return cls({v: (Walk(v),) for v in g.vertices})

    @classmethod
    def from_steps(
        cls, g: BaseGraph, steps: Mapping[int, Sequence[Sequence[int]]]
    ) -> "WalkAssignment":
        """Build an assignment from step lists; vertices not listed get the empty walk."""
        walks = {
            v: tuple(Walk(v, tuple(s)) for s in steps[v]) if v in steps else (Walk(v),)
            for v in g.vertices
        }
        assignment = cls(walks)
        assignment.validate(g)
        return assignment

    def __getitem__(self, v: int) -> tuple[Walk, ...]:
        return self.walks[v]

    def validate(self, g: BaseGraph) -> None:
        """Check that every vertex has walks, each starting at it and non-backtracking.

        Raises:
            GraphError: On a missing vertex, a foreign start, or an invalid walk
        """
        for v in g.vertices:
            if v not in self.walks or not self.walks[v]:
                raise GraphError(f"Vertex {v} has no walks assigned")
        for v, walks in self.walks.items():
            if v not in g.incidence:
                raise GraphError(f"Walks assigned to unknown vertex {v}")
            for w in walks:
                if w.start != v:
                    raise GraphError(f"Walk {list(w.steps)} listed at {v} starts at {w.start}")
                validate_walk(g, w)


def validate_graph(g: BaseGraph) -> None:
    """Check every BaseGraph invariant.

    Raises:
        GraphError: Naming the first offending vertex or edge
    """
    vertex_set = set(g.vertices)
    if len(vertex_set) != len(g.vertices):
        raise GraphError("Duplicate vertex id")
    if not vertex_set:
        raise GraphError("Graph has no vertices")
    if vertex_set != set(range(len(vertex_set))):
        raise GraphError(f"Vertex ids are not dense 0..{len(vertex_set) - 1}")

    seen: set[int] = set()
    for e in g.edges:
        if e.id in seen:
            raise GraphError(f"Duplicate edge id {e.id}")
        seen.add(e.id)
        if e.u == e.v:
            raise GraphError(f"Edge {e.id} is a loop at vertex {e.u}")
        for x in (e.u, e.v):
            if x not in vertex_set:
                raise GraphError(f"Edge {e.id} uses unknown vertex {x}")
    if seen != set(range(len(seen))):
        raise GraphError(f"Edge ids are not dense 0..{len(seen) - 1}")

    for v in g.vertices:
        if g.degree(v) == 0:
            raise GraphError(f"Vertex {v} has degree 0")

    graph = g.to_networkx()
    if not nx.is_connected(graph):
        components = sorted(min(c) for c in nx.connected_components(graph))
        raise GraphError(
            f"Graph is disconnected: {len(components)} components, "
            f"vertex {components[1]} is not reachable from vertex {components[0]}"
        )


def trace_walk(g: BaseGraph, start: int, steps: Sequence[int]) -> int:
    """Follow `steps` from `start` and return the end vertex.

    Raises:
        GraphError: If some step is not incident to the current vertex
    """
    current = start
    for position, eid in enumerate(steps):
        e = g.edge(eid)
        if current not in (e.u, e.v):
            raise GraphError(
                f"Step {position} (edge {eid}) is not incident to vertex {current}"
            )
        current = e.other(current)
    return current


def validate_walk(g: BaseGraph, w: Walk) -> None:
    """Check that w is traversable and non-backtracking."""
    if w.start not in g.incidence:
        raise GraphError(f"Walk starts at unknown vertex {w.start}")
    trace_walk(g, w.start, w.steps)
    for i in range(len(w.steps) - 1):
        if w.steps[i] == w.steps[i + 1]:
            raise GraphError(
                f"Walk from {w.start} backtracks on edge {w.steps[i]} at step {i + 1}"
            )


def reduce_word(steps: Iterable[int]) -> tuple[int, ...]:
    """Cancel adjacent equal edge ids until none remain (no traversability check)."""
    stack: list[int] = []
    for eid in steps:
        if stack and stack[-1] == eid:
            stack.pop()
        else:
            stack.append(eid)
    return tuple(stack)


def reduce_walk(
    g: BaseGraph, steps: Sequence[int], start: int | None = None
) -> tuple[int, ...]:
    """Reduce an edge-id sequence to the geodesic between its lifted endpoints.

    Args:
        g: The base graph
        steps: Edge-id sequence, traversable from `start`
        start: Start vertex; when omitted either endpoint of the first edge may serve

    Returns:
        The reduced sequence; its length is the distance in the cover

    Raises:
        GraphError: If the sequence is not traversable
    """
    if steps:
        if start is None:
            first = g.edge(steps[0])
            errors: list[GraphError] = []
            for candidate in (first.u, first.v):
                try:
                    trace_walk(g, candidate, steps)
                    break
                except GraphError as e:
                    errors.append(e)
            else:
                raise GraphError(f"Sequence {list(steps)} is not traversable: {errors[0]}")
        else:
            trace_walk(g, start, steps)
    return reduce_word(steps)


def walk_distance(g: BaseGraph, w1: Walk, w2: Walk, bridge: int | None = None) -> int:
    """Distance in the cover between the lifted endpoints of two walks.

    Without a bridge both walks are lifted from one point; with a bridge, w2
    is lifted from the neighbor of w1's lifted start across the bridge edge.

    Raises:
        GraphError: If the start vertices do not fit the bridge
    """
    validate_walk(g, w1)
    validate_walk(g, w2)
    if bridge is None:
        if w1.start != w2.start:
            raise GraphError(
                f"Walks start at {w1.start} and {w2.start} but no bridge was given"
            )
        middle: tuple[int, ...] = ()
    else:
        e = g.edge(bridge)
        if {w1.start, w2.start} != {e.u, e.v}:
            raise GraphError(
                f"Bridge {bridge} does not join {w1.start} to {w2.start}"
            )
        middle = (bridge,)
    return len(reduce_word(tuple(reversed(w1.steps)) + middle + w2.steps))


def enumerate_nb_walks(g: BaseGraph, v: int, max_len: int) -> list[Walk]:
    """All non-backtracking walks from v of length at most max_len.

    Walks are ordered by length, then lexicographically by edge ids.
    """
    if v not in g.incidence:
        raise GraphError(f"Unknown vertex {v}")
    if max_len < 0:
        raise GraphError(f"max_len must be nonnegative, got {max_len}")
    walks = [Walk(v)]
    frontier: list[tuple[tuple[int, ...], int]] = [((), v)]
    for _ in range(max_len):
        next_frontier: list[tuple[tuple[int, ...], int]] = []
        for steps, end in frontier:
            for e in g.incidence[end]:
                if steps and steps[-1] == e.id:
                    continue
                next_frontier.append((steps + (e.id,), e.other(end)))
        walks.extend(Walk(v, steps) for steps, _ in next_frontier)
        frontier = next_frontier
    logger.debug("Enumerated %d walks from vertex %d up to length %d", len(walks), v, max_len)
    return walks


def two_vertex_multigraph(d: int) -> BaseGraph:
    """Vertices 0 and 1 joined by d parallel edges 0..d-1."""
    return BaseGraph.from_edges([(i, 0, 1) for i in range(d)])


def complete_graph(k: int) -> BaseGraph:
    """The simple complete graph on k vertices, edges numbered lexicographically."""
    pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
    return BaseGraph.from_edges([(i, a, b) for i, (a, b) in enumerate(pairs)])
