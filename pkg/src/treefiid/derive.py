"""Entropy inequalities from d-regular base graphs with walk assignments.

Every vertex v of the base graph lifts its walks from one point of T_d; the
lifted endpoints form a finite set whose type is the vertex type of v. An
edge (u, v) lifts the walks of u and of v from adjacent points, giving the
edge type. The resulting inequality is

    sum over edges H(edge type) - (d - 1) sum over vertices H(vertex type) >= 0.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import networkx as nx

from treefiid.configuration import LIFT_RETRY_BUDGET, MIN_TREE_DEGREE
from treefiid.exceptions import DerivationError, GraphError
from treefiid.graph_core import (
    BaseGraph,
    Walk,
    WalkAssignment,
    complete_graph,
    enumerate_nb_walks,
    reduce_word,
    two_vertex_multigraph,
    validate_graph,
)
from treefiid.lift_sim import derive_seed, random_lift
from treefiid.type_calculus import (
    EntropyInequality,
    SubsetType,
    ball,
    combine,
    edge_type,
    flower_type,
    pair_type,
    path_type,
    sphere_type,
    star_type,
    truncated_tree,
    type_from_distances,
    vertex_type,
)

logger = logging.getLogger(__name__)


class Construction(NamedTuple):
    """A base graph, its walks, and the inequality they derive."""

    graph: BaseGraph
    walks: WalkAssignment
    inequality: EntropyInequality


def _common_prefix(a: tuple[int, ...], b: tuple[int, ...]) -> int:
    length = 0
    for x, y in zip(a, b, strict=False):
        if x != y:
            break
        length += 1
    return length


def _endpoint_type(d: int, words: Sequence[tuple[int, ...]]) -> SubsetType:
    """Type of the points named by reduced words read from one root.

    Equal words name the same point and are merged first.
    """
    points = list(dict.fromkeys(words))
    dist = [
        [len(a) + len(b) - 2 * _common_prefix(a, b) for b in points] for a in points
    ]
    return type_from_distances(d, dist)


def derive_inequality(
    g: BaseGraph, walks: WalkAssignment, name: str = ""
) -> EntropyInequality:
    """Run the recipe on a d-regular base graph.

    Args:
        g: Connected loopless d-regular multigraph, d >= 3
        walks: Non-backtracking walks for every vertex
        name: Label carried by the result

    Returns:
        The normalized inequality

    Raises:
        DerivationError: If g is not regular or d < 3
        GraphError: If g or a walk is invalid
    """
    validate_graph(g)
    d = g.regular_degree()
    if d is None:
        irregular = next(v for v in g.vertices if g.degree(v) != g.degree(g.vertices[0]))
        raise DerivationError(
            f"Base graph is not regular: vertex {g.vertices[0]} has degree "
            f"{g.degree(g.vertices[0])}, vertex {irregular} has degree {g.degree(irregular)}"
        )
    if d < MIN_TREE_DEGREE:
        raise DerivationError(f"Base graph is {d}-regular; need d >= {MIN_TREE_DEGREE}")
    walks.validate(g)

    terms: dict[SubsetType, Fraction] = {}
    for v in g.vertices:
        t = _endpoint_type(d, [w.steps for w in walks[v]])
        terms[t] = terms.get(t, Fraction(0)) - (d - 1)
    for e in g.edges:
        words = [w.steps for w in walks[e.u]]
        words += [reduce_word((e.id,) + w.steps) for w in walks[e.v]]
        t = _endpoint_type(d, words)
        terms[t] = terms.get(t, Fraction(0)) + 1
    inequality = EntropyInequality.from_terms(d, terms, name).normalized()
    logger.debug("Derived %s from %d vertices, %d edges", inequality.render(), len(g.vertices), len(g.edges))
    return inequality


@dataclass
class _GraphBuilder:
    edges: list[tuple[int, int, int]] = field(default_factory=list)
    vertex_count: int = 0

    def add_vertex(self) -> int:
        self.vertex_count += 1
        return self.vertex_count - 1

    def add_edge(self, u: int, v: int) -> int:
        self.edges.append((len(self.edges), u, v))
        return len(self.edges) - 1

    def build(self) -> BaseGraph:
        return BaseGraph.from_edges(self.edges, range(self.vertex_count))


@dataclass
class _TreeCopy:
    """One copy of T_{d,depth} inside a base graph under construction."""

    vertex: dict[int, int]
    parent: dict[int, tuple[int, int]]
    levels: list[list[int]]

    def root_steps(self, node: int) -> tuple[int, ...]:
        """Edge ids on the way from node up to the root."""
        steps = []
        while node in self.parent:
            node, eid = self.parent[node]
            steps.append(eid)
        return tuple(steps)

    def path_steps(self, a: int, b: int) -> tuple[int, ...]:
        ancestors_a = [a]
        while ancestors_a[-1] in self.parent:
            ancestors_a.append(self.parent[ancestors_a[-1]][0])
        on_a = set(ancestors_a)
        up_b = []
        x = b
        while x not in on_a:
            x, eid = self.parent[x]
            up_b.append(eid)
        up_a = []
        y = a
        while y != x:
            y, eid = self.parent[y]
            up_a.append(eid)
        return tuple(up_a + up_b[::-1])


def _add_tree(
    builder: _GraphBuilder, d: int, depth: int, boundary: list[int] | None = None
) -> _TreeCopy:
    """Add a copy of T_{d,depth}; level-`depth` vertices may reuse `boundary` ids."""
    adjacency, levels = truncated_tree(d, depth)
    vertex: dict[int, int] = {}
    for level, nodes in enumerate(levels):
        for position, node in enumerate(nodes):
            if boundary is not None and level == depth:
                vertex[node] = boundary[position]
            else:
                vertex[node] = builder.add_vertex()
    parent: dict[int, tuple[int, int]] = {}
    for level in range(1, depth + 1):
        for node in levels[level]:
            up = next(x for x in adjacency[node] if x in levels[level - 1])
            parent[node] = (up, builder.add_edge(vertex[up], vertex[node]))
    return _TreeCopy(vertex, parent, levels)


def _walks_to_root(builder_graph: BaseGraph, copies: Sequence[_TreeCopy]) -> WalkAssignment:
    steps: dict[int, list[tuple[int, ...]]] = {}
    for copy in copies:
        for node, v in copy.vertex.items():
            steps[v] = [copy.root_steps(node)]
    return WalkAssignment.from_steps(builder_graph, steps)


def _edge_vertex(d: int) -> tuple[BaseGraph, WalkAssignment]:
    g = two_vertex_multigraph(d)
    return g, WalkAssignment.empty(g)


def _complete_graph(d: int) -> tuple[BaseGraph, WalkAssignment]:
    g = complete_graph(d + 1)
    hub = d
    steps: dict[int, list[tuple[int, ...]]] = {hub: [()]}
    for e in g.edges:
        if hub in (e.u, e.v):
            steps[e.other(hub)] = [(e.id,)]
    return g, WalkAssignment.from_steps(g, steps)


def _path_edge(d: int) -> tuple[BaseGraph, WalkAssignment]:
    g = two_vertex_multigraph(d)
    return g, WalkAssignment.from_steps(g, {0: [(), (0,)], 1: [(), (0,)]})


def _flower(d: int, i: int) -> tuple[BaseGraph, WalkAssignment]:
    g = two_vertex_multigraph(d)
    return g, WalkAssignment.from_steps(g, {0: [(j,) for j in range(i)], 1: [()]})


def _star_vertex(d: int) -> tuple[BaseGraph, WalkAssignment]:
    g = two_vertex_multigraph(d)
    return g, WalkAssignment.from_steps(g, {0: [()] + [(j,) for j in range(d)], 1: [()]})


def _blowup_edge_vertex(d: int, k: int) -> tuple[BaseGraph, WalkAssignment]:
    g = two_vertex_multigraph(d)
    walks = {v: tuple(enumerate_nb_walks(g, v, k)) for v in g.vertices}
    return g, WalkAssignment(walks)


def _sphere(d: int, k: int) -> tuple[BaseGraph, WalkAssignment]:
    builder = _GraphBuilder()
    _, levels = truncated_tree(d, k)
    boundary = [builder.add_vertex() for _ in levels[k]]
    copies = [_add_tree(builder, d, k, boundary) for _ in range(d)]
    g = builder.build()
    steps: dict[int, list[tuple[int, ...]]] = {b: [()] for b in boundary}
    for copy in copies:
        leaves = copy.levels[k]
        for level in range(k):
            for node in copy.levels[level]:
                steps[copy.vertex[node]] = [copy.path_steps(node, leaf) for leaf in leaves]
    return g, WalkAssignment.from_steps(g, steps)


def _mutual_info(d: int, k: int) -> tuple[BaseGraph, WalkAssignment]:
    depth = k // 2
    if k == 1:
        return _edge_vertex(d)
    builder = _GraphBuilder()
    if k % 2:
        first = _add_tree(builder, d, depth)
        second = _add_tree(builder, d, depth)
        left = [first.vertex[x] for x in first.levels[depth]]
        right = [second.vertex[x] for x in second.levels[depth]]
        for shift in range(d - 1):
            for i, u in enumerate(left):
                builder.add_edge(u, right[(i + shift) % len(right)])
        copies = [first, second]
    else:
        big = _add_tree(builder, d, depth)
        big_boundary = [big.vertex[x] for x in big.levels[depth]]
        copies = [big]
        for _ in range(d - 1):
            small = _add_tree(builder, d, depth - 1)
            repeat = d if depth == 1 else d - 1
            stubs = [small.vertex[x] for x in small.levels[depth - 1] for _ in range(repeat)]
            for u, v in zip(big_boundary, stubs, strict=True):
                builder.add_edge(u, v)
            copies.append(small)
    g = builder.build()
    return g, _walks_to_root(g, copies)


def mutual_information_bound(d: int, k: int) -> Fraction:
    """Upper bound on I(Y_u; Y_v)/H(vertex) for vertices at distance k."""
    if k % 2:
        return Fraction(2, d * (d - 1) ** (k // 2))
    return Fraction(1, (d - 1) ** (k // 2))


def flower_closed_form(d: int, i: int) -> EntropyInequality:
    """H(flower_i) >= ((i d - 2 i + 1)/(d - 1)) H(vertex)."""
    return EntropyInequality.from_terms(
        d,
        [(flower_type(d, i), 1), (vertex_type(d), -Fraction(i * d - 2 * i + 1, d - 1))],
        f"flower_bound(i={i})",
    ).normalized()


def closed_form(name: str, d: int, **params: int) -> EntropyInequality:
    """The target inequality each built-in construction must reproduce."""
    v = vertex_type(d)
    terms: list[tuple[SubsetType, Fraction | int]]
    if name == "edge_vertex":
        terms = [(edge_type(d), Fraction(d, 2)), (v, -(d - 1))]
    elif name == "complete_graph":
        terms = [(pair_type(d, 3), 1), (v, -(2 - Fraction(2, d * (d - 1))))]
    elif name == "path_edge":
        terms = [(path_type(d, 3), 1), (edge_type(d), -Fraction(2 * d - 3, d - 1))]
    elif name == "flower":
        i = params["i"]
        terms = [
            (flower_type(d, i + 1), d - i),
            (flower_type(d, i), -(d - i - 1)),
            (v, -(d - 1)),
        ]
    elif name == "sphere":
        terms = [(sphere_type(d, params["k"]), 1), (v, -((d - 1) ** params["k"]))]
    elif name == "mutual_info":
        k = params["k"]
        terms = [(pair_type(d, k), 1), (v, -(2 - mutual_information_bound(d, k)))]
    elif name == "star_vertex":
        terms = [(star_type(d), 1), (v, -(d - 1))]
    elif name == "star_edge":
        terms = [(star_type(d), 1), (edge_type(d), -Fraction(d, 2))]
    elif name == "blowup_edge_vertex":
        return blow_up(closed_form("edge_vertex", d), params["k"]).normalized()
    else:
        raise DerivationError(f"Unknown construction '{name}'")
    return EntropyInequality.from_terms(d, terms, name).normalized()


@dataclass(frozen=True)
class _Recipe:
    build: Callable[..., tuple[BaseGraph, WalkAssignment]]
    params: tuple[str, ...] = ()


BUILTINS: dict[str, _Recipe] = {
    "edge_vertex": _Recipe(_edge_vertex),
    "complete_graph": _Recipe(_complete_graph),
    "path_edge": _Recipe(_path_edge),
    "flower": _Recipe(_flower, ("i",)),
    "sphere": _Recipe(_sphere, ("k",)),
    "mutual_info": _Recipe(_mutual_info, ("k",)),
    "star_vertex": _Recipe(_star_vertex),
    "blowup_edge_vertex": _Recipe(_blowup_edge_vertex, ("k",)),
}

# Known inequalities that the recipe does not produce directly
REFERENCE_INEQUALITIES = ("star_edge",)


def _check_params(name: str, d: int, params: dict[str, int]) -> None:
    expected = BUILTINS[name].params
    missing = [p for p in expected if p not in params]
    unknown = [p for p in params if p not in expected]
    if missing or unknown:
        raise DerivationError(
            f"Construction '{name}' takes parameters {list(expected)}; "
            f"missing {missing}, unknown {unknown}"
        )
    if name == "flower" and not 1 <= params["i"] < d:
        raise DerivationError(f"flower needs 1 <= i < d={d}, got i={params['i']}")
    if name in ("sphere", "mutual_info") and params["k"] < 1:
        raise DerivationError(f"{name} needs k >= 1, got k={params['k']}")
    if name == "blowup_edge_vertex" and params["k"] < 0:
        raise DerivationError(f"{name} needs k >= 0, got k={params['k']}")


def _label(name: str, params: dict[str, int]) -> str:
    if not params:
        return name
    return f"{name}({','.join(f'{k}={v}' for k, v in sorted(params.items()))})"


def builtin(name: str, d: int, **params: int) -> Construction:
    """Build a named construction and derive its inequality.

    Raises:
        DerivationError: On an unknown name, bad parameters, or a derived
            inequality that disagrees with the closed form
    """
    if name not in BUILTINS:
        raise DerivationError(
            f"Unknown construction '{name}'. Available: {', '.join(sorted(BUILTINS))}"
        )
    if d < MIN_TREE_DEGREE:
        raise DerivationError(f"Tree degree must be at least {MIN_TREE_DEGREE}, got {d}")
    _check_params(name, d, params)
    label = _label(name, params)
    g, walks = BUILTINS[name].build(d, *(params[p] for p in BUILTINS[name].params))
    inequality = derive_inequality(g, walks, label)
    target = closed_form(name, d, **params)
    if inequality != target:
        raise DerivationError(
            f"{label}: derived {inequality.render()} but expected {target.render()}"
        )
    return Construction(g, walks, inequality)


def reference_inequality(name: str, d: int, **params: int) -> EntropyInequality:
    """A named inequality: derived for built-in constructions, stated for references."""
    if name in REFERENCE_INEQUALITIES:
        if params:
            raise DerivationError(f"'{name}' takes no parameters")
        if d < MIN_TREE_DEGREE:
            raise DerivationError(f"Tree degree must be at least {MIN_TREE_DEGREE}, got {d}")
        return closed_form(name, d)
    return builtin(name, d, **params).inequality


def flower_bound(d: int, i: int) -> EntropyInequality:
    """Chain the flower steps 1..i-1 with nonnegative weights to bound H(flower_i)."""
    if not 2 <= i <= d:
        raise DerivationError(f"flower_bound needs 2 <= i <= d={d}, got i={i}")
    parts: list[tuple[EntropyInequality, Fraction]] = []
    need = Fraction(1)
    for j in range(i - 1, 0, -1):
        step = builtin("flower", d, i=j).inequality
        weight = need / step.coefficient(flower_type(d, j + 1))
        parts.append((step, weight))
        if j > 1:
            need = -weight * step.coefficient(flower_type(d, j))
    return combine(parts, name=f"flower_bound(i={i})")


def blow_up(inequality: EntropyInequality, k: int) -> EntropyInequality:
    """Replace every type by its radius-k ball; coefficients are kept."""
    if k < 0:
        raise DerivationError(f"Blow-up radius must be nonnegative, got {k}")
    if k == 0:
        return inequality
    name = f"blow_up({inequality.name},{k})" if inequality.name else ""
    return EntropyInequality.from_terms(
        inequality.d, [(ball(t, k), c) for t, c in inequality.terms], name
    )


def lift_base(g: BaseGraph, n: int, seed: int) -> BaseGraph:
    """A connected random n-fold lift of g, usable as a base graph.

    Raises:
        DerivationError: If no connected lift appears within the retry budget
    """
    if n < 1:
        raise DerivationError(f"Lift order must be at least 1, got {n}")
    validate_graph(g)
    for attempt in range(LIFT_RETRY_BUDGET):
        attempt_seed = seed if attempt == 0 else derive_seed(seed, attempt)
        lifted = random_lift(g, n, attempt_seed).to_base_graph()
        if nx.is_connected(lifted.to_networkx()):
            try:
                validate_graph(lifted)
            except GraphError as e:
                raise DerivationError(f"Lift is not a valid base graph: {e}") from e
            return lifted
        logger.info("Lift attempt %d with seed %d is disconnected; redrawing", attempt, attempt_seed)
    raise DerivationError(
        f"No connected {n}-fold lift found in {LIFT_RETRY_BUDGET} attempts (seed {seed})"
    )
