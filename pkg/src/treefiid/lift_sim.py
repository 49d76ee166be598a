"""Random n-fold lifts, R-nice detection, local rules, empirical statistics.

A lift of a base graph has vertices (v, i) for base vertices v and
i in 0..n-1, stored as the integer v * n + i. Each base edge e = (u, v)
carries a permutation sigma_e, and (v, i) is adjacent to (u, sigma_e(i)).

Neighborhoods are expanded breadth-first along non-backtracking base walks
for all n lifts of a base vertex at once: a column of the expansion holds,
for every lift index, the lift vertex reached by one base walk.
"""

import logging
import math
from abc import ABC, abstractmethod
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any

import networkx as nx
import numpy as np
from scipy.stats import entropy as shannon_entropy

from treefiid.configuration import EMBEDDING_RETRY_FACTOR
from treefiid.counting_oracle import ConsistentCollection
from treefiid.exceptions import InequalityError, SimulationError
from treefiid.graph_core import (
    BaseGraph,
    Edge,
    enumerate_nb_walks,
    trace_walk,
    validate_graph,
)
from treefiid.type_calculus import (
    EntropyInequality,
    SubsetType,
    ball_size,
    describe_type,
    vertex_type,
)

logger = logging.getLogger(__name__)

# Lift indices are expanded in blocks of this size to bound memory
EXPANSION_CHUNK = 1 << 14

# Integer labels below this value stand for uniform labels below 1/2
HALF_LABEL = np.uint64(1 << 63)


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for task `index` of a run seeded with `seed`."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class LiftGraph:
    """An n-fold lift of `base` given by one permutation per base edge."""

    base: BaseGraph
    n: int
    matchings: Mapping[int, np.ndarray]

    @cached_property
    def _inverse(self) -> dict[int, np.ndarray]:
        return {eid: np.argsort(sigma) for eid, sigma in self.matchings.items()}

    @cached_property
    def _lists(self) -> dict[int, tuple[list[int], list[int]]]:
        return {
            eid: (sigma.tolist(), self._inverse[eid].tolist())
            for eid, sigma in self.matchings.items()
        }

    @property
    def vertex_count(self) -> int:
        return len(self.base.vertices) * self.n

    def lift_vertex(self, v: int, i: int) -> int:
        return v * self.n + i

    def project(self, x: int) -> tuple[int, int]:
        """Base vertex and lift index of lift vertex x."""
        v, i = divmod(x, self.n)
        return v, i

    def move(self, v: int, eid: int, idx: np.ndarray) -> tuple[int, np.ndarray]:
        """Cross base edge eid from the lifts idx of base vertex v."""
        e = self.base.edge(eid)
        if v == e.v:
            return e.u, self.matchings[eid][idx]
        return e.v, self._inverse[eid][idx]

    def neighbors(self, x: int) -> list[int]:
        v, i = divmod(x, self.n)
        out = []
        for e in self.base.incidence[v]:
            sigma, inverse = self._lists[e.id]
            if v == e.v:
                out.append(e.u * self.n + sigma[i])
            else:
                out.append(e.v * self.n + inverse[i])
        return out

    def edge_endpoints(self, eid: int) -> tuple[np.ndarray, np.ndarray]:
        """Lift vertices at the u end and the v end of the n lifts of eid."""
        e = self.base.edge(eid)
        return e.u * self.n + self.matchings[eid], e.v * self.n + np.arange(self.n)

    def to_base_graph(self) -> BaseGraph:
        """The lift as an (unvalidated) base graph; lift edge eid * n + i joins (v, i)."""
        edges = []
        for e in self.base.edges:
            u_ids, v_ids = self.edge_endpoints(e.id)
            for i in range(self.n):
                edges.append(Edge(e.id * self.n + i, int(u_ids[i]), int(v_ids[i])))
        return BaseGraph(tuple(range(self.vertex_count)), tuple(edges))

    def to_networkx(self) -> nx.MultiGraph:
        return self.to_base_graph().to_networkx()


def random_lift(g: BaseGraph, n: int, seed: int) -> LiftGraph:
    """Draw one uniform permutation per base edge, in edge-id order.

    Raises:
        SimulationError: If n < 1 or the seed is negative
    """
    if n < 1:
        raise SimulationError(f"Lift order must be at least 1, got {n}")
    if seed < 0:
        raise SimulationError(f"Seed must be nonnegative, got {seed}")
    validate_graph(g)
    rng = np.random.default_rng(seed)
    matchings = {e.id: rng.permutation(n) for e in g.edges}
    return LiftGraph(g, n, matchings)


@dataclass(frozen=True, eq=False)
class _Column:
    base: int
    last: int | None
    idx: np.ndarray
    parent: int
    depth: int


def _expand(lift: LiftGraph, roots: Sequence[_Column], depth: int) -> list[_Column]:
    """Columns for every non-backtracking base walk of length <= depth from the roots."""
    columns = list(roots)
    frontier = list(range(len(roots)))
    for _ in range(depth):
        next_frontier = []
        for position in frontier:
            column = columns[position]
            for e in lift.base.incidence[column.base]:
                if e.id == column.last:
                    continue
                other, idx = lift.move(column.base, e.id, column.idx)
                columns.append(_Column(other, e.id, idx, position, column.depth + 1))
                next_frontier.append(len(columns) - 1)
        frontier = next_frontier
    return columns


def _chunks(n: int) -> Iterable[np.ndarray]:
    for start in range(0, n, EXPANSION_CHUNK):
        yield np.arange(start, min(start + EXPANSION_CHUNK, n))


def _tree_like(lift: LiftGraph, roots: Sequence[_Column], r: int) -> np.ndarray:
    """True where the radius-r neighborhood grown from the roots induces a tree.

    A cycle shows up as two walks of length <= r meeting, or a walk of
    length r + 1 landing back inside the neighborhood.
    """
    columns = _expand(lift, roots, r + 1)
    keys = np.stack(
        [(c.base * lift.n + c.idx) * 2 + (1 if c.depth > r else 0) for c in columns],
        axis=1,
    )
    keys.sort(axis=1)
    same = (keys[:, 1:] >> 1) == (keys[:, :-1] >> 1)
    inner_left = (keys[:, :-1] & 1) == 0
    return ~np.any(same & inner_left, axis=1)


@dataclass(frozen=True, eq=False)
class NiceFlags:
    """R-niceness per lift vertex (v * n + i) and per lift edge (eid * n + i)."""

    radius: int
    vertices: np.ndarray
    edges: np.ndarray | None

    @property
    def non_nice_edge_fraction(self) -> float:
        if self.edges is None:
            raise SimulationError("Edge flags were not computed")
        return float(1.0 - self.edges.mean()) if len(self.edges) else 0.0


def r_nice_flags(lift: LiftGraph, r: int, include_edges: bool = True) -> NiceFlags:
    """Flag lift vertices and edges whose radius-r neighborhood is a tree."""
    if r < 0:
        raise SimulationError(f"Radius must be nonnegative, got {r}")
    n = lift.n
    vertices = np.empty(lift.vertex_count, dtype=bool)
    for v in lift.base.vertices:
        for idx in _chunks(n):
            vertices[v * n + idx] = _tree_like(lift, [_Column(v, None, idx, -1, 0)], r)
    edges = None
    if include_edges:
        edges = np.empty(len(lift.base.edges) * n, dtype=bool)
        for e in lift.base.edges:
            sigma = lift.matchings[e.id]
            for idx in _chunks(n):
                roots = [
                    _Column(e.u, e.id, sigma[idx], -1, 0),
                    _Column(e.v, e.id, idx, -1, 0),
                ]
                edges[e.id * n + idx] = _tree_like(lift, roots, r)
    logger.debug(
        "r=%d: %d of %d vertices nice", r, int(vertices.sum()), lift.vertex_count
    )
    return NiceFlags(r, vertices, edges)


def count_short_cycles(lift: LiftGraph, length: int) -> int:
    """Number of cycles of the given length in the lift."""
    if length < 2:
        raise SimulationError(f"Cycle length must be at least 2, got {length}")
    n = lift.n
    closed_walks = 0
    for v in lift.base.vertices:
        for walk in enumerate_nb_walks(lift.base, v, length):
            steps = walk.steps
            if len(steps) != length or steps[-1] == steps[0]:
                continue
            if trace_walk(lift.base, v, steps) != v:
                continue
            current, idx = v, np.arange(n)
            positions = [current * n + idx]
            for eid in steps:
                current, idx = lift.move(current, eid, idx)
                positions.append(current * n + idx)
            closed = positions[-1] == positions[0]
            visited = np.sort(np.stack(positions[:-1], axis=1), axis=1)
            distinct = ~np.any(visited[:, 1:] == visited[:, :-1], axis=1)
            closed_walks += int(np.sum(closed & distinct))
    return closed_walks // (2 * length)


@dataclass(frozen=True, eq=False)
class BallBatch:
    """Labeled radius-R balls around all lifts of one base vertex.

    Column 0 is the root; `parents[j]` is the column of j's parent and
    `depths[j]` its distance from the root.
    """

    labels: np.ndarray
    parents: tuple[int, ...]
    depths: tuple[int, ...]


class LocalRule(ABC):
    """A finite-radius factor: maps a labeled rooted R-ball to a state index."""

    name: str
    radius: int
    states: tuple[Any, ...]

    @property
    def default_state(self) -> Any:
        return self.states[0]

    @abstractmethod
    def evaluate(self, ball: BallBatch) -> np.ndarray:
        """Return one index into `states` per row of the batch."""

    def tree_edge_law(self, d: int) -> dict[tuple[Any, Any], Fraction] | None:
        """Exact law of the endpoint pair of an edge of T_d, when known."""
        return None


class IidBitRule(LocalRule):
    """State 0 if the own label is below 1/2, else 1."""

    name = "iid_bit"
    radius = 0
    states = (0, 1)

    def evaluate(self, ball: BallBatch) -> np.ndarray:
        return (ball.labels[:, 0] >= HALF_LABEL).astype(np.int64)

    def tree_edge_law(self, d: int) -> dict[tuple[Any, Any], Fraction]:
        return {(a, b): Fraction(1, 4) for a in self.states for b in self.states}


class LocalMaxRule(LocalRule):
    """State 1 iff the root label is the largest in its radius-R ball."""

    name = "local_max"
    states = (0, 1)

    def __init__(self, radius: int = 1) -> None:
        if radius < 1:
            raise SimulationError(f"local_max needs radius >= 1, got {radius}")
        self.radius = radius

    def evaluate(self, ball: BallBatch) -> np.ndarray:
        others = ball.labels[:, 1:].max(axis=1)
        return (ball.labels[:, 0] > others).astype(np.int64)

    def tree_edge_law(self, d: int) -> dict[tuple[Any, Any], Fraction]:
        size = ball_size(vertex_type(d), self.radius)
        alone = Fraction(1, size)
        return {(1, 1): Fraction(0), (1, 0): alone, (0, 1): alone, (0, 0): 1 - 2 * alone}


RULES = ("iid_bit", "local_max")


def get_rule(name: str, radius: int | None = None) -> LocalRule:
    """Factory for the built-in local rules.

    Raises:
        SimulationError: On an unknown name or a radius the rule does not support
    """
    if name == "iid_bit":
        if radius not in (None, 0):
            raise SimulationError(f"iid_bit has radius 0, got {radius}")
        return IidBitRule()
    if name == "local_max":
        return LocalMaxRule(1 if radius is None else radius)
    raise SimulationError(f"Unknown rule '{name}'. Use one of: {', '.join(RULES)}")


@dataclass(frozen=True, eq=False)
class Coloring:
    """A state index per lift vertex; `states` gives the state names."""

    lift: LiftGraph
    states: tuple[Any, ...]
    values: np.ndarray

    @property
    def color_count(self) -> int:
        return len(np.unique(self.values))


def draw_labels(lift: LiftGraph, seed: int) -> np.ndarray:
    """IID uniform 64-bit labels, one per lift vertex."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2**64 - 1, size=lift.vertex_count, dtype=np.uint64, endpoint=True)


def project_rule(
    lift: LiftGraph, rule: LocalRule, seed: int, labels: np.ndarray | None = None
) -> Coloring:
    """Apply a local rule at every R-nice lift vertex; the others get the default state."""
    if labels is None:
        labels = draw_labels(lift, seed)
    n = lift.n
    nice = r_nice_flags(lift, rule.radius, include_edges=False).vertices
    values = np.zeros(lift.vertex_count, dtype=np.int64)
    for v in lift.base.vertices:
        for idx in _chunks(n):
            columns = _expand(lift, [_Column(v, None, idx, -1, 0)], rule.radius)
            ids = np.stack([c.base * n + c.idx for c in columns], axis=1)
            batch = BallBatch(
                labels[ids],
                tuple(c.parent for c in columns),
                tuple(c.depth for c in columns),
            )
            values[v * n + idx] = rule.evaluate(batch)
    values[~nice] = 0
    logger.debug("Projected %s: %d non-nice vertices set to default", rule.name, int((~nice).sum()))
    return Coloring(lift, tuple(rule.states), values)


@dataclass(frozen=True)
class LocalStats:
    """Empirical color laws over the lifts of each base vertex and edge."""

    states: tuple[Any, ...]
    vertex: Mapping[int, Mapping[Any, Fraction]]
    edge: Mapping[int, Mapping[tuple[Any, Any], Fraction]]

    def check_consistency(self, g: BaseGraph) -> None:
        """Raise unless edge marginals equal the endpoint vertex laws."""
        for e in g.edges:
            law = self.edge[e.id]
            for s in self.states:
                left = sum(law[(s, t)] for t in self.states)
                right = sum(law[(t, s)] for t in self.states)
                if left != self.vertex[e.u][s] or right != self.vertex[e.v][s]:
                    raise SimulationError(
                        f"Edge {e.id} marginal at state {s} disagrees with its endpoints"
                    )

    def to_collection(self) -> ConsistentCollection:
        return ConsistentCollection(
            tuple(str(s) for s in self.states),
            {v: tuple(law[s] for s in self.states) for v, law in self.vertex.items()},
            {
                eid: tuple(tuple(law[(a, b)] for b in self.states) for a in self.states)
                for eid, law in self.edge.items()
            },
        )


def local_stats(lift: LiftGraph, coloring: Coloring) -> LocalStats:
    """Exact color frequencies over the n lifts of each base vertex and edge."""
    n, m = lift.n, len(coloring.states)
    states = coloring.states
    vertex: dict[int, dict[Any, Fraction]] = {}
    for v in lift.base.vertices:
        counts = np.bincount(coloring.values[v * n : (v + 1) * n], minlength=m)
        vertex[v] = {s: Fraction(int(counts[a]), n) for a, s in enumerate(states)}
    edge: dict[int, dict[tuple[Any, Any], Fraction]] = {}
    for e in lift.base.edges:
        u_ids, v_ids = lift.edge_endpoints(e.id)
        codes = coloring.values[u_ids] * m + coloring.values[v_ids]
        counts = np.bincount(codes, minlength=m * m)
        edge[e.id] = {
            (states[a], states[b]): Fraction(int(counts[a * m + b]), n)
            for a in range(m)
            for b in range(m)
        }
    return LocalStats(states, vertex, edge)


def total_variation(p: Mapping[Any, Any], q: Mapping[Any, Any]) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(float(p.get(k, 0)) - float(q.get(k, 0))) for k in keys)


def tree_law_distance(stats: LocalStats, rule: LocalRule, d: int) -> float:
    """Largest total variation between an empirical edge law and the rule's tree law."""
    law = rule.tree_edge_law(d)
    if law is None:
        raise SimulationError(f"Rule {rule.name} has no known tree law")
    return max(total_variation(edge_law, law) for edge_law in stats.edge.values())


def edge_mass_spread(
    g: BaseGraph, n: int, rule: LocalRule, seeds: Sequence[int]
) -> dict[tuple[int, tuple[Any, Any]], float]:
    """Standard deviation across seeds of every edge-law mass."""
    samples: dict[tuple[int, tuple[Any, Any]], list[float]] = {}
    for seed in seeds:
        lift = random_lift(g, n, derive_seed(seed, 0))
        stats = local_stats(lift, project_rule(lift, rule, derive_seed(seed, 1)))
        for eid, law in stats.edge.items():
            for pair, mass in law.items():
                samples.setdefault((eid, pair), []).append(float(mass))
    return {key: float(np.std(values)) for key, values in samples.items()}


def sample_type_colors(
    lift: LiftGraph, coloring: Coloring, t: SubsetType, samples: int, seed: int
) -> Counter[tuple[int, ...]]:
    """Color tuples of random embeddings of t rooted at nice lift vertices.

    Raises:
        SimulationError: If the degrees disagree, or too few nice roots turn up
    """
    d = lift.base.regular_degree()
    if d != t.d:
        raise SimulationError(f"Type is for T_{t.d} but the base graph has degree {d}")
    if samples < 1:
        raise SimulationError(f"Need at least one sample, got {samples}")
    tree = t.steiner
    root = tree.marked[0]
    order = [root]
    parent: dict[int, int | None] = {root: None}
    children: dict[int, list[int]] = {}
    for node in order:
        children[node] = [y for y in tree.adjacency[node] if y not in parent]
        for y in children[node]:
            parent[y] = node
            order.append(y)
    position = {node: k for k, node in enumerate(order)}

    nice = r_nice_flags(lift, t.diameter, include_edges=False).vertices
    rng = np.random.default_rng(seed)
    counter: Counter[tuple[int, ...]] = Counter()
    attempts, budget = 0, samples * EMBEDDING_RETRY_FACTOR
    base_count = len(lift.base.vertices)
    values = coloring.values
    while counter.total() < samples and attempts < budget:
        block = min(samples - counter.total(), budget - attempts)
        bases = rng.integers(0, base_count, size=block).tolist()
        indices = rng.integers(0, lift.n, size=block).tolist()
        keys = rng.random((block, len(order), d)).tolist()
        for s in range(block):
            attempts += 1
            x = bases[s] * lift.n + indices[s]
            if not nice[x]:
                continue
            image = {root: x}
            for node in order:
                if not children[node]:
                    continue
                candidates = lift.neighbors(image[node])
                up = parent[node]
                if up is not None:
                    candidates.remove(image[up])
                row = keys[s][position[node]]
                ranked = sorted(range(len(candidates)), key=row.__getitem__)
                for child, j in zip(children[node], ranked, strict=False):
                    image[child] = candidates[j]
            counter[tuple(int(values[image[m]]) for m in tree.marked)] += 1
    if counter.total() < samples:
        raise SimulationError(
            f"Only {counter.total()} of {samples} embeddings of {describe_type(t)} "
            f"found nice roots in {attempts} attempts"
        )
    logger.debug("Sampled %d embeddings of %s in %d attempts", samples, describe_type(t), attempts)
    return counter


def plug_in_entropy(counter: Counter[tuple[int, ...]]) -> float:
    return float(shannon_entropy(np.fromiter(counter.values(), dtype=float)))


def entropy_standard_error(counter: Counter[tuple[int, ...]]) -> float:
    """Delta-method standard error of the plug-in entropy."""
    counts = np.fromiter(counter.values(), dtype=float)
    total = counts.sum()
    p = counts / total
    h = -np.sum(p * np.log(p))
    variance = np.sum(p * np.log(p) ** 2) - h**2
    return math.sqrt(max(float(variance), 0.0) / total)


def estimate_type_entropy(
    lift: LiftGraph, coloring: Coloring, t: SubsetType, samples: int, seed: int
) -> float:
    """Plug-in entropy (nats) of the colors on random embeddings of t."""
    return plug_in_entropy(sample_type_colors(lift, coloring, t, samples, seed))


def evaluate_slack(
    inequality: EntropyInequality, h: Mapping[SubsetType, float]
) -> float:
    """Sum of coefficient times h(type).

    Raises:
        InequalityError: If h has no value for some type
    """
    total = 0.0
    for t, coef in inequality.terms:
        if t not in h:
            raise InequalityError(f"No entropy value for type {describe_type(t)}")
        total += float(coef) * float(h[t])
    return total


def sharpness_ratio(inequality: EntropyInequality, r: int) -> Fraction:
    """Positive over negative part with H(V) replaced by |B_r(V)|.

    Raises:
        InequalityError: If the inequality is one-sided
    """
    positive = sum((c * ball_size(t, r) for t, c in inequality.terms if c > 0), Fraction(0))
    negative = sum((-c * ball_size(t, r) for t, c in inequality.terms if c < 0), Fraction(0))
    if positive == 0 or negative == 0:
        raise InequalityError("Sharpness needs both positive and negative coefficients")
    return positive / negative


def greedy_distance_coloring(lift: LiftGraph, L: int) -> Coloring:
    """Greedy proper coloring of the L-th power: equal colors lie more than L apart."""
    if L < 1:
        raise SimulationError(f"Distance must be at least 1, got {L}")
    graph = nx.Graph(lift.to_networkx())
    power = nx.power(graph, L)
    colors = nx.greedy_color(power, strategy="largest_first")
    values = np.array([colors[x] for x in range(lift.vertex_count)], dtype=np.int64)
    count = int(values.max()) + 1 if len(values) else 0
    logger.debug("Greedy distance-%d coloring uses %d colors", L, count)
    return Coloring(lift, tuple(range(count)), values)


@dataclass(frozen=True)
class TermEstimate:
    inequality: str
    type_name: str
    coefficient: Fraction
    entropy: float
    std_error: float


@dataclass(frozen=True)
class SlackEstimate:
    inequality: str
    slack: float
    std_error: float


@dataclass(frozen=True)
class SimulationReport:
    seed: int
    n: int
    rule: str
    nice_radius: int
    non_nice_edge_fraction: float
    terms: tuple[TermEstimate, ...]
    slacks: tuple[SlackEstimate, ...]


def _projected_lift(g: BaseGraph, n: int, seed: int, rule: LocalRule) -> tuple[LiftGraph, Coloring]:
    lift = random_lift(g, n, derive_seed(seed, 0))
    return lift, project_rule(lift, rule, derive_seed(seed, 1))


def simulated_collection(g: BaseGraph, n: int, seed: int, rule: LocalRule) -> ConsistentCollection:
    """Exact local statistics of the coloring run_simulation projects for this seed."""
    lift, coloring = _projected_lift(g, n, seed, rule)
    return local_stats(lift, coloring).to_collection()


def run_simulation(
    g: BaseGraph,
    n: int,
    seed: int,
    rule: LocalRule,
    inequalities: Sequence[EntropyInequality],
    samples: int,
    nice_radius: int = 2,
) -> SimulationReport:
    """Project a rule on a random lift and estimate every term of every inequality."""
    lift, coloring = _projected_lift(g, n, seed, rule)
    flags = r_nice_flags(lift, nice_radius)
    estimates: dict[SubsetType, tuple[float, float]] = {}
    terms: list[TermEstimate] = []
    slacks: list[SlackEstimate] = []
    for inequality in inequalities:
        variance = 0.0
        for t, coef in inequality.terms:
            if t not in estimates:
                counter = sample_type_colors(
                    lift, coloring, t, samples, derive_seed(seed, 2 + len(estimates))
                )
                estimates[t] = (plug_in_entropy(counter), entropy_standard_error(counter))
            value, error = estimates[t]
            variance += float(coef) ** 2 * error**2
            terms.append(TermEstimate(inequality.name, describe_type(t), coef, value, error))
        slack = evaluate_slack(inequality, {t: estimates[t][0] for t in inequality.types})
        slacks.append(SlackEstimate(inequality.name, slack, math.sqrt(variance)))
    return SimulationReport(
        seed, n, rule.name, nice_radius, flags.non_nice_edge_fraction, tuple(terms), tuple(slacks)
    )
