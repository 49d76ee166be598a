"""Exact counts of colorings of random lifts with prescribed local statistics.

A uniform random n-fold lift joins the n copies of u and of v by a uniform
bijection for every base edge e = (u, v). Given the colors on both fibers,
the probability that the bijection produces pair counts k is a ratio of
factorials, so the expected number of colorings whose statistics equal a
consistent collection is a product of exact rationals.
"""

import itertools
import logging
import math
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

from scipy.stats import entropy as shannon_entropy

from treefiid.configuration import BRUTE_FORCE_GUARD
from treefiid.exceptions import OracleError
from treefiid.graph_core import BaseGraph

logger = logging.getLogger(__name__)

Masses = tuple[Fraction, ...]


@dataclass(frozen=True)
class ConsistentCollection:
    """Vertex laws on M and edge laws on M x M (rows: u end, columns: v end)."""

    states: tuple[str, ...]
    vertex: Mapping[int, Masses]
    edge: Mapping[int, tuple[Masses, ...]]

    def validate(self, g: BaseGraph) -> None:
        """Check every law and every edge marginal exactly.

        Raises:
            OracleError: Naming the offending vertex or edge
        """
        m = len(self.states)
        if m == 0:
            raise OracleError("Collection has no states")
        for v in g.vertices:
            law = self.vertex.get(v)
            if law is None:
                raise OracleError(f"No distribution for vertex {v}")
            _check_law(law, m, f"vertex {v}")
        for e in g.edges:
            table = self.edge.get(e.id)
            if table is None:
                raise OracleError(f"No distribution for edge {e.id}")
            if len(table) != m:
                raise OracleError(f"Edge {e.id} table has {len(table)} rows, expected {m}")
            _check_law(tuple(x for row in table for x in row), m * m, f"edge {e.id}")
            rows = tuple(sum(row, Fraction(0)) for row in table)
            columns = tuple(sum(col, Fraction(0)) for col in zip(*table, strict=True))
            if rows != self.vertex[e.u]:
                raise OracleError(f"Edge {e.id} u-marginal differs from vertex {e.u}")
            if columns != self.vertex[e.v]:
                raise OracleError(f"Edge {e.id} v-marginal differs from vertex {e.v}")


def _check_law(masses: Sequence[Fraction], size: int, where: str) -> None:
    if len(masses) != size:
        raise OracleError(f"Distribution at {where} has {len(masses)} masses, expected {size}")
    if any(x < 0 or x > 1 for x in masses):
        raise OracleError(f"Distribution at {where} has a mass outside [0, 1]")
    if sum(masses, Fraction(0)) != 1:
        raise OracleError(f"Distribution at {where} sums to {sum(masses, Fraction(0))}")


def product_collection(g: BaseGraph, states: Sequence[str], law: Sequence[Fraction]) -> ConsistentCollection:
    """Same vertex law everywhere and independent endpoints on every edge."""
    masses = tuple(Fraction(x) for x in law)
    table = tuple(tuple(a * b for b in masses) for a in masses)
    return ConsistentCollection(
        tuple(states), {v: masses for v in g.vertices}, {e.id: table for e in g.edges}
    )


def diagonal_collection(g: BaseGraph, states: Sequence[str], law: Sequence[Fraction]) -> ConsistentCollection:
    """Same vertex law everywhere and equal colors on both ends of every edge."""
    masses = tuple(Fraction(x) for x in law)
    m = len(masses)
    table = tuple(tuple(masses[a] if a == b else Fraction(0) for b in range(m)) for a in range(m))
    return ConsistentCollection(
        tuple(states), {v: masses for v in g.vertices}, {e.id: table for e in g.edges}
    )


def _check_counts(cu: Sequence[int], cv: Sequence[int], k: Sequence[Sequence[int]]) -> None:
    if any(x < 0 for x in cu) or any(x < 0 for x in cv):
        raise OracleError("Color counts must be nonnegative")
    if sum(cu) != sum(cv):
        raise OracleError(f"Fibers have different sizes {sum(cu)} and {sum(cv)}")
    if len(k) != len(cu) or any(len(row) != len(cv) for row in k):
        raise OracleError(f"Pair counts must be a {len(cu)} x {len(cv)} table")
    for a, row in enumerate(k):
        if any(x < 0 for x in row):
            raise OracleError(f"Negative pair count in row {a}")
        if sum(row) != cu[a]:
            raise OracleError(f"Row {a} of the pair counts sums to {sum(row)}, expected {cu[a]}")
    for b, column in enumerate(zip(*k, strict=True)):
        if sum(column) != cv[b]:
            raise OracleError(
                f"Column {b} of the pair counts sums to {sum(column)}, expected {cv[b]}"
            )


def matching_count(cu: Sequence[int], cv: Sequence[int], k: Sequence[Sequence[int]]) -> int:
    """Number of bijections L_u -> L_v realizing the pair counts k.

    Raises:
        OracleError: If the row and column sums of k disagree with cu and cv
    """
    _check_counts(cu, cv, k)
    count = 1
    for a, row in enumerate(k):
        count *= math.factorial(cu[a])
        count //= math.prod(math.factorial(x) for x in row)
    for y in cv:
        count *= math.factorial(y)
    return count


def matching_probability(cu: Sequence[int], cv: Sequence[int], k: Sequence[Sequence[int]]) -> Fraction:
    return Fraction(matching_count(cu, cv, k), math.factorial(sum(cu)))


def _scaled(masses: Sequence[Fraction], n: int) -> list[int] | None:
    counts = [x * n for x in masses]
    if any(c.denominator != 1 for c in counts):
        return None
    return [int(c) for c in counts]


def _multinomial(n: int, counts: Sequence[int]) -> int:
    return math.factorial(n) // math.prod(math.factorial(c) for c in counts)


def expected_colorings(g: BaseGraph, mu: ConsistentCollection, n: int) -> Fraction:
    """Expected number of colorings of a random n-fold lift with statistics mu.

    Zero unless n times every mass is an integer.
    """
    if n < 1:
        raise OracleError(f"Lift order must be at least 1, got {n}")
    mu.validate(g)
    total = Fraction(1)
    for v in g.vertices:
        counts = _scaled(mu.vertex[v], n)
        if counts is None:
            return Fraction(0)
        total *= _multinomial(n, counts)
    for e in g.edges:
        table = [_scaled(row, n) for row in mu.edge[e.id]]
        if any(row is None for row in table):
            return Fraction(0)
        pairs = [row for row in table if row is not None]
        cu = [sum(row) for row in pairs]
        cv = [sum(column) for column in zip(*pairs, strict=True)]
        total *= matching_probability(cu, cv, pairs)
    return total


def rate(g: BaseGraph, mu: ConsistentCollection) -> float:
    """sum_e H(mu_e) - sum_v (deg v - 1) H(mu_v), in nats."""
    mu.validate(g)
    edges = sum(
        _entropy([x for row in mu.edge[e.id] for x in row]) for e in g.edges
    )
    vertices = sum((g.degree(v) - 1) * _entropy(mu.vertex[v]) for v in g.vertices)
    return edges - vertices


def _entropy(masses: Sequence[Fraction]) -> float:
    return float(shannon_entropy([float(x) for x in masses]))


def log_rate(g: BaseGraph, mu: ConsistentCollection, n: int) -> float:
    """(1/n) log expected_colorings, or -inf when the expectation is zero."""
    value = expected_colorings(g, mu, n)
    if value == 0:
        return -math.inf
    return (math.log(value.numerator) - math.log(value.denominator)) / n


def brute_force_expected_colorings(g: BaseGraph, mu: ConsistentCollection, n: int) -> Fraction:
    """Enumerate every lift and coloring and count the colorings with statistics mu.

    The lift (v, i) ~ (u, sigma_e(i)) for every e = (u, v); edges are
    independent given the coloring, so each edge's sum over sigma_e is
    taken separately.

    Raises:
        OracleError: If the enumeration exceeds the guard
    """
    if n < 1:
        raise OracleError(f"Lift order must be at least 1, got {n}")
    mu.validate(g)
    m = len(mu.states)
    size = m ** (n * len(g.vertices)) * math.factorial(n) ** len(g.edges)
    if size > BRUTE_FORCE_GUARD:
        raise OracleError(f"Brute force needs {size} cases, above the guard {BRUTE_FORCE_GUARD}")
    vertex_targets = {v: _scaled(mu.vertex[v], n) for v in g.vertices}
    edge_targets = {
        e.id: [_scaled(row, n) for row in mu.edge[e.id]] for e in g.edges
    }
    if any(t is None for t in vertex_targets.values()) or any(
        row is None for rows in edge_targets.values() for row in rows
    ):
        return Fraction(0)
    permutations = list(itertools.permutations(range(n)))
    hits = 0
    for flat in itertools.product(range(m), repeat=n * len(g.vertices)):
        fibers = {v: flat[v * n : (v + 1) * n] for v in g.vertices}
        if any(
            [Counter(fibers[v])[a] for a in range(m)] != vertex_targets[v] for v in g.vertices
        ):
            continue
        ways = 1
        for e in g.edges:
            target = edge_targets[e.id]
            cu, cv = fibers[e.u], fibers[e.v]
            matching = 0
            for sigma in permutations:
                pairs = Counter((cu[sigma[i]], cv[i]) for i in range(n))
                if all(pairs[(a, b)] == target[a][b] for a in range(m) for b in range(m)):
                    matching += 1
            ways *= matching
            if not ways:
                break
        hits += ways
    logger.debug("Brute force over %d cases found %d hits", size, hits)
    return Fraction(hits, math.factorial(n) ** len(g.edges))
