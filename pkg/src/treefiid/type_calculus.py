"""Subset types of the d-regular tree T_d, ball operators, and entropy inequalities.

A subset type is the Aut(T_d)-orbit of a finite vertex set. It is stored as
the pairwise distance matrix of the marked vertices in a canonical order.
The order comes from a canonical encoding of the marked Steiner tree (rooted
at its center or bicenter, children sorted by subtree code). Two vertex sets
get identical matrices iff some automorphism of T_d maps one onto the other.
"""

import logging
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from math import gcd, lcm
from typing import Any

import numpy as np

from treefiid.configuration import MIN_TREE_DEGREE
from treefiid.exceptions import InequalityError, SubsetTypeError

logger = logging.getLogger(__name__)

Matrix = tuple[tuple[int, ...], ...]
Adjacency = dict[int, list[int]]


@dataclass(frozen=True)
class SteinerTree:
    """Minimal subtree spanning a realization; `marked[i]` is the node of point i."""

    adjacency: Mapping[int, Sequence[int]]
    marked: tuple[int, ...]

    def distances_from(self, source: int) -> dict[int, int]:
        return _bfs(self.adjacency, source)

    @property
    def size(self) -> int:
        return len(self.adjacency)


@dataclass(frozen=True, eq=False)
class SubsetType:
    """Canonical distance matrix of a finite vertex set of T_d."""

    d: int
    dist: Matrix

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SubsetType):
            return NotImplemented
        if self.d != other.d:
            raise SubsetTypeError(
                f"Cannot compare subset types of T_{self.d} and T_{other.d}"
            )
        return self.dist == other.dist

    def __hash__(self) -> int:
        return hash((self.d, self.dist))

    def __str__(self) -> str:
        return describe_type(self)

    @property
    def n(self) -> int:
        return len(self.dist)

    @property
    def diameter(self) -> int:
        return max(max(row) for row in self.dist)

    @property
    def sort_key(self) -> tuple[int, Matrix]:
        return (self.n, self.dist)

    @cached_property
    def steiner(self) -> SteinerTree:
        """Steiner tree rebuilt from the stored distances."""
        adjacency, marked = _reconstruct(self.dist)
        return SteinerTree(
            {x: tuple(ys) for x, ys in adjacency.items()}, tuple(marked)
        )

    @property
    def is_connected(self) -> bool:
        """True when the Steiner tree has no unmarked vertices."""
        return self.steiner.size == self.n


def _bfs(adjacency: Mapping[int, Sequence[int]], source: int) -> dict[int, int]:
    depth = {source: 0}
    queue = deque([source])
    while queue:
        x = queue.popleft()
        for y in adjacency[x]:
            if y not in depth:
                depth[y] = depth[x] + 1
                queue.append(y)
    return depth


def _tree_path(adjacency: Mapping[int, Sequence[int]], a: int, b: int) -> list[int]:
    parent: dict[int, int | None] = {a: None}
    queue = deque([a])
    while queue:
        x = queue.popleft()
        if x == b:
            break
        for y in adjacency[x]:
            if y not in parent:
                parent[y] = x
                queue.append(y)
    path = [b]
    while path[-1] != a:
        previous = parent[path[-1]]
        assert previous is not None
        path.append(previous)
    return path[::-1]


def _as_matrix(dist: Sequence[Sequence[Any]]) -> Matrix:
    n = len(dist)
    if n == 0:
        raise SubsetTypeError("Distance matrix is empty")
    rows: list[tuple[int, ...]] = []
    for i, row in enumerate(dist):
        if len(row) != n:
            raise SubsetTypeError(f"Distance matrix row {i} has {len(row)} entries, expected {n}")
        converted = []
        for j, value in enumerate(row):
            if isinstance(value, bool) or int(value) != value:
                raise SubsetTypeError(f"Distance ({i}, {j}) = {value} is not an integer")
            converted.append(int(value))
        rows.append(tuple(converted))
    for i in range(n):
        if rows[i][i] != 0:
            raise SubsetTypeError(f"Diagonal entry ({i}, {i}) is {rows[i][i]}, expected 0")
        for j in range(i + 1, n):
            if rows[i][j] != rows[j][i]:
                raise SubsetTypeError(f"Distance matrix is not symmetric at ({i}, {j})")
            if rows[i][j] < 0:
                raise SubsetTypeError(f"Distance ({i}, {j}) is negative")
            if rows[i][j] == 0:
                raise SubsetTypeError(f"Points {i} and {j} coincide (distance 0)")
    return tuple(rows)


def _check_four_point(matrix: np.ndarray) -> None:
    """Raise unless the two largest of the three pair sums agree on every 4-tuple."""
    n = len(matrix)
    for i in range(n):
        row = matrix[i]
        s1 = row[:, None, None] + matrix[None, :, :]
        s2 = row[None, :, None] + matrix[:, None, :]
        s3 = row[None, None, :] + matrix[:, :, None]
        ordered = np.sort(np.stack([s1, s2, s3]), axis=0)
        bad = ordered[2] != ordered[1]
        if bad.any():
            j, k, m = (int(x) for x in np.argwhere(bad)[0])
            raise SubsetTypeError(
                f"Not a tree metric: four-point condition fails on points ({i}, {j}, {k}, {m})"
            )


def _reconstruct(dist: Matrix) -> tuple[Adjacency, list[int]]:
    """Insert points one at a time, attaching each by its smallest Gromov product."""
    adjacency: Adjacency = {0: []}
    marked = [0]
    next_id = 1
    for k in range(1, len(dist)):
        best_j, best_h = 0, dist[0][k]
        for j in range(1, k):
            twice = dist[0][k] + dist[j][k] - dist[0][j]
            if twice % 2:
                raise SubsetTypeError(
                    f"Not a tree metric: odd cycle through points 0, {j}, {k}"
                )
            if twice // 2 < best_h:
                best_j, best_h = j, twice // 2
        offset = dist[0][k] - best_h
        path = _tree_path(adjacency, marked[0], marked[best_j])
        if best_h < 0 or not 0 <= offset < len(path):
            raise SubsetTypeError(f"Not a tree metric: point {k} cannot be attached")
        node = path[offset]
        for _ in range(best_h):
            adjacency[next_id] = [node]
            adjacency[node].append(next_id)
            node = next_id
            next_id += 1
        marked.append(node)
    return adjacency, marked


def _prune(adjacency: Mapping[int, Sequence[int]], marked: set[int]) -> Adjacency:
    """Drop unmarked leaves until every leaf is marked."""
    adj = {x: list(ys) for x, ys in adjacency.items()}
    leaves = [x for x, ys in adj.items() if len(ys) <= 1 and x not in marked]
    while leaves:
        x = leaves.pop()
        if x not in adj:
            continue
        for y in adj.pop(x):
            adj[y].remove(x)
            if len(adj[y]) <= 1 and y not in marked:
                leaves.append(y)
    return adj


def _centers(adjacency: Mapping[int, Sequence[int]]) -> list[int]:
    if len(adjacency) <= 2:
        return sorted(adjacency)
    degree = {x: len(ys) for x, ys in adjacency.items()}
    layer = [x for x, k in degree.items() if k <= 1]
    remaining = len(adjacency)
    while remaining > 2:
        remaining -= len(layer)
        next_layer = []
        for x in layer:
            for y in adjacency[x]:
                degree[y] -= 1
                if degree[y] == 1:
                    next_layer.append(y)
        layer = next_layer
    return layer


def _canonical_order(adjacency: Mapping[int, Sequence[int]], marked: set[int]) -> list[int]:
    codes: dict[tuple[int, int], tuple[Any, ...]] = {}

    def encode(x: int, parent: int) -> tuple[Any, ...]:
        children = sorted(encode(y, x) for y in adjacency[x] if y != parent)
        code = (1 if x in marked else 0, tuple(children))
        codes[(x, parent)] = code
        return code

    def walk(x: int, parent: int, out: list[int]) -> None:
        if x in marked:
            out.append(x)
        children = sorted(
            (y for y in adjacency[x] if y != parent), key=lambda y: codes[(y, x)]
        )
        for y in children:
            walk(y, x, out)

    order: list[int] = []
    centers = _centers(adjacency)
    if len(centers) == 1:
        encode(centers[0], -1)
        walk(centers[0], -1, order)
    else:
        a, b = centers
        if encode(b, a) < encode(a, b):
            a, b = b, a
        walk(a, b, order)
        walk(b, a, order)
    return order


def type_from_tree(
    d: int, adjacency: Mapping[int, Sequence[int]], marked: Iterable[int]
) -> SubsetType:
    """Type of the marked vertices of an explicit subtree of T_d.

    Raises:
        SubsetTypeError: If a Steiner vertex has degree above d
    """
    marked_set = set(marked)
    if not marked_set:
        raise SubsetTypeError("A subset type needs at least one marked vertex")
    steiner = _prune(adjacency, marked_set)
    for x, ys in steiner.items():
        if len(ys) > d:
            raise SubsetTypeError(
                f"Steiner degree {len(ys)} exceeds d={d}; not realizable in T_{d}"
            )
    order = _canonical_order(steiner, marked_set)
    depths = [_bfs(steiner, x) for x in order]
    dist = tuple(tuple(depth[y] for y in order) for depth in depths)
    t = SubsetType(d, dist)
    # seed the cached Steiner tree so it is never rebuilt from distances
    t.__dict__["steiner"] = SteinerTree(
        {x: tuple(ys) for x, ys in steiner.items()}, tuple(order)
    )
    return t


def type_from_distances(d: int, dist: Sequence[Sequence[Any]]) -> SubsetType:
    """Validate a distance matrix as a tree metric realizable in T_d and canonicalize it.

    Args:
        d: Tree degree, at least 3
        dist: Symmetric integer matrix with zero diagonal

    Returns:
        The canonical SubsetType

    Raises:
        SubsetTypeError: If the matrix is malformed, not a tree metric, or
            needs a Steiner vertex of degree above d
    """
    if d < MIN_TREE_DEGREE:
        raise SubsetTypeError(f"Tree degree must be at least {MIN_TREE_DEGREE}, got {d}")
    return _type_from_matrix(d, _as_matrix(dist))


@lru_cache(maxsize=4096)
def _type_from_matrix(d: int, matrix: Matrix) -> SubsetType:
    _check_four_point(np.array(matrix, dtype=np.int64))
    adjacency, marked = _reconstruct(matrix)
    for i, node in enumerate(marked):
        depth = _bfs(adjacency, node)
        for j, other in enumerate(marked):
            if depth[other] != matrix[i][j]:
                raise SubsetTypeError(
                    f"Not a tree metric: distance ({i}, {j}) is {matrix[i][j]}, "
                    f"the reconstructed tree gives {depth[other]}"
                )
    return type_from_tree(d, adjacency, marked)


def _dilate(t: SubsetType, k: int) -> tuple[Adjacency, dict[int, int]]:
    """Embed t into T_d, growing the tree on demand, and BFS to depth k from the marks."""
    tree = t.steiner
    adjacency: Adjacency = {x: list(ys) for x, ys in tree.adjacency.items()}
    next_id = max(adjacency) + 1
    depth = {x: 0 for x in tree.marked}
    queue = deque(tree.marked)
    while queue:
        x = queue.popleft()
        if depth[x] == k:
            continue
        while len(adjacency[x]) < t.d:
            adjacency[next_id] = [x]
            adjacency[x].append(next_id)
            next_id += 1
        for y in adjacency[x]:
            if y not in depth:
                depth[y] = depth[x] + 1
                queue.append(y)
    return adjacency, depth


def ball(t: SubsetType, k: int) -> SubsetType:
    """Type of B_k(V) = {u : dist(u, V) <= k}."""
    if k < 0:
        raise SubsetTypeError(f"Ball radius must be nonnegative, got {k}")
    if k == 0:
        return t
    return _ball(t, k)


@lru_cache(maxsize=1024)
def _ball(t: SubsetType, k: int) -> SubsetType:
    adjacency, depth = _dilate(t, k)
    return type_from_tree(t.d, adjacency, depth)


@lru_cache(maxsize=4096)
def ball_size(t: SubsetType, k: int) -> int:
    """|B_k(V)| for any realization V of t."""
    if k < 0:
        raise SubsetTypeError(f"Ball radius must be nonnegative, got {k}")
    return len(_dilate(t, k)[1])


def truncated_tree(d: int, depth: int) -> tuple[Adjacency, list[list[int]]]:
    """T_{d,depth}: the root 0 with d children, every other inner vertex d-1 children.

    Returns:
        Adjacency lists and the vertices of each level, in creation order
    """
    adjacency: Adjacency = {0: []}
    levels = [[0]]
    next_id = 1
    for level in range(depth):
        created = []
        for x in levels[level]:
            for _ in range(d if level == 0 else d - 1):
                adjacency[next_id] = [x]
                adjacency[x].append(next_id)
                created.append(next_id)
                next_id += 1
        levels.append(created)
    return adjacency, levels


@lru_cache(maxsize=None)
def vertex_type(d: int) -> SubsetType:
    return type_from_tree(d, {0: []}, [0])


@lru_cache(maxsize=None)
def path_type(d: int, length: int) -> SubsetType:
    """Type of a path with `length` edges, all length+1 vertices marked."""
    adjacency: Adjacency = {
        i: [j for j in (i - 1, i + 1) if 0 <= j <= length] for i in range(length + 1)
    }
    return type_from_tree(d, adjacency, range(length + 1))


def edge_type(d: int) -> SubsetType:
    return path_type(d, 1)


@lru_cache(maxsize=None)
def pair_type(d: int, k: int) -> SubsetType:
    """Type of two vertices at distance k."""
    if k < 1:
        raise SubsetTypeError(f"Pair distance must be positive, got {k}")
    adjacency: Adjacency = {
        i: [j for j in (i - 1, i + 1) if 0 <= j <= k] for i in range(k + 1)
    }
    return type_from_tree(d, adjacency, [0, k])


@lru_cache(maxsize=None)
def flower_type(d: int, i: int) -> SubsetType:
    """Type of i neighbors of a fixed vertex."""
    if not 1 <= i <= d:
        raise SubsetTypeError(f"Flower size must lie in 1..{d}, got {i}")
    adjacency: Adjacency = {0: list(range(1, i + 1))}
    adjacency.update({j: [0] for j in range(1, i + 1)})
    return type_from_tree(d, adjacency, range(1, i + 1))


@lru_cache(maxsize=None)
def star_type(d: int) -> SubsetType:
    """A vertex together with its d neighbors."""
    return ball(vertex_type(d), 1)


@lru_cache(maxsize=None)
def sphere_type(d: int, k: int) -> SubsetType:
    """Type of S_k, the vertices at distance exactly k from a fixed vertex."""
    if k < 0:
        raise SubsetTypeError(f"Sphere radius must be nonnegative, got {k}")
    adjacency, levels = truncated_tree(d, k)
    return type_from_tree(d, adjacency, levels[k])


def _vertex_ball_size(d: int, k: int) -> int:
    return 1 + d * ((d - 1) ** k - 1) // (d - 2)


def _edge_ball_size(d: int, k: int) -> int:
    return 2 * ((d - 1) ** (k + 1) - 1) // (d - 2)


def describe_type(t: SubsetType) -> str:
    """Short name of a well-known type, or its size and upper-triangular distances."""
    n, d = t.n, t.d
    if n == 1:
        return "vertex"
    if n == 2:
        k = t.dist[0][1]
        return "edge" if k == 1 else f"pair_{k}"
    if t == path_type(d, n - 1):
        return f"P{n - 1}"
    if n == d + 1 and t == star_type(d):
        return "star"
    if n <= d and t == flower_type(d, n):
        return f"flower_{n}"
    k = 2
    while d * (d - 1) ** (k - 1) <= n:
        if d * (d - 1) ** (k - 1) == n and t == sphere_type(d, k):
            return f"S_{k}"
        k += 1
    k = 2
    while _vertex_ball_size(d, k) <= n:
        if _vertex_ball_size(d, k) == n and t == ball(vertex_type(d), k):
            return f"B_{k}(vertex)"
        k += 1
    k = 1
    while _edge_ball_size(d, k) <= n:
        if _edge_ball_size(d, k) == n and t == ball(edge_type(d), k):
            return f"B_{k}(edge)"
        k += 1
    upper = ",".join(str(t.dist[i][j]) for i in range(n) for j in range(i + 1, n))
    return f"V{n}[{upper}]"


@dataclass(frozen=True)
class EntropyInequality:
    """Assertion sum(coef * H(type)) >= 0 for every Aut(T_d)-factor of IID."""

    d: int
    terms: tuple[tuple[SubsetType, Fraction], ...]
    name: str = field(default="", compare=False)

    @classmethod
    def from_terms(
        cls,
        d: int,
        terms: Mapping[SubsetType, Fraction | int] | Iterable[tuple[SubsetType, Fraction | int]],
        name: str = "",
    ) -> "EntropyInequality":
        """Collect like terms exactly as given, dropping zero coefficients.

        Raises:
            InequalityError: If a term's type is for a different tree degree
        """
        items = terms.items() if isinstance(terms, Mapping) else terms
        collected: dict[SubsetType, Fraction] = {}
        for t, coef in items:
            if t.d != d:
                raise InequalityError(
                    f"Term of type {t.dist} is for T_{t.d}, inequality is for T_{d}"
                )
            collected[t] = collected.get(t, Fraction(0)) + Fraction(coef)
        kept = sorted(
            ((t, c) for t, c in collected.items() if c != 0), key=lambda tc: tc[0].sort_key
        )
        return cls(d, tuple(kept), name)

    @property
    def coefficients(self) -> dict[SubsetType, Fraction]:
        return dict(self.terms)

    @property
    def types(self) -> tuple[SubsetType, ...]:
        return tuple(t for t, _ in self.terms)

    def coefficient(self, t: SubsetType) -> Fraction:
        return self.coefficients.get(t, Fraction(0))

    def scaled(self, factor: Fraction | int) -> "EntropyInequality":
        return EntropyInequality.from_terms(
            self.d, [(t, c * factor) for t, c in self.terms], self.name
        )

    def normalized(self) -> "EntropyInequality":
        """Divide by gcd(numerators)/lcm(denominators), giving primitive integers."""
        if not self.terms:
            return self
        coefs = [c for _, c in self.terms]
        unit = Fraction(
            gcd(*(abs(c.numerator) for c in coefs)), lcm(*(c.denominator for c in coefs))
        )
        return self.scaled(1 / unit)

    def render(self) -> str:
        """Human form: the largest positive term alone on the left with coefficient 1."""
        if not self.terms:
            return "0 >= 0"
        by_size = sorted(self.terms, key=lambda tc: tc[0].sort_key, reverse=True)
        positive = [(t, c) for t, c in by_size if c > 0]
        negative = [(t, c) for t, c in by_size if c < 0]
        scale = positive[0][1] if positive else Fraction(1)
        lhs = [_render_term(t, c / scale) for t, c in positive] or ["0"]
        rhs = [_render_term(t, -c / scale) for t, c in negative] or ["0"]
        return f"{' + '.join(lhs)} >= {' + '.join(rhs)}"


def _render_term(t: SubsetType, coef: Fraction) -> str:
    return f"H({describe_type(t)})" if coef == 1 else f"{coef} H({describe_type(t)})"


def combine(
    ineqs: Sequence[tuple[EntropyInequality, Fraction | int]], name: str = ""
) -> EntropyInequality:
    """Nonnegative combination of inequalities, normalized.

    Raises:
        InequalityError: On an empty list, mixed tree degrees, or a negative scalar
    """
    if not ineqs:
        raise InequalityError("Nothing to combine")
    d = ineqs[0][0].d
    collected: dict[SubsetType, Fraction] = {}
    for position, (ineq, weight) in enumerate(ineqs):
        weight = Fraction(weight)
        if weight < 0:
            raise InequalityError(f"Scalar {weight} at position {position} is negative")
        if ineq.d != d:
            raise InequalityError(
                f"Inequality at position {position} is for T_{ineq.d}, expected T_{d}"
            )
        for t, c in ineq.terms:
            collected[t] = collected.get(t, Fraction(0)) + weight * c
    return EntropyInequality.from_terms(d, collected, name).normalized()
