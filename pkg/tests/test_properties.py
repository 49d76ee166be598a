"""Randomized property suites, 1000 cases each with fixed seeds."""

import itertools
import math

import networkx as nx
import numpy as np
import pytest

from treefiid.counting_oracle import matching_count
from treefiid.graph_core import (
    complete_graph,
    enumerate_nb_walks,
    two_vertex_multigraph,
    walk_distance,
)
from treefiid.lift_sim import Coloring, local_stats, random_lift
from treefiid.type_calculus import (
    ball,
    ball_size,
    truncated_tree,
    type_from_distances,
    type_from_tree,
    vertex_type,
)

CASES = 1000

pytestmark = pytest.mark.property


def random_subset(rng, vertices, max_size):
    size = int(rng.integers(1, max_size + 1))
    return [int(x) for x in rng.choice(vertices, size=size, replace=False)]


def relabel(adjacency, rng):
    """Isomorphic copy of a tree with shuffled ids and shuffled neighbor order."""
    old = list(adjacency)
    new = [int(x) for x in rng.permutation(len(old)) + 100]
    mapping = dict(zip(old, new, strict=True))
    relabeled = {}
    for x, ys in adjacency.items():
        neighbors = [mapping[y] for y in ys]
        rng.shuffle(neighbors)
        relabeled[mapping[x]] = neighbors
    return relabeled, mapping


def test_canonical_type_ignores_labels():
    """
    Test that the type of a marked set depends only on the set up to isomorphism:
    - Relabeling the tree and shuffling neighbor order gives the same type
    - Feeding the distance matrix in a random order gives the same type
    """
    rng = np.random.default_rng(2024)
    adjacency, levels = truncated_tree(3, 3)
    vertices = [x for level in levels for x in level]
    lengths = dict(nx.all_pairs_shortest_path_length(nx.Graph(adjacency)))
    for _ in range(CASES):
        marked = random_subset(rng, vertices, 5)
        t = type_from_tree(3, adjacency, marked)

        relabeled, mapping = relabel(adjacency, rng)
        assert type_from_tree(3, relabeled, [mapping[x] for x in marked]) == t

        order = [marked[i] for i in rng.permutation(len(marked))]
        dist = [[lengths[x][y] for y in order] for x in order]
        assert type_from_distances(3, dist) == t


def test_ball_radii_add():
    rng = np.random.default_rng(7)
    adjacency, levels = truncated_tree(3, 2)
    vertices = [x for level in levels for x in level]
    for _ in range(CASES):
        t = type_from_tree(3, adjacency, random_subset(rng, vertices, 3))
        a = int(rng.integers(0, 3))
        b = int(rng.integers(0, 4 - a))
        assert ball(ball(t, a), b) == ball(t, a + b)


@pytest.mark.parametrize("make_graph", [lambda: complete_graph(4), lambda: two_vertex_multigraph(3)])
def test_lift_statistics_are_consistent(make_graph):
    """
    Test that any coloring of any lift yields a consistent collection:
    - Edge marginals match the endpoint vertex laws exactly
    - Every law sums to one
    """
    g = make_graph()
    rng = np.random.default_rng(11)
    for case in range(CASES):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(2, 4))
        lift = random_lift(g, n, case)
        values = rng.integers(0, m, size=lift.vertex_count)
        stats = local_stats(lift, Coloring(lift, tuple(range(m)), values))
        stats.check_consistency(g)
        stats.to_collection().validate(g)


def tables(cu, cv):
    """All nonnegative integer tables with row sums cu and column sums cv."""
    m = len(cu)
    n = sum(cu)
    for block in itertools.product(range(n + 1), repeat=(m - 1) * (m - 1)):
        rows = [list(block[i * (m - 1) : (i + 1) * (m - 1)]) for i in range(m - 1)]
        for row, total in zip(rows, cu, strict=False):
            row.append(total - sum(row))
        last = [cv[j] - sum(row[j] for row in rows) for j in range(m)]
        rows.append(last)
        if all(x >= 0 for row in rows for x in row):
            yield rows


@pytest.mark.parametrize("m, max_n", [(2, 8), (3, 4)])
def test_matching_counts_cover_all_bijections(m, max_n):
    rng = np.random.default_rng(m)
    for _ in range(CASES):
        n = int(rng.integers(1, max_n + 1))
        cu = [int(x) for x in rng.multinomial(n, [1 / m] * m)]
        cv = [int(x) for x in rng.multinomial(n, [1 / m] * m)]
        total = sum(matching_count(cu, cv, k) for k in tables(cu, cv))
        assert total == math.factorial(n)


def test_ball_size_grows_and_is_bounded():
    rng = np.random.default_rng(5)
    adjacency, levels = truncated_tree(3, 2)
    vertices = [x for level in levels for x in level]
    vertex = vertex_type(3)
    for _ in range(CASES):
        t = type_from_tree(3, adjacency, random_subset(rng, vertices, 4))
        sizes = [ball_size(t, k) for k in range(5)]
        assert sizes[0] == t.n
        assert all(a < b for a, b in zip(sizes, sizes[1:], strict=False))
        assert all(size <= t.n * ball_size(vertex, k) for k, size in enumerate(sizes))


@pytest.mark.parametrize("make_graph", [lambda: complete_graph(4), lambda: two_vertex_multigraph(3)])
def test_walk_distance_is_a_metric(make_graph):
    """
    Test that walk_distance on walks from one vertex is a metric on endpoints:
    - Zero exactly when the walks are equal
    - Symmetric
    - Satisfies the triangle inequality
    """
    g = make_graph()
    walks = enumerate_nb_walks(g, 0, 3)
    rng = np.random.default_rng(13)
    for _ in range(CASES):
        a, b, c = (walks[int(i)] for i in rng.integers(0, len(walks), size=3))
        ab = walk_distance(g, a, b)
        assert walk_distance(g, a, a) == 0
        assert (ab == 0) == (a == b)
        assert walk_distance(g, b, a) == ab
        assert walk_distance(g, a, c) <= ab + walk_distance(g, b, c)
