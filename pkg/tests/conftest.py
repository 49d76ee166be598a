from fractions import Fraction
from pathlib import Path

import pytest
from click.testing import CliRunner

from treefiid.counting_oracle import product_collection
from treefiid.formats import render_collection, render_graph
from treefiid.graph_core import BaseGraph, complete_graph, two_vertex_multigraph
from treefiid.lift_sim import random_lift
from treefiid.markov import binary_symmetric

"""
  Test Fixtures for treefiid

  Fixture Hierarchy:
  ------------------
  1. k4 / two_vertex / path3 - small base graphs
  2. k4_lift - a seeded 2000-fold lift of K_4
  3. uniform_k4 - uniform binary product collection on K_4
  4. write_file - writes text into tmp_path and returns the path
  5. k4_file / uniform_k4_file - the above rendered into files for CLI tests
Notes:
  - Every randomized fixture uses a fixed seed so failures reproduce.
  """

HALF = Fraction(1, 2)


@pytest.fixture
def k4() -> BaseGraph:
    """The complete graph on 4 vertices, the smallest simple 3-regular base."""
    return complete_graph(4)


@pytest.fixture
def two_vertex() -> BaseGraph:
    """Two vertices joined by three parallel edges."""
    return two_vertex_multigraph(3)


@pytest.fixture
def path3() -> BaseGraph:
    """The path 0 - 1 - 2."""
    return BaseGraph.from_edges([(0, 0, 1), (1, 1, 2)])


@pytest.fixture
def k4_lift(k4):
    return random_lift(k4, 2000, seed=7)


@pytest.fixture
def uniform_k4(k4):
    return product_collection(k4, ("0", "1"), (HALF, HALF))


@pytest.fixture
def half_chain():
    """Binary symmetric chain with flip probability 1/2 (independent states)."""
    return binary_symmetric(0.5)


@pytest.fixture
def write_file(tmp_path):
    """Return a helper that writes text into tmp_path."""

    def write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text)
        return path

    return write


@pytest.fixture
def k4_file(write_file, k4):
    return write_file("k4.txt", render_graph(k4))


@pytest.fixture
def uniform_k4_file(write_file, uniform_k4):
    return write_file("uniform2.tsv", render_collection(uniform_k4))


# CLI Testing Fixtures


@pytest.fixture
def cli_runner():
    """Return a CliRunner instance for CLI testing."""
    return CliRunner()
