"""Line-oriented text formats for graphs, inequalities, collections and chains.

Blank lines and lines starting with '#' are ignored everywhere. Fields are
separated by whitespace; the writers emit tabs.

Graph:
    v <id>
    e <id> <u> <v>
    walk <vertex> <edge id> ...

Inequality (one or more blocks):
    ineq d=<d> name=<name>
    term <coefficient> <n> <upper-triangle distances, row by row>

Collection:
    states <s1> ... <sm>
    v <id> <m masses>
    e <id> <m*m masses, row-major; rows are the u end>

Chain:
    states <s1> ... <sm>        (optional)
    <m rows of m transition probabilities>
    pi <m masses>               (optional)
"""

import logging
import math
from collections.abc import Iterator, Sequence
from fractions import Fraction

import numpy as np

from treefiid.counting_oracle import ConsistentCollection
from treefiid.exceptions import FormatError, TreeFiidError
from treefiid.graph_core import BaseGraph, Edge, WalkAssignment, validate_graph
from treefiid.markov import MarkovChain
from treefiid.type_calculus import EntropyInequality, SubsetType, type_from_distances

logger = logging.getLogger(__name__)


def _lines(text: str) -> Iterator[tuple[int, list[str]]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield number, line.split()


def _int(token: str, number: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise FormatError(f"Line {number}: expected an integer, got '{token}'") from None


def _fraction(token: str, number: int) -> Fraction:
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise FormatError(f"Line {number}: '{token}' is not an exact rational mass") from None


def _float(token: str, number: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FormatError(f"Line {number}: expected a number, got '{token}'") from None
    if not math.isfinite(value):
        raise FormatError(f"Line {number}: non-finite value '{token}'")
    return value


def parse_graph(text: str) -> tuple[BaseGraph, WalkAssignment | None]:
    """Parse a graph file; walks are returned only if the file lists any.

    Raises:
        FormatError: On a malformed line
        GraphError: If the graph or its walks are invalid
    """
    vertices: list[int] = []
    edges: list[Edge] = []
    walks: dict[int, list[tuple[int, ...]]] = {}
    for number, fields in _lines(text):
        kind = fields[0]
        if kind == "v" and len(fields) == 2:
            vertices.append(_int(fields[1], number))
        elif kind == "e" and len(fields) == 4:
            eid, u, v = (_int(x, number) for x in fields[1:])
            edges.append(Edge(eid, u, v))
        elif kind == "walk" and len(fields) >= 2:
            start = _int(fields[1], number)
            walks.setdefault(start, []).append(tuple(_int(x, number) for x in fields[2:]))
        else:
            raise FormatError(f"Line {number}: cannot parse '{' '.join(fields)}'")
    if not vertices:
        vertices = sorted({x for e in edges for x in (e.u, e.v)})
    g = BaseGraph(tuple(vertices), tuple(sorted(edges, key=lambda e: e.id)))
    validate_graph(g)
    if not walks:
        return g, None
    return g, WalkAssignment.from_steps(g, walks)


def render_graph(g: BaseGraph, walks: WalkAssignment | None = None) -> str:
    lines = [f"v\t{v}" for v in g.vertices]
    lines += [f"e\t{e.id}\t{e.u}\t{e.v}" for e in g.edges]
    if walks is not None:
        for v in g.vertices:
            for w in walks[v]:
                lines.append("\t".join(["walk", str(v), *map(str, w.steps)]))
    return "\n".join(lines) + "\n"


def _type_fields(t: SubsetType) -> list[str]:
    upper = [str(t.dist[i][j]) for i in range(t.n) for j in range(i + 1, t.n)]
    return [str(t.n), *upper]


def render_inequality(inequality: EntropyInequality) -> str:
    lines = [f"ineq\td={inequality.d}\tname={inequality.name}"]
    for t, coef in inequality.terms:
        lines.append("\t".join(["term", str(coef), *_type_fields(t)]))
    return "\n".join(lines) + "\n"


def _parse_term(d: int, fields: Sequence[str], number: int) -> tuple[SubsetType, Fraction]:
    if len(fields) < 3:
        raise FormatError(f"Line {number}: a term needs a coefficient and a size")
    coef = _fraction(fields[1], number)
    n = _int(fields[2], number)
    upper = [_int(x, number) for x in fields[3:]]
    if n < 1 or len(upper) != n * (n - 1) // 2:
        raise FormatError(
            f"Line {number}: size {n} needs {max(n * (n - 1) // 2, 0)} distances, "
            f"got {len(upper)}"
        )
    dist = [[0] * n for _ in range(n)]
    values = iter(upper)
    for i in range(n):
        for j in range(i + 1, n):
            dist[i][j] = dist[j][i] = next(values)
    try:
        return type_from_distances(d, dist), coef
    except TreeFiidError as e:
        raise FormatError(f"Line {number}: {e}") from e


def parse_inequalities(text: str) -> list[EntropyInequality]:
    """Parse every inequality block in the text.

    Raises:
        FormatError: On a malformed header or term line
    """
    blocks: list[tuple[int, str, list[tuple[SubsetType, Fraction]]]] = []
    for number, fields in _lines(text):
        if fields[0] == "ineq":
            header = dict(f.split("=", 1) for f in fields[1:2] if "=" in f)
            if "d" not in header:
                raise FormatError(f"Line {number}: header needs d=<degree>")
            rest = " ".join(fields[2:])
            name = rest[len("name=") :] if rest.startswith("name=") else ""
            blocks.append((_int(header["d"], number), name, []))
        elif fields[0] == "term":
            if not blocks:
                raise FormatError(f"Line {number}: term before any 'ineq' header")
            d, _, terms = blocks[-1]
            terms.append(_parse_term(d, fields, number))
        else:
            raise FormatError(f"Line {number}: cannot parse '{' '.join(fields)}'")
    if not blocks:
        raise FormatError("No inequality found")
    return [EntropyInequality.from_terms(d, terms, name) for d, name, terms in blocks]


def parse_collection(text: str) -> ConsistentCollection:
    """Parse a collection TSV; masses must be exact rationals.

    Raises:
        FormatError: On a malformed line, a wrong mass count, or a repeated id
    """
    states: tuple[str, ...] | None = None
    vertex: dict[int, tuple[Fraction, ...]] = {}
    edge: dict[int, tuple[tuple[Fraction, ...], ...]] = {}
    for number, fields in _lines(text):
        kind = fields[0]
        if kind == "states":
            states = tuple(fields[1:])
            continue
        if states is None:
            raise FormatError(f"Line {number}: the 'states' row must come first")
        m = len(states)
        if kind not in ("v", "e") or len(fields) < 2:
            raise FormatError(f"Line {number}: cannot parse '{' '.join(fields)}'")
        key = _int(fields[1], number)
        masses = tuple(_fraction(x, number) for x in fields[2:])
        expected = m if kind == "v" else m * m
        if len(masses) != expected:
            raise FormatError(f"Line {number}: expected {expected} masses, got {len(masses)}")
        table = vertex if kind == "v" else edge
        if key in table:
            raise FormatError(f"Line {number}: repeated {kind} {key}")
        if kind == "v":
            vertex[key] = masses
        else:
            edge[key] = tuple(masses[a * m : (a + 1) * m] for a in range(m))
    if states is None:
        raise FormatError("Collection has no 'states' row")
    return ConsistentCollection(states, vertex, edge)


def render_collection(mu: ConsistentCollection) -> str:
    lines = ["\t".join(["states", *mu.states])]
    for v, masses in sorted(mu.vertex.items()):
        lines.append("\t".join(["v", str(v), *map(str, masses)]))
    for eid, table in sorted(mu.edge.items()):
        lines.append("\t".join(["e", str(eid), *(str(x) for row in table for x in row)]))
    return "\n".join(lines) + "\n"


def parse_chain(text: str) -> MarkovChain:
    """Parse a chain TSV: an optional states row, the matrix, an optional pi row.

    Raises:
        FormatError: On a malformed line
        MarkovChainError: If the matrix is not a valid reversible chain
    """
    states: list[str] | None = None
    rows: list[list[float]] = []
    pi: list[float] | None = None
    for number, fields in _lines(text):
        if fields[0] == "states":
            states = fields[1:]
        elif fields[0] == "pi":
            pi = [_float(x, number) for x in fields[1:]]
        else:
            rows.append([_float(x, number) for x in fields])
    if not rows:
        raise FormatError("Chain file has no transition rows")
    if any(len(row) != len(rows) for row in rows):
        raise FormatError(f"Transition matrix must be {len(rows)} x {len(rows)}")
    return MarkovChain.from_matrix(np.array(rows), pi, states)


def render_chain(mc: MarkovChain) -> str:
    lines = ["\t".join(["states", *map(str, mc.states)])]
    lines += ["\t".join(repr(float(x)) for x in row) for row in mc.p]
    lines.append("\t".join(["pi", *(repr(float(x)) for x in mc.pi)]))
    return "\n".join(lines) + "\n"
