"""Exact entropies of reversible Markov chains indexed by the d-regular tree.

The tree-indexed chain draws the root from the stationary law pi and moves
along every edge with the transition matrix p. Reversibility makes the
resulting process invariant under every automorphism of the tree, so the
entropy of a marked set depends only on its subset type.
"""

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.optimize import bisect
from scipy.stats import entropy as shannon_entropy

from treefiid.configuration import (
    ENTROPY_AGREEMENT_TOLERANCE,
    EXACT_ENUMERATION_GUARD,
    ROW_SUM_TOLERANCE,
    SCAN_GRID_POINTS,
    SPECTRAL_SLACK,
    STATIONARY_TOLERANCE,
)
from treefiid.exceptions import MarkovChainError
from treefiid.type_calculus import EntropyInequality, SubsetType, describe_type

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """A reversible transition matrix with its stationary law."""

    states: tuple[Any, ...]
    p: np.ndarray
    pi: np.ndarray

    def __post_init__(self) -> None:
        self.validate()

    @classmethod
    def from_matrix(
        cls,
        p: Sequence[Sequence[float]] | np.ndarray,
        pi: Sequence[float] | np.ndarray | None = None,
        states: Sequence[Any] | None = None,
    ) -> "MarkovChain":
        """Build a chain, computing pi from the left Perron eigenvector when omitted.

        Raises:
            MarkovChainError: If the matrix is not a valid reversible chain
        """
        matrix = np.asarray(p, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.size == 0:
            raise MarkovChainError(f"Transition matrix must be square, got shape {matrix.shape}")
        if pi is None:
            values, vectors = np.linalg.eig(matrix.T)
            vector = np.real(vectors[:, int(np.argmin(np.abs(values - 1.0)))])
            stationary = np.clip(vector / vector.sum(), 0.0, None)
            stationary = stationary / stationary.sum()
        else:
            stationary = np.asarray(pi, dtype=float)
        labels = tuple(range(len(matrix))) if states is None else tuple(states)
        return cls(labels, matrix, stationary)

    @property
    def size(self) -> int:
        return len(self.states)

    def validate(self) -> None:
        """Check stochasticity, stationarity and detailed balance.

        Raises:
            MarkovChainError: Naming the offending row or state pair
        """
        p, pi = self.p, self.pi
        m = len(self.states)
        if p.shape != (m, m):
            raise MarkovChainError(f"Transition matrix has shape {p.shape}, expected ({m}, {m})")
        if pi.shape != (m,):
            raise MarkovChainError(f"Stationary vector has {pi.size} entries, expected {m}")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(pi))):
            raise MarkovChainError("Chain contains non-finite entries")
        if np.any(p < 0):
            i, j = np.argwhere(p < 0)[0]
            raise MarkovChainError(f"Negative transition probability p[{i},{j}] = {p[i, j]}")
        if np.any(pi < 0):
            raise MarkovChainError(f"Negative stationary mass at state {int(np.argmin(pi))}")
        rows = np.abs(p.sum(axis=1) - 1.0)
        if np.any(rows > ROW_SUM_TOLERANCE):
            i = int(np.argmax(rows))
            raise MarkovChainError(f"Row {i} sums to {p[i].sum()!r}, not 1")
        if abs(pi.sum() - 1.0) > STATIONARY_TOLERANCE:
            raise MarkovChainError(f"Stationary vector sums to {pi.sum()!r}, not 1")
        drift = np.abs(pi @ p - pi)
        if np.any(drift > STATIONARY_TOLERANCE):
            raise MarkovChainError(
                f"pi is not stationary: (pi p)[{int(np.argmax(drift))}] differs by {drift.max():.3g}"
            )
        flux = pi[:, None] * p
        imbalance = np.abs(flux - flux.T)
        if np.any(imbalance > STATIONARY_TOLERANCE):
            i, j = np.unravel_index(int(np.argmax(imbalance)), imbalance.shape)
            raise MarkovChainError(
                f"Chain is not reversible: pi_i p_ij != pi_j p_ji for states "
                f"({self.states[i]}, {self.states[j]})"
            )

    def joint(self) -> np.ndarray:
        """Law of the endpoint pair of an edge."""
        return self.pi[:, None] * self.p


ChainFamily = Callable[[float], MarkovChain]


def binary_symmetric(eps: float) -> MarkovChain:
    """Two states, flipping with probability eps along every edge."""
    if not 0.0 <= eps <= 1.0:
        raise MarkovChainError(f"Flip probability must lie in [0, 1], got {eps}")
    return MarkovChain((0, 1), np.array([[1 - eps, eps], [eps, 1 - eps]]), np.array([0.5, 0.5]))


def potts(q: int) -> ChainFamily:
    """Symmetric q-state family: leave the state with total probability eps."""
    if q < 2:
        raise MarkovChainError(f"Potts family needs q >= 2, got {q}")

    def chain(eps: float) -> MarkovChain:
        if not 0.0 <= eps <= 1.0:
            raise MarkovChainError(f"Flip probability must lie in [0, 1], got {eps}")
        p = np.full((q, q), eps / (q - 1))
        np.fill_diagonal(p, 1 - eps)
        return MarkovChain(tuple(range(q)), p, np.full(q, 1 / q))

    return chain


FAMILIES = ("binary-symmetric", "potts")


def get_family(name: str, q: int = 3) -> ChainFamily:
    """Look up a one-parameter family by its CLI name."""
    if name == "binary-symmetric":
        return binary_symmetric
    if name == "potts":
        return potts(q)
    raise MarkovChainError(f"Unknown chain family '{name}'. Use one of: {', '.join(FAMILIES)}")


def vertex_entropy(mc: MarkovChain) -> float:
    return float(shannon_entropy(mc.pi))


def edge_entropy(mc: MarkovChain) -> float:
    return float(shannon_entropy(mc.joint().ravel()))


def connected_set_entropy(mc: MarkovChain, t: SubsetType) -> float:
    """(n-1) H(edge) - (n-2) H(vertex) for a connected marked set.

    Raises:
        MarkovChainError: If t has unmarked Steiner vertices
    """
    if not t.is_connected:
        raise MarkovChainError(f"Type {describe_type(t)} is not a connected set")
    return (t.n - 1) * edge_entropy(mc) - (t.n - 2) * vertex_entropy(mc)


def joint_law(mc: MarkovChain, t: SubsetType) -> np.ndarray:
    """Joint law of the states on the marked vertices of t, one axis per marked point.

    Raises:
        MarkovChainError: If |M|^n exceeds the enumeration guard
    """
    m = mc.size
    if m**t.n > EXACT_ENUMERATION_GUARD:
        raise MarkovChainError(
            f"Exact entropy of {describe_type(t)} needs {m}^{t.n} states, "
            f"above the guard {EXACT_ENUMERATION_GUARD}"
        )
    tree = t.steiner
    axis_of = {node: k for k, node in enumerate(tree.marked)}

    def message(x: int, parent: int | None) -> tuple[np.ndarray, list[int]]:
        # axis 0 is the state at x, then one axis per marked vertex below x
        if x in axis_of:
            table, order = np.eye(m), [x]
        else:
            table, order = np.ones(m), []
        for y in tree.adjacency[x]:
            if y == parent:
                continue
            child, child_order = message(y, x)
            pushed = np.tensordot(mc.p, child, axes=(1, 0))
            table = table.reshape(m, -1)[:, :, None] * pushed.reshape(m, -1)[:, None, :]
            order += child_order
            table = table.reshape((m,) * (1 + len(order)))
        return table, order

    root = tree.marked[0]
    table, order = message(root, None)
    joint = np.tensordot(mc.pi, table, axes=(0, 0))
    return np.transpose(joint, [order.index(node) for node in tree.marked])


def exact_subset_entropy(mc: MarkovChain, t: SubsetType) -> float:
    """Shannon entropy (nats) of the chain on the marked set of t, by tree sum-product."""
    return float(shannon_entropy(joint_law(mc, t).ravel()))


def type_entropy(mc: MarkovChain, t: SubsetType) -> float:
    """Closed form on connected sets, exact enumeration otherwise."""
    if t.is_connected:
        return connected_set_entropy(mc, t)
    return exact_subset_entropy(mc, t)


def check(mc: MarkovChain, inequality: EntropyInequality) -> float:
    """Slack of the inequality on the chain; negative means not a factor of IID."""
    return sum(float(c) * type_entropy(mc, t) for t, c in inequality.terms)


def _zeros(f: Callable[[float], float], lo: float, hi: float, tol: float) -> list[float]:
    if not lo < hi:
        raise MarkovChainError(f"Empty scan interval [{lo}, {hi}]")
    if tol <= 0:
        raise MarkovChainError(f"Tolerance must be positive, got {tol}")
    grid = np.linspace(lo, hi, SCAN_GRID_POINTS)
    values = [f(float(x)) for x in grid]
    zeros: list[float] = []
    for k in range(len(grid) - 1):
        a, b = float(grid[k]), float(grid[k + 1])
        if values[k] == 0.0:
            zeros.append(a)
        elif values[k] * values[k + 1] < 0:
            zeros.append(float(bisect(f, a, b, xtol=tol)))
    if values[-1] == 0.0:
        zeros.append(float(grid[-1]))
    return zeros


def scan_regime(
    family: ChainFamily, inequality: EntropyInequality, lo: float, hi: float, tol: float
) -> list[float]:
    """Parameters in [lo, hi] where the slack changes sign, located by bisection.

    Raises:
        MarkovChainError: If the slack keeps one sign on the scan grid
    """
    zeros = _zeros(lambda x: check(family(x), inequality), lo, hi, tol)
    if not zeros:
        raise MarkovChainError(
            f"No sign change of the {inequality.name or 'inequality'} slack on [{lo}, {hi}]"
        )
    logger.info("Slack of %s changes sign at %s", inequality.name, zeros)
    return zeros


def admissible_intervals(
    family: ChainFamily, inequality: EntropyInequality, lo: float, hi: float, tol: float
) -> list[tuple[float, float]]:
    """Maximal subintervals of [lo, hi] on which the slack is nonnegative.

    The sign between two consecutive zeros is read at their midpoint, so a
    component narrower than the scan grid spacing can be missed.
    """
    def f(x: float) -> float:
        return check(family(x), inequality)

    cuts = [lo, *_zeros(f, lo, hi, tol), hi]
    intervals: list[tuple[float, float]] = []
    for a, b in zip(cuts, cuts[1:], strict=False):
        if b <= a or f((a + b) / 2) < 0:
            continue
        if intervals and intervals[-1][1] == a:
            intervals[-1] = (intervals[-1][0], b)
        else:
            intervals.append((a, b))
    return intervals


def admissible_interval(
    family: ChainFamily, inequality: EntropyInequality, lo: float, hi: float, tol: float
) -> tuple[float, float]:
    """The admissible parameters in [lo, hi], when they form one interval.

    Raises:
        MarkovChainError: If the slack is negative throughout, or the admissible
            set splits into several intervals
    """
    intervals = admissible_intervals(family, inequality, lo, hi, tol)
    if not intervals:
        raise MarkovChainError(f"Slack is negative throughout [{lo}, {hi}]")
    if len(intervals) > 1:
        raise MarkovChainError(
            f"Admissible set of {inequality.name or 'the inequality'} splits into "
            f"{len(intervals)} intervals on [{lo}, {hi}]"
        )
    return intervals[0]


def implies(
    stronger: EntropyInequality,
    weaker: EntropyInequality,
    chains: Iterable[MarkovChain],
) -> bool:
    """Whether every chain satisfying `stronger` also satisfies `weaker`.

    A numeric spot check over the given chains, not a proof. Slacks within
    ENTROPY_AGREEMENT_TOLERANCE of zero count as satisfied.
    """
    for mc in chains:
        if check(mc, stronger) < -ENTROPY_AGREEMENT_TOLERANCE:
            continue
        slack = check(mc, weaker)
        if slack < -ENTROPY_AGREEMENT_TOLERANCE:
            logger.info(
                "%s holds but %s fails (slack %.3g) on p=%s",
                stronger.name, weaker.name, slack, mc.p.tolist(),
            )
            return False
    return True


def spectral_bound(mc: MarkovChain, d: int) -> tuple[float, bool]:
    """Second largest absolute eigenvalue, and whether it is at most 1/sqrt(d-1)."""
    magnitudes = np.sort(np.abs(np.linalg.eigvals(mc.p)))[::-1]
    rho = float(magnitudes[1]) if len(magnitudes) > 1 else 0.0
    return rho, rho <= 1 / math.sqrt(d - 1) + SPECTRAL_SLACK


def spectral_thresholds(
    family: ChainFamily, d: int, lo: float, hi: float, tol: float
) -> list[float]:
    """Parameters where the spectral test switches between pass and fail."""
    bound = 1 / math.sqrt(d - 1)
    return _zeros(lambda x: bound - spectral_bound(family(x), d)[0], lo, hi, tol)


def nats_to_bits(value: float) -> float:
    return value / math.log(2)


def binary_entropy_bits(eps: float) -> float:
    if eps in (0.0, 1.0):
        return 0.0
    return float(shannon_entropy([eps, 1 - eps], base=2))
