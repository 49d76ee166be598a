"""Custom exceptions for treefiid."""


class TreeFiidError(Exception):
    """Base exception for treefiid errors."""

    pass


class GraphError(TreeFiidError):
    """A base graph, walk or walk assignment violates its invariants."""

    pass


class SubsetTypeError(TreeFiidError):
    """A distance matrix is not a realizable tree metric."""

    pass


class InequalityError(TreeFiidError):
    """An entropy inequality cannot be built, combined or evaluated."""

    pass


class DerivationError(TreeFiidError):
    """A construction is unknown, out of range, or disagrees with its closed form."""

    pass


class SimulationError(TreeFiidError):
    """A lift simulation could not produce the requested statistics."""

    pass


class MarkovChainError(TreeFiidError):
    """A transition matrix is invalid, or an exact computation is infeasible."""

    pass


class OracleError(TreeFiidError):
    """A consistent collection is invalid, or a brute-force guard was exceeded."""

    pass


class FormatError(TreeFiidError):
    """An input file does not follow one of the text formats."""

    pass
