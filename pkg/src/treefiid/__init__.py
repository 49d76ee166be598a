"""treefiid - entropy inequalities for factor-of-IID processes on regular trees."""

__version__ = "1.0.0"

from .exceptions import TreeFiidError  # noqa: E402

__all__ = ["TreeFiidError", "__version__"]
