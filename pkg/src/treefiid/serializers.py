"""Structured JSON and YAML documents for inequalities and simulation reports."""

import json
from abc import ABC, abstractmethod
from collections.abc import Mapping
from dataclasses import asdict
from fractions import Fraction
from typing import Any

import yaml

from treefiid.exceptions import FormatError
from treefiid.lift_sim import SimulationReport
from treefiid.type_calculus import EntropyInequality, describe_type, type_from_distances


def inequality_to_dict(inequality: EntropyInequality) -> dict[str, Any]:
    """Plain-data view of an inequality; coefficients stay exact as strings."""
    return {
        "name": inequality.name,
        "d": inequality.d,
        "rendered": inequality.render(),
        "terms": [
            {
                "type": describe_type(t),
                "coefficient": str(coef),
                "size": t.n,
                "distances": [list(row) for row in t.dist],
            }
            for t, coef in inequality.terms
        ],
    }


def report_to_dict(report: SimulationReport) -> dict[str, Any]:
    data = asdict(report)
    data["terms"] = [{**term, "coefficient": str(term["coefficient"])} for term in data["terms"]]
    data["slacks"] = list(data["slacks"])
    return data


class Serializer(ABC):
    """Abstract base class for document serializers."""

    @abstractmethod
    def serialize(self, data: Any) -> str:
        """Serialize plain data to a string."""

    @abstractmethod
    def deserialize(self, content: str) -> Any:
        """Parse a string produced by serialize."""


class YAMLSerializer(Serializer):
    """YAML serializer."""

    def serialize(self, data: Any) -> str:
        """
        Serialize plain data to YAML.

        Args:
            data: Dictionaries, lists and scalars

        Returns:
            Block-style YAML with keys in insertion order
        """
        return yaml.dump(data, default_flow_style=False, sort_keys=False, allow_unicode=True)

    def deserialize(self, content: str) -> Any:
        return yaml.safe_load(content)


class JSONSerializer(Serializer):
    """JSON serializer."""

    def serialize(self, data: Any) -> str:
        return json.dumps(data, indent=2)

    def deserialize(self, content: str) -> Any:
        return json.loads(content)


SERIALIZERS: dict[str, type[Serializer]] = {
    "json": JSONSerializer,
    "yaml": YAMLSerializer,
}


def get_serializer(format: str) -> Serializer:
    """Structured report serializer for a --format value.

    Raises:
        FormatError: If no serializer handles the format
    """
    try:
        return SERIALIZERS[format.lower()]()
    except KeyError:
        raise FormatError(
            f"Unsupported report format '{format}'. Use one of: {', '.join(SERIALIZERS)}"
        ) from None


def inequality_from_dict(data: Mapping[str, Any]) -> EntropyInequality:
    """Rebuild an inequality from inequality_to_dict output; types come from the distances.

    Raises:
        FormatError: If a field is missing or malformed
    """
    try:
        d = int(data["d"])
        terms = [
            (type_from_distances(d, term["distances"]), Fraction(term["coefficient"]))
            for term in data["terms"]
        ]
        name = str(data.get("name") or "")
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise FormatError(f"Malformed inequality document: {e!r}") from e
    return EntropyInequality.from_terms(d, terms, name)


def load_inequality_document(content: str, format: str) -> list[EntropyInequality]:
    """Parse a JSON or YAML document holding one inequality or a list of them.

    Leading `#` lines, such as the header written by the command line, are skipped.
    """
    lines = content.splitlines()
    while lines and lines[0].startswith("#"):
        lines.pop(0)
    try:
        document = get_serializer(format).deserialize("\n".join(lines))
    except (ValueError, yaml.YAMLError) as e:
        raise FormatError(f"Cannot parse {format} document: {e}") from e
    items = document if isinstance(document, list) else [document]
    if not items or not all(isinstance(item, Mapping) for item in items):
        raise FormatError(f"Expected {format} mappings of inequalities")
    return [inequality_from_dict(item) for item in items]
