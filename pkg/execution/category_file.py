"""
Category file codec.

A category file is a JSON document:

    {
      "format": "flowcat/1",
      "metadata": {...},
      "category": {"name", "mod2_mode", "objects", "moduli0", "moduli1"},
      "comparison": {"target", "mixed0", "mixed1"?}      (optional)
    }

format_document writes it with two-space indentation, canonical key order
and a trailing newline, so parse followed by format is the identity on any
file this module wrote.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional
import json
import logging

from execution.errors import FlowToolsError
from execution.models.flow_data import ComparisonData, FlowCategory

logger = logging.getLogger(__name__)

FORMAT_TAG = "flowcat/1"
SIGN_CONVENTION = (
    "orbit sign = orientation of [flow direction, E_u(target)] against E_u(source); "
    "stable manifolds co-oriented by E_u"
)


class ParseError(FlowToolsError):
    """Raised when a category file is not valid JSON or does not match the schema."""

    exit_code = 2


@dataclass
class CategoryDocument:
    category: FlowCategory
    comparison: Optional[ComparisonData] = None
    metadata: Dict[str, Any] = field(default_factory=dict)


def parse(text: str) -> CategoryDocument:
    """
    Parse a category file.

    An empty or whitespace-only body is the empty category.

    Raises:
        ParseError: On invalid JSON, a wrong format tag or malformed tables.
    """
    if not text.strip():
        return CategoryDocument(FlowCategory())
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(data, dict):
        raise ParseError("Top level of a category file must be an object")
    tag = data.get('format', FORMAT_TAG)
    if tag != FORMAT_TAG:
        raise ParseError(f"Unsupported format {tag!r}, expected {FORMAT_TAG!r}")
    unknown = set(data) - {'format', 'metadata', 'category', 'comparison'}
    if unknown:
        raise ParseError(f"Unknown top-level keys: {sorted(unknown)}")

    try:
        category = FlowCategory.from_dict(data.get('category', {}))
        comparison = None
        if data.get('comparison') is not None:
            comparison = ComparisonData.from_dict(category, data['comparison'])
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ParseError(f"Malformed category data: {type(e).__name__}: {e}")

    metadata = data.get('metadata', {})
    if not isinstance(metadata, dict):
        raise ParseError("metadata must be an object")
    logger.debug(f"Parsed category {category.name!r} with {len(category.objects)} objects")
    return CategoryDocument(category, comparison, metadata)


def to_document(document: CategoryDocument) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        'format': FORMAT_TAG,
        'metadata': document.metadata,
        'category': document.category.to_dict(),
    }
    if document.comparison is not None:
        data['comparison'] = document.comparison.to_dict()
    return data


def format_document(document: CategoryDocument) -> str:
    return json.dumps(to_document(document), indent=2, ensure_ascii=False) + "\n"


def read_file(path: str) -> CategoryDocument:
    """
    Raises:
        ParseError: If the file cannot be read or parsed.
    """
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            text = handle.read()
    except OSError as e:
        raise ParseError(f"Cannot read {path}: {e}")
    return parse(text)


def write_file(path: str, document: CategoryDocument) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(format_document(document))
    logger.info(f"Wrote {path}")


def generation_metadata(surface_description: Dict[str, Any], config: Dict[str, Any],
                        critical_points=()) -> Dict[str, Any]:
    """Metadata block written by the generator."""
    return {
        'producer': 'flowcat generate',
        'sign_convention': SIGN_CONVENTION,
        'surface': surface_description,
        'tolerances': {k: config[k] for k in (
            'tol_crit', 'tol_nondeg', 'delta_arrive', 'tol_merge', 'bisection_depth', 'max_steps'
        ) if k in config},
        'seed': config.get('seed', 0),
        'critical_points': [p.to_dict() for p in critical_points],
    }
