#!/usr/bin/env python3
"""
CW Realization

Turns a flow category into the cell data of the realized spectrum: one cell
per object, suspended so every cell has non-negative dimension, with
attaching degrees read off the signed counts. Also reports the filtration
subquotients and exports the cell structure as text and DOT.

Usage:
    from execution.realize import realize, cellular_complex

    cw = realize(category)            # default shift L = p − q
    complex_ = cellular_complex(cw)
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple
import logging

from execution.errors import FlowToolsError
from execution.exact_linalg import ChainComplex, IntMatrix
from execution.flowcat import count_matrix, require_valid
from execution.models.flow_data import FlowCategory
from execution.models.report import Report

logger = logging.getLogger(__name__)


class ShiftTooSmall(FlowToolsError):
    """Raised when the suspension shift L is below p − q."""

    exit_code = 4


@dataclass(frozen=True)
class Cell:
    """Cell of the realization; cone_depth is the cube dimension μ − q carried by the cell."""

    object_id: str
    index: int
    dimension: int
    cone_depth: int
    suspension: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'object': self.object_id,
            'index': self.index,
            'dimension': self.dimension,
            'cone_depth': self.cone_depth,
            'suspension': self.suspension,
        }


@dataclass(frozen=True)
class CWData:
    """Cells ordered by (index, id) plus attaching degrees for adjacent cells."""

    cells: Tuple[Cell, ...] = ()
    attaching_degrees: Dict[Tuple[str, str], int] = field(default_factory=dict)
    shift: int = 0
    base_index: int = 0
    name: str = ""

    def cell(self, object_id: str) -> Cell:
        for cell in self.cells:
            if cell.object_id == object_id:
                return cell
        raise KeyError(object_id)

    def dimensions(self) -> List[int]:
        return sorted({c.dimension for c in self.cells})

    def cells_of_dimension(self, dimension: int) -> List[Cell]:
        return [c for c in self.cells if c.dimension == dimension]


def realize(category: FlowCategory, shift: Optional[int] = None) -> CWData:
    """
    Build the CW data for a category with indices in [q, p].

    A cell for object x has dimension μ(x) + (L − q). The shift defaults to
    p − q.

    Raises:
        InvalidCategory: If the category fails validation.
        ShiftTooSmall: If shift < p − q.
    """
    require_valid(category)
    indices = category.indices()
    if not indices:
        return CWData(shift=shift or 0, name=category.name)
    q, p = indices[0], indices[-1]
    if shift is None:
        shift = p - q
    if shift < p - q:
        raise ShiftTooSmall(f"Shift L={shift} is below p − q = {p - q}")

    cells = tuple(
        Cell(
            object_id=obj.id,
            index=obj.index,
            dimension=obj.index + shift - q,
            cone_depth=obj.index - q,
            suspension=shift - obj.index,
        )
        for obj in category.objects
    )
    degrees = {}
    for m in indices:
        if m - 1 < q:
            continue
        matrix = count_matrix(category, m)
        for j, a in enumerate(category.objects_at(m)):
            for i, b in enumerate(category.objects_at(m - 1)):
                degrees[(a.id, b.id)] = matrix[i, j]
    logger.info(f"Realized {len(cells)} cells with shift L={shift}, base q={q}")
    return CWData(cells, degrees, shift, q, category.name)


def cellular_complex(cw: CWData) -> ChainComplex:
    """Cellular chain complex: one generator per cell, ∂ from attaching degrees."""
    if not cw.cells:
        return ChainComplex()
    dims = cw.dimensions()
    generators = {d: tuple(c.object_id for c in cw.cells_of_dimension(d)) for d in range(dims[0], dims[-1] + 1)}
    ranks = {d: len(g) for d, g in generators.items()}
    boundaries = {}
    for d in range(dims[0] + 1, dims[-1] + 1):
        rows, cols = generators[d - 1], generators[d]
        boundaries[d] = IntMatrix(len(rows), len(cols), tuple(
            tuple(cw.attaching_degrees.get((a, b), 0) for a in cols) for b in rows
        ))
    return ChainComplex(ranks, boundaries, generators)


@dataclass(frozen=True)
class FiltrationLevel:
    """Subquotient |Z|^(m)/|Z|^(m−1): a wedge of spheres of one dimension."""

    level: int
    objects: Tuple[str, ...]
    sphere_dimension: int
    suspension: int

    @property
    def sphere_count(self) -> int:
        return len(self.objects)


def subquotient_report(category: FlowCategory, shift: Optional[int] = None) -> List[FiltrationLevel]:
    """
    One entry per index level m: Σ^{L−m} of a wedge of m-spheres, one per object.
    """
    cw = realize(category, shift)
    levels = []
    for m in category.indices():
        levels.append(FiltrationLevel(
            level=m,
            objects=tuple(o.id for o in category.objects_at(m)),
            sphere_dimension=m,
            suspension=cw.shift - m,
        ))
    return levels


def homotopy_chain_check(category: FlowCategory) -> Report:
    """
    Check that consecutive attaching maps compose to zero on homology.

    A failing product entry is reported with the pair (a, b) of index gap two
    it belongs to.
    """
    report = Report("realize.homotopy_chain")
    require_valid(category)
    indices = category.indices()
    for m in indices:
        upper = category.objects_at(m + 1)
        lower = category.objects_at(m - 1)
        if not upper or not lower:
            continue
        product = count_matrix(category, m) @ count_matrix(category, m + 1)
        if category.mod2_mode:
            product = product.reduced(2)
        failures = product.nonzero_positions()
        for i, j in failures:
            report.add("attaching_composite", False, f"composite degree {product[i, j]}",
                       (upper[j].id, lower[i].id))
        if not failures:
            report.add("attaching_composite", True, f"degree {m + 1} → {m - 1}")
    return report


def shift_invariance(category: FlowCategory, shifts: List[int]) -> bool:
    """Cellular homology is independent of the shift up to a degree shift."""
    reference = None
    for shift in shifts:
        groups = cellular_complex(realize(category, shift)).homology()
        offset = shift - min(category.indices()) if category.indices() else 0
        normalized = {d - offset: g for d, g in groups.items()}
        if reference is None:
            reference = normalized
        elif normalized != reference:
            return False
    return True


def to_text(cw: CWData) -> str:
    """Structured text listing cells and nonzero attaching degrees."""
    lines = [f"# cells of {cw.name or 'realization'}: shift L={cw.shift}, base q={cw.base_index}"]
    for cell in cw.cells:
        lines.append(
            f"cell {cell.object_id} index={cell.index} dim={cell.dimension} "
            f"cone_depth={cell.cone_depth} suspension={cell.suspension}"
        )
    for (a, b), degree in sorted(cw.attaching_degrees.items()):
        if degree:
            lines.append(f"attach {a} -> {b} degree={degree}")
    return "\n".join(lines) + "\n"


def to_dot(cw: CWData) -> str:
    """Graphviz DOT of the attaching diagram."""
    lines = ["digraph cw {", "  rankdir=TB;"]
    for cell in cw.cells:
        lines.append(f'  "{cell.object_id}" [label="{cell.object_id}\\ndim {cell.dimension}"];')
    for (a, b), degree in sorted(cw.attaching_degrees.items()):
        style = "" if degree else ", style=dashed"
        lines.append(f'  "{a}" -> "{b}" [label="{degree}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
