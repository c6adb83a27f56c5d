"""
Table exporters for the CLI.

Homology groups, spectral pages, CW cells and check reports become pandas
DataFrames, rendered as aligned text, TSV or JSON records.
"""

from typing import Dict, Iterable, List
import json
import logging

import pandas as pd

from execution.exact_linalg import HomologyGroup
from execution.models.report import Report
from execution.realize import CWData
from execution.spectral import SpectralPage

logger = logging.getLogger(__name__)

FORMATS = ("text", "json", "tsv")


def homology_frame(groups: Dict[int, HomologyGroup]) -> pd.DataFrame:
    """One row per degree: free rank, torsion coefficients and the group."""
    rows = [
        {
            'degree': degree,
            'free_rank': group.free_rank,
            'torsion': ",".join(str(t) for t in group.torsion),
            'group': str(group),
        }
        for degree, group in sorted(groups.items())
    ]
    return pd.DataFrame(rows, columns=['degree', 'free_rank', 'torsion', 'group'])


def field_homology_frame(ranks: Dict[int, int], field_name: str) -> pd.DataFrame:
    rows = []
    for degree, rank in sorted(ranks.items()):
        if rank == 0:
            group = "0"
        elif rank == 1:
            group = field_name
        else:
            group = f"{field_name}^{rank}"
        rows.append({'degree': degree, 'free_rank': rank, 'torsion': "", 'group': group})
    return pd.DataFrame(rows, columns=['degree', 'free_rank', 'torsion', 'group'])


def page_frame(page: SpectralPage) -> pd.DataFrame:
    """Long form (page, p, q, rank) of the nonzero entries."""
    rows = [{'page': page.r, 'p': p, 'q': q, 'rank': rank} for (p, q), rank in sorted(page.entries.items())]
    return pd.DataFrame(rows, columns=['page', 'p', 'q', 'rank'])


def pages_table(page: SpectralPage) -> pd.DataFrame:
    """
    Grid view of a page: rows q (top row first), columns p, zeros filled in.
    """
    long = page_frame(page)
    if long.empty:
        return pd.DataFrame()
    grid = long.pivot(index='q', columns='p', values='rank')
    grid = grid.reindex(
        index=range(int(long['q'].max()), int(long['q'].min()) - 1, -1),
        columns=range(int(long['p'].min()), int(long['p'].max()) + 1),
    ).fillna(0).astype(int)
    grid.index.name = 'q\\p'
    grid.columns.name = None
    return grid


def cells_frame(cw: CWData) -> pd.DataFrame:
    return pd.DataFrame([cell.to_dict() for cell in cw.cells],
                        columns=['object', 'index', 'dimension', 'cone_depth', 'suspension'])


def report_frame(report: Report) -> pd.DataFrame:
    rows = [
        {
            'check': e.check,
            'passed': e.passed,
            'location': " -> ".join(str(x) for x in e.location),
            'detail': e.detail,
        }
        for e in report.entries
    ]
    return pd.DataFrame(rows, columns=['check', 'passed', 'location', 'detail'])


def render(frame: pd.DataFrame, fmt: str = "text", index: bool = False) -> str:
    """
    Render a table as text, tsv or json.

    Raises:
        ValueError: On an unknown format.
    """
    if fmt not in FORMATS:
        raise ValueError(f"Unknown format {fmt!r}; expected one of {FORMATS}")
    if fmt == "json":
        records = frame.reset_index().to_dict(orient="records") if index else frame.to_dict(orient="records")
        return json.dumps(records, indent=2, default=str) + "\n"
    if fmt == "tsv":
        return frame.to_csv(sep="\t", index=index)
    if frame.empty:
        return "  ".join(str(c) for c in frame.columns) + "\n"
    return frame.to_string(index=index) + "\n"


def render_many(sections: Iterable[tuple], fmt: str = "text") -> str:
    """Render titled tables; json output is one object keyed by title."""
    sections = list(sections)
    if fmt == "json":
        combined = {}
        for title, frame, index in sections:
            combined[title] = json.loads(render(frame, "json", index))
        return json.dumps(combined, indent=2) + "\n"
    parts: List[str] = []
    for title, frame, index in sections:
        parts.append(f"# {title}\n{render(frame, fmt, index)}")
    return "\n".join(parts)


def write_table(frame: pd.DataFrame, path: str, fmt: str = "tsv", index: bool = False) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(render(frame, fmt, index))
    logger.info(f"Wrote {path}")
