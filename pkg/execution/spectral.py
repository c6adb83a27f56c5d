#!/usr/bin/env python3
"""
Atiyah–Hirzebruch Pages and Filtered Complexes

Builds the E1 page of a flow category with coefficients in a generalized
theory h (given by its coefficient ranks h_q and a field), turns pages with
supplied differentials, and runs the full spectral sequence of a finite
filtered chain complex over a field by persistence-style column reduction.

Bidegrees: E_r^{p,q} sits at filtration p and total degree n = p + q;
d_r maps (p, q) to (p − r, q + r − 1).

Usage:
    from execution.spectral import ordinary, build_E1, turn_page

    e1 = build_E1(category, ordinary(0))
    e2 = turn_page(e1)
"""

from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple
import logging

from sympy.polys.matrices import DomainMatrix

from execution.errors import FlowToolsError
from execution.exact_linalg import coefficient_field, field_rank
from execution.flowcat import DSquaredNonzero, count_matrix, homology_ranks_over, require_valid
from execution.models.flow_data import FlowCategory
from execution.models.report import Report

logger = logging.getLogger(__name__)

Bidegree = Tuple[int, int]


class BidegreeMismatch(FlowToolsError):
    """Raised when a supplied differential does not fit the page's source and target ranks."""
    pass


class NotADifferential(FlowToolsError):
    """Raised when supplied page differentials do not square to zero."""
    pass


class NotFiltered(FlowToolsError):
    """Raised when a boundary map does not respect the filtration or the grading."""
    pass


class PageMismatch(FlowToolsError):
    """Raised when a turned page disagrees with the page read off the persistence pairing."""
    pass


@dataclass(frozen=True)
class CoefficientTheory:
    """Coefficient ranks h_q = rank h^q(pt) over a field of the given characteristic."""

    name: str
    ranks: Dict[int, int]
    characteristic: int = 0

    def __post_init__(self):
        if any(r < 0 for r in self.ranks.values()):
            raise ValueError(f"Coefficient ranks must be non-negative: {self.ranks}")

    @property
    def is_ordinary(self) -> bool:
        return {q for q, r in self.ranks.items() if r} == {0}


def ordinary(characteristic: int = 0) -> CoefficientTheory:
    """Ordinary cohomology with field coefficients: h_0 = 1, all else 0."""
    return CoefficientTheory("ordinary", {0: 1}, characteristic)


def two_line(characteristic: int = 0, gap: int = 3) -> CoefficientTheory:
    """Toy theory with rank one in q = 0 and q = gap."""
    return CoefficientTheory("two-line", {0: 1, gap: 1}, characteristic)


@dataclass(frozen=True)
class SpectralPage:
    """
    One page: nonzero ranks by bidegree and the page differential d_r.

    differentials maps a source bidegree to a DomainMatrix from E_r^{p,q}
    to E_r^{p−r, q+r−1}; missing entries are zero maps.
    """

    r: int
    characteristic: int
    entries: Dict[Bidegree, int] = field(default_factory=dict)
    differentials: Dict[Bidegree, Any] = field(default_factory=dict)

    def rank(self, p: int, q: int) -> int:
        return self.entries.get((p, q), 0)

    def target(self, p: int, q: int) -> Bidegree:
        return (p - self.r, q + self.r - 1)

    def total_ranks(self) -> Dict[int, int]:
        """Σ_{p+q=n} rank E_r^{p,q}."""
        totals: Dict[int, int] = defaultdict(int)
        for (p, q), rank in self.entries.items():
            totals[p + q] += rank
        return dict(sorted(totals.items()))

    def matrix(self, p: int, q: int) -> List[List[int]]:
        """Differential out of (p, q) as plain nested lists (empty if zero)."""
        mat = self.differentials.get((p, q))
        if mat is None:
            return []
        domain = mat.domain
        return [[_element_value(domain, x) for x in row] for row in mat.to_list()]


def _element_value(domain, x) -> Any:
    value = domain.to_sympy(x)
    return int(value) if value.is_Integer else str(value)


def _as_matrix(data: Any, domain, shape: Tuple[int, int]) -> DomainMatrix:
    if isinstance(data, DomainMatrix):
        return data.convert_to(domain) if data.domain != domain else data
    rows = [list(row) for row in data]
    actual = (len(rows), len(rows[0]) if rows else shape[1])
    if actual[0] == 0 or actual[1] == 0:
        return DomainMatrix.zeros(actual, domain)
    return DomainMatrix([[domain.convert(x) for x in row] for row in rows], actual, domain)


def _rank(matrix: DomainMatrix) -> int:
    rows, cols = matrix.shape
    if rows == 0 or cols == 0:
        return 0
    return matrix.rank()


def _is_zero(matrix: DomainMatrix) -> bool:
    rows, cols = matrix.shape
    if rows == 0 or cols == 0:
        return True
    return all(x == matrix.domain.zero for row in matrix.to_list() for x in row)


def build_E1(category: FlowCategory, theory: CoefficientTheory, shift: int = 0) -> SpectralPage:
    """
    E1^{p,q} = C_p(category) ⊗ h_q with d1 = ∂ ⊗ id.

    Args:
        category: Valid flow category.
        theory: Coefficient ranks and field.
        shift: Added to every filtration index p.

    Raises:
        InvalidCategory: If the category fails validation.
    """
    require_valid(category)
    domain = coefficient_field(theory.characteristic)
    entries: Dict[Bidegree, int] = {}
    for m in category.indices():
        size = len(category.objects_at(m))
        for q, h in theory.ranks.items():
            if size * h:
                entries[(m + shift, q)] = size * h

    differentials = {}
    for (p, q), rank in entries.items():
        target = (p - 1, q)
        if target not in entries:
            continue
        h = theory.ranks[q]
        boundary = count_matrix(category, p - shift)
        rows = [
            [domain.convert(boundary[i, j]) if a == b else domain.zero
             for j in range(boundary.cols) for b in range(h)]
            for i in range(boundary.rows) for a in range(h)
        ]
        differentials[(p, q)] = DomainMatrix(rows, (entries[target], rank), domain)
    logger.debug(f"E1 for {category.name or 'category'} with {theory.name}: {entries}")
    return SpectralPage(1, theory.characteristic, entries, differentials)


def turn_page(page: SpectralPage, next_d: Optional[Dict[Bidegree, Any]] = None) -> SpectralPage:
    """
    E_{r+1} = ker d_r / im d_r.

    Args:
        page: Current page E_r.
        next_d: Differential d_r by source bidegree; defaults to the page's own.

    Returns:
        Page r + 1 with ranks only; its differential is not known yet.

    Raises:
        BidegreeMismatch: If a matrix shape disagrees with the page ranks.
        NotADifferential: If d_r ∘ d_r ≠ 0.
    """
    domain = coefficient_field(page.characteristic)
    supplied = page.differentials if next_d is None else next_d
    maps: Dict[Bidegree, DomainMatrix] = {}
    for (p, q), data in supplied.items():
        expected = (page.rank(*page.target(p, q)), page.rank(p, q))
        matrix = _as_matrix(data, domain, expected)
        if tuple(matrix.shape) != expected:
            raise BidegreeMismatch(
                f"d_{page.r} at ({p},{q}) has shape {tuple(matrix.shape)}, expected {expected}"
            )
        maps[(p, q)] = matrix

    for source, matrix in maps.items():
        follow = maps.get(page.target(*source))
        if follow is None or _is_zero(matrix) or _is_zero(follow):
            continue
        if not _is_zero(follow * matrix):
            raise NotADifferential(f"d_{page.r} ∘ d_{page.r} ≠ 0 starting at {source}")

    lost: Dict[Bidegree, int] = defaultdict(int)
    for source, matrix in maps.items():
        rank = _rank(matrix)
        lost[source] += rank
        lost[page.target(*source)] += rank
    entries = {
        position: rank - lost[position]
        for position, rank in page.entries.items()
        if rank - lost[position] > 0
    }
    return SpectralPage(page.r + 1, page.characteristic, entries, {})


def collapse_check(category: FlowCategory, theory: CoefficientTheory) -> Report:
    """
    For ordinary coefficients the sequence collapses at E2 onto homology.

    Checks that h is concentrated in q = 0, that E2 sits in the row q = 0,
    that every d_r with r ≥ 2 of the index-filtered Morse complex is zero,
    and that E2 equals the field homology of the category.
    """
    report = Report("spectral.collapse")
    if not theory.is_ordinary:
        report.add("ordinary_coefficients", False, f"{theory.name} has ranks {theory.ranks}")
        return report
    report.add("ordinary_coefficients", True)

    characteristic = 2 if category.mod2_mode else theory.characteristic
    e2 = turn_page(build_E1(category, theory))
    off_row = sorted(pos for pos in e2.entries if pos[1] != 0)
    report.add("single_row", not off_row, f"entries off q=0: {off_row}")

    run = run_filtered(filtered_from_category(category, characteristic))
    nonzero = sorted(
        (page.r, pos) for page in run.pages if page.r >= 2
        for pos, d in page.differentials.items() if not _is_zero(d)
    )
    report.add("higher_differentials_vanish", not nonzero, f"nonzero (r, source) with r ≥ 2: {nonzero}")

    expected = homology_ranks_over(category, characteristic)
    for p in sorted(set(expected) | {pos[0] for pos in e2.entries}):
        got, want = e2.rank(p, 0), expected.get(p, 0)
        report.add("e2_equals_homology", got == want, f"E2^{{{p},0}} = {got}, H_{p} = {want}", (p,))
    return report


# Filtered chain complexes over a field


@dataclass(frozen=True)
class FilteredComplex:
    """
    Finite chain complex over a field with a filtration.

    boundary is square; column j is ∂ of basis element j. Basis element j has
    chain degree degrees[j] and filtration level levels[j].
    """

    characteristic: int
    degrees: Tuple[int, ...]
    levels: Tuple[int, ...]
    boundary: Tuple[Tuple[int, ...], ...]
    names: Tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return len(self.degrees)

    def name(self, j: int) -> str:
        return self.names[j] if self.names else f"e{j}"


@dataclass
class FilteredRun:
    """Every page of a filtered complex plus the convergence verdict."""

    pages: List[SpectralPage]
    e_infinity: Dict[Bidegree, int]
    homology: Dict[int, int]
    converged: bool
    pairs: List[Tuple[int, int]] = field(default_factory=list)


def _check_filtered(fc: FilteredComplex):
    n = fc.size
    if len(fc.levels) != n or len(fc.boundary) != n or any(len(row) != n for row in fc.boundary):
        raise ValueError("Filtered complex data has inconsistent sizes")
    domain = coefficient_field(fc.characteristic)
    matrix = [[domain.convert(x) for x in row] for row in fc.boundary]
    for i in range(n):
        for j in range(n):
            if matrix[i][j] == domain.zero:
                continue
            if fc.degrees[i] != fc.degrees[j] - 1:
                raise NotFiltered(f"∂({fc.name(j)}) has a component on {fc.name(i)} of the wrong degree")
            if fc.levels[i] > fc.levels[j]:
                raise NotFiltered(f"∂({fc.name(j)}) leaves filtration level {fc.levels[j]}")
    if n:
        square = DomainMatrix(matrix, (n, n), domain)
        if not _is_zero(square * square):
            raise DSquaredNonzero("∂∘∂ ≠ 0 in the filtered complex")
    return domain, matrix


def _persistence_pairs(fc: FilteredComplex, domain, matrix) -> Tuple[List[int], List[Tuple[int, int]]]:
    """Column reduction in filtration order; returns the order and (birth, death) pairs."""
    order = sorted(range(fc.size), key=lambda j: (fc.levels[j], fc.degrees[j], j))
    position = {j: k for k, j in enumerate(order)}
    columns = []
    for j in order:
        columns.append({position[i]: matrix[i][j] for i in range(fc.size) if matrix[i][j] != domain.zero})

    owner: Dict[int, int] = {}
    pairs = []
    for k, column in enumerate(columns):
        while column:
            low = max(column)
            if low not in owner:
                break
            pivot = columns[owner[low]]
            factor = domain.quo(column[low], pivot[low])
            for row, value in pivot.items():
                updated = column.get(row, domain.zero) - factor * value
                if updated == domain.zero:
                    column.pop(row, None)
                else:
                    column[row] = updated
        if column:
            owner[max(column)] = k
            pairs.append((order[max(column)], order[k]))
    return order, pairs


def _graded_ranks(fc: FilteredComplex, domain, matrix) -> Dict[int, int]:
    """Betti numbers of the total complex from matrix ranks."""
    result = {}
    for n in sorted(set(fc.degrees)):
        here = [j for j in range(fc.size) if fc.degrees[j] == n]
        below = [i for i in range(fc.size) if fc.degrees[i] == n - 1]
        above = [j for j in range(fc.size) if fc.degrees[j] == n + 1]
        out_rank = field_rank([[matrix[i][j] for j in here] for i in below], (len(below), len(here)), fc.characteristic)
        in_rank = field_rank([[matrix[i][j] for j in above] for i in here], (len(here), len(above)), fc.characteristic)
        result[n] = len(here) - out_rank - in_rank
    return result


def run_filtered(fc: FilteredComplex) -> FilteredRun:
    """
    All pages E_1 … E_∞ of a filtered complex over a field.

    A persistence pair (x, y) with y killing x at level distance d survives
    to E_d and is cancelled by d_d; pairs at distance 0 never reach E_1.
    Every page is turned with turn_page and checked against the pairing.

    Raises:
        NotFiltered: If ∂ breaks the grading or the filtration.
        DSquaredNonzero: If ∂ ∘ ∂ ≠ 0.
        PageMismatch: If a turned page disagrees with the pairing.
    """
    domain, matrix = _check_filtered(fc)
    _, pairs = _persistence_pairs(fc, domain, matrix)
    distance = {}
    for birth, death in pairs:
        gap = fc.levels[death] - fc.levels[birth]
        distance[birth] = gap
        distance[death] = gap
    last = max([d for d in distance.values()] + [0])

    def alive(r: int) -> List[int]:
        return sorted(
            (j for j in range(fc.size) if distance.get(j, r) >= r),
            key=lambda j: (fc.levels[j], fc.degrees[j], j),
        )

    def bidegree(j: int) -> Bidegree:
        return (fc.levels[j], fc.degrees[j] - fc.levels[j])

    def page_data(r: int) -> Tuple[Dict[Bidegree, int], Dict[Bidegree, DomainMatrix]]:
        members: Dict[Bidegree, List[int]] = defaultdict(list)
        for j in alive(r):
            members[bidegree(j)].append(j)
        entries = {pos: len(js) for pos, js in members.items()}
        differentials = {}
        for birth, death in pairs:
            if fc.levels[death] - fc.levels[birth] != r:
                continue
            source, target = bidegree(death), bidegree(birth)
            if source not in differentials:
                differentials[source] = [[domain.zero] * len(members[source]) for _ in members[target]]
            differentials[source][members[target].index(birth)][members[source].index(death)] = domain.one
        return entries, {
            pos: DomainMatrix(rows, (len(rows), len(members[pos])), domain)
            for pos, rows in differentials.items()
        }

    entries, differentials = page_data(1)
    pages = [SpectralPage(1, fc.characteristic, entries, differentials)]
    for r in range(1, last + 1):
        turned = turn_page(pages[-1])
        entries, differentials = page_data(r + 1)
        if turned.entries != entries:
            raise PageMismatch(f"Page {r + 1} disagrees with the persistence pairing")
        pages.append(replace(turned, differentials=differentials))

    e_infinity = dict(pages[-1].entries)
    homology = _graded_ranks(fc, domain, matrix)
    totals: Dict[int, int] = defaultdict(int)
    for (p, q), rank in e_infinity.items():
        totals[p + q] += rank
    converged = all(totals.get(n, 0) == rank for n, rank in homology.items())
    if not converged:
        logger.error(f"E∞ totals {dict(totals)} differ from homology {homology}")
    return FilteredRun(pages, e_infinity, homology, converged, pairs)


def associated_graded(fc: FilteredComplex) -> Dict[Bidegree, int]:
    """
    dim of F_pH_n / F_{p−1}H_n for every level p, keyed by (p, n − p).

    dim im(H_n(F_p) → H_n) = dim Z_n(F_p) − dim(B_n ∩ F_p), computed from
    ranks of column and row restrictions of ∂.
    """
    domain, matrix = _check_filtered(fc)
    levels = sorted(set(fc.levels))
    result = {}
    for n in sorted(set(fc.degrees)):
        here = [j for j in range(fc.size) if fc.degrees[j] == n]
        below = [i for i in range(fc.size) if fc.degrees[i] == n - 1]
        above = [j for j in range(fc.size) if fc.degrees[j] == n + 1]

        def rank(rows, cols):
            return field_rank([[matrix[i][j] for j in cols] for i in rows], (len(rows), len(cols)), fc.characteristic)

        boundary_rank = rank(here, above)
        previous = 0
        for p in levels:
            inside = [j for j in here if fc.levels[j] <= p]
            outside = [j for j in here if fc.levels[j] > p]
            cycles = len(inside) - rank(below, inside)
            boundaries_inside = boundary_rank - rank(outside, above)
            image = cycles - boundaries_inside
            if image - previous:
                result[(p, n - p)] = image - previous
            previous = image
    return result


def filtered_from_category(category: FlowCategory, characteristic: int = 0) -> FilteredComplex:
    """Morse complex of a category filtered by index."""
    require_valid(category)
    objects = list(category.objects)
    position = {o.id: k for k, o in enumerate(objects)}
    n = len(objects)
    boundary = [[0] * n for _ in range(n)]
    for a in objects:
        for b in category.objects_at(a.index - 1):
            boundary[position[b.id]][position[a.id]] = category.count(a.id, b.id)
    return FilteredComplex(
        characteristic=characteristic,
        degrees=tuple(o.index for o in objects),
        levels=tuple(o.index for o in objects),
        boundary=tuple(tuple(row) for row in boundary),
        names=tuple(o.id for o in objects),
    )
