#!/usr/bin/env python3
"""
⟨k⟩-Corner Complexes

Combinatorial model of a manifold with faces: a finite stratification with a
closure relation and an ordered list of k faces, each a set of codimension-one
strata. validate() checks the ⟨k⟩ axioms, two_k_diagram() produces the
{0,1}^k diagram of face intersections, and moduli_corner() assembles the
corner structure of a compactified moduli space from flow-category data.

Usage:
    from execution.corners import interval, product, validate, two_k_diagram

    square = product(interval(), interval())
    report = validate(square)
    diagram = two_k_diagram(square)
"""

from dataclasses import dataclass, field
from itertools import product as cartesian
from typing import Any, Dict, FrozenSet, Hashable, Iterable, List, Optional, Set, Tuple
import logging

import networkx as nx

from execution.errors import FlowToolsError
from execution.models.flow_data import CIRCLE, FlowCategory
from execution.models.report import ValidationReport

logger = logging.getLogger(__name__)


class InvalidComplex(FlowToolsError):
    """Raised when an operation needs a valid ⟨k⟩-complex and gets one that fails validation."""
    pass


class MissingModuliData(FlowToolsError):
    """Raised when a corner structure needs a moduli table the category does not have."""
    pass


@dataclass(frozen=True)
class Stratum:
    """Connected stratum; tag names the connected face it belongs to when codim is 1."""

    label: Hashable
    codim: int
    tag: Hashable = ""


@dataclass(frozen=True)
class CornerComplex:
    """
    Stratified space with k ordered faces.

    incidence holds pairs (s, t) meaning s lies in the closure of t, with s
    of strictly larger codimension.
    """

    k: int
    strata: Tuple[Stratum, ...]
    faces: Tuple[FrozenSet[Hashable], ...]
    incidence: FrozenSet[Tuple[Hashable, Hashable]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, 'strata', tuple(self.strata))
        object.__setattr__(self, 'faces', tuple(frozenset(face) for face in self.faces))
        object.__setattr__(self, 'incidence', frozenset(self.incidence))

    def stratum(self, label: Hashable) -> Optional[Stratum]:
        for s in self.strata:
            if s.label == label:
                return s
        return None

    def labels(self) -> List[Hashable]:
        return [s.label for s in self.strata]

    def codim(self, label: Hashable) -> int:
        return self.stratum(label).codim

    def below(self, label: Hashable) -> Set[Hashable]:
        """Strata lying in the closure of the given one (excluding itself)."""
        return {s for s, t in self.incidence if t == label}

    def closure(self, labels: Iterable[Hashable]) -> Set[Hashable]:
        result = set(labels)
        frontier = list(result)
        while frontier:
            for s in self.below(frontier.pop()):
                if s not in result:
                    result.add(s)
                    frontier.append(s)
        return result

    def face_closure(self, i: int) -> Set[Hashable]:
        """Closed face F_i (1-based) as a set of strata."""
        return self.closure(self.faces[i - 1])


def validate(complex_: CornerComplex) -> ValidationReport:
    """
    Check the ⟨k⟩-manifold axioms on the combinatorial data.

    Checks: references resolve, face count is k, faces consist of
    codimension-one strata, incidence increases codimension, codimension is
    at most k, the faces cover every boundary stratum, each codimension-c
    stratum lies in exactly c faces and c connected faces, and pairwise face
    intersections are closed unions of strata of codimension ≥ 2.
    """
    report = ValidationReport("corners.validate")
    labels = [s.label for s in complex_.strata]
    known = set(labels)

    duplicates = sorted({str(l) for l in labels if labels.count(l) > 1})
    report.add("unique_labels", not duplicates, ", ".join(duplicates))
    report.add("face_count", len(complex_.faces) == complex_.k,
               f"{len(complex_.faces)} faces for k={complex_.k}")

    unknown = [(i + 1, s) for i, face in enumerate(complex_.faces) for s in face if s not in known]
    unknown += [(None, s) for pair in complex_.incidence for s in pair if s not in known]
    for face_index, label in unknown:
        report.add("references_resolve", False, f"unknown stratum {label!r}",
                   (face_index,) if face_index else ())
    if unknown:
        return report
    report.add("references_resolve", True)

    for i, face in enumerate(complex_.faces, start=1):
        wrong = sorted(str(s) for s in face if complex_.codim(s) != 1)
        report.add("faces_codim_one", not wrong, ", ".join(wrong), (i,))

    for s, t in sorted(complex_.incidence, key=str):
        if complex_.codim(s) <= complex_.codim(t):
            report.add("incidence_increases_codim", False, f"{s!r} in closure of {t!r}", (s, t))

    too_deep = sorted(str(s.label) for s in complex_.strata if s.codim > complex_.k or s.codim < 0)
    report.add("codim_at_most_k", not too_deep, ", ".join(too_deep))

    closures = [complex_.closure(face) for face in complex_.faces]
    for s in complex_.strata:
        if s.codim == 0:
            continue
        containing = [i for i, closed in enumerate(closures, start=1) if s.label in closed]
        if not containing:
            report.add("faces_cover_boundary", False, f"{s.label!r} lies in no face", (s.label,))
            continue
        if len(containing) != s.codim:
            report.add("corner_face_count", False,
                       f"codim {s.codim} stratum lies in faces {containing}", (s.label,))
        connected = {
            (i, complex_.stratum(t).tag)
            for i, face in enumerate(complex_.faces, start=1)
            for t in face
            if s.label in complex_.closure([t])
        }
        if len(connected) != s.codim:
            report.add("connected_face_count", False,
                       f"codim {s.codim} stratum lies in {len(connected)} connected faces", (s.label,))

    for i in range(1, len(closures) + 1):
        for j in range(i + 1, len(closures) + 1):
            meet = closures[i - 1] & closures[j - 1]
            shallow = sorted(str(s) for s in meet if complex_.codim(s) < 2)
            if shallow:
                report.add("face_intersection", False, f"codim < 2 strata {shallow}", (i, j))
            if complex_.closure(meet) != meet:
                report.add("face_intersection", False, "intersection is not closed", (i, j))

    if report.passed:
        report.add("corner_axioms", True, f"{len(complex_.strata)} strata, k={complex_.k}")
    return report


def require_valid(complex_: CornerComplex) -> None:
    report = validate(complex_)
    if not report.passed:
        raise InvalidComplex("; ".join(str(e) for e in report.failures()))


@dataclass(frozen=True)
class KDiagram:
    """Functor {0,1}^k → closed subsets; all-ones maps to the whole space."""

    k: int
    sets: Dict[Tuple[int, ...], FrozenSet[Hashable]] = field(default_factory=dict)

    def __getitem__(self, key: Tuple[int, ...]) -> FrozenSet[Hashable]:
        return self.sets[tuple(key)]

    def is_monotone(self) -> bool:
        """a ≤ b coordinatewise implies M(a) ⊆ M(b)."""
        for a in self.sets:
            for i in range(self.k):
                if a[i] == 0:
                    b = a[:i] + (1,) + a[i + 1:]
                    if not self.sets[a] <= self.sets[b]:
                        return False
        return True

    def respects_meets(self) -> bool:
        """M(a ∧ b) = M(a) ∩ M(b)."""
        for a in self.sets:
            for b in self.sets:
                meet = tuple(min(x, y) for x, y in zip(a, b))
                if self.sets[meet] != self.sets[a] & self.sets[b]:
                    return False
        return True


def two_k_diagram(complex_: CornerComplex) -> KDiagram:
    """
    Build M(a) = ⋂_{a_i = 0} F_i with M(1,…,1) the whole complex.

    Raises:
        InvalidComplex: If the complex fails validation.
    """
    require_valid(complex_)
    everything = frozenset(complex_.labels())
    closures = [frozenset(complex_.face_closure(i)) for i in range(1, complex_.k + 1)]
    sets = {}
    for a in cartesian((0, 1), repeat=complex_.k):
        current = everything
        for i, bit in enumerate(a):
            if bit == 0:
                current = current & closures[i]
        sets[a] = current
    return KDiagram(complex_.k, sets)


def product(first: CornerComplex, second: CornerComplex) -> CornerComplex:
    """
    ⟨k1⟩ × ⟨k2⟩ → ⟨k1 + k2⟩ with faces F_i × second, then first × G_j.

    Raises:
        InvalidComplex: If either factor fails validation.
    """
    require_valid(first)
    require_valid(second)
    strata = [
        Stratum((s.label, t.label), s.codim + t.codim, (s.tag, t.tag))
        for s in first.strata for t in second.strata
    ]
    interior_second = [t.label for t in second.strata if t.codim == 0]
    interior_first = [s.label for s in first.strata if s.codim == 0]
    faces = [frozenset((s, t) for s in face for t in interior_second) for face in first.faces]
    faces += [frozenset((s, t) for s in interior_first for t in face) for face in second.faces]

    def at_or_below(cx: CornerComplex, x: Hashable, y: Hashable) -> bool:
        return x == y or (x, y) in cx.incidence

    incidence = {
        ((s.label, t.label), (s2.label, t2.label))
        for s in first.strata for t in second.strata
        for s2 in first.strata for t2 in second.strata
        if (s.label, t.label) != (s2.label, t2.label)
        and at_or_below(first, s.label, s2.label)
        and at_or_below(second, t.label, t2.label)
    }
    return CornerComplex(first.k + second.k, tuple(strata), tuple(faces), frozenset(incidence))


def interval() -> CornerComplex:
    """[0, 1] as a ⟨1⟩-complex with both endpoints in F_1."""
    return CornerComplex(
        k=1,
        strata=(Stratum("interior", 0), Stratum("0", 1, "0"), Stratum("1", 1, "1")),
        faces=(frozenset({"0", "1"}),),
        incidence=frozenset({("0", "interior"), ("1", "interior")}),
    )


def point() -> CornerComplex:
    """A single point as a ⟨0⟩-complex."""
    return CornerComplex(0, (Stratum("pt", 0),), ())


def rplus_model(k: int) -> CornerComplex:
    """ℝ₊^k with strata indexed by the set of vanishing coordinates."""
    subsets = [
        tuple(i for i in range(1, k + 1) if bits[i - 1])
        for bits in cartesian((0, 1), repeat=k)
    ]
    strata = tuple(Stratum(s, len(s), s) for s in subsets)
    faces = tuple(frozenset({(i,)}) for i in range(1, k + 1))
    incidence = frozenset(
        (s, t) for s in subsets for t in subsets if set(t) < set(s)
    )
    return CornerComplex(k, strata, faces, incidence)


def signature(complex_: CornerComplex) -> Tuple[Any, ...]:
    """
    Label-free invariant used to compare complexes up to relabelling.

    Lists (codim, faces containing the stratum, number of strata below it)
    for every stratum, sorted.
    """
    closures = [complex_.face_closure(i) for i in range(1, complex_.k + 1)]
    rows = sorted(
        (
            s.codim,
            tuple(i for i, closed in enumerate(closures, start=1) if s.label in closed),
            len(complex_.below(s.label)),
        )
        for s in complex_.strata
    )
    return (complex_.k, tuple(rows), len(complex_.incidence))


def face_of(complex_: CornerComplex, i: int) -> CornerComplex:
    """
    The closed face F_i as a ⟨k-1⟩-complex with faces F_i ∩ F_j (j ≠ i).

    Codimensions drop by one.
    """
    require_valid(complex_)
    closed = complex_.face_closure(i)
    strata = tuple(
        Stratum(s.label, s.codim - 1, s.tag) for s in complex_.strata if s.label in closed
    )
    faces = []
    for j in range(1, complex_.k + 1):
        if j == i:
            continue
        meet = complex_.face_closure(j) & closed
        faces.append(frozenset(s for s in meet if complex_.codim(s) == 2))
    incidence = frozenset((s, t) for s, t in complex_.incidence if s in closed and t in closed)
    return CornerComplex(complex_.k - 1, strata, tuple(faces), incidence)


# Corner structure of compactified moduli spaces


INTERIOR = "interior"


def _cells(category: FlowCategory, upper: str, lower: str, reachable) -> List[Hashable]:
    """Connected top cells of M(upper, lower) available as data."""
    gap = category.index_of(upper) - category.index_of(lower)
    if gap == 1:
        moduli = category.moduli0_for(upper, lower)
        return [p.key for p in moduli.points] if moduli else []
    if gap == 2:
        moduli = category.moduli1_for(upper, lower)
        if moduli is None:
            if reachable(upper, lower):
                raise MissingModuliData(f"No one-dimensional moduli data for ({upper}, {lower})")
            return []
        return list(range(len(moduli.components)))
    return [INTERIOR] if reachable(upper, lower) else []


def _chains(order: nx.DiGraph, upper: str, lower: str) -> List[Tuple[str, ...]]:
    """Chains upper > … > lower in the partial order, shortest first."""
    closure = nx.transitive_closure(order, reflexive=False)
    return sorted((tuple(path) for path in nx.all_simple_paths(closure, upper, lower)),
                  key=lambda chain: (len(chain), chain))


def _end_cells(category: FlowCategory, upper: str, lower: str, cell: int) -> Set[Tuple[str, str, str]]:
    component = category.moduli1_for(upper, lower).components[cell]
    if component.kind == CIRCLE:
        return set()
    return {(end.mid, end.p, end.q) for end in component.ends}


def _in_closure(category: FlowCategory, fine, coarse) -> bool:
    """Whether the finer stratum lies in the closure of the coarser one."""
    fine_chain, fine_cells = fine
    coarse_chain, coarse_cells = coarse
    if not set(coarse_chain) <= set(fine_chain) or fine == coarse:
        return False
    for (top, bottom), cell in zip(zip(coarse_chain, coarse_chain[1:]), coarse_cells):
        start, stop = fine_chain.index(top), fine_chain.index(bottom)
        sub_chain = fine_chain[start:stop + 1]
        sub_cells = fine_cells[start:stop]
        if len(sub_chain) == 2:
            if sub_cells[0] != cell:
                return False
            continue
        gap = category.index_of(top) - category.index_of(bottom)
        if cell == INTERIOR and gap >= 3:
            continue
        if gap == 2 and len(sub_chain) == 3:
            if (sub_chain[1], sub_cells[0], sub_cells[1]) not in _end_cells(category, top, bottom, cell):
                return False
            continue
        return False
    return True


def moduli_corner(category: FlowCategory, upper: str, lower: str) -> CornerComplex:
    """
    ⟨k⟩-structure of M̄(upper, lower) with k = μ(upper) − μ(lower) − 1.

    Strata are broken flows: an index-decreasing chain of objects plus a
    connected cell for each consecutive pair. Face F_j collects the
    once-broken strata whose break has index μ(upper) − j. Moduli of
    dimension two and more enter as a single interior cell.

    Raises:
        MissingModuliData: If a gap-two pair on a chain has no component data.
    """
    from execution.flowcat import partial_order

    order = partial_order(category)

    def reachable(x: str, y: str) -> bool:
        return x == y or nx.has_path(order, x, y)

    k = category.index_of(upper) - category.index_of(lower) - 1
    if k < 0:
        raise ValueError(f"Need μ({upper}) > μ({lower})")

    strata = []
    for chain in _chains(order, upper, lower):
        cell_lists = [_cells(category, a, b, reachable) for a, b in zip(chain, chain[1:])]
        for cells in cartesian(*cell_lists):
            label = (chain, tuple(cells))
            codim = len(chain) - 2
            strata.append(Stratum(label, codim, label))

    top = category.index_of(upper)
    faces = []
    for j in range(1, k + 1):
        faces.append(frozenset(
            s.label for s in strata
            if s.codim == 1 and category.index_of(s.label[0][1]) == top - j
        ))
    incidence = frozenset(
        (fine.label, coarse.label)
        for fine in strata for coarse in strata
        if fine.codim > coarse.codim and _in_closure(category, fine.label, coarse.label)
    )
    logger.debug(f"moduli_corner({upper}, {lower}): {len(strata)} strata, k={k}")
    return CornerComplex(k, tuple(strata), tuple(faces), incidence)
