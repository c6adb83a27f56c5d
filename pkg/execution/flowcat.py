#!/usr/bin/env python3
"""
Flow Categories to Chain Complexes

Validates finite framed flow categories, builds their Morse complexes and
homology, and checks the ∂² = 0 identity both numerically and against the
ends of the one-dimensional moduli spaces.

Usage:
    from execution.flowcat import validate, morse_complex, homology

    report = validate(category)
    if report.passed:
        groups = homology(category)
"""

from collections import Counter
from dataclasses import replace
from typing import Dict, List, Mapping, Optional, Tuple
import logging

import networkx as nx

from execution.errors import FlowToolsError
from execution.exact_linalg import ChainComplex, HomologyGroup, IntMatrix
from execution.models.flow_data import (
    BrokenFlow,
    Component,
    FlowCategory,
    FlowObject,
    ModuliOne,
    ModuliPoint,
    ModuliZero,
)
from execution.models.report import Report

logger = logging.getLogger(__name__)


class InvalidCategory(FlowToolsError):
    """Raised when an operation needs a category that passes validate()."""
    pass


class DSquaredNonzero(FlowToolsError):
    """Raised when Σ_c n(a,c)·n(c,b) ≠ 0 for some pair of index gap two."""
    pass


class UnknownObject(FlowToolsError):
    """Raised when an object id is not part of the category."""
    pass


def validate(category: FlowCategory) -> Report:
    """
    Structural checks on a flow category.

    Checks unique ids, moduli endpoints and index gaps, point signs and keys,
    broken-flow references, that no broken flow ends two components, and
    finite type: the order the data induces has no cycle, so only finitely
    many broken chains join any two objects.
    """
    report = Report("flowcat.validate")

    ids = Counter(obj.id for obj in category.objects)
    duplicated = sorted(i for i, n in ids.items() if n > 1)
    report.add("unique_ids", not duplicated, ", ".join(duplicated))

    pairs = Counter((m.source, m.target) for m in category.moduli0)
    pairs.update((m.source, m.target, 1) for m in category.moduli1)
    repeated = [p for p, n in pairs.items() if n > 1]
    report.add("unique_moduli_tables", not repeated, ", ".join(str(p) for p in repeated))

    for moduli in category.moduli0:
        location = (moduli.source, moduli.target)
        if not (category.has_object(moduli.source) and category.has_object(moduli.target)):
            report.add("moduli_references", False, "unknown object", location)
            continue
        gap = category.index_of(moduli.source) - category.index_of(moduli.target)
        report.add("moduli0_gap", gap == 1, f"index gap {gap}", location)
        bad_signs = [p.key for p in moduli.points if p.sign not in (1, -1)]
        if bad_signs:
            report.add("point_signs", False, f"points {bad_signs} have sign outside ±1", location)
        keys = Counter(p.key for p in moduli.points)
        clashes = sorted(k for k, n in keys.items() if n > 1)
        if clashes:
            report.add("point_keys", False, f"repeated keys {clashes}", location)

    for moduli in category.moduli1:
        location = (moduli.source, moduli.target)
        if not (category.has_object(moduli.source) and category.has_object(moduli.target)):
            report.add("moduli_references", False, "unknown object", location)
            continue
        gap = category.index_of(moduli.source) - category.index_of(moduli.target)
        report.add("moduli1_gap", gap == 2, f"index gap {gap}", location)
        seen = Counter()
        for end in moduli.ends():
            seen[end] += 1
            problem = _broken_flow_problem(category, moduli.source, moduli.target, end)
            if problem:
                report.add("broken_flow_references", False, problem, location + (end.mid, end.p, end.q))
        twice = [end for end, n in seen.items() if n > 1]
        for end in twice:
            report.add("ends_used_once", False, "broken flow ends two components",
                       location + (end.mid, end.p, end.q))

    order = partial_order(category)
    if nx.is_directed_acyclic_graph(order):
        report.add("finite_type", True,
                   f"{len(category.objects)} objects, longest chain {nx.dag_longest_path_length(order)}")
    else:
        cycle = [edge[0] for edge in nx.find_cycle(order)]
        report.add("finite_type", False, "moduli data close a cycle, so broken chains are unbounded",
                   tuple(cycle))
    return report


def _broken_flow_problem(category: FlowCategory, source: str, target: str, end: BrokenFlow) -> Optional[str]:
    if not category.has_object(end.mid):
        return f"unknown mid object {end.mid}"
    first = category.moduli0_for(source, end.mid)
    second = category.moduli0_for(end.mid, target)
    if first is None or first.sign_of(end.p) is None:
        return f"no point {end.p} in M({source}, {end.mid})"
    if second is None or second.sign_of(end.q) is None:
        return f"no point {end.q} in M({end.mid}, {target})"
    return None


def require_valid(category: FlowCategory) -> None:
    report = validate(category)
    if not report.passed:
        raise InvalidCategory("; ".join(str(e) for e in report.failures()))


def boundary_matrix(category: FlowCategory, m: int) -> IntMatrix:
    """
    ∂_m with rows = objects of index m−1 and columns = objects of index m.

    Entries are signed counts n(a, b), or counts mod 2 in mod2_mode.

    Raises:
        InvalidCategory: If the category fails validation.
    """
    require_valid(category)
    return count_matrix(category, m)


def count_matrix(category: FlowCategory, m: int) -> IntMatrix:
    rows = category.objects_at(m - 1)
    cols = category.objects_at(m)
    return IntMatrix(len(rows), len(cols), tuple(
        tuple(category.count(a.id, b.id) for a in cols) for b in rows
    ))


def _pairs_with_gap(category: FlowCategory, gap: int) -> List[Tuple[FlowObject, FlowObject]]:
    return [
        (a, b)
        for a in category.objects for b in category.objects
        if a.index - b.index == gap
    ]


def d_squared_report(category: FlowCategory) -> Report:
    """
    Check ∂² = 0 pair by pair and match one-dimensional moduli ends.

    For every (a, b) with μ(a) − μ(b) = 2 the sum Σ_c n(a,c)·n(c,b) must
    vanish. Where M̄(a, b) is given, every broken flow a → c → b must end
    exactly one component and the two ends of an interval carry opposite
    product signs.
    """
    report = Report("flowcat.d_squared")
    modulus = 2 if category.mod2_mode else None

    for a, b in _pairs_with_gap(category, 2):
        total = sum(
            category.count(a.id, c.id) * category.count(c.id, b.id)
            for c in category.objects_at(a.index - 1)
        )
        if modulus:
            total %= modulus
        report.add("d_squared", total == 0, f"Σ n(a,c)·n(c,b) = {total}", (a.id, b.id))

        moduli = category.moduli1_for(a.id, b.id)
        if moduli is not None:
            _check_endpoints(category, moduli, report)
    return report


def broken_flows(category: FlowCategory, source: str, target: str) -> List[Tuple[BrokenFlow, int]]:
    """Every broken flow source → c → target with its product sign."""
    flows = []
    for c in category.objects_at(category.index_of(source) - 1):
        first = category.moduli0_for(source, c.id)
        second = category.moduli0_for(c.id, target)
        if first is None or second is None:
            continue
        for p in first.points:
            for q in second.points:
                flows.append((BrokenFlow(c.id, p.key, q.key), p.sign * q.sign))
    return flows


def _product_sign(category: FlowCategory, source: str, target: str, end: BrokenFlow) -> int:
    return (category.moduli0_for(source, end.mid).sign_of(end.p)
            * category.moduli0_for(end.mid, target).sign_of(end.q))


def _check_endpoints(category: FlowCategory, moduli: ModuliOne, report: Report) -> None:
    location = (moduli.source, moduli.target)
    expected = {flow for flow, _ in broken_flows(category, moduli.source, moduli.target)}
    found = Counter(moduli.ends())
    missing = expected - set(found)
    extra = set(found) - expected
    repeated = [end for end, n in found.items() if n > 1]
    detail = []
    if missing:
        detail.append(f"{len(missing)} broken flows end no component")
    if extra:
        detail.append(f"{len(extra)} ends are not broken flows")
    if repeated:
        detail.append(f"{len(repeated)} broken flows end two components")
    report.add("endpoint_matching", not detail, "; ".join(detail), location)
    if extra:
        return

    if category.mod2_mode:
        return
    for position, component in enumerate(moduli.components):
        if component.kind != "interval":
            continue
        first, second = component.ends
        signs = (_product_sign(category, moduli.source, moduli.target, first),
                 _product_sign(category, moduli.source, moduli.target, second))
        report.add("interval_end_signs", signs[0] == -signs[1],
                   f"end signs {signs}", location + (position,))


def morse_complex(category: FlowCategory) -> ChainComplex:
    """
    Chain complex with C_m free on objects of index m and ∂ from signed counts.

    Raises:
        InvalidCategory: If validation fails.
        DSquaredNonzero: If ∂² ≠ 0.
    """
    require_valid(category)
    indices = category.indices()
    if not indices:
        return ChainComplex()

    d_squared = d_squared_report(category)
    broken = [e for e in d_squared.checks("d_squared") if not e.passed]
    if broken:
        raise DSquaredNonzero("; ".join(str(e) for e in broken))

    ranks = {m: len(category.objects_at(m)) for m in range(indices[0], indices[-1] + 1)}
    boundaries = {m: count_matrix(category, m) for m in range(indices[0] + 1, indices[-1] + 1)}
    generators = {m: tuple(o.id for o in category.objects_at(m)) for m in ranks}
    complex_ = ChainComplex(ranks, boundaries, generators)

    failing = complex_.d_squared_failures()
    if failing and not category.mod2_mode:
        raise DSquaredNonzero(f"∂∘∂ ≠ 0 in degrees {failing}")
    logger.debug(f"Morse complex of {category.name or 'category'}: ranks {ranks}")
    return complex_


def homology(category: FlowCategory) -> Dict[int, HomologyGroup]:
    """
    Homology of the Morse complex.

    Over ℤ by default; in mod2_mode the groups are 𝔽₂ vector spaces reported
    as free ranks.
    """
    complex_ = morse_complex(category)
    if category.mod2_mode:
        return {m: HomologyGroup(rank) for m, rank in complex_.field_betti(2).items()}
    return complex_.homology()


def homology_ranks_over(category: FlowCategory, characteristic: int) -> Dict[int, int]:
    """Betti numbers over ℚ (characteristic 0) or 𝔽_p."""
    return morse_complex(category).field_betti(characteristic)


def partial_order(category: FlowCategory) -> nx.DiGraph:
    """
    Directed graph a → b whenever Mor(a, b) is nonempty in the data.

    a ≥ b in the induced partial order exactly when b is reachable from a.
    """
    graph = nx.DiGraph()
    graph.add_nodes_from(obj.id for obj in category.objects)
    for moduli in category.moduli0:
        if moduli.points:
            graph.add_edge(moduli.source, moduli.target)
    for moduli in category.moduli1:
        if moduli.components:
            graph.add_edge(moduli.source, moduli.target)
    return graph


def interval_subcategory(category: FlowCategory, upper: str, lower: str) -> FlowCategory:
    """
    Full subcategory on objects α with upper ≥ α ≥ lower.

    Raises:
        UnknownObject: If either endpoint is not an object.
    """
    for object_id in (upper, lower):
        if not category.has_object(object_id):
            raise UnknownObject(f"Unknown object: {object_id}")
    order = partial_order(category)
    above_lower = nx.ancestors(order, lower) | {lower}
    below_upper = nx.descendants(order, upper) | {upper}
    keep = above_lower & below_upper
    if not keep:
        logger.warning(f"{upper} ≱ {lower}: interval subcategory is empty")

    return FlowCategory(
        objects=tuple(o for o in category.objects if o.id in keep),
        moduli0=tuple(m for m in category.moduli0 if m.source in keep and m.target in keep),
        moduli1=tuple(m for m in category.moduli1 if m.source in keep and m.target in keep),
        mod2_mode=category.mod2_mode,
        name=f"{category.name}[{upper},{lower}]" if category.name else "",
    )


def relabel(category: FlowCategory, mapping: Mapping[str, str]) -> FlowCategory:
    """Rename object ids; ids missing from the mapping are kept."""
    rename = lambda object_id: mapping.get(object_id, object_id)
    return FlowCategory(
        objects=tuple(replace(o, id=rename(o.id)) for o in category.objects),
        moduli0=tuple(ModuliZero(rename(m.source), rename(m.target), m.points) for m in category.moduli0),
        moduli1=tuple(
            ModuliOne(rename(m.source), rename(m.target), tuple(
                c if c.kind != "interval" else Component.interval(
                    *(BrokenFlow(rename(e.mid), e.p, e.q) for e in c.ends))
                for c in m.components
            ))
            for m in category.moduli1
        ),
        mod2_mode=category.mod2_mode,
        name=category.name,
    )


def signed_counts(category: FlowCategory) -> Dict[Tuple[str, str], int]:
    """All nonzero n(a, b) keyed by pair."""
    counts = {}
    for moduli in category.moduli0:
        n = category.count(moduli.source, moduli.target)
        if n:
            counts[(moduli.source, moduli.target)] = n
    return counts


def make_category(objects, moduli0=(), moduli1=(), mod2_mode: bool = False, name: str = "") -> FlowCategory:
    """
    Convenience constructor from plain tuples.

    Args:
        objects: Iterable of (id, index).
        moduli0: Iterable of (source, target, [signs]) or (source, target, {key: sign}).
        moduli1: Iterable of ModuliOne.
    """
    def points(spec):
        if isinstance(spec, Mapping):
            return tuple(ModuliPoint(k, s) for k, s in spec.items())
        return tuple(spec)

    return FlowCategory(
        objects=tuple(FlowObject(i, idx) for i, idx in objects),
        moduli0=tuple(ModuliZero(s, t, points(p)) for s, t, p in moduli0),
        moduli1=tuple(moduli1),
        mod2_mode=mod2_mode,
        name=name,
    )


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    circle = make_category([("max", 1), ("min", 0)], [("max", "min", {"u+": 1, "u-": -1})], name="circle")
    print(validate(circle))
    for degree, group in homology(circle).items():
        print(f"H_{degree} = {group}")
