#!/usr/bin/env python3
"""
Comparison Chain Maps

Counts of mixed zero-dimensional moduli spaces between two flow categories
give a degree-preserving map Ψ of Morse complexes. This module builds Ψ,
checks the chain-map identity (numerically and, when one-dimensional mixed
moduli are given, end by end) and decides whether Ψ is a quasi-isomorphism
in two independent ways.

Usage:
    from execution.comparison import build_psi, verify_chain_map, quasi_iso_check

    psi = build_psi(data)
    if verify_chain_map(data, psi).passed:
        report = quasi_iso_check(data, psi)
"""

from collections import Counter
from typing import Dict, List, Tuple
import logging

from sympy import factorint
from sympy.polys.matrices import DomainMatrix

from execution.errors import FlowToolsError
from execution.exact_linalg import ChainComplex, IntMatrix, field_rank, invariant_factors, coefficient_field
from execution.flowcat import count_matrix, morse_complex, require_valid
from execution.models.flow_data import (
    FLOER_BREAK,
    MORSE_BREAK,
    ComparisonData,
    FlowCategory,
    MixedBreak,
    ModuliPoint,
    ModuliZero,
)
from execution.models.report import Report

logger = logging.getLogger(__name__)


class ComparisonIndexMismatch(FlowToolsError):
    """Raised when a mixed moduli table pairs objects of different index."""
    pass


IndexMismatch = ComparisonIndexMismatch


class NotAChainMap(FlowToolsError):
    """Raised when a quasi-isomorphism check is requested for a map that is not a chain map."""
    pass


def _degrees(data: ComparisonData) -> List[int]:
    return sorted(set(data.source.indices()) | set(data.target.indices()))


def build_psi(data: ComparisonData) -> Dict[int, IntMatrix]:
    """
    Ψ_m: C_m(source) → C_m(target) with entries the mixed signed counts.

    Rows are target objects of index m and columns source objects of index
    m, both ordered by id.

    Raises:
        IndexMismatch: If a mixed table joins objects of different index.
    """
    for moduli in data.mixed0:
        if not data.source.has_object(moduli.source) or not data.target.has_object(moduli.target):
            raise IndexMismatch(f"Mixed moduli ({moduli.source}, {moduli.target}) references an unknown object")
        left = data.source.index_of(moduli.source)
        right = data.target.index_of(moduli.target)
        if left != right:
            raise IndexMismatch(
                f"Mixed moduli ({moduli.source}, {moduli.target}) joins index {left} to index {right}"
            )

    psi = {}
    for m in _degrees(data):
        cols = data.source.objects_at(m)
        rows = data.target.objects_at(m)
        psi[m] = IntMatrix(len(rows), len(cols), tuple(
            tuple(data.mixed_count(a.id, beta.id) for a in cols) for beta in rows
        ))
    return psi


def verify_chain_map(data: ComparisonData, psi: Dict[int, IntMatrix]) -> Report:
    """
    Check Ψ_{m−1} ∘ ∂^source_m = ∂^target_m ∘ Ψ_m in every degree.

    A failing entry is located by (m, a, β) with a a source object of index
    m and β a target object of index m − 1. When mixed1 is present its ends
    are matched against the Morse and Floer breaks as well.
    """
    report = Report("comparison.chain_map")
    require_valid(data.source)
    require_valid(data.target)

    def psi_at(m: int) -> IntMatrix:
        stored = psi.get(m)
        if stored is not None:
            return stored
        return IntMatrix.zeros(len(data.target.objects_at(m)), len(data.source.objects_at(m)))

    for m in _degrees(data):
        left = psi_at(m - 1) @ count_matrix(data.source, m)
        right = count_matrix(data.target, m) @ psi_at(m)
        difference = left - right
        failures = difference.nonzero_positions()
        sources = data.source.objects_at(m)
        targets = data.target.objects_at(m - 1)
        for i, j in failures:
            report.add("chain_map", False, f"Ψ∂ − ∂Ψ = {difference[i, j]}", (m, sources[j].id, targets[i].id))
        if not failures:
            report.add("chain_map", True, f"degree {m}", (m,))

    if data.mixed1 is not None:
        _check_mixed_ends(data, report)
    return report


def mixed_breaks(data: ComparisonData, source: str, target: str) -> List[Tuple[MixedBreak, int]]:
    """
    All breaks of the mixed gap-one space M(source, target) with signed weight.

    Morse breaks weigh +sign(p)·sign(q) and Floer breaks −sign(p)·sign(q),
    so the weights sum to the (source, target) entry of Ψ∂ − ∂Ψ.
    """
    breaks = []
    m = data.source.index_of(source)
    for mid in data.source.objects_at(m - 1):
        first = data.source.moduli0_for(source, mid.id)
        second = data.mixed0_for(mid.id, target)
        if first and second:
            breaks.extend(
                (MixedBreak(MORSE_BREAK, mid.id, p.key, q.key), p.sign * q.sign)
                for p in first.points for q in second.points
            )
    for mid in data.target.objects_at(m):
        first = data.mixed0_for(source, mid.id)
        second = data.target.moduli0_for(mid.id, target)
        if first and second:
            breaks.extend(
                (MixedBreak(FLOER_BREAK, mid.id, p.key, q.key), -p.sign * q.sign)
                for p in first.points for q in second.points
            )
    return breaks


def _check_mixed_ends(data: ComparisonData, report: Report) -> None:
    for moduli in data.mixed1:
        location = (moduli.source, moduli.target)
        if not (data.source.has_object(moduli.source) and data.target.has_object(moduli.target)):
            report.add("mixed_ends", False, "unknown object", location)
            continue
        weights = dict(mixed_breaks(data, moduli.source, moduli.target))
        ends = Counter(end for component in moduli.components for end in component.ends)
        unmatched = set(weights) ^ set(ends)
        repeated = [end for end, n in ends.items() if n > 1]
        report.add("mixed_ends", not unmatched and not repeated,
                   f"{len(unmatched)} unmatched, {len(repeated)} repeated", location)
        for position, component in enumerate(moduli.components):
            first, second = component.ends
            if first in weights and second in weights:
                report.add("mixed_end_signs", weights[first] == -weights[second],
                           f"weights {weights[first]}, {weights[second]}", location + (position,))


def mapping_cone(data: ComparisonData, psi: Dict[int, IntMatrix]) -> ChainComplex:
    """
    Cone_n = C_{n−1}(source) ⊕ C_n(target) with ∂ = [[−∂^s, 0], [Ψ, ∂^t]].
    """
    degrees = _degrees(data)
    if not degrees:
        return ChainComplex()
    low, high = degrees[0], degrees[-1] + 1

    def sizes(n: int) -> Tuple[int, int]:
        return len(data.source.objects_at(n - 1)), len(data.target.objects_at(n))

    ranks = {n: sum(sizes(n)) for n in range(low, high + 1)}
    boundaries = {}
    for n in range(low + 1, high + 1):
        s_n, t_n = sizes(n)
        s_lo, t_lo = sizes(n - 1)
        d_source = count_matrix(data.source, n - 1)
        d_target = count_matrix(data.target, n)
        psi_block = psi.get(n - 1, IntMatrix.zeros(t_lo, s_n))
        rows = []
        for i in range(s_lo):
            rows.append([-d_source[i, j] for j in range(s_n)] + [0] * t_n)
        for i in range(t_lo):
            rows.append([psi_block[i, j] for j in range(s_n)] + [d_target[i, j] for j in range(t_n)])
        boundaries[n] = IntMatrix(ranks[n - 1], ranks[n], tuple(tuple(r) for r in rows))
    return ChainComplex(ranks, boundaries)


def _relevant_primes(data: ComparisonData, psi: Dict[int, IntMatrix]) -> List[int]:
    primes = set()
    matrices = list(psi.values())
    for category in (data.source, data.target):
        matrices += [count_matrix(category, m) for m in category.indices()]
    for matrix in matrices:
        for factor in invariant_factors(matrix):
            primes.update(factorint(factor))
    cone = mapping_cone(data, psi)
    for matrix in cone.boundaries.values():
        for factor in invariant_factors(matrix):
            primes.update(factorint(factor))
    return sorted(primes)


def _induced_rank(data: ComparisonData, psi: Dict[int, IntMatrix], m: int, characteristic: int) -> Tuple[int, int, int]:
    """(dim H_m(source), dim H_m(target), rank Ψ_*) over ℚ or 𝔽_p."""
    domain = coefficient_field(characteristic)
    d_src = count_matrix(data.source, m)
    d_src_up = count_matrix(data.source, m + 1)
    d_tgt = count_matrix(data.target, m)
    d_tgt_up = count_matrix(data.target, m + 1)
    n_src = len(data.source.objects_at(m))
    n_tgt = len(data.target.objects_at(m))

    def rank(matrix: IntMatrix) -> int:
        return field_rank(matrix.entries, matrix.shape, characteristic)

    h_src = n_src - rank(d_src) - rank(d_src_up)
    h_tgt = n_tgt - rank(d_tgt) - rank(d_tgt_up)

    if n_src == 0 or n_tgt == 0:
        return h_src, h_tgt, 0
    if d_src.rows:
        kernel = DomainMatrix(
            [[domain.convert(x) for x in row] for row in d_src.entries], d_src.shape, domain
        ).nullspace().to_Matrix()
        cycles = [[kernel[i, j] for j in range(kernel.cols)] for i in range(kernel.rows)]
    else:
        cycles = [[int(i == j) for j in range(n_src)] for i in range(n_src)]
    psi_m = psi.get(m, IntMatrix.zeros(n_tgt, n_src))
    images = [
        [sum(psi_m[i, j] * cycle[j] for j in range(n_src)) for i in range(n_tgt)]
        for cycle in cycles
    ]
    # columns: images of cycles, then target boundaries
    columns = images + [list(col) for col in zip(*d_tgt_up.entries)] if d_tgt_up.rows else images
    stacked = [[column[i] for column in columns] for i in range(n_tgt)]
    combined = field_rank(stacked, (n_tgt, len(columns)), characteristic) if columns else 0
    return h_src, h_tgt, combined - rank(d_tgt_up)


def quasi_iso_check(data: ComparisonData, psi: Dict[int, IntMatrix]) -> Report:
    """
    Decide whether Ψ induces an isomorphism on integral homology.

    The first verdict requires the mapping cone to be acyclic over ℤ. The
    second asks Ψ_* to be bijective degreewise over ℚ and over 𝔽_p for every
    prime dividing an invariant factor involved. Both verdicts are reported
    and must agree.

    Raises:
        NotAChainMap: If Ψ is not a chain map.
    """
    chain_map = verify_chain_map(data, psi)
    if not chain_map.passed:
        raise NotAChainMap("; ".join(str(e) for e in chain_map.failures()))

    report = Report("comparison.quasi_iso")
    cone = mapping_cone(data, psi)
    cone_homology = cone.homology()
    nontrivial = {n: str(g) for n, g in cone_homology.items() if not g.is_trivial}
    cone_verdict = not nontrivial
    report.add("cone_acyclic", cone_verdict, f"nonzero cone homology {nontrivial}" if nontrivial else "")

    source_h = morse_complex(data.source).homology()
    target_h = morse_complex(data.target).homology()
    for m in _degrees(data):
        same = source_h.get(m) == target_h.get(m) or (
            (source_h.get(m) is None or source_h[m].is_trivial) and
            (target_h.get(m) is None or target_h[m].is_trivial))
        report.add("homology_groups_match", same, f"{source_h.get(m, '0')} vs {target_h.get(m, '0')}", (m,))

    induced_verdict = True
    for characteristic in [0] + _relevant_primes(data, psi):
        for m in _degrees(data):
            h_src, h_tgt, rank = _induced_rank(data, psi, m, characteristic)
            ok = h_src == h_tgt == rank
            induced_verdict = induced_verdict and ok
            if not ok:
                report.add("induced_map", False,
                           f"over {'Q' if characteristic == 0 else f'F{characteristic}'}: "
                           f"dims {h_src} → {h_tgt}, rank {rank}", (m, characteristic))
    report.add("induced_map", induced_verdict, "Ψ_* bijective over every relevant field" if induced_verdict else "")
    report.add("verdicts_agree", cone_verdict == induced_verdict,
               f"cone {cone_verdict}, induced {induced_verdict}")
    return report


def induced_map_check(data: ComparisonData, psi: Dict[int, IntMatrix], characteristic: int = 0) -> Dict[int, Tuple[int, int, int]]:
    """(dim source, dim target, rank of Ψ_*) in every degree over one field."""
    return {m: _induced_rank(data, psi, m, characteristic) for m in _degrees(data)}


def identity_comparison(category: FlowCategory) -> ComparisonData:
    """Comparison of a category with itself by one positive point per object."""
    return ComparisonData(
        source=category,
        target=category,
        mixed0=tuple(ModuliZero(o.id, o.id, (ModuliPoint("id", 1),)) for o in category.objects),
    )
