#!/usr/bin/env python3
"""
Exact Integer Linear Algebra

Integer matrices, Smith normal form with transforms, homology of a single
degree, and graded chain complexes. Entries are Python ints so nothing
overflows; field ranks (ℚ and 𝔽_p) go through sympy's DomainMatrix.

Usage:
    from execution.exact_linalg import IntMatrix, smith_normal_form, homology_at

    d, u, v = smith_normal_form(IntMatrix.from_rows([[2, 4], [6, 8]]))
    group = homology_at(IntMatrix.zeros(1, 0), IntMatrix.zeros(0, 1))
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

from sympy.polys.domains import GF, QQ
from sympy.polys.matrices import DomainMatrix

from execution.errors import FlowToolsError

logger = logging.getLogger(__name__)


class CompositionNonzero(FlowToolsError):
    """Raised when d_out ∘ d_in is not the zero map."""
    pass


@dataclass(frozen=True)
class IntMatrix:
    """Immutable integer matrix with explicit shape (either side may be 0)."""

    rows: int
    cols: int
    entries: Tuple[Tuple[int, ...], ...] = ()

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError(f"Matrix shape must be non-negative, got {self.rows}x{self.cols}")
        entries = self.entries or tuple(() for _ in range(self.rows))
        if self.cols == 0:
            entries = tuple(() for _ in range(self.rows))
        if len(entries) != self.rows or any(len(row) != self.cols for row in entries):
            raise ValueError(f"Entries do not match shape {self.rows}x{self.cols}")
        object.__setattr__(self, 'entries', tuple(tuple(int(x) for x in row) for row in entries))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], cols: Optional[int] = None) -> 'IntMatrix':
        rows = [list(row) for row in rows]
        if cols is None:
            cols = len(rows[0]) if rows else 0
        return cls(len(rows), cols, tuple(tuple(row) for row in rows))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> 'IntMatrix':
        return cls(rows, cols, tuple(tuple(0 for _ in range(cols)) for _ in range(rows)))

    @classmethod
    def identity(cls, n: int) -> 'IntMatrix':
        return cls(n, n, tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    def __getitem__(self, position: Tuple[int, int]) -> int:
        i, j = position
        return self.entries[i][j]

    def __matmul__(self, other: 'IntMatrix') -> 'IntMatrix':
        if self.cols != other.rows:
            raise ValueError(f"Cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        columns = list(zip(*other.entries)) if other.rows else [() for _ in range(other.cols)]
        return IntMatrix(self.rows, other.cols, tuple(
            tuple(sum(a * b for a, b in zip(row, col)) for col in columns)
            for row in self.entries
        ))

    def __add__(self, other: 'IntMatrix') -> 'IntMatrix':
        if self.shape != other.shape:
            raise ValueError(f"Shape mismatch {self.shape} vs {other.shape}")
        return IntMatrix(self.rows, self.cols, tuple(
            tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self.entries, other.entries)
        ))

    def __neg__(self) -> 'IntMatrix':
        return IntMatrix(self.rows, self.cols, tuple(tuple(-a for a in row) for row in self.entries))

    def __sub__(self, other: 'IntMatrix') -> 'IntMatrix':
        return self + (-other)

    def transpose(self) -> 'IntMatrix':
        return IntMatrix(self.cols, self.rows, tuple(zip(*self.entries)) if self.rows else
                         tuple(() for _ in range(self.cols)))

    def is_zero(self) -> bool:
        return all(x == 0 for row in self.entries for x in row)

    def nonzero_positions(self) -> List[Tuple[int, int]]:
        return [(i, j) for i, row in enumerate(self.entries) for j, x in enumerate(row) if x != 0]

    def diagonal(self) -> List[int]:
        return [self.entries[i][i] for i in range(min(self.rows, self.cols))]

    def with_entry(self, i: int, j: int, value: int) -> 'IntMatrix':
        rows = [list(row) for row in self.entries]
        rows[i][j] = value
        return IntMatrix.from_rows(rows, self.cols)

    def reduced(self, modulus: int) -> 'IntMatrix':
        return IntMatrix(self.rows, self.cols, tuple(tuple(x % modulus for x in row) for row in self.entries))

    def to_lists(self) -> List[List[int]]:
        return [list(row) for row in self.entries]


@dataclass(frozen=True)
class HomologyGroup:
    """Finitely generated abelian group ℤ^free_rank ⊕ ⊕ ℤ/t with t > 1 dividing chain."""

    free_rank: int = 0
    torsion: Tuple[int, ...] = ()

    @property
    def is_trivial(self) -> bool:
        return self.free_rank == 0 and not self.torsion

    def to_dict(self) -> Dict[str, Any]:
        return {'free_rank': self.free_rank, 'torsion': list(self.torsion)}

    def __str__(self) -> str:
        parts = []
        if self.free_rank == 1:
            parts.append("Z")
        elif self.free_rank > 1:
            parts.append(f"Z^{self.free_rank}")
        parts.extend(f"Z/{t}" for t in self.torsion)
        return " + ".join(parts) if parts else "0"


def _swap_rows(a: List[List[int]], u: List[List[int]], i: int, j: int) -> None:
    if i != j:
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]


def _swap_cols(a: List[List[int]], v: List[List[int]], i: int, j: int) -> None:
    if i != j:
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]


def _add_row(a: List[List[int]], u: List[List[int]], target: int, source: int, factor: int) -> None:
    """row_target += factor · row_source, mirrored on U."""
    a[target] = [x + factor * y for x, y in zip(a[target], a[source])]
    u[target] = [x + factor * y for x, y in zip(u[target], u[source])]


def _add_col(a: List[List[int]], v: List[List[int]], target: int, source: int, factor: int) -> None:
    for row in a:
        row[target] += factor * row[source]
    for row in v:
        row[target] += factor * row[source]


def _smallest_entry(a: List[List[int]], t: int, cross_only: bool = False) -> Optional[Tuple[int, int]]:
    """Position of the smallest nonzero |entry| in the lower-right block (or in row/column t)."""
    best = None
    m, n = len(a), len(a[0]) if a else 0
    if cross_only:
        candidates = [(t, j) for j in range(t, n)] + [(i, t) for i in range(t + 1, m)]
    else:
        candidates = ((i, j) for i in range(t, m) for j in range(t, n))
    for i, j in candidates:
        x = a[i][j]
        if x and (best is None or abs(x) < abs(a[best[0]][best[1]])):
            best = (i, j)
    return best


def smith_normal_form(matrix: IntMatrix) -> Tuple[IntMatrix, IntMatrix, IntMatrix]:
    """
    Compute D = U·M·V with U, V unimodular and D diagonal.

    The diagonal is non-negative and each nonzero entry divides the next;
    zeros come last.

    Args:
        matrix: Integer matrix of any shape, including empty ones.

    Returns:
        Tuple (D, U, V).
    """
    m, n = matrix.rows, matrix.cols
    a = matrix.to_lists()
    u = IntMatrix.identity(m).to_lists()
    v = IntMatrix.identity(n).to_lists()

    for t in range(min(m, n)):
        pivot = _smallest_entry(a, t)
        if pivot is None:
            break
        _swap_rows(a, u, t, pivot[0])
        _swap_cols(a, v, t, pivot[1])

        while True:
            cleared = True
            for i in range(t + 1, m):
                if a[i][t]:
                    _add_row(a, u, i, t, -(a[i][t] // a[t][t]))
                    cleared = cleared and a[i][t] == 0
            for j in range(t + 1, n):
                if a[t][j]:
                    _add_col(a, v, j, t, -(a[t][j] // a[t][t]))
                    cleared = cleared and a[t][j] == 0
            if not cleared:
                # a remainder is now smaller than the pivot
                i, j = _smallest_entry(a, t, cross_only=True)
                _swap_rows(a, u, t, i)
                _swap_cols(a, v, t, j)
                continue

            offending = next(
                (i for i in range(t + 1, m) for j in range(t + 1, n) if a[i][j] % a[t][t]),
                None,
            )
            if offending is None:
                break
            _add_row(a, u, t, offending, 1)

        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            u[t] = [-x for x in u[t]]

    return (
        IntMatrix.from_rows(a, n),
        IntMatrix.from_rows(u, m),
        IntMatrix.from_rows(v, n),
    )


def invariant_factors(matrix: IntMatrix) -> List[int]:
    """Nonzero diagonal entries of the Smith normal form."""
    d, _, _ = smith_normal_form(matrix)
    return [x for x in d.diagonal() if x != 0]


def _rank(matrix: IntMatrix) -> int:
    return len(invariant_factors(matrix))


def homology_at(d_in: IntMatrix, d_out: IntMatrix) -> HomologyGroup:
    """
    Homology ker(d_out) / im(d_in) of C_{m+1} → C_m → C_{m-1}.

    Args:
        d_in: Matrix of C_{m+1} → C_m (rows = rank C_m).
        d_out: Matrix of C_m → C_{m-1} (cols = rank C_m).

    Returns:
        HomologyGroup with free rank and torsion coefficients.

    Raises:
        CompositionNonzero: If d_out · d_in ≠ 0.
    """
    if d_in.rows != d_out.cols:
        raise ValueError(f"Ambient ranks disagree: d_in has {d_in.rows} rows, d_out has {d_out.cols} columns")
    if not (d_out @ d_in).is_zero():
        raise CompositionNonzero("d_out ∘ d_in is not zero")

    ambient = d_in.rows
    kernel_rank = ambient - _rank(d_out)
    factors = invariant_factors(d_in)
    return HomologyGroup(
        free_rank=kernel_rank - len(factors),
        torsion=tuple(x for x in factors if x > 1),
    )


# Field ranks


def coefficient_field(characteristic: int):
    """sympy domain for ℚ (characteristic 0) or 𝔽_p."""
    if characteristic == 0:
        return QQ
    return GF(characteristic, symmetric=False)


def field_rank(rows: Sequence[Sequence[Any]], shape: Tuple[int, int], characteristic: int) -> int:
    """Rank of an integer (or field-element) matrix over ℚ or 𝔽_p."""
    m, n = shape
    if m == 0 or n == 0:
        return 0
    domain = coefficient_field(characteristic)
    converted = [[_to_field(domain, x) for x in row] for row in rows]
    return DomainMatrix(converted, (m, n), domain).rank()


def _to_field(domain, value):
    try:
        return domain.convert(value)
    except Exception:
        return domain(value)


def rank_over(matrix: IntMatrix, characteristic: int) -> int:
    return field_rank(matrix.entries, matrix.shape, characteristic)


@dataclass(frozen=True)
class ChainComplex:
    """
    Graded free abelian groups with boundary matrices ∂_m: C_m → C_{m-1}.

    Missing boundaries are zero maps of the right shape; generator labels
    record which object each basis vector comes from.
    """

    ranks: Dict[int, int] = field(default_factory=dict)
    boundaries: Dict[int, IntMatrix] = field(default_factory=dict)
    generators: Dict[int, Tuple[str, ...]] = field(default_factory=dict)

    def degrees(self) -> List[int]:
        return sorted(m for m, r in self.ranks.items() if r > 0)

    def rank(self, m: int) -> int:
        return self.ranks.get(m, 0)

    def boundary(self, m: int) -> IntMatrix:
        stored = self.boundaries.get(m)
        if stored is not None:
            return stored
        return IntMatrix.zeros(self.rank(m - 1), self.rank(m))

    def d_squared_failures(self) -> List[int]:
        """Degrees m where ∂_{m-1} ∘ ∂_m ≠ 0."""
        return [m for m in sorted(self.boundaries) if not (self.boundary(m - 1) @ self.boundary(m)).is_zero()]

    def homology(self) -> Dict[int, HomologyGroup]:
        degrees = self.degrees()
        if not degrees:
            return {}
        return {
            m: homology_at(self.boundary(m + 1), self.boundary(m))
            for m in range(degrees[0], degrees[-1] + 1)
        }

    def field_betti(self, characteristic: int) -> Dict[int, int]:
        """Betti numbers over ℚ (0) or 𝔽_p."""
        degrees = self.degrees()
        if not degrees:
            return {}
        betti = {}
        for m in range(degrees[0], degrees[-1] + 1):
            kernel = self.rank(m) - rank_over(self.boundary(m), characteristic)
            betti[m] = kernel - rank_over(self.boundary(m + 1), characteristic)
        return betti

    def shifted(self, k: int) -> 'ChainComplex':
        return ChainComplex(
            ranks={m + k: r for m, r in self.ranks.items()},
            boundaries={m + k: b for m, b in self.boundaries.items()},
            generators={m + k: g for m, g in self.generators.items()},
        )


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    d, u, v = smith_normal_form(IntMatrix.from_rows([[2, 4], [6, 8]]))
    print(f"D = {d.to_lists()}  U = {u.to_lists()}  V = {v.to_lists()}")
    print(homology_at(IntMatrix.from_rows([[2]]), IntMatrix.zeros(0, 1)))
