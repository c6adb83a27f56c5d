#!/usr/bin/env python3
"""
The 𝒥 Category

Objects are integers; Mor(n, m) for n > m is the one-point compactification
of [0, ∞)^{m+1..n-1} and is empty otherwise. Composition inserts a zero
coordinate at the middle index, so the boundary face where a set S of
coordinates vanish factors uniquely into composable pieces.

Usage:
    from execution.jcat import JPoint, compose, stratum_of, face_factorization

    u = JPoint.make(5, 3, {4: 3})
    v = JPoint.make(3, 1, {2: 0})
    w = compose(u, v)                      # {t2=0, t3=0, t4=3} in J(5,1)
    pieces = face_factorization(stratum_of(w))   # [(5,3), (3,2), (2,1)]
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Tuple, Union
import logging

from execution.errors import FlowToolsError

logger = logging.getLogger(__name__)

Coordinate = Union[int, float, Fraction]


class InvalidRange(FlowToolsError):
    """Raised when a morphism set J(n, m) is requested with n ≤ m."""
    pass


class IndexMismatch(FlowToolsError):
    """Raised when composing u ∈ J(n, m) with v ∈ J(m', p) for m ≠ m'."""
    pass


class InfinityHasNoStratum(FlowToolsError):
    """Raised when asking for the boundary face of the basepoint ∞."""
    pass


def j_dimension(n: int, m: int) -> int:
    """Dimension n − m − 1 of the finite part of J(n, m)."""
    if n <= m:
        raise InvalidRange(f"J({n}, {m}) is empty: need n > m")
    return n - m - 1


@dataclass(frozen=True)
class JPoint:
    """
    Point of J(upper, lower).

    values holds t_i for upper > i > lower in increasing order of i; the
    basepoint ∞ carries no coordinates.
    """

    upper: int
    lower: int
    values: Tuple[Coordinate, ...] = ()
    is_infinity: bool = False

    def __post_init__(self):
        size = j_dimension(self.upper, self.lower)
        if self.is_infinity:
            object.__setattr__(self, 'values', ())
            return
        if len(self.values) != size:
            raise ValueError(f"J({self.upper}, {self.lower}) needs {size} coordinates, got {len(self.values)}")
        if any(t < 0 for t in self.values):
            raise ValueError(f"Coordinates of J must be non-negative, got {self.values}")

    @classmethod
    def make(cls, upper: int, lower: int, coords: Optional[Mapping[int, Coordinate]] = None) -> 'JPoint':
        """
        Build a finite point from a sparse mapping i ↦ t_i.

        Indices in the window upper > i > lower that are not given are 0;
        indices outside the window are rejected.
        """
        j_dimension(upper, lower)
        coords = dict(coords or {})
        outside = [i for i in coords if not lower < i < upper]
        if outside:
            raise ValueError(f"Coordinates {outside} lie outside the window ({lower}, {upper})")
        return cls(upper, lower, tuple(coords.get(i, 0) for i in range(lower + 1, upper)))

    @classmethod
    def infinity(cls, upper: int, lower: int) -> 'JPoint':
        return cls(upper, lower, (), True)

    @classmethod
    def origin(cls, upper: int, lower: int) -> 'JPoint':
        return cls.make(upper, lower)

    @property
    def coords(self) -> Dict[int, Coordinate]:
        return {i: t for i, t in zip(range(self.lower + 1, self.upper), self.values)}

    def t(self, i: int) -> Coordinate:
        """Coordinate t_i, which is 0 outside the window."""
        if self.is_infinity:
            raise InfinityHasNoStratum("∞ has no coordinates")
        return self.coords.get(i, 0)

    @property
    def is_basepoint(self) -> bool:
        return self.is_infinity

    def __str__(self) -> str:
        if self.is_infinity:
            return f"∞ ∈ J({self.upper},{self.lower})"
        body = ", ".join(f"t{i}={t}" for i, t in self.coords.items())
        return f"{{{body}}} ∈ J({self.upper},{self.lower})"


@dataclass(frozen=True)
class JFace:
    """Stratum of J(upper, lower) where exactly the coordinates in vanishing are 0."""

    upper: int
    lower: int
    vanishing: FrozenSet[int] = frozenset()

    def __post_init__(self):
        j_dimension(self.upper, self.lower)
        object.__setattr__(self, 'vanishing', frozenset(self.vanishing))
        stray = [i for i in self.vanishing if not self.lower < i < self.upper]
        if stray:
            raise ValueError(f"Vanishing indices {sorted(stray)} outside ({self.lower}, {self.upper})")

    @property
    def dimension(self) -> int:
        return j_dimension(self.upper, self.lower) - len(self.vanishing)

    @property
    def codimension(self) -> int:
        return len(self.vanishing)


def compose(u: JPoint, v: JPoint) -> JPoint:
    """
    Compose u ∈ J(n, m) with v ∈ J(m, p).

    The result has t_m = 0 and copies the coordinates of u above m and of v
    below m. Any composite involving ∞ is ∞.

    Raises:
        IndexMismatch: If u.lower ≠ v.upper.
    """
    if u.lower != v.upper:
        raise IndexMismatch(f"Cannot compose J({u.upper},{u.lower}) with J({v.upper},{v.lower})")
    if u.is_infinity or v.is_infinity:
        return JPoint.infinity(u.upper, v.lower)
    return JPoint(u.upper, v.lower, v.values + (0,) + u.values)


def sphere_point(n: int) -> JPoint:
    """The non-basepoint of J(n+1, n) ≅ S⁰."""
    return JPoint.make(n + 1, n)


def stratum_of(u: JPoint) -> JFace:
    if u.is_infinity:
        raise InfinityHasNoStratum(f"∞ ∈ J({u.upper},{u.lower}) lies in no boundary face")
    return JFace(u.upper, u.lower, frozenset(i for i, t in u.coords.items() if t == 0))


def face_factorization(face: JFace) -> List[Tuple[int, int]]:
    """
    Split a face into the composable factors whose composite is that face.

    With S = {s_1 > … > s_j} the result is
    [(n, s_1), (s_1, s_2), …, (s_j, p)].
    """
    breaks = [face.upper] + sorted(face.vanishing, reverse=True) + [face.lower]
    return list(zip(breaks[:-1], breaks[1:]))


def factor_point(u: JPoint) -> List[JPoint]:
    """Decompose a finite point into interior points of its face factors."""
    coords = u.coords
    return [
        JPoint.make(upper, lower, {i: coords[i] for i in range(lower + 1, upper)})
        for upper, lower in face_factorization(stratum_of(u))
    ]


# Morphism kinds of the subcategory on an integer range


def morphism_kind(n: int, m: int) -> str:
    """Name of Mor(n, m): identity, empty, sphere (S⁰) or cube."""
    if n == m:
        return "identity"
    if n < m:
        return "empty"
    if n == m + 1:
        return "sphere"
    return "cube"


def cone_depth(n: int, m: int) -> int:
    """Number of cone coordinates in Mor(n, m), i.e. its dimension."""
    return j_dimension(n, m)


def j_subcategory(upper: int, lower: int) -> Dict[str, Any]:
    """
    Summary of the full subcategory 𝒥_{[lower, upper]}.

    Returns:
        Dict with the object list and, for every ordered pair, the morphism
        kind and dimension.
    """
    if upper < lower:
        raise InvalidRange(f"Empty object range [{lower}, {upper}]")
    objects = list(range(lower, upper + 1))
    morphisms = {}
    for n in objects:
        for m in objects:
            kind = morphism_kind(n, m)
            morphisms[(n, m)] = {
                'kind': kind,
                'dimension': j_dimension(n, m) if n > m else (0 if kind == "identity" else None),
            }
    return {'objects': objects, 'morphisms': morphisms}


if __name__ == "__main__":
    u = JPoint.make(5, 3, {4: 3})
    v = JPoint.make(3, 1, {2: 0})
    w = compose(u, v)
    print(w)
    print(face_factorization(stratum_of(w)))
