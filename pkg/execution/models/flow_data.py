"""
Data models for flow categories and comparison data.

Every record mirrors one table of the canonical category file and carries
to_dict/from_dict so the file codec stays a thin layer over these classes.
Point lists are kept sorted by key so two producers that found the same
flows write the same file.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Iterable, List, Optional, Tuple
import logging

logger = logging.getLogger(__name__)

INTERVAL = "interval"
CIRCLE = "circle"


@dataclass(frozen=True)
class FlowObject:
    """Critical point (or abstract generator) with its grading index μ."""

    id: str
    index: int
    label: str = ""

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError(f"Object id must be a non-empty string, got {self.id!r}")
        if isinstance(self.index, bool) or not isinstance(self.index, int):
            raise ValueError(f"Object {self.id} index must be an integer, got {self.index!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {'id': self.id, 'index': self.index, 'label': self.label}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FlowObject':
        return cls(id=data['id'], index=data['index'], label=data.get('label', ''))


@dataclass(frozen=True)
class ModuliPoint:
    """Oriented point of a zero-dimensional moduli space."""

    key: str
    sign: int

    def to_dict(self) -> Dict[str, Any]:
        return {'key': self.key, 'sign': self.sign}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModuliPoint':
        return cls(key=str(data['key']), sign=data['sign'])


def _sorted_points(points: Iterable[Any]) -> Tuple[ModuliPoint, ...]:
    normalized = []
    for position, point in enumerate(points):
        if isinstance(point, ModuliPoint):
            normalized.append(point)
        elif isinstance(point, dict):
            normalized.append(ModuliPoint.from_dict(point))
        else:
            # bare signs get positional keys
            normalized.append(ModuliPoint(key=f"p{position}", sign=point))
    return tuple(sorted(normalized, key=lambda p: p.key))


@dataclass(frozen=True)
class ModuliZero:
    """Signed points of M(source, target) for a pair with index gap one."""

    source: str
    target: str
    points: Tuple[ModuliPoint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'points', _sorted_points(self.points))

    @property
    def signed_count(self) -> int:
        return sum(point.sign for point in self.points)

    def sign_of(self, key: str) -> Optional[int]:
        for point in self.points:
            if point.key == key:
                return point.sign
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'from': self.source,
            'to': self.target,
            'points': [point.to_dict() for point in self.points],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModuliZero':
        return cls(source=data['from'], target=data['to'], points=data.get('points', []))


@dataclass(frozen=True)
class BrokenFlow:
    """Broken flow source → mid → target given by point keys p and q."""

    mid: str
    p: str
    q: str

    def to_dict(self) -> Dict[str, Any]:
        return {'mid': self.mid, 'p': self.p, 'q': self.q}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BrokenFlow':
        return cls(mid=data['mid'], p=str(data['p']), q=str(data['q']))


@dataclass(frozen=True)
class Component:
    """Connected component of a compactified one-dimensional moduli space."""

    kind: str
    ends: Tuple[BrokenFlow, ...] = ()

    def __post_init__(self):
        if self.kind not in (INTERVAL, CIRCLE):
            raise ValueError(f"Unknown component kind: {self.kind}")
        ends = tuple(
            end if isinstance(end, BrokenFlow) else BrokenFlow.from_dict(end)
            for end in self.ends
        )
        if self.kind == INTERVAL and len(ends) != 2:
            raise ValueError(f"Interval component needs exactly two ends, got {len(ends)}")
        if self.kind == CIRCLE and ends:
            raise ValueError("Circle component has no ends")
        object.__setattr__(self, 'ends', ends)

    @classmethod
    def interval(cls, first: BrokenFlow, second: BrokenFlow) -> 'Component':
        return cls(INTERVAL, (first, second))

    @classmethod
    def circle(cls) -> 'Component':
        return cls(CIRCLE, ())

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'kind': self.kind}
        if self.kind == INTERVAL:
            data['ends'] = [end.to_dict() for end in self.ends]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Component':
        return cls(kind=data['kind'], ends=tuple(data.get('ends', ())))


@dataclass(frozen=True)
class ModuliOne:
    """Components of the compactified M̄(source, target) for an index gap of two."""

    source: str
    target: str
    components: Tuple[Component, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'components', tuple(
            comp if isinstance(comp, Component) else Component.from_dict(comp)
            for comp in self.components
        ))

    def ends(self) -> List[BrokenFlow]:
        return [end for comp in self.components for end in comp.ends]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'from': self.source,
            'to': self.target,
            'components': [comp.to_dict() for comp in self.components],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModuliOne':
        return cls(source=data['from'], target=data['to'], components=tuple(data.get('components', ())))


@dataclass(frozen=True)
class FlowCategory:
    """
    Finite framed flow category as data.

    Objects carry their index; moduli0 lists signed points for gap-one pairs
    and moduli1 lists interval/circle components for gap-two pairs. In
    mod2_mode signs are ignored and counts are taken modulo 2.
    """

    objects: Tuple[FlowObject, ...] = ()
    moduli0: Tuple[ModuliZero, ...] = ()
    moduli1: Tuple[ModuliOne, ...] = ()
    mod2_mode: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, 'objects', tuple(sorted(self.objects, key=lambda o: (o.index, o.id))))
        object.__setattr__(self, 'moduli0', tuple(sorted(self.moduli0, key=lambda m: (m.source, m.target))))
        object.__setattr__(self, 'moduli1', tuple(sorted(self.moduli1, key=lambda m: (m.source, m.target))))

    @cached_property
    def _object_map(self) -> Dict[str, FlowObject]:
        return {obj.id: obj for obj in self.objects}

    @cached_property
    def _moduli0_map(self) -> Dict[Tuple[str, str], ModuliZero]:
        return {(m.source, m.target): m for m in self.moduli0}

    @cached_property
    def _moduli1_map(self) -> Dict[Tuple[str, str], ModuliOne]:
        return {(m.source, m.target): m for m in self.moduli1}

    def has_object(self, object_id: str) -> bool:
        return object_id in self._object_map

    def get(self, object_id: str) -> Optional[FlowObject]:
        return self._object_map.get(object_id)

    def index_of(self, object_id: str) -> int:
        return self._object_map[object_id].index

    def objects_at(self, index: int) -> List[FlowObject]:
        """Objects of a given index, ordered by id."""
        return [obj for obj in self.objects if obj.index == index]

    def indices(self) -> List[int]:
        return sorted({obj.index for obj in self.objects})

    def moduli0_for(self, source: str, target: str) -> Optional[ModuliZero]:
        return self._moduli0_map.get((source, target))

    def moduli1_for(self, source: str, target: str) -> Optional[ModuliOne]:
        return self._moduli1_map.get((source, target))

    def count(self, source: str, target: str) -> int:
        """Signed count n(source, target), reduced mod 2 in mod2_mode."""
        moduli = self.moduli0_for(source, target)
        if moduli is None:
            return 0
        if self.mod2_mode:
            return len(moduli.points) % 2
        return moduli.signed_count

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'mod2_mode': self.mod2_mode,
            'objects': [obj.to_dict() for obj in self.objects],
            'moduli0': [m.to_dict() for m in self.moduli0],
            'moduli1': [m.to_dict() for m in self.moduli1],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FlowCategory':
        return cls(
            objects=tuple(FlowObject.from_dict(o) for o in data.get('objects', [])),
            moduli0=tuple(ModuliZero.from_dict(m) for m in data.get('moduli0', [])),
            moduli1=tuple(ModuliOne.from_dict(m) for m in data.get('moduli1', [])),
            mod2_mode=bool(data.get('mod2_mode', False)),
            name=data.get('name', ''),
        )


MORSE_BREAK = "morse"
FLOER_BREAK = "floer"


@dataclass(frozen=True)
class MixedBreak:
    """
    End of a mixed gap-one moduli space.

    A morse break a → mid → β uses p ∈ M(a, mid) of the source category and
    q ∈ mixed M(mid, β). A floer break a → mid → β uses p ∈ mixed M(a, mid)
    and q ∈ M(mid, β) of the target category.
    """

    kind: str
    mid: str
    p: str
    q: str

    def __post_init__(self):
        if self.kind not in (MORSE_BREAK, FLOER_BREAK):
            raise ValueError(f"Unknown mixed break kind: {self.kind}")

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'mid': self.mid, 'p': self.p, 'q': self.q}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MixedBreak':
        return cls(kind=data['kind'], mid=data['mid'], p=str(data['p']), q=str(data['q']))


@dataclass(frozen=True)
class MixedComponent:
    """Interval component of a mixed one-dimensional moduli space."""

    ends: Tuple[MixedBreak, MixedBreak]

    def __post_init__(self):
        ends = tuple(e if isinstance(e, MixedBreak) else MixedBreak.from_dict(e) for e in self.ends)
        if len(ends) != 2:
            raise ValueError(f"Mixed interval needs exactly two ends, got {len(ends)}")
        object.__setattr__(self, 'ends', ends)

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': INTERVAL, 'ends': [end.to_dict() for end in self.ends]}


@dataclass(frozen=True)
class MixedModuliOne:
    source: str
    target: str
    components: Tuple[MixedComponent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'components', tuple(
            c if isinstance(c, MixedComponent) else MixedComponent(tuple(c['ends']))
            for c in self.components
        ))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'from': self.source,
            'to': self.target,
            'components': [c.to_dict() for c in self.components],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MixedModuliOne':
        return cls(source=data['from'], target=data['to'], components=tuple(data.get('components', ())))


@dataclass(frozen=True)
class ComparisonData:
    """
    Two flow categories and the mixed moduli between them.

    mixed0 holds signed points of M(a, β) for ind(a) = μ(β); mixed1 is
    optional and, when given, is checked against the chain-map identity
    end by end.
    """

    source: FlowCategory
    target: FlowCategory
    mixed0: Tuple[ModuliZero, ...] = ()
    mixed1: Optional[Tuple[MixedModuliOne, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, 'mixed0', tuple(sorted(self.mixed0, key=lambda m: (m.source, m.target))))
        if self.mixed1 is not None:
            object.__setattr__(self, 'mixed1', tuple(sorted(self.mixed1, key=lambda m: (m.source, m.target))))

    def mixed_count(self, source: str, target: str) -> int:
        for moduli in self.mixed0:
            if moduli.source == source and moduli.target == target:
                return moduli.signed_count
        return 0

    def mixed0_for(self, source: str, target: str) -> Optional[ModuliZero]:
        for moduli in self.mixed0:
            if moduli.source == source and moduli.target == target:
                return moduli
        return None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            'target': self.target.to_dict(),
            'mixed0': [m.to_dict() for m in self.mixed0],
        }
        if self.mixed1 is not None:
            data['mixed1'] = [m.to_dict() for m in self.mixed1]
        return data

    @classmethod
    def from_dict(cls, source: FlowCategory, data: Dict[str, Any]) -> 'ComparisonData':
        mixed1 = data.get('mixed1')
        return cls(
            source=source,
            target=FlowCategory.from_dict(data['target']),
            mixed0=tuple(ModuliZero.from_dict(m) for m in data.get('mixed0', [])),
            mixed1=None if mixed1 is None else tuple(MixedModuliOne.from_dict(m) for m in mixed1),
        )
