"""
Unit tests for ⟨k⟩-corner complexes.
"""

from dataclasses import replace

import pytest

from execution.corners import (
    InvalidComplex,
    MissingModuliData,
    Stratum,
    face_of,
    interval,
    moduli_corner,
    point,
    product,
    rplus_model,
    signature,
    two_k_diagram,
    validate,
)
from execution.flowcat import make_category
from execution.flowcat import validate as validate_category
from execution.models.flow_data import BrokenFlow, Component, FlowObject, ModuliOne

PAIR = {"+": 1, "-": -1}


def chain_category(with_lower_family=True):
    """a(3) > c2(2) > c1(1) > b(0), every adjacent pair joined by two opposite flows."""
    def family(source, mid, target):
        return ModuliOne(source, target, (
            Component.interval(BrokenFlow(mid, "+", "+"), BrokenFlow(mid, "+", "-")),
            Component.interval(BrokenFlow(mid, "-", "+"), BrokenFlow(mid, "-", "-")),
        ))

    moduli1 = [family("a", "c2", "c1")]
    if with_lower_family:
        moduli1.append(family("c2", "c1", "b"))
    return make_category(
        [("a", 3), ("c2", 2), ("c1", 1), ("b", 0)],
        [("a", "c2", PAIR), ("c2", "c1", PAIR), ("c1", "b", PAIR)],
        moduli1,
        name="chain",
    )


def square_without_second_face():
    square = rplus_model(2)
    return replace(square, faces=(square.faces[0], frozenset()))


def violations():
    """Constructed complexes that break one axiom each."""
    segment = interval()
    return {
        "second face emptied": square_without_second_face(),
        "face count differs from k": replace(segment, k=2),
        "interior listed as a face": replace(segment, faces=(frozenset({"interior", "0", "1"}),)),
        "face names unknown stratum": replace(segment, faces=(frozenset({"0", "1", "2"}),)),
        "incidence names unknown stratum": replace(segment, incidence=segment.incidence | {("9", "interior")}),
        "incidence lowers codimension": replace(segment, incidence=frozenset({("interior", "0"), ("1", "interior")})),
        "codimension above k": replace(segment, strata=segment.strata + (Stratum("deep", 2),)),
        "endpoint in no face": replace(segment, faces=(frozenset({"0"}),)),
        "duplicate labels": replace(segment, strata=segment.strata + (Stratum("0", 1, "0"),)),
        "endpoint in two faces": replace(segment, k=2, faces=(frozenset({"0", "1"}), frozenset({"0"}))),
    }


@pytest.mark.unit
class TestValidate:
    """The ⟨k⟩ axioms."""

    @pytest.mark.parametrize("k", [0, 1, 2, 3, 4])
    def test_rplus_models_are_valid(self, k):
        report = validate(rplus_model(k))
        assert report.passed, str(report)

    def test_interval_and_point(self):
        assert validate(interval()).passed
        assert validate(point()).passed

    def test_square_without_second_face(self):
        report = validate(square_without_second_face())
        assert not report.passed
        failed = {e.check for e in report.failures()}
        assert "corner_face_count" in failed
        assert "faces_cover_boundary" in failed

    @pytest.mark.parametrize("name", sorted(violations()))
    def test_violation_catalog(self, name):
        assert not validate(violations()[name]).passed

    def test_catalog_size(self):
        assert len(violations()) == 10

    def test_unknown_reference_stops_early(self):
        report = validate(violations()["face names unknown stratum"])
        assert [e.check for e in report.entries][-1] == "references_resolve"


@pytest.mark.unit
class TestDiagram:
    """2^k diagrams of face intersections."""

    def test_quadrant(self):
        diagram = two_k_diagram(rplus_model(2))
        assert diagram[(0, 1)] == {(1,), (1, 2)}
        assert diagram[(0, 0)] == {(1, 2)}
        assert diagram[(1, 1)] == frozenset(rplus_model(2).labels())

    def test_closed_manifold(self):
        diagram = two_k_diagram(point())
        assert list(diagram.sets) == [()]

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_monotone_and_meets(self, k):
        diagram = two_k_diagram(rplus_model(k))
        assert diagram.is_monotone()
        assert diagram.respects_meets()

    def test_invalid_complex(self):
        with pytest.raises(InvalidComplex):
            two_k_diagram(square_without_second_face())


@pytest.mark.unit
class TestProduct:
    """Products of ⟨k⟩-complexes."""

    def test_square(self):
        square = product(interval(), interval())
        assert square.k == 2
        assert validate(square).passed
        assert len([s for s in square.strata if s.codim == 2]) == 4

    def test_point_is_unit(self):
        cube = rplus_model(2)
        assert signature(product(point(), cube)) == signature(cube)
        assert signature(product(cube, point())) == signature(cube)

    def test_quadrant_times_half_line(self):
        assert signature(product(rplus_model(1), rplus_model(2))) == signature(rplus_model(3))

    def test_products_stay_valid(self):
        factors = [point(), interval(), rplus_model(1), rplus_model(2), product(interval(), rplus_model(1))]
        for first in factors:
            for second in factors:
                if first.k + second.k <= 3:
                    assert validate(product(first, second)).passed

    def test_invalid_factor(self):
        with pytest.raises(InvalidComplex):
            product(interval(), square_without_second_face())

    def test_face_of(self):
        face = face_of(rplus_model(3), 1)
        assert face.k == 2
        assert validate(face).passed
        assert signature(face) == signature(rplus_model(2))


@pytest.mark.unit
class TestModuliCorner:
    """Corner structure of compactified moduli spaces."""

    def test_gap_one(self, torus_category):
        corner = moduli_corner(torus_category, "max", "s1")
        assert corner.k == 0
        assert sorted(s.label[1][0] for s in corner.strata) == ["s+", "s-"]
        assert validate(corner).passed

    def test_gap_two(self, torus_category):
        corner = moduli_corner(torus_category, "max", "min")
        assert corner.k == 1
        assert validate(corner).passed
        assert len([s for s in corner.strata if s.codim == 0]) == 4
        assert len(corner.faces[0]) == 8

    def test_circle_family(self, sphere_category):
        corner = moduli_corner(sphere_category, "north", "south")
        assert validate(corner).passed
        assert corner.faces == (frozenset(),)

    def test_gap_three(self):
        category = chain_category()
        assert validate_category(category).passed
        corner = moduli_corner(category, "a", "b")
        assert corner.k == 2
        report = validate(corner)
        assert report.passed, str(report)
        corners = [s for s in corner.strata if s.codim == 2]
        assert len(corners) == 8
        assert all(s.label[0] == ("a", "c2", "c1", "b") for s in corners)

    def test_chains_follow_the_order(self):
        category = chain_category()
        category = replace(category, objects=category.objects + (FlowObject("d", 1),))
        corner = moduli_corner(category, "a", "b")
        assert {s.label[0] for s in corner.strata} == {
            ("a", "b"), ("a", "c2", "b"), ("a", "c1", "b"), ("a", "c2", "c1", "b"),
        }
        assert [len(s.label[0]) for s in corner.strata] == sorted(len(s.label[0]) for s in corner.strata)

    def test_missing_family(self):
        with pytest.raises(MissingModuliData):
            moduli_corner(chain_category(with_lower_family=False), "a", "b")

    def test_wrong_order(self, torus_category):
        with pytest.raises(ValueError):
            moduli_corner(torus_category, "min", "max")
