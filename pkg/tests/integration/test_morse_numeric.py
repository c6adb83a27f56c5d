"""
Integration tests for the numeric Morse generator.

These run the full pipeline (Newton search, flow integration, shooting)
on the built-in examples, so most of them are marked slow.
"""

import math
from itertools import product

import numpy as np
import pytest

from execution.comparison import build_psi, quasi_iso_check, verify_chain_map
from execution.flowcat import d_squared_report, homology, validate
from execution.models.flow_data import CIRCLE
from execution.morse_numeric import (
    DegenerateCriticalPoint,
    PreconditionError,
    build_comparison,
    build_flow_category,
    connecting_orbits,
    find_critical_points,
    gap2_moduli,
    integrate_flow,
    mixed_moduli,
    trajectory_dump,
)
from execution.surfaces import (
    broken_geodesic_loopspace,
    circle,
    monkey_saddle_torus,
    sphere,
    three_torus,
    tilted_torus,
    torus,
)


def group_names(category):
    return {d: str(g) for d, g in homology(category).items()}


@pytest.mark.integration
class TestCriticalPoints:
    """Newton search and classification."""

    def test_circle(self):
        points = find_critical_points(circle())
        assert [p.id for p in points] == ["x1_0", "x0_0"]
        assert points[0].coords[0] == pytest.approx(math.pi / 2, abs=1e-8)
        assert points[1].coords[0] == pytest.approx(-math.pi / 2, abs=1e-8)
        assert points[0].value == pytest.approx(1.0)

    def test_sphere(self):
        points = find_critical_points(sphere())
        assert [p.index for p in points] == [2, 0]
        assert np.allclose(points[0].coords, [0.0, 0.0, 1.0], atol=1e-8)
        assert np.allclose(points[1].coords, [0.0, 0.0, -1.0], atol=1e-8)

    def test_sphere_top_frame_is_positive(self):
        surface = sphere()
        top = find_critical_points(surface)[0]
        assert surface.orientation_sign(top.coords, top.unstable_frame) == 1

    def test_torus(self):
        points = find_critical_points(torus())
        assert [p.index for p in points] == [2, 1, 1, 0]
        assert points[1].value > points[2].value

    def test_seed_does_not_change_result(self):
        first = find_critical_points(circle(), seed=0)
        second = find_critical_points(circle(), seed=9)
        assert [p.id for p in first] == [p.id for p in second]
        assert all(np.allclose(a.coords, b.coords, atol=1e-8) for a, b in zip(first, second))

    def test_degenerate_point(self):
        with pytest.raises(DegenerateCriticalPoint) as excinfo:
            find_critical_points(monkey_saddle_torus())
        assert excinfo.value.smallest < 1e-6

    def test_to_dict(self):
        record = find_critical_points(circle())[0].to_dict()
        assert record['id'] == "x1_0"
        assert record['index'] == 1
        assert len(record['coords']) == 1


@pytest.mark.integration
class TestFlow:
    """Trajectories between critical points."""

    def test_start_at_critical_point(self):
        surface = circle()
        points = find_critical_points(surface)
        trajectory = integrate_flow(surface, points[1].coords, points)
        assert trajectory.length == 0
        assert trajectory.arrival == "x0_0"

    def test_descending_flow_is_monotone(self):
        surface = circle()
        points = find_critical_points(surface)
        trajectory = integrate_flow(surface, np.array([0.3]), points)
        assert trajectory.arrival == "x0_0"
        assert trajectory.arrival_distance <= 1e-6
        assert trajectory.is_monotone()

    def test_ascending_flow(self):
        surface = sphere()
        points = find_critical_points(surface)
        trajectory = integrate_flow(surface, np.array([0.6, 0.0, 0.8]), points, direction=-1)
        assert trajectory.arrival == points[0].id
        assert trajectory.is_monotone()
        assert all(surface.constraint_residual(x) < 1e-8 for x in trajectory.samples)

    def test_to_frame(self):
        surface = circle()
        points = find_critical_points(surface)
        frame = integrate_flow(surface, np.array([0.3]), points).to_frame()
        assert list(frame.columns) == ['step', 'value', 'x0']
        assert frame['step'].iloc[0] == 0

    def test_circle_orbits_cancel(self):
        surface = circle()
        top, bottom = find_critical_points(surface)
        table = connecting_orbits(surface, top, bottom, [top, bottom])
        assert sorted((p.key, p.sign) for p in table.points) == [("u+", 1), ("u-", -1)]
        assert table.signed_count == 0

    def test_wrong_gap(self):
        surface = sphere()
        top, bottom = find_critical_points(surface)
        with pytest.raises(PreconditionError):
            connecting_orbits(surface, top, bottom, [top, bottom])
        with pytest.raises(PreconditionError):
            gap2_moduli(surface, top, top, [top, bottom])

    def test_sphere_family_is_a_circle(self):
        surface = sphere()
        top, bottom = find_critical_points(surface)
        family = gap2_moduli(surface, top, bottom, [top, bottom])
        assert len(family.components) == 1
        assert family.components[0].kind == CIRCLE

    def test_torus_family_breaks_at_both_saddles(self):
        surface = torus()
        points = find_critical_points(surface)
        top, bottom = points[0], points[-1]
        family = gap2_moduli(surface, top, bottom, points)
        ends = [(e.mid, e.p, e.q) for component in family.components for e in component.ends]
        assert len(family.components) == 4
        assert sorted(ends) == sorted(product(("x1_0", "x1_1"), ("s+", "s-"), ("u+", "u-")))

    def test_tilted_torus_family_matches_orbit_signs(self):
        surface = tilted_torus()
        points = find_critical_points(surface)
        top, bottom = points[0], points[-1]
        signs = {}
        for c in points[1:3]:
            for p in connecting_orbits(surface, top, c, points).points:
                for q in connecting_orbits(surface, c, bottom, points).points:
                    signs[(c.id, p.key, q.key)] = p.sign * q.sign
        family = gap2_moduli(surface, top, bottom, points)
        for component in family.components:
            first, second = component.ends
            assert signs[(first.mid, first.p, first.q)] == -signs[(second.mid, second.p, second.q)]


@pytest.mark.integration
@pytest.mark.slow
class TestFlowCategories:
    """Generated categories and their homology."""

    def test_circle(self):
        category = build_flow_category(circle())
        assert validate(category).passed
        assert group_names(category) == {0: "Z", 1: "Z"}

    def test_sphere(self):
        category = build_flow_category(sphere())
        assert group_names(category) == {0: "Z", 1: "0", 2: "Z"}
        assert category.moduli0 == ()
        assert len(category.moduli1) == 1

    def test_torus(self):
        category = build_flow_category(torus(), jobs=2)
        assert len(category.objects) == 4
        assert d_squared_report(category).passed
        assert group_names(category) == {0: "Z", 1: "Z^2", 2: "Z"}

    def test_jobs_do_not_change_result(self):
        assert build_flow_category(circle(), jobs=1) == build_flow_category(circle(), jobs=3)

    @pytest.mark.parametrize("k, winding", [(2, 0), (2, 1), (3, 0), (3, 1)])
    def test_loop_space_sectors(self, k, winding):
        category = build_flow_category(broken_geodesic_loopspace(k, winding, 0.1))
        assert [o.index for o in category.objects] == [0, 1]
        assert group_names(category) == {0: "Z", 1: "Z"}

    def test_trajectory_dump(self, tmp_path):
        trajectories = {}
        build_flow_category(circle(), trajectories=trajectories)
        written = trajectory_dump(trajectories, str(tmp_path / "dumps"))
        assert len(written) == len(trajectories) == 2
        assert all(path.suffix == ".tsv" for path in written)
        assert written[0].read_text(encoding='utf-8').startswith("step\tvalue\tx0")


@pytest.mark.integration
@pytest.mark.slow
class TestThreeTorus:
    """Orbits out of index-two points in dimension three."""

    def test_critical_points(self):
        surface = three_torus()
        points = find_critical_points(surface)
        assert [p.index for p in points] == [3, 2, 2, 2, 1, 1, 1, 0]
        assert surface.distance(points[1].coords, np.array([0.0, 0.0, math.pi])) < 1e-8
        assert surface.distance(points[4].coords, np.array([0.0, math.pi, math.pi])) < 1e-8

    def test_orbits_into_index_one(self):
        surface = three_torus()
        points = find_critical_points(surface)
        table = connecting_orbits(surface, points[1], points[4], points)
        assert sorted(p.sign for p in table.points) == [-1, 1]
        assert table.signed_count == 0

    def test_no_orbit_across_two_coordinates(self):
        surface = three_torus()
        points = find_critical_points(surface)
        assert connecting_orbits(surface, points[1], points[6], points).points == ()

    def test_homology(self):
        category = build_flow_category(three_torus(), jobs=4)
        assert d_squared_report(category).passed
        assert group_names(category) == {0: "Z", 1: "Z^3", 2: "Z^3", 3: "Z"}


@pytest.mark.integration
@pytest.mark.slow
class TestComparison:
    """Mixed counts between two functions on one manifold."""

    def test_torus_against_tilted_torus(self):
        data = build_comparison(torus(), tilted_torus())
        psi = build_psi(data)
        assert verify_chain_map(data, psi).passed
        report = quasi_iso_check(data, psi)
        assert report.passed, str(report)

    def test_circle_against_itself(self):
        surface = circle()
        points = find_critical_points(surface)
        tables = mixed_moduli(surface, surface, points, points)
        assert {(m.source, m.target) for m in tables} == {("x1_0", "x1_0"), ("x0_0", "x0_0")}

    def test_manifold_mismatch(self):
        with pytest.raises(PreconditionError):
            build_comparison(sphere(), torus())
        with pytest.raises(PreconditionError):
            mixed_moduli(circle(), sphere(), [], [])
