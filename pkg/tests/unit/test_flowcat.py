"""
Unit tests for flow categories and their Morse complexes.
"""

from dataclasses import replace
import random

import pytest

from execution.exact_linalg import IntMatrix, homology_at, invariant_factors, smith_normal_form
from execution.flowcat import (
    DSquaredNonzero,
    InvalidCategory,
    UnknownObject,
    boundary_matrix,
    broken_flows,
    d_squared_report,
    homology,
    homology_ranks_over,
    interval_subcategory,
    make_category,
    morse_complex,
    partial_order,
    relabel,
    signed_counts,
    validate,
)
from execution.models.flow_data import BrokenFlow, Component, ModuliOne, ModuliPoint, ModuliZero


def groups_as_text(groups):
    return {m: str(g) for m, g in groups.items()}


def kernel_columns(d_out, n, rng, cols):
    """Random integer columns lying in ker(d_out)."""
    _, _, v = smith_normal_form(d_out)
    rank = len(invariant_factors(d_out))
    kernel = [[v[i, j] for i in range(n)] for j in range(rank, n)]
    rows = [[0] * cols for _ in range(n)]
    for c in range(cols):
        for vec in kernel:
            k = rng.randint(-2, 2)
            for i in range(n):
                rows[i][c] += k * vec[i]
    return IntMatrix.from_rows(rows, cols)


def category_from_matrices(d1, d2, rng):
    """Three-level category whose signed counts are the given ∂₁ and ∂₂ entries."""
    level0 = [f"z{i}" for i in range(d1.rows)]
    level1 = [f"y{i}" for i in range(d1.cols)]
    level2 = [f"x{i}" for i in range(d2.cols)]
    objects = [(o, 0) for o in level0] + [(o, 1) for o in level1] + [(o, 2) for o in level2]

    def points(n):
        signs = [1 if n > 0 else -1] * abs(n)
        extra = rng.randint(0, 1)
        signs += [1, -1] * extra
        rng.shuffle(signs)
        return {f"k{i}": s for i, s in enumerate(signs)}

    moduli0 = []
    for matrix, rows, cols in ((d1, level0, level1), (d2, level1, level2)):
        for i, target in enumerate(rows):
            for j, source in enumerate(cols):
                spec = points(matrix[i, j])
                if spec:
                    moduli0.append((source, target, spec))
    return make_category(objects, moduli0, name="random")


@pytest.mark.unit
class TestValidate:
    """Structural validation."""

    def test_fixtures_are_valid(self, torus_category, sphere_category, circle_category, rp2_category):
        for category in (torus_category, sphere_category, circle_category, rp2_category):
            assert validate(category).passed, str(validate(category))

    def test_empty_category(self, empty_category):
        assert validate(empty_category).passed
        assert homology(empty_category) == {}

    def test_zero_count_pairs_are_allowed(self, circle_category):
        assert circle_category.count("max", "min") == 0
        assert validate(circle_category).passed

    def test_gap_two_points_rejected(self):
        category = make_category([("a", 2), ("b", 0)], [("a", "b", {"p": 1})])
        report = validate(category)
        assert not report.passed
        assert [e.location for e in report.failures()] == [("a", "b")]

    def test_unknown_object(self):
        category = make_category([("a", 1)], [("a", "ghost", {"p": 1})])
        assert [e.check for e in validate(category).failures()] == ["moduli_references"]

    def test_duplicate_ids(self):
        assert not validate(make_category([("a", 1), ("a", 0)])).passed

    def test_sign_outside_unit(self):
        category = make_category([("a", 1), ("b", 0)], [("a", "b", {"p": 2})])
        assert "point_signs" in {e.check for e in validate(category).failures()}

    def test_broken_flow_references(self, torus_category):
        bogus = ModuliOne("max", "min", (Component.interval(
            BrokenFlow("s1", "s+", "u+"), BrokenFlow("s1", "nope", "u+")),))
        category = replace(torus_category, moduli1=(bogus,))
        assert "broken_flow_references" in {e.check for e in validate(category).failures()}

    def test_finite_type_reports_longest_chain(self, torus_category):
        entry = next(e for e in validate(torus_category).entries if e.check == "finite_type")
        assert entry.passed
        assert entry.detail == "4 objects, longest chain 2"

    def test_cyclic_data_is_not_finite_type(self):
        category = make_category([("a", 1), ("b", 0)], [("a", "b", {"p": 1}), ("b", "a", {"q": 1})])
        failed = {e.check: e for e in validate(category).failures()}
        assert "finite_type" in failed
        assert set(failed["finite_type"].location) == {"a", "b"}

    def test_require_valid(self):
        with pytest.raises(InvalidCategory):
            boundary_matrix(make_category([("a", 2), ("b", 0)], [("a", "b", {"p": 1})]), 2)


@pytest.mark.unit
class TestBoundary:
    """Boundary matrices and ∂² = 0."""

    def test_boundary_matrices(self, torus_category, rp2_category):
        assert boundary_matrix(torus_category, 1).to_lists() == [[0, 0]]
        assert boundary_matrix(torus_category, 2).to_lists() == [[0], [0]]
        assert boundary_matrix(rp2_category, 2).to_lists() == [[2]]

    def test_bare_signs(self):
        category = make_category([("a", 1), ("b", 0)], [("a", "b", [1, 1, -1])])
        assert [p.key for p in category.moduli0[0].points] == ["p0", "p1", "p2"]
        assert boundary_matrix(category, 1).to_lists() == [[1]]

    def test_torus_d_squared(self, torus_category):
        report = d_squared_report(torus_category)
        assert report.passed, str(report)
        assert len(report.checks("interval_end_signs")) == 4

    def test_broken_category(self, broken_category):
        report = d_squared_report(broken_category)
        failure = report.failures()[0]
        assert failure.location == ("a", "c")
        assert failure.detail == "Σ n(a,c)·n(c,b) = 1"
        with pytest.raises(DSquaredNonzero):
            morse_complex(broken_category)

    def test_missing_moduli_one_skips_endpoints(self, torus_category):
        report = d_squared_report(replace(torus_category, moduli1=()))
        assert report.passed
        assert report.checks("endpoint_matching") == []

    def test_sign_flip_breaks_interval_signs(self, torus_category):
        flipped = tuple(
            ModuliZero(m.source, m.target, tuple(
                ModuliPoint(p.key, 1) if (m.source, p.key) == ("s1", "u-") else p for p in m.points))
            for m in torus_category.moduli0
        )
        category = replace(torus_category, moduli0=flipped)
        report = d_squared_report(category)
        assert report.checks("d_squared")[0].passed
        assert not all(e.passed for e in report.checks("interval_end_signs"))

    def test_deleted_component_breaks_matching(self, torus_category, torus_components):
        category = replace(torus_category, moduli1=(ModuliOne("max", "min", torus_components[1:]),))
        report = d_squared_report(category)
        assert [e.check for e in report.failures()] == ["endpoint_matching"]

    def test_broken_flows(self, torus_category):
        flows = broken_flows(torus_category, "max", "min")
        assert len(flows) == 8
        assert sum(sign for _, sign in flows) == 0


@pytest.mark.unit
class TestHomology:
    """Homology over ℤ and fields."""

    def test_sphere(self, sphere_category):
        assert groups_as_text(homology(sphere_category)) == {0: "Z", 1: "0", 2: "Z"}

    def test_torus(self, torus_category):
        assert groups_as_text(homology(torus_category)) == {0: "Z", 1: "Z^2", 2: "Z"}

    def test_circle(self, circle_category):
        assert groups_as_text(homology(circle_category)) == {0: "Z", 1: "Z"}

    def test_rp2(self, rp2_category):
        assert groups_as_text(homology(rp2_category)) == {0: "Z", 1: "Z/2", 2: "0"}
        assert homology_ranks_over(rp2_category, 0) == {0: 1, 1: 0, 2: 0}
        assert homology_ranks_over(rp2_category, 2) == {0: 1, 1: 1, 2: 1}

    def test_rp2_mod2_mode(self, rp2_category):
        groups = homology(replace(rp2_category, mod2_mode=True))
        assert {m: g.free_rank for m, g in groups.items()} == {0: 1, 1: 1, 2: 1}

    def test_acyclic_interval(self, interval_category):
        assert all(g.is_trivial for g in homology(interval_category).values())

    def test_single_object(self, single_object_category):
        assert groups_as_text(homology(single_object_category)) == {0: "Z"}

    def test_relabel_invariance(self, torus_category):
        renamed = relabel(torus_category, {"s1": "zeta", "s2": "alpha", "max": "top"})
        assert validate(renamed).passed
        assert d_squared_report(renamed).passed
        assert groups_as_text(homology(renamed)) == groups_as_text(homology(torus_category))

    def test_random_categories(self):
        """Signed counts reproduce a random complex with ∂∘∂ = 0."""
        rng = random.Random(314)
        for _ in range(200):
            n0, n1, n2 = rng.randint(0, 3), rng.randint(1, 3), rng.randint(1, 3)
            d1 = IntMatrix.from_rows([[rng.randint(-2, 2) for _ in range(n1)] for _ in range(n0)], n1)
            d2 = kernel_columns(d1, n1, rng, n2)
            category = category_from_matrices(d1, d2, rng)

            assert validate(category).passed
            assert d_squared_report(category).passed
            complex_ = morse_complex(category)
            assert complex_.boundary(1) == d1
            assert complex_.boundary(2) == d2
            groups = homology(category)
            assert groups[1] == homology_at(d2, d1)
            assert groups[2] == homology_at(IntMatrix.zeros(n2, 0), d2)


@pytest.mark.unit
class TestSubcategories:
    """Partial order and interval subcategories."""

    def test_partial_order(self, torus_category):
        order = partial_order(torus_category)
        assert set(order.successors("max")) == {"s1", "s2", "min"}
        assert set(order.successors("min")) == set()

    def test_zero_count_still_orders(self, circle_category):
        assert partial_order(circle_category).has_edge("max", "min")

    def test_interval_subcategory(self, torus_category):
        sub = interval_subcategory(torus_category, "s1", "min")
        assert [o.id for o in sub.objects] == ["min", "s1"]
        assert [(m.source, m.target) for m in sub.moduli0] == [("s1", "min")]
        assert sub.moduli1 == ()
        assert sub.name == "torus[s1,min]"

    def test_whole_interval(self, torus_category):
        sub = interval_subcategory(torus_category, "max", "min")
        assert len(sub.objects) == 4
        assert len(sub.moduli1) == 1

    def test_incomparable_is_empty(self, torus_category):
        assert interval_subcategory(torus_category, "s1", "s2").objects == ()

    def test_unknown_object(self, torus_category):
        with pytest.raises(UnknownObject):
            interval_subcategory(torus_category, "max", "nowhere")

    def test_signed_counts(self, rp2_category, circle_category):
        assert signed_counts(rp2_category) == {("e2", "e1"): 2}
        assert signed_counts(circle_category) == {}
