"""
Unit tests for the CW realization.
"""

import pytest

from execution.flowcat import InvalidCategory, make_category
from execution.realize import (
    ShiftTooSmall,
    cellular_complex,
    homotopy_chain_check,
    realize,
    shift_invariance,
    subquotient_report,
    to_dot,
    to_text,
)


def dimensions(cw):
    return {c.object_id: c.dimension for c in cw.cells}


@pytest.mark.unit
class TestRealize:
    """Cell dimensions and attaching degrees."""

    def test_torus(self, torus_category):
        cw = realize(torus_category, shift=2)
        assert dimensions(cw) == {"max": 4, "s1": 3, "s2": 3, "min": 2}
        assert cw.cell("max").cone_depth == 2
        assert cw.cell("min").suspension == 2
        assert cw.base_index == 0

    def test_default_shift(self, torus_category):
        assert realize(torus_category).shift == 2

    def test_circle(self, circle_category):
        assert dimensions(realize(circle_category, shift=1)) == {"max": 2, "min": 1}

    def test_single_object(self, single_object_category):
        cw = realize(single_object_category)
        assert dimensions(cw) == {"pt": 0}
        assert cw.attaching_degrees == {}

    def test_empty(self, empty_category):
        cw = realize(empty_category)
        assert cw.cells == ()
        assert cellular_complex(cw).homology() == {}

    def test_shift_too_small(self, torus_category):
        with pytest.raises(ShiftTooSmall):
            realize(torus_category, shift=1)

    def test_shift_too_small_exit_code(self):
        assert ShiftTooSmall.exit_code == 4

    def test_invalid_category(self):
        with pytest.raises(InvalidCategory):
            realize(make_category([("a", 2), ("b", 0)], [("a", "b", {"p": 1})]))

    def test_attaching_degrees(self, rp2_category):
        cw = realize(rp2_category)
        assert cw.attaching_degrees[("e2", "e1")] == 2
        assert cw.attaching_degrees[("e1", "e0")] == 0

    def test_missing_cell(self, torus_category):
        with pytest.raises(KeyError):
            realize(torus_category).cell("nowhere")


@pytest.mark.unit
class TestCellularHomology:
    """Cellular homology is Morse homology shifted by L − q."""

    @pytest.mark.parametrize("shift", [2, 5])
    def test_torus(self, torus_category, shift):
        groups = cellular_complex(realize(torus_category, shift)).homology()
        assert {d: str(g) for d, g in groups.items()} == {shift: "Z", shift + 1: "Z^2", shift + 2: "Z"}

    def test_rp2(self, rp2_category):
        groups = cellular_complex(realize(rp2_category, 2)).homology()
        assert {d: str(g) for d, g in groups.items()} == {2: "Z", 3: "Z/2", 4: "0"}

    def test_shift_invariance(self, torus_category, rp2_category):
        assert shift_invariance(torus_category, [2, 3, 5])
        assert shift_invariance(rp2_category, [2, 4])


@pytest.mark.unit
class TestFiltration:
    """Subquotients and the homotopy chain complex."""

    def test_subquotients(self, torus_category):
        levels = subquotient_report(torus_category)
        assert [level.level for level in levels] == [0, 1, 2]
        middle = levels[1]
        assert middle.objects == ("s1", "s2")
        assert middle.sphere_count == 2
        assert middle.sphere_dimension == 1
        assert middle.suspension == 1

    def test_subquotients_with_larger_shift(self, circle_category):
        levels = subquotient_report(circle_category, shift=3)
        assert [level.suspension for level in levels] == [3, 2]

    def test_torus_chain(self, torus_category):
        report = homotopy_chain_check(torus_category)
        assert report.passed
        assert len(report.checks("attaching_composite")) == 1

    def test_broken_chain(self, broken_category):
        report = homotopy_chain_check(broken_category)
        failure = report.failures()[0]
        assert failure.location == ("a", "c")
        assert failure.detail == "composite degree 1"

    def test_rp2_mod2_chain(self, rp2_category):
        assert homotopy_chain_check(rp2_category).passed


@pytest.mark.unit
class TestExport:
    """Text and DOT output."""

    def test_text(self, rp2_category):
        text = to_text(realize(rp2_category))
        lines = text.splitlines()
        assert lines[0] == "# cells of rp2: shift L=2, base q=0"
        assert "cell e2 index=2 dim=4 cone_depth=2 suspension=0" in lines
        assert "attach e2 -> e1 degree=2" in lines
        assert not any(line.startswith("attach e1") for line in lines)

    def test_dot(self, rp2_category):
        dot = to_dot(realize(rp2_category))
        assert dot.startswith("digraph cw {")
        assert '"e2" -> "e1" [label="2"];' in dot
        assert '"e1" -> "e0" [label="0", style=dashed];' in dot
        assert dot.rstrip().endswith("}")
