"""
Pytest configuration and fixtures for the flow-category workspace.
"""

import pytest
import os
import sys

# Add parent directory to path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from execution.flowcat import make_category
from execution.models.flow_data import BrokenFlow, Component, ModuliOne

FIXTURES_DIR = os.path.join(os.path.dirname(__file__), 'fixtures')

OPPOSITE_S = {"s+": 1, "s-": -1}
OPPOSITE_U = {"u+": 1, "u-": -1}


def torus_intervals():
    """The four intervals of M̄(max, min) for the torus height function."""
    return (
        Component.interval(BrokenFlow("s1", "s+", "u+"), BrokenFlow("s2", "s+", "u-")),
        Component.interval(BrokenFlow("s2", "s+", "u+"), BrokenFlow("s1", "s-", "u+")),
        Component.interval(BrokenFlow("s1", "s-", "u-"), BrokenFlow("s2", "s-", "u+")),
        Component.interval(BrokenFlow("s2", "s-", "u-"), BrokenFlow("s1", "s+", "u-")),
    )


@pytest.fixture
def fixtures_dir():
    """Directory holding the category files used by the CLI tests."""
    return FIXTURES_DIR


@pytest.fixture
def fixture_path():
    """Resolve a fixture file name to its absolute path."""
    def resolve(name):
        return os.path.join(FIXTURES_DIR, name)
    return resolve


@pytest.fixture
def torus_components():
    return torus_intervals()


@pytest.fixture
def empty_category():
    return make_category([])


@pytest.fixture
def circle_category():
    """Height function on S¹: two descending arcs of opposite sign."""
    return make_category([("max", 1), ("min", 0)], [("max", "min", OPPOSITE_U)], name="circle")


@pytest.fixture
def sphere_category():
    """f = z on S²: the flow lines from north to south form one circle."""
    return make_category(
        [("north", 2), ("south", 0)],
        moduli1=[ModuliOne("north", "south", (Component.circle(),))],
        name="sphere",
    )


@pytest.fixture
def torus_category():
    """Torus height function with its complete one-dimensional moduli data."""
    return make_category(
        [("max", 2), ("s1", 1), ("s2", 1), ("min", 0)],
        [
            ("max", "s1", OPPOSITE_S),
            ("max", "s2", OPPOSITE_S),
            ("s1", "min", OPPOSITE_U),
            ("s2", "min", OPPOSITE_U),
        ],
        [ModuliOne("max", "min", torus_intervals())],
        name="torus",
    )


@pytest.fixture
def rp2_category():
    """Minimal cell structure of RP²: ∂₂ = 2, ∂₁ = 0."""
    return make_category(
        [("e2", 2), ("e1", 1), ("e0", 0)],
        [("e2", "e1", {"a": 1, "b": 1}), ("e1", "e0", OPPOSITE_U)],
        name="rp2",
    )


@pytest.fixture
def broken_category():
    """a → b → c with a single uncancelled broken flow, so ∂² ≠ 0."""
    return make_category(
        [("a", 2), ("b", 1), ("c", 0)],
        [("a", "b", {"p": 1}), ("b", "c", {"q": 1})],
        name="broken",
    )


@pytest.fixture
def interval_category():
    """One index-one object killing one index-zero object: acyclic."""
    return make_category([("x", 1), ("v", 0)], [("x", "v", {"u+": 1})], name="interval")


@pytest.fixture
def single_object_category():
    return make_category([("pt", 0)], name="point")
