"""
Unit tests for surfaces and Morse functions.
"""

import math

import numpy as np
import pytest

from execution.surfaces import (
    FLAT_TORUS,
    PerturbationTooSmall,
    SurfaceSpec,
    UnknownExample,
    broken_geodesic_loopspace,
    circle,
    monkey_saddle_torus,
    sphere,
    surface_by_name,
    surface_from_dict,
    three_torus,
    torus,
    wrap_angle,
)


def numeric_gradient(f, x, h=1e-6):
    grad = np.zeros(len(x))
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2 * h)
    return grad


@pytest.mark.unit
class TestGeometry:
    """Frames, retraction and wrapping."""

    def test_wrap_angle(self):
        wrapped = wrap_angle([1.5 * math.pi, -math.pi, math.pi, 0.0, 7.0])
        assert np.allclose(wrapped, [-0.5 * math.pi, math.pi, math.pi, 0.0, 7.0 - 2 * math.pi])

    def test_flat_distance_wraps(self):
        assert circle().distance(np.array([-3.1]), np.array([3.1])) == pytest.approx(2 * math.pi - 6.2)

    def test_sphere_frame(self):
        surface = sphere()
        x = np.array([0.6, 0.0, 0.8])
        frame = surface.tangent_basis(x)
        assert np.allclose(frame.T @ frame, np.eye(2))
        assert np.allclose(frame.T @ surface.normal(x), 0.0)
        assert np.linalg.det(np.column_stack([frame, surface.normal(x)])) == pytest.approx(1.0)

    def test_sphere_retract(self):
        surface = sphere()
        x = surface.retract(np.array([0.0, 0.0, 2.0]))
        assert np.allclose(x, [0.0, 0.0, 1.0])
        assert surface.constraint_residual(x) < 1e-12

    def test_torus_retract(self):
        surface = torus()
        x = surface.retract(np.array([3.1, 0.05, 0.1]))
        assert surface.constraint_residual(x) < 1e-12
        assert abs(surface.g(x)) < 1e-9

    def test_residual_at_singular_gradient(self):
        assert sphere().constraint_residual(np.zeros(3)) == math.inf

    def test_orientation_and_rotation_on_flat_torus(self):
        surface = monkey_saddle_torus()
        x = np.zeros(2)
        assert surface.orientation_sign(x, np.eye(2)) == 1
        assert surface.orientation_sign(x, np.array([[0.0, 1.0], [1.0, 0.0]])) == -1
        assert np.allclose(surface.rotate(x, np.array([1.0, 0.0])), [0.0, 1.0])

    def test_rotation_on_sphere_is_positive(self):
        surface = sphere()
        x = np.array([0.0, 0.0, 1.0])
        t = surface.tangent_basis(x)[:, 0]
        assert surface.orientation_sign(x, np.column_stack([t, surface.rotate(x, t)])) == 1

    def test_finite_difference_hessian(self):
        surface = monkey_saddle_torus()
        hess = surface.hessian_f(np.array([math.pi / 2, 0.0]))
        assert np.allclose(hess, [[-3.0, 0.0], [0.0, -6.0]], atol=1e-5)

    def test_seed_points(self):
        surface = sphere()
        first, again = surface.seed_points(1), surface.seed_points(1)
        assert first.shape == (125, 3)
        assert np.array_equal(first, again)
        assert not np.array_equal(first, surface.seed_points(2))

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            SurfaceSpec("bad", "cone", 3, f=lambda x: 0.0, grad_f=lambda x: x, seeds=lambda s: np.zeros((1, 3)))
        with pytest.raises(ValueError):
            SurfaceSpec("bad", "implicit", 3, f=lambda x: 0.0, grad_f=lambda x: x, seeds=lambda s: np.zeros((1, 3)))


@pytest.mark.unit
class TestLoopSpace:
    """Broken-geodesic energy on a winding sector."""

    def test_gradient_matches_finite_differences(self):
        surface = broken_geodesic_loopspace(4, 1, 0.1)
        rng = np.random.default_rng(5)
        for _ in range(20):
            x = 2 * math.pi / 4 * np.arange(4) + rng.uniform(-0.2, 0.2, size=4)
            assert np.allclose(surface.grad_f(x), numeric_gradient(surface.f, x), atol=1e-6)
            assert np.allclose(surface.hessian_f(x), np.column_stack(
                [numeric_gradient(lambda y: surface.grad_f(y)[i], x) for i in range(4)]).T, atol=1e-5)

    def test_round_loops_are_critical(self):
        surface = broken_geodesic_loopspace(3, 1, 0.1)
        round_loop = 2 * math.pi / 3 * np.arange(3)
        assert np.allclose(surface.grad_f(round_loop), 0.0)
        assert np.allclose(surface.grad_f(round_loop + math.pi), 0.0, atol=1e-12)

    def test_domain(self):
        surface = broken_geodesic_loopspace(3, 1, 0.1)
        assert surface.in_domain(2 * math.pi / 3 * np.arange(3))
        assert not surface.in_domain(np.zeros(3))

    def test_winding_zero(self):
        surface = broken_geodesic_loopspace(2, 0, 0.5)
        assert surface.in_domain(np.array([0.3, 0.3]))
        assert surface.dim == 2

    def test_description(self):
        surface = broken_geodesic_loopspace(3, 1, 0.1)
        assert surface.name == "loopspace:3,1,0.1"
        assert surface.kind == FLAT_TORUS
        assert surface.describe()['parameters'] == {'k': 3, 'winding': 1, 'epsilon': 0.1}

    @pytest.mark.parametrize("epsilon", [0.0, -0.1, 1e-9])
    def test_perturbation_too_small(self, epsilon):
        with pytest.raises(PerturbationTooSmall):
            broken_geodesic_loopspace(3, 1, epsilon)

    def test_too_few_segments(self):
        with pytest.raises(ValueError):
            broken_geodesic_loopspace(1, 1, 0.1)


@pytest.mark.unit
class TestExamples:
    """Resolving built-in examples."""

    def test_builtin_names(self):
        assert surface_by_name("torus").parameters == {'tilt': 0.1}
        assert surface_by_name("tilted-torus").parameters == {'tilt': 0.35}
        assert surface_by_name(" circle ").dim == 1
        assert surface_by_name("sphere").manifold == "S2"

    def test_loopspace_name(self):
        surface = surface_by_name("loopspace:3,1,0.1")
        assert surface.ambient_dim == 3

    @pytest.mark.parametrize("name", ["klein", "loopspace:3,1", "loopspace:1,1,0.1", "loopspace:a,b,c"])
    def test_unknown(self, name):
        with pytest.raises(UnknownExample):
            surface_by_name(name)

    def test_unknown_exit_code(self):
        assert UnknownExample.exit_code == 2

    def test_from_dict(self):
        assert surface_from_dict({"example": "torus", "tilt": 0.2}).parameters == {'tilt': 0.2}
        assert surface_from_dict({"example": "tilted-torus"}).name == "tilted-torus"
        assert surface_from_dict({"example": "loopspace", "k": 3, "n": 1, "epsilon": 0.1}).dim == 3
        assert surface_from_dict({"example": "sphere"}).name == "sphere"

    @pytest.mark.parametrize("data", [{}, {"example": 3}, {"example": "loopspace", "k": 3}])
    def test_from_dict_rejects(self, data):
        with pytest.raises(UnknownExample):
            surface_from_dict(data)


@pytest.mark.unit
class TestThreeTorus:
    """Product function on the flat three-torus."""

    def test_gradient_and_hessian(self):
        surface = three_torus()
        rng = np.random.default_rng(3)
        for _ in range(10):
            x = rng.uniform(-math.pi, math.pi, size=3)
            assert np.allclose(surface.grad_f(x), numeric_gradient(surface.f, x), atol=1e-6)
            assert np.allclose(np.diag(surface.hessian_f(x)), -np.array([1.0, 0.7, 0.4]) * np.cos(x))

    def test_vertices_are_critical(self):
        surface = three_torus()
        for vertex in ([0.0, 0.0, 0.0], [math.pi, 0.0, math.pi], [math.pi] * 3):
            assert np.allclose(surface.grad_f(np.array(vertex)), 0.0, atol=1e-12)

    def test_registered(self):
        surface = surface_by_name("three-torus")
        assert surface.dim == 3
        assert surface.manifold == "T3"
        assert surface.parameters == {'amplitudes': [1.0, 0.7, 0.4]}

    @pytest.mark.parametrize("amplitudes", [(1.0, 0.5), (1.0, 0.0, 0.5), (1.0, -0.2, 0.5)])
    def test_rejects_bad_amplitudes(self, amplitudes):
        with pytest.raises(ValueError):
            three_torus(amplitudes)
