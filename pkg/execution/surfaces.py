#!/usr/bin/env python3
"""
Surfaces and Morse Functions

A SurfaceSpec bundles a manifold (an implicit surface {g = 0} in R^3 or a
flat torus (R/2πZ)^k) with a function f and its derivatives. The built-in
examples are the desk-scale manifolds the generator is checked against:
circle, sphere, upright and tilted torus, the flat three-torus, and the
broken-geodesic model of a winding sector of the free loop space of the
circle.

Usage:
    from execution.surfaces import surface_by_name

    surface = surface_by_name("torus")
    surface = surface_by_name("loopspace:3,1,0.1")
"""

from dataclasses import dataclass, field
from itertools import product
from typing import Any, Callable, Dict, Optional
import logging
import math

import numpy as np

from execution.errors import FlowToolsError

logger = logging.getLogger(__name__)

IMPLICIT = "implicit"
FLAT_TORUS = "flat_torus"

Vector = np.ndarray
ScalarFn = Callable[[Vector], float]
VectorFn = Callable[[Vector], Vector]


class UnknownExample(FlowToolsError):
    """Raised when an example name or spec document names no built-in surface."""

    exit_code = 2


class PerturbationTooSmall(FlowToolsError):
    """Raised when the loop-space perturbation leaves a degenerate critical circle."""
    pass


def wrap_angle(x: Vector) -> Vector:
    """Wrap each coordinate into (−π, π]."""
    return math.pi - np.mod(math.pi - np.asarray(x, dtype=float), 2 * math.pi)


@dataclass(frozen=True)
class SurfaceSpec:
    """
    A manifold with a smooth function on it.

    Implicit surfaces live in R^3 and carry g with its gradient and Hessian;
    flat tori use lifted coordinates in R^k and leave g unset. When hess_f is
    None the Hessian is taken by central differences of grad_f.
    """

    name: str
    kind: str
    ambient_dim: int
    f: ScalarFn
    grad_f: VectorFn
    seeds: Callable[[int], np.ndarray]
    hess_f: Optional[Callable[[Vector], np.ndarray]] = None
    g: Optional[ScalarFn] = None
    grad_g: Optional[VectorFn] = None
    hess_g: Optional[Callable[[Vector], np.ndarray]] = None
    in_domain: Optional[Callable[[Vector], bool]] = None
    scale: float = 1.0
    manifold: str = ""
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (IMPLICIT, FLAT_TORUS):
            raise ValueError(f"Unknown surface kind: {self.kind}")
        if self.kind == IMPLICIT and (self.g is None or self.grad_g is None or self.hess_g is None):
            raise ValueError(f"Implicit surface {self.name} needs g, grad_g and hess_g")
        if self.kind == IMPLICIT and self.ambient_dim != 3:
            raise ValueError("Implicit surfaces live in R^3")

    @property
    def is_flat(self) -> bool:
        return self.kind == FLAT_TORUS

    @property
    def dim(self) -> int:
        return self.ambient_dim if self.is_flat else 2

    def seed_points(self, seed: int = 0) -> np.ndarray:
        return np.atleast_2d(self.seeds(seed))

    def hessian_f(self, x: Vector) -> np.ndarray:
        if self.hess_f is not None:
            return np.asarray(self.hess_f(x), dtype=float)
        h = 1e-5 * self.scale
        n = self.ambient_dim
        columns = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            columns.append((self.grad_f(x + e) - self.grad_f(x - e)) / (2 * h))
        hess = np.column_stack(columns)
        return 0.5 * (hess + hess.T)

    def normal(self, x: Vector) -> Vector:
        grad = self.grad_g(x)
        return grad / np.linalg.norm(grad)

    def tangent_basis(self, x: Vector) -> np.ndarray:
        """
        Orthonormal, positively oriented tangent frame as columns.

        On implicit surfaces (t1, t2, N) is right-handed with N the unit
        gradient of g; on flat tori the frame is the identity.
        """
        if self.is_flat:
            return np.eye(self.ambient_dim)
        n = self.normal(x)
        axis = np.zeros(3)
        axis[int(np.argmin(np.abs(n)))] = 1.0
        t1 = axis - np.dot(axis, n) * n
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        return np.column_stack([t1, t2])

    def tangential_gradient(self, x: Vector) -> Vector:
        grad = np.asarray(self.grad_f(x), dtype=float)
        if self.is_flat:
            return grad
        n = self.normal(x)
        return grad - np.dot(grad, n) * n

    def multiplier(self, x: Vector) -> float:
        """Lagrange multiplier λ with ∇f − λ∇g tangent; zero on flat tori."""
        if self.is_flat:
            return 0.0
        grad_g = self.grad_g(x)
        return float(np.dot(self.grad_f(x), grad_g) / np.dot(grad_g, grad_g))

    def retract(self, x: Vector, iterations: int = 50) -> Vector:
        """Newton projection x ← x − g∇g/|∇g|² onto {g = 0}; identity on flat tori."""
        x = np.array(x, dtype=float)
        if self.is_flat:
            return x
        for _ in range(iterations):
            grad = self.grad_g(x)
            norm2 = float(np.dot(grad, grad))
            if norm2 == 0.0 or not np.isfinite(norm2):
                break
            step = self.g(x) / norm2 * grad
            x = x - step
            if np.linalg.norm(step) < 1e-15 * max(1.0, np.linalg.norm(x)):
                break
        return x

    def constraint_residual(self, x: Vector) -> float:
        if self.is_flat:
            return 0.0
        norm = float(np.linalg.norm(self.grad_g(x)))
        if norm == 0.0 or not np.isfinite(norm):
            return math.inf
        return abs(float(self.g(x))) / norm

    def displacement(self, x: Vector, y: Vector) -> Vector:
        """y − x, wrapped componentwise into (−π, π] on flat tori."""
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        return wrap_angle(d) if self.is_flat else d

    def distance(self, x: Vector, y: Vector) -> float:
        return float(np.linalg.norm(self.displacement(x, y)))

    def canonical(self, x: Vector) -> Vector:
        return wrap_angle(x) if self.is_flat else np.asarray(x, dtype=float)

    def orientation_sign(self, x: Vector, vectors: np.ndarray) -> int:
        """Sign of det(Bᵀ V) for tangent vectors V (columns) at x."""
        det = np.linalg.det(self.tangent_basis(x).T @ np.asarray(vectors, dtype=float))
        return 1 if det > 0 else -1

    def rotate(self, x: Vector, t: Vector) -> Vector:
        """Quarter turn of a tangent vector in the positive sense (dim 2 only)."""
        if self.is_flat:
            return np.array([-t[1], t[0]])
        return np.cross(self.normal(x), t)

    def describe(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'kind': self.kind,
            'manifold': self.manifold,
            'parameters': dict(self.parameters),
        }


def grid_seeds(lower, upper, m: int, jitter: float = 0.05) -> Callable[[int], np.ndarray]:
    """Deterministic m^n grid over a box with seeded jitter of a fraction of the spacing."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    spacing = (upper - lower) / m

    def seeds(seed: int) -> np.ndarray:
        axes = [lower[i] + spacing[i] * (np.arange(m) + 0.5) for i in range(len(lower))]
        grid = np.array(list(product(*axes)))
        rng = np.random.default_rng(seed)
        return grid + rng.uniform(-jitter, jitter, size=grid.shape) * spacing

    return seeds


def circle() -> SurfaceSpec:
    """Height function sin θ on the circle T^1."""
    return SurfaceSpec(
        name="circle",
        kind=FLAT_TORUS,
        ambient_dim=1,
        f=lambda x: float(np.sin(x[0])),
        grad_f=lambda x: np.array([np.cos(x[0])]),
        hess_f=lambda x: np.array([[-np.sin(x[0])]]),
        seeds=grid_seeds([-math.pi], [math.pi], 8),
        manifold="S1",
    )


def sphere() -> SurfaceSpec:
    """f = z on the unit sphere."""
    return SurfaceSpec(
        name="sphere",
        kind=IMPLICIT,
        ambient_dim=3,
        f=lambda x: float(x[2]),
        grad_f=lambda x: np.array([0.0, 0.0, 1.0]),
        hess_f=lambda x: np.zeros((3, 3)),
        g=lambda x: float(np.dot(x, x) - 1.0),
        grad_g=lambda x: 2.0 * np.asarray(x, dtype=float),
        hess_g=lambda x: 2.0 * np.eye(3),
        seeds=grid_seeds([-1.2] * 3, [1.2] * 3, 5),
        manifold="S2",
    )


TORUS_MAJOR = 2.0
TORUS_MINOR = 1.0
TORUS_TILT = 0.1
TILTED_TORUS_TILT = 0.35


def torus(tilt: float = TORUS_TILT, name: str = "torus") -> SurfaceSpec:
    """
    Height on the torus of revolution about the y-axis, tilted toward the axis.

    f = ⟨x, v⟩ with v = (0, sin α, cos α). At α = 0 this is the upright
    height function, whose two saddles are joined by flow lines along the
    inner equator.
    """
    big, small = TORUS_MAJOR, TORUS_MINOR
    v = np.array([0.0, math.sin(tilt), math.cos(tilt)])
    mask = np.array([1.0, 0.0, 1.0])

    def g(x):
        s = np.dot(x, x) + big ** 2 - small ** 2
        return float(s * s - 4 * big ** 2 * (x[0] ** 2 + x[2] ** 2))

    def grad_g(x):
        s = np.dot(x, x) + big ** 2 - small ** 2
        return 4 * s * x - 8 * big ** 2 * mask * x

    def hess_g(x):
        s = np.dot(x, x) + big ** 2 - small ** 2
        return 8 * np.outer(x, x) + 4 * s * np.eye(3) - 8 * big ** 2 * np.diag(mask)

    reach = big + small + 0.3
    return SurfaceSpec(
        name=name,
        kind=IMPLICIT,
        ambient_dim=3,
        f=lambda x: float(np.dot(v, x)),
        grad_f=lambda x: v.copy(),
        hess_f=lambda x: np.zeros((3, 3)),
        g=g,
        grad_g=grad_g,
        hess_g=hess_g,
        seeds=grid_seeds([-reach, -small - 0.3, -reach], [reach, small + 0.3, reach], 9),
        manifold=f"T2(R={big:g},r={small:g})",
        parameters={'tilt': tilt},
    )


def tilted_torus() -> SurfaceSpec:
    return torus(TILTED_TORUS_TILT, name="tilted-torus")


THREE_TORUS_AMPLITUDES = (1.0, 0.7, 0.4)


def three_torus(amplitudes=THREE_TORUS_AMPLITUDES) -> SurfaceSpec:
    """
    f = Σ a_i cos θ_i on the flat T³.

    The flow is the product of three circle flows, so every differential of
    the Morse complex vanishes and the homology is Z, Z³, Z³, Z.
    """
    a = np.asarray(amplitudes, dtype=float)
    if a.shape != (3,) or np.any(a <= 0):
        raise ValueError(f"Need three positive amplitudes, got {amplitudes}")
    return SurfaceSpec(
        name="three-torus",
        kind=FLAT_TORUS,
        ambient_dim=3,
        f=lambda x: float(np.dot(a, np.cos(x))),
        grad_f=lambda x: -a * np.sin(x),
        hess_f=lambda x: np.diag(-a * np.cos(x)),
        seeds=grid_seeds([-math.pi] * 3, [math.pi] * 3, 4),
        manifold="T3",
        parameters={'amplitudes': [float(v) for v in a]},
    )


def monkey_saddle_torus() -> SurfaceSpec:
    """f = sin³θ₁ − 3 sinθ₁ sin²θ₂ on T²; degenerate at the origin."""

    def f(x):
        s1, s2 = np.sin(x[0]), np.sin(x[1])
        return float(s1 ** 3 - 3 * s1 * s2 ** 2)

    def grad_f(x):
        s1, c1 = np.sin(x[0]), np.cos(x[0])
        s2, c2 = np.sin(x[1]), np.cos(x[1])
        return np.array([3 * c1 * (s1 ** 2 - s2 ** 2), -6 * s1 * s2 * c2])

    return SurfaceSpec(
        name="monkey-saddle",
        kind=FLAT_TORUS,
        ambient_dim=2,
        f=f,
        grad_f=grad_f,
        seeds=grid_seeds([-math.pi] * 2, [math.pi] * 2, 12),
        manifold="T2",
    )


def broken_geodesic_loopspace(k: int, winding: int, epsilon: float, tol_nondeg: float = 1e-6) -> SurfaceSpec:
    """
    Discretized energy of k-segment broken geodesics on the circle.

    Points θ_0, …, θ_{k−1} on S¹ form a closed loop of winding n; with
    e_i = wrap(θ_{i+1} − θ_i − 2πn/k) the function is

        E = Σ e_i² + ε cos θ_0

    on the sector max|e_i| < π/k of the flat k-torus. Without ε the round
    loops form a critical circle; ε breaks it into a minimum (θ_0 = π) and
    an index-one point (θ_0 = 0).

    Raises:
        ValueError: If k < 2.
        PerturbationTooSmall: If ε ≤ 0 or the Hessian at the round loop is
            degenerate to within tol_nondeg.
    """
    if k < 2:
        raise ValueError(f"Need at least 2 segments, got {k}")
    step = 2 * math.pi * winding / k
    bound = math.pi / k

    def edges(x):
        return wrap_angle(np.roll(x, -1) - x - step)

    def f(x):
        e = edges(x)
        return float(np.dot(e, e) + epsilon * math.cos(x[0]))

    def grad_f(x):
        e = edges(x)
        grad = 2 * np.roll(e, 1) - 2 * e
        grad[0] -= epsilon * math.sin(x[0])
        return grad

    base = np.zeros((k, k))
    for i in range(k):
        g_i = np.zeros(k)
        g_i[(i + 1) % k] += 1.0
        g_i[i] -= 1.0
        base += 2 * np.outer(g_i, g_i)

    def hess_f(x):
        hess = base.copy()
        hess[0, 0] -= epsilon * math.cos(x[0])
        return hess

    def in_domain(x):
        return bool(np.max(np.abs(edges(x))) < bound)

    def seeds(seed):
        rng = np.random.default_rng(seed)
        rows = []
        for theta0 in np.linspace(-math.pi, math.pi, 8, endpoint=False):
            for deviation in product((-0.2, 0.0, 0.2), repeat=k - 1):
                row = theta0 + step * np.arange(k)
                row[1:] += deviation
                rows.append(row)
        grid = np.array(rows)
        return grid + rng.uniform(-0.01, 0.01, size=grid.shape)

    if epsilon <= 0:
        raise PerturbationTooSmall(f"Perturbation ε must be > 0, got {epsilon}")
    round_loop = step * np.arange(k)
    smallest = float(np.min(np.abs(np.linalg.eigvalsh(hess_f(round_loop)))))
    if smallest < tol_nondeg:
        raise PerturbationTooSmall(
            f"Round loop stays degenerate: smallest |eigenvalue| {smallest:.3g} < {tol_nondeg:g}"
        )

    logger.debug(f"Loop-space model k={k}, n={winding}, ε={epsilon}")
    return SurfaceSpec(
        name=f"loopspace:{k},{winding},{epsilon:g}",
        kind=FLAT_TORUS,
        ambient_dim=k,
        f=f,
        grad_f=grad_f,
        hess_f=hess_f,
        seeds=seeds,
        in_domain=in_domain,
        manifold=f"T{k}-sector{winding}",
        parameters={'k': k, 'winding': winding, 'epsilon': epsilon},
    )


BUILTIN_EXAMPLES = {
    'circle': circle,
    'sphere': sphere,
    'torus': torus,
    'tilted-torus': tilted_torus,
    'monkey-saddle': monkey_saddle_torus,
    'three-torus': three_torus,
}


def surface_by_name(name: str) -> SurfaceSpec:
    """
    Resolve a built-in example name, including loopspace:k,n,ε.

    Raises:
        UnknownExample: If the name is not recognized.
    """
    text = name.strip()
    if text.startswith("loopspace:"):
        try:
            k, n, eps = text.split(":", 1)[1].split(",")
            return broken_geodesic_loopspace(int(k), int(n), float(eps))
        except ValueError as e:
            raise UnknownExample(f"Bad loopspace example {name!r}: expected loopspace:k,n,ε ({e})")
    if text not in BUILTIN_EXAMPLES:
        raise UnknownExample(f"Unknown example {name!r}; known: {sorted(BUILTIN_EXAMPLES)} and loopspace:k,n,ε")
    return BUILTIN_EXAMPLES[text]()


def surface_from_dict(data: Dict[str, Any]) -> SurfaceSpec:
    """
    Build a surface from a spec document such as
    {"example": "torus", "tilt": 0.2} or
    {"example": "loopspace", "k": 3, "n": 1, "epsilon": 0.1}.
    """
    example = data.get('example')
    if example == "torus" or example == "tilted-torus":
        default = TORUS_TILT if example == "torus" else TILTED_TORUS_TILT
        return torus(float(data.get('tilt', default)), name=data.get('name', example))
    if example == "loopspace":
        try:
            return broken_geodesic_loopspace(int(data['k']), int(data.get('n', 0)), float(data['epsilon']))
        except (KeyError, ValueError) as e:
            raise UnknownExample(f"Bad loopspace spec {data!r}: {e}")
    if isinstance(example, str):
        return surface_by_name(example)
    raise UnknownExample(f"Spec document has no usable 'example' field: {data!r}")
