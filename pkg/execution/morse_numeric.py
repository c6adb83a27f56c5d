#!/usr/bin/env python3
"""
Numeric Morse Flow Categories

Generates flow categories from Morse functions on the surfaces of
execution.surfaces: Newton search for critical points, adaptive
Dormand–Prince integration of the gradient flow with projection back to the
surface, shooting of connecting orbits with framing signs, tracing of the
one-parameter families between index-two and index-zero points, and the
mixed counts that compare two functions on the same manifold.

Sign conventions:
    Each critical point carries an unstable frame; on a top-index point the
    frame is positively oriented, elsewhere each vector is flipped so its
    largest component is positive. An orbit leaving an index-one point along
    ±e_u counts ±1. An orbit entering an index (dim−1) point along the
    stable branch s counts sign det(−s·e_s, E_u(b)) in the oriented tangent
    frame. An orbit leaving an index-two point at angle ψ* of its unstable
    circle counts the sign of ⟨∂_ψ x, e_u(b)⟩ near b. Mixed counts use W^u(a; f0) ∩ W^s(β; f1), the stable manifold
    co-oriented by E_u(β).

Usage:
    from execution.surfaces import surface_by_name
    from execution.morse_numeric import build_flow_category

    category = build_flow_category(surface_by_name("torus"), jobs=4)
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import math
import re

import numpy as np
import pandas as pd

from execution.config import Tolerances
from execution.errors import FlowToolsError
from execution.flowcat import DSquaredNonzero, d_squared_report, require_valid
from execution.models.flow_data import (
    BrokenFlow,
    ComparisonData,
    Component,
    FlowCategory,
    FlowObject,
    ModuliOne,
    ModuliPoint,
    ModuliZero,
)
from execution.surfaces import (  # noqa: F401  (re-exported loop-space model)
    PerturbationTooSmall,
    SurfaceSpec,
    broken_geodesic_loopspace,
)

logger = logging.getLogger(__name__)

# Shooting radius and step caps, as fractions of the surface scale
SHOOT_RADIUS = 1e-3
ARC_CAP = 0.02
PASS_RADIUS = 0.1
LEVEL_RADIUS = 0.3
NEWTON_STEP_CAP = 0.5

ATOL = 1e-10
RTOL = 1e-8
NEWTON_MAX_ITER = 200
SCAN_SAMPLES = 36
CROSSING_SUBSTEPS = 32

# Dormand–Prince 5(4) tableau
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


class DegenerateCriticalPoint(FlowToolsError):
    """Raised when a critical point has a Hessian eigenvalue below tol_nondeg in magnitude."""

    def __init__(self, location, smallest: float):
        self.location = tuple(float(c) for c in location)
        self.smallest = smallest
        super().__init__(
            f"Degenerate critical point at {np.round(location, 8).tolist()}: "
            f"smallest |eigenvalue| {smallest:.3g}"
        )


class MaxStepsExceeded(FlowToolsError):
    """Raised when a trajectory does not arrive within max_steps steps."""
    pass


class LeftChartDomain(FlowToolsError):
    """Raised when a trajectory leaves the domain of its chart."""
    pass


class UnresolvedBoundary(FlowToolsError):
    """Raised when shooting cannot separate the flow lines of a pair."""
    pass


class PreconditionError(FlowToolsError):
    """Raised when an operation is called on a pair with the wrong index gap."""
    pass


@dataclass(frozen=True)
class CriticalPointRec:
    """
    A nondegenerate critical point.

    Frames are ambient column vectors: unstable_frame spans the negative
    eigenspace of the Riemannian Hessian, stable_frame the positive one.
    """

    id: str
    coords: np.ndarray
    value: float
    index: int
    unstable_frame: np.ndarray
    stable_frame: np.ndarray
    eigenvalues: Tuple[float, ...]
    multiplier: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'index': self.index,
            'value': round(float(self.value), 9),
            'coords': [round(float(c), 9) for c in self.coords],
            'eigenvalues': [round(float(e), 9) for e in self.eigenvalues],
        }


@dataclass
class Trajectory:
    """Sampled flow line with its arrival object and final distance."""

    samples: np.ndarray
    values: np.ndarray
    arrival: Optional[str]
    arrival_distance: float
    direction: int = 1

    @property
    def length(self) -> int:
        return len(self.samples) - 1

    def is_monotone(self) -> bool:
        """f strictly decreases (direction +1) or increases (−1) sample to sample."""
        return bool(np.all(self.direction * np.diff(self.values) < 0))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.samples, columns=[f"x{i}" for i in range(self.samples.shape[1])])
        frame.insert(0, 'value', self.values)
        frame.insert(0, 'step', np.arange(len(self.values)))
        return frame


# ---------------------------------------------------------------------------
# Critical points
# ---------------------------------------------------------------------------

def _solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        solution = np.linalg.solve(matrix, rhs)
        if np.all(np.isfinite(solution)):
            return solution
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(matrix, rhs, rcond=None)[0]


def _capped(step: np.ndarray, cap: float) -> np.ndarray:
    norm = np.linalg.norm(step)
    return step * (cap / norm) if norm > cap else step


def _newton_implicit(surface: SurfaceSpec, x0: np.ndarray, tol: Tolerances) -> Optional[np.ndarray]:
    x = surface.retract(x0)
    if not np.all(np.isfinite(x)) or not surface.constraint_residual(x) <= 1e-10 * surface.scale:
        return None
    if np.linalg.norm(surface.tangential_gradient(x)) <= tol.tol_crit:
        return x
    cap = NEWTON_STEP_CAP * surface.scale
    for _ in range(NEWTON_MAX_ITER):
        grad_g = surface.grad_g(x)
        lam = surface.multiplier(x)
        jac = np.zeros((4, 4))
        jac[:3, :3] = surface.hessian_f(x) - lam * surface.hess_g(x)
        jac[:3, 3] = -grad_g
        jac[3, :3] = grad_g
        rhs = -np.concatenate([surface.grad_f(x) - lam * grad_g, [surface.g(x)]])
        step = _capped(_solve(jac, rhs)[:3], cap)
        x = surface.retract(x + step)
        if not np.all(np.isfinite(x)):
            return None
        if np.linalg.norm(step) < 1e-15 * max(1.0, surface.scale):
            break
    return x


def _newton_flat(surface: SurfaceSpec, x0: np.ndarray, tol: Tolerances) -> Optional[np.ndarray]:
    x = np.array(x0, dtype=float)
    if surface.in_domain is not None and not surface.in_domain(x):
        return None
    if np.linalg.norm(surface.grad_f(x)) <= tol.tol_crit:
        return surface.canonical(x)
    cap = NEWTON_STEP_CAP * surface.scale
    for _ in range(NEWTON_MAX_ITER):
        step = _capped(_solve(surface.hessian_f(x), -surface.grad_f(x)), cap)
        x = x + step
        if surface.in_domain is not None and not surface.in_domain(x):
            return None
        if np.linalg.norm(step) < 1e-15 * max(1.0, surface.scale):
            break
    return surface.canonical(x)


def _oriented(surface: SurfaceSpec, x: np.ndarray, frame: np.ndarray, positive: bool) -> np.ndarray:
    frame = frame.copy()
    if frame.shape[1] == 0:
        return frame
    if positive:
        if surface.orientation_sign(x, frame) < 0:
            frame[:, -1] *= -1
        return frame
    for j in range(frame.shape[1]):
        column = frame[:, j]
        if column[int(np.argmax(np.abs(column)))] < 0:
            frame[:, j] = -column
    return frame


def _classify(surface: SurfaceSpec, x: np.ndarray, tol: Tolerances) -> Dict[str, Any]:
    basis = surface.tangent_basis(x)
    lam = surface.multiplier(x)
    ambient = surface.hessian_f(x)
    if not surface.is_flat:
        ambient = ambient - lam * surface.hess_g(x)
    riemannian = basis.T @ ambient @ basis
    eigenvalues, vectors = np.linalg.eigh(0.5 * (riemannian + riemannian.T))
    smallest = float(np.min(np.abs(eigenvalues)))
    if smallest < tol.tol_nondeg:
        raise DegenerateCriticalPoint(x, smallest)
    index = int(np.sum(eigenvalues < 0))
    dim = surface.dim
    return {
        'coords': x,
        'value': float(surface.f(x)),
        'index': index,
        'unstable_frame': _oriented(surface, x, basis @ vectors[:, :index], positive=index == dim),
        'stable_frame': _oriented(surface, x, basis @ vectors[:, index:], positive=index == 0),
        'eigenvalues': tuple(float(e) for e in eigenvalues),
        'multiplier': lam,
    }


def find_critical_points(surface: SurfaceSpec, tolerances: Optional[Tolerances] = None,
                         seed: int = 0) -> List[CriticalPointRec]:
    """
    Locate every critical point reachable from the surface's seed grid.

    Each seed is polished by Newton iteration (Lagrange system on implicit
    surfaces) until the step drops below 1e-15 or the iteration cap is hit;
    points within tol_merge of an earlier one are merged. Ids are
    x{index}_{j} with j counting down from the largest value of f.

    Raises:
        DegenerateCriticalPoint: If any accepted point has a Hessian
            eigenvalue below tol_nondeg in magnitude.
    """
    tol = tolerances or Tolerances()
    newton = _newton_flat if surface.is_flat else _newton_implicit
    found: List[np.ndarray] = []
    for start in surface.seed_points(seed):
        x = newton(surface, start, tol)
        if x is None:
            continue
        if np.linalg.norm(surface.tangential_gradient(x)) > tol.tol_crit:
            continue
        if any(surface.distance(x, y) < tol.tol_merge for y in found):
            continue
        found.append(x)

    classified = [_classify(surface, x, tol) for x in found]
    classified.sort(key=lambda c: (-c['index'], -c['value'], tuple(np.round(c['coords'], 9))))
    counters: Dict[int, int] = {}
    points = []
    for c in classified:
        j = counters.get(c['index'], 0)
        counters[c['index']] = j + 1
        points.append(CriticalPointRec(id=f"x{c['index']}_{j}", **c))
    logger.info(
        f"{surface.name}: {len(points)} critical points, indices "
        f"{[p.index for p in points]}"
    )
    return points


# ---------------------------------------------------------------------------
# Flow integration
# ---------------------------------------------------------------------------

def _velocity(surface: SurfaceSpec, x: np.ndarray, direction: int) -> np.ndarray:
    return -direction * surface.tangential_gradient(x)


def _dp_step(surface: SurfaceSpec, x: np.ndarray, h: float, direction: int) -> Tuple[np.ndarray, np.ndarray]:
    stages = []
    for row in _DP_A:
        y = x + h * sum(coef * k for coef, k in zip(row, stages)) if row else x
        stages.append(_velocity(surface, y, direction))
    stages_arr = np.array(stages)
    fifth = x + h * (_DP_B5 @ stages_arr)
    fourth = x + h * (_DP_B4 @ stages_arr)
    return fifth, fifth - fourth


def _flow_map(surface: SurfaceSpec, x: np.ndarray, t: float, direction: int,
              substeps: int = CROSSING_SUBSTEPS) -> np.ndarray:
    """Fixed-step RK4 flow for short times, retracted after each substep."""
    h = t / substeps
    for _ in range(substeps):
        k1 = _velocity(surface, x, direction)
        k2 = _velocity(surface, x + 0.5 * h * k1, direction)
        k3 = _velocity(surface, x + 0.5 * h * k2, direction)
        k4 = _velocity(surface, x + h * k3, direction)
        x = surface.retract(x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
    return x


def _nearest(surface: SurfaceSpec, x: np.ndarray, points: Sequence[CriticalPointRec]) -> Tuple[Optional[CriticalPointRec], float]:
    best, best_distance = None, math.inf
    for point in points:
        d = surface.distance(point.coords, x)
        if d < best_distance:
            best, best_distance = point, d
    return best, best_distance


def integrate_flow(surface: SurfaceSpec, x0: np.ndarray, critical_points: Sequence[CriticalPointRec],
                   tolerances: Optional[Tolerances] = None, direction: int = 1) -> Trajectory:
    """
    Follow the gradient flow from x0 until it comes within δ_arrive of a
    critical point.

    direction=+1 follows −∇f (descending), direction=−1 follows +∇f.
    Steps are adaptive Dormand–Prince 5(4) with arc length capped at
    0.02·scale; each accepted step is retracted to the surface and must
    change f strictly in the flow direction, otherwise the step is halved.

    Raises:
        MaxStepsExceeded: After max_steps attempted steps.
        LeftChartDomain: If a step leaves the chart domain.
        UnresolvedBoundary: If the flow stalls away from every known
            critical point.
    """
    tol = tolerances or Tolerances()
    x = surface.retract(np.asarray(x0, dtype=float))
    samples = [x]
    values = [float(surface.f(x))]
    point, distance = _nearest(surface, x, critical_points)
    if point is not None and distance <= tol.delta_arrive:
        return Trajectory(np.array(samples), np.array(values), point.id, distance, direction)

    arc_cap = ARC_CAP * surface.scale
    atol = ATOL * surface.scale
    speed = np.linalg.norm(_velocity(surface, x, direction))
    h = arc_cap / speed if speed > 0 else 1.0
    for _ in range(tol.max_steps):
        speed = np.linalg.norm(_velocity(surface, x, direction))
        if speed <= tol.tol_crit:
            raise UnresolvedBoundary(f"Flow stalled at {np.round(x, 8).tolist()} away from every known critical point")
        h = min(h, arc_cap / speed)
        candidate, error = _dp_step(surface, x, h, direction)
        scale = atol + RTOL * max(np.max(np.abs(x)), np.max(np.abs(candidate)))
        error_norm = float(np.max(np.abs(error)) / scale)
        if error_norm > 1.0:
            h *= max(0.2, 0.9 * error_norm ** -0.2)
            continue
        if surface.distance(x, candidate) > arc_cap:
            h *= 0.5
            continue
        candidate = surface.retract(candidate)
        if surface.in_domain is not None and not surface.in_domain(candidate):
            raise LeftChartDomain(f"Trajectory left the domain of {surface.name} at {np.round(candidate, 8).tolist()}")
        value = float(surface.f(candidate))
        if direction * (value - values[-1]) >= 0:
            h *= 0.5
            continue

        x = candidate
        samples.append(x)
        values.append(value)
        point, distance = _nearest(surface, x, critical_points)
        if point is not None and distance <= tol.delta_arrive:
            logger.debug(f"Arrived at {point.id} after {len(samples) - 1} steps")
            return Trajectory(np.array(samples), np.array(values), point.id, distance, direction)
        h *= 5.0 if error_norm == 0 else min(5.0, 0.9 * error_norm ** -0.2)

    raise MaxStepsExceeded(
        f"No arrival after {tol.max_steps} steps from {np.round(np.asarray(x0), 8).tolist()} on {surface.name}"
    )


# ---------------------------------------------------------------------------
# Connecting orbits
# ---------------------------------------------------------------------------

def _offset(surface: SurfaceSpec, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return surface.retract(np.asarray(x, dtype=float) + v)


def _record(store: Optional[Dict[str, Trajectory]], name: str, trajectory: Trajectory) -> None:
    if store is not None:
        store[name] = trajectory


def _by_id(points: Sequence[CriticalPointRec]) -> Dict[str, CriticalPointRec]:
    return {p.id: p for p in points}


def _branch(surface: SurfaceSpec, start: CriticalPointRec, vector: np.ndarray,
            points: Sequence[CriticalPointRec], tol: Tolerances, direction: int) -> Trajectory:
    """Shoot from start + r0·vector and insist the flow lands at a strictly lower (or higher) index."""
    r0 = SHOOT_RADIUS * surface.scale
    trajectory = integrate_flow(surface, _offset(surface, start.coords, r0 * vector), points, tol, direction)
    arrival = _by_id(points)[trajectory.arrival]
    if direction * (start.index - arrival.index) <= 0:
        raise UnresolvedBoundary(
            f"Flow from {start.id} arrived at {arrival.id} of index {arrival.index}: "
            f"{surface.name} is not Morse–Smale"
        )
    return trajectory


def connecting_orbits(surface: SurfaceSpec, a: CriticalPointRec, b: CriticalPointRec,
                      critical_points: Sequence[CriticalPointRec], tolerances: Optional[Tolerances] = None,
                      trajectories: Optional[Dict[str, Trajectory]] = None) -> ModuliZero:
    """
    Signed flow lines from a to b for an index gap of one.

    Index-one sources shoot forward along ±e_u (keys "u+"/"u-"); targets of
    index dim−1 shoot backward along ±e_s (keys "s+"/"s-"). Any other
    index-two source scans its unstable circle and bisects on ψ (keys
    "c<k>", k the scan interval).

    Raises:
        PreconditionError: If ind(a) − ind(b) ≠ 1.
        UnresolvedBoundary: For sources of index three or more whose target
            is below dim−1, or when a shot lands on a point that breaks
            Morse–Smale transversality.
    """
    tol = tolerances or Tolerances()
    if a.index - b.index != 1:
        raise PreconditionError(f"connecting_orbits needs index gap 1, got {a.id}({a.index}) → {b.id}({b.index})")

    points = []
    if a.index == 1:
        e_u = a.unstable_frame[:, 0]
        for sign, key in ((1, "u+"), (-1, "u-")):
            trajectory = _branch(surface, a, sign * e_u, critical_points, tol, direction=1)
            _record(trajectories, f"{surface.name}/{a.id}.{key}", trajectory)
            if trajectory.arrival == b.id:
                points.append(ModuliPoint(key, sign))
    elif b.index == surface.dim - 1:
        e_s = b.stable_frame[:, 0]
        for sign, key in ((1, "s+"), (-1, "s-")):
            trajectory = _branch(surface, b, sign * e_s, critical_points, tol, direction=-1)
            _record(trajectories, f"{surface.name}/{b.id}.{key}", trajectory)
            if trajectory.arrival == a.id:
                frame = np.column_stack([-sign * e_s, b.unstable_frame])
                points.append(ModuliPoint(key, surface.orientation_sign(b.coords, frame)))
    elif a.index == 2:
        points = _circle_orbits(surface, a, b, critical_points, tol, trajectories)
    else:
        raise UnresolvedBoundary(
            f"No shooting scheme for indices {a.index} → {b.index} in dimension {surface.dim}"
        )
    logger.debug(f"M({a.id}, {b.id}): {[(p.key, p.sign) for p in points]}")
    return ModuliZero(a.id, b.id, tuple(points))


def _frame_coords(surface: SurfaceSpec, center: CriticalPointRec, x: np.ndarray) -> np.ndarray:
    return center.unstable_frame.T @ surface.displacement(center.coords, x)


def _circle_point(surface: SurfaceSpec, center: CriticalPointRec, psi: float,
                  radius: Optional[float] = None) -> np.ndarray:
    """Point at angle ψ in the plane of the first two unstable vectors of center."""
    r = SHOOT_RADIUS * surface.scale if radius is None else radius
    e1, e2 = center.unstable_frame[:, 0], center.unstable_frame[:, 1]
    return _offset(surface, center.coords, r * (math.cos(psi) * e1 + math.sin(psi) * e2))


def _level_crossing(surface: SurfaceSpec, trajectory: Trajectory, level: float) -> Optional[np.ndarray]:
    """First point where a descending trajectory reaches f = level, interpolated between samples."""
    below = np.nonzero(trajectory.values <= level)[0]
    if len(below) == 0:
        return None
    i = int(below[0])
    if i == 0:
        return trajectory.samples[0]
    x0, x1 = trajectory.samples[i - 1], trajectory.samples[i]
    v0, v1 = trajectory.values[i - 1], trajectory.values[i]
    return x0 + (v0 - level) / (v0 - v1) * surface.displacement(x0, x1)


def _transverse_offset(surface: SurfaceSpec, a: CriticalPointRec, b: CriticalPointRec, psi: float,
                       points: Sequence[CriticalPointRec], tol: Tolerances) -> Optional[float]:
    """
    Offset along e_u(b) of the flow line leaving a at angle ψ, read where it
    first reaches the level f(b). It changes sign where the flow line
    crosses W^s(b); None when the flow stops above that level.
    """
    trajectory = integrate_flow(surface, _circle_point(surface, a, psi), points, tol, 1)
    if trajectory.arrival == b.id:
        x = trajectory.samples[-1]
    else:
        x = _level_crossing(surface, trajectory, b.value)
        if x is None:
            return None
    return float(np.dot(b.unstable_frame[:, 0], surface.displacement(b.coords, x)))


def _circle_orbits(surface: SurfaceSpec, a: CriticalPointRec, b: CriticalPointRec,
                   points: Sequence[CriticalPointRec], tol: Tolerances,
                   trajectories: Optional[Dict[str, Trajectory]]) -> List[ModuliPoint]:
    """
    Flow lines from an index-two point a into an index-one point b.

    The unstable circle of a is sampled at SCAN_SAMPLES angles; between two
    samples whose transverse offsets at b have opposite signs the crossing
    angle ψ* is bisected. A crossing counts only if the flow line at ψ*
    passes within PASS_RADIUS of b. Since (d, ∂_ψ d) is positive in E_u(a),
    the sign is that of ∂_ψ of the offset: +1 when it grows through zero.
    """
    step = 2 * math.pi / SCAN_SAMPLES
    angles = [step * (k + 0.5) for k in range(SCAN_SAMPLES)]
    offsets = [_transverse_offset(surface, a, b, psi, points, tol) for psi in angles]
    rho = PASS_RADIUS * surface.scale

    found = []
    for k, psi in enumerate(angles):
        lo, hi = psi, psi + step
        h_lo, h_hi = offsets[k], offsets[(k + 1) % SCAN_SAMPLES]
        if h_lo is None or h_hi is None or (h_lo > 0) == (h_hi > 0):
            continue
        for _ in range(tol.bisection_depth):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            h_mid = _transverse_offset(surface, a, b, mid, points, tol)
            if h_mid is None:
                break
            if (h_mid > 0) == (h_lo > 0):
                lo, h_lo = mid, h_mid
            else:
                hi, h_hi = mid, h_mid
        trajectory = integrate_flow(surface, _circle_point(surface, a, 0.5 * (lo + hi)), points, tol, 1)
        closest = min(surface.distance(b.coords, x) for x in trajectory.samples)
        if closest > rho:
            logger.debug(f"Sign change near ψ={lo:.6f} from {a.id} misses {b.id} by {closest:.3g}")
            continue
        key = f"c{k}"
        _record(trajectories, f"{surface.name}/{a.id}->{b.id}.{key}", trajectory)
        found.append(ModuliPoint(key, 1 if h_hi > 0 else -1))
    return found


def _level_drop(surface: SurfaceSpec, a: CriticalPointRec, points: Sequence[CriticalPointRec]) -> float:
    """
    How far below f(a) to read angles: half the gap to the next lower
    critical value, and small enough that the level curve stays within
    LEVEL_RADIUS of a to second order.
    """
    gaps = [a.value - p.value for p in points if p.value < a.value]
    weakest = min(abs(e) for e in a.eigenvalues)
    radius = LEVEL_RADIUS * surface.scale
    return min(0.5 * min(gaps, default=math.inf), 0.5 * weakest * radius ** 2)


def _level_point(surface: SurfaceSpec, a: CriticalPointRec, psi: float, level: float,
                 tol: Tolerances) -> np.ndarray:
    """Point at angle ψ on the level curve f = level around a."""
    hi = SHOOT_RADIUS * surface.scale
    for _ in range(40):
        if surface.f(_circle_point(surface, a, psi, hi)) <= level:
            break
        hi *= 2
    else:
        raise UnresolvedBoundary(f"Level {level:.6g} not reached from {a.id} at ψ={psi:.6f}")
    lo = 0.0
    for _ in range(tol.bisection_depth):
        mid = 0.5 * (lo + hi)
        if surface.f(_circle_point(surface, a, psi, mid)) > level:
            lo = mid
        else:
            hi = mid
    return _circle_point(surface, a, psi, hi)


def _ray_angle(surface: SurfaceSpec, a: CriticalPointRec, trajectory: Trajectory, level: float,
               tol: Tolerances) -> float:
    """
    Angle around a where an ascending trajectory into a crosses f = level;
    the crossing is refined by bisection on the flow time.
    """
    values = trajectory.values
    crossing = next((i for i in range(len(values) - 1) if values[i] < level <= values[i + 1]), None)
    if crossing is None:
        raise UnresolvedBoundary(f"Trajectory into {a.id} never crosses f = {level:.6g}")

    x_out = trajectory.samples[crossing]
    speed = np.linalg.norm(_velocity(surface, x_out, -1))
    t_hi = 2 * surface.distance(x_out, trajectory.samples[crossing + 1]) / speed
    for _ in range(40):
        if surface.f(_flow_map(surface, x_out, t_hi, -1)) >= level:
            break
        t_hi *= 2
    t_lo = 0.0
    for _ in range(tol.bisection_depth):
        t_mid = 0.5 * (t_lo + t_hi)
        if surface.f(_flow_map(surface, x_out, t_mid, -1)) < level:
            t_lo = t_mid
        else:
            t_hi = t_mid
    y = _frame_coords(surface, a, _flow_map(surface, x_out, t_hi, -1))
    return math.atan2(y[1], y[0]) % (2 * math.pi)


def _left_branch(surface: SurfaceSpec, c: CriticalPointRec, sign: int) -> str:
    """
    Unstable branch of the index-one point c taken by flow lines passing
    just left of the orbit that enters c along sign·e_s.
    """
    left = surface.rotate(c.coords, -sign * c.stable_frame[:, 0])
    return "u+" if float(np.dot(c.unstable_frame[:, 0], left)) > 0 else "u-"


def _other_branch(key: str) -> str:
    return "u-" if key == "u+" else "u+"


def gap2_moduli(surface: SurfaceSpec, a: CriticalPointRec, b: CriticalPointRec,
                critical_points: Sequence[CriticalPointRec], tolerances: Optional[Tolerances] = None,
                trajectories: Optional[Dict[str, Trajectory]] = None) -> ModuliOne:
    """
    One-dimensional moduli space from an index-two point a to an index-zero
    point b on a surface.

    Flow lines from a are parametrized by their angle ψ on the level curve
    f = f(a) − η, a small circle around a that every flow line out of a
    crosses once. The ascending orbits out of index-one points that end at
    a are rays cutting that circle; their angles are read on the level
    curve, where they are well separated, rather than on the shooting
    circle, where they all crowd toward the weak eigendirection.

    Consecutive rays bound an arc. An arc whose flow lines reach b is an
    interval. Its end at ray (c, s) is the broken flow through the
    unstable branch of c on the side of the arc; with E_u(a) positively
    oriented, increasing ψ is the left of each ray. With no rays the whole
    circle is one component.

    Raises:
        PreconditionError: If ind(a) − ind(b) ≠ 2.
        UnresolvedBoundary: Off surfaces, for other index pairs, or when a
            ray never crosses the level curve.
    """
    tol = tolerances or Tolerances()
    if a.index - b.index != 2:
        raise PreconditionError(f"gap2_moduli needs index gap 2, got {a.id}({a.index}) → {b.id}({b.index})")
    if surface.dim != 2 or a.index != 2:
        raise UnresolvedBoundary(f"No family tracing for indices {a.index} → {b.index} in dimension {surface.dim}")

    level = a.value - _level_drop(surface, a, critical_points)
    rays = []
    for c in critical_points:
        if c.index != 1:
            continue
        e_s = c.stable_frame[:, 0]
        for sign, key in ((1, "s+"), (-1, "s-")):
            trajectory = _branch(surface, c, sign * e_s, critical_points, tol, direction=-1)
            if trajectory.arrival == a.id:
                rays.append((_ray_angle(surface, a, trajectory, level, tol), c, sign, key))

    if not rays:
        trajectory = integrate_flow(surface, _level_point(surface, a, 0.0, level, tol), critical_points, tol, 1)
        _record(trajectories, f"{surface.name}/{a.id}->{b.id}.circle", trajectory)
        components = (Component.circle(),) if trajectory.arrival == b.id else ()
        return ModuliOne(a.id, b.id, components)

    rays.sort(key=lambda ray: ray[0])
    components = []
    for j, (psi, c, sign, key) in enumerate(rays):
        next_psi, next_c, next_sign, next_key = rays[(j + 1) % len(rays)]
        if j + 1 == len(rays):
            next_psi += 2 * math.pi
        start = _level_point(surface, a, 0.5 * (psi + next_psi), level, tol)
        trajectory = integrate_flow(surface, start, critical_points, tol, 1)
        _record(trajectories, f"{surface.name}/{a.id}->{b.id}.arc{j}", trajectory)
        if trajectory.arrival != b.id:
            continue
        first = BrokenFlow(c.id, key, _left_branch(surface, c, sign))
        second = BrokenFlow(next_c.id, next_key, _other_branch(_left_branch(surface, next_c, next_sign)))
        components.append(Component.interval(first, second))
    logger.info(f"M̄({a.id}, {b.id}): {len(components)} components from {len(rays)} rays")
    return ModuliOne(a.id, b.id, tuple(components))


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def _object_label(point: CriticalPointRec) -> str:
    return f"f={point.value:.6f}"


def build_flow_category(surface: SurfaceSpec, tolerances: Optional[Tolerances] = None, jobs: int = 1,
                        trajectories: Optional[Dict[str, Trajectory]] = None, seed: int = 0,
                        critical_points: Optional[List[CriticalPointRec]] = None) -> FlowCategory:
    """
    Assemble the flow category of (surface, f).

    Gap-one pairs become ModuliZero tables and supported gap-two pairs
    (index 2 → 0 on surfaces) become ModuliOne tables. Pairs are resolved
    on a thread pool of width jobs and merged in canonical order, so the
    result does not depend on scheduling.

    Raises:
        InvalidCategory: If the assembled category fails validation.
        DSquaredNonzero: If the ∂² or endpoint-matching checks fail.
    """
    tol = tolerances or Tolerances()
    points = critical_points if critical_points is not None else find_critical_points(surface, tol, seed)
    gap1 = [(a, b) for a in points for b in points if a.index - b.index == 1]
    gap2 = []
    for a in points:
        for b in points:
            if a.index - b.index != 2:
                continue
            if surface.dim == 2 and a.index == 2:
                gap2.append((a, b))
            else:
                logger.warning(f"Skipping M̄({a.id}, {b.id}): no family tracing for this index pattern")

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        moduli0 = list(pool.map(
            lambda pair: connecting_orbits(surface, pair[0], pair[1], points, tol, trajectories), gap1
        ))
        moduli1 = list(pool.map(
            lambda pair: gap2_moduli(surface, pair[0], pair[1], points, tol, trajectories), gap2
        ))

    category = FlowCategory(
        objects=tuple(FlowObject(p.id, p.index, _object_label(p)) for p in points),
        moduli0=tuple(m for m in moduli0 if m.points),
        moduli1=tuple(m for m in moduli1 if m.components),
        name=surface.name,
    )
    require_valid(category)
    report = d_squared_report(category)
    if not report.passed:
        raise DSquaredNonzero("; ".join(str(e) for e in report.failures()))
    logger.info(
        f"{surface.name}: {len(category.objects)} objects, {len(category.moduli0)} gap-one "
        f"and {len(category.moduli1)} gap-two tables"
    )
    return category


# ---------------------------------------------------------------------------
# Mixed moduli between two functions
# ---------------------------------------------------------------------------

def _cross2(u: np.ndarray, v: np.ndarray) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def _proper_crossing(p1, p2, q1, q2) -> Optional[float]:
    """Parameter along p1p2 where it properly crosses q1q2 in the plane, else None."""
    d1 = _cross2(p2 - p1, q1 - p1)
    d2 = _cross2(p2 - p1, q2 - p1)
    d3 = _cross2(q2 - q1, p1 - q1)
    d4 = _cross2(q2 - q1, p2 - q1)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return d3 / (d3 - d4)
    return None


def _signed_crossings(surface: SurfaceSpec, unstable: np.ndarray, stable: np.ndarray,
                      kappa: int) -> List[Tuple[float, int]]:
    """
    Transverse crossings of two polylines on a surface, as (parameter along
    the unstable polyline, sign). The stable polyline is co-oriented by
    κ·R(t), R the positive quarter turn.
    """
    p1, p2 = unstable[:-1], unstable[1:]
    q1, q2 = stable[:-1], stable[1:]
    mid_p, mid_q = 0.5 * (p1 + p2), 0.5 * (q1 + q2)
    len_p = np.linalg.norm(p2 - p1, axis=1)
    len_q = np.linalg.norm(q2 - q1, axis=1)
    offsets = mid_q[None, :, :] - mid_p[:, None, :]
    if surface.is_flat:
        offsets = np.pi - np.mod(np.pi - offsets, 2 * np.pi)
    near = np.linalg.norm(offsets, axis=2) <= 0.5 * (len_p[:, None] + len_q[None, :]) + 1e-12

    hits = []
    for i, j in zip(*np.nonzero(near)):
        shift = mid_p[i] + offsets[i, j] - mid_q[j]
        b1, b2 = q1[j] + shift, q2[j] + shift
        basis = surface.tangent_basis(mid_p[i])
        flat = [basis.T @ (y - mid_p[i]) for y in (p1[i], p2[i], b1, b2)]
        t = _proper_crossing(*flat)
        if t is None:
            continue
        normal = kappa * surface.rotate(mid_p[i], b2 - b1)
        hits.append((i + t, 1 if np.dot(p2[i] - p1[i], normal) > 0 else -1))
    return hits


def _unstable_curve(surface: SurfaceSpec, a: CriticalPointRec, points: Sequence[CriticalPointRec],
                    tol: Tolerances, store: Optional[Dict[str, Trajectory]]) -> np.ndarray:
    """W^u(a) of an index-one point as one polyline oriented along e_u(a)."""
    e_u = a.unstable_frame[:, 0]
    branches = {}
    for sign, key in ((1, "u+"), (-1, "u-")):
        trajectory = _branch(surface, a, sign * e_u, points, tol, direction=1)
        _record(store, f"{surface.name}/{a.id}.{key}", trajectory)
        branches[sign] = trajectory.samples
    return np.vstack([branches[-1][::-1], a.coords[None, :], branches[1]])


def _mixed_pair(source: SurfaceSpec, target: SurfaceSpec, a: CriticalPointRec, beta: CriticalPointRec,
                source_points, target_points, tol: Tolerances,
                store: Optional[Dict[str, Trajectory]]) -> ModuliZero:
    dim = source.dim
    if a.index == 0:
        trajectory = integrate_flow(target, a.coords, target_points, tol, 1)
        _record(store, f"mixed/{a.id}->{target.name}", trajectory)
        found = trajectory.arrival == beta.id
        return ModuliZero(a.id, beta.id, (ModuliPoint("x0", 1),) if found else ())
    if a.index == dim:
        trajectory = integrate_flow(source, beta.coords, source_points, tol, -1)
        _record(store, f"mixed/{source.name}<-{beta.id}", trajectory)
        found = trajectory.arrival == a.id
        return ModuliZero(a.id, beta.id, (ModuliPoint("x0", 1),) if found else ())
    if dim != 2:
        raise UnresolvedBoundary(f"No mixed intersection scheme for index {a.index} in dimension {dim}")

    unstable = _unstable_curve(source, a, source_points, tol, store)
    e_s = beta.stable_frame[:, 0]
    hits = []
    for sigma in (1, -1):
        branch = _branch(target, beta, sigma * e_s, target_points, tol, direction=-1)
        stable = np.vstack([beta.coords[None, :], branch.samples])
        kappa = 1 if np.dot(target.rotate(beta.coords, sigma * e_s), beta.unstable_frame[:, 0]) > 0 else -1
        hits.extend(_signed_crossings(source, unstable, stable, kappa))
    hits.sort()
    return ModuliZero(a.id, beta.id, tuple(ModuliPoint(f"x{i}", sign) for i, (_, sign) in enumerate(hits)))


def mixed_moduli(source: SurfaceSpec, target: SurfaceSpec, source_points: Sequence[CriticalPointRec],
                 target_points: Sequence[CriticalPointRec], tolerances: Optional[Tolerances] = None,
                 jobs: int = 1, trajectories: Optional[Dict[str, Trajectory]] = None) -> Tuple[ModuliZero, ...]:
    """
    Signed counts of W^u(a; f0) ∩ W^s(β; f1) for ind(a) = ind(β).

    Index zero flows a by f1; top index flows β backward by f0; index one
    on a surface intersects the two curves.

    Raises:
        PreconditionError: If the two surfaces are different manifolds.
        UnresolvedBoundary: For middle indices outside dimension two.
    """
    tol = tolerances or Tolerances()
    if source.manifold != target.manifold or source.kind != target.kind:
        raise PreconditionError(f"Cannot compare {source.name} on {source.manifold} with {target.name} on {target.manifold}")
    pairs = [(a, beta) for a in source_points for beta in target_points if a.index == beta.index]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(
            lambda pair: _mixed_pair(source, target, pair[0], pair[1], source_points, target_points,
                                     tol, trajectories),
            pairs,
        ))
    return tuple(m for m in results if m.points)


def build_comparison(source: SurfaceSpec, target: SurfaceSpec, tolerances: Optional[Tolerances] = None,
                     jobs: int = 1, trajectories: Optional[Dict[str, Trajectory]] = None,
                     seed: int = 0) -> ComparisonData:
    """Both flow categories plus the mixed counts Ψ between them."""
    tol = tolerances or Tolerances()
    if source.manifold != target.manifold:
        raise PreconditionError(f"Cannot compare {source.name} on {source.manifold} with {target.name} on {target.manifold}")
    source_points = find_critical_points(source, tol, seed)
    target_points = find_critical_points(target, tol, seed)
    return ComparisonData(
        source=build_flow_category(source, tol, jobs, trajectories, seed, source_points),
        target=build_flow_category(target, tol, jobs, trajectories, seed, target_points),
        mixed0=mixed_moduli(source, target, source_points, target_points, tol, jobs, trajectories),
    )


def trajectory_dump(trajectories: Dict[str, Trajectory], out_dir: str) -> List[Path]:
    """Write one TSV per trajectory (step, value, coordinates) for external plotting."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(trajectories):
        path = out / f"{re.sub(r'[^A-Za-z0-9_.+-]+', '_', name)}.tsv"
        trajectories[name].to_frame().to_csv(path, sep="\t", index=False, float_format="%.12g")
        written.append(path)
    logger.info(f"Wrote {len(written)} trajectory dumps to {out}")
    return written


if __name__ == "__main__":
    from execution.flowcat import homology
    from execution.surfaces import surface_by_name

    logging.basicConfig(level=logging.INFO)
    for example in ("circle", "sphere", "torus"):
        flow_category = build_flow_category(surface_by_name(example))
        print(example, {d: str(g) for d, g in homology(flow_category).items()})
