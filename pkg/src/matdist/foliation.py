"""
Leaf tracing for the body-material foliation and the state foliations.

Leaves are sampled as point clouds: from a seed, each requested direction
is followed by RK4 along the unit field

    V(p) = normalize(Π_p d),

where Π_p projects onto the projected fiber at p and d is the direction at
the start of the step. After each step d becomes V(p_new), so the path
keeps the fiber direction closest to the previous one.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.spatial.distance import directed_hausdorff

from .distributions import Point, projected_fiber
from .errors import DomainExitError, InvalidTraceError, NoLeafError, SingularCrossingError
from .kernel import SamplingConfig, Variant
from .law import ConstitutiveLaw

logger = logging.getLogger(__name__)

# below this norm a projected direction counts as zero
_ZERO_PROJECTION = 1e-12


class LeafVariant(str, Enum):
    BODY_MATERIAL = "BodyMaterial"
    STATE_T = "StateT"

    @property
    def kernel_variant(self) -> Variant:
        return Variant.FULL if self is LeafVariant.BODY_MATERIAL else Variant.STATE_T


@dataclass
class LeafTrace:
    """Points of a leaf trace, one segment per traced direction.

    Segment 0 holds only the seed; segment k ≥ 1 follows direction k from the
    seed. `points` concatenates the segments, so the step bound of 2·step
    holds between consecutive points of one polyline, not across a segment
    boundary.
    """

    seed_point: Point
    variant: LeafVariant
    step: float
    steps: int
    points: List[Point] = field(default_factory=list)
    pointwise_dim: List[int] = field(default_factory=list)
    segment: List[int] = field(default_factory=list)
    step_index: List[int] = field(default_factory=list)

    def append(self, p: np.ndarray, dim: int, segment: int, step_index: int) -> None:
        self.points.append((float(p[0]), (float(p[1]), float(p[2]), float(p[3]))))
        self.pointwise_dim.append(dim)
        self.segment.append(segment)
        self.step_index.append(step_index)

    def as_array(self) -> np.ndarray:
        """Points as an N×4 array of (t, x¹, x², x³)."""
        return np.array([[t, *x] for t, x in self.points]).reshape(-1, 4)

    def polylines(self) -> List[np.ndarray]:
        """One N×4 array per traced direction, each starting at the seed."""
        points = self.as_array()
        segment = np.asarray(self.segment)
        seed = points[:1]
        return [np.vstack([seed, points[segment == k]]) for k in sorted(set(self.segment) - {0})]

    def rows(self) -> List[dict]:
        return [
            {"segment": seg, "step": k, "t": t, "x1": x[0], "x2": x[1], "x3": x[2], "dim": dim}
            for seg, k, (t, x), dim in zip(self.segment, self.step_index, self.points, self.pointwise_dim)
        ]

    def to_dict(self) -> dict:
        return {
            "seed": {"t": self.seed_point[0], "x": list(self.seed_point[1])},
            "variant": self.variant.value,
            "step": self.step,
            "steps": self.steps,
            "points": self.rows(),
        }


def _as_vector(point: Point) -> np.ndarray:
    t, x = point
    return np.array([float(t), *map(float, x)])


class _DirectionField:
    """Unit projected-fiber field with a fixed leaf dimension."""

    def __init__(self, law: ConstitutiveLaw, variant: LeafVariant, cfg: SamplingConfig, trace: LeafTrace):
        self.law = law
        self.variant = variant
        self.cfg = cfg
        self.trace = trace
        self.dim: Optional[int] = None

    def basis(self, p: np.ndarray) -> np.ndarray:
        if not self.law.domain_box.contains(p[0], p[1:]):
            raise DomainExitError(f"trace left the domain of {self.law.name} at {p.tolist()}", trace=self.trace)
        Q = projected_fiber(self.law, p[0], p[1:], self.cfg, self.variant.kernel_variant)
        if self.dim is None:
            self.dim = Q.shape[1]
        elif Q.shape[1] != self.dim:
            raise SingularCrossingError(f"leaf dimension changed from {self.dim} to {Q.shape[1]} "
                                        f"at {p.tolist()}", trace=self.trace)
        return Q

    def __call__(self, p: np.ndarray, d: np.ndarray) -> np.ndarray:
        return project_direction(self.basis(p), d)


def project_direction(Q: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Unit vector of span(Q) closest to d; the first basis column when d ⟂ span(Q)."""
    v = Q @ (Q.T @ d)
    norm = np.linalg.norm(v)
    if norm < _ZERO_PROJECTION:
        return Q[:, 0].copy()
    return v / norm


def _rk4_step(field_: _DirectionField, p: np.ndarray, d: np.ndarray, h: float) -> np.ndarray:
    k1 = d
    k2 = field_(p + 0.5 * h * k1, d)
    k3 = field_(p + 0.5 * h * k2, d)
    k4 = field_(p + h * k3, d)
    return p + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def trace_leaf(law: ConstitutiveLaw, seed: Point, variant: LeafVariant,
               directions: Optional[Sequence[Sequence[float]]], steps: int, step_size: float,
               cfg: SamplingConfig) -> LeafTrace:
    """Follow each direction from the seed for `steps` RK4 steps.

    Directions are 4-vectors in (t, x¹, x², x³) and are projected onto the
    fiber at the seed; None follows every basis direction of that fiber.
    Raises NoLeafError when the projected fiber at the seed is {0}.
    """
    if steps < 0 or step_size <= 0:
        raise InvalidTraceError("steps must be nonnegative and step_size positive")
    variant = LeafVariant(variant)
    seed = (float(seed[0]), tuple(float(v) for v in seed[1]))
    p0 = _as_vector(seed)

    trace = LeafTrace(seed_point=seed, variant=variant, step=step_size, steps=steps)
    field_ = _DirectionField(law, variant, cfg, trace)
    Q0 = field_.basis(p0)
    if Q0.shape[1] == 0:
        raise NoLeafError(f"{variant.value} fiber of {law.name} is zero-dimensional at {p0.tolist()}")
    trace.append(p0, field_.dim, 0, 0)

    if directions is None:
        directions = [Q0[:, k] for k in range(Q0.shape[1])]
    for segment, direction in enumerate(directions, start=1):
        d = np.asarray(direction, dtype=float)
        if d.shape != (4,):
            raise InvalidTraceError("trace directions are 4-vectors (t, x1, x2, x3)")
        d = project_direction(Q0, d)
        p = p0.copy()
        for k in range(1, steps + 1):
            p = _rk4_step(field_, p, d, step_size)
            d = field_(p, d)
            trace.append(p, field_.dim, segment, k)
        logger.debug("segment %d of %s ended at %s", segment, law.name, p.tolist())
    return trace


@dataclass(frozen=True)
class FreezeTimeReport:
    seed_point: Point
    step: float
    steps: int
    body_dim: int
    state_dim: int
    body_slice: np.ndarray
    state_points: np.ndarray
    hausdorff: float

    @property
    def passed(self) -> bool:
        return self.hausdorff <= 5 * self.step

    def to_dict(self) -> dict:
        return {
            "seed": {"t": self.seed_point[0], "x": list(self.seed_point[1])},
            "step": self.step,
            "steps": self.steps,
            "body_dim": self.body_dim,
            "state_dim": self.state_dim,
            "body_slice_points": self.body_slice.tolist(),
            "state_points": self.state_points.tolist(),
            "hausdorff": self.hausdorff,
            "passed": self.passed,
        }


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    return float(max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0]))


def freeze_time_check(law: ConstitutiveLaw, seed: Point, cfg: SamplingConfig,
                      steps: int = 10, step: float = 1e-2) -> FreezeTimeReport:
    """Compare the t-slice of the body-material leaf with the state leaf.

    Both leaves are traced from the seed along ± each slice direction (the
    body fiber directions with no t-component); the body leaf is also traced
    along its most time-like direction and then cut to |t' − t| ≤ step/2.
    """
    seed = (float(seed[0]), tuple(float(v) for v in seed[1]))
    p0 = _as_vector(seed)
    Qb = projected_fiber(law, p0[0], p0[1:], cfg, Variant.FULL)
    Qs = projected_fiber(law, p0[0], p0[1:], cfg, Variant.STATE_T)

    body_points = [p0[None, :]]
    state_points = [p0[None, :]]
    if Qb.shape[1]:
        slice_dirs = Qb @ scipy.linalg.null_space(Qb[0:1, :])
        signed = [s * slice_dirs[:, k] for k in range(slice_dirs.shape[1]) for s in (1.0, -1.0)]
        time_like = Qb @ Qb[0, :]
        body_dirs = signed + ([time_like] if np.linalg.norm(time_like) > _ZERO_PROJECTION else [])
        if body_dirs:
            body = trace_leaf(law, seed, LeafVariant.BODY_MATERIAL, body_dirs, steps, step, cfg)
            body_points.append(body.as_array())
        if signed and Qs.shape[1]:
            state = trace_leaf(law, seed, LeafVariant.STATE_T, signed, steps, step, cfg)
            state_points.append(state.as_array())

    body_cloud = np.vstack(body_points)
    body_slice = body_cloud[np.abs(body_cloud[:, 0] - p0[0]) <= step / 2]
    state_cloud = np.vstack(state_points)
    distance = _hausdorff(body_slice, state_cloud)
    logger.debug("freeze-time check at %s: %d slice points, %d state points, distance %.3e",
                 p0.tolist(), len(body_slice), len(state_cloud), distance)
    return FreezeTimeReport(seed_point=seed, step=step, steps=steps, body_dim=Qb.shape[1], state_dim=Qs.shape[1],
                            body_slice=body_slice, state_points=state_cloud, hausdorff=distance)
