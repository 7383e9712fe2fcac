"""
Material distributions at identities and their projections to body-time.

A fiber report bundles the four kernel nullspaces at one (t, x) and the
ranks of their base projections:

    Full       -> (λ, Θ¹, Θ², Θ³)  body-material directions in (t, x)
    StateT     -> (Θ¹, Θ², Θ³)     directions inside the state at time t
    ParticleX  -> λ               can the particle move in time
    Isotropy   -> Θ               linearized symmetries
"""

import dataclasses
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import MatdistError, RankUnstableError
from .kernel import NullspaceResult, SamplingConfig, Variant, derive_seed, solve_variants
from .law import ConstitutiveLaw
from .workers import run_parallel

logger = logging.getLogger(__name__)

ALL_VARIANTS = (Variant.FULL, Variant.STATE_T, Variant.PARTICLE_X, Variant.ISOTROPY)

# rows of each variant's basis that map to body-time coordinates (t, x¹, x², x³)
_BASE_ROWS = {
    Variant.FULL: slice(0, 4),
    Variant.STATE_T: slice(0, 3),
    Variant.PARTICLE_X: slice(0, 1),
    Variant.ISOTROPY: slice(0, 0),
}

Point = Tuple[float, Tuple[float, float, float]]


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid over (t, x¹, x², x³); x² and x³ usually pinned."""

    t_values: Tuple[float, ...]
    x1_values: Tuple[float, ...]
    x2_values: Tuple[float, ...] = (0.0,)
    x3_values: Tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if not all((self.t_values, self.x1_values, self.x2_values, self.x3_values)):
            raise ValueError("grid axes must be nonempty")

    @classmethod
    def regular(cls, t_range: Tuple[float, float], t_count: int, x1_range: Tuple[float, float], x1_count: int,
                x2: float = 0.0, x3: float = 0.0) -> "GridSpec":
        return cls(t_values=axis_values(*t_range, t_count), x1_values=axis_values(*x1_range, x1_count),
                   x2_values=(float(x2),), x3_values=(float(x3),))

    def points(self) -> List[Point]:
        """Grid points in row-major order (t slowest, x³ fastest)."""
        return [(t, (x1, x2, x3)) for t, x1, x2, x3 in
                itertools.product(self.t_values, self.x1_values, self.x2_values, self.x3_values)]

    def __len__(self) -> int:
        return len(self.t_values) * len(self.x1_values) * len(self.x2_values) * len(self.x3_values)


def axis_values(lo: float, hi: float, count: int) -> Tuple[float, ...]:
    """count evenly spaced values from lo to hi; lo alone when count is 1."""
    if count < 1:
        raise ValueError("grid counts must be at least 1")
    if count == 1:
        return (float(lo),)
    return tuple(float(v) for v in np.linspace(lo, hi, count))


@dataclass(frozen=True)
class FiberReport:
    """Dimensions of the material distributions at one point.

    A failed point keeps its coordinates and error text; all dims are None.
    """

    t: float
    x: Tuple[float, float, float]
    dim_full: Optional[int] = None
    dim_base: Optional[int] = None
    dim_state_t: Optional[int] = None
    dim_state_t_base: Optional[int] = None
    dim_particle_x: Optional[int] = None
    dim_particle_x_base: Optional[int] = None
    dim_isotropy: Optional[int] = None
    dim_vertical: Optional[int] = None
    n_f: Optional[int] = None
    bases: Dict[Variant, np.ndarray] = field(default_factory=dict, compare=False, repr=False)
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def point(self) -> Point:
        return (self.t, self.x)

    def summary(self) -> dict:
        """Flat record without bases, for tables and verdicts."""
        return {
            "t": self.t,
            "x1": self.x[0],
            "x2": self.x[1],
            "x3": self.x[2],
            "dim_full": self.dim_full,
            "dim_base": self.dim_base,
            "dim_state_t": self.dim_state_t,
            "dim_state_t_base": self.dim_state_t_base,
            "dim_particle_x": self.dim_particle_x,
            "dim_particle_x_base": self.dim_particle_x_base,
            "dim_isotropy": self.dim_isotropy,
            "dim_vertical": self.dim_vertical,
            "status": "failed" if self.failed else "ok",
            "error": self.error,
        }

    def to_dict(self) -> dict:
        record = self.summary()
        record["bases"] = {variant.value: basis.tolist() for variant, basis in self.bases.items()}
        return record


def range_basis(block: np.ndarray, tau_rank: float) -> np.ndarray:
    """Orthonormal basis of the column span of block, by pivoted QR."""
    block = np.atleast_2d(block)
    if block.size == 0:
        return np.zeros((block.shape[0], 0))
    q, r, _ = scipy.linalg.qr(block, mode="economic", pivoting=True)
    rank = int(np.count_nonzero(np.abs(np.diag(r)) > tau_rank))
    return q[:, :rank]


def projected_rank(basis: np.ndarray, variant: Variant, tau_rank: float) -> int:
    """Rank of the base-coordinate block of a variant's nullspace basis."""
    return range_basis(basis[_BASE_ROWS[variant], :], tau_rank).shape[1]


def projected_basis(basis: np.ndarray, variant: Variant, tau_rank: float) -> np.ndarray:
    """Orthonormal 4×d basis of projected directions in (t, x¹, x², x³)."""
    if variant == Variant.FULL:
        return range_basis(basis[0:4, :], tau_rank)
    if variant == Variant.STATE_T:
        spatial = range_basis(basis[0:3, :], tau_rank)
        return np.vstack([np.zeros((1, spatial.shape[1])), spatial])
    raise ValueError(f"{variant.value} has no body-time projection to trace")


def projected_fiber(law: ConstitutiveLaw, t: float, x: Sequence[float], cfg: SamplingConfig,
                    variant: Variant = Variant.FULL) -> np.ndarray:
    """Projected directions at (t, x) for one variant, without a full report."""
    result = solve_variants(law, t, x, [variant], cfg)[variant]
    return projected_basis(result.basis, variant, cfg.tau_rank)


def _build_report(t: float, x: Tuple[float, float, float], results: Dict[Variant, NullspaceResult],
                  cfg: SamplingConfig) -> FiberReport:
    full = results[Variant.FULL]
    dim_base = projected_rank(full.basis, Variant.FULL, cfg.tau_rank)
    dim_vertical = full.dim - dim_base
    dim_isotropy = results[Variant.ISOTROPY].dim
    if dim_vertical != dim_isotropy:
        raise RankUnstableError(f"vertical part of the fiber has dim {dim_vertical}, "
                                f"isotropy nullspace has dim {dim_isotropy}", variant=Variant.ISOTROPY.value)
    return FiberReport(
        t=t,
        x=x,
        dim_full=full.dim,
        dim_base=dim_base,
        dim_state_t=results[Variant.STATE_T].dim,
        dim_state_t_base=projected_rank(results[Variant.STATE_T].basis, Variant.STATE_T, cfg.tau_rank),
        dim_particle_x=results[Variant.PARTICLE_X].dim,
        dim_particle_x_base=projected_rank(results[Variant.PARTICLE_X].basis, Variant.PARTICLE_X, cfg.tau_rank),
        dim_isotropy=dim_isotropy,
        dim_vertical=dim_vertical,
        n_f=cfg.n_f,
        bases={variant: result.basis for variant, result in results.items()},
    )


def fiber_report(law: ConstitutiveLaw, t: float, x: Sequence[float], cfg: SamplingConfig,
                 retries: int = 1) -> FiberReport:
    """All four nullspaces at (t, x) on shared F samples, plus projected ranks.

    An ambiguous rank is retried with twice the samples and a derived seed
    before RankUnstableError propagates.
    """
    x = tuple(float(v) for v in x)
    t = float(t)
    attempt_cfg = cfg
    for attempt in range(retries + 1):
        try:
            results = solve_variants(law, t, x, ALL_VARIANTS, attempt_cfg)
            return _build_report(t, x, results, attempt_cfg)
        except RankUnstableError as e:
            if attempt == retries:
                raise
            attempt_cfg = dataclasses.replace(attempt_cfg, n_f=2 * attempt_cfg.n_f,
                                              seed=derive_seed(cfg.seed, "resample", attempt + 1))
            logger.warning("ambiguous rank at t=%s x=%s (%s), resampling with n_f=%d",
                           t, list(x), e, attempt_cfg.n_f)
    raise AssertionError("unreachable")


def grid_sweep(law: ConstitutiveLaw, grid: GridSpec, cfg: SamplingConfig,
               jobs: Optional[int] = 1) -> List[FiberReport]:
    """One FiberReport per grid point in row-major order; failures are flagged, not raised."""

    def evaluate(point: Point) -> FiberReport:
        t, x = point
        try:
            return fiber_report(law, t, x, cfg)
        except MatdistError as e:
            logger.warning("grid point t=%s x=%s failed: %s", t, list(x), e)
            return FiberReport(t=float(t), x=tuple(float(v) for v in x), error=f"{type(e).__name__}: {e}")

    reports = run_parallel(evaluate, grid.points(), jobs)
    failed = sum(report.failed for report in reports)
    logger.debug("sweep of %s: %d points, %d failed", law.name, len(reports), failed)
    return reports
