"""
Finite material isomorphisms between point-instants.

P is a material isomorphism from (t, x) to (s, y) when

    W(t, x, F·P) = W(s, y, F)   for every F.

The search minimizes the sampled residual over the nine entries of P with
Levenberg-Marquardt from several starts; a result counts only after it
holds on held-out samples.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .distributions import GridSpec, Point
from .dual import expm
from .errors import DomainError, IsomorphismNotFoundError, MatdistError, NonConvergedError
from .kernel import NullspaceResult, SamplingConfig, Variant, derive_seed, sample_gl3, solve_variants
from .law import DET_EPS, ConstitutiveLaw, response_gradient
from .workers import run_parallel

logger = logging.getLogger(__name__)

# LM schedule
MU_START = 1e-3
MU_FACTOR = 3.0
MU_MAX = 1e12
MU_MIN = 1e-12
MAX_STALLS = 3
STALL_IMPROVEMENT = 1e-6
START_SPREAD = 0.3

# above this multiple of tau_iso a search failure counts as NotFound rather than NonConverged
AMBIGUOUS_BAND = 1e3

TRANSITIVITY_CITATION = "uniform-remodeling corollary: one orbit of material isomorphisms over every instant and particle"


@dataclass(frozen=True)
class IsomorphismConfig:
    tau_iso: float = 1e-6
    n_starts: int = 8
    max_iter: int = 200

    def to_dict(self) -> dict:
        return {"tau_iso": self.tau_iso, "n_starts": self.n_starts, "max_iter": self.max_iter}


@dataclass(frozen=True)
class MaterialIsomorphism:
    source: Point
    target: Point
    P: np.ndarray
    residual: Optional[float] = None
    converged: bool = False
    inverse_residual: Optional[float] = None
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "from": {"t": self.source[0], "x": list(self.source[1])},
            "to": {"t": self.target[0], "x": list(self.target[1])},
            "P": self.P.tolist(),
            "det_P": float(np.linalg.det(self.P)),
            "residual": self.residual,
            "converged": self.converged,
            "inverse_residual": self.inverse_residual,
            "iterations": self.iterations,
        }


def _point(p) -> Point:
    t, x = p
    return (float(t), tuple(float(v) for v in x))


def _scaled_targets(law: ConstitutiveLaw, target: Point, samples: Sequence[np.ndarray]):
    s, y = target
    values = [law.evaluate(s, y, F) for F in samples]
    return values, [1.0 + np.linalg.norm(v) for v in values]


def _sample_residuals(law: ConstitutiveLaw, source: Point, target: Point, P: np.ndarray,
                      samples: Sequence[np.ndarray]) -> np.ndarray:
    """‖W(t,x,F·P) − W(s,y,F)‖ / (1 + ‖W(s,y,F)‖) per sample; inf where F·P leaves GL+(3)."""
    t, x = source
    targets, scales = _scaled_targets(law, target, samples)
    out = np.empty(len(samples))
    for k, F in enumerate(samples):
        try:
            out[k] = np.linalg.norm(law.evaluate(t, x, F @ P) - targets[k]) / scales[k]
        except DomainError:
            out[k] = np.inf
    return out


def membership_test(law: ConstitutiveLaw, candidate: MaterialIsomorphism, n_validation: int = 40,
                    seed: int = 7, spread: float = 0.75) -> float:
    """Max relative residual of candidate.P over fresh seeded F samples."""
    samples = sample_gl3(n_validation, derive_seed(seed, "membership"), spread)
    return float(np.max(_sample_residuals(law, candidate.source, candidate.target,
                                          np.asarray(candidate.P, dtype=float), samples)))


def compose(first: MaterialIsomorphism, second: MaterialIsomorphism) -> MaterialIsomorphism:
    """Candidate X → Z from X → Y and Y → Z (P = P_YZ · P_XY)."""
    if not (np.isclose(first.target[0], second.source[0]) and np.allclose(first.target[1], second.source[1])):
        raise ValueError("isomorphisms do not chain: first.target != second.source")
    return MaterialIsomorphism(source=first.source, target=second.target, P=second.P @ first.P)


def inverse(iso: MaterialIsomorphism) -> MaterialIsomorphism:
    """Candidate Y → X with P⁻¹."""
    return MaterialIsomorphism(source=iso.target, target=iso.source, P=np.linalg.inv(iso.P))


class _LeastSquares:
    """Stacked residual r(P) and its Jacobian in the entries of P."""

    def __init__(self, law: ConstitutiveLaw, source: Point, target: Point, samples: Sequence[np.ndarray]):
        self.law = law
        self.t, self.x = source
        self.samples = list(samples)
        self.targets, self.scales = _scaled_targets(law, target, self.samples)

    def evaluate(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        P = p.reshape(3, 3)
        m = self.law.output_dim
        residual = np.empty((len(self.samples), m))
        jacobian = np.empty((len(self.samples), m, 9))
        for k, F in enumerate(self.samples):
            value, d_F = response_gradient(self.law, self.t, self.x, F @ P)
            residual[k] = (value - self.targets[k]) / self.scales[k]
            # ∂W(F·P)/∂P_kl = Σ_i ∂W/∂G_il · F_ik
            jacobian[k] = np.einsum("ik,ail->akl", F, d_F.reshape(m, 3, 3)).reshape(m, 9) / self.scales[k]
        return residual.ravel(), jacobian.reshape(-1, 9)

    def max_residual(self, r: np.ndarray) -> float:
        return float(np.max(np.linalg.norm(r.reshape(len(self.samples), -1), axis=1)))


def _levenberg_marquardt(problem: _LeastSquares, P0: np.ndarray, max_iter: int,
                         target: float) -> Tuple[np.ndarray, int]:
    p = P0.ravel().astype(float)
    r, J = problem.evaluate(p)
    cost = float(r @ r)
    mu = MU_START
    stalls = 0
    iteration = 0
    for iteration in range(1, max_iter + 1):
        if problem.max_residual(r) <= target:
            break
        g = J.T @ r
        try:
            delta = scipy.linalg.solve(J.T @ J + mu * np.eye(9), -g, assume_a="pos")
        except np.linalg.LinAlgError:
            mu *= MU_FACTOR
            continue
        if np.linalg.norm(delta) <= 1e-15 * (1.0 + np.linalg.norm(p)):
            break

        p_new = p + delta
        accepted = False
        if np.linalg.det(p_new.reshape(3, 3)) > DET_EPS:
            try:
                r_new, J_new = problem.evaluate(p_new)
                cost_new = float(r_new @ r_new)
                accepted = cost_new < cost
            except DomainError:
                pass

        if accepted:
            stalls = stalls + 1 if (cost - cost_new) <= STALL_IMPROVEMENT * cost else 0
            p, r, J, cost = p_new, r_new, J_new, cost_new
            mu = max(mu / MU_FACTOR, MU_MIN)
            if stalls >= MAX_STALLS:
                break
        else:
            mu *= MU_FACTOR
            if mu > MU_MAX:
                break
    logger.debug("LM stopped after %d iterations, cost %.3e", iteration, cost)
    return p.reshape(3, 3), iteration


def _starts(n_starts: int, seed: int) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [np.eye(3)] + [expm(START_SPREAD * rng.standard_normal((3, 3))) for _ in range(n_starts)]


def find_isomorphism(law: ConstitutiveLaw, source: Point, target: Point, cfg: SamplingConfig,
                     iso_cfg: IsomorphismConfig = IsomorphismConfig(),
                     seed_keys: Sequence[int] = ()) -> MaterialIsomorphism:
    """Search P with W(t, x, F·P) = W(s, y, F) on sampled F.

    Raises IsomorphismNotFoundError when the best validated residual stays
    above the ambiguous band, NonConvergedError inside it.
    """
    source, target = _point(source), _point(target)
    training = cfg.training_samples()
    validation = cfg.validation_samples() or training
    problem = _LeastSquares(law, source, target, training)
    tol = iso_cfg.tau_iso

    best_P, best_residual, best_iterations = None, np.inf, 0
    for k, P0 in enumerate(_starts(iso_cfg.n_starts, derive_seed(cfg.seed, "starts", *seed_keys))):
        try:
            P, iterations = _levenberg_marquardt(problem, P0, iso_cfg.max_iter, 1e-3 * tol)
        except DomainError:
            logger.debug("start %d leaves GL+(3) on the samples, skipped", k)
            continue
        if np.linalg.det(P) <= DET_EPS:
            continue
        residual = float(np.max(_sample_residuals(law, source, target, P, validation)))
        logger.debug("start %d: validated residual %.3e after %d iterations", k, residual, iterations)
        if residual < best_residual:
            best_P, best_residual, best_iterations = P, residual, iterations
        if residual <= tol:
            break

    if best_residual <= tol:
        inverse_residual = float(np.max(_sample_residuals(law, target, source, np.linalg.inv(best_P), validation)))
        if inverse_residual > 10 * tol:
            raise NonConvergedError("inverse of the found isomorphism fails validation", best_residual, best_P)
        return MaterialIsomorphism(source=source, target=target, P=best_P, residual=best_residual,
                                   converged=True, inverse_residual=inverse_residual, iterations=best_iterations)
    if best_residual < AMBIGUOUS_BAND * tol:
        raise NonConvergedError("search ended in the ambiguous band", best_residual, best_P)
    raise IsomorphismNotFoundError("no material isomorphism found", best_residual, best_P)


# --- symmetry algebra ------------------------------------------------------


@dataclass(frozen=True)
class SymmetryAlgebra:
    point: Point
    nullspace: NullspaceResult
    generators: List[np.ndarray]
    exp_residuals: List[Dict[float, float]]
    second_order: List[bool]

    @property
    def dim(self) -> int:
        return self.nullspace.dim

    def to_dict(self) -> dict:
        return {
            "point": {"t": self.point[0], "x": list(self.point[1])},
            "dim": self.dim,
            "generators": [g.tolist() for g in self.generators],
            "exp_residuals": [{repr(eps): res for eps, res in r.items()} for r in self.exp_residuals],
            "second_order": self.second_order,
        }


def symmetry_algebra(law: ConstitutiveLaw, at: Point, cfg: SamplingConfig,
                     epsilons: Tuple[float, float] = (1e-2, 1e-3)) -> SymmetryAlgebra:
    """Linearized symmetry algebra at a point, with exp(εΘ) membership checks.

    A generator passes the second-order check when the residual ratio
    between the two ε lies in [50, 200] or the fine residual is at round-off.
    """
    at = _point(at)
    result = solve_variants(law, at[0], at[1], [Variant.ISOTROPY], cfg)[Variant.ISOTROPY]
    generators = [result.basis[:, k].reshape(3, 3) for k in range(result.dim)]
    n_check = cfg.n_validation if cfg.n_validation > 0 else cfg.n_f

    residuals, flags = [], []
    coarse, fine = epsilons
    for theta in generators:
        res = {}
        for eps in epsilons:
            candidate = MaterialIsomorphism(source=at, target=at, P=expm(eps * theta))
            res[eps] = membership_test(law, candidate, n_check, cfg.seed, cfg.spread)
        ratio = res[coarse] / res[fine] if res[fine] > 0 else np.inf
        flags.append(bool(res[fine] <= 1e-14 or 50.0 <= ratio <= 200.0))
        residuals.append(res)
    return SymmetryAlgebra(point=at, nullspace=result, generators=generators,
                           exp_residuals=residuals, second_order=flags)


# --- transitivity ----------------------------------------------------------


@dataclass(frozen=True)
class PairEvidence:
    anchor: int
    other: int
    source: Point
    target: Point
    status: str
    residual: Optional[float]
    P: Optional[np.ndarray] = None

    @property
    def found(self) -> bool:
        return self.status == "found"

    def row(self) -> dict:
        return {
            "anchor": self.anchor,
            "other": self.other,
            "t_from": self.source[0],
            "x1_from": self.source[1][0],
            "x2_from": self.source[1][1],
            "x3_from": self.source[1][2],
            "t_to": self.target[0],
            "x1_to": self.target[1][0],
            "x2_to": self.target[1][1],
            "x3_to": self.target[1][2],
            "status": self.status,
            "residual": self.residual,
        }

    def to_dict(self) -> dict:
        record = self.row()
        record["P"] = None if self.P is None else self.P.tolist()
        return record


@dataclass(frozen=True)
class TransitivityReport:
    points: List[Point]
    pairs: List[PairEvidence]
    orbits: List[List[int]]
    state_uniform: Dict[float, bool] = field(default_factory=dict)
    particle_remodeling: Dict[Tuple[float, float, float], bool] = field(default_factory=dict)

    @property
    def uniform_remodeling_evidence(self) -> bool:
        return len(self.orbits) == 1

    @property
    def uniform_aging_evidence(self) -> bool:
        return len(self.orbits) > 1 and all(self.state_uniform.values())

    def to_dict(self) -> dict:
        return {
            "points": [{"t": t, "x": list(x)} for t, x in self.points],
            "pairs": [pair.to_dict() for pair in self.pairs],
            "orbits": self.orbits,
            "state_uniform": [{"t": t, "uniform": flag} for t, flag in sorted(self.state_uniform.items())],
            "particle_remodeling": [{"x": list(x), "remodeling": flag}
                                    for x, flag in sorted(self.particle_remodeling.items())],
            "uniform_remodeling_evidence": self.uniform_remodeling_evidence,
            "uniform_aging_evidence": self.uniform_aging_evidence,
            "criterion": "uniform remodeling evidence requires every sampled pair of "
                         "point-instants to be connected by a found material isomorphism",
            "citation": TRANSITIVITY_CITATION,
        }


def _probe_pair(law: ConstitutiveLaw, points: List[Point], anchor: int, other: int,
                cfg: SamplingConfig, iso_cfg: IsomorphismConfig) -> PairEvidence:
    source, target = points[anchor], points[other]
    try:
        iso = find_isomorphism(law, source, target, cfg, iso_cfg, seed_keys=(anchor, other))
        return PairEvidence(anchor, other, source, target, "found", iso.residual, iso.P)
    except NonConvergedError as e:
        return PairEvidence(anchor, other, source, target, "non_converged", e.best_residual, e.best_P)
    except IsomorphismNotFoundError as e:
        return PairEvidence(anchor, other, source, target, "not_found", e.best_residual, e.best_P)
    except MatdistError as e:
        logger.warning("pair %d -> %d failed: %s", anchor, other, e)
        return PairEvidence(anchor, other, source, target, "failed", None)


def transitivity_probe(law: ConstitutiveLaw, grid: GridSpec, cfg: SamplingConfig,
                       iso_cfg: IsomorphismConfig = IsomorphismConfig(),
                       jobs: Optional[int] = 1) -> TransitivityReport:
    """Pairwise isomorphism evidence, grouped into orbits anchor by anchor.

    Each anchor is the first point not yet in an orbit; it is probed against
    every other unassigned point and the ones it reaches join its orbit.
    """
    points = [_point(p) for p in grid.points()]
    unassigned = list(range(len(points)))
    pairs: List[PairEvidence] = []
    orbits: List[List[int]] = []

    while unassigned:
        anchor = unassigned.pop(0)
        evidence = run_parallel(lambda j: _probe_pair(law, points, anchor, j, cfg, iso_cfg), unassigned, jobs)
        pairs.extend(evidence)
        reached = {e.other for e in evidence if e.found}
        orbits.append([anchor] + sorted(reached))
        unassigned = [j for j in unassigned if j not in reached]

    orbit_of = {i: k for k, orbit in enumerate(orbits) for i in orbit}
    state_uniform = {}
    for t, group in itertools.groupby(sorted(range(len(points)), key=lambda i: points[i][0]),
                                      key=lambda i: points[i][0]):
        state_uniform[t] = len({orbit_of[i] for i in group}) == 1
    particle_remodeling = {}
    for x, group in itertools.groupby(sorted(range(len(points)), key=lambda i: points[i][1]),
                                      key=lambda i: points[i][1]):
        particle_remodeling[x] = len({orbit_of[i] for i in group}) == 1

    logger.debug("%s: %d points in %d orbits", law.name, len(points), len(orbits))
    return TransitivityReport(points=points, pairs=pairs, orbits=orbits,
                              state_uniform=state_uniform, particle_remodeling=particle_remodeling)
