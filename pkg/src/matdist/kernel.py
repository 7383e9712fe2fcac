"""
Kernel equations of the material groupoid, realized by sampling F.

For unknowns (λ, Θ¹..Θ³, Θ¹₁..Θ³₃) the admissibility equation at (t, x) is

    λ ∂W/∂t + Θⁱ ∂W/∂xⁱ + (F Θ)ⁱⱼ ∂W/∂Fⁱⱼ = 0   for every F.

Each sampled F contributes an m-row block; the solution space at (t, x)
is the nullspace of the stacked system, validated on held-out samples.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import RankUnstableError, UnderdeterminedError
from .law import DET_EPS, ConstitutiveLaw, jet

logger = logging.getLogger(__name__)

# column layout of the Full system
LAMBDA_COLUMN = 0
THETA_X_COLUMNS = (1, 2, 3)
THETA_F_COLUMNS = tuple(range(4, 13))

# singular values within this factor of the threshold make the rank ambiguous
AMBIGUITY_FACTOR = 10.0


class Variant(str, Enum):
    FULL = "Full"
    STATE_T = "StateT"
    PARTICLE_X = "ParticleX"
    ISOTROPY = "Isotropy"

    @property
    def columns(self) -> Tuple[int, ...]:
        return _VARIANT_COLUMNS[self]

    @property
    def unknown_dim(self) -> int:
        return len(self.columns)


_VARIANT_COLUMNS = {
    Variant.FULL: (LAMBDA_COLUMN,) + THETA_X_COLUMNS + THETA_F_COLUMNS,
    Variant.STATE_T: THETA_X_COLUMNS + THETA_F_COLUMNS,
    Variant.PARTICLE_X: (LAMBDA_COLUMN,) + THETA_F_COLUMNS,
    Variant.ISOTROPY: THETA_F_COLUMNS,
}


@dataclass(frozen=True)
class SamplingConfig:
    n_f: int = 40
    n_validation: int = 40
    seed: int = 7
    spread: float = 0.75
    tau_rank: float = 1e-8
    tau_accept: float = 1e-6
    jet_mode: str = "auto"

    def training_samples(self) -> List[np.ndarray]:
        return sample_gl3(self.n_f, self.seed, self.spread)

    def validation_samples(self) -> List[np.ndarray]:
        if self.n_validation <= 0:
            return []
        return sample_gl3(self.n_validation, derive_seed(self.seed, "validation"), self.spread)

    def to_dict(self) -> dict:
        return {
            "n_f": self.n_f,
            "n_validation": self.n_validation,
            "seed": self.seed,
            "spread": self.spread,
            "tau_rank": self.tau_rank,
            "tau_accept": self.tau_accept,
            "jet_mode": self.jet_mode,
        }


@dataclass(frozen=True)
class KernelProblem:
    variant: Variant
    t: float
    x: Tuple[float, float, float]
    f_samples: Tuple[np.ndarray, ...]

    @property
    def unknown_dim(self) -> int:
        return self.variant.unknown_dim

    def validate(self, output_dim: int) -> None:
        if output_dim * len(self.f_samples) < self.unknown_dim:
            raise UnderdeterminedError(f"{output_dim}·{len(self.f_samples)} rows cannot determine "
                                       f"{self.unknown_dim} unknowns")
        for F in self.f_samples:
            if not np.linalg.det(F) > DET_EPS:
                raise ValueError("F sample outside GL+(3)")


@dataclass(frozen=True)
class NullspaceResult:
    basis: np.ndarray
    dim: int
    singular_values: np.ndarray
    threshold: float
    validation_residual: np.ndarray

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "basis": self.basis.tolist(),
            "singular_values": self.singular_values.tolist(),
            "threshold": self.threshold,
            "validation_residual": self.validation_residual.tolist(),
        }


def derive_seed(seed: int, *keys) -> int:
    """Stable child seed for a named stream of the run seed."""
    entropy = [int(seed)]
    for key in keys:
        if isinstance(key, str):
            entropy.extend(key.encode("utf-8"))
        else:
            entropy.append(int(key))
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def sample_gl3(n: int, seed: int, spread: float = 0.75) -> List[np.ndarray]:
    """n deterministic samples exp(spread·S) from GL+(3), starting with I."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    samples = [np.eye(3)]
    while len(samples) < n:
        F = scipy.linalg.expm(spread * rng.standard_normal((3, 3)) / 3.0)
        if np.linalg.det(F) > DET_EPS:
            samples.append(F)
    return samples


def full_system(law: ConstitutiveLaw, t: float, x: Sequence[float], f_samples: Sequence[np.ndarray],
                mode: str = "auto") -> np.ndarray:
    """Stacked (m·N_F) × 13 system over [∂W/∂t | ∂W/∂xⁱ | (Fᵀ ∂W/∂F)]."""
    blocks = []
    for F in f_samples:
        j = jet(law, t, x, F, mode)
        G = j.d_F.reshape(law.output_dim, 3, 3)
        theta = np.einsum("il,aij->alj", F, G).reshape(law.output_dim, 9)
        blocks.append(np.hstack([j.d_t[:, None], j.d_x, theta]))
    return np.vstack(blocks)


def assemble(law: ConstitutiveLaw, problem: KernelProblem, mode: str = "auto") -> np.ndarray:
    problem.validate(law.output_dim)
    A = full_system(law, problem.t, problem.x, problem.f_samples, mode)
    return A[:, list(problem.variant.columns)]


def nullspace(A: np.ndarray, tau_rank: float = 1e-8, validation: Optional[np.ndarray] = None,
              tau_accept: float = 1e-6) -> NullspaceResult:
    """Rank-revealing nullspace of A by SVD.

    Singular values at or below tau_rank·σ_max count as zero. Any singular
    value within AMBIGUITY_FACTOR of that threshold raises RankUnstableError.
    When a held-out system is given, every basis vector must satisfy it to
    tau_accept relative to its spectral norm.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.all(np.isfinite(A)):
        raise ValueError("system matrix is not finite")
    n = A.shape[1]
    _, s, vh = scipy.linalg.svd(A, full_matrices=True)
    spectrum = np.zeros(n)
    spectrum[:s.size] = s[:n]
    sigma_max = spectrum[0] if n else 0.0
    threshold = tau_rank * sigma_max

    if sigma_max > 0:
        ambiguous = (spectrum > threshold / AMBIGUITY_FACTOR) & (spectrum < threshold * AMBIGUITY_FACTOR)
        if np.any(ambiguous):
            raise RankUnstableError(f"singular value {spectrum[ambiguous][0]:.3e} too close to "
                                    f"threshold {threshold:.3e}")
    rank = int(np.count_nonzero(spectrum > threshold)) if sigma_max > 0 else 0
    basis = vh[rank:].T.copy()

    residual = np.zeros(basis.shape[1])
    if validation is not None and basis.shape[1]:
        validation = np.atleast_2d(validation)
        scale = np.linalg.norm(validation, 2)
        if scale > 0:
            residual = np.max(np.abs(validation @ basis), axis=0) / scale
        if np.any(residual > tau_accept):
            raise RankUnstableError(f"basis fails held-out samples (residual {residual.max():.3e})")

    return NullspaceResult(basis=basis, dim=basis.shape[1], singular_values=spectrum,
                           threshold=threshold, validation_residual=residual)


def solve_variants(law: ConstitutiveLaw, t: float, x: Sequence[float], variants: Sequence[Variant],
                   cfg: SamplingConfig) -> dict:
    """Nullspaces for several variants sharing one set of F samples."""
    train = full_system(law, t, x, cfg.training_samples(), cfg.jet_mode)
    held_out = cfg.validation_samples()
    check = full_system(law, t, x, held_out, cfg.jet_mode) if held_out else None

    results = {}
    for variant in variants:
        if law.output_dim * cfg.n_f < variant.unknown_dim:
            raise UnderdeterminedError(f"{law.output_dim}·{cfg.n_f} sample rows cannot determine "
                                       f"{variant.value} ({variant.unknown_dim} unknowns)")
        cols = list(variant.columns)
        try:
            results[variant] = nullspace(train[:, cols], cfg.tau_rank,
                                         None if check is None else check[:, cols], cfg.tau_accept)
        except RankUnstableError as e:
            raise RankUnstableError(str(e), variant=variant.value) from e
    logger.debug("dims at t=%s x=%s: %s", t, list(x), {v.value: r.dim for v, r in results.items()})
    return results


def solve(law: ConstitutiveLaw, problem: KernelProblem, cfg: SamplingConfig) -> NullspaceResult:
    """Nullspace of one kernel problem, validated on cfg's held-out samples."""
    A = assemble(law, problem, cfg.jet_mode)
    held_out = cfg.validation_samples()
    check = None
    if held_out:
        check = full_system(law, problem.t, problem.x, held_out, cfg.jet_mode)[:, list(problem.variant.columns)]
    return nullspace(A, cfg.tau_rank, check, cfg.tau_accept)
